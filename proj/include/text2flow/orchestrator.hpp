#pragma once

// Multi-round extraction loop: build (or refine) -> simulate and critique ->
// semantic check -> score and select -> next round.
//
// Journal directory layout:
//   round_<t>.json     one RoundRecord per completed round
//   final.flow.txt     DSL of the final graph
//   final.graph.json   canonical JSON of the final graph
//   transcript.jsonl   every agent call of every round, in order
//   error.json         only when the run ended on a backend failure
// A re-run over an existing journal reloads completed rounds instead of
// calling the backend again.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "text2flow/agents.hpp"
#include "text2flow/error.hpp"
#include "text2flow/flow_dsl.hpp"
#include "text2flow/graph.hpp"
#include "text2flow/prioritizer.hpp"
#include "text2flow/prompts.hpp"
#include "text2flow/simulator.hpp"

namespace text2flow {

struct RunConfig {
  int max_rounds = 2;  // round 0 (build) included
  sim::SimulationConfig simulation;
  PrioritizerConfig prioritizer;
  bool stop_when_no_feedback = true;
  double min_weight = 0.0;  // stop once no item reaches this weight
  std::size_t max_critique_issues = 20;
  unsigned agent_workers = 1;  // concurrent semantic checks per round
  bool segment_checks = true;

  void validate() const {
    if (max_rounds < 1) throw Error(ErrorCode::InvalidArgument, "max rounds must be at least 1");
    if (min_weight < 0.0) throw Error(ErrorCode::InvalidArgument, "min weight must be non-negative");
    if (max_critique_issues < 1) throw Error(ErrorCode::InvalidArgument, "max critique issues must be positive");
    if (agent_workers < 1) throw Error(ErrorCode::InvalidArgument, "agent workers must be positive");
    simulation.validate();
    prioritizer.validate();
  }
};

struct IssueSummary {
  std::string key;
  sim::StructuralIssue issue;
  std::size_t count = 0;  // 0 for static findings
  double u = 0.0;
};

struct VerdictRecord {
  std::string subject;
  std::string span;
  std::string description;
  agents::VerdictStatus status = agents::VerdictStatus::Approved;
  std::string suggestion;
};

struct RoundRecord {
  int round = 0;
  std::string input_graph;   // DSL fed to the refiner; empty in round 0
  std::vector<std::string> prompt_feedback;
  std::string raw_output;    // last builder/refiner reply
  int generation_attempts = 0;
  bool fallback = false;     // output unusable, previous graph kept
  std::vector<dsl::ParseDiagnostic> diagnostics;
  std::string graph;         // serialized DSL of the graph this round produced
  std::size_t trials = 0;
  std::size_t failing_trials = 0;
  std::vector<IssueSummary> issues;  // simulated, then static
  std::size_t critique_issues = 0;
  std::vector<VerdictRecord> verdicts;
  std::vector<ScoredItem> pool;
  std::vector<std::size_t> selected;  // indices into pool, in selection order
  std::size_t selected_tokens = 0;
  std::size_t failed_calls = 0;
  std::string stop_reason;  // empty when the loop continued
  std::vector<agents::TranscriptEntry> transcript;
  std::vector<std::string> warnings;

  std::vector<FeedbackItem> selected_items() const {
    std::vector<FeedbackItem> out;
    for (std::size_t i : selected) out.push_back(pool.at(i).item);
    return out;
  }
};

struct RunResult {
  ProceduralGraph graph;
  std::string dsl;
  std::vector<RoundRecord> rounds;
  bool partial = false;  // ended on a backend failure
  std::string error;
  std::string stop_reason;
};

// ---------------------------------------------------------------------------
// Journal serialization.

namespace journal {

inline agents::TranscriptEntry transcript_from_json(const nlohmann::ordered_json& j) {
  agents::TranscriptEntry e;
  auto role = agents::role_from_string(j.at("role").get<std::string>());
  if (!role) throw Error(ErrorCode::Config, "unknown role in journal");
  e.role = *role;
  e.prompt_hash = j.at("prompt_hash").get<std::string>();
  e.usage.prompt_tokens = j.at("prompt_tokens").get<long>();
  e.usage.completion_tokens = j.at("completion_tokens").get<long>();
  e.latency_ms = j.at("latency_ms").get<long>();
  e.attempts = j.at("attempts").get<int>();
  e.error = j.value("error", std::string{});
  e.prompt = j.at("prompt").get<std::string>();
  e.response = j.at("response").get<std::string>();
  return e;
}

inline nlohmann::ordered_json to_json(const RoundRecord& r) {
  using oj = nlohmann::ordered_json;
  oj j;
  j["round"] = r.round;
  j["input_graph"] = r.input_graph;
  j["prompt_feedback"] = r.prompt_feedback;
  j["raw_output"] = r.raw_output;
  j["generation_attempts"] = r.generation_attempts;
  j["fallback"] = r.fallback;
  oj diags = oj::array();
  for (const auto& d : r.diagnostics) {
    diags.push_back(oj{{"line", d.line}, {"severity", std::string(dsl::to_string(d.severity))}, {"message", d.message},
                       {"raw", d.raw}});
  }
  j["diagnostics"] = diags;
  j["graph"] = r.graph;
  oj simj;
  simj["trials"] = r.trials;
  simj["failing_trials"] = r.failing_trials;
  oj issues = oj::array();
  for (const auto& is : r.issues) {
    oj ij;
    ij["key"] = is.key;
    ij["issue"] = sim::issue_to_json(is.issue);
    ij["count"] = is.count;
    ij["u"] = is.u;
    issues.push_back(ij);
  }
  simj["issues"] = issues;
  j["simulation"] = simj;
  j["critique_issues"] = r.critique_issues;
  oj verdicts = oj::array();
  for (const auto& v : r.verdicts) {
    verdicts.push_back(oj{{"subject", v.subject},
                          {"status", v.status == agents::VerdictStatus::Wrong ? "wrong" : "approved"},
                          {"span", v.span},
                          {"description", v.description},
                          {"suggestion", v.suggestion}});
  }
  j["verdicts"] = verdicts;
  oj pool = oj::array();
  std::set<std::size_t> sel(r.selected.begin(), r.selected.end());
  for (std::size_t i = 0; i < r.pool.size(); ++i) {
    oj item = ledger_record(r.round, r.pool[i], sel.count(i) > 0);
    item["created"] = r.pool[i].item.round;
    pool.push_back(item);
  }
  j["feedback"] = pool;
  j["selected"] = r.selected;
  j["selected_tokens"] = r.selected_tokens;
  j["failed_calls"] = r.failed_calls;
  j["stop_reason"] = r.stop_reason;
  j["warnings"] = r.warnings;
  oj tr = oj::array();
  for (const auto& e : r.transcript) tr.push_back(agents::to_json(e));
  j["transcript"] = tr;
  return j;
}

inline RoundRecord round_from_json(const nlohmann::ordered_json& j) {
  RoundRecord r;
  try {
    r.round = j.at("round").get<int>();
    r.input_graph = j.at("input_graph").get<std::string>();
    r.prompt_feedback = j.at("prompt_feedback").get<std::vector<std::string>>();
    r.raw_output = j.at("raw_output").get<std::string>();
    r.generation_attempts = j.at("generation_attempts").get<int>();
    r.fallback = j.at("fallback").get<bool>();
    for (const auto& d : j.at("diagnostics")) {
      r.diagnostics.push_back({d.at("line").get<int>(),
                               d.at("severity").get<std::string>() == "error" ? dsl::Severity::Error
                                                                              : dsl::Severity::Warning,
                               d.at("message").get<std::string>(), d.at("raw").get<std::string>()});
    }
    r.graph = j.at("graph").get<std::string>();
    const auto& simj = j.at("simulation");
    r.trials = simj.at("trials").get<std::size_t>();
    r.failing_trials = simj.at("failing_trials").get<std::size_t>();
    for (const auto& ij : simj.at("issues")) {
      r.issues.push_back({ij.at("key").get<std::string>(), sim::issue_from_json(ij.at("issue")),
                          ij.at("count").get<std::size_t>(), ij.at("u").get<double>()});
    }
    r.critique_issues = j.at("critique_issues").get<std::size_t>();
    for (const auto& v : j.at("verdicts")) {
      r.verdicts.push_back({v.at("subject").get<std::string>(), v.at("span").get<std::string>(),
                            v.at("description").get<std::string>(),
                            v.at("status").get<std::string>() == "wrong" ? agents::VerdictStatus::Wrong
                                                                         : agents::VerdictStatus::Approved,
                            v.at("suggestion").get<std::string>()});
    }
    for (const auto& f : j.at("feedback")) {
      FeedbackItem item;
      item.kind = feedback_kind_from_string(f.at("kind").get<std::string>());
      item.origin = f.at("origin").get<std::string>();
      item.text = f.at("text").get<std::string>();
      item.length = f.at("len").get<std::size_t>();
      item.round = f.at("created").get<int>();
      r.pool.push_back({item, {f.at("u").get<double>(), f.at("R").get<double>(), f.at("w").get<double>()}});
    }
    r.selected = j.at("selected").get<std::vector<std::size_t>>();
    r.selected_tokens = j.at("selected_tokens").get<std::size_t>();
    r.failed_calls = j.at("failed_calls").get<std::size_t>();
    r.stop_reason = j.at("stop_reason").get<std::string>();
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    for (const auto& e : j.at("transcript")) r.transcript.push_back(transcript_from_json(e));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("malformed round record: ") + e.what());
  }
  for (std::size_t i : r.selected) {
    if (i >= r.pool.size()) throw Error(ErrorCode::Config, "round record selects a missing feedback item");
  }
  return r;
}

inline std::filesystem::path round_path(const std::filesystem::path& dir, int t) {
  return dir / ("round_" + std::to_string(t) + ".json");
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << s;
  if (!out) throw Error(ErrorCode::Io, "write failed for " + p.string());
}

inline std::optional<std::string> read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return std::nullopt;
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace journal

// ---------------------------------------------------------------------------

class Orchestrator {
 public:
  Orchestrator(agents::Backend& backend, RunConfig config, std::vector<prompts::FewShotExample> examples,
               agents::RetryPolicy retry = {})
      : suite_(backend, std::move(retry)), cfg_(std::move(config)), examples_(std::move(examples)) {
    cfg_.validate();
  }

  // `journal_dir` may be empty to run without a journal.
  RunResult run(const std::string& document, const std::filesystem::path& journal_dir = {}) {
    if (text::trim(document).empty()) throw Error(ErrorCode::Precondition, "document is empty");
    if (!journal_dir.empty()) std::filesystem::create_directories(journal_dir);

    RunResult result;
    std::vector<FeedbackItem> history;
    std::string current;  // DSL of the last usable graph
    std::vector<FeedbackItem> selected;

    for (int t = 0; t < cfg_.max_rounds; ++t) {
      RoundRecord rec;
      if (auto saved = load_round(journal_dir, t)) {
        rec = std::move(*saved);
      } else {
        suite_.drain();
        try {
          rec = play_round(t, document, current, selected, history);
        } catch (const Error& e) {
          auto [tr, warns] = suite_.drain();
          result.partial = true;
          result.error = "round " + std::to_string(t) + ": " + e.what();
          result.stop_reason = "backend_error";
          if (!journal_dir.empty()) write_error(journal_dir, t, e, tr);
          break;
        }
        if (!journal_dir.empty()) {
          journal::write_text(journal::round_path(journal_dir, t), journal::to_json(rec).dump(2) + "\n");
        }
      }
      current = rec.graph;
      for (const auto& s : rec.pool) history.push_back(s.item);
      selected = rec.selected_items();
      result.rounds.push_back(std::move(rec));
      const auto& last = result.rounds.back();
      if (!last.stop_reason.empty()) {
        result.stop_reason = last.stop_reason;
        if (last.stop_reason == "backend_error") {
          result.partial = true;
          result.error = "round " + std::to_string(t) + ": every feedback call failed";
        }
        break;
      }
    }

    result.dsl = current;
    result.graph = dsl::parse(current).graph;
    if (!journal_dir.empty()) write_final(journal_dir, result);
    return result;
  }

  // Items with the same kind and the same normalized text are merged: the
  // first origin is kept and u is summed over the merged origins. R still
  // looks at every origin present before merging.
  static std::vector<ScoredItem> merge_and_score(const std::vector<FeedbackItem>& pool,
                                                 const std::map<std::string, double>& u_by_origin,
                                                 const std::vector<FeedbackItem>& history) {
    std::set<std::string> open;
    for (const auto& f : pool) open.insert(f.origin);
    std::vector<FeedbackItem> items;
    std::vector<double> u;
    std::map<std::pair<FeedbackKind, std::string>, std::size_t> index;
    for (const auto& f : pool) {
      const auto it = u_by_origin.find(f.origin);
      const double uf = it == u_by_origin.end() ? 0.0 : it->second;
      const auto [pos, fresh] = index.try_emplace({f.kind, text::normalize(f.text)}, items.size());
      if (fresh) {
        items.push_back(f);
        u.push_back(uf);
      } else {
        u[pos->second] += uf;
      }
    }
    std::vector<ScoredItem> out;
    for (std::size_t i = 0; i < items.size(); ++i) {
      out.push_back({items[i], unified_score(items[i].kind, std::min(1.0, u[i]), repeat_score(items[i], history, open))});
    }
    return out;
  }

  agents::AgentSuite& agents() { return suite_; }
  const RunConfig& config() const { return cfg_; }

  // Structural and semantic feedback for one graph, scored against `history`.
  // Fills the simulation, verdict and pool fields of `rec`.
  void collect_feedback(const ProceduralGraph& g, const std::string& dsl_text, const std::string& document, int t,
                        const std::vector<FeedbackItem>& history, RoundRecord& rec) {
    std::vector<FeedbackItem> pool;
    std::map<std::string, double> u_by_origin;
    structural_feedback(g, dsl_text, document, t, rec, pool, u_by_origin);
    semantic_feedback(g, document, t, rec, pool);
    rec.pool = merge_and_score(pool, u_by_origin, history);
    rec.selected = select_indices(rec.pool, cfg_.prioritizer);
    rec.selected_tokens = 0;
    for (std::size_t i : rec.selected) rec.selected_tokens += rec.pool[i].item.length;
  }

 private:
  std::optional<RoundRecord> load_round(const std::filesystem::path& dir, int t) {
    if (dir.empty()) return std::nullopt;
    const auto text = journal::read_text(journal::round_path(dir, t));
    if (!text) return std::nullopt;
    try {
      auto rec = journal::round_from_json(nlohmann::ordered_json::parse(*text));
      if (rec.round != t) throw Error(ErrorCode::Config, "round number mismatch");
      return rec;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Config, journal::round_path(dir, t).string() + ": " + e.what());
    }
  }

  RoundRecord play_round(int t, const std::string& document, const std::string& previous,
                         const std::vector<FeedbackItem>& selected, const std::vector<FeedbackItem>& history) {
    RoundRecord rec;
    rec.round = t;
    rec.input_graph = t == 0 ? std::string() : previous;
    for (const auto& f : selected) rec.prompt_feedback.push_back(f.text);

    // Generation: one retry on unusable output, then keep the previous graph.
    std::optional<dsl::ParseResult> parsed;
    for (int attempt = 1; attempt <= 2 && !parsed; ++attempt) {
      rec.generation_attempts = attempt;
      std::string raw;
      try {
        raw = t == 0 ? suite_.build_graph(document, examples_)
                     : suite_.refine_graph(previous, rec.prompt_feedback, document, examples_);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptyResponse) throw;
        suite_.warn("generation", e.what());
        continue;
      }
      rec.raw_output = raw;
      auto r = dsl::parse(raw);
      if (r.graph.edge_count() == 0) {
        suite_.warn("generation", "round " + std::to_string(t) + " attempt " + std::to_string(attempt) +
                                      ": output contains no flow");
        rec.diagnostics = std::move(r.diagnostics);
        continue;
      }
      parsed = std::move(r);
    }
    ProceduralGraph g;
    if (parsed) {
      rec.diagnostics = parsed->diagnostics;
      g = std::move(parsed->graph);
    } else {
      if (t == 0) throw Error(ErrorCode::EmptyResponse, "builder produced no usable graph");
      rec.fallback = true;
      g = dsl::parse(previous).graph;
    }
    rec.graph = dsl::serialize(g);

    collect_feedback(g, rec.graph, document, t, history, rec);

    if (rec.pool.empty() && rec.failed_calls > 0) {
      rec.stop_reason = "backend_error";
    } else if (rec.pool.empty() && cfg_.stop_when_no_feedback) {
      rec.stop_reason = "no_feedback";
    } else if (!rec.pool.empty() && std::none_of(rec.pool.begin(), rec.pool.end(), [&](const ScoredItem& s) {
                 return s.score.w >= cfg_.min_weight;
               })) {
      rec.stop_reason = "below_min_weight";
    } else if (t + 1 >= cfg_.max_rounds) {
      rec.stop_reason = "max_rounds";
    }
    auto [tr, warns] = suite_.drain();
    rec.transcript = std::move(tr);
    rec.warnings.insert(rec.warnings.end(), warns.begin(), warns.end());
    return rec;
  }

  void structural_feedback(const ProceduralGraph& g, const std::string& dsl_text, const std::string& document, int t,
                           RoundRecord& rec, std::vector<FeedbackItem>& pool,
                           std::map<std::string, double>& u_by_origin) {
    sim::SimulationConfig simcfg = cfg_.simulation;
    simcfg.seed = sim::detail::trial_seed(cfg_.simulation.seed, static_cast<std::uint64_t>(t));
    const auto traces = sim::simulate(g, simcfg);
    const auto counts = sim::aggregate_issue_counts(traces, g);
    const auto u = utility(counts);
    rec.trials = traces.size();
    rec.failing_trials = 0;
    for (const auto& [sig, c] : counts) rec.failing_trials += c;

    std::vector<IssueSummary> dynamic;
    std::set<std::string> seen_issue_keys;
    for (const auto& [sig, c] : counts) {
      dynamic.push_back({sig.key, sig.issue, c, u.at(sig)});
      u_by_origin[sig.key] = u.at(sig);
      seen_issue_keys.insert(sim::issue_key(sig.issue, g));
    }
    std::stable_sort(dynamic.begin(), dynamic.end(),
                     [](const IssueSummary& a, const IssueSummary& b) { return a.count > b.count; });
    rec.issues = dynamic;
    for (const auto& is : sim::detect_static_issues(g)) {
      const std::string key = sim::issue_key(is, g);
      if (!seen_issue_keys.insert(key).second) continue;
      rec.issues.push_back({key + "|", is, 0, 0.0});
    }

    std::vector<agents::CritiqueIssue> shown;
    for (const auto& is : rec.issues) {
      if (shown.size() >= cfg_.max_critique_issues) break;
      std::vector<std::string> names;
      for (NodeId id : is.issue.nodes) names.push_back(g.contains(id) ? g.name(id) : std::to_string(id.value));
      shown.push_back({is.key, is.issue.kind, is.issue.detail, names, is.count});
    }
    rec.critique_issues = shown.size();
    if (shown.empty()) return;
    try {
      for (auto& f : suite_.structural_critique(dsl_text, document, shown, t)) pool.push_back(std::move(f));
    } catch (const TransportError& e) {
      ++rec.failed_calls;
      suite_.warn("structural_critic", e.what());
    }
  }

  struct SemanticTask {
    agents::JudgeSubject subject;
    NodeId gateway;
    std::optional<sim::GatewaySegment> segment;
    VerdictRecord verdict;
    std::optional<FeedbackItem> feedback;
    bool failed = false;
  };

  void semantic_feedback(const ProceduralGraph& g, const std::string& document, int t, RoundRecord& rec,
                         std::vector<FeedbackItem>& pool) {
    std::vector<SemanticTask> tasks;
    for (NodeId id : g.node_ids()) {
      if (!g.node(id).is_gateway()) continue;
      tasks.push_back({{g.name(id), g.name(id), g.node(id).type, false, {}}, id, std::nullopt, {}, std::nullopt, false});
    }
    if (cfg_.segment_checks) {
      for (auto& seg : sim::extract_gateway_segments(g)) {
        if (seg.empty()) continue;
        agents::JudgeSubject s{"segment:" + g.name(seg.gateway), g.name(seg.gateway), g.node(seg.gateway).type, true,
                               {}};
        for (std::size_t idx : seg.condition_edges) s.labels.push_back(g.edge(idx).kind.label);
        const NodeId gw = seg.gateway;
        tasks.push_back({std::move(s), gw, std::move(seg), {}, std::nullopt, false});
      }
    }

    auto work = [&](SemanticTask& task) {
      try {
        std::string span, desc;
        if (task.segment) {
          span = suite_.retrieve_segment_span(g, *task.segment, document);
          desc = suite_.verbalize_segment(g, *task.segment);
        } else {
          span = suite_.retrieve_span(g, task.gateway, document);
          desc = suite_.verbalize_gateway(g, task.gateway);
        }
        const auto v = suite_.judge_consistency(span, desc, task.subject);
        task.verdict = {task.subject.id, span, desc, v.status, v.suggestion};
        task.feedback = agents::to_feedback(v, t);
      } catch (const TransportError& e) {
        task.failed = true;
        task.verdict = {task.subject.id, {}, {}, agents::VerdictStatus::Approved, {}};
        suite_.warn("semantic", task.subject.id + ": " + e.what());
      }
    };
    const unsigned workers = std::min<unsigned>(cfg_.agent_workers, static_cast<unsigned>(tasks.size()));
    if (workers <= 1) {
      for (auto& task : tasks) work(task);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool_threads;
      for (unsigned w = 0; w < workers; ++w) {
        pool_threads.emplace_back([&] {
          for (std::size_t i = next++; i < tasks.size(); i = next++) work(tasks[i]);
        });
      }
      for (auto& th : pool_threads) th.join();
    }
    for (auto& task : tasks) {
      rec.verdicts.push_back(task.verdict);
      if (task.failed) ++rec.failed_calls;
      if (task.feedback) pool.push_back(std::move(*task.feedback));
    }
  }

  void write_error(const std::filesystem::path& dir, int t, const Error& e,
                   const std::vector<agents::TranscriptEntry>& transcript) {
    nlohmann::ordered_json j;
    j["round"] = t;
    j["code"] = std::string(to_string(e.code()));
    j["message"] = e.what();
    if (const auto* te = dynamic_cast<const TransportError*>(&e)) j["attempts"] = te->attempts();
    nlohmann::ordered_json tr = nlohmann::ordered_json::array();
    for (const auto& entry : transcript) tr.push_back(agents::to_json(entry));
    j["transcript"] = tr;
    journal::write_text(dir / "error.json", j.dump(2) + "\n");
  }

  void write_final(const std::filesystem::path& dir, const RunResult& result) {
    journal::write_text(dir / "final.flow.txt", result.dsl);
    journal::write_text(dir / "final.graph.json", to_json(result.graph).dump(2) + "\n");
    std::string lines;
    for (const auto& r : result.rounds) {
      for (const auto& e : r.transcript) {
        nlohmann::ordered_json j;
        j["round"] = r.round;
        const auto entry = agents::to_json(e);
        for (const auto& [k, v] : entry.items()) j[k] = v;
        lines += j.dump() + "\n";
      }
    }
    journal::write_text(dir / "transcript.jsonl", lines);
    if (!result.partial) std::filesystem::remove(dir / "error.json");
  }

  agents::AgentSuite suite_;
  RunConfig cfg_;
  std::vector<prompts::FewShotExample> examples_;
};

}  // namespace text2flow
