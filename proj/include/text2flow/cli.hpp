#pragma once

// Command-line driver: extract, simulate, eval, batch, config.
// Exit codes: 0 success, 1 error, 2 partial result after a backend failure.

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "text2flow/config.hpp"
#include "text2flow/evaluator.hpp"
#include "text2flow/http_backend.hpp"
#include "text2flow/mock_backend.hpp"
#include "text2flow/orchestrator.hpp"
#include "text2flow/simulator.hpp"

namespace text2flow::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitPartial = 2;

inline std::unique_ptr<agents::Backend> make_backend(const config::CliConfig& cfg) {
  if (cfg.backend == "http") return std::make_unique<agents::HttpBackend>(cfg.http);
  if (cfg.mock_script.empty()) return std::make_unique<agents::MockBackend>();
  return std::make_unique<agents::MockBackend>(agents::MockBackend::load_script(cfg.mock_script));
}

inline agents::RetryPolicy retry_policy(const config::CliConfig& cfg) {
  agents::RetryPolicy p;
  p.retries = static_cast<int>(cfg.retries);
  p.initial_backoff = std::chrono::milliseconds(cfg.backoff_ms);
  if (cfg.backoff_ms == 0) p.sleep = nullptr;
  return p;
}

struct ExtractOutcome {
  RunResult result;
  int exit_code = kExitOk;
};

// One document through the orchestrator, journaled into `dir`.
inline ExtractOutcome extract_document(const std::string& document, const std::filesystem::path& dir,
                                       const config::CliConfig& cfg) {
  auto backend = make_backend(cfg);
  Orchestrator orch(*backend, cfg.run, prompts::default_examples(cfg.shots), retry_policy(cfg));
  ExtractOutcome o;
  o.result = orch.run(document, dir);
  if (o.result.partial) o.exit_code = o.result.graph.empty() ? kExitError : kExitPartial;
  return o;
}

// ---------------------------------------------------------------------------
// simulate

inline std::string pad(std::string s, std::size_t w) {
  if (s.size() < w) s += std::string(w - s.size(), ' ');
  return s;
}

inline std::string names_of(const ProceduralGraph& g, const std::vector<NodeId>& ids) {
  std::string out;
  for (NodeId id : ids) out += (out.empty() ? "" : " + ") + g.name(id);
  return out;
}

inline void print_simulation(std::ostream& os, const ProceduralGraph& g, const std::vector<sim::SimulationTrace>& traces) {
  const auto counts = sim::aggregate_issue_counts(traces, g);
  std::size_t failing = 0;
  for (const auto& t : traces) failing += t.issue ? 1 : 0;
  os << "trials: " << traces.size() << ", failing: " << failing << "\n";

  std::vector<std::pair<std::size_t, const sim::IssueSignature*>> rows;
  for (const auto& [sig, n] : counts) rows.emplace_back(n, &sig);
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  os << "\nsimulated issues:\n";
  if (rows.empty()) os << "  none\n";
  for (const auto& [n, sig] : rows) {
    os << "  " << pad(std::string(sim::to_string(sig->issue.kind)), 26) << std::setw(8) << n << "  "
       << sig->issue.detail << "\n";
  }

  const auto statics = sim::detect_static_issues(g);
  os << "\nstatic issues:\n";
  if (statics.empty()) os << "  none\n";
  for (const auto& i : statics) os << "  " << pad(std::string(sim::to_string(i.kind)), 26) << "  " << i.detail << "\n";

  const auto branches = sim::branch_counts(traces);
  std::map<NodeId, std::size_t> visits;
  for (const auto& [k, n] : branches) visits[k.first] += n;
  std::size_t width = 0;
  for (const auto& [k, n] : branches) width = std::max(width, (g.name(k.first) + " -> " + names_of(g, k.second)).size());
  os << "\nbranch frequencies:\n";
  if (branches.empty()) os << "  none\n";
  for (const auto& [k, n] : branches) {
    std::ostringstream freq;
    freq << std::fixed << std::setprecision(4) << static_cast<double>(n) / static_cast<double>(visits[k.first]);
    os << "  " << pad(g.name(k.first) + " -> " + names_of(g, k.second), width) << std::setw(8) << n << "  "
       << freq.str() << "\n";
  }
}

// ---------------------------------------------------------------------------
// eval

// Graph files in a directory keyed by name: <name>.flow, <name>.flow.txt,
// <name>.json, or <name>/final.flow.txt as written by batch. The batch
// summary.json is not a graph and is skipped.
inline std::map<std::string, std::filesystem::path> graph_files(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, "not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    const fs::path p = e.path();
    const std::string fname = p.filename().string();
    if (e.is_directory()) {
      if (fs::is_regular_file(p / "final.flow.txt")) out[fname] = p / "final.flow.txt";
      continue;
    }
    if (!e.is_regular_file() || fname == "summary.json") continue;
    for (std::string ext : {".flow.txt", ".flow", ".json"}) {
      if (fname.size() > ext.size() && fname.compare(fname.size() - ext.size(), ext.size(), ext) == 0) {
        out[fname.substr(0, fname.size() - ext.size())] = p;
        break;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

struct Env {
  std::ostream& out;
  std::ostream& err;
  config::EnvLookup env;
};

namespace detail {

inline std::string read_document(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline int cmd_extract(const Env& io, const config::CliConfig& cfg, const std::string& doc_path) {
  const std::string document = read_document(doc_path);
  const auto o = extract_document(document, cfg.out, cfg);
  io.out << o.result.dsl;
  io.err << "rounds: " << o.result.rounds.size() << ", stop: " << o.result.stop_reason << ", journal: " << cfg.out
         << "\n";
  if (o.result.partial) io.err << "warning: partial result: " << o.result.error << "\n";
  return o.exit_code;
}

inline int cmd_simulate(const Env& io, const config::CliConfig& cfg, const std::string& graph_path,
                        const std::string& dump_traces) {
  std::vector<dsl::ParseDiagnostic> diags;
  const ProceduralGraph g = eval::load_graph(graph_path, &diags);
  for (const auto& d : diags) {
    io.err << graph_path << ":" << d.line << ": " << dsl::to_string(d.severity) << ": " << d.message << "\n";
  }
  if (g.empty()) {
    io.err << "error: " << graph_path << " contains no graph\n";
    return kExitError;
  }
  const auto traces = sim::simulate(g, cfg.run.simulation);
  io.out << "graph: " << graph_path << " (" << g.node_count() << " nodes, " << g.edge_count() << " flows, "
         << g.lanes().size() << " lanes), seed: " << cfg.run.simulation.seed << "\n";
  print_simulation(io.out, g, traces);
  if (!dump_traces.empty()) {
    std::ofstream os(dump_traces, std::ios::binary);
    if (!os) throw Error(ErrorCode::Io, "cannot write " + dump_traces);
    sim::write_traces_jsonl(os, traces);
  }
  return kExitOk;
}

inline int cmd_eval(const Env& io, const std::string& pred_dir, const std::string& gold_dir, const std::string& csv,
                    const std::string& json, bool with_ledger) {
  const auto pred = graph_files(pred_dir);
  const auto gold = graph_files(gold_dir);
  std::vector<std::string> names;
  for (const auto& [name, p] : pred) {
    if (gold.count(name)) {
      names.push_back(name);
    } else {
      io.err << "warning: no gold graph for " << p.string() << "\n";
    }
  }
  for (const auto& [name, p] : gold) {
    if (!pred.count(name)) io.err << "warning: no prediction for " << p.string() << "\n";
  }
  if (names.empty()) {
    io.err << "error: no prediction/gold pairs found\n";
    return kExitError;
  }

  std::vector<std::pair<std::string, eval::EvalReport>> rows;
  for (const auto& name : names) {
    std::vector<dsl::ParseDiagnostic> pd, gd;
    const auto p = eval::load_graph(pred.at(name), &pd);
    const auto g = eval::load_graph(gold.at(name), &gd);
    for (const auto& d : gd) io.err << gold.at(name).string() << ":" << d.line << ": " << d.message << "\n";
    if (!pd.empty()) io.err << "warning: " << pd.size() << " unparsed lines in " << pred.at(name).string() << "\n";
    rows.emplace_back(name, eval::evaluate(p, g));
  }
  std::vector<eval::EvalReport> reports;
  for (const auto& r : rows) reports.push_back(r.second);
  const auto total = eval::aggregate(reports);

  auto table_rows = rows;
  table_rows.emplace_back("ALL", total);
  io.out << eval::text_table(table_rows);

  if (!csv.empty()) {
    std::string s = eval::csv_header();
    for (const auto& [name, rep] : table_rows) s += eval::csv_row(name, rep);
    journal::write_text(csv, s);
  }
  if (!json.empty()) {
    nlohmann::ordered_json j;
    j["documents"] = nlohmann::ordered_json::object();
    for (const auto& [name, rep] : rows) j["documents"][name] = eval::to_json(rep, with_ledger);
    j["corpus"] = eval::to_json(total);
    journal::write_text(json, j.dump(2) + "\n");
  }
  return kExitOk;
}

inline int cmd_batch(const Env& io, const config::CliConfig& cfg, const std::string& doc_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(doc_dir)) throw Error(ErrorCode::Io, "not a directory: " + doc_dir);
  std::vector<fs::path> docs;
  for (const auto& e : fs::directory_iterator(doc_dir)) {
    if (e.is_regular_file() && e.path().extension() == ".txt") docs.push_back(e.path());
  }
  std::sort(docs.begin(), docs.end());
  if (docs.empty()) {
    io.err << "error: no .txt documents in " << doc_dir << "\n";
    return kExitError;
  }

  struct Row {
    std::string status;
    int code = kExitOk;
    std::size_t rounds = 0;
    std::string stop, error;
  };
  std::vector<Row> rows(docs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i; (i = next.fetch_add(1)) < docs.size();) {
      Row& r = rows[i];
      try {
        const auto o = extract_document(read_document(docs[i]), fs::path(cfg.out) / docs[i].stem(), cfg);
        r.code = o.exit_code;
        r.rounds = o.result.rounds.size();
        r.stop = o.result.stop_reason;
        r.error = o.result.error;
        r.status = o.exit_code == kExitOk ? "ok" : o.exit_code == kExitPartial ? "partial" : "failed";
      } catch (const std::exception& e) {
        r.code = kExitError;
        r.status = "failed";
        r.error = e.what();
      }
    }
  };
  const unsigned n = std::min<unsigned>(cfg.workers, static_cast<unsigned>(docs.size()));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < n; ++w) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  int code = kExitOk;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    const Row& r = rows[i];
    io.out << pad(docs[i].stem().string(), 24) << " " << pad(r.status, 8) << " rounds=" << r.rounds
           << (r.stop.empty() ? "" : " stop=" + r.stop) << (r.error.empty() ? "" : " error=" + r.error) << "\n";
    summary.push_back({{"document", docs[i].filename().string()},
                       {"status", r.status},
                       {"rounds", r.rounds},
                       {"stop_reason", r.stop},
                       {"error", r.error}});
    if (r.code == kExitError) {
      code = kExitError;
    } else if (r.code == kExitPartial && code == kExitOk) {
      code = kExitPartial;
    }
  }
  journal::write_text(fs::path(cfg.out) / "summary.json", summary.dump(2) + "\n");
  return code;
}

}  // namespace detail

inline int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
                const config::EnvLookup& env = config::process_env()) {
  CLI::App app{"text2flow: turn procedural documents into flow graphs"};
  app.name("text2flow");
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flag_values;  // config key -> raw text
  std::map<std::string, CLI::Option*> flag_opts;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--set", sets, "override any config key: --set key=value");
  const std::vector<std::pair<std::string, std::string>> flags{
      {"seed", "--seed"},       {"trials", "--trials"},   {"rounds", "--rounds"},
      {"budget", "--budget"},   {"backend", "--backend"}, {"out", "--out"},
      {"mock_script", "--mock-script"}, {"workers", "--workers"}, {"shots", "--shots"}};
  for (const auto& [k, flag] : flags) flag_opts[k] = app.add_option(flag, flag_values[k], config::key(k).help);

  std::string doc_path, graph_path, pred_dir, gold_dir, doc_dir, dump_traces, csv_path, json_path;
  bool with_ledger = false;
  auto* extract = app.add_subcommand("extract", "build and refine a graph for one document");
  extract->add_option("document", doc_path, "procedural document (text)")->required();
  auto* simulate = app.add_subcommand("simulate", "simulate a graph and report structural issues");
  simulate->add_option("graph", graph_path, "graph file (.flow text or .json)")->required();
  simulate->add_option("--dump-traces", dump_traces, "write one JSON trace per trial");
  auto* evalc = app.add_subcommand("eval", "score predicted graphs against gold graphs");
  evalc->add_option("pred", pred_dir, "directory of predicted graphs")->required();
  evalc->add_option("gold", gold_dir, "directory of gold graphs")->required();
  evalc->add_option("--csv", csv_path, "write F1 per document as CSV");
  evalc->add_option("--json", json_path, "write full scores as JSON");
  evalc->add_flag("--ledger", with_ledger, "include the match ledger in the JSON report");
  auto* batch = app.add_subcommand("batch", "extract every .txt document in a directory");
  batch->add_option("documents", doc_dir, "directory of documents")->required();
  auto* show = app.add_subcommand("config", "print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }

  const Env io{out, err, env};
  try {
    std::optional<nlohmann::json> file;
    if (!config_path.empty()) file = config::read_json_file(config_path);
    std::map<std::string, std::string> cli;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::Config, "--set expects key=value, got '" + s + "'");
      config::key(s.substr(0, eq));
      cli[s.substr(0, eq)] = s.substr(eq + 1);
    }
    for (const auto& [k, opt] : flag_opts) {
      if (opt->count() > 0) cli[k] = flag_values[k];
    }
    const auto cfg = config::resolve(file ? &*file : nullptr, env, cli);

    if (*extract) return detail::cmd_extract(io, cfg, doc_path);
    if (*simulate) return detail::cmd_simulate(io, cfg, graph_path, dump_traces);
    if (*evalc) return detail::cmd_eval(io, pred_dir, gold_dir, csv_path, json_path, with_ledger);
    if (*batch) return detail::cmd_batch(io, cfg, doc_dir);
    if (*show) {
      out << config::to_json(cfg).dump(2) << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

}  // namespace text2flow::cli
