#pragma once

// Agent roles behind one request/response contract.
//
// AgentSuite owns retries, the transcript and the parsing of replies; a
// Backend only turns a rendered prompt into text. Requests also carry a
// structured `context` (the same facts the prompt spells out) so that the
// offline mock can answer without parsing prose.

#include <chrono>
#include <functional>
#include <mutex>
#include <optional>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "text2flow/error.hpp"
#include "text2flow/flow_dsl.hpp"
#include "text2flow/graph.hpp"
#include "text2flow/prioritizer.hpp"
#include "text2flow/prompts.hpp"
#include "text2flow/simulator.hpp"
#include "text2flow/text.hpp"

namespace text2flow::agents {

enum class Role { Builder, StructuralCritic, SpanRetriever, Verbalizer, SemanticJudge, Refiner };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::Builder: return "builder";
    case Role::StructuralCritic: return "structural_critic";
    case Role::SpanRetriever: return "span_retriever";
    case Role::Verbalizer: return "verbalizer";
    case Role::SemanticJudge: return "semantic_judge";
    case Role::Refiner: return "refiner";
  }
  return "?";
}

inline std::optional<Role> role_from_string(std::string_view s) {
  for (auto r : {Role::Builder, Role::StructuralCritic, Role::SpanRetriever, Role::Verbalizer, Role::SemanticJudge,
                 Role::Refiner}) {
    if (to_string(r) == s) return r;
  }
  return std::nullopt;
}

struct AgentRequest {
  Role role = Role::Builder;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 2048;
  nlohmann::json context = nlohmann::json::object();
};

struct TokenUsage {
  long prompt_tokens = 0;
  long completion_tokens = 0;
};

struct AgentResponse {
  std::string text;
  TokenUsage usage;
  long latency_ms = 0;
};

// Implementations must be safe to call from several threads.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual AgentResponse complete(const AgentRequest& request) = 0;
  virtual std::string name() const = 0;
};

struct RetryPolicy {
  int retries = 3;  // attempts = retries + 1
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
};

struct TranscriptEntry {
  Role role = Role::Builder;
  std::string prompt_hash;
  std::string prompt;
  std::string response;
  TokenUsage usage;
  long latency_ms = 0;
  int attempts = 0;
  std::string error;
};

inline nlohmann::ordered_json to_json(const TranscriptEntry& e) {
  nlohmann::ordered_json j;
  j["role"] = std::string(to_string(e.role));
  j["prompt_hash"] = e.prompt_hash;
  j["prompt_tokens"] = e.usage.prompt_tokens;
  j["completion_tokens"] = e.usage.completion_tokens;
  j["latency_ms"] = e.latency_ms;
  j["attempts"] = e.attempts;
  if (!e.error.empty()) j["error"] = e.error;
  j["prompt"] = e.prompt;
  j["response"] = e.response;
  return j;
}

inline std::string prompt_hash(std::string_view prompt) { return text::hex64(text::fnv1a(prompt)); }

// ---------------------------------------------------------------------------
// Reply parsers. None of them throws; anything unusable becomes a warning.

namespace detail {

// Bold markers go; backticks stay because suggestions quote edges with them.
inline std::string strip_markup(std::string_view line) {
  std::string out;
  for (char c : line) {
    if (c != '*') out.push_back(c);
  }
  return std::string(text::trim(out));
}

inline bool is_approved_line(std::string_view line) {
  std::string s = strip_markup(line);
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '"' || s.back() == '`')) s.pop_back();
  while (!s.empty() && (s.front() == '"' || s.front() == '`')) s.erase(s.begin());
  return text::iequals(text::trim(s), "APPROVED");
}

}  // namespace detail

struct CritiqueBlock {
  int number = 0;
  std::string problem;
  std::optional<bool> confirmed;
  std::string suggestion;
  std::string explanation;
};

struct CritiqueParse {
  bool approved = false;
  std::vector<CritiqueBlock> blocks;
  std::vector<std::string> warnings;
};

inline CritiqueParse parse_critique(std::string_view reply) {
  static const std::regex header(R"(^\s*#*\s*issue\s*#?\s*(\d+)\b.*$)", std::regex::icase);
  static const std::regex field(R"(^\s*[-*]?\s*(problem|status|suggestion|explanation)\b[^:]*:\s*(.*)$)",
                                std::regex::icase);
  CritiqueParse out;
  std::string* current = nullptr;
  bool saw_approved = false;
  for (const auto& raw : text::split_lines(reply)) {
    const std::string line = detail::strip_markup(raw);
    std::smatch m;
    if (line.empty()) {
      current = nullptr;
      continue;
    }
    if (std::regex_match(line, m, header)) {
      CritiqueBlock b;
      b.number = std::stoi(m[1].str().substr(0, 9));
      out.blocks.push_back(std::move(b));
      current = nullptr;
      continue;
    }
    if (detail::is_approved_line(line)) {
      saw_approved = true;
      continue;
    }
    if (std::regex_match(line, m, field)) {
      if (out.blocks.empty()) {
        out.warnings.push_back("field outside an issue block: " + line);
        current = nullptr;
        continue;
      }
      auto& b = out.blocks.back();
      const std::string name = text::lower(m[1].str());
      const std::string value(text::trim(m[2].str()));
      if (name == "status") {
        const std::string v = text::lower(value);
        if (v.find("not a real issue") != std::string::npos || v.find("not real") != std::string::npos ||
            v.find("no action") != std::string::npos) {
          b.confirmed = false;
        } else if (v.find("confirm") != std::string::npos) {
          b.confirmed = true;
        }
        current = nullptr;
        continue;
      }
      current = name == "problem" ? &b.problem : name == "suggestion" ? &b.suggestion : &b.explanation;
      *current = value;
      continue;
    }
    if (current) {
      if (!current->empty()) current->push_back(' ');
      *current += line;
    }
  }
  for (const auto& b : out.blocks) {
    if (!b.confirmed) out.warnings.push_back("issue " + std::to_string(b.number) + " has no usable status");
  }
  out.approved = saw_approved && out.blocks.empty();
  if (!out.approved && out.blocks.empty()) out.warnings.push_back("reply contains neither APPROVED nor issue blocks");
  return out;
}

enum class VerdictStatus { Approved, Wrong };

struct SemanticVerdict {
  std::string subject;
  VerdictStatus status = VerdictStatus::Approved;
  std::string suggestion;  // empty iff approved
  std::string explanation;
};

struct VerdictParse {
  VerdictStatus status = VerdictStatus::Approved;
  std::string suggestion;
  std::string explanation;
  std::vector<std::string> warnings;
};

inline VerdictParse parse_verdict(std::string_view reply) {
  static const std::regex field(R"(^\s*[-*]?\s*(status|revision\s+suggestion|explanation)\s*:\s*(.*)$)",
                                std::regex::icase);
  VerdictParse out;
  std::optional<bool> wrong;
  bool saw_approved = false;
  std::string* current = nullptr;
  for (const auto& raw : text::split_lines(reply)) {
    const std::string line = detail::strip_markup(raw);
    std::smatch m;
    if (line.empty()) {
      current = nullptr;
      continue;
    }
    if (detail::is_approved_line(line)) {
      saw_approved = true;
      current = nullptr;
      continue;
    }
    if (std::regex_match(line, m, field)) {
      const std::string name = text::lower(m[1].str());
      const std::string value(text::trim(m[2].str()));
      if (name == "status") {
        if (!wrong.has_value()) {
          const std::string v = text::lower(value);
          if (v.find("wrong") != std::string::npos || v.find("incorrect") != std::string::npos) {
            wrong = true;
          } else if (v.find("correct") != std::string::npos) {
            wrong = false;
          }
        }
        current = nullptr;
      } else {
        current = name == "explanation" ? &out.explanation : &out.suggestion;
        if (!current->empty()) {
          current = nullptr;  // keep the first block only
        } else {
          *current = value;
        }
      }
      continue;
    }
    if (current) {
      current->push_back(' ');
      *current += line;
    }
  }
  if (!wrong.has_value() && !saw_approved) out.warnings.push_back("no status in judge reply; treated as approved");
  if (wrong.value_or(false)) {
    if (text::trim(out.suggestion).empty()) {
      out.warnings.push_back("wrong verdict without a revision suggestion; ignored");
    } else {
      out.status = VerdictStatus::Wrong;
      return out;
    }
  }
  out.status = VerdictStatus::Approved;
  out.suggestion.clear();
  return out;
}

// ---------------------------------------------------------------------------
// Inputs assembled from the graph.

// One structural issue as shown to the critic.
struct CritiqueIssue {
  std::string origin;  // issue signature key
  sim::IssueKind kind = sim::IssueKind::DeadEnd;
  std::string detail;
  std::vector<std::string> nodes;  // display names
  std::size_t count = 0;           // failing simulations; 0 for static findings
};

inline std::string render_issue_list(const std::vector<CritiqueIssue>& issues) {
  std::string out;
  for (std::size_t i = 0; i < issues.size(); ++i) {
    const auto& is = issues[i];
    out += "\nIssue " + std::to_string(i + 1) + ": [" + std::string(sim::to_string(is.kind)) + "] " + is.detail;
    out += is.count ? " (observed in " + std::to_string(is.count) + " simulated runs)" : " (found by graph analysis)";
  }
  return out;
}

struct JudgeSubject {
  std::string id;       // "XOR1" or "segment:XOR1"
  std::string gateway;  // display name
  NodeType type = NodeType::Xor;
  bool segment = false;
  std::vector<std::string> labels;
};

namespace detail {

inline nlohmann::json branches_json(const ProceduralGraph& g, NodeId gw) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [e, t] : g.successors(gw, FlowFilter::Executable)) {
    out.push_back({{"label", e.kind.label}, {"target", g.name(t)}});
  }
  return out;
}

inline std::string gateway_context_text(const ProceduralGraph& g, NodeId gw) {
  std::string out;
  for (std::size_t idx : g.in_edge_indices(gw)) out += dsl::render_edge(g, g.edge(idx)) + "\n";
  for (std::size_t idx : g.out_edge_indices(gw)) out += dsl::render_edge(g, g.edge(idx)) + "\n";
  return out;
}

inline std::string segment_context_text(const ProceduralGraph& g, const sim::GatewaySegment& seg) {
  std::vector<std::size_t> all;
  for (auto* list : {&seg.condition_edges, &seg.sequence_edges, &seg.constraint_edges}) {
    all.insert(all.end(), list->begin(), list->end());
  }
  std::sort(all.begin(), all.end());
  std::string out;
  for (std::size_t idx : all) out += dsl::render_edge(g, g.edge(idx)) + "\n";
  return out;
}

inline void check_gateway(const ProceduralGraph& g, NodeId gw) {
  if (!g.contains(gw) || !g.node(gw).is_gateway()) {
    throw Error(ErrorCode::Precondition, "node " + std::to_string(gw.value) + " is not a gateway of this graph");
  }
}

inline std::string unquote(std::string_view s) {
  s = text::trim(s);
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') || (s.front() == '`' && s.back() == '`'))) {
    s = text::trim(s.substr(1, s.size() - 2));
  }
  return std::string(s);
}

}  // namespace detail

// ---------------------------------------------------------------------------

class AgentSuite {
 public:
  explicit AgentSuite(Backend& backend, RetryPolicy retry = {}) : backend_(backend), retry_(std::move(retry)) {}

  // Sends one request with retries on retryable transport failures.
  AgentResponse call(const AgentRequest& req) {
    auto backoff = retry_.initial_backoff;
    for (int attempt = 1;; ++attempt) {
      try {
        AgentResponse resp = backend_.complete(req);
        record({req.role, prompt_hash(req.prompt), req.prompt, resp.text, resp.usage, resp.latency_ms, attempt, {}});
        return resp;
      } catch (const TransportError& e) {
        if (!e.retryable() || attempt > retry_.retries) {
          record({req.role, prompt_hash(req.prompt), req.prompt, {}, {}, 0, attempt, e.what()});
          throw TransportError(e.what(), e.retryable(), attempt);
        }
        if (retry_.sleep) retry_.sleep(backoff);
        backoff = std::chrono::milliseconds(static_cast<long>(static_cast<double>(backoff.count()) * retry_.multiplier));
      }
    }
  }

  std::string build_graph(std::string_view document, const std::vector<prompts::FewShotExample>& examples) {
    if (text::trim(document).empty()) throw Error(ErrorCode::Precondition, "document is empty");
    AgentRequest req{Role::Builder, prompts::builder_prompt(document, examples), 0.0, 2048, {}};
    req.context = {{"document", std::string(document)}, {"examples", examples_json(examples)}};
    return require_text(call(req), "builder");
  }

  std::string refine_graph(std::string_view previous_graph, const std::vector<std::string>& feedback,
                           std::string_view document, const std::vector<prompts::FewShotExample>& examples) {
    if (text::trim(document).empty()) throw Error(ErrorCode::Precondition, "document is empty");
    AgentRequest req{Role::Refiner, prompts::refine_prompt(examples, previous_graph, feedback, document), 0.0, 2048, {}};
    req.context = {{"previous_graph", std::string(previous_graph)},
                   {"feedback", feedback},
                   {"document", std::string(document)},
                   {"examples", examples_json(examples)}};
    return require_text(call(req), "refiner");
  }

  // Confirmed issues become structural feedback carrying the issue origin.
  std::vector<FeedbackItem> structural_critique(std::string_view graph_dsl, std::string_view document,
                                                const std::vector<CritiqueIssue>& issues, int round) {
    if (issues.empty()) throw Error(ErrorCode::Precondition, "structural critique needs at least one issue");
    AgentRequest req{Role::StructuralCritic,
                     prompts::structure_check_prompt(graph_dsl, document, render_issue_list(issues)), 0.0, 2048, {}};
    nlohmann::json list = nlohmann::json::array();
    for (const auto& is : issues) {
      list.push_back({{"kind", std::string(sim::to_string(is.kind))},
                      {"detail", is.detail},
                      {"nodes", is.nodes},
                      {"origin", is.origin}});
    }
    req.context = {{"graph", std::string(graph_dsl)}, {"issues", list}};
    const auto parsed = parse_critique(call(req).text);
    for (const auto& w : parsed.warnings) warn("structural_critic", w);

    std::vector<FeedbackItem> out;
    std::vector<bool> used(issues.size(), false);
    for (const auto& b : parsed.blocks) {
      if (!b.confirmed.value_or(false)) continue;
      if (b.number < 1 || static_cast<std::size_t>(b.number) > issues.size()) {
        warn("structural_critic", "reply refers to unknown issue " + std::to_string(b.number));
        continue;
      }
      if (used[b.number - 1]) {
        warn("structural_critic", "issue " + std::to_string(b.number) + " answered twice; first kept");
        continue;
      }
      used[b.number - 1] = true;
      if (text::trim(b.suggestion).empty()) {
        warn("structural_critic", "confirmed issue " + std::to_string(b.number) + " has no suggestion");
        continue;
      }
      out.push_back(FeedbackItem::make(FeedbackKind::Structural, b.suggestion, issues[b.number - 1].origin, round));
    }
    return out;
  }

  std::string retrieve_span(const ProceduralGraph& g, NodeId gateway, std::string_view document) {
    detail::check_gateway(g, gateway);
    return retrieve(g.name(gateway), detail::gateway_context_text(g, gateway), document);
  }

  std::string retrieve_segment_span(const ProceduralGraph& g, const sim::GatewaySegment& seg,
                                    std::string_view document) {
    detail::check_gateway(g, seg.gateway);
    return retrieve("the fragment starting at " + g.name(seg.gateway), detail::segment_context_text(g, seg), document);
  }

  std::string verbalize_gateway(const ProceduralGraph& g, NodeId gateway) {
    detail::check_gateway(g, gateway);
    if (g.successors(gateway, FlowFilter::Executable).empty()) return {};
    AgentRequest req{Role::Verbalizer, prompts::verbalize_prompt(detail::gateway_context_text(g, gateway)), 0.0, 512, {}};
    req.context = {{"gateway", g.name(gateway)},
                   {"type", std::string(to_string(g.node(gateway).type))},
                   {"branches", detail::branches_json(g, gateway)},
                   {"steps", nlohmann::json::array()}};
    return std::string(text::trim(call(req).text));
  }

  std::string verbalize_segment(const ProceduralGraph& g, const sim::GatewaySegment& seg) {
    detail::check_gateway(g, seg.gateway);
    if (seg.empty()) return {};
    nlohmann::json steps = nlohmann::json::array();
    for (std::size_t idx : seg.sequence_edges) {
      const Edge& e = g.edge(idx);
      if (e.source == seg.gateway) continue;
      steps.push_back({{"from", g.name(e.source)}, {"to", g.name(e.target)}});
    }
    AgentRequest req{Role::Verbalizer, prompts::verbalize_prompt(detail::segment_context_text(g, seg)), 0.0, 512, {}};
    req.context = {{"gateway", g.name(seg.gateway)},
                   {"type", std::string(to_string(g.node(seg.gateway).type))},
                   {"branches", detail::branches_json(g, seg.gateway)},
                   {"steps", steps}};
    return std::string(text::trim(call(req).text));
  }

  // An empty span means the text gives no usable signal; approved without a call.
  SemanticVerdict judge_consistency(std::string_view span, std::string_view description, const JudgeSubject& subject) {
    SemanticVerdict v{subject.id, VerdictStatus::Approved, {}, {}};
    if (text::trim(span).empty()) return v;
    AgentRequest req{Role::SemanticJudge,
                     prompts::logic_check_prompt(subject.gateway + ": " + std::string(description), span), 0.0, 512, {}};
    req.context = {{"subject", subject.id},
                   {"gateway", subject.gateway},
                   {"gateway_type", std::string(to_string(subject.type))},
                   {"level", subject.segment ? "segment" : "gateway"},
                   {"labels", subject.labels},
                   {"span", std::string(span)},
                   {"description", std::string(description)}};
    const auto parsed = parse_verdict(call(req).text);
    for (const auto& w : parsed.warnings) warn("semantic_judge", subject.id + ": " + w);
    v.status = parsed.status;
    v.suggestion = parsed.suggestion;
    v.explanation = parsed.explanation;
    return v;
  }

  std::vector<TranscriptEntry> transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
  }
  std::vector<std::string> warnings() const {
    std::lock_guard lock(mu_);
    return warnings_;
  }
  // Hands over and clears what was recorded so far.
  std::pair<std::vector<TranscriptEntry>, std::vector<std::string>> drain() {
    std::lock_guard lock(mu_);
    auto out = std::make_pair(std::move(transcript_), std::move(warnings_));
    transcript_.clear();
    warnings_.clear();
    return out;
  }

  void warn(std::string_view source, std::string_view message) {
    std::lock_guard lock(mu_);
    warnings_.push_back(std::string(source) + ": " + std::string(message));
  }

  Backend& backend() { return backend_; }

 private:
  static nlohmann::json examples_json(const std::vector<prompts::FewShotExample>& examples) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& ex : examples) out.push_back({{"document", ex.document}, {"graph", ex.graph}});
    return out;
  }

  static std::string require_text(const AgentResponse& r, std::string_view role) {
    if (text::trim(r.text).empty()) throw Error(ErrorCode::EmptyResponse, std::string(role) + " returned no text");
    return r.text;
  }

  std::string retrieve(const std::string& subject, const std::string& context_text, std::string_view document) {
    AgentRequest req{Role::SpanRetriever, prompts::span_prompt(subject, context_text, document), 0.0, 512, {}};
    req.context = {{"subject", subject}, {"query", context_text}, {"document", std::string(document)}};
    return detail::unquote(call(req).text);
  }

  void record(TranscriptEntry e) {
    std::lock_guard lock(mu_);
    transcript_.push_back(std::move(e));
  }

  Backend& backend_;
  RetryPolicy retry_;
  mutable std::mutex mu_;
  std::vector<TranscriptEntry> transcript_;
  std::vector<std::string> warnings_;
};

inline std::optional<FeedbackItem> to_feedback(const SemanticVerdict& v, int round) {
  if (v.status != VerdictStatus::Wrong) return std::nullopt;
  const std::string origin = v.subject.rfind("segment:", 0) == 0 ? v.subject : "gateway:" + v.subject;
  return FeedbackItem::make(FeedbackKind::Semantic, v.suggestion, origin, round);
}

}  // namespace text2flow::agents
