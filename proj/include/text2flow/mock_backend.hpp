#pragma once

// Offline backend. A reply is chosen in this order:
//   1. a scripted reply registered for the exact prompt hash
//   2. the next scripted reply queued for the role
//   3. a deterministic heuristic computed from the request context
//
// Script file:
//   {"responses": {"builder": ["...", ...], "refiner": [...], ...},
//    "by_hash": {"<16 hex digits>": "..."},
//    "fail_from_call": 7, "fail_retryable": true}
// With fail_from_call = k, call k (1-based) and every later one fail.

#include <algorithm>
#include <cctype>
#include <deque>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "text2flow/agents.hpp"
#include "text2flow/flow_dsl.hpp"
#include "text2flow/text.hpp"

namespace text2flow::agents {

namespace mock {

inline const std::set<std::string>& stopwords() {
  static const std::set<std::string> words{
      "a",    "an",   "the",  "and",  "or",    "of",   "to",   "in",   "on",   "for",  "by",    "at",
      "is",   "are",  "be",   "it",   "its",   "if",   "then", "with", "from", "that", "this",  "as",
      "will", "need", "needs", "should", "after", "before", "which", "there", "they", "their", "them", "into",
      "when", "xor",  "and1", "end",  "start", "else", "not"};
  return words;
}

// Lower-cased alphanumeric words minus stopwords and gateway tokens.
inline std::set<std::string> content_words(std::string_view s) {
  static const std::regex gateway(R"(^(xor|or|and)\d+$)");
  std::set<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty() && !stopwords().count(cur) && !std::regex_match(cur, gateway)) out.insert(cur);
    cur.clear();
  };
  for (char c : s) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  return out;
}

inline std::size_t overlap(const std::set<std::string>& a, const std::set<std::string>& b) {
  std::size_t n = 0;
  for (const auto& w : a) n += b.count(w);
  return n;
}

// A sentence turned into an action token the DSL can carry.
inline std::string to_action(std::string_view sentence) {
  std::string s;
  for (char c : sentence) {
    if (c == '(' || c == ')' || c == '`') {
      s.push_back(' ');
    } else {
      s.push_back(c);
    }
  }
  s = text::replace_all(s, "->", " ");
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' || s.back() == ';' ||
                        text::is_space(s.back()))) {
    s.pop_back();
  }
  std::string out;
  for (const auto& w : text::split_ws(s)) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  if (!out.empty()) out[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(out[0])));
  // Keep the token from being read as a keyword.
  const auto kind = dsl::classify_token(out);
  if (!out.empty() && (!kind.kind || kind.kind->type != NodeType::Action)) out = "do " + out;
  return out;
}

inline std::string builder(const nlohmann::json& ctx) {
  const std::string doc = ctx.value("document", std::string{});
  if (ctx.contains("examples")) {
    for (const auto& ex : ctx.at("examples")) {
      if (text::normalize(ex.value("document", std::string{})) == text::normalize(doc)) {
        return ex.value("graph", std::string{});
      }
    }
  }
  std::vector<std::string> actions;
  for (const auto& s : text::split_sentences(doc)) {
    auto a = to_action(s);
    if (!a.empty()) actions.push_back(std::move(a));
  }
  if (actions.empty()) return {};
  std::string out = "For the process:\nStart -> " + actions.front() + "\n";
  for (std::size_t i = 1; i < actions.size(); ++i) out += actions[i - 1] + " -> " + actions[i] + "\n";
  out += actions.back() + " -> End\n";
  return out;
}

// Applies "Change OR1 to XOR1", "Add `a -> b`" and "Remove `a -> b`" to the
// previous graph; other feedback is ignored.
inline std::string refiner(const nlohmann::json& ctx) {
  std::vector<std::string> feedback;
  if (ctx.contains("feedback")) feedback = ctx.at("feedback").get<std::vector<std::string>>();
  if (feedback.empty()) return builder(ctx);

  static const std::regex change(R"(change\s+(xor|or|and)\s*(\d+)\s+(?:in)?to\s+(?:an?\s+)?(xor|or|and)\s*(\d+)?)",
                                 std::regex::icase);
  static const std::regex quoted(R"([`"]([^`"]*->[^`"]*)[`"])");
  static const std::regex removal(R"(\b(remove|delete|drop)\b)", std::regex::icase);

  std::map<std::string, std::string> renames;  // display name -> new display name
  std::vector<std::string> additions;
  std::set<std::string> removals;
  for (const auto& f : feedback) {
    for (std::sregex_iterator it(f.begin(), f.end(), change), end; it != end; ++it) {
      const auto& m = *it;
      std::string from = text::lower(m[1].str());
      std::string to = text::lower(m[3].str());
      for (auto* s : {&from, &to}) {
        for (auto& c : *s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      }
      renames[from + m[2].str()] = to + (m[4].matched ? m[4].str() : m[2].str());
    }
    const bool remove = std::regex_search(f, removal);
    for (std::sregex_iterator it(f.begin(), f.end(), quoted), end; it != end; ++it) {
      const auto line = dsl::classify_line((*it)[1].str(), 0);
      if (line.kind != dsl::LineKind::Flow) continue;
      const std::string rendered =
          line.source + " -> " + (line.label ? "(" + *line.label + ") " : std::string()) + line.target;
      if (remove) {
        removals.insert(text::normalize(rendered));
      } else {
        additions.push_back(rendered);
      }
    }
  }

  const auto prev = dsl::parse(ctx.value("previous_graph", std::string{})).graph;
  auto rename = [&](const NodeKind& k) {
    if (k.is_gateway()) {
      if (auto it = renames.find(display_name(k)); it != renames.end()) {
        if (auto nk = dsl::classify_token(it->second).kind) return *nk;
      }
    }
    return k;
  };
  ProceduralGraph next;
  for (const Lane& lane : prev.lanes()) {
    const LaneId l = next.add_lane(lane.actor);
    for (std::size_t idx : lane.edges) {
      const Edge& e = prev.edge(idx);
      if (removals.count(text::normalize(dsl::render_edge(prev, e)))) continue;
      const NodeId s = next.add_node(l, rename(prev.node(e.source)));
      const NodeId t = next.add_node(l, rename(prev.node(e.target)));
      next.add_edge(l, s, t, e.kind);
    }
  }
  for (const auto& add : additions) {
    const auto r = dsl::parse(add);
    if (r.graph.edge_count() != 1) continue;
    const Edge& e = r.graph.edge(0);
    const NodeKind sk = r.graph.node(e.source);
    const NodeKind tk = r.graph.node(e.target);
    std::optional<LaneId> lane;
    for (std::size_t i = 0; i < next.lanes().size() && !lane; ++i) {
      if (next.find_node(LaneId{static_cast<std::uint32_t>(i)}, sk)) lane = LaneId{static_cast<std::uint32_t>(i)};
    }
    for (std::size_t i = 0; i < next.lanes().size() && !lane; ++i) {
      if (next.find_node(LaneId{static_cast<std::uint32_t>(i)}, tk)) lane = LaneId{static_cast<std::uint32_t>(i)};
    }
    if (!lane) lane = next.add_lane(ProceduralGraph::kDefaultActor);
    next.add_edge(*lane, next.add_node(*lane, sk), next.add_node(*lane, tk), e.kind);
  }
  return dsl::serialize(next);
}

// Where a dead-end node should lead: the gateway a sibling branch runs
// into, else End.
inline std::string dead_end_target(const ProceduralGraph& g, const std::string& name) {
  for (NodeId x : g.node_ids()) {
    if (g.name(x) != name) continue;
    for (const auto& [in, p] : g.predecessors(x, FlowFilter::Executable)) {
      for (const auto& [out, sib] : g.successors(p, FlowFilter::Executable)) {
        if (sib == x) continue;
        const auto next = g.successors(sib, FlowFilter::Executable);
        if (next.size() == 1 && g.node(next[0].second).is_gateway()) return g.name(next[0].second);
      }
    }
  }
  return "End";
}

inline std::string suggestion_for(const std::string& kind, const std::vector<std::string>& nodes,
                                  const ProceduralGraph& g) {
  const std::string first = nodes.empty() ? std::string("the last step") : nodes.front();
  if (kind == "DeadEnd") {
    return "Add the edge `" + first + " -> " + dead_end_target(g, first) + "` so that the flow can finish.";
  }
  if (kind == "UnjoinedParallelBranch")
    return "Join the branches opened at " + first + " with a closing gateway before they reach End.";
  if (kind == "StepLimitExceeded") return "Give the loop an exit condition that leads to End.";
  if (kind == "ConditionFromNonGateway")
    return "Put an XOR gateway after " + first + " and move the condition onto the gateway's outgoing flow.";
  if (kind == "MissingStart") return "Add a Start node and connect it to the first action of the lane.";
  if (kind == "MissingEnd") return "Add an End node and connect the final action of the lane to it.";
  if (kind == "SingleBranchGateway") return "Give " + first + " a second branch or remove the gateway.";
  if (kind == "AuxiliaryInFlow")
    return "Keep " + first + " as an annotation only and route the execution flow through actions.";
  if (kind == "Unreachable") return "Connect " + first + " to the preceding step so that it can be reached from Start.";
  return "Revise the graph around " + first + ".";
}

inline std::string critic(const nlohmann::json& ctx) {
  const auto g = dsl::parse(ctx.value("graph", std::string{})).graph;
  std::string out;
  int n = 0;
  for (const auto& is : ctx.value("issues", nlohmann::json::array())) {
    ++n;
    const auto nodes = is.value("nodes", std::vector<std::string>{});
    if (n > 1) out += "\n";
    out += "Issue " + std::to_string(n) + "\n";
    out += "- Problem: " + is.value("detail", std::string{}) + "\n";
    out += "- Status: Confirmed\n";
    out += "- Suggestion (if confirmed): " + suggestion_for(is.value("kind", std::string{}), nodes, g) + "\n";
  }
  return n ? out : "APPROVED";
}

// Best-overlapping sentence, extended over neighbours that overlap almost
// as much (a fragment often spans consecutive sentences).
inline std::string retriever(const nlohmann::json& ctx) {
  const auto query = content_words(ctx.value("query", std::string{}));
  const auto sentences = text::split_sentences(ctx.value("document", std::string{}));
  std::vector<std::size_t> score;
  std::size_t best = 0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    score.push_back(overlap(query, content_words(sentences[i])));
    if (score[i] > score[best]) best = i;
  }
  if (sentences.empty() || score[best] == 0) return {};
  const std::size_t keep = std::max<std::size_t>(2, (score[best] + 1) / 2);
  std::size_t lo = best, hi = best;
  while (lo > 0 && score[lo - 1] >= keep) --lo;
  while (hi + 1 < sentences.size() && score[hi + 1] >= keep) ++hi;
  std::string out;
  for (std::size_t i = lo; i <= hi; ++i) out += (out.empty() ? "" : " ") + sentences[i];
  return out;
}

inline std::string verbalizer(const nlohmann::json& ctx) {
  const std::string type = ctx.value("type", std::string{});
  std::vector<std::pair<std::string, std::string>> br;
  for (const auto& b : ctx.value("branches", nlohmann::json::array())) {
    br.emplace_back(b.value("label", std::string{}), b.value("target", std::string{}));
  }
  if (br.empty()) return {};
  auto join = [](const std::vector<std::string>& xs, const std::string& last_sep) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (i) out += (i + 1 == xs.size()) ? last_sep : ", ";
      out += xs[i];
    }
    return out;
  };
  std::vector<std::string> targets;
  for (const auto& [l, t] : br) targets.push_back(t);
  std::string out;
  if (type == "AND") {
    out = "Do " + join(targets, " and ") + " at the same time.";
  } else {
    const bool labelled = std::all_of(br.begin(), br.end(), [](const auto& b) { return !b.first.empty(); });
    if (!labelled || br.size() < 2) {
      out = (type == "XOR" ? "Either " + join(targets, " or ") : "One or more of " + join(targets, " and ")) + ".";
    } else if (type == "XOR") {
      out = "If " + br[0].first + " then " + br[0].second;
      for (std::size_t i = 1; i + 1 < br.size(); ++i) out += "; else if " + br[i].first + " then " + br[i].second;
      out += "; otherwise " + br.back().second + ".";
    } else {
      std::vector<std::string> parts;
      for (const auto& [l, t] : br) parts.push_back("if " + l + " then " + t);
      out = join(parts, "; ") + ".";
      out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
    }
  }
  for (const auto& s : ctx.value("steps", nlohmann::json::array())) {
    out += " After " + s.value("from", std::string{}) + ", " + s.value("to", std::string{}) + ".";
  }
  return out;
}

inline bool contains_any(const std::string& hay, std::initializer_list<const char*> needles) {
  for (const char* n : needles) {
    if (hay.find(n) != std::string::npos) return true;
  }
  return false;
}

// Gateway type the wording of `span` asks for, if it is clear.
inline std::optional<std::string> signalled_types(const std::string& span, const std::string& actual) {
  const std::string s = " " + text::normalize(span) + " ";
  const bool xor_sig = contains_any(s, {" otherwise", " else", " either ", "however, if", "on the other hand",
                                        "choose one of", "if not "});
  const bool and_sig = contains_any(s, {"at the same time", "meanwhile", "in parallel", "simultaneous", " both ",
                                        "must also"});
  std::size_t ifs = 0;
  for (std::size_t p = s.find(" if "); p != std::string::npos; p = s.find(" if ", p + 1)) ++ifs;
  const bool or_sig = contains_any(s, {"also, if", "similarly, if", "may also", "one or more", "any combination"}) ||
                      (ifs >= 2 && !xor_sig);
  if ((actual == "XOR" && xor_sig) || (actual == "AND" && and_sig) || (actual == "OR" && or_sig)) return std::nullopt;
  if (xor_sig) return "XOR";
  if (and_sig) return "AND";
  if (or_sig) return "OR";
  return std::nullopt;
}

inline std::string judge(const nlohmann::json& ctx) {
  const std::string gateway = ctx.value("gateway", std::string{});
  const std::string type = ctx.value("gateway_type", std::string{});
  const std::string span = ctx.value("span", std::string{});
  auto wrong = [&](const std::string& suggestion, const std::string& why) {
    return gateway + ": " + span + "\n- Status: wrong.\n- Revision Suggestion: " + suggestion +
           "\n- Explanation: " + why;
  };
  if (ctx.value("level", std::string{}) == "segment") {
    const auto words = content_words(span);
    for (const auto& label : ctx.value("labels", std::vector<std::string>{})) {
      const auto lw = content_words(label);
      if (lw.empty() || lw.count("otherwise")) continue;
      if (overlap(lw, words) == 0) {
        return wrong("Revise the condition \"" + label + "\" on the flows of " + gateway +
                         " so that it uses the wording of the document.",
                     "The condition does not appear in the corresponding text.");
      }
    }
    return "APPROVED";
  }
  if (auto want = signalled_types(span, type)) {
    const std::string index = gateway.substr(std::min(gateway.size(), type.size()));
    return wrong("Change " + gateway + " to " + *want + index + ".",
                 "The wording of the text matches a " + *want + " gateway rather than " + type + ".");
  }
  return "APPROVED";
}

}  // namespace mock

class MockBackend : public Backend {
 public:
  struct Script {
    std::map<std::string, std::string> by_hash;
    std::map<Role, std::deque<std::string>> by_role;
    std::optional<std::size_t> fail_from_call;
    bool fail_retryable = true;
  };

  MockBackend() = default;
  explicit MockBackend(Script script) : script_(std::move(script)) {}

  static Script script_from_json(const nlohmann::json& j) {
    static const std::set<std::string> known{"responses", "by_hash", "fail_from_call", "fail_retryable"};
    Script s;
    try {
      for (const auto& [key, value] : j.items()) {
        if (!known.count(key)) throw Error(ErrorCode::Config, "unknown key '" + key + "' in mock script");
      }
      if (j.contains("responses")) {
        for (const auto& [role, list] : j.at("responses").items()) {
          auto r = role_from_string(role);
          if (!r) throw Error(ErrorCode::Config, "unknown role '" + role + "' in mock script");
          for (const auto& t : list) s.by_role[*r].push_back(t.get<std::string>());
        }
      }
      if (j.contains("by_hash")) {
        for (const auto& [h, t] : j.at("by_hash").items()) s.by_hash[h] = t.get<std::string>();
      }
      if (j.contains("fail_from_call")) s.fail_from_call = j.at("fail_from_call").get<std::size_t>();
      s.fail_retryable = j.value("fail_retryable", true);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Config, std::string("malformed mock script: ") + e.what());
    }
    return s;
  }

  static Script load_script(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot read mock script " + path.string());
    try {
      return script_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::Config, "mock script " + path.string() + ": " + e.what());
    }
  }

  AgentResponse complete(const AgentRequest& req) override {
    std::string reply;
    {
      std::lock_guard lock(mu_);
      ++calls_;
      if (script_.fail_from_call && calls_ >= *script_.fail_from_call) {
        throw TransportError("mock backend outage (call " + std::to_string(calls_) + ")", script_.fail_retryable);
      }
      if (auto it = script_.by_hash.find(prompt_hash(req.prompt)); it != script_.by_hash.end()) {
        reply = it->second;
      } else if (auto q = script_.by_role.find(req.role); q != script_.by_role.end() && !q->second.empty()) {
        reply = std::move(q->second.front());
        q->second.pop_front();
      } else {
        reply = heuristic(req);
      }
    }
    AgentResponse r;
    r.text = std::move(reply);
    r.usage.prompt_tokens = static_cast<long>(text::word_count(req.prompt));
    r.usage.completion_tokens = static_cast<long>(text::word_count(r.text));
    return r;
  }

  std::string name() const override { return "mock"; }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }

 private:
  static std::string heuristic(const AgentRequest& req) {
    static const nlohmann::json empty = nlohmann::json::object();
    const auto& ctx = req.context.is_object() ? req.context : empty;
    switch (req.role) {
      case Role::Builder: return mock::builder(ctx);
      case Role::Refiner: return mock::refiner(ctx);
      case Role::StructuralCritic: return mock::critic(ctx);
      case Role::SpanRetriever: return mock::retriever(ctx);
      case Role::Verbalizer: return mock::verbalizer(ctx);
      case Role::SemanticJudge: return mock::judge(ctx);
    }
    return {};
  }

  mutable std::mutex mu_;
  Script script_;
  std::size_t calls_ = 0;
};

}  // namespace text2flow::agents
