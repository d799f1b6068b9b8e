#pragma once

// Predicted-vs-gold scoring.
//
// Tuples: one per edge, "source -> target" with gateways written by type
// only ("XOR"), so gateway numbering does not affect BLEU. Conditions are
// compared separately.
// Elements: greedy one-to-one BLEU matching per category (soft F1).
// Gateways: aligned to gold gateways through shared matched neighbours;
// correct only if the aligned gold gateway has the same type (hard F1).
// Flows: a predicted flow is correct if its tuple matches a gold tuple of the
// same kind, the endpoint categories agree, and for condition flows the
// condition text also clears the BLEU threshold.

#include <algorithm>
#include <array>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "text2flow/bleu.hpp"
#include "text2flow/error.hpp"
#include "text2flow/flow_dsl.hpp"
#include "text2flow/graph.hpp"

namespace text2flow::eval {

struct EvalConfig {
  double threshold = 0.5;          // tuples, elements, conditions, actors
  double endpoint_threshold = 0.75;  // tuples touching Start or End
};

enum class Category {
  Actor,
  Action,
  ConstraintData,
  ConstraintAction,
  Xor,
  Or,
  And,
  FlowSequence,
  FlowCondition,
  FlowConstraint
};
inline constexpr std::size_t kCategoryCount = 10;

inline constexpr std::array<Category, kCategoryCount> kCategories{
    Category::Actor, Category::Action, Category::ConstraintData, Category::ConstraintAction, Category::Xor,
    Category::Or,    Category::And,    Category::FlowSequence,   Category::FlowCondition,   Category::FlowConstraint};

inline std::string_view to_string(Category c) {
  switch (c) {
    case Category::Actor: return "Actor";
    case Category::Action: return "Action";
    case Category::ConstraintData: return "Constraint-Data";
    case Category::ConstraintAction: return "Constraint-Action";
    case Category::Xor: return "XOR";
    case Category::Or: return "OR";
    case Category::And: return "AND";
    case Category::FlowSequence: return "Flow-Sequence";
    case Category::FlowCondition: return "Flow-Condition";
    case Category::FlowConstraint: return "Flow-Constraint";
  }
  return "?";
}

struct Tuple {
  std::string source;
  std::string target;
  FlowType kind = FlowType::Sequence;
  std::optional<std::string> condition;
  std::string actor;
  NodeType source_type = NodeType::Action;
  NodeType target_type = NodeType::Action;
  std::size_t edge = 0;

  std::string text() const { return source + " -> " + target; }
  bool touches_start_or_end() const { return source_type == NodeType::Start || target_type == NodeType::End ||
                                             source_type == NodeType::End || target_type == NodeType::Start; }
};

// Name used in tuple text: gateways by type, others by display name.
inline std::string element_text(const ProceduralGraph& g, NodeId id) {
  const NodeKind& k = g.node(id);
  if (k.is_gateway()) return std::string(to_string(k.type));
  return display_name(k);
}

inline std::vector<Tuple> tuples(const ProceduralGraph& g) {
  std::vector<Tuple> out;
  for (std::size_t i = 0; i < g.edge_count(); ++i) {
    const Edge& e = g.edge(i);
    Tuple t;
    t.source = element_text(g, e.source);
    t.target = element_text(g, e.target);
    t.kind = e.kind.type;
    if (e.kind.type == FlowType::Condition) t.condition = e.kind.label;
    t.actor = g.lane(e.lane).actor;
    t.source_type = g.node(e.source).type;
    t.target_type = g.node(e.target).type;
    t.edge = i;
    out.push_back(std::move(t));
  }
  return out;
}

struct Counts {
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t correct = 0;  // one-to-one, so it serves precision and recall

  double precision() const { return predicted ? static_cast<double>(correct) / static_cast<double>(predicted) : 0.0; }
  double recall() const { return gold ? static_cast<double>(correct) / static_cast<double>(gold) : 0.0; }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  bool no_instances() const { return predicted == 0 && gold == 0; }
  Counts& operator+=(const Counts& o) {
    predicted += o.predicted;
    gold += o.gold;
    correct += o.correct;
    return *this;
  }
};

struct LedgerEntry {
  Category category = Category::Action;
  std::string predicted;
  std::string gold;
  double bleu = 0.0;
  std::optional<double> condition_bleu;
  bool correct = false;
  std::string note;
};

struct EvalReport {
  std::array<Counts, kCategoryCount> counts{};
  std::vector<LedgerEntry> ledger;

  const Counts& operator[](Category c) const { return counts[static_cast<std::size_t>(c)]; }
  Counts& operator[](Category c) { return counts[static_cast<std::size_t>(c)]; }
};

struct Pair {
  std::size_t pred;
  std::size_t gold;
  double score;
};

// Greedy one-to-one assignment by descending score. `score` returns nullopt
// for incompatible pairs; a pair is kept when its score exceeds
// `threshold(pred, gold)`. Ties are broken by the texts, then by index.
template <class Score, class Threshold, class Key>
std::vector<Pair> greedy_match(std::size_t n_pred, std::size_t n_gold, Score score, Threshold threshold, Key key) {
  std::vector<Pair> cand;
  for (std::size_t i = 0; i < n_pred; ++i) {
    for (std::size_t j = 0; j < n_gold; ++j) {
      if (auto s = score(i, j)) cand.push_back({i, j, *s});
    }
  }
  std::sort(cand.begin(), cand.end(), [&](const Pair& a, const Pair& b) {
    if (a.score != b.score) return a.score > b.score;
    const auto ka = std::make_pair(key(a.pred, true), key(a.gold, false));
    const auto kb = std::make_pair(key(b.pred, true), key(b.gold, false));
    if (ka != kb) return ka < kb;
    return std::make_pair(a.pred, a.gold) < std::make_pair(b.pred, b.gold);
  });
  std::vector<bool> used_p(n_pred, false), used_g(n_gold, false);
  std::vector<Pair> out;
  for (const auto& c : cand) {
    if (used_p[c.pred] || used_g[c.gold]) continue;
    if (!(c.score > threshold(c.pred, c.gold))) continue;
    used_p[c.pred] = used_g[c.gold] = true;
    out.push_back(c);
  }
  return out;
}

namespace detail {

inline bool endpoint_compatible(NodeType a, NodeType b) {
  if (is_gateway(a) && is_gateway(b)) return true;
  return a == b;
}

inline std::optional<Category> element_category(NodeType t) {
  switch (t) {
    case NodeType::Action: return Category::Action;
    case NodeType::DataObject: return Category::ConstraintData;
    case NodeType::TextAnnotation: return Category::ConstraintAction;
    default: return std::nullopt;
  }
}

inline Category gateway_category(NodeType t) {
  return t == NodeType::Xor ? Category::Xor : t == NodeType::Or ? Category::Or : Category::And;
}

inline Category flow_category(FlowType t) {
  return t == FlowType::Sequence ? Category::FlowSequence
         : t == FlowType::Condition ? Category::FlowCondition
                                    : Category::FlowConstraint;
}

}  // namespace detail

// Tuple matching within each flow kind. Returns (pred tuple, gold tuple, bleu).
inline std::vector<Pair> match_tuples(const std::vector<Tuple>& pred, const std::vector<Tuple>& gold,
                                      const EvalConfig& cfg = {}) {
  return greedy_match(
      pred.size(), gold.size(),
      [&](std::size_t i, std::size_t j) -> std::optional<double> {
        if (pred[i].kind != gold[j].kind) return std::nullopt;
        return bleu(pred[i].text(), gold[j].text());
      },
      [&](std::size_t i, std::size_t j) {
        return pred[i].touches_start_or_end() || gold[j].touches_start_or_end() ? cfg.endpoint_threshold
                                                                                 : cfg.threshold;
      },
      [&](std::size_t k, bool is_pred) { return (is_pred ? pred[k] : gold[k]).text(); });
}

inline EvalReport evaluate(const ProceduralGraph& pred, const ProceduralGraph& gold, const EvalConfig& cfg = {}) {
  EvalReport rep;
  auto always = [&](std::size_t, std::size_t) { return cfg.threshold; };

  // Actors.
  {
    const auto& pl = pred.lanes();
    const auto& gl = gold.lanes();
    rep[Category::Actor].predicted = pl.size();
    rep[Category::Actor].gold = gl.size();
    const auto m = greedy_match(
        pl.size(), gl.size(),
        [&](std::size_t i, std::size_t j) -> std::optional<double> { return bleu(pl[i].actor, gl[j].actor); }, always,
        [&](std::size_t k, bool p) { return (p ? pl[k] : gl[k]).actor; });
    rep[Category::Actor].correct = m.size();
    for (const auto& x : m) rep.ledger.push_back({Category::Actor, pl[x.pred].actor, gl[x.gold].actor, x.score, {}, true, {}});
  }
  std::map<std::uint32_t, std::uint32_t> lane_map;  // pred lane -> gold lane
  {
    const auto& pl = pred.lanes();
    const auto& gl = gold.lanes();
    const auto m = greedy_match(
        pl.size(), gl.size(),
        [&](std::size_t i, std::size_t j) -> std::optional<double> { return bleu(pl[i].actor, gl[j].actor); }, always,
        [&](std::size_t k, bool p) { return (p ? pl[k] : gl[k]).actor; });
    for (const auto& x : m) lane_map[static_cast<std::uint32_t>(x.pred)] = static_cast<std::uint32_t>(x.gold);
    if (pl.size() == 1 && gl.size() == 1) lane_map[0] = 0;
  }

  // Element nodes (actions, data objects, annotations).
  std::map<NodeId, NodeId> node_map;  // pred -> gold, for neighbours of gateways
  for (Category cat : {Category::Action, Category::ConstraintData, Category::ConstraintAction}) {
    std::vector<NodeId> p, g;
    for (NodeId id : pred.node_ids()) {
      if (detail::element_category(pred.node(id).type) == cat) p.push_back(id);
    }
    for (NodeId id : gold.node_ids()) {
      if (detail::element_category(gold.node(id).type) == cat) g.push_back(id);
    }
    rep[cat].predicted = p.size();
    rep[cat].gold = g.size();
    const auto m = greedy_match(
        p.size(), g.size(),
        [&](std::size_t i, std::size_t j) -> std::optional<double> {
          return bleu(pred.node(p[i]).text, gold.node(g[j]).text);
        },
        always, [&](std::size_t k, bool isp) { return isp ? pred.node(p[k]).text : gold.node(g[k]).text; });
    rep[cat].correct = m.size();
    for (const auto& x : m) {
      node_map[p[x.pred]] = g[x.gold];
      rep.ledger.push_back({cat, pred.name(p[x.pred]), gold.name(g[x.gold]), x.score, {}, true, {}});
    }
  }
  // Start/End follow their lanes.
  for (NodeId id : pred.node_ids()) {
    const NodeKind& k = pred.node(id);
    if (k.type != NodeType::Start && k.type != NodeType::End) continue;
    for (std::size_t l = 0; l < pred.lanes().size(); ++l) {
      const LaneId lane{static_cast<std::uint32_t>(l)};
      if (pred.find_node(lane, k) != std::optional<NodeId>(id)) continue;
      auto it = lane_map.find(lane.value);
      if (it == lane_map.end()) continue;
      if (auto gid = gold.find_node(LaneId{it->second}, k)) node_map[id] = *gid;
    }
  }

  // Gateways: align by shared matched neighbours, then compare types.
  {
    auto neighbours = [](const ProceduralGraph& g, NodeId id) {
      std::set<NodeId> out;
      for (const auto& [e, n] : g.successors(id)) out.insert(n);
      for (const auto& [e, n] : g.predecessors(id)) out.insert(n);
      return out;
    };
    std::vector<NodeId> p, g;
    for (NodeId id : pred.node_ids()) {
      if (pred.node(id).is_gateway()) p.push_back(id);
    }
    for (NodeId id : gold.node_ids()) {
      if (gold.node(id).is_gateway()) g.push_back(id);
    }
    for (NodeId id : p) ++rep[detail::gateway_category(pred.node(id).type)].predicted;
    for (NodeId id : g) ++rep[detail::gateway_category(gold.node(id).type)].gold;
    std::vector<std::set<NodeId>> gn;
    for (NodeId id : g) gn.push_back(neighbours(gold, id));
    const auto m = greedy_match(
        p.size(), g.size(),
        [&](std::size_t i, std::size_t j) -> std::optional<double> {
          std::size_t shared = 0;
          for (NodeId n : neighbours(pred, p[i])) {
            auto it = node_map.find(n);
            if (it != node_map.end() && gn[j].count(it->second)) ++shared;
          }
          if (shared == 0) return std::nullopt;
          // Same-type partners first among equally connected candidates.
          return static_cast<double>(shared) + (pred.node(p[i]).type == gold.node(g[j]).type ? 0.5 : 0.0);
        },
        [](std::size_t, std::size_t) { return 0.0; },
        [&](std::size_t k, bool isp) { return isp ? pred.name(p[k]) : gold.name(g[k]); });
    std::set<std::size_t> aligned;
    for (const auto& x : m) {
      aligned.insert(x.pred);
      const bool ok = pred.node(p[x.pred]).type == gold.node(g[x.gold]).type;
      if (ok) ++rep[detail::gateway_category(pred.node(p[x.pred]).type)].correct;
      rep.ledger.push_back({detail::gateway_category(pred.node(p[x.pred]).type), pred.name(p[x.pred]),
                            gold.name(g[x.gold]), 0.0, {}, ok, ok ? "" : "type mismatch"});
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!aligned.count(i)) {
        rep.ledger.push_back({detail::gateway_category(pred.node(p[i]).type), pred.name(p[i]), {}, 0.0, {}, false,
                              "no matched neighbour"});
      }
    }
  }

  // Flows.
  {
    const auto pt = tuples(pred);
    const auto gt = tuples(gold);
    for (const auto& t : pt) ++rep[detail::flow_category(t.kind)].predicted;
    for (const auto& t : gt) ++rep[detail::flow_category(t.kind)].gold;
    for (const auto& x : match_tuples(pt, gt, cfg)) {
      const Tuple& a = pt[x.pred];
      const Tuple& b = gt[x.gold];
      LedgerEntry le{detail::flow_category(a.kind), a.text(), b.text(), x.score, {}, true, {}};
      if (!detail::endpoint_compatible(a.source_type, b.source_type) ||
          !detail::endpoint_compatible(a.target_type, b.target_type)) {
        le.correct = false;
        le.note = "endpoint kinds differ";
      }
      if (a.kind == FlowType::Condition) {
        le.condition_bleu = bleu(a.condition.value_or(""), b.condition.value_or(""));
        if (!(*le.condition_bleu > cfg.threshold)) {
          le.correct = false;
          le.note = "condition text differs";
        }
      }
      if (a.kind == FlowType::Condition) {
        le.predicted = a.source + " -> (" + a.condition.value_or("") + ") " + a.target;
        le.gold = b.source + " -> (" + b.condition.value_or("") + ") " + b.target;
      }
      if (le.correct) ++rep[le.category].correct;
      rep.ledger.push_back(std::move(le));
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Inputs.

struct PagedPair {
  std::string document;
  ProceduralGraph graph;
  std::vector<dsl::ParseDiagnostic> diagnostics;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline PagedPair load_paged_pair(const std::filesystem::path& document, const std::filesystem::path& gold) {
  PagedPair out;
  out.document = read_file(document);
  auto r = dsl::parse(read_file(gold));
  out.graph = std::move(r.graph);
  out.diagnostics = std::move(r.diagnostics);
  return out;
}

// A graph file is DSL text unless it ends in .json.
inline ProceduralGraph load_graph(const std::filesystem::path& p, std::vector<dsl::ParseDiagnostic>* diags = nullptr) {
  const std::string text = read_file(p);
  if (p.extension() == ".json") {
    try {
      return graph_from_json(nlohmann::ordered_json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::InvalidArgument, p.string() + ": " + e.what());
    }
  }
  auto r = dsl::parse(text);
  if (diags) *diags = std::move(r.diagnostics);
  return std::move(r.graph);
}

// ---------------------------------------------------------------------------
// Reports.

inline nlohmann::ordered_json to_json(const EvalReport& rep, bool with_ledger = false) {
  nlohmann::ordered_json j;
  for (Category c : kCategories) {
    const Counts& k = rep[c];
    nlohmann::ordered_json cj;
    cj["precision"] = k.precision();
    cj["recall"] = k.recall();
    cj["f1"] = k.f1();
    cj["predicted"] = k.predicted;
    cj["gold"] = k.gold;
    cj["correct"] = k.correct;
    cj["no_instances"] = k.no_instances();
    j[std::string(to_string(c))] = cj;
  }
  if (with_ledger) {
    nlohmann::ordered_json l = nlohmann::ordered_json::array();
    for (const auto& e : rep.ledger) {
      nlohmann::ordered_json ej;
      ej["category"] = std::string(to_string(e.category));
      ej["predicted"] = e.predicted;
      ej["gold"] = e.gold;
      ej["bleu"] = e.bleu;
      if (e.condition_bleu) ej["condition_bleu"] = *e.condition_bleu;
      ej["correct"] = e.correct;
      if (!e.note.empty()) ej["note"] = e.note;
      l.push_back(ej);
    }
    return nlohmann::ordered_json{{"scores", j}, {"ledger", l}};
  }
  return j;
}

inline std::string format_score(double v) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(3) << v;
  return ss.str();
}

// One row per document, F1 per category; "-" marks a category with no instances.
inline std::string csv_header() {
  std::string out = "document";
  for (Category c : kCategories) out += "," + std::string(to_string(c));
  return out + "\n";
}

inline std::string csv_row(const std::string& name, const EvalReport& rep) {
  std::string out = name.find_first_of(",\"") == std::string::npos ? name : "\"" + text::replace_all(name, "\"", "\"\"") + "\"";
  for (Category c : kCategories) out += "," + (rep[c].no_instances() ? std::string("-") : format_score(rep[c].f1()));
  return out + "\n";
}

inline std::string text_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"document"};
  for (Category c : kCategories) header.emplace_back(to_string(c));
  cells.push_back(header);
  for (const auto& [name, rep] : rows) {
    std::vector<std::string> r{name};
    for (Category c : kCategories) r.push_back(rep[c].no_instances() ? "-" : format_score(rep[c].f1()));
    cells.push_back(r);
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : cells) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::string out;
  for (const auto& r : cells) {
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) out += "  ";
      out += i == 0 ? r[i] + std::string(width[i] - r[i].size(), ' ') : std::string(width[i] - r[i].size(), ' ') + r[i];
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    out += "\n";
  }
  return out;
}

// Micro-averaged corpus report: counts summed over documents.
inline EvalReport aggregate(const std::vector<EvalReport>& reports) {
  EvalReport total;
  for (const auto& r : reports) {
    for (std::size_t i = 0; i < kCategoryCount; ++i) total.counts[i] += r.counts[i];
  }
  return total;
}

}  // namespace text2flow::eval
