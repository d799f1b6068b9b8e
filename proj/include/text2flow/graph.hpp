#pragma once

// Typed procedural graph: Start/End markers, actions, XOR/OR/AND gateways
// and the two auxiliary constraint kinds, connected by sequence, condition
// and constraint flows and grouped into per-actor lanes.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "text2flow/error.hpp"
#include "text2flow/text.hpp"

namespace text2flow {

enum class NodeType : std::uint8_t {
  Start,
  End,
  Action,
  Xor,
  Or,
  And,
  DataObject,
  TextAnnotation,
};

inline std::string_view to_string(NodeType t) {
  switch (t) {
    case NodeType::Start: return "Start";
    case NodeType::End: return "End";
    case NodeType::Action: return "Action";
    case NodeType::Xor: return "XOR";
    case NodeType::Or: return "OR";
    case NodeType::And: return "AND";
    case NodeType::DataObject: return "DataObject";
    case NodeType::TextAnnotation: return "TextAnnotation";
  }
  return "?";
}

inline std::optional<NodeType> node_type_from_string(std::string_view s) {
  for (auto t : {NodeType::Start, NodeType::End, NodeType::Action, NodeType::Xor,
                 NodeType::Or, NodeType::And, NodeType::DataObject,
                 NodeType::TextAnnotation}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

inline bool is_gateway(NodeType t) {
  return t == NodeType::Xor || t == NodeType::Or || t == NodeType::And;
}
inline bool is_auxiliary(NodeType t) {
  return t == NodeType::DataObject || t == NodeType::TextAnnotation;
}

struct NodeId {
  std::uint32_t value = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

struct LaneId {
  std::uint32_t value = 0;
  friend auto operator<=>(const LaneId&, const LaneId&) = default;
};

struct NodeKind {
  NodeType type = NodeType::Action;
  std::string text;  // Action, DataObject, TextAnnotation
  int index = 0;     // gateways

  static NodeKind start() { return {NodeType::Start, {}, 0}; }
  static NodeKind end() { return {NodeType::End, {}, 0}; }
  static NodeKind action(std::string t) { return {NodeType::Action, std::move(t), 0}; }
  static NodeKind xor_gateway(int i) { return {NodeType::Xor, {}, i}; }
  static NodeKind or_gateway(int i) { return {NodeType::Or, {}, i}; }
  static NodeKind and_gateway(int i) { return {NodeType::And, {}, i}; }
  static NodeKind gateway(NodeType t, int i) { return {t, {}, i}; }
  static NodeKind data_object(std::string t) { return {NodeType::DataObject, std::move(t), 0}; }
  static NodeKind text_annotation(std::string t) {
    return {NodeType::TextAnnotation, std::move(t), 0};
  }

  bool is_gateway() const { return text2flow::is_gateway(type); }
  bool is_auxiliary() const { return text2flow::is_auxiliary(type); }

  friend bool operator==(const NodeKind&, const NodeKind&) = default;
};

// The token the flow DSL uses for a node: "Start", "XOR2", "DataObject(x)",
// or the action text itself.
inline std::string display_name(const NodeKind& k) {
  switch (k.type) {
    case NodeType::Start: return "Start";
    case NodeType::End: return "End";
    case NodeType::Action: return k.text;
    case NodeType::Xor:
    case NodeType::Or:
    case NodeType::And: return std::string(to_string(k.type)) + std::to_string(k.index);
    case NodeType::DataObject: return "DataObject(" + k.text + ")";
    case NodeType::TextAnnotation: return "TextAnnotation(" + k.text + ")";
  }
  return {};
}

enum class FlowType : std::uint8_t { Sequence, Condition, Constraint };

inline std::string_view to_string(FlowType t) {
  switch (t) {
    case FlowType::Sequence: return "Sequence";
    case FlowType::Condition: return "Condition";
    case FlowType::Constraint: return "Constraint";
  }
  return "?";
}

inline std::optional<FlowType> flow_type_from_string(std::string_view s) {
  for (auto t : {FlowType::Sequence, FlowType::Condition, FlowType::Constraint}) {
    if (to_string(t) == s) return t;
  }
  return std::nullopt;
}

struct FlowKind {
  FlowType type = FlowType::Sequence;
  std::string label;  // Condition only

  static FlowKind sequence() { return {FlowType::Sequence, {}}; }
  static FlowKind condition(std::string l) { return {FlowType::Condition, std::move(l)}; }
  static FlowKind constraint() { return {FlowType::Constraint, {}}; }

  friend bool operator==(const FlowKind&, const FlowKind&) = default;
};

struct Edge {
  NodeId source;
  NodeId target;
  FlowKind kind;
  LaneId lane;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Lane {
  std::string actor;
  std::vector<NodeId> nodes;       // insertion order
  std::vector<std::size_t> edges;  // indices into ProceduralGraph::edges()

  friend bool operator==(const Lane&, const Lane&) = default;
};

enum class FlowFilter {
  Any,
  Executable,  // neither endpoint is a DataObject/TextAnnotation
  Sequence,
  Condition,
  Constraint,
};

class ProceduralGraph {
 public:
  static constexpr std::string_view kDefaultActor = "the process";

  // Returns the existing lane when an actor with the same normalized name
  // is already present.
  LaneId add_lane(std::string_view actor) {
    if (auto found = find_lane(actor)) return *found;
    std::string a(text::trim(actor));
    if (a.empty()) a = kDefaultActor;
    lanes_.push_back(Lane{std::move(a), {}, {}});
    return LaneId{static_cast<std::uint32_t>(lanes_.size() - 1)};
  }

  std::optional<LaneId> find_lane(std::string_view actor) const {
    const auto key = text::normalize(actor.empty() ? kDefaultActor : actor);
    for (std::size_t i = 0; i < lanes_.size(); ++i) {
      if (text::normalize(lanes_[i].actor) == key)
        return LaneId{static_cast<std::uint32_t>(i)};
    }
    return std::nullopt;
  }

  // Registers `kind` in `lane`. Identity: gateways are graph-global by
  // kind+index; every other node is lane-scoped, actions and constraints
  // keyed by their normalized text. Re-adding returns the existing id.
  NodeId add_node(LaneId lane, NodeKind kind) {
    check_lane(lane);
    validate(kind);
    const auto key = identity_key(lane, kind);
    NodeId id;
    if (auto it = index_.find(key); it != index_.end()) {
      id = it->second;
    } else {
      id = NodeId{static_cast<std::uint32_t>(nodes_.size())};
      nodes_.emplace_back(std::move(kind));
      index_.emplace(key, id);
      out_.emplace_back();
      in_.emplace_back();
    }
    auto& members = lanes_[lane.value].nodes;
    if (std::find(members.begin(), members.end(), id) == members.end()) members.push_back(id);
    return id;
  }

  std::optional<NodeId> find_node(LaneId lane, const NodeKind& kind) const {
    if (lane.value >= lanes_.size()) return std::nullopt;
    auto it = index_.find(identity_key(lane, kind));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  // Appends a flow to `lane`. Returns false (and adds nothing) when the lane
  // already holds an identical flow.
  bool add_edge(LaneId lane, NodeId source, NodeId target, FlowKind kind) {
    check_lane(lane);
    check_node(source);
    check_node(target);
    Edge e{source, target, std::move(kind), lane};
    for (std::size_t idx : lanes_[lane.value].edges) {
      if (edges_[idx] == e) return false;
    }
    for (NodeId n : {source, target}) {
      auto& members = lanes_[lane.value].nodes;
      if (std::find(members.begin(), members.end(), n) == members.end()) members.push_back(n);
    }
    const std::size_t idx = edges_.size();
    edges_.push_back(std::move(e));
    lanes_[lane.value].edges.push_back(idx);
    out_[source.value].push_back(idx);
    in_[target.value].push_back(idx);
    return true;
  }

  bool contains(NodeId id) const { return id.value < nodes_.size() && nodes_[id.value].has_value(); }

  const NodeKind& node(NodeId id) const {
    check_node(id);
    return *nodes_[id.value];
  }

  std::string name(NodeId id) const { return display_name(node(id)); }

  std::vector<NodeId> node_ids() const {
    std::vector<NodeId> ids;
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i]) ids.push_back(NodeId{static_cast<std::uint32_t>(i)});
    }
    return ids;
  }

  std::size_t node_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(),
                                                  [](const auto& n) { return n.has_value(); }));
  }
  // One past the largest id ever issued; sizes per-node lookup tables.
  std::size_t id_bound() const { return nodes_.size(); }
  std::size_t edge_count() const { return edges_.size(); }
  bool empty() const { return node_count() == 0; }

  const std::vector<Lane>& lanes() const { return lanes_; }
  const Lane& lane(LaneId id) const {
    check_lane(id);
    return lanes_[id.value];
  }
  const std::vector<Edge>& edges() const { return edges_; }
  const Edge& edge(std::size_t idx) const { return edges_.at(idx); }

  std::vector<Edge> lane_edges(LaneId id) const {
    std::vector<Edge> out;
    for (std::size_t idx : lane(id).edges) out.push_back(edges_[idx]);
    return out;
  }

  bool passes(const Edge& e, FlowFilter filter) const {
    switch (filter) {
      case FlowFilter::Any: return true;
      case FlowFilter::Executable:
        return !node(e.source).is_auxiliary() && !node(e.target).is_auxiliary();
      case FlowFilter::Sequence: return e.kind.type == FlowType::Sequence;
      case FlowFilter::Condition: return e.kind.type == FlowType::Condition;
      case FlowFilter::Constraint: return e.kind.type == FlowType::Constraint;
    }
    return false;
  }

  // Outgoing flows in edge insertion order, paired with their target.
  std::vector<std::pair<Edge, NodeId>> successors(NodeId id, FlowFilter filter = FlowFilter::Any) const {
    check_node(id);
    std::vector<std::pair<Edge, NodeId>> out;
    for (std::size_t idx : out_[id.value]) {
      const Edge& e = edges_[idx];
      if (passes(e, filter)) out.emplace_back(e, e.target);
    }
    return out;
  }

  std::vector<std::pair<Edge, NodeId>> predecessors(NodeId id, FlowFilter filter = FlowFilter::Any) const {
    check_node(id);
    std::vector<std::pair<Edge, NodeId>> out;
    for (std::size_t idx : in_[id.value]) {
      const Edge& e = edges_[idx];
      if (passes(e, filter)) out.emplace_back(e, e.source);
    }
    return out;
  }

  // Edge indices, for callers that need to refer back to a specific flow.
  const std::vector<std::size_t>& out_edge_indices(NodeId id) const {
    check_node(id);
    return out_[id.value];
  }
  const std::vector<std::size_t>& in_edge_indices(NodeId id) const {
    check_node(id);
    return in_[id.value];
  }

  // Copy without DataObject/TextAnnotation nodes and the flows touching
  // them. Node ids are preserved.
  ProceduralGraph executable_subgraph() const {
    ProceduralGraph g;
    g.provenance = provenance;
    g.nodes_.resize(nodes_.size());
    g.out_.resize(nodes_.size());
    g.in_.resize(nodes_.size());
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i] && !nodes_[i]->is_auxiliary()) g.nodes_[i] = nodes_[i];
    }
    for (const auto& [key, id] : index_) {
      if (g.contains(id)) g.index_.emplace(key, id);
    }
    for (const Lane& l : lanes_) {
      Lane nl{l.actor, {}, {}};
      for (NodeId n : l.nodes) {
        if (g.contains(n)) nl.nodes.push_back(n);
      }
      g.lanes_.push_back(std::move(nl));
    }
    for (const Edge& e : edges_) {
      if (!g.contains(e.source) || !g.contains(e.target)) continue;
      const std::size_t idx = g.edges_.size();
      g.edges_.push_back(e);
      g.lanes_[e.lane.value].edges.push_back(idx);
      g.out_[e.source.value].push_back(idx);
      g.in_[e.target.value].push_back(idx);
    }
    return g;
  }

  std::optional<std::string> provenance;

  friend bool operator==(const ProceduralGraph& a, const ProceduralGraph& b) {
    return a.nodes_ == b.nodes_ && a.lanes_ == b.lanes_ && a.edges_ == b.edges_ &&
           a.provenance == b.provenance;
  }

  // Restores a node under an explicit id; used by deserialization only.
  void restore_node(NodeId id, LaneId lane, NodeKind kind) {
    check_lane(lane);
    validate(kind);
    if (id.value >= nodes_.size()) {
      nodes_.resize(id.value + 1);
      out_.resize(id.value + 1);
      in_.resize(id.value + 1);
    }
    if (nodes_[id.value] && !(*nodes_[id.value] == kind)) {
      throw Error(ErrorCode::InvalidArgument,
                  "node id " + std::to_string(id.value) + " restored with two different kinds");
    }
    if (!nodes_[id.value]) {
      const auto key = identity_key(lane, kind);
      if (index_.count(key) != 0) {
        throw Error(ErrorCode::InvalidArgument,
                    "duplicate node identity for id " + std::to_string(id.value));
      }
      index_.emplace(key, id);
      nodes_[id.value] = std::move(kind);
    }
    auto& members = lanes_[lane.value].nodes;
    if (std::find(members.begin(), members.end(), id) == members.end()) members.push_back(id);
  }

 private:
  static std::string identity_key(LaneId lane, const NodeKind& k) {
    const std::string scope = "L" + std::to_string(lane.value) + "|";
    switch (k.type) {
      case NodeType::Start: return scope + "S";
      case NodeType::End: return scope + "E";
      case NodeType::Action: return scope + "A|" + text::normalize(k.text);
      case NodeType::DataObject: return scope + "D|" + text::normalize(k.text);
      case NodeType::TextAnnotation: return scope + "T|" + text::normalize(k.text);
      case NodeType::Xor:
      case NodeType::Or:
      case NodeType::And: return "G|" + std::string(to_string(k.type)) + "|" + std::to_string(k.index);
    }
    return {};
  }

  static void validate(const NodeKind& k) {
    if (k.is_gateway()) {
      if (k.index <= 0)
        throw Error(ErrorCode::InvalidArgument, "gateway index must be positive");
    } else if (k.type == NodeType::Action || k.is_auxiliary()) {
      if (text::trim(k.text).empty())
        throw Error(ErrorCode::InvalidArgument,
                    std::string(to_string(k.type)) + " text must not be empty");
    }
  }

  void check_lane(LaneId lane) const {
    if (lane.value >= lanes_.size())
      throw Error(ErrorCode::NotFound, "unknown lane " + std::to_string(lane.value));
  }
  void check_node(NodeId id) const {
    if (!contains(id)) throw Error(ErrorCode::NotFound, "unknown node id " + std::to_string(id.value));
  }

  std::vector<std::optional<NodeKind>> nodes_;
  std::map<std::string, NodeId> index_;
  std::vector<Lane> lanes_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> out_;
  std::vector<std::vector<std::size_t>> in_;
};

inline ProceduralGraph executable_subgraph(const ProceduralGraph& g) { return g.executable_subgraph(); }

// ---------------------------------------------------------------------------
// Canonical JSON: {lanes:[{actor, nodes:[{id,kind,text?,index?}],
// edges:[{src,dst,kind,label?}]}], provenance?}. Key order is fixed.

inline nlohmann::ordered_json to_json(const ProceduralGraph& g) {
  using nlohmann::ordered_json;
  ordered_json lanes = ordered_json::array();
  for (const Lane& lane : g.lanes()) {
    ordered_json nodes = ordered_json::array();
    for (NodeId id : lane.nodes) {
      const NodeKind& k = g.node(id);
      ordered_json n;
      n["id"] = id.value;
      n["kind"] = std::string(to_string(k.type));
      if (k.is_gateway()) {
        n["index"] = k.index;
      } else if (!k.text.empty()) {
        n["text"] = k.text;
      }
      nodes.push_back(std::move(n));
    }
    ordered_json edges = ordered_json::array();
    for (std::size_t idx : lane.edges) {
      const Edge& e = g.edge(idx);
      ordered_json j;
      j["src"] = e.source.value;
      j["dst"] = e.target.value;
      j["kind"] = std::string(to_string(e.kind.type));
      if (e.kind.type == FlowType::Condition) j["label"] = e.kind.label;
      edges.push_back(std::move(j));
    }
    ordered_json l;
    l["actor"] = lane.actor;
    l["nodes"] = std::move(nodes);
    l["edges"] = std::move(edges);
    lanes.push_back(std::move(l));
  }
  ordered_json out;
  out["lanes"] = std::move(lanes);
  if (g.provenance) out["provenance"] = *g.provenance;
  return out;
}

inline ProceduralGraph graph_from_json(const nlohmann::ordered_json& j) {
  ProceduralGraph g;
  try {
    for (const auto& l : j.at("lanes")) {
      const LaneId lane = g.add_lane(l.at("actor").get<std::string>());
      for (const auto& n : l.at("nodes")) {
        const auto type = node_type_from_string(n.at("kind").get<std::string>());
        if (!type) throw Error(ErrorCode::InvalidArgument, "unknown node kind " + n.at("kind").dump());
        NodeKind k{*type, n.value("text", std::string{}), n.value("index", 0)};
        g.restore_node(NodeId{n.at("id").get<std::uint32_t>()}, lane, std::move(k));
      }
    }
    std::uint32_t lane_no = 0;
    for (const auto& l : j.at("lanes")) {
      const LaneId lane{lane_no++};
      for (const auto& e : l.at("edges")) {
        const auto type = flow_type_from_string(e.at("kind").get<std::string>());
        if (!type) throw Error(ErrorCode::InvalidArgument, "unknown flow kind " + e.at("kind").dump());
        FlowKind fk{*type, e.value("label", std::string{})};
        g.add_edge(lane, NodeId{e.at("src").get<std::uint32_t>()},
                   NodeId{e.at("dst").get<std::uint32_t>()}, std::move(fk));
      }
    }
    if (j.contains("provenance")) g.provenance = j.at("provenance").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::InvalidArgument, std::string("malformed graph json: ") + ex.what());
  }
  return g;
}

}  // namespace text2flow
