#pragma once

// Token-flow execution of a procedural graph.
//
// Each trial puts one token on the Start node of every lane (lanes run one
// after another) and advances tokens along executable flows:
//   * actions pass their token on; several outgoing flows on a non-gateway
//     node are treated as an implicit exclusive choice
//   * XOR picks one outgoing flow uniformly
//   * OR picks a uniformly random non-empty subset of outgoing flows
//   * AND activates every outgoing flow
// Tokens arriving at a gateway wait there until no token parked at another
// gateway can still reach it; the waiting group then merges into a single
// token. A trial stops at the first structural issue.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "text2flow/error.hpp"
#include "text2flow/graph.hpp"

namespace text2flow::sim {

struct SimulationConfig {
  std::size_t trials = 10000;
  std::size_t max_steps = 512;
  std::uint64_t seed = 0;
  unsigned workers = 1;

  void validate() const {
    if (trials < 1) throw Error(ErrorCode::InvalidArgument, "trials must be at least 1");
    if (max_steps < 1) throw Error(ErrorCode::InvalidArgument, "max steps must be at least 1");
  }
};

enum class IssueKind {
  DeadEnd,
  Unreachable,
  StepLimitExceeded,
  UnjoinedParallelBranch,
  ConditionFromNonGateway,
  MissingStart,
  MissingEnd,
  SingleBranchGateway,
  AuxiliaryInFlow,
};

inline std::string_view to_string(IssueKind k) {
  switch (k) {
    case IssueKind::DeadEnd: return "DeadEnd";
    case IssueKind::Unreachable: return "Unreachable";
    case IssueKind::StepLimitExceeded: return "StepLimitExceeded";
    case IssueKind::UnjoinedParallelBranch: return "UnjoinedParallelBranch";
    case IssueKind::ConditionFromNonGateway: return "ConditionFromNonGateway";
    case IssueKind::MissingStart: return "MissingStart";
    case IssueKind::MissingEnd: return "MissingEnd";
    case IssueKind::SingleBranchGateway: return "SingleBranchGateway";
    case IssueKind::AuxiliaryInFlow: return "AuxiliaryInFlow";
  }
  return "?";
}

inline std::optional<IssueKind> issue_kind_from_string(std::string_view s) {
  for (int i = 0; i <= static_cast<int>(IssueKind::AuxiliaryInFlow); ++i) {
    auto k = static_cast<IssueKind>(i);
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

struct StructuralIssue {
  IssueKind kind = IssueKind::DeadEnd;
  std::vector<NodeId> nodes;         // the node(s) the issue is about
  std::optional<LaneId> lane;        // MissingStart / MissingEnd
  std::optional<std::size_t> edge;   // ConditionFromNonGateway
  std::string detail;

  friend bool operator==(const StructuralIssue&, const StructuralIssue&) = default;
};

struct ChoiceRecord {
  NodeId gateway;
  std::vector<NodeId> chosen;

  friend bool operator==(const ChoiceRecord&, const ChoiceRecord&) = default;
};

struct SimulationTrace {
  std::vector<NodeId> path;
  std::vector<ChoiceRecord> choices;
  std::optional<StructuralIssue> issue;
  double probability = 0.0;  // filled by enumerate_paths only

  friend bool operator==(const SimulationTrace&, const SimulationTrace&) = default;
};

// ---------------------------------------------------------------------------
// Issue rendering. Keys use display names rather than ids so that the same
// defect keeps its identity across regenerated graphs.

namespace detail {

inline std::string quoted_names(const ProceduralGraph& g, const std::vector<NodeId>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ", ";
    out += "'" + g.name(ids[i]) + "'";
  }
  return out;
}

}  // namespace detail

inline std::string describe(IssueKind kind, const ProceduralGraph& g, const std::vector<NodeId>& nodes,
                            std::optional<LaneId> lane, std::optional<std::size_t> edge,
                            std::size_t max_steps = 0) {
  const std::string names = detail::quoted_names(g, nodes);
  const std::string actor = lane ? g.lane(*lane).actor : std::string();
  switch (kind) {
    case IssueKind::DeadEnd:
      return "node " + names + " has no outgoing execution flow and is not an End node";
    case IssueKind::Unreachable:
      return "node(s) " + names + " cannot be reached from any Start node";
    case IssueKind::StepLimitExceeded:
      return "execution did not finish within " + std::to_string(max_steps) +
             " steps; the flow probably loops without an exit";
    case IssueKind::UnjoinedParallelBranch:
      return "branches opened at " + names + " reach End separately without being joined";
    case IssueKind::ConditionFromNonGateway: {
      std::string flow = edge ? g.name(g.edge(*edge).source) + " -> (" + g.edge(*edge).kind.label +
                                    ") " + g.name(g.edge(*edge).target)
                              : names;
      return "condition flow '" + flow + "' does not start at a gateway";
    }
    case IssueKind::MissingStart: return "lane '" + actor + "' has no Start node";
    case IssueKind::MissingEnd: return "lane '" + actor + "' has no End node";
    case IssueKind::SingleBranchGateway:
      return "gateway " + names + " has a single incoming and a single outgoing flow";
    case IssueKind::AuxiliaryInFlow:
      return "auxiliary node " + names + " is used as part of the execution flow";
  }
  return {};
}

inline StructuralIssue make_issue(const ProceduralGraph& g, IssueKind kind, std::vector<NodeId> nodes,
                                  std::optional<LaneId> lane = std::nullopt,
                                  std::optional<std::size_t> edge = std::nullopt,
                                  std::size_t max_steps = 0) {
  StructuralIssue issue{kind, std::move(nodes), lane, edge, {}};
  issue.detail = describe(kind, g, issue.nodes, lane, edge, max_steps);
  return issue;
}

inline std::string issue_key(const StructuralIssue& issue, const ProceduralGraph& g) {
  std::string key(to_string(issue.kind));
  key += "(";
  for (std::size_t i = 0; i < issue.nodes.size(); ++i) {
    if (i) key += ",";
    key += g.contains(issue.nodes[i]) ? g.name(issue.nodes[i]) : "#" + std::to_string(issue.nodes[i].value);
  }
  key += ")";
  if (issue.lane && issue.lane->value < g.lanes().size()) key += "@" + g.lane(*issue.lane).actor;
  if (issue.edge && *issue.edge < g.edge_count()) {
    const auto& e = g.edge(*issue.edge);
    key += "[" + g.name(e.source) + "->" + g.name(e.target) + "]";
  }
  return key;
}

inline std::string choices_key(const std::vector<ChoiceRecord>& choices, const ProceduralGraph& g) {
  std::string key;
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (i) key += ";";
    key += g.name(choices[i].gateway) + "={";
    for (std::size_t j = 0; j < choices[i].chosen.size(); ++j) {
      if (j) key += ",";
      key += g.name(choices[i].chosen[j]);
    }
    key += "}";
  }
  return key;
}

// ---------------------------------------------------------------------------
// Execution engine shared by sampling and exhaustive enumeration.

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t trial) {
  return splitmix64(master ^ splitmix64(trial + 1));
}

constexpr std::size_t kMaxOrFanout = 62;

struct LaneEntry {
  LaneId lane;
  std::optional<NodeId> start;
  bool has_nodes = false;
};

// Executable view of a graph flattened into per-id arrays.
class Compiled {
 public:
  explicit Compiled(const ProceduralGraph& graph) : graph_(graph), exec_(graph.executable_subgraph()) {
    const std::size_t n = exec_.id_bound();
    present_.assign(n, false);
    type_.assign(n, NodeType::Action);
    out_.assign(n, {});
    for (NodeId id : exec_.node_ids()) {
      present_[id.value] = true;
      type_[id.value] = exec_.node(id).type;
      for (const auto& [edge, target] : exec_.successors(id, FlowFilter::Executable)) {
        out_[id.value].push_back(target);
      }
      if (type_[id.value] == NodeType::Or && out_[id.value].size() > kMaxOrFanout) {
        throw Error(ErrorCode::LimitExceeded, "OR gateway " + exec_.name(id) + " has too many branches");
      }
    }
    reach_.assign(n, std::vector<char>(n, 0));
    for (NodeId id : exec_.node_ids()) {
      std::vector<NodeId> stack(out_[id.value].begin(), out_[id.value].end());
      auto& row = reach_[id.value];
      while (!stack.empty()) {
        NodeId v = stack.back();
        stack.pop_back();
        if (row[v.value]) continue;
        row[v.value] = 1;
        for (NodeId w : out_[v.value]) {
          if (!row[w.value]) stack.push_back(w);
        }
      }
    }
    for (std::size_t i = 0; i < exec_.lanes().size(); ++i) {
      const LaneId lane{static_cast<std::uint32_t>(i)};
      LaneEntry entry{lane, exec_.find_node(lane, NodeKind::start()), !exec_.lanes()[i].nodes.empty()};
      lanes_.push_back(entry);
    }
  }

  const ProceduralGraph& graph() const { return graph_; }
  const ProceduralGraph& exec() const { return exec_; }
  bool has_executable_nodes() const { return exec_.node_count() > 0; }
  NodeType type(NodeId id) const { return type_[id.value]; }
  const std::vector<NodeId>& out(NodeId id) const { return out_[id.value]; }
  bool reaches(NodeId from, NodeId to) const { return reach_[from.value][to.value] != 0; }
  const std::vector<LaneEntry>& lanes() const { return lanes_; }

 private:
  const ProceduralGraph& graph_;
  ProceduralGraph exec_;
  std::vector<bool> present_;
  std::vector<NodeType> type_;
  std::vector<std::vector<NodeId>> out_;
  std::vector<std::vector<char>> reach_;
  std::vector<LaneEntry> lanes_;
};

struct Token {
  NodeId at;
  std::vector<std::uint32_t> forks;  // open fork instances, innermost last
};

// Merged fork stack: common prefix of all stacks, closing the innermost
// shared fork when more than one token joins.
inline std::vector<std::uint32_t> merge_forks(const std::vector<Token>& tokens) {
  if (tokens.size() == 1) return tokens.front().forks;
  std::vector<std::uint32_t> common = tokens.front().forks;
  for (const Token& t : tokens) {
    std::size_t k = 0;
    while (k < common.size() && k < t.forks.size() && common[k] == t.forks[k]) ++k;
    common.resize(k);
  }
  if (!common.empty()) common.pop_back();
  return common;
}

// `choose(at, options)` must return a value in [0, options).
template <class Choose>
SimulationTrace run_trial(const Compiled& c, std::size_t max_steps, Choose&& choose) {
  SimulationTrace trace;
  const ProceduralGraph& g = c.graph();
  std::size_t steps = 0;

  auto fail = [&](IssueKind kind, std::vector<NodeId> nodes, std::optional<LaneId> lane = std::nullopt) {
    trace.issue = make_issue(g, kind, std::move(nodes), lane, std::nullopt, max_steps);
  };

  for (const LaneEntry& lane : c.lanes()) {
    if (!lane.has_nodes) continue;
    if (!lane.start) {
      fail(IssueKind::MissingStart, {}, lane.lane);
      return trace;
    }

    std::deque<Token> active;
    active.push_back(Token{*lane.start, {}});
    std::vector<std::pair<NodeId, std::vector<Token>>> waiting;
    std::vector<NodeId> fork_gateway;  // fork instance -> gateway
    std::size_t ends = 0;
    std::optional<NodeId> unjoined;

    auto open_fork = [&](NodeId gw, const std::vector<std::uint32_t>& base,
                         const std::vector<NodeId>& targets) {
      std::vector<std::uint32_t> stack = base;
      if (targets.size() > 1) {
        stack.push_back(static_cast<std::uint32_t>(fork_gateway.size()));
        fork_gateway.push_back(gw);
      }
      for (NodeId t : targets) active.push_back(Token{t, stack});
    };

    while (!active.empty() || !waiting.empty()) {
      if (++steps > max_steps) {
        fail(IssueKind::StepLimitExceeded, {});
        return trace;
      }
      if (!active.empty()) {
        Token tok = std::move(active.front());
        active.pop_front();
        const NodeId v = tok.at;
        const NodeType type = c.type(v);
        if (type == NodeType::End) {
          trace.path.push_back(v);
          if (++ends > 1 && !unjoined) {
            if (!tok.forks.empty()) {
              unjoined = fork_gateway[tok.forks.back()];
            } else if (!fork_gateway.empty()) {
              unjoined = fork_gateway.back();
            }
          }
          continue;
        }
        if (is_gateway(type)) {
          auto it = std::find_if(waiting.begin(), waiting.end(), [&](const auto& w) { return w.first == v; });
          if (it == waiting.end()) {
            waiting.emplace_back(v, std::vector<Token>{});
            it = std::prev(waiting.end());
          }
          it->second.push_back(std::move(tok));
          continue;
        }
        trace.path.push_back(v);
        const auto& outs = c.out(v);
        if (outs.empty()) {
          fail(IssueKind::DeadEnd, {v});
          return trace;
        }
        if (outs.size() == 1) {
          tok.at = outs.front();
        } else {
          const auto k = static_cast<std::size_t>(choose(v, outs.size()));
          trace.choices.push_back(ChoiceRecord{v, {outs[k]}});
          tok.at = outs[k];
        }
        active.push_back(std::move(tok));
        continue;
      }

      // Only parked tokens remain: fire the first group nobody else can reach.
      std::size_t pick = 0;
      for (std::size_t i = 0; i < waiting.size(); ++i) {
        bool blocked = false;
        for (std::size_t j = 0; j < waiting.size() && !blocked; ++j) {
          if (j != i && c.reaches(waiting[j].first, waiting[i].first)) blocked = true;
        }
        if (!blocked) {
          pick = i;
          break;
        }
      }
      const NodeId gw = waiting[pick].first;
      std::vector<Token> group = std::move(waiting[pick].second);
      waiting.erase(waiting.begin() + static_cast<std::ptrdiff_t>(pick));
      const auto forks = merge_forks(group);
      trace.path.push_back(gw);

      const auto& outs = c.out(gw);
      if (outs.empty()) {
        fail(IssueKind::DeadEnd, {gw});
        return trace;
      }
      switch (c.type(gw)) {
        case NodeType::Xor: {
          const auto k = static_cast<std::size_t>(choose(gw, outs.size()));
          trace.choices.push_back(ChoiceRecord{gw, {outs[k]}});
          open_fork(gw, forks, {outs[k]});
          break;
        }
        case NodeType::Or: {
          const std::uint64_t options = (std::uint64_t{1} << outs.size()) - 1;
          const std::uint64_t mask = choose(gw, options) + 1;
          std::vector<NodeId> chosen;
          for (std::size_t b = 0; b < outs.size(); ++b) {
            if (mask & (std::uint64_t{1} << b)) chosen.push_back(outs[b]);
          }
          trace.choices.push_back(ChoiceRecord{gw, chosen});
          open_fork(gw, forks, chosen);
          break;
        }
        default:
          open_fork(gw, forks, outs);
          break;
      }
    }

    if (ends > 1) {
      fail(IssueKind::UnjoinedParallelBranch, unjoined ? std::vector<NodeId>{*unjoined} : std::vector<NodeId>{});
      return trace;
    }
  }
  return trace;
}

inline SimulationTrace empty_graph_trace(const ProceduralGraph& g) {
  SimulationTrace t;
  std::optional<LaneId> lane;
  if (!g.lanes().empty()) lane = LaneId{0};
  t.issue = make_issue(g, IssueKind::MissingStart, {}, lane);
  return t;
}

}  // namespace detail

// Runs `config.trials` independent trials. Trial k draws from its own
// generator seeded by (seed, k), so the result does not depend on the
// worker count.
inline std::vector<SimulationTrace> simulate(const ProceduralGraph& graph, const SimulationConfig& config) {
  config.validate();
  const detail::Compiled compiled(graph);
  if (!compiled.has_executable_nodes()) return {detail::empty_graph_trace(graph)};

  std::vector<SimulationTrace> traces(config.trials);
  auto run_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      std::mt19937_64 rng(detail::trial_seed(config.seed, k));
      traces[k] = detail::run_trial(compiled, config.max_steps, [&](NodeId, std::uint64_t options) {
        return std::uniform_int_distribution<std::uint64_t>(0, options - 1)(rng);
      });
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(config.workers, static_cast<unsigned>(config.trials)));
  if (workers == 1) {
    run_range(0, config.trials);
    return traces;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (config.trials + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(config.trials, b + chunk);
    if (b >= e) break;
    pool.emplace_back(run_range, b, e);
  }
  for (auto& t : pool) t.join();
  return traces;
}

// Every distinct run of the uniform policy exactly once, with its exact
// probability. Requires an acyclic executable subgraph.
inline std::vector<SimulationTrace> enumerate_paths(const ProceduralGraph& graph, std::size_t max_paths,
                                                    std::size_t max_steps = 512) {
  const detail::Compiled compiled(graph);
  const auto& exec = compiled.exec();

  // Cycle check: iterative three-colour DFS.
  {
    std::vector<int> colour(exec.id_bound(), 0);
    for (NodeId root : exec.node_ids()) {
      if (colour[root.value]) continue;
      std::vector<std::pair<NodeId, std::size_t>> stack{{root, 0}};
      colour[root.value] = 1;
      while (!stack.empty()) {
        auto& [v, next] = stack.back();
        const auto& outs = compiled.out(v);
        if (next < outs.size()) {
          const NodeId w = outs[next++];
          if (colour[w.value] == 1) {
            throw Error(ErrorCode::Cycle, "executable flow contains a cycle through " + exec.name(w));
          }
          if (colour[w.value] == 0) {
            colour[w.value] = 1;
            stack.emplace_back(w, 0);
          }
        } else {
          colour[v.value] = 2;
          stack.pop_back();
        }
      }
    }
  }

  if (!compiled.has_executable_nodes()) {
    auto t = detail::empty_graph_trace(graph);
    t.probability = 1.0;
    return {t};
  }

  std::vector<SimulationTrace> out;
  std::vector<std::vector<std::uint64_t>> pending{{}};
  while (!pending.empty()) {
    const std::vector<std::uint64_t> prefix = std::move(pending.back());
    pending.pop_back();

    std::vector<std::uint64_t> taken;
    std::vector<std::uint64_t> options;
    auto trace = detail::run_trial(compiled, max_steps, [&](NodeId, std::uint64_t n) {
      const std::uint64_t v = taken.size() < prefix.size() ? prefix[taken.size()] : 0;
      taken.push_back(v);
      options.push_back(n);
      return v;
    });
    double p = 1.0;
    for (auto n : options) p /= static_cast<double>(n);
    trace.probability = p;
    out.push_back(std::move(trace));
    if (out.size() > max_paths) {
      throw Error(ErrorCode::LimitExceeded, "more than " + std::to_string(max_paths) + " distinct paths");
    }

    std::vector<std::vector<std::uint64_t>> children;
    for (std::size_t j = taken.size(); j-- > prefix.size();) {
      for (std::uint64_t alt = 1; alt < options[j]; ++alt) {
        std::vector<std::uint64_t> child(taken.begin(), taken.begin() + static_cast<std::ptrdiff_t>(j));
        child.push_back(alt);
        children.push_back(std::move(child));
      }
    }
    for (auto it = children.rbegin(); it != children.rend(); ++it) pending.push_back(std::move(*it));
  }
  return out;
}

// Graph analysis without sampling.
inline std::vector<StructuralIssue> detect_static_issues(const ProceduralGraph& graph) {
  std::vector<StructuralIssue> issues;
  const ProceduralGraph exec = graph.executable_subgraph();

  std::vector<NodeId> starts;
  for (std::size_t i = 0; i < exec.lanes().size(); ++i) {
    const LaneId lane{static_cast<std::uint32_t>(i)};
    if (exec.lanes()[i].nodes.empty()) continue;
    auto start = exec.find_node(lane, NodeKind::start());
    if (start) {
      starts.push_back(*start);
    } else {
      issues.push_back(make_issue(graph, IssueKind::MissingStart, {}, lane));
    }
    if (!exec.find_node(lane, NodeKind::end())) issues.push_back(make_issue(graph, IssueKind::MissingEnd, {}, lane));
  }

  std::vector<char> reached(exec.id_bound(), 0);
  std::vector<NodeId> stack = starts;
  while (!stack.empty()) {
    NodeId v = stack.back();
    stack.pop_back();
    if (reached[v.value]) continue;
    reached[v.value] = 1;
    for (const auto& [e, w] : exec.successors(v, FlowFilter::Executable)) {
      if (!reached[w.value]) stack.push_back(w);
    }
  }
  if (!starts.empty()) {
    std::vector<NodeId> unreachable;
    for (NodeId id : exec.node_ids()) {
      if (!reached[id.value]) unreachable.push_back(id);
    }
    if (!unreachable.empty()) issues.push_back(make_issue(graph, IssueKind::Unreachable, std::move(unreachable)));
  }

  for (NodeId id : graph.node_ids()) {
    const NodeKind& k = graph.node(id);
    if (k.is_auxiliary()) {
      bool misused = !graph.successors(id).empty();
      for (const auto& [e, src] : graph.predecessors(id)) {
        if (e.kind.type == FlowType::Condition) misused = true;
      }
      if (misused) issues.push_back(make_issue(graph, IssueKind::AuxiliaryInFlow, {id}));
      continue;
    }
    const auto outs = exec.successors(id, FlowFilter::Executable).size();
    const auto ins = exec.predecessors(id, FlowFilter::Executable).size();
    if (reached[id.value] && k.type != NodeType::End && outs == 0) {
      issues.push_back(make_issue(graph, IssueKind::DeadEnd, {id}));
    }
    if (k.is_gateway() && outs == 1 && ins <= 1) {
      issues.push_back(make_issue(graph, IssueKind::SingleBranchGateway, {id}));
    }
  }

  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    const Edge& e = graph.edge(i);
    if (e.kind.type == FlowType::Condition && !graph.node(e.source).is_gateway()) {
      issues.push_back(make_issue(graph, IssueKind::ConditionFromNonGateway, {e.source, e.target}, std::nullopt, i));
    }
  }
  return issues;
}

// ---------------------------------------------------------------------------
// Gateway-to-gateway segments.

struct GatewaySegment {
  NodeId gateway;
  std::vector<NodeId> nodes;                // interior nodes in BFS order
  std::vector<std::size_t> sequence_edges;  // edge indices into the graph
  std::vector<std::size_t> condition_edges;
  std::vector<std::size_t> constraint_edges;
  std::vector<NodeId> boundary;  // nearest downstream gateways, in discovery order

  bool empty() const { return sequence_edges.empty() && condition_edges.empty() && constraint_edges.empty(); }
};

inline GatewaySegment extract_segment(const ProceduralGraph& graph, NodeId gateway) {
  GatewaySegment seg;
  seg.gateway = gateway;
  std::vector<char> seen(graph.id_bound(), 0);
  std::deque<NodeId> queue{gateway};
  seen[gateway.value] = 1;
  while (!queue.empty()) {
    const NodeId u = queue.front();
    queue.pop_front();
    for (std::size_t idx : graph.out_edge_indices(u)) {
      const Edge& e = graph.edge(idx);
      if (!graph.passes(e, FlowFilter::Executable)) continue;
      (e.kind.type == FlowType::Condition ? seg.condition_edges : seg.sequence_edges).push_back(idx);
      const NodeId v = e.target;
      if (graph.node(v).is_gateway()) {
        if (std::find(seg.boundary.begin(), seg.boundary.end(), v) == seg.boundary.end()) seg.boundary.push_back(v);
        continue;
      }
      if (!seen[v.value]) {
        seen[v.value] = 1;
        seg.nodes.push_back(v);
        queue.push_back(v);
      }
    }
  }
  for (std::size_t idx = 0; idx < graph.edge_count(); ++idx) {
    const Edge& e = graph.edge(idx);
    const bool src_aux = graph.node(e.source).is_auxiliary();
    const bool dst_aux = graph.node(e.target).is_auxiliary();
    if (src_aux == dst_aux) continue;
    const NodeId anchor = src_aux ? e.target : e.source;
    if (anchor == gateway || std::find(seg.nodes.begin(), seg.nodes.end(), anchor) != seg.nodes.end()) {
      seg.constraint_edges.push_back(idx);
    }
  }
  return seg;
}

inline std::vector<GatewaySegment> extract_gateway_segments(const ProceduralGraph& graph) {
  std::vector<GatewaySegment> out;
  for (NodeId id : graph.node_ids()) {
    if (graph.node(id).is_gateway()) out.push_back(extract_segment(graph, id));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation.

// Identity of one failing outcome: the localized issue plus the gateway
// choices that led to it.
struct IssueSignature {
  std::string key;
  StructuralIssue issue;
  std::vector<ChoiceRecord> choices;

  friend bool operator<(const IssueSignature& a, const IssueSignature& b) { return a.key < b.key; }
  friend bool operator==(const IssueSignature& a, const IssueSignature& b) { return a.key == b.key; }
};

using IssueCounts = std::map<IssueSignature, std::size_t>;

inline IssueSignature signature_of(const StructuralIssue& issue, const std::vector<ChoiceRecord>& choices,
                                   const ProceduralGraph& g) {
  return IssueSignature{issue_key(issue, g) + "|" + choices_key(choices, g), issue, choices};
}

inline IssueCounts aggregate_issue_counts(const std::vector<SimulationTrace>& traces, const ProceduralGraph& g) {
  IssueCounts counts;
  for (const auto& t : traces) {
    if (!t.issue) continue;
    ++counts[signature_of(*t.issue, t.choices, g)];
  }
  return counts;
}

// (gateway, chosen set) -> number of times chosen.
inline std::map<std::pair<NodeId, std::vector<NodeId>>, std::size_t> branch_counts(
    const std::vector<SimulationTrace>& traces) {
  std::map<std::pair<NodeId, std::vector<NodeId>>, std::size_t> out;
  for (const auto& t : traces) {
    for (const auto& c : t.choices) ++out[{c.gateway, c.chosen}];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trace dump: one JSON object per line,
// {path:[ids], choices:[{gateway, chosen:[ids]}], issue:{kind,detail}|null}.

inline nlohmann::ordered_json trace_to_json(const SimulationTrace& t) {
  nlohmann::ordered_json j;
  j["path"] = nlohmann::ordered_json::array();
  for (NodeId id : t.path) j["path"].push_back(id.value);
  j["choices"] = nlohmann::ordered_json::array();
  for (const auto& c : t.choices) {
    nlohmann::ordered_json cj;
    cj["gateway"] = c.gateway.value;
    cj["chosen"] = nlohmann::ordered_json::array();
    for (NodeId id : c.chosen) cj["chosen"].push_back(id.value);
    j["choices"].push_back(std::move(cj));
  }
  if (t.issue) {
    nlohmann::ordered_json ij;
    ij["kind"] = std::string(to_string(t.issue->kind));
    ij["detail"] = t.issue->detail;
    j["issue"] = std::move(ij);
  } else {
    j["issue"] = nullptr;
  }
  return j;
}

inline void write_traces_jsonl(std::ostream& os, const std::vector<SimulationTrace>& traces) {
  for (const auto& t : traces) os << trace_to_json(t).dump() << '\n';
}

inline nlohmann::ordered_json issue_to_json(const StructuralIssue& issue) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(issue.kind));
  j["nodes"] = nlohmann::ordered_json::array();
  for (NodeId id : issue.nodes) j["nodes"].push_back(id.value);
  if (issue.lane) j["lane"] = issue.lane->value;
  if (issue.edge) j["edge"] = *issue.edge;
  j["detail"] = issue.detail;
  return j;
}

inline StructuralIssue issue_from_json(const nlohmann::ordered_json& j) {
  StructuralIssue issue;
  auto kind = issue_kind_from_string(j.at("kind").get<std::string>());
  if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown issue kind " + j.at("kind").dump());
  issue.kind = *kind;
  for (const auto& n : j.at("nodes")) issue.nodes.push_back(NodeId{n.get<std::uint32_t>()});
  if (j.contains("lane")) issue.lane = LaneId{j.at("lane").get<std::uint32_t>()};
  if (j.contains("edge")) issue.edge = j.at("edge").get<std::size_t>();
  issue.detail = j.at("detail").get<std::string>();
  return issue;
}

}  // namespace text2flow::sim
