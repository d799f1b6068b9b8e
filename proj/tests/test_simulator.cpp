#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "support.hpp"
#include "text2flow/simulator.hpp"

using namespace text2flow;
using namespace text2flow::sim;

namespace {

ProceduralGraph g_of(const std::string& dsl) { return dsl::parse(dsl).graph; }

NodeId id_of(const ProceduralGraph& g, const std::string& name) {
  for (NodeId id : g.node_ids()) {
    if (g.name(id) == name) return id;
  }
  throw std::runtime_error("no node " + name);
}

std::vector<std::string> names(const ProceduralGraph& g, const std::vector<NodeId>& ids) {
  std::vector<std::string> out;
  for (NodeId id : ids) out.push_back(g.name(id));
  return out;
}

SimulationConfig cfg(std::size_t trials, std::uint64_t seed = 1) {
  SimulationConfig c;
  c.trials = trials;
  c.seed = seed;
  return c;
}

// The customer lane of the worked example on its own.
ProceduralGraph customer_lane() {
  const auto full = t2f_test::appendix_flow("restaurant");
  return g_of(full.substr(0, full.find("For the restaurant:")));
}

}  // namespace

TEST(Simulator, LinearGraph) {
  const auto g = g_of("Start -> A\nA -> End");
  const auto traces = simulate(g, cfg(50));
  ASSERT_EQ(traces.size(), 50u);
  for (const auto& t : traces) {
    EXPECT_EQ(names(g, t.path), (std::vector<std::string>{"Start", "A", "End"}));
    EXPECT_FALSE(t.issue.has_value());
    EXPECT_TRUE(t.choices.empty());
  }
}

TEST(Simulator, DeadEnd) {
  const auto g = g_of("Start -> A");
  for (const auto& t : simulate(g, cfg(20))) {
    ASSERT_TRUE(t.issue.has_value());
    EXPECT_EQ(t.issue->kind, IssueKind::DeadEnd);
    EXPECT_EQ(t.issue->nodes, std::vector<NodeId>{id_of(g, "A")});
  }
}

TEST(Simulator, EmptyExecutableGraphYieldsSingleMissingStart) {
  const auto g = g_of("DataObject(x) -> TextAnnotation(y)");
  const auto traces = simulate(g, cfg(100));
  ASSERT_EQ(traces.size(), 1u);
  ASSERT_TRUE(traces[0].issue);
  EXPECT_EQ(traces[0].issue->kind, IssueKind::MissingStart);
  EXPECT_EQ(simulate(ProceduralGraph{}, cfg(3)).size(), 1u);
}

TEST(Simulator, RejectsZeroTrials) {
  EXPECT_THROW(simulate(g_of("Start -> End"), cfg(0)), Error);
  SimulationConfig c = cfg(1);
  c.max_steps = 0;
  EXPECT_THROW(simulate(g_of("Start -> End"), c), Error);
}

TEST(Simulator, MissingStartInLane) {
  const auto g = g_of("A -> End");
  const auto t = simulate(g, cfg(1)).front();
  ASSERT_TRUE(t.issue);
  EXPECT_EQ(t.issue->kind, IssueKind::MissingStart);
  EXPECT_EQ(t.issue->lane, LaneId{0});
}

TEST(Simulator, RestaurantXorBranchFrequency) {
  const auto g = customer_lane();
  const NodeId xor1 = id_of(g, "XOR1");
  const NodeId card = id_of(g, "pay by credit card");
  const auto traces = simulate(g, cfg(10000, 42));
  std::size_t card_count = 0;
  std::size_t visits = 0;
  for (const auto& t : traces) {
    EXPECT_FALSE(t.issue.has_value());
    for (const auto& c : t.choices) {
      if (c.gateway != xor1) continue;
      ++visits;
      if (c.chosen == std::vector<NodeId>{card}) ++card_count;
    }
  }
  EXPECT_EQ(visits, 10000u);
  EXPECT_NEAR(static_cast<double>(card_count) / 10000.0, 0.5, 0.02);
}

TEST(Simulator, AppendixGraphsAreIssueFree) {
  for (const auto& name : t2f_test::appendix_names()) {
    const auto g = t2f_test::appendix_graph(name);
    for (const auto& t : enumerate_paths(g, 1000)) EXPECT_FALSE(t.issue) << name << ": " << t.issue->detail;
    EXPECT_TRUE(aggregate_issue_counts(simulate(g, cfg(2000, 3)), g).empty()) << name;
    EXPECT_TRUE(detect_static_issues(g).empty()) << name;
  }
}

TEST(Simulator, DeterministicAndWorkerIndependent) {
  const auto g = t2f_test::appendix_graph("email");
  auto c = cfg(3000, 99);
  const auto a = simulate(g, c);
  const auto b = simulate(g, c);
  c.workers = 4;
  const auto d = simulate(g, c);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, d);
  c.seed = 100;
  EXPECT_NE(simulate(g, c), a);
}

TEST(Simulator, AndForkJoins) {
  const auto g = g_of("Start -> AND1\nAND1 -> a\nAND1 -> b\na -> AND2\nb -> AND2\nAND2 -> End");
  for (const auto& t : simulate(g, cfg(10))) {
    EXPECT_FALSE(t.issue);
    EXPECT_EQ(names(g, t.path), (std::vector<std::string>{"Start", "AND1", "a", "b", "AND2", "End"}));
  }
}

TEST(Simulator, UnjoinedParallelBranch) {
  const auto g = g_of("Start -> AND1\nAND1 -> a\nAND1 -> b\na -> End\nb -> End");
  const auto t = simulate(g, cfg(1)).front();
  ASSERT_TRUE(t.issue);
  EXPECT_EQ(t.issue->kind, IssueKind::UnjoinedParallelBranch);
  EXPECT_EQ(t.issue->nodes, std::vector<NodeId>{id_of(g, "AND1")});
}

TEST(Simulator, LoopHitsStepLimit) {
  const auto g = g_of("Start -> a\na -> b\nb -> a");
  SimulationConfig c = cfg(2);
  c.max_steps = 40;
  for (const auto& t : simulate(g, c)) {
    ASSERT_TRUE(t.issue);
    EXPECT_EQ(t.issue->kind, IssueKind::StepLimitExceeded);
    EXPECT_LE(t.path.size(), 40u);
  }
}

TEST(Simulator, LoopWithExitTerminates) {
  const auto g = g_of("Start -> a\na -> XOR1\nXOR1 -> (retry) a\nXOR1 -> (done) End");
  std::size_t ok = 0;
  for (const auto& t : simulate(g, cfg(500))) ok += t.issue ? 0 : 1;
  // Failing requires ~250 consecutive retries.
  EXPECT_EQ(ok, 500u);
}

TEST(Simulator, ImplicitChoiceAtAction) {
  const auto g = g_of("Start -> a\na -> b\na -> c\nb -> End\nc -> End");
  const auto paths = enumerate_paths(g, 10);
  ASSERT_EQ(paths.size(), 2u);
  EXPECT_DOUBLE_EQ(paths[0].probability, 0.5);
  EXPECT_EQ(paths[0].choices.size(), 1u);
  EXPECT_EQ(paths[0].choices[0].gateway, id_of(g, "a"));
}

TEST(Simulator, TracesSkipAuxiliaryNodes) {
  const auto g = t2f_test::appendix_graph("restaurant");
  for (const auto& t : simulate(g, cfg(500))) {
    if (t.issue) continue;
    for (NodeId id : t.path) EXPECT_FALSE(g.node(id).is_auxiliary());
  }
}

TEST(Simulator, LanesRunInOrderEachTrial) {
  const auto g = t2f_test::appendix_graph("restaurant");
  const auto t = simulate(g, cfg(1)).front();
  ASSERT_FALSE(t.issue);
  EXPECT_EQ(std::count_if(t.path.begin(), t.path.end(), [&](NodeId id) { return g.node(id).type == NodeType::Start; }),
            2);
  EXPECT_EQ(g.name(t.path.front()), "Start");
  EXPECT_EQ(g.name(t.path.back()), "End");
}

// ---------------------------------------------------------------------------

TEST(Enumerate, XorTwoBranches) {
  const auto g = g_of("Start -> XOR1\nXOR1 -> (x) a\nXOR1 -> (y) b\na -> End\nb -> End");
  const auto paths = enumerate_paths(g, 10);
  ASSERT_EQ(paths.size(), 2u);
  for (const auto& p : paths) {
    EXPECT_DOUBLE_EQ(p.probability, 0.5);
    EXPECT_FALSE(p.issue);
  }
  EXPECT_EQ(names(g, paths[0].path), (std::vector<std::string>{"Start", "XOR1", "a", "End"}));
  EXPECT_EQ(names(g, paths[1].path), (std::vector<std::string>{"Start", "XOR1", "b", "End"}));
}

TEST(Enumerate, OrTwoBranchesGivesThreeSubsets) {
  const auto g = g_of("Start -> OR1\nOR1 -> a\nOR1 -> b\na -> OR2\nb -> OR2\nOR2 -> End");
  const auto paths = enumerate_paths(g, 10);
  ASSERT_EQ(paths.size(), 3u);
  std::set<std::vector<std::string>> sets;
  for (const auto& p : paths) {
    EXPECT_NEAR(p.probability, 1.0 / 3.0, 1e-15);
    EXPECT_FALSE(p.issue);
    sets.insert(names(g, p.choices.at(0).chosen));
  }
  EXPECT_EQ(sets, (std::set<std::vector<std::string>>{{"a"}, {"b"}, {"a", "b"}}));
}

TEST(Enumerate, ProbabilitiesSumToOne) {
  for (const auto& name : t2f_test::appendix_names()) {
    double total = 0;
    for (const auto& p : enumerate_paths(t2f_test::appendix_graph(name), 1000)) total += p.probability;
    EXPECT_NEAR(total, 1.0, 1e-12) << name;
  }
}

TEST(Enumerate, CycleAndLimitErrors) {
  try {
    enumerate_paths(g_of("Start -> a\na -> b\nb -> a\nb -> End"), 10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Cycle);
  }
  try {
    enumerate_paths(g_of("Start -> OR1\nOR1 -> a\nOR1 -> b\nOR1 -> c\na -> End\nb -> End\nc -> End"), 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LimitExceeded);
  }
}

// Exact enumeration as the reference for sampled frequencies: the customer
// lane has 3 OR subsets x 2 XOR branches = 6 runs of probability 1/6.
TEST(Enumerate, RestaurantLaneMatchesSampling) {
  const auto g = customer_lane();
  const auto paths = enumerate_paths(g, 100);
  ASSERT_EQ(paths.size(), 6u);
  const std::size_t n = 10000;
  const auto traces = simulate(g, cfg(n, 7));
  std::map<std::string, std::size_t> observed;
  for (const auto& t : traces) ++observed[choices_key(t.choices, g)];
  for (const auto& p : paths) {
    EXPECT_NEAR(p.probability, 1.0 / 6.0, 1e-15);
    const double expected = p.probability * n;
    const double sigma = std::sqrt(n * p.probability * (1 - p.probability));
    EXPECT_NEAR(static_cast<double>(observed[choices_key(p.choices, g)]), expected, 3 * sigma);
  }
}

// ---------------------------------------------------------------------------

TEST(StaticIssues, NodeWithOnlyAnnotationEdgeIsDeadEnd) {
  const auto g = g_of("Start -> confirm\nconfirm -> TextAnnotation(note)");
  const auto issues = detect_static_issues(g);
  ASSERT_EQ(issues.size(), 2u);
  EXPECT_EQ(issues[0].kind, IssueKind::MissingEnd);
  EXPECT_EQ(issues[1].kind, IssueKind::DeadEnd);
  EXPECT_EQ(issues[1].nodes, std::vector<NodeId>{id_of(g, "confirm")});
}

TEST(StaticIssues, DataObjectAsSource) {
  const auto g = g_of("Start -> A\nDataObject(x) -> A\nA -> End");
  const auto issues = detect_static_issues(g);
  ASSERT_EQ(issues.size(), 1u);
  EXPECT_EQ(issues[0].kind, IssueKind::AuxiliaryInFlow);
  EXPECT_EQ(issues[0].nodes, std::vector<NodeId>{id_of(g, "DataObject(x)")});
}

TEST(StaticIssues, ConnectedTwoNodeGraphIsClean) {
  EXPECT_TRUE(detect_static_issues(g_of("Start -> End")).empty());
}

TEST(StaticIssues, FullTaxonomy) {
  const auto g = g_of(
      "Start -> a\na -> (odd) b\nb -> XOR1\nXOR1 -> c\nc -> End\norphan -> End\nx -> (c) DataObject(d)");
  std::map<IssueKind, std::size_t> kinds;
  for (const auto& i : detect_static_issues(g)) ++kinds[i.kind];
  EXPECT_EQ(kinds[IssueKind::ConditionFromNonGateway], 2u);
  EXPECT_EQ(kinds[IssueKind::SingleBranchGateway], 1u);
  EXPECT_EQ(kinds[IssueKind::Unreachable], 1u);
  EXPECT_EQ(kinds[IssueKind::AuxiliaryInFlow], 1u);
  // x only reaches an auxiliary node but is itself unreachable.
  EXPECT_EQ(kinds[IssueKind::DeadEnd], 0u);
  const auto issues = detect_static_issues(g);
  EXPECT_EQ(issues, detect_static_issues(g));
}

TEST(StaticIssues, MissingStartAndEnd) {
  const auto g = g_of("For p:\na -> b\nFor q:\nStart -> c\nc -> End");
  const auto issues = detect_static_issues(g);
  ASSERT_GE(issues.size(), 2u);
  EXPECT_EQ(issues[0].kind, IssueKind::MissingStart);
  EXPECT_EQ(issues[0].lane, LaneId{0});
  EXPECT_EQ(issues[1].kind, IssueKind::MissingEnd);
  EXPECT_EQ(issues[1].lane, LaneId{0});
}

// ---------------------------------------------------------------------------

TEST(Segments, RestaurantXor1) {
  const auto g = t2f_test::appendix_graph("restaurant");
  const NodeId xor1 = id_of(g, "XOR1");
  const auto seg = extract_segment(g, xor1);
  EXPECT_EQ(seg.condition_edges.size(), 2u);
  EXPECT_EQ(names(g, seg.nodes), (std::vector<std::string>{"pay by credit card", "pay in cash"}));
  EXPECT_EQ(names(g, seg.boundary), std::vector<std::string>{"XOR2"});
  EXPECT_EQ(seg.sequence_edges.size(), 2u);
  EXPECT_TRUE(seg.constraint_edges.empty());
}

TEST(Segments, BranchesEndingAtEndHaveNoBoundary) {
  const auto g = g_of("Start -> XOR1\nXOR1 -> (x) a\nXOR1 -> (y) b\na -> End\nb -> End\nb -> DataObject(z)");
  const auto seg = extract_segment(g, id_of(g, "XOR1"));
  EXPECT_TRUE(seg.boundary.empty());
  EXPECT_EQ(seg.constraint_edges.size(), 1u);
  EXPECT_EQ(seg.sequence_edges.size(), 2u);
}

TEST(Segments, OnePerGatewayAndNoneWithoutGateways) {
  EXPECT_TRUE(extract_gateway_segments(g_of("Start -> a\na -> End")).empty());
  EXPECT_EQ(extract_gateway_segments(t2f_test::appendix_graph("staff")).size(), 6u);
}

TEST(Segments, EdgesNeverCrossInteriorGateways) {
  const auto g = t2f_test::appendix_graph("staff");
  for (const auto& seg : extract_gateway_segments(g)) {
    for (auto idx : seg.sequence_edges) {
      EXPECT_FALSE(g.node(g.edge(idx).source).is_gateway() && g.edge(idx).source != seg.gateway);
    }
    for (auto idx : seg.condition_edges) EXPECT_EQ(g.edge(idx).source, seg.gateway);
  }
}

// ---------------------------------------------------------------------------

TEST(Aggregate, CountsFailingTraces) {
  const auto g = g_of("Start -> A");
  std::vector<SimulationTrace> traces(10);
  const NodeId a = id_of(g, "A");
  for (int i = 0; i < 4; ++i) traces[i].issue = make_issue(g, IssueKind::DeadEnd, {a});
  const auto counts = aggregate_issue_counts(traces, g);
  ASSERT_EQ(counts.size(), 1u);
  EXPECT_EQ(counts.begin()->second, 4u);
  EXPECT_EQ(counts.begin()->first.issue.kind, IssueKind::DeadEnd);
}

TEST(Aggregate, AllSuccessfulIsEmpty) {
  const auto g = g_of("Start -> End");
  EXPECT_TRUE(aggregate_issue_counts(simulate(g, cfg(10)), g).empty());
}

TEST(Aggregate, DistinctChoicesToSameDeadEndCountSeparately) {
  const auto g = g_of("Start -> XOR1\nXOR1 -> (x) a\nXOR1 -> (y) b\na -> dead\nb -> dead");
  const auto paths = enumerate_paths(g, 10);
  ASSERT_EQ(paths.size(), 2u);
  const auto counts = aggregate_issue_counts(paths, g);
  ASSERT_EQ(counts.size(), 2u);
  for (const auto& [sig, n] : counts) {
    EXPECT_EQ(sig.issue.kind, IssueKind::DeadEnd);
    EXPECT_EQ(sig.issue.nodes, std::vector<NodeId>{id_of(g, "dead")});
    EXPECT_EQ(n, 1u);
  }
}

TEST(Traces, JsonLinesFormat) {
  const auto g = g_of("Start -> XOR1\nXOR1 -> (x) a\nXOR1 -> (y) End\na -> End");
  const auto paths = enumerate_paths(g, 10);
  std::ostringstream os;
  write_traces_jsonl(os, paths);
  const auto lines = text::split_lines(os.str());
  ASSERT_EQ(lines.size(), 2u);
  EXPECT_EQ(lines[0], R"({"path":[0,1,2,3],"choices":[{"gateway":1,"chosen":[2]}],"issue":null})");
  const auto dead = simulate(g_of("Start -> A"), cfg(1));
  EXPECT_EQ(trace_to_json(dead[0]).dump(),
            R"({"path":[0,1],"choices":[],"issue":{"kind":"DeadEnd","detail":"node 'A' has no outgoing )"
            R"(execution flow and is not an End node"}})");
}

TEST(Traces, IssueJsonRoundTrip) {
  const auto g = g_of("Start -> a\na -> (odd) b\nb -> End");
  for (const auto& i : detect_static_issues(g)) EXPECT_EQ(issue_from_json(issue_to_json(i)), i);
}
