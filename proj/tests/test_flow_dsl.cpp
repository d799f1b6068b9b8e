#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "support.hpp"
#include "text2flow/flow_dsl.hpp"

using namespace text2flow;
using text2flow::dsl::parse;
using text2flow::dsl::serialize;
using text2flow::dsl::Severity;

namespace {

std::size_t count(const dsl::ParseResult& r, Severity s) {
  return static_cast<std::size_t>(
      std::count_if(r.diagnostics.begin(), r.diagnostics.end(), [&](const auto& d) { return d.severity == s; }));
}

// Flow lines with whitespace collapsed, headers included, blanks dropped.
std::multiset<std::string> line_set(const std::string& s) {
  std::multiset<std::string> out;
  for (const auto& l : text::split_lines(s)) {
    auto n = text::normalize(l);
    if (!n.empty()) out.insert(n);
  }
  return out;
}

}  // namespace

TEST(FlowDsl, SequenceEdge) {
  const auto r = parse("Start -> find an empty seat");
  EXPECT_TRUE(r.diagnostics.empty());
  ASSERT_EQ(r.graph.edge_count(), 1u);
  const Edge& e = r.graph.edge(0);
  EXPECT_EQ(e.kind.type, FlowType::Sequence);
  EXPECT_EQ(r.graph.node(e.source).type, NodeType::Start);
  EXPECT_EQ(r.graph.node(e.target), NodeKind::action("find an empty seat"));
  EXPECT_EQ(r.graph.lane(e.lane).actor, "the process");
}

TEST(FlowDsl, ConditionEdge) {
  const auto r = parse("XOR1 -> (credit card is available) pay by credit card");
  EXPECT_TRUE(r.diagnostics.empty());
  ASSERT_EQ(r.graph.edge_count(), 1u);
  EXPECT_EQ(r.graph.edge(0).kind, FlowKind::condition("credit card is available"));
  EXPECT_EQ(r.graph.node(r.graph.edge(0).source), NodeKind::xor_gateway(1));
  EXPECT_EQ(r.graph.name(r.graph.edge(0).target), "pay by credit card");
}

TEST(FlowDsl, ConstraintEdge) {
  const auto r = parse("confirm the payment -> TextAnnotation(provide the receipt if the customer needs)");
  EXPECT_TRUE(r.diagnostics.empty());
  ASSERT_EQ(r.graph.edge_count(), 1u);
  EXPECT_EQ(r.graph.edge(0).kind.type, FlowType::Constraint);
  EXPECT_EQ(r.graph.node(r.graph.edge(0).target),
            NodeKind::text_annotation("provide the receipt if the customer needs"));
}

TEST(FlowDsl, LineWithoutArrowIsDiagnosed) {
  const auto r = parse("this line has no arrow");
  EXPECT_TRUE(r.graph.empty());
  EXPECT_EQ(r.graph.edge_count(), 0u);
  ASSERT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.diagnostics[0].severity, Severity::Error);
  EXPECT_EQ(r.diagnostics[0].line, 1);
}

TEST(FlowDsl, EmptyInput) {
  const auto r = parse("");
  EXPECT_TRUE(r.graph.empty());
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_TRUE(r.graph.lanes().empty());
}

TEST(FlowDsl, NestedParenthesesInLabel) {
  const auto r = parse("XOR2 -> (stock is sufficient (per table)) ship the goods");
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_EQ(r.graph.edge(0).kind.label, "stock is sufficient (per table)");
  EXPECT_EQ(r.graph.name(r.graph.edge(0).target), "ship the goods");
}

TEST(FlowDsl, ArrowInsideLabelIsNotASeparator) {
  const auto r = parse("XOR1 -> (a -> b) do it");
  EXPECT_TRUE(r.diagnostics.empty());
  EXPECT_EQ(r.graph.edge(0).kind.label, "a -> b");
}

TEST(FlowDsl, FencesBackticksAndBoldAreStripped) {
  const auto r = parse("```\n**For the staff:**\n`Start -> receive`\nreceive -> End\n```\n");
  EXPECT_TRUE(r.diagnostics.empty());
  ASSERT_EQ(r.graph.lanes().size(), 1u);
  EXPECT_EQ(r.graph.lanes()[0].actor, "the staff");
  EXPECT_EQ(r.graph.edge_count(), 2u);
}

TEST(FlowDsl, HeaderAppliesUntilNextHeader) {
  const auto r = parse("Start -> a\nFor the clerk:\nStart -> b\nFor the boss\nStart -> c\n");
  EXPECT_TRUE(r.diagnostics.empty());
  ASSERT_EQ(r.graph.lanes().size(), 3u);
  EXPECT_EQ(r.graph.lanes()[0].actor, "the process");
  EXPECT_EQ(r.graph.lanes()[1].actor, "the clerk");
  EXPECT_EQ(r.graph.lanes()[2].actor, "the boss");
  // Each lane has its own Start.
  EXPECT_EQ(r.graph.node_count(), 6u);
}

TEST(FlowDsl, ConditionFromNonGatewayParsesWithWarning) {
  const auto r = parse("check stock -> (enough) ship");
  ASSERT_EQ(r.graph.edge_count(), 1u);
  EXPECT_EQ(r.graph.edge(0).kind.type, FlowType::Condition);
  EXPECT_EQ(count(r, Severity::Warning), 1u);
  EXPECT_EQ(count(r, Severity::Error), 0u);
}

TEST(FlowDsl, TrailingLabelIsDiagnosed) {
  const auto r = parse("XOR1 -> pay in cash (card unavailable)");
  ASSERT_EQ(r.graph.edge_count(), 1u);
  EXPECT_EQ(r.graph.edge(0).kind.type, FlowType::Sequence);
  EXPECT_EQ(count(r, Severity::Warning), 1u);
}

TEST(FlowDsl, MalformedLinesDoNotAbort) {
  const auto r = parse("Start -> a\n-> b\na ->\na -> b -> c\nXOR1 -> (unclosed b\nDataObject() -> a\nb -> End");
  EXPECT_EQ(r.graph.edge_count(), 2u);
  EXPECT_EQ(count(r, Severity::Error), 5u);
}

TEST(FlowDsl, DuplicateFlowWarns) {
  const auto r = parse("Start -> a\nStart -> a\n");
  EXPECT_EQ(r.graph.edge_count(), 1u);
  EXPECT_EQ(count(r, Severity::Warning), 1u);
}

TEST(FlowDsl, TokenClassification) {
  using dsl::classify_token;
  EXPECT_EQ(*classify_token("start").kind, NodeKind::start());
  EXPECT_EQ(*classify_token("END").kind, NodeKind::end());
  EXPECT_EQ(*classify_token("OR12").kind, NodeKind::or_gateway(12));
  EXPECT_EQ(*classify_token("AND 3").kind, NodeKind::and_gateway(3));
  EXPECT_EQ(*classify_token("ORder the drinks").kind, NodeKind::action("ORder the drinks"));
  EXPECT_EQ(*classify_token("XOR").kind, NodeKind::action("XOR"));
  EXPECT_EQ(*classify_token("DataObject( stock table )").kind, NodeKind::data_object("stock table"));
  EXPECT_FALSE(classify_token("XOR0").kind.has_value());
  EXPECT_FALSE(classify_token("TextAnnotation()").kind.has_value());
}

TEST(FlowDsl, SerializeEmptyGraph) { EXPECT_EQ(serialize(ProceduralGraph{}), ""); }

TEST(FlowDsl, SerializeSingleEdge) {
  const auto s = serialize(parse("Start -> a").graph);
  EXPECT_EQ(s, "For the process:\nStart -> a\n");
  EXPECT_EQ(text::split_lines(s).size(), 2u);
}

TEST(FlowDsl, AppendixExamplesParseCleanlyAndRoundTrip) {
  for (const auto& name : t2f_test::appendix_names()) {
    const std::string src = t2f_test::appendix_flow(name);
    const auto r = parse(src);
    EXPECT_TRUE(r.diagnostics.empty()) << name;
    const std::string out = serialize(r.graph);
    EXPECT_EQ(line_set(out), line_set(src)) << name;
    EXPECT_TRUE(t2f_test::isomorphic(parse(out).graph, r.graph)) << name;
  }
}

TEST(FlowDsl, RandomGraphsRoundTrip) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 300; ++i) {
    const auto g = t2f_test::random_dsl_graph(rng);
    const auto r = parse(serialize(g));
    for (const auto& d : r.diagnostics) ASSERT_NE(d.severity, Severity::Error) << d.message << ": " << d.raw;
    ASSERT_TRUE(t2f_test::isomorphic(r.graph, g)) << serialize(g);
  }
}

TEST(FlowDsl, ParserIsTotalOnGarbage) {
  std::mt19937_64 rng(5);
  const std::string alphabet = "ab ()->-\n\tXORAND12`*:Fr";
  for (int i = 0; i < 2000; ++i) {
    std::string s;
    const auto n = rng() % 80;
    for (std::size_t k = 0; k < n; ++k) s += alphabet[rng() % alphabet.size()];
    EXPECT_NO_THROW(parse(s));
  }
}
