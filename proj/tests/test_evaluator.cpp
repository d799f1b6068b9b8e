#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "text2flow/evaluator.hpp"

using namespace text2flow;
using namespace text2flow::eval;

namespace {

ProceduralGraph parse_graph(const std::string& s) {
  auto r = dsl::parse(s);
  EXPECT_TRUE(r.diagnostics.empty()) << s;
  return std::move(r.graph);
}

// Supplier check from the logic-check prompt example, gold and mistyped.
const char* kSupplierGold =
    "receive the supplier request -> XOR1\n"
    "XOR1 -> (there is no information about the old supplier) check the deadline of 4 business days\n"
    "XOR1 -> (otherwise) continue to do the check\n";
const char* kSupplierOr =
    "receive the supplier request -> OR1\n"
    "OR1 -> (there is no information about the old supplier) check the deadline of 4 business days\n"
    "OR1 -> (otherwise) continue to do the check\n";

}  // namespace

TEST(Evaluator, SelfEvaluationIsOneEverywhereNonEmpty) {
  for (const auto& name : t2f_test::appendix_names()) {
    const auto g = t2f_test::appendix_graph(name);
    const auto rep = evaluate(g, g);
    for (Category c : kCategories) {
      const Counts& k = rep[c];
      if (k.no_instances()) {
        EXPECT_EQ(k.f1(), 0.0);
      } else {
        EXPECT_EQ(k.precision(), 1.0) << name << " " << to_string(c);
        EXPECT_EQ(k.recall(), 1.0) << name << " " << to_string(c);
        EXPECT_EQ(k.f1(), 1.0) << name << " " << to_string(c);
      }
    }
    EXPECT_FALSE(rep[Category::Action].no_instances());
    EXPECT_FALSE(rep[Category::FlowCondition].no_instances());
  }
}

TEST(Evaluator, EveryTupleOfIdenticalGraphsMatchesAtOne) {
  const auto g = t2f_test::appendix_graph("restaurant");
  const auto t = tuples(g);
  ASSERT_EQ(t.size(), g.edge_count());
  const auto m = match_tuples(t, t);
  ASSERT_EQ(m.size(), t.size());
  for (const auto& p : m) {
    EXPECT_EQ(p.score, 1.0);
    EXPECT_EQ(t[p.pred].text(), t[p.gold].text());
  }
}

TEST(Evaluator, TupleText) {
  const auto g = parse_graph("choose payment method -> XOR1\nXOR1 -> (credit card is available) pay by credit card\n");
  const auto t = tuples(g);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].text(), "choose payment method -> XOR");
  EXPECT_EQ(t[1].text(), "XOR -> pay by credit card");
  EXPECT_EQ(t[1].condition, std::optional<std::string>("credit card is available"));
  EXPECT_EQ(t[1].actor, "the process");
}

TEST(Evaluator, ConditionJustBelowThresholdIsNotMatched) {
  // bleu("credit card available", "credit card is available") from the
  // reference oracle: 0.49681506261157293.
  const auto gold = parse_graph("choose payment method -> XOR1\nXOR1 -> (credit card is available) pay by credit card\n");
  const auto pred = parse_graph("choose payment method -> XOR1\nXOR1 -> (credit card available) pay by credit card\n");
  const auto rep = evaluate(pred, gold);
  EXPECT_EQ(rep[Category::FlowCondition].correct, 0u);
  EXPECT_EQ(rep[Category::FlowCondition].f1(), 0.0);
  EXPECT_EQ(rep[Category::FlowSequence].f1(), 1.0);
  bool seen = false;
  for (const auto& e : rep.ledger) {
    if (e.category != Category::FlowCondition) continue;
    seen = true;
    ASSERT_TRUE(e.condition_bleu.has_value());
    EXPECT_NEAR(*e.condition_bleu, 0.49681506261157293, 1e-12);
    EXPECT_FALSE(e.correct);
  }
  EXPECT_TRUE(seen);
}

TEST(Evaluator, KindsAreNeverCrossMatched) {
  const auto seq = tuples(parse_graph("XOR1 -> pay by credit card\n"));
  const auto cond = tuples(parse_graph("XOR1 -> (credit card is available) pay by credit card\n"));
  EXPECT_TRUE(match_tuples(seq, cond).empty());
  const auto rep = evaluate(parse_graph("XOR1 -> pay by credit card\n"),
                            parse_graph("XOR1 -> (credit card is available) pay by credit card\n"));
  EXPECT_EQ(rep[Category::FlowSequence].precision(), 0.0);
  EXPECT_EQ(rep[Category::FlowCondition].recall(), 0.0);
}

TEST(Evaluator, StartAndEndTuplesNeedTheHigherThreshold) {
  // Oracle BLEU: 0.6049483675122199 with Start, 0.6950150297221263 without.
  const auto a = tuples(parse_graph("Start -> check the stock of the order\n"));
  const auto b = tuples(parse_graph("Start -> check the stock order\n"));
  EXPECT_TRUE(match_tuples(a, b).empty());
  const auto c = tuples(parse_graph("receive the order -> check the stock of the order\n"));
  const auto d = tuples(parse_graph("receive the order -> check the stock order\n"));
  const auto m = match_tuples(c, d);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_NEAR(m[0].score, 0.6950150297221263, 1e-12);
}

TEST(Evaluator, EachGoldTupleMatchesOnce) {
  const auto pred = tuples(parse_graph("receive the order -> check the stock\nreceive the order -> check the stock now\n"));
  const auto gold = tuples(parse_graph("receive the order -> check the stock\n"));
  const auto m = match_tuples(pred, gold);
  ASSERT_EQ(m.size(), 1u);
  EXPECT_EQ(m[0].pred, 0u);  // the exact copy wins
}

TEST(Evaluator, MistypedGatewayIsHardF1ErrorOnBothSides) {
  const auto rep = evaluate(parse_graph(kSupplierOr), parse_graph(kSupplierGold));
  EXPECT_EQ(rep[Category::Xor].gold, 1u);
  EXPECT_EQ(rep[Category::Xor].predicted, 0u);
  EXPECT_EQ(rep[Category::Xor].recall(), 0.0);
  EXPECT_EQ(rep[Category::Or].predicted, 1u);
  EXPECT_EQ(rep[Category::Or].gold, 0u);
  EXPECT_EQ(rep[Category::Or].precision(), 0.0);
  EXPECT_EQ(rep[Category::Action].f1(), 1.0);
  bool flagged = false;
  for (const auto& e : rep.ledger) {
    if (e.category == Category::Or && e.gold == "XOR1") {
      flagged = true;
      EXPECT_FALSE(e.correct);
      EXPECT_EQ(e.note, "type mismatch");
    }
  }
  EXPECT_TRUE(flagged);
  // The fixed graph scores perfectly.
  const auto fixed = evaluate(parse_graph(kSupplierGold), parse_graph(kSupplierGold));
  EXPECT_EQ(fixed[Category::Xor].f1(), 1.0);
}

TEST(Evaluator, GatewayNumberingDoesNotMatter) {
  std::string renumbered = text::replace_all(kSupplierGold, "XOR1", "XOR3");
  const auto rep = evaluate(parse_graph(renumbered), parse_graph(kSupplierGold));
  EXPECT_EQ(rep[Category::Xor].f1(), 1.0);
  EXPECT_EQ(rep[Category::FlowCondition].f1(), 1.0);
}

TEST(Evaluator, GatewayWithoutMatchedNeighbourIsWrong) {
  const auto pred = parse_graph("greet the visitor -> XOR1\nXOR1 -> (sunny weather) open the windows\n");
  const auto rep = evaluate(pred, parse_graph(kSupplierGold));
  EXPECT_EQ(rep[Category::Action].correct, 0u);
  EXPECT_EQ(rep[Category::Xor].predicted, 1u);
  EXPECT_EQ(rep[Category::Xor].correct, 0u);
  EXPECT_EQ(rep[Category::Xor].f1(), 0.0);
}

TEST(Evaluator, UnmatchedEndpointMakesFlowWrong) {
  const auto gold = parse_graph("pay the bill -> order the drinks\nStart -> pay the bill\n");
  const auto pred = parse_graph("pay the bill -> find an empty seat\nStart -> pay the bill\n");
  const auto rep = evaluate(pred, gold);
  EXPECT_EQ(rep[Category::FlowSequence].predicted, 2u);
  EXPECT_EQ(rep[Category::FlowSequence].correct, 1u);
}

TEST(Evaluator, GarbledConditionOnlyHitsFlowCondition) {
  const auto gold = t2f_test::appendix_graph("staff");
  const auto pred = parse_graph(text::replace_all(t2f_test::appendix_flow("staff"), "(the order is standard type)",
                                                  "(garbled zzz qqq)"));
  const auto rep = evaluate(pred, gold);
  EXPECT_EQ(rep[Category::FlowCondition].correct + 1, rep[Category::FlowCondition].gold);
  EXPECT_LT(rep[Category::FlowCondition].f1(), 1.0);
  EXPECT_EQ(rep[Category::FlowSequence].f1(), 1.0);
  EXPECT_EQ(rep[Category::Action].f1(), 1.0);
  EXPECT_EQ(rep[Category::Xor].f1(), 1.0);
}

TEST(Evaluator, ActionsAreSoftMatchedByBleu) {
  // Oracle BLEU against "check the stock of the order": 0.6389431042462724
  // for "... of this order", 0.4272870063962341 for "check the stock order".
  const auto gold = parse_graph("receive the order -> check the stock of the order\n");
  const auto close = evaluate(parse_graph("receive the order -> check the stock of this order\n"), gold);
  EXPECT_EQ(close[Category::Action].correct, 2u);
  EXPECT_EQ(close[Category::FlowSequence].f1(), 1.0);
  const auto far = evaluate(parse_graph("receive the order -> check the stock order\n"), gold);
  EXPECT_EQ(far[Category::Action].correct, 1u);
  EXPECT_EQ(far[Category::Action].f1(), 0.5);
}

TEST(Evaluator, DroppingAPredictedFlowLowersOnlyRecall) {
  for (const auto& name : t2f_test::appendix_names()) {
    const auto gold = t2f_test::appendix_graph(name);
    const auto lines = text::split_lines(t2f_test::appendix_flow(name));
    for (std::size_t drop = 0; drop < lines.size(); ++drop) {
      if (lines[drop].find("->") == std::string::npos) continue;
      std::string s;
      for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i != drop) s += lines[i] + "\n";
      }
      const auto pred = dsl::parse(s).graph;
      const auto t = tuples(dsl::parse(lines[drop]).graph);
      ASSERT_FALSE(t.empty());
      const Category c = eval::detail::flow_category(t[0].kind);
      const auto rep = evaluate(pred, gold);
      // With no predictions left the category falls back to 0 by convention.
      if (rep[c].predicted > 0) {
        EXPECT_EQ(rep[c].precision(), 1.0) << name << ": " << lines[drop];
      }
      EXPECT_LT(rep[c].recall(), 1.0) << name << ": " << lines[drop];
    }
  }
}

TEST(Evaluator, ReorderedPredictionScoresTheSame) {
  std::mt19937_64 rng(7);
  for (const auto& name : t2f_test::appendix_names()) {
    const auto gold = t2f_test::appendix_graph(name);
    const auto base = to_json(evaluate(gold, gold)).dump();
    // Shuffle the edge lines inside each actor block.
    auto lines = text::split_lines(t2f_test::appendix_flow(name));
    std::size_t begin = 0;
    for (std::size_t i = 0; i <= lines.size(); ++i) {
      if (i == lines.size() || lines[i].find("->") == std::string::npos) {
        std::shuffle(lines.begin() + static_cast<long>(begin), lines.begin() + static_cast<long>(i), rng);
        begin = i + 1;
      }
    }
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    EXPECT_EQ(to_json(evaluate(dsl::parse(s).graph, gold)).dump(), base) << name;
  }
}

TEST(Evaluator, Deterministic) {
  const auto pred = dsl::parse(kSupplierOr).graph;
  const auto gold = dsl::parse(kSupplierGold).graph;
  EXPECT_EQ(to_json(evaluate(pred, gold), true).dump(), to_json(evaluate(pred, gold), true).dump());
}

TEST(Evaluator, EmptyCategoryIsZeroWithFlag) {
  const auto g = parse_graph("Start -> do the work\ndo the work -> End\n");
  const auto rep = evaluate(g, g);
  EXPECT_TRUE(rep[Category::Xor].no_instances());
  EXPECT_EQ(rep[Category::Xor].f1(), 0.0);
  const auto j = to_json(rep);
  EXPECT_TRUE(j["XOR"]["no_instances"].get<bool>());
  EXPECT_EQ(j["Flow-Sequence"]["f1"], 1.0);
  const auto empty = evaluate(ProceduralGraph{}, g);
  EXPECT_EQ(empty[Category::Action].recall(), 0.0);
  EXPECT_EQ(empty[Category::Action].precision(), 0.0);
}

TEST(Evaluator, LoadPagedPair) {
  const auto dir = t2f_test::test_dir() / "data" / "appendix";
  const auto p = load_paged_pair(dir / "restaurant.txt", dir / "restaurant.flow");
  EXPECT_TRUE(p.diagnostics.empty());
  EXPECT_EQ(p.document, t2f_test::appendix_doc("restaurant"));
  EXPECT_TRUE(t2f_test::isomorphic(p.graph, t2f_test::appendix_graph("restaurant")));

  try {
    load_paged_pair(dir / "restaurant.txt", dir / "nope.flow");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
    EXPECT_NE(std::string(e.what()).find("nope.flow"), std::string::npos);
  }

  t2f_test::TempDir tmp;
  t2f_test::write_file(tmp.path() / "g.flow", "Start -> a\nthis is not a flow\na -> End\n");
  const auto q = load_paged_pair(dir / "restaurant.txt", tmp.path() / "g.flow");
  EXPECT_EQ(q.diagnostics.size(), 1u);
  EXPECT_EQ(q.graph.edge_count(), 2u);
}

TEST(Evaluator, ReportFormats) {
  const auto g = t2f_test::appendix_graph("restaurant");
  const auto rep = evaluate(g, g);
  EXPECT_EQ(csv_header(),
            "document,Actor,Action,Constraint-Data,Constraint-Action,XOR,OR,AND,Flow-Sequence,Flow-Condition,"
            "Flow-Constraint\n");
  const std::string row = csv_row("restaurant", rep);
  EXPECT_EQ(row.rfind("restaurant,1.000,1.000,", 0), 0u) << row;
  EXPECT_EQ(csv_row("a,b", rep).rfind("\"a,b\",", 0), 0u);

  const std::string table = text_table({{"restaurant", rep}, {"x", rep}});
  const auto lines = text::split_lines(table);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0].size(), lines[1].size());
  EXPECT_EQ(lines[1].size(), lines[2].size());
  EXPECT_EQ(lines[0].rfind("document", 0), 0u);

  const auto j = to_json(rep, true);
  EXPECT_TRUE(j.contains("ledger"));
  EXPECT_EQ(j["scores"].size(), kCategoryCount);
}

TEST(Evaluator, AggregateSumsCounts) {
  const auto a = evaluate(dsl::parse(kSupplierOr).graph, dsl::parse(kSupplierGold).graph);
  const auto b = evaluate(dsl::parse(kSupplierGold).graph, dsl::parse(kSupplierGold).graph);
  const auto t = aggregate({a, b});
  EXPECT_EQ(t[Category::Xor].gold, 2u);
  EXPECT_EQ(t[Category::Xor].correct, 1u);
  EXPECT_EQ(t[Category::Xor].recall(), 0.5);
  EXPECT_EQ(t[Category::Or].predicted, 1u);
  EXPECT_EQ(t[Category::Action].f1(), 1.0);
}
