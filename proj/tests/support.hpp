#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "text2flow/flow_dsl.hpp"
#include "text2flow/graph.hpp"

#ifndef TEXT2FLOW_TEST_DIR
#error "TEXT2FLOW_TEST_DIR must point at the tests directory"
#endif

namespace t2f_test {

inline std::filesystem::path test_dir() { return TEXT2FLOW_TEST_DIR; }

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline std::string appendix_doc(const std::string& name) {
  return read_file(test_dir() / "data" / "appendix" / (name + ".txt"));
}
inline std::string appendix_flow(const std::string& name) {
  return read_file(test_dir() / "data" / "appendix" / (name + ".flow"));
}
inline text2flow::ProceduralGraph appendix_graph(const std::string& name) {
  return text2flow::dsl::parse(appendix_flow(name)).graph;
}

inline const std::vector<std::string>& appendix_names() {
  static const std::vector<std::string> names{"restaurant", "staff", "email"};
  return names;
}

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("t2f_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& s) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << s;
}

// Id-independent description of a graph: per lane, the actor and every edge
// as (source name, source type, target name, target type, flow type, label).
using EdgeShape = std::tuple<std::string, int, std::string, int, int, std::string>;
struct LaneShape {
  std::string actor;
  std::vector<EdgeShape> edges;
  bool operator==(const LaneShape&) const = default;
};

inline std::vector<LaneShape> shape(const text2flow::ProceduralGraph& g) {
  std::vector<LaneShape> out;
  for (const auto& lane : g.lanes()) {
    LaneShape ls{lane.actor, {}};
    for (std::size_t idx : lane.edges) {
      const auto& e = g.edge(idx);
      ls.edges.emplace_back(g.name(e.source), static_cast<int>(g.node(e.source).type), g.name(e.target),
                            static_cast<int>(g.node(e.target).type), static_cast<int>(e.kind.type), e.kind.label);
    }
    out.push_back(std::move(ls));
  }
  return out;
}

inline bool isomorphic(const text2flow::ProceduralGraph& a, const text2flow::ProceduralGraph& b) {
  return shape(a) == shape(b) && a.node_count() == b.node_count();
}

// Like isomorphic, but edge order within a lane is ignored.
inline bool same_edge_sets(const text2flow::ProceduralGraph& a, const text2flow::ProceduralGraph& b) {
  auto sa = shape(a), sb = shape(b);
  for (auto* v : {&sa, &sb}) {
    for (auto& l : *v) std::sort(l.edges.begin(), l.edges.end());
  }
  return sa == sb && a.node_count() == b.node_count();
}

// Random graphs whose every node sits on some edge, so the text format can
// represent them completely.
inline text2flow::ProceduralGraph random_dsl_graph(std::mt19937_64& rng) {
  using namespace text2flow;
  static const std::vector<std::string> words{
      "check", "order", "stock", "ship", "goods", "update", "status", "verify", "account", "email",
      "payment", "receipt", "meal", "prepare", "serve", "table", "record", "request", "bind", "user"};
  static const std::vector<std::string> actors{"the customer", "the staff", "the restaurant", "the clerk"};
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto phrase = [&](std::size_t lo, std::size_t hi) {
    const std::size_t n = lo + pick(hi - lo + 1);
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
      if (i) s += ' ';
      s += words[pick(words.size())];
    }
    return s;
  };
  auto random_kind = [&]() -> NodeKind {
    switch (pick(10)) {
      case 0: return NodeKind::start();
      case 1: return NodeKind::end();
      case 2: return NodeKind::xor_gateway(static_cast<int>(1 + pick(3)));
      case 3: return NodeKind::or_gateway(static_cast<int>(1 + pick(3)));
      case 4: return NodeKind::and_gateway(static_cast<int>(1 + pick(3)));
      case 5: return NodeKind::data_object(phrase(1, 3));
      case 6: return NodeKind::text_annotation(phrase(2, 5));
      default: return NodeKind::action(phrase(1, 5));
    }
  };

  ProceduralGraph g;
  const std::size_t lanes = 1 + pick(3);
  std::vector<std::string> chosen_actors;
  for (std::size_t l = 0; l < lanes; ++l) {
    const std::string actor = (l == 0 && pick(3) == 0) ? std::string(ProceduralGraph::kDefaultActor)
                                                        : actors[pick(actors.size())];
    if (g.find_lane(actor)) continue;
    const LaneId lane = g.add_lane(actor);
    const std::size_t edges = 1 + pick(12);
    for (std::size_t e = 0; e < edges; ++e) {
      const NodeKind sk = random_kind();
      const NodeKind tk = random_kind();
      std::string label;
      if (pick(4) == 0) {
        label = phrase(1, 4);
        if (pick(5) == 0) label += " (per " + phrase(1, 2) + ")";
      }
      FlowKind fk = !label.empty() ? FlowKind::condition(label)
                    : (sk.is_auxiliary() || tk.is_auxiliary()) ? FlowKind::constraint()
                                                               : FlowKind::sequence();
      const NodeId s = g.add_node(lane, sk);
      const NodeId t = g.add_node(lane, tk);
      g.add_edge(lane, s, t, fk);
    }
  }
  return g;
}

}  // namespace t2f_test
