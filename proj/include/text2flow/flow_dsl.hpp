#pragma once

// Line-oriented graph text format:
//
//   For the customer:
//   Start -> find an empty seat
//   XOR1 -> (credit card is available) pay by credit card
//   submits the order -> DataObject(order list)
//
// The parser is total: anything it cannot use becomes a diagnostic.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "text2flow/graph.hpp"
#include "text2flow/text.hpp"

namespace text2flow::dsl {

enum class Severity { Warning, Error };

inline std::string_view to_string(Severity s) { return s == Severity::Warning ? "warning" : "error"; }

struct ParseDiagnostic {
  int line = 0;  // 1-based
  Severity severity = Severity::Error;
  std::string message;
  std::string raw;
};

enum class LineKind { ActorHeader, Flow, Blank, Unrecognized };

struct ParsedLine {
  std::string raw;
  int line = 0;
  LineKind kind = LineKind::Blank;
  std::string actor;                 // ActorHeader
  std::string source;                // Flow
  std::optional<std::string> label;  // Flow, condition label
  std::string target;                // Flow
  std::string reason;                // Unrecognized
};

struct ParseResult {
  ProceduralGraph graph;
  std::vector<ParseDiagnostic> diagnostics;
};

namespace detail {

// Position of every "->" outside parentheses.
inline std::vector<std::size_t> top_level_arrows(std::string_view s) {
  std::vector<std::size_t> out;
  int depth = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') {
      ++depth;
    } else if (s[i] == ')') {
      if (depth > 0) --depth;
    } else if (depth == 0 && s[i] == '-' && i + 1 < s.size() && s[i + 1] == '>') {
      out.push_back(i);
      ++i;
    }
  }
  return out;
}

// Index of the parenthesis closing the one at `open`, or npos.
inline std::size_t matching_paren(std::string_view s, std::size_t open) {
  int depth = 0;
  for (std::size_t i = open; i < s.size(); ++i) {
    if (s[i] == '(') ++depth;
    if (s[i] == ')' && --depth == 0) return i;
  }
  return std::string_view::npos;
}

inline std::string_view strip_decoration(std::string_view s) {
  s = text::trim(s);
  while (!s.empty() && s.front() == '`') s.remove_prefix(1);
  while (!s.empty() && s.back() == '`') s.remove_suffix(1);
  s = text::trim(s);
  if (s.size() >= 4 && s.substr(0, 2) == "**" && s.substr(s.size() - 2) == "**") {
    s = text::trim(s.substr(2, s.size() - 4));
  }
  return s;
}

inline bool all_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

}  // namespace detail

struct TokenResult {
  std::optional<NodeKind> kind;
  std::string error;
};

// Classifies one node token by pattern.
inline TokenResult classify_token(std::string_view raw) {
  const auto tok = text::trim(raw);
  if (tok.empty()) return {std::nullopt, "empty node"};
  if (text::iequals(tok, "Start")) return {NodeKind::start(), {}};
  if (text::iequals(tok, "End")) return {NodeKind::end(), {}};

  for (auto [prefix, type] : {std::pair{std::string_view("XOR"), NodeType::Xor},
                              std::pair{std::string_view("AND"), NodeType::And},
                              std::pair{std::string_view("OR"), NodeType::Or}}) {
    if (tok.size() > prefix.size() && tok.substr(0, prefix.size()) == prefix) {
      const auto digits = text::trim(tok.substr(prefix.size()));
      if (detail::all_digits(digits)) {
        if (digits.size() > 9) return {std::nullopt, "gateway index out of range: " + std::string(tok)};
        const int index = std::stoi(std::string(digits));
        if (index <= 0) return {std::nullopt, "gateway index must be positive: " + std::string(tok)};
        return {NodeKind::gateway(type, index), {}};
      }
    }
  }

  for (auto [prefix, type] : {std::pair{std::string_view("DataObject"), NodeType::DataObject},
                              std::pair{std::string_view("TextAnnotation"), NodeType::TextAnnotation}}) {
    if (tok.size() > prefix.size() && tok.substr(0, prefix.size()) == prefix) {
      auto rest = text::trim(tok.substr(prefix.size()));
      if (!rest.empty() && rest.front() == '(') {
        const std::size_t close = detail::matching_paren(rest, 0);
        if (close == std::string_view::npos || close + 1 != rest.size()) {
          return {std::nullopt, "unbalanced parenthesis in " + std::string(prefix)};
        }
        const auto inner = text::trim(rest.substr(1, close - 1));
        if (inner.empty()) return {std::nullopt, std::string(prefix) + " text must not be empty"};
        return {NodeKind{type, std::string(inner), 0}, {}};
      }
    }
  }
  return {NodeKind::action(std::string(tok)), {}};
}

inline ParsedLine classify_line(std::string_view raw, int line_number) {
  ParsedLine out;
  out.raw = std::string(raw);
  out.line = line_number;
  const auto line = detail::strip_decoration(raw);
  if (line.empty() || line.substr(0, std::min<std::size_t>(3, line.size())) == "```") {
    out.kind = LineKind::Blank;
    return out;
  }

  const auto arrows = detail::top_level_arrows(line);
  if (arrows.empty()) {
    if (text::istarts_with(line, "For ") || text::istarts_with(line, "For\t")) {
      auto actor = text::trim(line.substr(4));
      if (!actor.empty() && actor.back() == ':') actor = text::trim(actor.substr(0, actor.size() - 1));
      if (!actor.empty()) {
        out.kind = LineKind::ActorHeader;
        out.actor = std::string(actor);
        return out;
      }
    }
    out.kind = LineKind::Unrecognized;
    out.reason = "line has no '->' separator";
    return out;
  }
  if (arrows.size() > 1) {
    out.kind = LineKind::Unrecognized;
    out.reason = "line has more than one '->' separator";
    return out;
  }

  const auto lhs = text::trim(line.substr(0, arrows[0]));
  auto rhs = text::trim(line.substr(arrows[0] + 2));
  if (lhs.empty()) {
    out.kind = LineKind::Unrecognized;
    out.reason = "missing source node";
    return out;
  }
  if (!rhs.empty() && rhs.front() == '(') {
    const std::size_t close = detail::matching_paren(rhs, 0);
    if (close == std::string_view::npos) {
      out.kind = LineKind::Unrecognized;
      out.reason = "unbalanced parenthesis in condition label";
      return out;
    }
    out.label = std::string(text::trim(rhs.substr(1, close - 1)));
    rhs = text::trim(rhs.substr(close + 1));
  }
  if (rhs.empty()) {
    out.kind = LineKind::Unrecognized;
    out.reason = "missing target node";
    return out;
  }
  out.kind = LineKind::Flow;
  out.source = std::string(lhs);
  out.target = std::string(rhs);
  return out;
}

inline ParseResult parse(std::string_view input) {
  ParseResult result;
  auto& g = result.graph;
  auto& diags = result.diagnostics;
  std::optional<LaneId> lane;

  const auto lines = text::split_lines(input);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const int lineno = static_cast<int>(i + 1);
    const ParsedLine pl = classify_line(lines[i], lineno);
    auto diag = [&](Severity s, std::string msg) {
      diags.push_back(ParseDiagnostic{lineno, s, std::move(msg), lines[i]});
    };

    switch (pl.kind) {
      case LineKind::Blank: continue;
      case LineKind::Unrecognized: diag(Severity::Error, pl.reason); continue;
      case LineKind::ActorHeader: lane = g.add_lane(pl.actor); continue;
      case LineKind::Flow: break;
    }

    const auto src = classify_token(pl.source);
    const auto dst = classify_token(pl.target);
    if (!src.kind || !dst.kind) {
      diag(Severity::Error, !src.kind ? src.error : dst.error);
      continue;
    }

    FlowKind flow = FlowKind::sequence();
    if (pl.label && !pl.label->empty()) {
      flow = FlowKind::condition(*pl.label);
    } else {
      if (pl.label) diag(Severity::Warning, "empty condition label treated as a plain flow");
      if (src.kind->is_auxiliary() || dst.kind->is_auxiliary()) flow = FlowKind::constraint();
    }

    if (!pl.label && src.kind->is_gateway() && dst.kind->type == NodeType::Action) {
      const auto t = text::trim(pl.target);
      if (!t.empty() && t.back() == ')' && t.find('(') != std::string_view::npos) {
        diag(Severity::Warning, "condition label must follow '->' directly; trailing parenthesis kept as action text");
      }
    }

    if (!lane) lane = g.add_lane(ProceduralGraph::kDefaultActor);
    const NodeId s = g.add_node(*lane, *src.kind);
    const NodeId t = g.add_node(*lane, *dst.kind);
    if (flow.type == FlowType::Condition && !src.kind->is_gateway()) {
      diag(Severity::Warning, "condition flow from non-gateway node '" + display_name(*src.kind) + "'");
    }
    if (!g.add_edge(*lane, s, t, flow)) diag(Severity::Warning, "duplicate flow ignored");
  }
  return result;
}

inline std::string render_edge(const ProceduralGraph& g, const Edge& e) {
  std::string line = g.name(e.source) + " -> ";
  if (e.kind.type == FlowType::Condition) line += "(" + e.kind.label + ") ";
  line += g.name(e.target);
  return line;
}

inline std::string serialize(const ProceduralGraph& g) {
  std::string out;
  for (std::size_t i = 0; i < g.lanes().size(); ++i) {
    const Lane& lane = g.lanes()[i];
    if (i > 0) out += "\n";
    out += "For " + lane.actor + ":\n";
    for (std::size_t idx : lane.edges) out += render_edge(g, g.edge(idx)) + "\n";
  }
  return out;
}

}  // namespace text2flow::dsl
