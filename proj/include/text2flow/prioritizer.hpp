#pragma once

// Feedback scoring and budgeted selection.
//
//   u(f)  share of failing simulations that produced the item's issue
//   R(f)  max BLEU against earlier feedback whose origin is still open
//   w(f)  u + R for structural items, R for semantic ones
//
// Selection is the greedy knapsack heuristic on w / length.

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "text2flow/bleu.hpp"
#include "text2flow/error.hpp"
#include "text2flow/text.hpp"

namespace text2flow {

enum class FeedbackKind { Structural, Semantic };

inline std::string_view to_string(FeedbackKind k) { return k == FeedbackKind::Structural ? "structural" : "semantic"; }

inline FeedbackKind feedback_kind_from_string(std::string_view s) {
  if (s == "structural") return FeedbackKind::Structural;
  if (s == "semantic") return FeedbackKind::Semantic;
  throw Error(ErrorCode::InvalidArgument, "unknown feedback kind '" + std::string(s) + "'");
}

struct FeedbackItem {
  FeedbackKind kind = FeedbackKind::Structural;
  std::string text;
  std::string origin;  // issue signature, or "gateway:XOR1" / "segment:XOR1"
  std::size_t length = 0;
  int round = 0;

  static FeedbackItem make(FeedbackKind kind, std::string text, std::string origin, int round) {
    const auto trimmed = std::string(text::trim(text));
    if (trimmed.empty()) throw Error(ErrorCode::InvalidArgument, "feedback text must not be empty");
    const auto len = text::word_count(trimmed);
    return FeedbackItem{kind, trimmed, std::move(origin), len, round};
  }

  friend bool operator==(const FeedbackItem&, const FeedbackItem&) = default;
};

struct FeedbackScore {
  double u = 0.0;
  double R = 0.0;
  double w = 0.0;

  friend bool operator==(const FeedbackScore&, const FeedbackScore&) = default;
};

struct ScoredItem {
  FeedbackItem item;
  FeedbackScore score;
};

struct PrioritizerConfig {
  std::size_t budget = 400;
  std::size_t max_items = 3;

  void validate() const {
    if (budget < 1) throw Error(ErrorCode::InvalidArgument, "token budget must be positive");
    if (max_items < 1) throw Error(ErrorCode::InvalidArgument, "max selected items must be positive");
  }
};

// count / total; empty when nothing failed.
template <class Key, class Compare>
std::map<Key, double, Compare> utility(const std::map<Key, std::size_t, Compare>& counts) {
  std::map<Key, double, Compare> out;
  std::size_t total = 0;
  for (const auto& [k, c] : counts) total += c;
  if (total == 0) return out;
  for (const auto& [k, c] : counts) out.emplace(k, static_cast<double>(c) / static_cast<double>(total));
  return out;
}

// Only prior items whose origin is in `unresolved` count.
inline double repeat_score(const FeedbackItem& item, const std::vector<FeedbackItem>& history,
                           const std::set<std::string>& unresolved) {
  double best = 0.0;
  for (const auto& prior : history) {
    if (unresolved.count(prior.origin) == 0) continue;
    best = std::max(best, bleu(item.text, prior.text));
  }
  return best;
}

// History filtered by the origins present in the current pool.
inline double repeat_score(const FeedbackItem& item, const std::vector<FeedbackItem>& history,
                           const std::vector<FeedbackItem>& current_pool) {
  std::set<std::string> open;
  for (const auto& f : current_pool) open.insert(f.origin);
  return repeat_score(item, history, open);
}

inline FeedbackScore unified_score(FeedbackKind kind, double u, double R) {
  if (kind == FeedbackKind::Structural) return {u, R, u + R};
  return {0.0, R, R};
}

inline FeedbackScore unified_score(const FeedbackItem& item, const std::map<std::string, double>& u_by_origin,
                                   const std::vector<FeedbackItem>& history, const std::set<std::string>& unresolved) {
  double u = 0.0;
  if (auto it = u_by_origin.find(item.origin); it != u_by_origin.end()) u = it->second;
  return unified_score(item.kind, u, repeat_score(item, history, unresolved));
}

inline std::vector<ScoredItem> score_pool(const std::vector<FeedbackItem>& pool,
                                          const std::map<std::string, double>& u_by_origin,
                                          const std::vector<FeedbackItem>& history) {
  std::set<std::string> open;
  for (const auto& f : pool) open.insert(f.origin);
  std::vector<ScoredItem> out;
  out.reserve(pool.size());
  for (const auto& f : pool) out.push_back({f, unified_score(f, u_by_origin, history, open)});
  return out;
}

namespace detail {

// Fill in `order`, skipping items that overflow the budget.
inline std::vector<std::size_t> fill(const std::vector<ScoredItem>& items, const std::vector<std::size_t>& order,
                                     const PrioritizerConfig& config) {
  std::vector<std::size_t> chosen;
  std::size_t used = 0;
  for (std::size_t i : order) {
    if (chosen.size() >= config.max_items) break;
    const std::size_t len = items[i].item.length;
    if (used + len > config.budget) continue;
    used += len;
    chosen.push_back(i);
  }
  return chosen;
}

inline double total_weight(const std::vector<ScoredItem>& items, const std::vector<std::size_t>& chosen) {
  double s = 0;
  for (std::size_t i : chosen) s += items[i].score.w;
  return s;
}

}  // namespace detail

// Indices into `items`, in selection order.
//
// Greedy by w/len. A second pass ordered by w alone replaces it when it is
// strictly heavier: ratio order alone can fill the budget or the item cap with
// short, light items and end far below the best subset.
inline std::vector<std::size_t> select_indices(const std::vector<ScoredItem>& items, const PrioritizerConfig& config) {
  config.validate();
  auto efficiency = [&](std::size_t i) {
    const auto len = std::max<std::size_t>(1, items[i].item.length);
    return items[i].score.w / static_cast<double>(len);
  };
  auto tie_break = [&](std::size_t a, std::size_t b) {
    const bool sa = items[a].item.kind == FeedbackKind::Structural;
    const bool sb = items[b].item.kind == FeedbackKind::Structural;
    if (sa != sb) return sa;
    if (items[a].score.u != items[b].score.u) return items[a].score.u > items[b].score.u;
    return a < b;
  };
  std::vector<std::size_t> by_ratio(items.size());
  std::iota(by_ratio.begin(), by_ratio.end(), std::size_t{0});
  std::vector<std::size_t> by_weight = by_ratio;
  std::sort(by_ratio.begin(), by_ratio.end(), [&](std::size_t a, std::size_t b) {
    const double ea = efficiency(a);
    const double eb = efficiency(b);
    if (ea != eb) return ea > eb;
    return tie_break(a, b);
  });
  std::sort(by_weight.begin(), by_weight.end(), [&](std::size_t a, std::size_t b) {
    if (items[a].score.w != items[b].score.w) return items[a].score.w > items[b].score.w;
    return tie_break(a, b);
  });

  auto chosen = detail::fill(items, by_ratio, config);
  auto heavy = detail::fill(items, by_weight, config);
  if (detail::total_weight(items, heavy) > detail::total_weight(items, chosen)) chosen = std::move(heavy);
  return chosen;
}

inline std::vector<FeedbackItem> select(const std::vector<ScoredItem>& items, const PrioritizerConfig& config) {
  std::vector<FeedbackItem> out;
  for (std::size_t i : select_indices(items, config)) out.push_back(items[i].item);
  return out;
}

// One JSON-lines record per scored item.
inline nlohmann::ordered_json ledger_record(int round, const ScoredItem& s, bool selected) {
  nlohmann::ordered_json j;
  j["round"] = round;
  j["kind"] = std::string(to_string(s.item.kind));
  j["origin"] = s.item.origin;
  j["text"] = s.item.text;
  j["u"] = s.score.u;
  j["R"] = s.score.R;
  j["w"] = s.score.w;
  j["len"] = s.item.length;
  j["selected"] = selected;
  return j;
}

inline nlohmann::ordered_json feedback_to_json(const FeedbackItem& f) {
  nlohmann::ordered_json j;
  j["kind"] = std::string(to_string(f.kind));
  j["origin"] = f.origin;
  j["text"] = f.text;
  j["len"] = f.length;
  j["round"] = f.round;
  return j;
}

inline FeedbackItem feedback_from_json(const nlohmann::ordered_json& j) {
  FeedbackItem f;
  f.kind = feedback_kind_from_string(j.at("kind").get<std::string>());
  f.origin = j.at("origin").get<std::string>();
  f.text = j.at("text").get<std::string>();
  f.length = j.at("len").get<std::size_t>();
  f.round = j.at("round").get<int>();
  return f;
}

}  // namespace text2flow
