#pragma once

// User selection for one short block: greedy, top-k, adaptive top-k and an
// exhaustive oracle. All maximize Q(M) = sum_{i in M} w_i r_i under ZF.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "mmw/codebook.hpp"
#include "mmw/precoder.hpp"

namespace mmw {

/// Everything a scheduler may look at in one slot.
struct SchedulerContext {
  EffectiveChannels channels;
  std::vector<int> beam_index;
  CMatrix gram;  // analog beam Gram matrix, I x I
  std::vector<double> weights;
  int max_selected = 1;
  int num_rf_chains = 1;

  [[nodiscard]] int num_users() const { return channels.num_users(); }

  void validate() const {
    const int n = num_users();
    if (n < 1) throw std::invalid_argument("scheduler context has no users");
    if (static_cast<int>(weights.size()) != n) throw std::invalid_argument("weights size mismatch");
    if (static_cast<int>(channels.noise.size()) != n) throw std::invalid_argument("noise size mismatch");
    if (gram.rows() != n || gram.cols() != n) throw std::invalid_argument("analog Gram size mismatch");
    if (max_selected < 1 || max_selected > num_rf_chains) {
      throw std::invalid_argument("need 1 <= max_selected <= num_rf_chains");
    }
    for (double w : weights) {
      if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("weights must be finite and > 0");
    }
  }
};

inline SchedulerContext make_context(EffectiveChannels channels, const BeamAssignment& beams,
                                     std::vector<double> weights, int max_selected,
                                     int num_rf_chains) {
  SchedulerContext ctx;
  ctx.channels = std::move(channels);
  ctx.beam_index = beams.beam_index;
  ctx.gram = analog_gram(beams);
  ctx.weights = std::move(weights);
  ctx.max_selected = max_selected;
  ctx.num_rf_chains = num_rf_chains;
  return ctx;
}

/// Interference-free weighted score w_i log2(1 + P |u_ii|^2 / sigma_i^2).
inline std::vector<double> interference_free_scores(const SchedulerContext& ctx) {
  const auto& eff = ctx.channels;
  std::vector<double> s(static_cast<std::size_t>(ctx.num_users()));
  for (int i = 0; i < ctx.num_users(); ++i) {
    s[i] = ctx.weights[i] * std::log2(1.0 + eff.power * std::norm(eff.u(i, i)) / eff.noise[i]);
  }
  return s;
}

/// User indices by descending score; equal scores keep the lower index first.
inline std::vector<int> rank_by_score(const std::vector<double>& scores) {
  std::vector<int> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return scores[a] > scores[b]; });
  return order;
}

/// Greedy user addition. `q_history`, if given, receives Q after each
/// accepted user.
inline SelectionResult greedy_select(const SchedulerContext& ctx,
                                     std::vector<double>* q_history = nullptr) {
  ctx.validate();
  const int n = ctx.num_users();
  constexpr double kInfeasible = -std::numeric_limits<double>::infinity();

  std::vector<int> chosen;
  std::vector<bool> in_set(static_cast<std::size_t>(n), false);
  double q_current = 0.0;
  std::vector<int> candidate;
  for (int round = 0; round < ctx.max_selected && static_cast<int>(chosen.size()) < n; ++round) {
    int best_user = -1;
    double best_q = kInfeasible;
    for (int i = 0; i < n; ++i) {
      if (in_set[i]) continue;
      candidate = chosen;
      candidate.insert(std::upper_bound(candidate.begin(), candidate.end(), i), i);
      const double q = zf_objective(ctx.channels, ctx.gram, candidate, ctx.weights).value_or(kInfeasible);
      if (best_user < 0 || q > best_q) {
        best_user = i;
        best_q = q;
      }
    }
    if (best_q <= q_current) break;
    chosen.insert(std::upper_bound(chosen.begin(), chosen.end(), best_user), best_user);
    in_set[best_user] = true;
    q_current = best_q;
    if (q_history) q_history->push_back(q_current);
  }
  return zf_evaluate(ctx.channels, ctx.gram, chosen, ctx.weights);
}

/// Picks the k best interference-free scores, then applies ZF. A singular
/// set is reported with feasible == false and nothing transmitted.
inline SelectionResult topk_select(const SchedulerContext& ctx, int k) {
  ctx.validate();
  if (k < 1 || k > ctx.max_selected) throw std::invalid_argument("topk_select: need 1 <= k <= max_selected");
  const auto order = rank_by_score(interference_free_scores(ctx));
  const int take = std::min(k, ctx.num_users());
  std::vector<int> chosen(order.begin(), order.begin() + take);
  std::sort(chosen.begin(), chosen.end());
  return zf_evaluate(ctx.channels, ctx.gram, chosen, ctx.weights);
}

/// Best of top-k over k = 1..N_max; ties go to the smaller k.
inline SelectionResult adaptive_topk_select(const SchedulerContext& ctx) {
  ctx.validate();
  const auto order = rank_by_score(interference_free_scores(ctx));
  SelectionResult best;
  bool have = false;
  const int k_max = std::min(ctx.max_selected, ctx.num_users());
  std::vector<int> chosen;
  for (int k = 1; k <= k_max; ++k) {
    chosen.assign(order.begin(), order.begin() + k);
    std::sort(chosen.begin(), chosen.end());
    if (have) {
      const double q = zf_objective(ctx.channels, ctx.gram, chosen, ctx.weights).value_or(0.0);
      if (!(q > best.q)) continue;
    }
    best = zf_evaluate(ctx.channels, ctx.gram, chosen, ctx.weights);
    have = true;
  }
  return best;
}

/// sum_{m=1}^{max_size} C(n, m), saturating at +inf.
inline double subset_count(int n, int max_size) {
  double total = 0.0;
  double c = 1.0;
  for (int m = 1; m <= std::min(n, max_size); ++m) {
    c = c * (n - m + 1) / m;
    total += c;
  }
  return total;
}

/// Raised when exhaustive search would visit more subsets than allowed.
class CombinatorialCapError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Evaluates every non-empty subset with |M| <= N_max in lexicographic order;
/// ties keep the lexicographically smallest set.
inline SelectionResult exhaustive_select(const SchedulerContext& ctx, double cap = 2e6) {
  ctx.validate();
  const int n = ctx.num_users();
  const double count = subset_count(n, ctx.max_selected);
  if (count > cap) {
    throw CombinatorialCapError("exhaustive search over " + std::to_string(count) +
                                " subsets exceeds the cap of " + std::to_string(cap) +
                                "; use desk-scale parameters (fewer users or smaller N_max)");
  }
  std::vector<int> current;
  std::vector<int> best_set;
  double best_q = -std::numeric_limits<double>::infinity();

  std::function<void(int)> visit = [&](int start) {
    for (int i = start; i < n; ++i) {
      current.push_back(i);
      if (const auto q = zf_objective(ctx.channels, ctx.gram, current, ctx.weights); q && *q > best_q) {
        best_q = *q;
        best_set = current;
      }
      if (static_cast<int>(current.size()) < ctx.max_selected) visit(i + 1);
      current.pop_back();
    }
  };
  visit(0);
  return zf_evaluate(ctx.channels, ctx.gram, best_set, ctx.weights);
}

/// A scheduler is any callable from a context to a selection.
using SchedulerFn = std::function<SelectionResult(const SchedulerContext&)>;

struct NamedScheduler {
  std::string name;
  SchedulerFn select;
};

/// Built-in schedulers by CLI name: greedy, top1, topN, adaptive, exhaustive.
/// The learned selector is constructed separately (it needs a model).
inline NamedScheduler builtin_scheduler(const std::string& name, double exhaustive_cap = 2e6) {
  if (name == "greedy") return {name, [](const SchedulerContext& c) { return greedy_select(c); }};
  if (name == "top1") return {name, [](const SchedulerContext& c) { return topk_select(c, 1); }};
  if (name == "topN") {
    return {name, [](const SchedulerContext& c) { return topk_select(c, c.max_selected); }};
  }
  if (name == "adaptive") return {name, [](const SchedulerContext& c) { return adaptive_topk_select(c); }};
  if (name == "exhaustive") {
    return {name, [exhaustive_cap](const SchedulerContext& c) { return exhaustive_select(c, exhaustive_cap); }};
  }
  throw ConfigError("unknown scheduler '" + name + "'");
}

}  // namespace mmw
