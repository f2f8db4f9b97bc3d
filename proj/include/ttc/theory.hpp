#pragma once

// Executable checks of the adaptive-compute guarantees.
//
//  * mean_to_tail_bound:      P(S >= tau) >= (E[S] - tau) / (1 - tau) for S in [0,1]
//  * max_tail_independent:    P(max of k iid candidates >= tau) = 1 - (1-p)^k
//  * expected_adaptive_cost:  E[cost] of adaptive Best-of-N = sum_{k<n} (1-p)^k
//  * verify_theorem1:         rising per-candidate success p_t gives non-increasing
//                             mean cost and non-decreasing P(satisfied)
//  * verify_theorem2_dag:     dominance at the roots of a monotone generation DAG
//                             propagates to every node and to the max
//
// Monte-Carlo tolerances are 3 standard errors. Trials draw from streams keyed
// on (seed, trial index), so results do not depend on evaluation order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include <boost/rational.hpp>
#include <nlohmann/json.hpp>

#include "ttc/error.hpp"
#include "ttc/random.hpp"
#include "ttc/simulated_backend.hpp"
#include "ttc/strategies.hpp"

namespace ttc {

// ------------------------------------------------------------ distributions

/// Finitely supported score distribution. With Real = boost::rational every
/// quantity below is computed exactly.
template <class Real>
struct DiscreteScoreDist {
  /// (value, probability) pairs.
  std::vector<std::pair<Real, Real>> support;

  void validate() const {
    if (support.empty()) throw ContractError("empty support");
    Real total(0);
    for (const auto& [v, p] : support) {
      if (!(v >= Real(0) && v <= Real(1))) throw ContractError("score value outside [0,1]");
      if (!(p >= Real(0))) throw ContractError("negative probability");
      total += p;
    }
    if constexpr (std::is_floating_point_v<Real>) {
      if (!(std::abs(total - Real(1)) <= Real(1e-12)))
        throw ContractError("probabilities do not sum to 1");
    } else {
      if (total != Real(1)) throw ContractError("probabilities do not sum to 1");
    }
  }

  Real mean() const {
    Real m(0);
    for (const auto& [v, p] : support) m += v * p;
    return m;
  }

  /// P(S >= x).
  Real tail(const Real& x) const {
    Real t(0);
    for (const auto& [v, p] : support)
      if (v >= x) t += p;
    return t;
  }
};

using ExactDist = DiscreteScoreDist<boost::rational<std::int64_t>>;

/// Quantile-transform sample: the smallest value whose CDF exceeds u. Under a
/// shared u, a dominating distribution never yields a smaller value.
inline double quantile(const DiscreteScoreDist<double>& d, double u) {
  auto sorted = d.support;
  std::sort(sorted.begin(), sorted.end());
  double cdf = 0.0;
  for (const auto& [v, p] : sorted) {
    cdf += p;
    if (u < cdf) return v;
  }
  return sorted.back().first;
}

// ------------------------------------------------------------ closed forms

template <class Real>
Real mean_to_tail_bound(const Real& mean, const Real& tau) {
  if (!(tau > Real(0) && tau < Real(1))) throw DomainError("tau must lie in (0,1)");
  if (!(mean >= Real(0) && mean <= Real(1))) throw DomainError("mean must lie in [0,1]");
  Real b = (mean - tau) / (Real(1) - tau);
  return b > Real(0) ? b : Real(0);
}

inline double max_tail_independent(double p, std::int64_t k) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0,1]");
  if (k < 1) throw DomainError("k must be positive");
  return 1.0 - std::pow(1.0 - p, static_cast<double>(k));
}

inline double expected_adaptive_cost(double p, std::int64_t n_max) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("p must lie in [0,1]");
  if (n_max < 1) throw DomainError("n_max must be positive");
  double sum = 0.0, miss = 1.0;
  for (std::int64_t k = 0; k < n_max; ++k) {
    sum += miss;
    miss *= 1.0 - p;
  }
  return sum;
}

namespace detail {

/// Welford accumulator.
struct RunningStats {
  std::int64_t n = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    double d = x - mean;
    mean += d / static_cast<double>(n);
    m2 += d * (x - mean);
  }
  double sd() const { return n > 1 ? std::sqrt(m2 / static_cast<double>(n - 1)) : 0.0; }
  double se() const { return n > 0 ? sd() / std::sqrt(static_cast<double>(n)) : 0.0; }
};

/// Absorbs rounding when a standard error is exactly zero.
inline constexpr double kSlack = 1e-12;

inline Question probe_question() {
  return {"probe", "probe", SimilarityLevel::S1, "probe", "1", std::nullopt};
}

inline SimulatedProfile threshold_profile(double p, double tau, std::uint64_t seed) {
  SimulatedProfile prof;
  prof.base_success = p;
  prof.score_given_success = ScoreDist::uniform(tau, 1.0);
  prof.score_given_failure = ScoreDist::uniform(0.0, tau);
  prof.seed = seed;
  return prof;
}

}  // namespace detail

// ------------------------------------------------------------ lemma sweep

struct LemmaReport {
  std::int64_t checked = 0;
  std::int64_t violations = 0;
  bool pass = false;
};

/// Random distribution on the grid {0, 1/20, ..., 1} with integer weights,
/// held as exact rationals.
inline ExactDist random_exact_dist(SplitMix64& rng) {
  using R = boost::rational<std::int64_t>;
  ExactDist d;
  const int n = 1 + static_cast<int>(rng() % 8);
  std::vector<std::int64_t> weights(n);
  for (auto& w : weights) w = 1 + static_cast<std::int64_t>(rng() % 50);
  const std::int64_t total = std::accumulate(weights.begin(), weights.end(), std::int64_t{0});
  for (int i = 0; i < n; ++i)
    d.support.emplace_back(R(static_cast<std::int64_t>(rng() % 21), 20), R(weights[i], total));
  return d;
}

inline LemmaReport verify_lemma(std::int64_t count, std::uint64_t seed) {
  using R = boost::rational<std::int64_t>;
  LemmaReport r;
  SplitMix64 rng(derive_seed(seed, "lemma"));
  for (std::int64_t i = 0; i < count; ++i) {
    auto d = random_exact_dist(rng);
    d.validate();
    const std::int64_t den = 2 + static_cast<std::int64_t>(rng() % 96);
    const R tau(1 + static_cast<std::int64_t>(rng() % (den - 1)), den);
    ++r.checked;
    if (d.tail(tau) < mean_to_tail_bound(d.mean(), tau)) ++r.violations;
  }
  r.pass = r.checked > 0 && r.violations == 0;
  return r;
}

// ------------------------------------------------------------ improving success schedule

struct RoundStats {
  double p = 0.0;
  double mean_cost = 0.0;
  double cost_se = 0.0;
  double closed_form = 0.0;
  double satisfied_rate = 0.0;
  double satisfied_se = 0.0;
  bool matches_closed_form = false;
};

struct Theorem1Report {
  std::int64_t n_max = 0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  double tau = 0.0;
  std::vector<RoundStats> rounds;
  bool matches_closed_form = false;
  bool cost_non_increasing = false;
  bool satisfied_non_decreasing = false;
  /// Informational: every step lowers the empirical mean.
  bool strictly_decreasing = false;
  bool pass = false;
};

/// Simulates adaptive Best-of-N at each p_t of a non-decreasing schedule.
/// Rounds share trial seeds (common random numbers).
inline Theorem1Report verify_theorem1(const std::vector<double>& p_schedule, std::int64_t n_max,
                                      std::int64_t trials, std::uint64_t seed, double tau = 0.9) {
  if (p_schedule.empty()) throw PreconditionError("empty p schedule");
  for (double p : p_schedule)
    if (!(p >= 0.0 && p <= 1.0)) throw PreconditionError("schedule values must lie in [0,1]");
  for (std::size_t t = 1; t < p_schedule.size(); ++t)
    if (p_schedule[t] < p_schedule[t - 1])
      throw PreconditionError("p schedule must be non-decreasing");
  if (trials < 2) throw PreconditionError("at least 2 trials are required");
  (void)Threshold(tau);

  Theorem1Report rep{n_max, trials, seed, tau, {}, true, true, true, true, false};
  StrategyConfig cfg;
  cfg.kind = StrategyKind::best_of_n;
  cfg.n_max = n_max;
  cfg.tau = tau;
  const auto q = detail::probe_question();
  const auto none = MemoryState::empty(MemoryMethod::none);

  for (double p : p_schedule) {
    SimulatedBackend backend(detail::threshold_profile(p, tau, derive_seed(seed, "theorem1")));
    detail::RunningStats cost, sat;
    for (std::int64_t i = 0; i < trials; ++i) {
      auto out = run_best_of_n(q, none, cfg, backend, derive_seed(seed, "trial", i));
      cost.add(static_cast<double>(out.cost()));
      sat.add(out.satisfied ? 1.0 : 0.0);
    }
    RoundStats rs{p, cost.mean, cost.se(), expected_adaptive_cost(p, n_max), sat.mean, sat.se(),
                  false};
    rs.matches_closed_form =
        std::abs(rs.mean_cost - rs.closed_form) <= 3.0 * rs.cost_se + detail::kSlack;
    rep.matches_closed_form &= rs.matches_closed_form;
    rep.rounds.push_back(rs);
  }
  for (std::size_t t = 1; t < rep.rounds.size(); ++t) {
    const auto& a = rep.rounds[t - 1];
    const auto& b = rep.rounds[t];
    const double cost_band = 3.0 * std::hypot(a.cost_se, b.cost_se) + detail::kSlack;
    const double sat_band = 3.0 * std::hypot(a.satisfied_se, b.satisfied_se) + detail::kSlack;
    rep.cost_non_increasing &= b.mean_cost <= a.mean_cost + cost_band;
    rep.satisfied_non_decreasing &= b.satisfied_rate >= a.satisfied_rate - sat_band;
    rep.strictly_decreasing &= b.mean_cost < a.mean_cost;
  }
  rep.pass = rep.matches_closed_form && rep.cost_non_increasing && rep.satisfied_non_decreasing;
  return rep;
}

// ------------------------------------------------------------ independent max tail

struct MaxTailReport {
  double p = 0.0;
  std::int64_t k = 0;
  double tau = 0.0;
  std::int64_t trials = 0;
  double empirical = 0.0;
  double expected = 0.0;
  double band = 0.0;
  bool pass = false;
};

/// Runs exhaustive Best-of-N with k candidates and compares the frequency of
/// a satisfying best candidate with 1 - (1-p)^k.
inline MaxTailReport verify_max_tail_independent(double p, std::int64_t k, std::int64_t trials,
                                                 std::uint64_t seed, double tau = 0.9) {
  if (trials < 1) throw PreconditionError("at least 1 trial is required");
  StrategyConfig cfg;
  cfg.kind = StrategyKind::best_of_n;
  cfg.n_max = k;
  cfg.tau = tau;
  cfg.adaptive = false;
  SimulatedBackend backend(detail::threshold_profile(p, tau, derive_seed(seed, "max_tail")));
  const auto q = detail::probe_question();
  const auto none = MemoryState::empty(MemoryMethod::none);
  std::int64_t hits = 0;
  for (std::int64_t i = 0; i < trials; ++i)
    hits += run_best_of_n(q, none, cfg, backend, derive_seed(seed, "trial", i)).satisfied;

  MaxTailReport r{p, k, tau, trials};
  r.empirical = static_cast<double>(hits) / static_cast<double>(trials);
  r.expected = max_tail_independent(p, k);
  r.band = 3.0 * std::sqrt(r.expected * (1.0 - r.expected) / static_cast<double>(trials)) +
           detail::kSlack;
  r.pass = std::abs(r.empirical - r.expected) <= r.band;
  return r;
}

// ------------------------------------------------------------ dominance through a monotone DAG

/// Child score from parent scores and one uniform draw. Must be
/// non-decreasing in every parent score.
using ChildRule = std::function<double(std::span<const double> parents, double u)>;

struct DagNode {
  std::vector<std::size_t> parents;
  /// Roots: score distribution at rounds t and t+1.
  DiscreteScoreDist<double> before;
  DiscreteScoreDist<double> after;
  /// Non-roots.
  ChildRule rule;
};

/// Generation DAG shared by both rounds; only root distributions change.
struct MonotoneDag {
  std::vector<DagNode> nodes;

  bool is_root(std::size_t j) const { return nodes.at(j).parents.empty(); }

  /// Kahn's algorithm, lowest index first among ready nodes.
  std::vector<std::size_t> topological_order() const {
    const std::size_t n = nodes.size();
    std::vector<std::size_t> indegree(n, 0);
    std::vector<std::vector<std::size_t>> children(n);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t p : nodes[j].parents) {
        if (p >= n) throw StructuralError("parent index out of range at node " + std::to_string(j));
        children[p].push_back(j);
        ++indegree[j];
      }
    }
    std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
    for (std::size_t j = 0; j < n; ++j)
      if (indegree[j] == 0) ready.push(j);
    std::vector<std::size_t> order;
    while (!ready.empty()) {
      auto j = ready.top();
      ready.pop();
      order.push_back(j);
      for (auto c : children[j])
        if (--indegree[c] == 0) ready.push(c);
    }
    if (order.size() != n) throw StructuralError("generation graph has a cycle");
    return order;
  }

  void validate() const {
    if (nodes.empty()) throw StructuralError("empty graph");
    (void)topological_order();
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (is_root(j)) {
        nodes[j].before.validate();
        nodes[j].after.validate();
      } else if (!nodes[j].rule) {
        throw StructuralError("non-root node " + std::to_string(j) + " has no response rule");
      }
    }
  }
};

struct NodeDominance {
  std::size_t node = 0;
  /// Smallest (mean paired difference + 3 se) over the threshold grid.
  double worst_margin = 0.0;
  bool pass = false;
};

struct Theorem2Report {
  double tau = 0.0;
  std::int64_t trials = 0;
  std::uint64_t seed = 0;
  double tail_before = 0.0;
  double tail_after = 0.0;
  double diff_se = 0.0;
  /// Present when every node is a root: tails by enumerating the product of
  /// the root supports.
  std::optional<double> exact_before;
  std::optional<double> exact_after;
  /// Mean-to-tail bound on each root's tail at tau, per round.
  std::vector<std::pair<double, double>> root_lemma_bounds;
  std::vector<NodeDominance> nodes;
  bool max_tail_non_decreasing = false;
  bool matches_exact = true;
  bool pass = false;
};

namespace detail {

/// P(max_j S_j >= tau) for independent roots, by enumerating joint outcomes.
inline double enumerate_root_max_tail(const std::vector<const DiscreteScoreDist<double>*>& roots,
                                      double tau) {
  double total = 0.0;
  std::vector<std::size_t> idx(roots.size(), 0);
  while (true) {
    double prob = 1.0, best = 0.0;
    for (std::size_t j = 0; j < roots.size(); ++j) {
      const auto& [v, p] = roots[j]->support[idx[j]];
      prob *= p;
      best = std::max(best, v);
    }
    if (best >= tau) total += prob;
    std::size_t j = 0;
    for (; j < roots.size(); ++j) {
      if (++idx[j] < roots[j]->support.size()) break;
      idx[j] = 0;
    }
    if (j == roots.size()) break;
  }
  return total;
}

inline std::vector<double> dominance_grid(double tau) {
  std::vector<double> grid;
  for (int i = 1; i <= 20; ++i) grid.push_back(i / 20.0);
  grid.push_back(tau);
  return grid;
}

}  // namespace detail

inline Theorem2Report verify_theorem2_dag(const MonotoneDag& dag, double tau, std::int64_t trials,
                                          std::uint64_t seed) {
  (void)Threshold(tau);
  if (trials < 2) throw PreconditionError("at least 2 trials are required");
  dag.validate();
  const auto order = dag.topological_order();
  const std::size_t n = dag.nodes.size();

  Theorem2Report rep;
  rep.tau = tau;
  rep.trials = trials;
  rep.seed = seed;

  // Premise: each root's t+1 distribution dominates its t distribution.
  std::vector<const DiscreteScoreDist<double>*> roots_before, roots_after;
  for (std::size_t j = 0; j < n; ++j) {
    if (!dag.is_root(j)) continue;
    const auto& nd = dag.nodes[j];
    for (const auto* d : {&nd.before, &nd.after}) {
      for (const auto& [x, _] : d->support) {
        if (nd.after.tail(x) < nd.before.tail(x) - detail::kSlack)
          throw PreconditionError("root " + std::to_string(j) +
                                  " at t+1 does not dominate round t");
      }
    }
    rep.root_lemma_bounds.emplace_back(mean_to_tail_bound(nd.before.mean(), tau),
                                       mean_to_tail_bound(nd.after.mean(), tau));
    roots_before.push_back(&nd.before);
    roots_after.push_back(&nd.after);
  }

  const auto grid = detail::dominance_grid(tau);
  std::vector<std::vector<detail::RunningStats>> node_diff(n,
                                                           std::vector<detail::RunningStats>(grid.size()));
  detail::RunningStats max_diff, max_before, max_after;
  std::vector<double> before(n), after(n), us(n), pb, pa;

  for (std::int64_t i = 0; i < trials; ++i) {
    SplitMix64 rng(derive_seed(seed, "dag", i));
    for (auto& u : us) u = rng.uniform();
    for (auto j : order) {
      const auto& nd = dag.nodes[j];
      if (nd.parents.empty()) {
        before[j] = quantile(nd.before, us[j]);
        after[j] = quantile(nd.after, us[j]);
      } else {
        pb.clear();
        pa.clear();
        for (auto p : nd.parents) {
          pb.push_back(before[p]);
          pa.push_back(after[p]);
        }
        before[j] = std::clamp(nd.rule(pb, us[j]), 0.0, 1.0);
        after[j] = std::clamp(nd.rule(pa, us[j]), 0.0, 1.0);
      }
    }
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t g = 0; g < grid.size(); ++g)
        node_diff[j][g].add(double(after[j] >= grid[g]) - double(before[j] >= grid[g]));
    const double hb = *std::max_element(before.begin(), before.end()) >= tau;
    const double ha = *std::max_element(after.begin(), after.end()) >= tau;
    max_before.add(hb);
    max_after.add(ha);
    max_diff.add(ha - hb);
  }

  rep.tail_before = max_before.mean;
  rep.tail_after = max_after.mean;
  rep.diff_se = max_diff.se();
  rep.max_tail_non_decreasing = max_diff.mean >= -3.0 * rep.diff_se - detail::kSlack;

  bool nodes_ok = true;
  for (std::size_t j = 0; j < n; ++j) {
    NodeDominance nd{j, std::numeric_limits<double>::infinity(), true};
    for (const auto& s : node_diff[j]) {
      double margin = s.mean + 3.0 * s.se() + detail::kSlack;
      nd.worst_margin = std::min(nd.worst_margin, margin);
      nd.pass &= margin >= 0.0;
    }
    nodes_ok &= nd.pass;
    rep.nodes.push_back(nd);
  }

  if (roots_before.size() == n) {
    rep.exact_before = detail::enumerate_root_max_tail(roots_before, tau);
    rep.exact_after = detail::enumerate_root_max_tail(roots_after, tau);
    auto within = [&](double emp, double exact) {
      return std::abs(emp - exact) <=
             3.0 * std::sqrt(exact * (1.0 - exact) / static_cast<double>(trials)) + detail::kSlack;
    };
    rep.matches_exact = within(rep.tail_before, *rep.exact_before) &&
                        within(rep.tail_after, *rep.exact_after);
  }
  rep.pass = rep.max_tail_non_decreasing && nodes_ok && rep.matches_exact;
  return rep;
}

// ------------------------------------------------------------ fixtures

namespace fixtures {

inline DiscreteScoreDist<double> bernoulli_score(double p) { return {{{0.0, 1.0 - p}, {1.0, p}}}; }

/// One root whose satisfying mass grows from 0.5 to 0.7.
inline MonotoneDag single_root() {
  MonotoneDag dag;
  dag.nodes.push_back({{}, {{{0.5, 0.5}, {0.95, 0.5}}}, {{{0.5, 0.3}, {0.95, 0.7}}}, {}});
  return dag;
}

/// Chain 1 -> 2 -> 3. Each child copies its parent plus noise in
/// [-0.1, 0.1); the root improves by a +0.1 shift.
inline MonotoneDag chain(double noise = 0.1) {
  MonotoneDag dag;
  DiscreteScoreDist<double> root_t{{{0.5, 0.25}, {0.6, 0.25}, {0.7, 0.25}, {0.8, 0.25}}};
  DiscreteScoreDist<double> root_t1{{{0.6, 0.25}, {0.7, 0.25}, {0.8, 0.25}, {0.9, 0.25}}};
  ChildRule rule = [noise](std::span<const double> parents, double u) {
    return std::clamp(parents[0] + noise * (2.0 * u - 1.0), 0.0, 1.0);
  };
  dag.nodes.push_back({{}, root_t, root_t1, {}});
  dag.nodes.push_back({{0}, {}, {}, rule});
  dag.nodes.push_back({{1}, {}, {}, rule});
  return dag;
}

/// Two independent roots scoring 1 with probability p (else 0).
inline MonotoneDag two_roots(double p_before = 0.3, double p_after = 0.6) {
  MonotoneDag dag;
  for (int i = 0; i < 2; ++i)
    dag.nodes.push_back({{}, bernoulli_score(p_before), bernoulli_score(p_after), {}});
  return dag;
}

}  // namespace fixtures

// ------------------------------------------------------------ JSON reports

inline nlohmann::json to_json(const LemmaReport& r, std::uint64_t seed) {
  return {{"check", "lemma_mean_to_tail"},
          {"params", {{"distributions", r.checked}, {"seed", seed}}},
          {"stats", {{"violations", r.violations}}},
          {"pass", r.pass}};
}

inline nlohmann::json to_json(const Theorem1Report& r) {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& s : r.rounds)
    rounds.push_back({{"p", s.p},
                      {"mean_cost", s.mean_cost},
                      {"cost_se", s.cost_se},
                      {"ci_low", s.mean_cost - 3.0 * s.cost_se},
                      {"ci_high", s.mean_cost + 3.0 * s.cost_se},
                      {"closed_form", s.closed_form},
                      {"satisfied_rate", s.satisfied_rate},
                      {"satisfied_se", s.satisfied_se},
                      {"matches_closed_form", s.matches_closed_form}});
  return {{"check", "theorem1_adaptive_cost"},
          {"params",
           {{"n_max", r.n_max}, {"trials", r.trials}, {"seed", r.seed}, {"tau", r.tau}}},
          {"stats",
           {{"rounds", rounds},
            {"cost_non_increasing", r.cost_non_increasing},
            {"satisfied_non_decreasing", r.satisfied_non_decreasing},
            {"strictly_decreasing", r.strictly_decreasing}}},
          {"pass", r.pass}};
}

inline nlohmann::json to_json(const MaxTailReport& r) {
  return {{"check", "max_tail_independent"},
          {"params", {{"p", r.p}, {"k", r.k}, {"tau", r.tau}, {"trials", r.trials}}},
          {"stats", {{"empirical", r.empirical}, {"expected", r.expected}, {"band", r.band}}},
          {"pass", r.pass}};
}

inline nlohmann::json to_json(const Theorem2Report& r, std::string_view fixture) {
  nlohmann::json nodes = nlohmann::json::array();
  for (const auto& n : r.nodes)
    nodes.push_back({{"node", n.node}, {"worst_margin", n.worst_margin}, {"pass", n.pass}});
  nlohmann::json stats = {{"tail_before", r.tail_before},
                          {"tail_after", r.tail_after},
                          {"diff_se", r.diff_se},
                          {"nodes", nodes},
                          {"root_lemma_bounds", r.root_lemma_bounds},
                          {"max_tail_non_decreasing", r.max_tail_non_decreasing},
                          {"matches_exact", r.matches_exact}};
  if (r.exact_before) stats["exact_before"] = *r.exact_before;
  if (r.exact_after) stats["exact_after"] = *r.exact_after;
  return {{"check", "theorem2_dag"},
          {"params", {{"fixture", fixture}, {"tau", r.tau}, {"trials", r.trials}, {"seed", r.seed}}},
          {"stats", stats},
          {"pass", r.pass}};
}

}  // namespace ttc
