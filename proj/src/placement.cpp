#include "aquobs/placement.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <queue>
#include <random>

namespace aquobs {

namespace {

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

// Scenario-averaged per-sensor trace weight; trace gains are modular so this
// is the marginal gain of `a` regardless of the current set.
double trace_weight(const PlacementProblem& p, int a) {
  double w = 0.0;
  for (const GramianAtoms* atoms : p.scenarios) w += atoms->atom_trace(a);
  return w / static_cast<double>(p.scenarios.size());
}

std::vector<double> per_scenario_values(const PlacementProblem& p,
                                        std::span<const int> sensors) {
  std::vector<double> out;
  for (const GramianAtoms* atoms : p.scenarios) {
    const Matrix w = gramian_for_set(*atoms, sensors);
    out.push_back(p.objective == Measure::trace ? measure_trace(w)
                                                : measure_logdet(w, p.epsilon));
  }
  return out;
}

// Incremental evaluator for the greedy loop: keeps W(S) and its measure per
// scenario so a candidate gain needs one measure evaluation per scenario.
class GreedyState {
 public:
  GreedyState(const PlacementProblem& p, std::span<const int> seed_set) : p_(p) {
    if (p.objective == Measure::logdet) {
      for (const GramianAtoms* atoms : p.scenarios) {
        w_.push_back(gramian_for_set(*atoms, seed_set));
        base_.push_back(measure_logdet(w_.back(), p.epsilon));
      }
    }
  }

  double gain(int a) const {
    ++p_.evaluations;
    if (p_.objective == Measure::trace) return trace_weight(p_, a);
    double g = 0.0;
    for (std::size_t s = 0; s < p_.scenarios.size(); ++s) {
      Matrix trial = w_[s];
      p_.scenarios[s]->add_atom_to(trial, a);
      g += measure_logdet(trial, p_.epsilon) - base_[s];
    }
    return g / static_cast<double>(p_.scenarios.size());
  }

  void select(int a) {
    if (p_.objective == Measure::trace) return;
    for (std::size_t s = 0; s < p_.scenarios.size(); ++s) {
      p_.scenarios[s]->add_atom_to(w_[s], a);
      base_[s] = measure_logdet(w_[s], p_.epsilon);
    }
  }

  double objective_of(std::span<const int> sensors) const {
    return robust_objective(p_.scenarios, sensors, p_.objective, p_.epsilon);
  }

 private:
  const PlacementProblem& p_;
  std::vector<Matrix> w_;
  std::vector<double> base_;
};

void fill_identity(PlacementResult& res, const PlacementProblem& p) {
  res.budget = p.budget;
  res.pinned = p.pinned;
  std::sort(res.pinned.begin(), res.pinned.end());
  res.objective = p.objective;
  res.epsilon = p.epsilon;
  res.scenario_count = static_cast<int>(p.scenarios.size());
}

}  // namespace

void PlacementProblem::validate() const {
  if (scenarios.empty()) throw ValidationError("placement needs at least one scenario");
  // scenarios may differ in state dimension (segmentation follows each
  // hydraulic profile); only the candidate list must agree
  const GramianAtoms& first = *scenarios.front();
  for (const GramianAtoms* atoms : scenarios)
    if (atoms->candidates != first.candidates)
      throw ValidationError("scenarios disagree on the candidate sensor list");
  const int n = candidate_count();
  if (budget < static_cast<int>(pinned.size()) || budget > n)
    throw ValidationError("budget must satisfy |pinned| <= r <= |candidates|");
  std::vector<int> sorted = pinned;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i] < 0 || sorted[i] >= n)
      throw ValidationError("pinned sensor position out of range");
    if (i > 0 && sorted[i] == sorted[i - 1])
      throw ValidationError("duplicate pinned sensor");
  }
  if (objective == Measure::logdet && !(epsilon > 0.0))
    throw ValidationError("logdet objective needs positive epsilon");
}

double marginal_gain(const PlacementProblem& problem, std::span<const int> sensors,
                     int candidate) {
  problem.validate();
  if (candidate < 0 || candidate >= problem.candidate_count())
    throw ValidationError("candidate position out of range");
  for (int s : sensors)
    if (s == candidate)
      throw ValidationError("candidate " + std::to_string(candidate) +
                            " is already in the sensor set");
  ++problem.evaluations;
  if (problem.objective == Measure::trace) return trace_weight(problem, candidate);

  std::vector<int> with(sensors.begin(), sensors.end());
  with.push_back(candidate);
  const double before =
      robust_objective(problem.scenarios, sensors, problem.objective, problem.epsilon);
  const double after =
      robust_objective(problem.scenarios, with, problem.objective, problem.epsilon);
  return after - before;
}

PlacementResult greedy_place(const PlacementProblem& problem) {
  problem.validate();
  const double t0 = now_seconds();
  const long evals0 = problem.evaluations;
  const int n = problem.candidate_count();

  PlacementResult res;
  fill_identity(res, problem);

  std::vector<int> set = res.pinned;  // kept sorted
  std::vector<char> chosen(n, 0);
  for (int s : set) chosen[s] = 1;

  GreedyState state(problem, set);

  if (problem.lazy) {
    // stale-gain caching, valid under submodularity; (gain, -candidate) order
    // reproduces the plain greedy tie-break
    struct Entry {
      double gain;
      int candidate;
      int stamp;
    };
    auto worse = [](const Entry& a, const Entry& b) {
      return a.gain < b.gain || (a.gain == b.gain && a.candidate > b.candidate);
    };
    std::priority_queue<Entry, std::vector<Entry>, decltype(worse)> queue(worse);
    for (int a = 0; a < n; ++a)
      if (!chosen[a]) queue.push({state.gain(a), a, static_cast<int>(set.size())});
    while (static_cast<int>(set.size()) < problem.budget) {
      Entry top = queue.top();
      queue.pop();
      if (top.stamp != static_cast<int>(set.size())) {
        top.gain = state.gain(top.candidate);
        top.stamp = static_cast<int>(set.size());
        queue.push(top);
        continue;
      }
      chosen[top.candidate] = 1;
      state.select(top.candidate);
      set.insert(std::lower_bound(set.begin(), set.end(), top.candidate), top.candidate);
      res.selections.push_back({top.candidate, top.gain, state.objective_of(set)});
    }
  } else {
    while (static_cast<int>(set.size()) < problem.budget) {
      int best = -1;
      double best_gain = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < n; ++a) {
        if (chosen[a]) continue;
        const double g = state.gain(a);
        if (g > best_gain) {
          best_gain = g;
          best = a;
        }
      }
      chosen[best] = 1;
      state.select(best);
      set.insert(std::lower_bound(set.begin(), set.end(), best), best);
      res.selections.push_back({best, best_gain, state.objective_of(set)});
    }
  }

  res.sensors = set;
  res.objective_value =
      robust_objective(problem.scenarios, set, problem.objective, problem.epsilon);
  res.per_scenario = per_scenario_values(problem, set);
  res.evaluations = problem.evaluations - evals0;
  res.wall_seconds = now_seconds() - t0;
  return res;
}

PlacementResult brute_force_place(const PlacementProblem& problem, long cap) {
  problem.validate();
  const double t0 = now_seconds();
  const long evals0 = problem.evaluations;
  const int n = problem.candidate_count();

  PlacementResult res;
  fill_identity(res, problem);

  std::vector<char> is_pinned(n, 0);
  for (int s : res.pinned) is_pinned[s] = 1;
  std::vector<int> free;
  for (int a = 0; a < n; ++a)
    if (!is_pinned[a]) free.push_back(a);
  const int m = static_cast<int>(free.size());
  const int t = problem.budget - static_cast<int>(res.pinned.size());

  double combos = 1.0;
  for (int i = 1; i <= t; ++i) combos = combos * (m - t + i) / i;
  if (combos > static_cast<double>(cap))
    throw ResourceCapError("brute force would enumerate " + std::to_string(combos) +
                           " sets (cap " + std::to_string(cap) + "); use greedy placement");

  // W(pinned) per scenario, reused across combinations
  std::vector<Matrix> w_pinned;
  for (const GramianAtoms* atoms : problem.scenarios)
    w_pinned.push_back(gramian_for_set(*atoms, res.pinned));
  double pinned_weight = 0.0;
  if (problem.objective == Measure::trace)
    for (int s : res.pinned) pinned_weight += trace_weight(problem, s);

  auto evaluate = [&](const std::vector<int>& idx) {
    ++problem.evaluations;
    if (problem.objective == Measure::trace) {
      double v = pinned_weight;
      for (int i : idx) v += trace_weight(problem, free[i]);
      return v;
    }
    double v = 0.0;
    for (std::size_t s = 0; s < problem.scenarios.size(); ++s) {
      Matrix w = w_pinned[s];
      for (int i : idx) problem.scenarios[s]->add_atom_to(w, free[i]);
      v += measure_logdet(w, problem.epsilon);
    }
    return v / static_cast<double>(problem.scenarios.size());
  };

  std::vector<int> idx(t);
  for (int i = 0; i < t; ++i) idx[i] = i;
  std::vector<int> best_idx = idx;
  double best = -std::numeric_limits<double>::infinity();
  while (true) {
    const double v = evaluate(idx);
    if (v > best) {
      best = v;
      best_idx = idx;
    }
    // next lexicographic combination
    int pos = t - 1;
    while (pos >= 0 && idx[pos] == m - t + pos) --pos;
    if (pos < 0) break;
    ++idx[pos];
    for (int i = pos + 1; i < t; ++i) idx[i] = idx[i - 1] + 1;
  }

  res.sensors = res.pinned;
  for (int i : best_idx) res.sensors.push_back(free[i]);
  std::sort(res.sensors.begin(), res.sensors.end());
  res.objective_value = robust_objective(problem.scenarios, res.sensors,
                                         problem.objective, problem.epsilon);
  res.per_scenario = per_scenario_values(problem, res.sensors);
  res.evaluations = problem.evaluations - evals0;
  res.wall_seconds = now_seconds() - t0;
  return res;
}

double guarantee_check(const PlacementResult& greedy, const PlacementResult& oracle) {
  if (greedy.budget != oracle.budget || greedy.pinned != oracle.pinned ||
      greedy.objective != oracle.objective || greedy.epsilon != oracle.epsilon ||
      greedy.scenario_count != oracle.scenario_count)
    throw ValidationError("guarantee check on results from different problems");

  double ratio;
  if (oracle.objective_value <= 0.0) {
    if (std::abs(greedy.objective_value - oracle.objective_value) >
        1e-12 * std::max(1.0, std::abs(oracle.objective_value)))
      throw ValidationError("degenerate oracle objective with diverging greedy value");
    ratio = 1.0;
  } else {
    ratio = greedy.objective_value / oracle.objective_value;
  }
  constexpr double kBound = 1.0 - 1.0 / 2.718281828459045235;
  if (ratio < kBound - 1e-9)
    throw ValidationError("greedy/oracle ratio " + std::to_string(ratio) +
                          " below the (1 - 1/e) guarantee");
  return ratio;
}

SubmodularityReport submodularity_probe(const PlacementProblem& problem, int trials,
                                        std::uint64_t seed) {
  problem.validate();
  SubmodularityReport report;
  report.min_slack = std::numeric_limits<double>::infinity();
  report.min_gain = std::numeric_limits<double>::infinity();
  const int n = problem.candidate_count();
  if (n < 2) {
    report.vacuous = true;
    report.min_slack = 0.0;
    report.min_gain = 0.0;
    return report;
  }

  std::mt19937_64 rng(seed);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;

  // gains use the same evaluation semantics as the solvers: the modular
  // fast path for trace (slacks vanish identically), objective differences
  // for logdet
  auto gain = [&](const std::vector<int>& s, int extra) {
    if (problem.objective == Measure::trace) return trace_weight(problem, extra);
    std::vector<int> with = s;
    with.push_back(extra);
    return robust_objective(problem.scenarios, with, problem.objective, problem.epsilon) -
           robust_objective(problem.scenarios, s, problem.objective, problem.epsilon);
  };

  for (int trial = 0; trial < trials; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    const int size_b = std::uniform_int_distribution<int>(1, n - 1)(rng);
    const int size_a = std::uniform_int_distribution<int>(0, size_b - 1)(rng);
    const int extra = perm[size_b];  // s, outside B

    const std::vector<int> a(perm.begin(), perm.begin() + size_a);
    const std::vector<int> b(perm.begin(), perm.begin() + size_b);
    const double gain_a = gain(a, extra);
    const double gain_b = gain(b, extra);
    report.min_slack = std::min(report.min_slack, gain_a - gain_b);
    report.min_gain = std::min({report.min_gain, gain_a, gain_b});
    ++report.trials;
  }
  return report;
}

}  // namespace aquobs
