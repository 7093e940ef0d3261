#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "aquobs/observability.hpp"

namespace aquobs {

inline constexpr long kDefaultOracleCap = 2'000'000;

// Cardinality-constrained sensor placement over per-scenario Gramian atoms.
// Sensors are candidate positions (indices into the shared candidate list).
struct PlacementProblem {
  std::vector<const GramianAtoms*> scenarios;  // d >= 1, shared candidate list
  int budget = 0;                              // r; pinned sensors consume budget
  std::vector<int> pinned;                     // always part of the solution
  Measure objective = Measure::logdet;
  double epsilon = 1e-8;                       // logdet regularization
  bool lazy = false;  // lazy-greedy gain caching (same result, fewer evaluations)

  // Marginal-gain / set-objective evaluations performed by the solvers.
  mutable long evaluations = 0;

  void validate() const;
  int candidate_count() const {
    return static_cast<int>(scenarios.front()->candidates.size());
  }
};

// O(S u {a}) - O(S) under the robust objective. Counts one evaluation.
double marginal_gain(const PlacementProblem& problem, std::span<const int> sensors,
                     int candidate);

struct Selection {
  int candidate;           // candidate position
  double gain;             // marginal gain when selected
  double objective_after;  // robust objective of the set so far
};

struct OracleComparison {
  double objective = 0.0;
  std::vector<int> sensors;
  double ratio = 1.0;
};

struct PlacementResult {
  // problem identity, checked by guarantee_check
  int budget = 0;
  std::vector<int> pinned;
  Measure objective = Measure::logdet;
  double epsilon = 0.0;
  int scenario_count = 0;

  std::vector<Selection> selections;  // greedy picks in order (pinned excluded)
  std::vector<int> sensors;           // final set, ascending positions
  double objective_value = 0.0;
  std::vector<double> per_scenario;   // per-scenario measure at the final set
  long evaluations = 0;
  double wall_seconds = 0.0;
  std::optional<OracleComparison> oracle;
};

// Greedy maximization seeded with the pinned set; ties go to the lowest
// candidate position. Exactly optimal for trace; (1 - 1/e)-optimal for the
// submodular logdet objective.
PlacementResult greedy_place(const PlacementProblem& problem);

// Exhaustive optimum over all feasible supersets of the pinned set.
// Enumerating more than `cap` sets raises ResourceCapError.
PlacementResult brute_force_place(const PlacementProblem& problem,
                                  long cap = kDefaultOracleCap);

// O(S_greedy) / O(S*); throws when the results belong to different problems
// or the ratio falls below 1 - 1/e (minus numerical slack).
double guarantee_check(const PlacementResult& greedy, const PlacementResult& oracle);

// Diminishing-returns probe: random chains A subset-of B and s outside B;
// reports the minimum of gain(A) - gain(B) and the minimum gain seen.
struct SubmodularityReport {
  int trials = 0;
  bool vacuous = false;
  double min_slack = 0.0;
  double min_gain = 0.0;
};

SubmodularityReport submodularity_probe(const PlacementProblem& problem, int trials,
                                        std::uint64_t seed);

}  // namespace aquobs
