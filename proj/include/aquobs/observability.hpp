#pragma once

#include <span>
#include <string>
#include <vector>

#include "aquobs/dynamics.hpp"
#include "aquobs/matrix.hpp"

namespace aquobs {

// --- step and trajectory Jacobians -------------------------------------------

// Sparse row-compressed Jacobian of one WQ step.
struct StepJacobian {
  int n = 0;
  std::vector<int> row_ptr;  // n + 1
  std::vector<int> col;
  std::vector<double> val;

  // out = F * phi (dense, row-major); out must be n x phi.cols()
  void multiply(const Matrix& phi, Matrix& out) const;
  Matrix to_dense() const;
};

// Analytic Jacobian of `step` at (state, k). Rows whose update clamped to
// zero are zeroed (the clamp is locally constant); stagnant junctions and
// reservoirs get identity rows.
StepJacobian step_jacobian(const SimulationContext& ctx, const SegmentedState& state,
                           int k);

// Sensitivities Phi_i = dx_i/dx_0 along a simulated trajectory, propagated by
// the chain rule: Phi_0 = I, Phi_{i+1} = F_i Phi_i.
struct TrajectoryJacobians {
  std::string scenario_id;
  std::vector<Matrix> phi;  // length N_s
};

TrajectoryJacobians trajectory_jacobians(const SimulationContext& ctx,
                                         const Trajectory& traj);

// --- Gramian atoms -------------------------------------------------------------

// Per-candidate PSD summands A_j = sum_i Phi_i^T c_j^T c_j Phi_i. The Gramian
// of any sensor set is the sum of its atoms. Factor rows rho_{j,i} = c_j Phi_i
// are always kept (export, per-window slicing); dense atoms are materialized
// when n_x <= dense_cap.
struct GramianAtoms {
  std::string scenario_id;
  int n_x = 0;
  int n_steps = 0;
  int rows_per_sensor = 1;
  std::vector<int> candidates;  // node indices, in candidate order
  std::vector<Matrix> factors;  // per candidate: (n_steps*rows_per_sensor) x n_x
  std::vector<Matrix> dense;    // per candidate: n_x x n_x, empty above the cap

  bool has_dense() const { return !dense.empty(); }
  Matrix atom(int j) const;
  double atom_trace(int j) const;
  // A_j restricted to WQ steps [i0, i1)
  Matrix atom_for_steps(int j, int i0, int i1) const;
  // W += A_j without materializing a copy
  void add_atom_to(Matrix& w, int j) const;
};

inline constexpr int kDefaultDenseCap = 2000;

GramianAtoms gramian_atoms(const TrajectoryJacobians& jac, const SensorModel& sensor,
                           const Segmentation& seg, int dense_cap = kDefaultDenseCap);

// W(S) = sum of atoms over candidate positions in S (ascending position
// order); S may be empty. Out-of-range positions error.
Matrix gramian_for_set(const GramianAtoms& atoms, std::span<const int> sensors);

// Atoms restricted to WQ steps [i0, i1); used by the per-hydraulic-window
// placement report.
GramianAtoms slice_atoms_steps(const GramianAtoms& atoms, int i0, int i1);

// --- scalar measures -------------------------------------------------------------

double measure_trace(const Matrix& w);

// Regularized log-determinant: logdet(W + eps I) - n log(eps). Zero at W = 0,
// monotone and submodular as a set function of the sensor set.
double measure_logdet(const Matrix& w, double epsilon);

// Count of eigenvalues above tol * lambda_max.
int measure_rank(const Matrix& w, double tol);

double measure_lambda_min(const Matrix& w);

// eps = 1e-8 * max(1, mean diagonal of the full-candidate Gramian), averaged
// over scenarios.
double default_logdet_epsilon(std::span<const GramianAtoms* const> scenarios);

// --- robust (scenario-averaged) objective -----------------------------------------

enum class Measure { trace, logdet };

// (1/d) sum_k measure(W^(k)(S)). All scenarios must share the candidate list.
// For trace this reduces to a modular sum of per-sensor weights.
double robust_objective(std::span<const GramianAtoms* const> scenarios,
                        std::span<const int> sensors, Measure measure, double epsilon);

}  // namespace aquobs
