#include "aquobs/observability.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "aquobs/kernels.hpp"

namespace aquobs {

void StepJacobian::multiply(const Matrix& phi, Matrix& out) const {
  const auto& kern = kernels::active();
  const int m = phi.cols();
  for (int r = 0; r < n; ++r) {
    double* out_row = out.row(r);
    const int lo = row_ptr[r], hi = row_ptr[r + 1];
    if (lo == hi) {
      std::fill(out_row, out_row + m, 0.0);
      continue;
    }
    kern.scale(out_row, val[lo], phi.row(col[lo]), static_cast<std::size_t>(m));
    for (int e = lo + 1; e < hi; ++e)
      kern.axpy(out_row, val[e], phi.row(col[e]), static_cast<std::size_t>(m));
  }
}

Matrix StepJacobian::to_dense() const {
  Matrix d(n, n);
  for (int r = 0; r < n; ++r)
    for (int e = row_ptr[r]; e < row_ptr[r + 1]; ++e) d(r, col[e]) += val[e];
  return d;
}

StepJacobian step_jacobian(const SimulationContext& ctx, const SegmentedState& state,
                           int k) {
  const Segmentation& seg = ctx.seg();
  const WaterNetwork& net = ctx.net();
  const int h = ctx.hydraulic_step(k);
  if (h >= ctx.hyd().steps())
    throw ValidationError("no hydraulic data for WQ step " + std::to_string(k));
  const int n_x = seg.state_size();
  const int half = seg.half();
  const double dt = seg.dt_wq;
  const double* x = state.x.data();

  // Row entries are produced in state order: per species, nodes then pipe
  // segments. Collect per-row pairs first, then pack.
  std::vector<std::vector<std::pair<int, double>>> rows(n_x);
  auto put = [&rows](int r, int c, double v) {
    if (v != 0.0) rows[r].emplace_back(c, v);
  };

  for (int ni = 0; ni < net.node_count(); ++ni) {
    const Node& nd = net.node(ni);
    const int i0 = seg.node_state(0, ni);
    const int i1 = seg.node_state(1, ni);
    switch (nd.kind) {
      case NodeKind::reservoir:
        put(i0, i0, 1.0);
        put(i1, i1, 1.0);
        break;
      case NodeKind::junction: {
        const auto& nf = ctx.node_flows(h, ni);
        const double denom = nf.demand + nf.outflow;
        if (denom <= kStagnantFlowTol) {
          put(i0, i0, 1.0);  // holds its previous value
          put(i1, i1, 1.0);
        } else {
          for (const auto& f : nf.inflows) {
            put(i0, f.src_base, f.q / denom);
            put(i1, f.src_base + half, f.q / denom);
          }
        }
        break;
      }
      case NodeKind::tank: {
        const auto& nf = ctx.node_flows(h, ni);
        const double v_now = ctx.tank_volume(k, ni);
        const double v_next = ctx.tank_volume(k + 1, ni);
        const double c = x[i0], ct = x[i1];
        const double ab = ctx.tank_bulk_decay(), ar = ctx.tank_mutual();
        // pre-clamp values decide the subgradient convention
        for (int sp = 0; sp < 2; ++sp) {
          const auto booster = ctx.booster_at(ni, sp, k);
          const int row = sp == 0 ? i0 : i1;
          double mass = v_now * x[row];
          for (const auto& f : nf.inflows) mass += f.q * x[f.src_base + sp * half] * dt;
          mass += booster.amount * booster.concentration;
          mass -= nf.outflow * x[row] * dt;
          const double rate = sp == kChlorine ? -(ab + ar * ct) * c : -ar * c * ct;
          mass += rate * v_now * dt;
          if (mass / v_next < 0.0) continue;  // clamped: zero row

          const double scale = v_now * dt / v_next;
          if (sp == kChlorine) {
            put(i0, i0, (v_now - nf.outflow * dt) / v_next - (ab + ar * ct) * scale);
            put(i0, i1, -ar * c * scale);
          } else {
            put(i1, i1, (v_now - nf.outflow * dt) / v_next - ar * c * scale);
            put(i1, i0, -ar * ct * scale);
          }
          for (const auto& f : nf.inflows)
            put(row, f.src_base + sp * half, f.q * dt / v_next);
        }
        break;
      }
    }
  }

  for (int li = 0; li < net.link_count(); ++li) {
    const Link& l = net.link(li);
    if (l.kind != LinkKind::pipe) continue;
    const int s = seg.segments[li];
    const double lambda = seg.courant(h, li);
    const bool forward = ctx.hyd().flow(h, li) >= 0.0;
    const int up_node = forward ? l.from : l.to;
    const double mutual_dt = ctx.pipe_mutual(li) * dt;
    const double decay_dt0 = ctx.pipe_decay(li) * dt;
    const int base0 = seg.segment_state(0, li, 0);

    for (int si = 0; si < s; ++si) {
      const int self0 = base0 + si;
      const int self1 = self0 + half;
      const double c = x[self0], ct = x[self1];
      // upwind neighbour per flow sign; the boundary segment reads the node
      const bool boundary = forward ? si == 0 : si == s - 1;
      const int up0 = boundary ? seg.node_state(0, up_node) : (forward ? self0 - 1 : self0 + 1);

      for (int sp = 0; sp < 2; ++sp) {
        const double decay_dt = sp == kChlorine ? decay_dt0 : 0.0;
        const double a = sp == kChlorine ? c : ct;
        const double b = sp == kChlorine ? ct : c;
        const int row = sp == kChlorine ? self0 : self1;
        const double up_value = x[up0 + sp * half];
        const double raw =
            (1.0 - lambda) * a + lambda * up_value - (decay_dt + mutual_dt * b) * a;
        if (raw < 0.0) continue;  // clamped: zero row
        put(row, row, (1.0 - lambda) - (decay_dt + mutual_dt * b));
        put(row, up0 + sp * half, lambda);
        // cross-species term from the bilinear reaction
        const int other = sp == kChlorine ? self1 : self0;
        put(row, other, -mutual_dt * a);
      }
    }
  }

  StepJacobian jac;
  jac.n = n_x;
  jac.row_ptr.reserve(n_x + 1);
  jac.row_ptr.push_back(0);
  for (int r = 0; r < n_x; ++r) {
    auto& entries = rows[r];
    std::sort(entries.begin(), entries.end());
    for (std::size_t i = 0; i < entries.size(); ++i) {
      if (i > 0 && entries[i].first == jac.col.back()) {
        jac.val.back() += entries[i].second;
      } else {
        jac.col.push_back(entries[i].first);
        jac.val.push_back(entries[i].second);
      }
    }
    jac.row_ptr.push_back(static_cast<int>(jac.col.size()));
  }
  return jac;
}

TrajectoryJacobians trajectory_jacobians(const SimulationContext& ctx,
                                         const Trajectory& traj) {
  const int n_x = ctx.seg().state_size();
  if (traj.states.empty()) throw ValidationError("empty trajectory");
  for (const SegmentedState& s : traj.states)
    if (static_cast<int>(s.x.size()) != n_x)
      throw ValidationError("trajectory state dimension mismatch");

  TrajectoryJacobians out;
  out.scenario_id = ctx.scenario().id;
  out.phi.reserve(traj.states.size());
  out.phi.push_back(Matrix::identity(n_x));
  for (std::size_t i = 1; i < traj.states.size(); ++i) {
    const StepJacobian f = step_jacobian(ctx, traj.states[i - 1], static_cast<int>(i - 1));
    Matrix next(n_x, n_x);
    f.multiply(out.phi.back(), next);
    out.phi.push_back(std::move(next));
  }
  return out;
}

// --- Gramian atoms ----------------------------------------------------------------

GramianAtoms gramian_atoms(const TrajectoryJacobians& jac, const SensorModel& sensor,
                           const Segmentation& seg, int dense_cap) {
  GramianAtoms atoms;
  atoms.scenario_id = jac.scenario_id;
  atoms.n_steps = static_cast<int>(jac.phi.size());
  atoms.n_x = jac.phi.empty() ? 0 : jac.phi.front().rows();
  atoms.rows_per_sensor = sensor.rows_per_sensor();
  atoms.candidates.resize(sensor.candidates.size());
  const auto& kern = kernels::active();

  const int n_x = atoms.n_x;
  const int rps = atoms.rows_per_sensor;
  const bool dense = n_x <= dense_cap;
  for (std::size_t j = 0; j < sensor.candidates.size(); ++j) {
    atoms.candidates[j] = sensor.candidates[j];
    const auto rows = sensor.selector_rows(static_cast<int>(j), seg);
    Matrix factor(atoms.n_steps * rps, n_x);
    for (int i = 0; i < atoms.n_steps; ++i)
      for (int ri = 0; ri < rps; ++ri)
        std::copy_n(jac.phi[i].row(rows[ri]), n_x, factor.row(i * rps + ri));
    if (dense) {
      Matrix a(n_x, n_x);
      for (int r = 0; r < factor.rows(); ++r)
        kern.syr_full(a.data(), factor.row(r), static_cast<std::size_t>(n_x));
      atoms.dense.push_back(std::move(a));
    }
    atoms.factors.push_back(std::move(factor));
  }
  return atoms;
}

Matrix GramianAtoms::atom(int j) const {
  if (has_dense()) return dense[j];
  return atom_for_steps(j, 0, n_steps);
}

Matrix GramianAtoms::atom_for_steps(int j, int i0, int i1) const {
  const auto& kern = kernels::active();
  Matrix a(n_x, n_x);
  for (int i = i0; i < i1; ++i)
    for (int ri = 0; ri < rows_per_sensor; ++ri)
      kern.syr_full(a.data(), factors[j].row(i * rows_per_sensor + ri),
                    static_cast<std::size_t>(n_x));
  return a;
}

void GramianAtoms::add_atom_to(Matrix& w, int j) const {
  if (has_dense()) {
    w += dense[j];
    return;
  }
  const auto& kern = kernels::active();
  for (int r = 0; r < factors[j].rows(); ++r)
    kern.syr_full(w.data(), factors[j].row(r), static_cast<std::size_t>(n_x));
}

GramianAtoms slice_atoms_steps(const GramianAtoms& atoms, int i0, int i1) {
  if (i0 < 0 || i1 < i0 || i1 > atoms.n_steps)
    throw ValidationError("invalid atom step range");
  GramianAtoms out;
  out.scenario_id = atoms.scenario_id;
  out.n_x = atoms.n_x;
  out.n_steps = i1 - i0;
  out.rows_per_sensor = atoms.rows_per_sensor;
  out.candidates = atoms.candidates;
  const auto& kern = kernels::active();
  const int rps = atoms.rows_per_sensor;
  for (std::size_t j = 0; j < atoms.factors.size(); ++j) {
    Matrix factor(out.n_steps * rps, atoms.n_x);
    for (int i = 0; i < out.n_steps * rps; ++i)
      std::copy_n(atoms.factors[j].row(i0 * rps + i), atoms.n_x, factor.row(i));
    if (atoms.has_dense()) {
      Matrix a(atoms.n_x, atoms.n_x);
      for (int r = 0; r < factor.rows(); ++r)
        kern.syr_full(a.data(), factor.row(r), static_cast<std::size_t>(atoms.n_x));
      out.dense.push_back(std::move(a));
    }
    out.factors.push_back(std::move(factor));
  }
  return out;
}

double GramianAtoms::atom_trace(int j) const {
  if (has_dense()) {
    double t = 0.0;
    for (int i = 0; i < n_x; ++i) t += dense[j](i, i);
    return t;
  }
  const auto& kern = kernels::active();
  double t = 0.0;
  for (int r = 0; r < factors[j].rows(); ++r)
    t += kern.dot(factors[j].row(r), factors[j].row(r), static_cast<std::size_t>(n_x));
  return t;
}

Matrix gramian_for_set(const GramianAtoms& atoms, std::span<const int> sensors) {
  std::vector<int> sorted(sensors.begin(), sensors.end());
  std::sort(sorted.begin(), sorted.end());
  Matrix w(atoms.n_x, atoms.n_x);
  int prev = -1;
  for (int j : sorted) {
    if (j < 0 || j >= static_cast<int>(atoms.candidates.size()))
      throw ValidationError("unknown sensor position " + std::to_string(j));
    if (j == prev) throw ValidationError("duplicate sensor position " + std::to_string(j));
    prev = j;
    atoms.add_atom_to(w, j);
  }
  return w;
}

// --- measures ----------------------------------------------------------------------

namespace {

void check_symmetric(const Matrix& w) {
  const double tol = 1e-8 * std::max(1.0, w.max_abs());
  for (int r = 0; r < w.rows(); ++r)
    for (int c = r + 1; c < w.cols(); ++c)
      if (std::abs(w(r, c) - w(c, r)) > tol)
        throw ValidationError("matrix is not symmetric within tolerance");
}

Eigen::MatrixXd to_eigen_sym(const Matrix& w) {
  Eigen::MatrixXd m(w.rows(), w.cols());
  for (int r = 0; r < w.rows(); ++r)
    for (int c = 0; c < w.cols(); ++c) m(r, c) = 0.5 * (w(r, c) + w(c, r));
  return m;
}

}  // namespace

double measure_trace(const Matrix& w) {
  check_symmetric(w);
  double t = 0.0;
  for (int i = 0; i < w.rows(); ++i) t += w(i, i);
  return t;
}

double measure_logdet(const Matrix& w, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("logdet regularization must be positive");
  check_symmetric(w);
  const int n = w.rows();
  // logdet(W + eps I) - n log(eps) == logdet(W/eps + I); the latter avoids
  // the n*log(eps) cancellation and is exactly zero at W = 0.
  Eigen::MatrixXd m = to_eigen_sym(w) / epsilon;
  for (int i = 0; i < n; ++i) m(i, i) += 1.0;

  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() == Eigen::Success) {
    double ld = 0.0;
    const auto& l = llt.matrixLLT();
    for (int i = 0; i < n; ++i) ld += std::log(l(i, i));
    return 2.0 * ld;
  }
  // indefinite from rounding: clamp the spectrum instead
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen_sym(w));
  double ld = 0.0;
  for (int i = 0; i < n; ++i) ld += std::log1p(std::max(es.eigenvalues()[i], 0.0) / epsilon);
  return ld;
}

int measure_rank(const Matrix& w, double tol) {
  check_symmetric(w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen_sym(w),
                                                    Eigen::EigenvaluesOnly);
  const double lmax = std::max(0.0, es.eigenvalues().maxCoeff());
  if (lmax == 0.0) return 0;
  int rank = 0;
  for (int i = 0; i < w.rows(); ++i) rank += es.eigenvalues()[i] > tol * lmax;
  return rank;
}

double measure_lambda_min(const Matrix& w) {
  check_symmetric(w);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(to_eigen_sym(w),
                                                    Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double default_logdet_epsilon(std::span<const GramianAtoms* const> scenarios) {
  double mean_diag = 0.0;
  for (const GramianAtoms* atoms : scenarios) {
    double tr = 0.0;
    for (std::size_t j = 0; j < atoms->candidates.size(); ++j)
      tr += atoms->atom_trace(static_cast<int>(j));
    mean_diag += tr / atoms->n_x;
  }
  mean_diag /= static_cast<double>(scenarios.size());
  return 1e-8 * std::max(1.0, mean_diag);
}

double robust_objective(std::span<const GramianAtoms* const> scenarios,
                        std::span<const int> sensors, Measure measure, double epsilon) {
  if (scenarios.empty()) throw ValidationError("robust objective needs at least one scenario");
  const GramianAtoms& first = *scenarios.front();
  for (const GramianAtoms* atoms : scenarios)
    if (atoms->candidates != first.candidates)
      throw ValidationError("scenarios disagree on the candidate sensor list");

  const double d = static_cast<double>(scenarios.size());
  if (measure == Measure::trace) {
    // modular fast path: per-sensor weights, summed in ascending order
    std::vector<int> sorted(sensors.begin(), sensors.end());
    std::sort(sorted.begin(), sorted.end());
    double total = 0.0;
    int prev = -1;
    for (int j : sorted) {
      if (j < 0 || j >= static_cast<int>(first.candidates.size()))
        throw ValidationError("unknown sensor position " + std::to_string(j));
      if (j == prev) throw ValidationError("duplicate sensor position " + std::to_string(j));
      prev = j;
      double w = 0.0;
      for (const GramianAtoms* atoms : scenarios) w += atoms->atom_trace(j);
      total += w / d;
    }
    return total;
  }

  double total = 0.0;
  for (const GramianAtoms* atoms : scenarios)
    total += measure_logdet(gramian_for_set(*atoms, sensors), epsilon);
  return total / d;
}

}  // namespace aquobs
