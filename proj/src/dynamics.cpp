#include "aquobs/dynamics.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>

#include "aquobs/kernels.hpp"

namespace aquobs {

using json = nlohmann::ordered_json;

double wall_decay_coefficient(double alpha_b, double alpha_w, double alpha_f,
                              double radius) {
  if (!(radius > 0.0)) throw ValidationError("pipe radius must be positive");
  if (alpha_w == 0.0 && alpha_f == 0.0) return alpha_b;
  return alpha_b + 2.0 * alpha_w * alpha_f / (radius * (alpha_w + alpha_f));
}

ReactionRates reaction_rates(double c, double ct, double alpha, double alpha_r) {
  return {-(alpha + alpha_r * ct) * c, -alpha_r * c * ct};
}

double junction_mixing(std::span<const Inflow> inflows, double booster_flow,
                       double booster_conc, double demand,
                       std::span<const double> outflows, double prev_c,
                       JunctionDiagnostics* diag) {
  double out_sum = demand;
  for (double q : outflows) out_sum += q;
  if (out_sum <= kStagnantFlowTol) {
    if (diag) ++diag->stagnant;
    return prev_c;
  }
  double mass = booster_flow * booster_conc;
  for (const Inflow& in : inflows) mass += in.q * in.c;
  return mass / out_sum;
}

namespace {

double tank_update_raw(double volume, double c, std::span<const Inflow> inflows,
                       double booster_volume, double booster_conc,
                       double outflow_total, double reaction_rate, double dt_wq,
                       double volume_next) {
  if (!(volume > 0.0) || !(volume_next > 0.0))
    throw ValidationError("tank volume must stay positive");
  double mass = volume * c;
  for (const Inflow& in : inflows) mass += in.q * in.c * dt_wq;
  mass += booster_volume * booster_conc;
  mass -= outflow_total * c * dt_wq;
  mass += reaction_rate * volume * dt_wq;
  return mass / volume_next;
}

// Mirrors the fused advect_react kernel expression exactly (incl. rounding).
inline double advect_one(double a, double up, double b, double lambda,
                         double decay_dt, double mutual_dt, long& clamped) {
  const double adv = (1.0 - lambda) * a + lambda * up;
  const double react = (decay_dt + mutual_dt * b) * a;
  const double v = adv - react;
  if (v < 0.0) {
    ++clamped;
    return 0.0;
  }
  return v;
}

}  // namespace

double tank_update(double volume, double c, std::span<const Inflow> inflows,
                   double booster_volume, double booster_conc,
                   double outflow_total, double reaction_rate, double dt_wq,
                   double volume_next) {
  const double v = tank_update_raw(volume, c, inflows, booster_volume, booster_conc,
                                   outflow_total, reaction_rate, dt_wq, volume_next);
  return v < 0.0 ? 0.0 : v;
}

double pipe_segment_update(double c_s, double c_up, double lambda,
                           double reaction_rate, double dt_wq) {
  if (!(lambda > 0.0) || lambda > 1.0)
    throw ValidationError("Courant number must lie in (0, 1]");
  const double v = (1.0 - lambda) * c_s + lambda * c_up + reaction_rate * dt_wq;
  return v < 0.0 ? 0.0 : v;
}

// --- scenario parsing ---------------------------------------------------------

namespace {

int parse_species(const json& j, const std::string& path) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "chlorine") return kChlorine;
    if (s == "reactant") return kReactant;
  } else if (j.is_number_integer()) {
    const int v = j.get<int>();
    if (v == 1) return kChlorine;
    if (v == 2) return kReactant;
  }
  throw ParseError(path + ": species must be \"chlorine\", \"reactant\", 1 or 2");
}

}  // namespace

Scenario parse_scenario_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("scenario JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("scenario JSON: object required");

  Scenario s;
  if (doc.contains("id")) s.id = doc["id"].is_string() ? doc["id"].get<std::string>()
                                                       : doc["id"].dump();
  for (const char* key : {"Ts", "dt_wq", "dt_h"})
    if (!doc.contains(key) || !doc[key].is_number())
      throw ParseError(std::string("scenario JSON: numeric '") + key + "' required");
  s.total_time = doc["Ts"].get<double>();
  s.dt_wq = doc["dt_wq"].get<double>();
  s.dt_h = doc["dt_h"].get<double>();
  if (!(s.dt_wq > 0) || !(s.dt_h > 0) || !(s.total_time > 0))
    throw ValidationError("scenario: Ts, dt_wq, dt_h must be positive");

  const double ratio = s.dt_h / s.dt_wq;
  if (std::abs(ratio - std::round(ratio)) > 1e-9 * ratio || std::round(ratio) < 1)
    throw ValidationError("scenario: dt_h must be an integer multiple of dt_wq");
  const double n_s = s.total_time / s.dt_wq;
  if (std::abs(n_s - std::round(n_s)) > 1e-9 * n_s || std::round(n_s) < 1)
    throw ValidationError("scenario: Ts/dt_wq must be a positive integer");

  if (doc.contains("initial")) {
    int i = 0;
    for (const json& jv : doc["initial"]) {
      const std::string path = "initial[" + std::to_string(i++) + "]";
      InitialValue v;
      if (!jv.contains("node") || !jv["node"].is_string())
        throw ParseError(path + ".node: string required");
      v.node = jv["node"].get<std::string>();
      v.species = jv.contains("species") ? parse_species(jv["species"], path) : kChlorine;
      if (!jv.contains("value") || !jv["value"].is_number())
        throw ParseError(path + ".value: number required");
      v.value = jv["value"].get<double>();
      if (v.value < 0) throw ValidationError(path + ": concentration must be >= 0");
      s.initial.push_back(std::move(v));
    }
  }

  if (doc.contains("boosters")) {
    int i = 0;
    for (const json& jb : doc["boosters"]) {
      const std::string path = "boosters[" + std::to_string(i++) + "]";
      BoosterSchedule b;
      if (!jb.contains("node") || !jb["node"].is_string())
        throw ParseError(path + ".node: string required");
      b.node = jb["node"].get<std::string>();
      b.species = jb.contains("species") ? parse_species(jb["species"], path) : kChlorine;
      if (!jb.contains("schedule") || !jb["schedule"].is_array())
        throw ParseError(path + ".schedule: array required");
      for (const json& je : jb["schedule"]) {
        BoosterEntry e;
        if (!je.contains("step_range") || !je["step_range"].is_array() ||
            je["step_range"].size() != 2)
          throw ParseError(path + ".schedule: step_range [start, end) required");
        e.start_step = je["step_range"][0].get<int>();
        e.end_step = je["step_range"][1].get<int>();
        if (e.start_step < 0 || e.end_step < e.start_step)
          throw ValidationError(path + ": invalid step_range");
        if (!je.contains("concentration") || !je["concentration"].is_number())
          throw ParseError(path + ".schedule: concentration required");
        e.concentration = je["concentration"].get<double>();
        if (e.concentration < 0)
          throw ValidationError(path + ": booster concentration must be >= 0");
        if (je.contains("flow_or_volume"))
          e.flow_or_volume = je["flow_or_volume"].get<double>();
        b.entries.push_back(e);
      }
      s.boosters.push_back(std::move(b));
    }
  }

  if (doc.contains("reaction_overrides")) {
    const json& jo = doc["reaction_overrides"];
    if (!jo.is_object()) throw ParseError("reaction_overrides: object required");
    ReactionOverrides& o = s.reaction_overrides;
    for (auto& [key, val] : jo.items()) {
      if (!val.is_number()) throw ParseError("reaction_overrides." + key + ": number required");
      const double v = val.get<double>();
      if (key == "alpha_b") o.alpha_b = v;
      else if (key == "alpha_w") o.alpha_w = v;
      else if (key == "alpha_f") o.alpha_f = v;
      else if (key == "alpha_r") o.alpha_r = v;
      else if (key == "alpha_r_multiplier") o.alpha_r_multiplier = v;
      else throw ParseError("reaction_overrides." + key + ": unknown key");
    }
  }
  return s;
}

// --- simulation context ---------------------------------------------------------

SimulationContext::SimulationContext(const WaterNetwork& net, const HydraulicProfile& hyd,
                                     const Segmentation& seg, const Scenario& scn)
    : net_(&net), hyd_(&hyd), seg_(&seg), scn_(&scn) {
  wq_steps_ = static_cast<int>(std::round(scn.total_time / scn.dt_wq));
  wq_per_hyd_ = static_cast<int>(std::round(scn.dt_h / scn.dt_wq));
  if (seg.dt_wq != scn.dt_wq)
    throw ValidationError("segmentation dt_wq does not match scenario dt_wq");
  if (hyd.dt_h() > 0 && std::abs(hyd.dt_h() - scn.dt_h) > 1e-9 * scn.dt_h)
    throw ValidationError("hydraulics dt_h does not match scenario dt_h");
  if (wq_steps_ >= 2 && hydraulic_step(wq_steps_ - 2) >= hyd.steps())
    throw ValidationError("hydraulic profile too short for scenario horizon (needs " +
                          std::to_string(hydraulic_step(wq_steps_ - 2) + 1) + " steps, has " +
                          std::to_string(hyd.steps()) + ")");

  for (const InitialValue& v : scn.initial) {
    if (net.node_index(v.node) < 0)
      throw ValidationError("scenario initial value references unknown node '" + v.node + "'");
  }

  resolve_coefficients();
  resolve_boosters();
  build_node_flows();
  integrate_tank_volumes();
}

void SimulationContext::resolve_coefficients() {
  const ReactionOverrides& o = scn_->reaction_overrides;
  auto apply = [&](ReactionParams r) {
    if (o.alpha_b) r.alpha_b = *o.alpha_b;
    if (o.alpha_w) r.alpha_w = *o.alpha_w;
    if (o.alpha_f) r.alpha_f = *o.alpha_f;
    if (o.alpha_r) r.alpha_r = *o.alpha_r;
    r.alpha_r *= o.alpha_r_multiplier;
    return r;
  };

  pipe_decay_.assign(net_->link_count(), 0.0);
  pipe_mutual_.assign(net_->link_count(), 0.0);
  for (int li = 0; li < net_->link_count(); ++li) {
    const Link& l = net_->link(li);
    if (l.kind != LinkKind::pipe) continue;
    const ReactionParams r = apply(l.reactions);
    pipe_decay_[li] = wall_decay_coefficient(r.alpha_b, r.alpha_w, r.alpha_f, l.radius);
    pipe_mutual_[li] = r.alpha_r;
  }
  const ReactionParams tank = apply(net_->default_reactions());
  tank_alpha_b_ = tank.alpha_b;
  tank_alpha_r_ = tank.alpha_r;
}

void SimulationContext::resolve_boosters() {
  for (const BoosterSchedule& b : scn_->boosters) {
    const int ni = net_->node_index(b.node);
    if (ni < 0)
      throw ValidationError("booster references unknown node '" + b.node + "'");
    const NodeKind kind = net_->node(ni).kind;
    if (kind == NodeKind::reservoir)
      throw ValidationError("booster node '" + b.node + "' must be a junction or tank");

    ResolvedBooster* rb = nullptr;
    for (ResolvedBooster& existing : boosters_)
      if (existing.node == ni) rb = &existing;
    if (!rb) {
      boosters_.push_back({ni, kind == NodeKind::tank, {}, {}});
      rb = &boosters_.back();
      rb->amount.assign(wq_steps_, -1.0);  // -1 = fall back to the profile
      rb->conc[0].assign(wq_steps_, 0.0);
      rb->conc[1].assign(wq_steps_, 0.0);
    }
    for (const BoosterEntry& e : b.entries) {
      const int hi = std::min(e.end_step, wq_steps_);
      for (int k = e.start_step; k < hi; ++k) {
        rb->conc[b.species][k] = e.concentration;
        if (e.flow_or_volume) {
          if (rb->amount[k] >= 0.0 && rb->amount[k] != *e.flow_or_volume)
            throw ValidationError("booster node '" + b.node +
                                  "' has conflicting flow_or_volume at step " +
                                  std::to_string(k));
          rb->amount[k] = *e.flow_or_volume;
        }
      }
    }
  }
}

SimulationContext::BoosterInput SimulationContext::booster_at(int node, int species,
                                                              int k) const {
  const int h = std::min(hydraulic_step(k), hyd_->steps() - 1);
  const bool is_tank = net_->node(node).kind == NodeKind::tank;
  const double profile_amount =
      is_tank ? hyd_->booster_volume(h, node) : hyd_->booster_flow(h, node);
  for (const ResolvedBooster& rb : boosters_) {
    if (rb.node != node) continue;
    const double amount = rb.amount[k] >= 0.0 ? rb.amount[k] : profile_amount;
    return {rb.conc[species][k], amount};
  }
  return {0.0, profile_amount};
}

void SimulationContext::build_node_flows() {
  const int n_nodes = net_->node_count();
  node_flows_.assign(static_cast<std::size_t>(hyd_->steps()) * n_nodes, {});
  for (int h = 0; h < hyd_->steps(); ++h) {
    NodeFlows* at = node_flows_.data() + static_cast<std::size_t>(h) * n_nodes;
    for (int ni = 0; ni < n_nodes; ++ni)
      if (net_->node(ni).kind == NodeKind::junction) at[ni].demand = hyd_->demand(h, ni);
    for (int li = 0; li < net_->link_count(); ++li) {
      const Link& l = net_->link(li);
      const double q = hyd_->flow(h, li);
      if (q == 0.0) continue;
      const bool forward = q > 0.0;
      const int up = forward ? l.from : l.to;
      const int down = forward ? l.to : l.from;
      int src_base;
      if (l.kind == LinkKind::pipe) {
        const int last = forward ? seg_->segments[li] - 1 : 0;
        src_base = seg_->segment_state(0, li, last);
      } else {
        src_base = seg_->node_state(0, up);  // pump/valve pass-through
      }
      at[down].inflows.push_back({std::abs(q), src_base});
      at[up].outflow += std::abs(q);
    }
  }
}

void SimulationContext::integrate_tank_volumes() {
  const int n_nodes = net_->node_count();
  tank_volume_.assign(static_cast<std::size_t>(wq_steps_ + 1) * n_nodes, 0.0);
  for (int ni = 0; ni < n_nodes; ++ni) {
    if (net_->node(ni).kind != NodeKind::tank) continue;
    double v = hyd_->volume(0, ni);
    tank_volume_[ni] = v;
    for (int k = 0; k < wq_steps_; ++k) {
      const int h = std::min(hydraulic_step(k), hyd_->steps() - 1);
      const NodeFlows& nf = node_flows_[static_cast<std::size_t>(h) * n_nodes + ni];
      double in = 0.0;
      for (const SourcedFlow& f : nf.inflows) in += f.q;
      v += (in - nf.outflow) * scn_->dt_wq + booster_at(ni, kChlorine, k).amount;
      if (!(v > 0.0))
        throw ValidationError("tank '" + net_->node(ni).id + "' volume becomes non-positive at WQ step " +
                              std::to_string(k + 1));
      tank_volume_[static_cast<std::size_t>(k + 1) * n_nodes + ni] = v;
    }
  }
}

SegmentedState SimulationContext::initial_state() const {
  SegmentedState s;
  s.seg = seg_;
  s.k = 0;
  s.x.assign(seg_->state_size(), 0.0);
  for (const InitialValue& v : scn_->initial) {
    const int ni = net_->node_index(v.node);
    s.x[seg_->node_state(v.species, ni)] = v.value;
  }
  return s;
}

// --- stepping --------------------------------------------------------------------

SegmentedState step(const SimulationContext& ctx, const SegmentedState& state, int k,
                    SimulationDiagnostics* diag) {
  const Segmentation& seg = ctx.seg();
  const WaterNetwork& net = ctx.net();
  const int h = ctx.hydraulic_step(k);
  if (h >= ctx.hyd().steps())
    throw ValidationError("no hydraulic data for WQ step " + std::to_string(k));
  const int half = seg.half();
  const double dt = seg.dt_wq;
  const auto& kern = kernels::active();

  SegmentedState next;
  next.seg = &seg;
  next.k = k + 1;
  next.x.assign(state.x.size(), 0.0);
  const double* x = state.x.data();
  double* y = next.x.data();
  long clamped = 0;
  JunctionDiagnostics jdiag;

  // pipe segments, both species, simultaneous in x
  for (int li = 0; li < net.link_count(); ++li) {
    const Link& l = net.link(li);
    if (l.kind != LinkKind::pipe) continue;
    const int s = seg.segments[li];
    const double lambda = seg.courant(h, li);
    const bool forward = ctx.hyd().flow(h, li) >= 0.0;
    const int up_node = forward ? l.from : l.to;
    const double mutual_dt = ctx.pipe_mutual(li) * dt;
    const int base0 = seg.segment_state(0, li, 0);

    for (int sp = 0; sp < 2; ++sp) {
      const double decay_dt = sp == kChlorine ? ctx.pipe_decay(li) * dt : 0.0;
      const double* a = x + base0 + sp * half;
      const double* b = x + base0 + (1 - sp) * half;
      double* out = y + base0 + sp * half;
      const double up_value = x[seg.node_state(sp, up_node)];
      if (forward) {
        out[0] = advect_one(a[0], up_value, b[0], lambda, decay_dt, mutual_dt, clamped);
        if (s > 1)
          clamped += static_cast<long>(
              kern.advect_react(out + 1, a + 1, a, b + 1, s - 1, lambda, decay_dt, mutual_dt));
      } else {
        out[s - 1] = advect_one(a[s - 1], up_value, b[s - 1], lambda, decay_dt, mutual_dt, clamped);
        if (s > 1)
          clamped += static_cast<long>(
              kern.advect_react(out, a, a + 1, b, s - 1, lambda, decay_dt, mutual_dt));
      }
    }
  }

  // nodes
  std::vector<Inflow> inflows;
  for (int ni = 0; ni < net.node_count(); ++ni) {
    const Node& nd = net.node(ni);
    const int i0 = seg.node_state(0, ni);
    const int i1 = seg.node_state(1, ni);
    switch (nd.kind) {
      case NodeKind::reservoir:
        y[i0] = x[i0];
        y[i1] = x[i1];
        break;
      case NodeKind::junction: {
        const auto& nf = ctx.node_flows(h, ni);
        const double outflow = nf.outflow;
        for (int sp = 0; sp < 2; ++sp) {
          const auto booster = ctx.booster_at(ni, sp, k);
          inflows.clear();
          for (const auto& f : nf.inflows) inflows.push_back({f.q, x[f.src_base + sp * half]});
          const int idx = sp == 0 ? i0 : i1;
          y[idx] = junction_mixing(inflows, booster.amount, booster.concentration,
                                   nf.demand, std::span<const double>(&outflow, 1),
                                   x[idx], &jdiag);
        }
        break;
      }
      case NodeKind::tank: {
        const auto& nf = ctx.node_flows(h, ni);
        const double v_now = ctx.tank_volume(k, ni);
        const double v_next = ctx.tank_volume(k + 1, ni);
        const ReactionRates rates =
            reaction_rates(x[i0], x[i1], ctx.tank_bulk_decay(), ctx.tank_mutual());
        for (int sp = 0; sp < 2; ++sp) {
          const auto booster = ctx.booster_at(ni, sp, k);
          inflows.clear();
          for (const auto& f : nf.inflows) inflows.push_back({f.q, x[f.src_base + sp * half]});
          const double rate = sp == kChlorine ? rates.chlorine : rates.reactant;
          const int idx = sp == 0 ? i0 : i1;
          const double raw = tank_update_raw(v_now, x[idx], inflows, booster.amount,
                                             booster.concentration, nf.outflow, rate, dt, v_next);
          if (raw < 0.0) {
            y[idx] = 0.0;
            ++clamped;
          } else {
            y[idx] = raw;
          }
        }
        break;
      }
    }
  }

  if (diag) {
    diag->clamped += clamped;
    diag->stagnant += jdiag.stagnant;
  }
  return next;
}

Trajectory simulate(const SimulationContext& ctx) {
  Trajectory t;
  t.states.reserve(ctx.wq_steps());
  t.states.push_back(ctx.initial_state());
  for (int k = 0; k + 1 < ctx.wq_steps(); ++k)
    t.states.push_back(step(ctx, t.states.back(), k, &t.diagnostics));
  return t;
}

// --- measurement -------------------------------------------------------------------

SensorModel SensorModel::all_nodes(const WaterNetwork& net, bool measure_reactant) {
  SensorModel m;
  m.candidates.resize(net.node_count());
  for (int i = 0; i < net.node_count(); ++i) m.candidates[i] = i;
  m.gamma.assign(m.candidates.size(), 1);
  m.measure_reactant = measure_reactant;
  return m;
}

std::vector<int> SensorModel::selector_rows(int j, const Segmentation& seg) const {
  std::vector<int> rows{seg.node_state(kChlorine, candidates[j])};
  if (measure_reactant) rows.push_back(seg.node_state(kReactant, candidates[j]));
  return rows;
}

std::vector<double> build_measurement(const SensorModel& sensor,
                                      const SegmentedState& state) {
  std::vector<double> y;
  for (std::size_t j = 0; j < sensor.candidates.size(); ++j) {
    if (!sensor.gamma[j]) continue;
    for (int row : sensor.selector_rows(static_cast<int>(j), *state.seg))
      y.push_back(state.x[row]);
  }
  return y;
}

}  // namespace aquobs
