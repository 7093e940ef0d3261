#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aquobs/network.hpp"

namespace aquobs {

// Species indices within the state vector.
inline constexpr int kChlorine = 0;
inline constexpr int kReactant = 1;

// Junctions with total outflow+demand below this hold their previous value.
inline constexpr double kStagnantFlowTol = 1e-12;

// --- component update laws ---------------------------------------------------

// Effective first-order pipe decay rate combining bulk decay with the
// wall-reaction / mass-transfer term:
//   alpha_b + 2 alpha_w alpha_f / (r (alpha_w + alpha_f))
// Returns alpha_b when alpha_w = alpha_f = 0.
double wall_decay_coefficient(double alpha_b, double alpha_w, double alpha_f,
                              double radius);

struct ReactionRates {
  double chlorine;  // -(alpha + alpha_r * ct) * c
  double reactant;  // -alpha_r * c * ct
};

// First-order decay plus bilinear mutual reaction; `alpha` is the pipe wall
// coefficient in pipes and the bulk coefficient in tanks.
ReactionRates reaction_rates(double c, double ct, double alpha, double alpha_r);

struct Inflow {
  double q;  // m^3/s, magnitude
  double c;  // mg/L
};

struct JunctionDiagnostics {
  long stagnant = 0;
};

// Flow-weighted instantaneous mixing:
//   (sum q_in c_in + q_B c_B) / (q_D + sum q_out)
// A stagnant junction (denominator below kStagnantFlowTol) keeps prev_c.
double junction_mixing(std::span<const Inflow> inflows, double booster_flow,
                       double booster_conc, double demand,
                       std::span<const double> outflows, double prev_c,
                       JunctionDiagnostics* diag = nullptr);

// CSTR balance over one step, clamped at zero:
//   c+ = (V c + sum q_in c_in dt + V_B c_B - Q_out c dt + R V dt) / V_next
double tank_update(double volume, double c, std::span<const Inflow> inflows,
                   double booster_volume, double booster_conc,
                   double outflow_total, double reaction_rate, double dt_wq,
                   double volume_next);

// Explicit upwind step for one pipe segment, clamped at zero:
//   c+ = (1 - lambda) c_s + lambda c_up + R dt
double pipe_segment_update(double c_s, double c_up, double lambda,
                           double reaction_rate, double dt_wq);

// --- scenario -----------------------------------------------------------------

struct InitialValue {
  std::string node;
  int species = kChlorine;
  double value = 0.0;
};

struct BoosterEntry {
  int start_step = 0;  // WQ steps, half-open [start, end)
  int end_step = 0;
  double concentration = 0.0;
  std::optional<double> flow_or_volume;  // m^3/s at junctions, m^3 per WQ step at tanks
};

struct BoosterSchedule {
  std::string node;
  int species = kChlorine;
  std::vector<BoosterEntry> entries;
};

struct ReactionOverrides {
  std::optional<double> alpha_b, alpha_w, alpha_f, alpha_r;
  double alpha_r_multiplier = 1.0;
};

// One demand-pattern case: horizon, time steps, initial concentrations,
// booster schedule, reaction-coefficient overrides.
struct Scenario {
  std::string id;
  double total_time = 0.0;  // s
  double dt_wq = 0.0;       // s
  double dt_h = 0.0;        // s, integer multiple of dt_wq
  std::vector<InitialValue> initial;  // node values; pipe segments start at 0
  std::vector<BoosterSchedule> boosters;
  ReactionOverrides reaction_overrides;
};

Scenario parse_scenario_json(std::string_view text);

// --- state and stepping -------------------------------------------------------

struct SegmentedState {
  std::vector<double> x;  // length seg->state_size(), mg/L
  int k = 0;
  const Segmentation* seg = nullptr;
};

struct SimulationDiagnostics {
  long clamped = 0;   // negative concentrations clamped to zero
  long stagnant = 0;  // junction updates held for lack of outflow
};

// Immutable bundle of network + hydraulics + segmentation + scenario with all
// per-step coefficients resolved up front (pipe decay rates, booster lookups,
// WQ-resolution tank volumes). Construction validates cross-references.
class SimulationContext {
 public:
  SimulationContext(const WaterNetwork& net, const HydraulicProfile& hyd,
                    const Segmentation& seg, const Scenario& scn);

  const WaterNetwork& net() const { return *net_; }
  const HydraulicProfile& hyd() const { return *hyd_; }
  const Segmentation& seg() const { return *seg_; }
  const Scenario& scenario() const { return *scn_; }

  int wq_steps() const { return wq_steps_; }              // N_s
  int wq_per_hydraulic() const { return wq_per_hyd_; }
  int hydraulic_step(int k) const { return k / wq_per_hyd_; }

  double pipe_decay(int link) const { return pipe_decay_[link]; }   // 1/s
  double pipe_mutual(int link) const { return pipe_mutual_[link]; } // L/(mg s)
  double tank_bulk_decay() const { return tank_alpha_b_; }
  double tank_mutual() const { return tank_alpha_r_; }

  // Tank volume at WQ step k (0..N_s), integrated from net inflow so the
  // CSTR balance conserves mass exactly within hydraulic windows.
  double tank_volume(int k, int node) const {
    return tank_volume_[static_cast<std::size_t>(k) * net_->node_count() + node];
  }

  // Booster injection for (node, species) at WQ step k: concentration and
  // flow (junction, m^3/s) or volume (tank, m^3). Zeroes when no schedule
  // entry covers k.
  struct BoosterInput {
    double concentration = 0.0;
    double amount = 0.0;
  };
  BoosterInput booster_at(int node, int species, int k) const;

  // Hydraulic topology resolved per hydraulic step.
  struct SourcedFlow {
    double q;       // m^3/s, magnitude
    int src_base;   // chlorine state index of the arriving concentration
  };
  struct NodeFlows {
    double demand = 0.0;
    double outflow = 0.0;
    std::vector<SourcedFlow> inflows;
  };
  const NodeFlows& node_flows(int h, int node) const {
    return node_flows_[static_cast<std::size_t>(h) * net_->node_count() + node];
  }

  SegmentedState initial_state() const;

 private:
  void resolve_coefficients();
  void resolve_boosters();
  void build_node_flows();
  void integrate_tank_volumes();

  const WaterNetwork* net_;
  const HydraulicProfile* hyd_;
  const Segmentation* seg_;
  const Scenario* scn_;

  int wq_steps_ = 0;
  int wq_per_hyd_ = 1;
  std::vector<double> pipe_decay_, pipe_mutual_;
  double tank_alpha_b_ = 0.0, tank_alpha_r_ = 0.0;
  std::vector<double> tank_volume_;
  std::vector<NodeFlows> node_flows_;

  struct ResolvedBooster {
    int node;
    bool is_tank;
    std::vector<double> amount;               // per WQ step; -1 = use the profile value
    std::array<std::vector<double>, 2> conc;  // per species, per WQ step
  };
  std::vector<ResolvedBooster> boosters_;
};

// Advances the full network state by one WQ step. All component updates read
// only step-k values (simultaneous update), so write order is immaterial.
SegmentedState step(const SimulationContext& ctx, const SegmentedState& state,
                    int k, SimulationDiagnostics* diag = nullptr);

struct Trajectory {
  std::vector<SegmentedState> states;  // length N_s; states[0] = x0
  SimulationDiagnostics diagnostics;
};

Trajectory simulate(const SimulationContext& ctx);

// --- measurement ---------------------------------------------------------------

// Candidate sensor locations (node indices) with a 0/1 activation vector.
// A sensor reads the chlorine state of its node and, when configured, the
// reactant state as well.
struct SensorModel {
  std::vector<int> candidates;     // node indices, ordered
  std::vector<uint8_t> gamma;      // 0/1 activation per candidate
  bool measure_reactant = false;

  static SensorModel all_nodes(const WaterNetwork& net, bool measure_reactant = false);

  // State indices read by candidate j (chlorine first).
  std::vector<int> selector_rows(int j, const Segmentation& seg) const;
  int rows_per_sensor() const { return measure_reactant ? 2 : 1; }
};

// y = compressed Gamma C x: stacked readings of the active sensors in
// candidate order.
std::vector<double> build_measurement(const SensorModel& sensor,
                                      const SegmentedState& state);

}  // namespace aquobs
