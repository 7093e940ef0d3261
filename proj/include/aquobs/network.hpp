#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "aquobs/errors.hpp"
#include "aquobs/matrix.hpp"

namespace aquobs {

enum class NodeKind { junction, tank, reservoir };
enum class LinkKind { pipe, pump, valve };

const char* to_string(NodeKind k);
const char* to_string(LinkKind k);

// Decay/reaction coefficients. alpha_b in 1/s, alpha_w and alpha_f in m/s,
// alpha_r in L/(mg s).
struct ReactionParams {
  double alpha_b = 0.0;
  double alpha_w = 0.0;
  double alpha_f = 0.0;
  double alpha_r = 0.0;
  bool operator==(const ReactionParams&) const = default;
};

struct Node {
  std::string id;
  NodeKind kind = NodeKind::junction;
  double elevation = 0.0;  // m, informational
  bool operator==(const Node&) const = default;
};

struct Link {
  std::string id;
  LinkKind kind = LinkKind::pipe;
  int from = -1;  // node index
  int to = -1;    // node index
  double length = 0.0;  // m, pipes only
  double radius = 0.0;  // m, pipes only
  ReactionParams reactions;  // pipes only; defaults merged with overrides
  bool operator==(const Link&) const = default;
};

// Immutable after construction+validate(); safe to share across threads.
class WaterNetwork {
 public:
  int add_node(Node n);
  int add_link(Link l);
  void set_default_reactions(const ReactionParams& r) { default_reactions_ = r; }

  // Checks id uniqueness, endpoint resolution, pipe geometry positivity,
  // nonnegative reaction coefficients and weak connectivity.
  void validate() const;

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int link_count() const { return static_cast<int>(links_.size()); }
  int count(NodeKind k) const;
  int count(LinkKind k) const;

  const Node& node(int i) const { return nodes_[i]; }
  const Link& link(int i) const { return links_[i]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<Link>& links() const { return links_; }

  // -1 when absent
  int node_index(std::string_view id) const;
  int link_index(std::string_view id) const;

  // Link indices incident to a node, in insertion order.
  const std::vector<int>& links_at(int node) const { return adjacency_[node]; }

  const ReactionParams& default_reactions() const { return default_reactions_; }

  bool operator==(const WaterNetwork& o) const {
    return nodes_ == o.nodes_ && links_ == o.links_ &&
           default_reactions_ == o.default_reactions_;
  }

 private:
  std::vector<Node> nodes_;
  std::vector<Link> links_;
  std::vector<std::vector<int>> adjacency_;
  ReactionParams default_reactions_;
  std::unordered_map<std::string, int> node_index_;
  std::unordered_map<std::string, int> link_index_;
};

// --- network JSON -----------------------------------------------------------
//
// {"nodes": [{"id", "kind", "elevation"?}],
//  "links": [{"id", "kind", "from", "to", "length"?, "radius"?, "reactions"?}],
//  "reactions": {"alpha_b", "alpha_w", "alpha_f", "alpha_r",
//                "overrides"?: {<pipe id>: {...partial...}}}}

WaterNetwork parse_network_json(std::string_view text);
std::string serialize_network_json(const WaterNetwork& net);

// --- EPANET-style INP topology import ---------------------------------------

enum class InpDiameterUnit { millimeters, meters, inches };

// Imports [JUNCTIONS]/[RESERVOIRS]/[TANKS]/[PIPES]/[PUMPS]/[VALVES] sections.
// Lengths are meters; the diameter column unit is configurable. Reaction
// coefficients are left at zero for later override. Unknown sections are
// skipped (a warning is collected if `warnings` is non-null).
WaterNetwork parse_inp_topology(std::string_view text,
                                InpDiameterUnit diameter_unit = InpDiameterUnit::millimeters,
                                std::vector<std::string>* warnings = nullptr);

// --- hydraulic profile -------------------------------------------------------

// Relative tolerance for the junction mass-balance residual.
inline constexpr double kMassBalanceTol = 1e-6;

// Per-hydraulic-step exogenous data: link flows/velocities, junction demands
// and booster flows, tank volumes and booster volumes. All SI (m^3/s, m/s,
// m^3). Flows are signed with respect to the link's declared orientation.
class HydraulicProfile {
 public:
  HydraulicProfile() = default;
  HydraulicProfile(int n_steps, double dt_h, int n_nodes, int n_links);

  int steps() const { return n_steps_; }
  double dt_h() const { return dt_h_; }

  double flow(int step, int link) const { return flow_[idx_l(step, link)]; }
  double velocity(int step, int link) const { return velocity_[idx_l(step, link)]; }
  double demand(int step, int node) const { return demand_[idx_n(step, node)]; }
  double booster_flow(int step, int node) const { return booster_flow_[idx_n(step, node)]; }
  double volume(int step, int node) const { return volume_[idx_n(step, node)]; }
  double booster_volume(int step, int node) const { return booster_volume_[idx_n(step, node)]; }

  void set_flow(int step, int link, double v) { flow_[idx_l(step, link)] = v; }
  void set_velocity(int step, int link, double v) { velocity_[idx_l(step, link)] = v; }
  void set_demand(int step, int node, double v) { demand_[idx_n(step, node)] = v; }
  void set_booster_flow(int step, int node, double v) { booster_flow_[idx_n(step, node)] = v; }
  void set_volume(int step, int node, double v) { volume_[idx_n(step, node)] = v; }
  void set_booster_volume(int step, int node, double v) { booster_volume_[idx_n(step, node)] = v; }

  // Derives pipe velocities from flows (or vice versa), checks their
  // consistency where both were given, verifies junction mass balance at
  // every step and tank volume positivity. Throws ValidationError.
  void finalize(const WaterNetwork& net);

 private:
  std::size_t idx_l(int step, int link) const { return static_cast<std::size_t>(step) * n_links_ + link; }
  std::size_t idx_n(int step, int node) const { return static_cast<std::size_t>(step) * n_nodes_ + node; }

  int n_steps_ = 0;
  int n_nodes_ = 0;
  int n_links_ = 0;
  double dt_h_ = 0.0;  // 0 = unspecified (scenario supplies it)
  std::vector<double> flow_, velocity_;
  std::vector<double> demand_, booster_flow_, volume_, booster_volume_;
};

// CSV with header `step,entity_kind,entity_id,quantity,value`.
// entity_kind is `node` or `link`; quantity is one of flow, velocity,
// demand, booster_flow, volume, booster_volume. Comment lines start with
// `#`; a comment of the form `# dt_h = <seconds>` sets the hydraulic step.
HydraulicProfile load_hydraulics_csv(std::string_view text, const WaterNetwork& net);

// --- pipe segmentation -------------------------------------------------------

// CFL-safe spatial discretization. Segment counts are fixed from the maximum
// velocity over the whole horizon so the state dimension is constant.
struct Segmentation {
  double dt_wq = 0.0;
  int n_nodes = 0;
  int total_segments = 0;
  std::vector<int> segments;     // per link; 0 for pumps/valves
  std::vector<double> seg_length;  // per link; dx = L/s for pipes
  std::vector<int> seg_offset;   // per link; -1 for pumps/valves
  Matrix courant;                // hydraulic step x link

  int half() const { return n_nodes + total_segments; }
  int state_size() const { return 2 * half(); }

  // State vector layout: per species, node block then segment block.
  int node_state(int species, int node) const { return species * half() + node; }
  int segment_state(int species, int link, int seg) const {
    return species * half() + n_nodes + seg_offset[link] + seg;
  }
};

// s_i = floor(L_i / (v_i_max * dt_wq)) clamped to >= 1; errors when the
// clamp forces a Courant number above 1 at any hydraulic step.
Segmentation segment_pipes(const WaterNetwork& net, const HydraulicProfile& hyd,
                           double dt_wq);

}  // namespace aquobs
