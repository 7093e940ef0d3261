#pragma once

// Shared test fixtures: small hand-built networks, a random balanced-network
// generator, and helpers to assemble contexts without going through files.

#include <cmath>
#include <numbers>
#include <random>

#include "aquobs/dynamics.hpp"
#include "aquobs/network.hpp"

namespace aquobs::testsupport {

struct Case {
  WaterNetwork net;
  HydraulicProfile hyd;
  Segmentation seg;
  Scenario scn;
};

inline double pipe_area(double radius) { return std::numbers::pi * radius * radius; }

inline Scenario basic_scenario(double dt_wq, double dt_h, int wq_steps) {
  Scenario s;
  s.id = "test";
  s.dt_wq = dt_wq;
  s.dt_h = dt_h;
  s.total_time = dt_wq * wq_steps;
  return s;
}

// reservoir R1 --P1(s segments)--> junction J1 with demand == flow.
// Courant number is `lambda` at every hydraulic step (velocity constant).
inline Case line_case(int segments, double lambda, int wq_steps, double dt_wq = 10.0,
                      double reservoir_c = 1.0, double reservoir_ct = 0.0,
                      ReactionParams reactions = {}) {
  Case c;
  c.net.set_default_reactions(reactions);
  const int r1 = c.net.add_node({"R1", NodeKind::reservoir, 0.0});
  const int j1 = c.net.add_node({"J1", NodeKind::junction, 0.0});
  const double v = 0.5;                      // m/s
  const double radius = 0.05;                // m
  const double q = v * pipe_area(radius);    // m^3/s
  const double dx = v * dt_wq / lambda;      // so that |v| dt / dx = lambda
  Link p;
  p.id = "P1";
  p.kind = LinkKind::pipe;
  p.from = r1;
  p.to = j1;
  p.length = dx * segments;
  p.radius = radius;
  p.reactions = reactions;
  c.net.add_link(p);
  c.net.validate();

  const double dt_h = dt_wq * wq_steps;
  c.hyd = HydraulicProfile(1, dt_h, c.net.node_count(), c.net.link_count());
  c.hyd.set_flow(0, 0, q);
  c.hyd.set_demand(0, j1, q);
  c.hyd.finalize(c.net);

  // hand-built segmentation so lambda < 1 is exact even at constant velocity
  c.seg.dt_wq = dt_wq;
  c.seg.n_nodes = c.net.node_count();
  c.seg.total_segments = segments;
  c.seg.segments = {segments};
  c.seg.seg_length = {dx};
  c.seg.seg_offset = {0};
  c.seg.courant = Matrix(1, 1);
  c.seg.courant(0, 0) = lambda;

  c.scn = basic_scenario(dt_wq, dt_h, wq_steps);
  c.scn.initial.push_back({"R1", kChlorine, reservoir_c});
  if (reservoir_ct > 0) c.scn.initial.push_back({"R1", kReactant, reservoir_ct});
  return c;
}

// Closed ring T1 -> P1 -> J1 -> P2 -> J2 -> P3 -> T1 with constant circulating
// flow, no demands. Total species mass is an invariant when reactions are off.
inline Case ring_case(int wq_steps, double dt_wq = 10.0, ReactionParams reactions = {}) {
  Case c;
  c.net.set_default_reactions(reactions);
  const int t1 = c.net.add_node({"T1", NodeKind::tank, 0.0});
  const int j1 = c.net.add_node({"J1", NodeKind::junction, 0.0});
  const int j2 = c.net.add_node({"J2", NodeKind::junction, 0.0});
  const double q = 0.002;
  const double radius = 0.04;
  const double v = q / pipe_area(radius);
  auto pipe = [&](const char* id, int from, int to, double segs_frac) {
    Link p;
    p.id = id;
    p.kind = LinkKind::pipe;
    p.from = from;
    p.to = to;
    p.length = segs_frac * v * dt_wq;  // non-integer fraction -> lambda < 1
    p.radius = radius;
    p.reactions = reactions;
    c.net.add_link(p);
  };
  pipe("P1", t1, j1, 3.7);
  pipe("P2", j1, j2, 2.0);  // lambda = 1 on this one
  pipe("P3", j2, t1, 5.3);
  c.net.validate();

  const double dt_h = dt_wq * wq_steps;
  c.hyd = HydraulicProfile(1, dt_h, c.net.node_count(), c.net.link_count());
  for (int li = 0; li < 3; ++li) c.hyd.set_flow(0, li, q);
  c.hyd.set_volume(0, t1, 10.0);
  c.hyd.finalize(c.net);

  c.seg = segment_pipes(c.net, c.hyd, dt_wq);
  c.scn = basic_scenario(dt_wq, dt_h, wq_steps);
  c.scn.initial.push_back({"T1", kChlorine, 2.0});
  c.scn.initial.push_back({"T1", kReactant, 0.3});
  return c;
}

// --- random balanced tree networks ------------------------------------------

struct RandomCaseOptions {
  int min_junctions = 2;
  int max_junctions = 6;
  bool with_tank = true;
  bool with_pump = false;
  int hyd_steps = 2;
  int max_segments = 4;
  int min_wq_steps = 3;
  int max_wq_steps = 8;
  double dt_wq = 10.0;
  double reaction_scale = 1.0;  // 0 -> linear dynamics
};

// Tree rooted at a reservoir; junction demands drawn at random and edge flows
// set to subtree totals, so every junction balances exactly. Per-step demand
// pattern factors are <= 1 with the first equal to 1, which pins v_max to
// step 0 and keeps every Courant number in (0, 1].
inline Case random_case(std::mt19937_64& rng, const RandomCaseOptions& opt = {}) {
  auto unif = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  auto unif_int = [&](int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
  };

  Case c;
  ReactionParams defaults;
  defaults.alpha_b = unif(0.0, 2e-4) * opt.reaction_scale;
  defaults.alpha_w = unif(0.0, 1e-5) * opt.reaction_scale;
  defaults.alpha_f = unif(0.0, 1e-5) * opt.reaction_scale;
  defaults.alpha_r = unif(0.0, 5e-4) * opt.reaction_scale;
  c.net.set_default_reactions(defaults);

  const int n_j = unif_int(opt.min_junctions, opt.max_junctions);
  const int root = c.net.add_node({"R1", NodeKind::reservoir, 0.0});
  std::vector<int> nodes{root};
  for (int i = 0; i < n_j; ++i)
    nodes.push_back(c.net.add_node({"J" + std::to_string(i + 1), NodeKind::junction, 0.0}));
  int tank = -1;
  if (opt.with_tank) {
    tank = c.net.add_node({"T1", NodeKind::tank, 0.0});
    nodes.push_back(tank);
  }

  // attach node i to a random earlier node; remember each node's parent edge
  struct Edge {
    int from, to;
    bool pump;
  };
  std::vector<Edge> edges;
  std::vector<int> parent_edge(nodes.size(), -1);
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const int parent = nodes[unif_int(0, static_cast<int>(i) - 1)];
    const bool pump = opt.with_pump && i == 1;  // pump leaves the reservoir
    parent_edge[i] = static_cast<int>(edges.size());
    edges.push_back({parent, nodes[i], pump});
  }

  // sink draw per node: junction demand or tank fill (base pattern)
  std::vector<double> sink(nodes.size(), 0.0);
  for (std::size_t i = 1; i < nodes.size(); ++i)
    sink[i] = (nodes[i] == tank ? unif(0.2e-3, 1e-3) : unif(0.5e-3, 2e-3));

  // edge base flow = sum of sinks in the subtree hanging off it
  std::vector<double> edge_flow(edges.size(), 0.0);
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    // walk from node i up to the root, adding its sink to every edge passed
    std::size_t cur = i;
    while (parent_edge[cur] >= 0) {
      edge_flow[parent_edge[cur]] += sink[i];
      const int parent = edges[parent_edge[cur]].from;
      if (parent == root) break;
      for (std::size_t p = 1; p < nodes.size(); ++p)
        if (nodes[p] == parent) {
          cur = p;
          break;
        }
    }
  }

  // realize links; pipes sized for a target velocity and segment count
  std::vector<int> link_of_edge(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    Link l;
    l.id = (edges[e].pump ? "PU" : "P") + std::to_string(e + 1);
    l.kind = edges[e].pump ? LinkKind::pump : LinkKind::pipe;
    l.from = edges[e].from;
    l.to = edges[e].to;
    if (!edges[e].pump) {
      const double v0 = unif(0.4, 1.2);
      const int segs = unif_int(1, opt.max_segments);
      l.radius = std::sqrt(edge_flow[e] / (std::numbers::pi * v0));
      l.length = segs * (edge_flow[e] / pipe_area(l.radius)) * opt.dt_wq;
      l.reactions = defaults;
    }
    link_of_edge[e] = c.net.add_link(l);
  }
  c.net.validate();

  // demand pattern factors, first = 1
  std::vector<double> pattern{1.0};
  for (int h = 1; h < opt.hyd_steps; ++h) pattern.push_back(unif(0.5, 1.0));

  const int m = unif_int(2, 4);
  const double dt_h = m * opt.dt_wq;
  c.hyd = HydraulicProfile(opt.hyd_steps, dt_h, c.net.node_count(), c.net.link_count());
  for (int h = 0; h < opt.hyd_steps; ++h) {
    for (std::size_t e = 0; e < edges.size(); ++e)
      c.hyd.set_flow(h, link_of_edge[e], edge_flow[e] * pattern[h]);
    for (std::size_t i = 1; i < nodes.size(); ++i)
      if (nodes[i] != tank) c.hyd.set_demand(h, nodes[i], sink[i] * pattern[h]);
    if (tank >= 0) {
      // tank volume grows by the accumulated fill; keep the reported volume
      // at the window start
      double v0 = 5.0;
      for (int hh = 0; hh < h; ++hh) v0 += sink.back() * pattern[hh] * dt_h;
      c.hyd.set_volume(h, tank, v0);
    }
  }
  c.hyd.finalize(c.net);
  c.seg = segment_pipes(c.net, c.hyd, opt.dt_wq);

  const int wq_steps =
      std::min(unif_int(opt.min_wq_steps, opt.max_wq_steps), m * opt.hyd_steps);
  c.scn = basic_scenario(opt.dt_wq, dt_h, wq_steps);
  c.scn.initial.push_back({"R1", kChlorine, 2.0});
  c.scn.initial.push_back({"R1", kReactant, 0.3});
  for (std::size_t i = 1; i < nodes.size(); ++i) {
    const std::string& id = c.net.node(nodes[i]).id;
    c.scn.initial.push_back({id, kChlorine, unif(0.5, 2.0)});
    c.scn.initial.push_back({id, kReactant, unif(0.5, 2.0)});
  }
  return c;
}

// 10-node, 10-pipe network (reservoir feeding a looped tree that drains into
// a tank) with two hand-balanced demand patterns. Pattern A routes most flow
// through the J2-J4 branch, pattern B through J3-J5.
struct TwoPatternCase {
  WaterNetwork net;
  HydraulicProfile hyd_a, hyd_b;
  Scenario scn;
};

inline TwoPatternCase two_pattern_case() {
  TwoPatternCase c;
  ReactionParams rp;
  rp.alpha_b = 1e-4;
  rp.alpha_w = 5e-6;
  rp.alpha_f = 5e-6;
  rp.alpha_r = 3e-4;
  c.net.set_default_reactions(rp);
  c.net.add_node({"R1", NodeKind::reservoir, 210.0});
  c.net.add_node({"T1", NodeKind::tank, 240.0});
  for (int i = 1; i <= 8; ++i)
    c.net.add_node({"J" + std::to_string(i), NodeKind::junction, 200.0});

  struct PipeSpec {
    const char* id, *from, *to;
    double length;
  };
  const PipeSpec specs[] = {{"P1", "R1", "J1", 10.0}, {"P2", "J1", "J2", 7.5},
                            {"P3", "J1", "J3", 10.0}, {"P4", "J2", "J4", 7.5},
                            {"P5", "J3", "J5", 7.5},  {"P6", "J4", "J6", 5.0},
                            {"P7", "J5", "J6", 5.0},  {"P8", "J6", "J7", 7.5},
                            {"P9", "J7", "J8", 5.0},  {"P10", "J8", "T1", 5.0}};
  const double flows_a[] = {7e-3, 4e-3, 3e-3, 3e-3, 2e-3, 2e-3, 1e-3, 3e-3, 2e-3, 1e-3};
  const double flows_b[] = {7e-3, 2e-3, 5e-3, 1.5e-3, 3.5e-3, 1e-3, 2e-3, 3e-3, 2e-3, 1e-3};
  for (int i = 0; i < 10; ++i) {
    Link l;
    l.id = specs[i].id;
    l.kind = LinkKind::pipe;
    l.from = c.net.node_index(specs[i].from);
    l.to = c.net.node_index(specs[i].to);
    l.length = specs[i].length;
    l.radius = std::sqrt(std::max(flows_a[i], flows_b[i]) / (std::numbers::pi * 0.5));
    l.reactions = rp;
    c.net.add_link(l);
  }
  c.net.validate();

  auto build = [&](const double* flows, const double* demands) {
    HydraulicProfile hyd(2, 300.0, c.net.node_count(), c.net.link_count());
    for (int h = 0; h < 2; ++h) {
      const double scale = h == 0 ? 1.0 : 0.9;
      for (int li = 0; li < 10; ++li) hyd.set_flow(h, li, flows[li] * scale);
      for (int j = 1; j <= 8; ++j)
        hyd.set_demand(h, c.net.node_index("J" + std::to_string(j)), demands[j - 1] * scale);
      hyd.set_volume(h, c.net.node_index("T1"), 20.0 + h * 0.3);
    }
    hyd.finalize(c.net);
    return hyd;
  };
  const double dem_a[] = {0.0, 1e-3, 1e-3, 1e-3, 1e-3, 0.0, 1e-3, 1e-3};
  const double dem_b[] = {0.0, 0.5e-3, 1.5e-3, 0.5e-3, 1.5e-3, 0.0, 1e-3, 1e-3};
  c.hyd_a = build(flows_a, dem_a);
  c.hyd_b = build(flows_b, dem_b);

  c.scn = basic_scenario(5.0, 300.0, 120);
  c.scn.initial = {{"R1", kChlorine, 2.0},
                   {"R1", kReactant, 0.3},
                   {"T1", kChlorine, 0.5},
                   {"T1", kReactant, 0.05}};
  return c;
}

// A state with every entry drawn from [lo, hi]; useful for Jacobian tests
// away from the clamp kink.
inline SegmentedState random_state(std::mt19937_64& rng, const Segmentation& seg,
                                   double lo = 0.5, double hi = 4.0) {
  SegmentedState s;
  s.seg = &seg;
  s.k = 0;
  s.x.resize(seg.state_size());
  std::uniform_real_distribution<double> d(lo, hi);
  for (double& v : s.x) v = d(rng);
  return s;
}

}  // namespace aquobs::testsupport
