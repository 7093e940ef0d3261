#include <cmath>
#include <numbers>
#include <sstream>

#include "aquobs/network.hpp"

namespace aquobs {

HydraulicProfile::HydraulicProfile(int n_steps, double dt_h, int n_nodes, int n_links)
    : n_steps_(n_steps),
      n_nodes_(n_nodes),
      n_links_(n_links),
      dt_h_(dt_h),
      flow_(static_cast<std::size_t>(n_steps) * n_links, 0.0),
      velocity_(static_cast<std::size_t>(n_steps) * n_links, 0.0),
      demand_(static_cast<std::size_t>(n_steps) * n_nodes, 0.0),
      booster_flow_(static_cast<std::size_t>(n_steps) * n_nodes, 0.0),
      volume_(static_cast<std::size_t>(n_steps) * n_nodes, 0.0),
      booster_volume_(static_cast<std::size_t>(n_steps) * n_nodes, 0.0) {}

void HydraulicProfile::finalize(const WaterNetwork& net) {
  // velocity <-> flow consistency on pipes: v = q / (pi r^2)
  for (int li = 0; li < net.link_count(); ++li) {
    const Link& l = net.link(li);
    if (l.kind != LinkKind::pipe) continue;
    const double area = std::numbers::pi * l.radius * l.radius;
    for (int k = 0; k < n_steps_; ++k) {
      const double q = flow(k, li);
      double& v = velocity_[idx_l(k, li)];
      const double derived = q / area;
      if (v == 0.0 && q != 0.0) {
        v = derived;
      } else if (v != 0.0 && q == 0.0) {
        flow_[idx_l(k, li)] = v * area;
      } else if (v != 0.0 || q != 0.0) {
        const double denom = std::max({1.0, std::abs(v), std::abs(derived)});
        if (std::abs(v - derived) > 1e-6 * denom)
          throw ValidationError("pipe '" + l.id + "' step " + std::to_string(k) +
                                ": velocity " + std::to_string(v) +
                                " inconsistent with flow-derived " + std::to_string(derived));
      }
    }
  }

  // junction mass balance: |sum(in) + q_B - sum(out) - q_D| <= tol * max(1, sum(in))
  for (int ni = 0; ni < net.node_count(); ++ni) {
    const Node& nd = net.node(ni);
    if (nd.kind != NodeKind::junction) continue;
    for (int k = 0; k < n_steps_; ++k) {
      double in = 0.0, out = 0.0;
      for (int li : net.links_at(ni)) {
        const Link& l = net.link(li);
        const double q = flow(k, li);
        if (l.to == ni) (q >= 0 ? in : out) += std::abs(q);
        if (l.from == ni) (q >= 0 ? out : in) += std::abs(q);
      }
      const double residual = in + booster_flow(k, ni) - out - demand(k, ni);
      if (std::abs(residual) > kMassBalanceTol * std::max(1.0, in))
        throw ValidationError("mass balance violated at junction '" + nd.id +
                              "' step " + std::to_string(k) + " (residual " +
                              std::to_string(residual) + " m^3/s)");
    }
  }

  for (int ni = 0; ni < net.node_count(); ++ni) {
    if (net.node(ni).kind != NodeKind::tank) continue;
    for (int k = 0; k < n_steps_; ++k)
      if (!(volume(k, ni) > 0.0))
        throw ValidationError("tank '" + net.node(ni).id + "' has non-positive volume at step " +
                              std::to_string(k));
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) {
    // trim
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? "" : field.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

HydraulicProfile load_hydraulics_csv(std::string_view text, const WaterNetwork& net) {
  struct Row {
    int step;
    bool is_node;
    int entity;
    std::string quantity;
    double value;
  };
  std::vector<Row> rows;
  double dt_h = 0.0;
  int max_step = -1;

  std::istringstream stream{std::string(text)};
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(stream, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#') {
      // `# dt_h = 3600` style comment carries the hydraulic step length
      const auto pos = line.find("dt_h");
      if (pos != std::string::npos) {
        const auto eq = line.find_first_of("=,", pos);
        if (eq != std::string::npos) dt_h = std::atof(line.c_str() + eq + 1);
      }
      continue;
    }
    const auto fields = split_csv(line);
    if (fields.empty() || (fields.size() == 1 && fields[0].empty())) continue;
    if (!header_seen) {
      if (fields != std::vector<std::string>{"step", "entity_kind", "entity_id", "quantity", "value"})
        throw ParseError("hydraulics CSV line " + std::to_string(line_no) +
                         ": expected header step,entity_kind,entity_id,quantity,value");
      header_seen = true;
      continue;
    }
    if (fields.size() != 5)
      throw ParseError("hydraulics CSV line " + std::to_string(line_no) + ": expected 5 fields");

    Row r;
    try {
      r.step = std::stoi(fields[0]);
      r.value = std::stod(fields[4]);
    } catch (const std::exception&) {
      throw ParseError("hydraulics CSV line " + std::to_string(line_no) + ": bad number");
    }
    if (r.step < 0)
      throw ParseError("hydraulics CSV line " + std::to_string(line_no) + ": negative step");

    if (fields[1] == "node") {
      r.is_node = true;
      r.entity = net.node_index(fields[2]);
    } else if (fields[1] == "link") {
      r.is_node = false;
      r.entity = net.link_index(fields[2]);
    } else {
      throw ParseError("hydraulics CSV line " + std::to_string(line_no) +
                       ": entity_kind must be node or link");
    }
    if (r.entity < 0)
      throw ValidationError("hydraulics CSV line " + std::to_string(line_no) + ": unknown " +
                            fields[1] + " id '" + fields[2] + "'");
    r.quantity = fields[3];
    max_step = std::max(max_step, r.step);
    rows.push_back(std::move(r));
  }

  if (!header_seen) throw ParseError("hydraulics CSV: missing header");
  if (max_step < 0) throw ParseError("hydraulics CSV: no data rows");

  HydraulicProfile hyd(max_step + 1, dt_h, net.node_count(), net.link_count());
  for (const Row& r : rows) {
    if (r.is_node) {
      const NodeKind kind = net.node(r.entity).kind;
      if (r.quantity == "demand" || r.quantity == "booster_flow") {
        if (kind != NodeKind::junction)
          throw ValidationError("hydraulics CSV: " + r.quantity + " given for non-junction '" +
                                net.node(r.entity).id + "'");
        if (r.quantity == "demand")
          hyd.set_demand(r.step, r.entity, r.value);
        else
          hyd.set_booster_flow(r.step, r.entity, r.value);
      } else if (r.quantity == "volume" || r.quantity == "booster_volume") {
        if (kind != NodeKind::tank)
          throw ValidationError("hydraulics CSV: " + r.quantity + " given for non-tank '" +
                                net.node(r.entity).id + "'");
        if (r.quantity == "volume")
          hyd.set_volume(r.step, r.entity, r.value);
        else
          hyd.set_booster_volume(r.step, r.entity, r.value);
      } else {
        throw ParseError("hydraulics CSV: unknown node quantity '" + r.quantity + "'");
      }
    } else {
      if (r.quantity == "flow")
        hyd.set_flow(r.step, r.entity, r.value);
      else if (r.quantity == "velocity")
        hyd.set_velocity(r.step, r.entity, r.value);
      else
        throw ParseError("hydraulics CSV: unknown link quantity '" + r.quantity + "'");
    }
  }

  hyd.finalize(net);
  return hyd;
}

Segmentation segment_pipes(const WaterNetwork& net, const HydraulicProfile& hyd, double dt_wq) {
  if (!(dt_wq > 0.0)) throw ValidationError("dt_wq must be positive");

  Segmentation seg;
  seg.dt_wq = dt_wq;
  seg.n_nodes = net.node_count();
  seg.segments.assign(net.link_count(), 0);
  seg.seg_length.assign(net.link_count(), 0.0);
  seg.seg_offset.assign(net.link_count(), -1);
  seg.courant = Matrix(hyd.steps(), net.link_count());

  int offset = 0;
  for (int li = 0; li < net.link_count(); ++li) {
    const Link& l = net.link(li);
    if (l.kind != LinkKind::pipe) continue;

    double v_max = 0.0;
    for (int k = 0; k < hyd.steps(); ++k)
      v_max = std::max(v_max, std::abs(hyd.velocity(k, li)));

    int s = 1;
    if (v_max > 0.0)
      s = std::max(1, static_cast<int>(std::floor(l.length / (v_max * dt_wq))));
    seg.segments[li] = s;
    seg.seg_length[li] = l.length / s;
    seg.seg_offset[li] = offset;
    offset += s;

    for (int k = 0; k < hyd.steps(); ++k) {
      double lam = std::abs(hyd.velocity(k, li)) * dt_wq / seg.seg_length[li];
      if (lam > 1.0 && lam <= 1.0 + 16 * 1e-16) lam = 1.0;  // rounding guard
      if (lam > 1.0)
        throw ValidationError("CFL violated on pipe '" + l.id + "' at hydraulic step " +
                              std::to_string(k) + " (Courant " + std::to_string(lam) +
                              "); reduce dt_wq");
      seg.courant(k, li) = lam;
    }
  }
  seg.total_segments = offset;
  return seg;
}

}  // namespace aquobs
