#include "aquobs/network.hpp"

#include <json.hpp>

#include <deque>

namespace aquobs {

using json = nlohmann::ordered_json;

const char* to_string(NodeKind k) {
  switch (k) {
    case NodeKind::junction: return "junction";
    case NodeKind::tank: return "tank";
    case NodeKind::reservoir: return "reservoir";
  }
  return "?";
}

const char* to_string(LinkKind k) {
  switch (k) {
    case LinkKind::pipe: return "pipe";
    case LinkKind::pump: return "pump";
    case LinkKind::valve: return "valve";
  }
  return "?";
}

int WaterNetwork::add_node(Node n) {
  const int idx = static_cast<int>(nodes_.size());
  node_index_.emplace(n.id, idx);
  nodes_.push_back(std::move(n));
  adjacency_.emplace_back();
  return idx;
}

int WaterNetwork::add_link(Link l) {
  const int idx = static_cast<int>(links_.size());
  link_index_.emplace(l.id, idx);
  if (l.from >= 0 && l.from < node_count()) adjacency_[l.from].push_back(idx);
  if (l.to >= 0 && l.to < node_count()) adjacency_[l.to].push_back(idx);
  links_.push_back(std::move(l));
  return idx;
}

int WaterNetwork::node_index(std::string_view id) const {
  auto it = node_index_.find(std::string(id));
  return it == node_index_.end() ? -1 : it->second;
}

int WaterNetwork::link_index(std::string_view id) const {
  auto it = link_index_.find(std::string(id));
  return it == link_index_.end() ? -1 : it->second;
}

int WaterNetwork::count(NodeKind k) const {
  int n = 0;
  for (const Node& nd : nodes_) n += nd.kind == k;
  return n;
}

int WaterNetwork::count(LinkKind k) const {
  int n = 0;
  for (const Link& l : links_) n += l.kind == k;
  return n;
}

void WaterNetwork::validate() const {
  if (nodes_.empty()) throw ValidationError("network has no nodes");
  if (node_index_.size() != nodes_.size())
    throw ValidationError("duplicate node id");
  if (link_index_.size() != links_.size())
    throw ValidationError("duplicate link id");
  if (default_reactions_.alpha_b < 0 || default_reactions_.alpha_w < 0 ||
      default_reactions_.alpha_f < 0 || default_reactions_.alpha_r < 0)
    throw ValidationError("default reaction coefficients must be >= 0");

  for (const Link& l : links_) {
    if (l.from < 0 || l.from >= node_count() || l.to < 0 || l.to >= node_count())
      throw ValidationError("link '" + l.id + "' references a missing node");
    if (l.kind == LinkKind::pipe) {
      if (!(l.length > 0.0))
        throw ValidationError("pipe '" + l.id + "' has non-positive length");
      if (!(l.radius > 0.0))
        throw ValidationError("pipe '" + l.id + "' has non-positive radius");
      const ReactionParams& r = l.reactions;
      if (r.alpha_b < 0 || r.alpha_w < 0 || r.alpha_f < 0 || r.alpha_r < 0)
        throw ValidationError("pipe '" + l.id + "' has a negative reaction coefficient");
    }
  }

  // weak connectivity
  std::vector<char> seen(nodes_.size(), 0);
  std::deque<int> queue{0};
  seen[0] = 1;
  while (!queue.empty()) {
    const int n = queue.front();
    queue.pop_front();
    for (int li : adjacency_[n]) {
      const Link& l = links_[li];
      for (int other : {l.from, l.to}) {
        if (!seen[other]) {
          seen[other] = 1;
          queue.push_back(other);
        }
      }
    }
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (!seen[i])
      throw ValidationError("network is disconnected: node '" + nodes_[i].id +
                            "' is unreachable");
}

namespace {

NodeKind node_kind_from(const std::string& s, const std::string& path) {
  if (s == "junction") return NodeKind::junction;
  if (s == "tank") return NodeKind::tank;
  if (s == "reservoir") return NodeKind::reservoir;
  throw ParseError(path + ": unknown node kind '" + s + "'");
}

LinkKind link_kind_from(const std::string& s, const std::string& path) {
  if (s == "pipe") return LinkKind::pipe;
  if (s == "pump") return LinkKind::pump;
  if (s == "valve") return LinkKind::valve;
  throw ParseError(path + ": unknown link kind '" + s + "'");
}

double require_number(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key) || !j[key].is_number())
    throw ParseError(path + "." + key + ": number required");
  return j[key].get<double>();
}

std::string require_string(const json& j, const char* key, const std::string& path) {
  if (!j.contains(key) || !j[key].is_string())
    throw ParseError(path + "." + key + ": string required");
  return j[key].get<std::string>();
}

void merge_reactions(ReactionParams& r, const json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": reaction object required");
  for (auto& [key, val] : j.items()) {
    if (key == "overrides") continue;  // handled by the caller
    if (!val.is_number()) throw ParseError(path + "." + key + ": number required");
    const double v = val.get<double>();
    if (key == "alpha_b") r.alpha_b = v;
    else if (key == "alpha_w") r.alpha_w = v;
    else if (key == "alpha_f") r.alpha_f = v;
    else if (key == "alpha_r") r.alpha_r = v;
    else throw ParseError(path + "." + key + ": unknown reaction coefficient");
  }
}

}  // namespace

WaterNetwork parse_network_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("network JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("nodes") || !doc["nodes"].is_array() ||
      !doc.contains("links") || !doc["links"].is_array())
    throw ParseError("network JSON: top-level 'nodes' and 'links' arrays required");

  WaterNetwork net;

  ReactionParams defaults;
  const json* overrides = nullptr;
  if (doc.contains("reactions")) {
    merge_reactions(defaults, doc["reactions"], "reactions");
    if (doc["reactions"].contains("overrides")) {
      overrides = &doc["reactions"]["overrides"];
      if (!overrides->is_object())
        throw ParseError("reactions.overrides: object required");
    }
  }
  net.set_default_reactions(defaults);

  int i = 0;
  for (const json& jn : doc["nodes"]) {
    const std::string path = "nodes[" + std::to_string(i++) + "]";
    Node n;
    n.id = require_string(jn, "id", path);
    n.kind = node_kind_from(require_string(jn, "kind", path), path);
    if (jn.contains("elevation")) n.elevation = require_number(jn, "elevation", path);
    net.add_node(std::move(n));
  }

  i = 0;
  for (const json& jl : doc["links"]) {
    const std::string path = "links[" + std::to_string(i++) + "]";
    Link l;
    l.id = require_string(jl, "id", path);
    l.kind = link_kind_from(require_string(jl, "kind", path), path);
    const std::string from = require_string(jl, "from", path);
    const std::string to = require_string(jl, "to", path);
    l.from = net.node_index(from);
    l.to = net.node_index(to);
    if (l.from < 0)
      throw ValidationError("link '" + l.id + "' references missing node '" + from + "'");
    if (l.to < 0)
      throw ValidationError("link '" + l.id + "' references missing node '" + to + "'");
    if (l.kind == LinkKind::pipe) {
      l.length = require_number(jl, "length", path);
      l.radius = require_number(jl, "radius", path);
      l.reactions = defaults;
      if (jl.contains("reactions"))
        merge_reactions(l.reactions, jl["reactions"], path + ".reactions");
      if (overrides && overrides->contains(l.id))
        merge_reactions(l.reactions, (*overrides)[l.id], "reactions.overrides." + l.id);
    }
    net.add_link(std::move(l));
  }

  if (overrides) {
    for (auto& [pipe_id, coeffs] : overrides->items()) {
      (void)coeffs;
      const int li = net.link_index(pipe_id);
      if (li < 0 || net.link(li).kind != LinkKind::pipe)
        throw ValidationError("reactions.overrides: unknown pipe '" + pipe_id + "'");
    }
  }

  net.validate();
  return net;
}

std::string serialize_network_json(const WaterNetwork& net) {
  json doc;
  doc["nodes"] = json::array();
  for (const Node& n : net.nodes()) {
    json jn{{"id", n.id}, {"kind", to_string(n.kind)}, {"elevation", n.elevation}};
    doc["nodes"].push_back(std::move(jn));
  }
  doc["links"] = json::array();
  for (const Link& l : net.links()) {
    json jl{{"id", l.id},
            {"kind", to_string(l.kind)},
            {"from", net.node(l.from).id},
            {"to", net.node(l.to).id}};
    if (l.kind == LinkKind::pipe) {
      jl["length"] = l.length;
      jl["radius"] = l.radius;
      jl["reactions"] = {{"alpha_b", l.reactions.alpha_b},
                         {"alpha_w", l.reactions.alpha_w},
                         {"alpha_f", l.reactions.alpha_f},
                         {"alpha_r", l.reactions.alpha_r}};
    }
    doc["links"].push_back(std::move(jl));
  }
  const ReactionParams& d = net.default_reactions();
  doc["reactions"] = {{"alpha_b", d.alpha_b},
                      {"alpha_w", d.alpha_w},
                      {"alpha_f", d.alpha_f},
                      {"alpha_r", d.alpha_r}};
  return doc.dump(2) + "\n";
}

}  // namespace aquobs
