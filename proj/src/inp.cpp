#include <algorithm>
#include <cctype>
#include <sstream>

#include "aquobs/network.hpp"

// EPANET-style INP topology import. Only the component sections are read;
// everything else ([PATTERNS], [CURVES], options...) is skipped with a
// warning so the file can still drive the toolkit after reaction
// coefficients are supplied separately.

namespace aquobs {
namespace {

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  return s;
}

std::string strip_comment(const std::string& line) {
  const auto pos = line.find(';');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

std::vector<std::string> tokens(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

double parse_num(const std::string& tok, int line_no) {
  std::size_t pos = 0;
  double v = 0;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != tok.size())
    throw ParseError("INP line " + std::to_string(line_no) + ": cannot parse number '" + tok + "'");
  return v;
}

}  // namespace

WaterNetwork parse_inp_topology(std::string_view text, InpDiameterUnit diameter_unit,
                                std::vector<std::string>* warnings) {
  double diam_to_m = 1e-3;
  if (diameter_unit == InpDiameterUnit::meters) diam_to_m = 1.0;
  if (diameter_unit == InpDiameterUnit::inches) diam_to_m = 0.0254;

  WaterNetwork net;
  std::string section;
  bool saw_junctions = false, saw_pipes = false;

  struct PendingLink {
    Link link;
    std::string from, to;
    int line_no;
  };
  std::vector<PendingLink> pending;

  std::istringstream stream{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const std::string line = strip_comment(raw);
    const auto toks = tokens(line);
    if (toks.empty()) continue;

    if (toks[0].front() == '[') {
      section = upper(toks[0]);
      if (section == "[JUNCTIONS]") saw_junctions = true;
      if (section == "[PIPES]") saw_pipes = true;
      const bool known = section == "[JUNCTIONS]" || section == "[RESERVOIRS]" ||
                         section == "[TANKS]" || section == "[PIPES]" ||
                         section == "[PUMPS]" || section == "[VALVES]" ||
                         section == "[TITLE]" || section == "[END]";
      if (!known && warnings)
        warnings->push_back("INP section " + section + " ignored");
      continue;
    }

    if (section == "[JUNCTIONS]") {
      Node n{toks[0], NodeKind::junction, 0.0};
      if (toks.size() > 1) n.elevation = parse_num(toks[1], line_no);
      net.add_node(std::move(n));
    } else if (section == "[RESERVOIRS]") {
      Node n{toks[0], NodeKind::reservoir, 0.0};
      if (toks.size() > 1) n.elevation = parse_num(toks[1], line_no);
      net.add_node(std::move(n));
    } else if (section == "[TANKS]") {
      Node n{toks[0], NodeKind::tank, 0.0};
      if (toks.size() > 1) n.elevation = parse_num(toks[1], line_no);
      net.add_node(std::move(n));
    } else if (section == "[PIPES]") {
      if (toks.size() < 5)
        throw ParseError("INP line " + std::to_string(line_no) +
                         ": pipe row needs id, nodes, length, diameter");
      Link l;
      l.id = toks[0];
      l.kind = LinkKind::pipe;
      l.length = parse_num(toks[3], line_no);
      l.radius = 0.5 * parse_num(toks[4], line_no) * diam_to_m;
      pending.push_back({std::move(l), toks[1], toks[2], line_no});
    } else if (section == "[PUMPS]" || section == "[VALVES]") {
      if (toks.size() < 3)
        throw ParseError("INP line " + std::to_string(line_no) + ": link row needs id and two nodes");
      Link l;
      l.id = toks[0];
      l.kind = section == "[PUMPS]" ? LinkKind::pump : LinkKind::valve;
      pending.push_back({std::move(l), toks[1], toks[2], line_no});
    }
    // other sections: skipped
  }

  if (!saw_junctions) throw ParseError("[JUNCTIONS] section required");
  if (!saw_pipes) throw ParseError("[PIPES] section required");

  for (PendingLink& p : pending) {
    p.link.from = net.node_index(p.from);
    p.link.to = net.node_index(p.to);
    if (p.link.from < 0)
      throw ValidationError("link '" + p.link.id + "' references missing node '" + p.from + "'");
    if (p.link.to < 0)
      throw ValidationError("link '" + p.link.id + "' references missing node '" + p.to + "'");
    if (p.link.kind == LinkKind::pipe) p.link.reactions = net.default_reactions();
    net.add_link(std::move(p.link));
  }

  net.validate();
  return net;
}

}  // namespace aquobs
