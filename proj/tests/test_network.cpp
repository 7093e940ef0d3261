#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "aquobs/network.hpp"
#include "support/fixtures.hpp"

using namespace aquobs;

namespace {

const char* kMinimalJson = R"({
  "nodes": [
    {"id": "R1", "kind": "reservoir"},
    {"id": "J1", "kind": "junction", "elevation": 3.5}
  ],
  "links": [
    {"id": "P1", "kind": "pipe", "from": "R1", "to": "J1", "length": 100.0, "radius": 0.15}
  ],
  "reactions": {"alpha_b": 1e-4, "alpha_w": 2e-5, "alpha_f": 3e-5, "alpha_r": 5e-4}
})";

}  // namespace

TEST_CASE("minimal network document parses") {
  const WaterNetwork net = parse_network_json(kMinimalJson);
  CHECK(net.node_count() == 2);
  CHECK(net.link_count() == 1);
  CHECK(net.count(NodeKind::reservoir) == 1);
  CHECK(net.link(0).reactions.alpha_b == 1e-4);
  CHECK(net.link(0).reactions.alpha_r == 5e-4);
}

TEST_CASE("dangling link endpoint names the missing node") {
  const char* doc = R"({
    "nodes": [{"id": "R1", "kind": "reservoir"}],
    "links": [{"id": "P1", "kind": "pipe", "from": "R1", "to": "J9",
               "length": 5.0, "radius": 0.1}]
  })";
  CHECK_THROWS_WITH_AS(parse_network_json(doc),
                       doctest::Contains("J9"), ValidationError);
}

TEST_CASE("component counts of a Net1-sized document") {
  // 9 junctions, 1 reservoir, 1 tank, 12 pipes, 1 pump
  std::string doc = R"({"nodes": [{"id": "R1", "kind": "reservoir"}, {"id": "T1", "kind": "tank"})";
  for (int i = 1; i <= 9; ++i)
    doc += ", {\"id\": \"J" + std::to_string(i) + "\", \"kind\": \"junction\"}";
  doc += R"(], "links": [{"id": "PU1", "kind": "pump", "from": "R1", "to": "J1"})";
  // a chain J1..J9 back to T1 plus extra loops, 12 pipes total
  const char* ends[12][2] = {{"J1", "J2"}, {"J2", "J3"}, {"J3", "J4"}, {"J4", "J5"},
                             {"J5", "J6"}, {"J6", "J7"}, {"J7", "J8"}, {"J8", "J9"},
                             {"J9", "T1"}, {"J2", "J5"}, {"J3", "J6"}, {"J4", "J7"}};
  for (int i = 0; i < 12; ++i) {
    doc += ", {\"id\": \"P" + std::to_string(i + 1) + "\", \"kind\": \"pipe\", \"from\": \"" +
           ends[i][0] + "\", \"to\": \"" + ends[i][1] +
           "\", \"length\": 100.0, \"radius\": 0.1}";
  }
  doc += "]}";

  const WaterNetwork net = parse_network_json(doc);
  CHECK(net.count(NodeKind::junction) == 9);
  CHECK(net.count(NodeKind::tank) == 1);
  CHECK(net.count(NodeKind::reservoir) == 1);
  CHECK(net.count(LinkKind::pipe) == 12);
  CHECK(net.count(LinkKind::pump) == 1);
}

TEST_CASE("serialize/parse round-trip preserves every field") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const auto c = testsupport::random_case(rng);
    const WaterNetwork reparsed = parse_network_json(serialize_network_json(c.net));
    CHECK(reparsed == c.net);
  }
}

TEST_CASE("per-pipe reaction overrides") {
  std::string doc = kMinimalJson;
  doc.pop_back();  // strip whitespace-insensitive trailing brace... rebuild instead
  doc = R"({
    "nodes": [{"id": "R1", "kind": "reservoir"}, {"id": "J1", "kind": "junction"},
              {"id": "J2", "kind": "junction"}],
    "links": [
      {"id": "P1", "kind": "pipe", "from": "R1", "to": "J1", "length": 10, "radius": 0.1},
      {"id": "P2", "kind": "pipe", "from": "J1", "to": "J2", "length": 10, "radius": 0.1}
    ],
    "reactions": {"alpha_b": 1e-4, "overrides": {"P2": {"alpha_b": 9e-4}}}
  })";
  const WaterNetwork net = parse_network_json(doc);
  CHECK(net.link(0).reactions.alpha_b == 1e-4);
  CHECK(net.link(1).reactions.alpha_b == 9e-4);

  const std::string needle = "overrides\": {\"P2\"";
  doc.replace(doc.find(needle), needle.size(), "overrides\": {\"P9\"");
  CHECK_THROWS_AS(parse_network_json(doc), ValidationError);
}

TEST_CASE("INP topology import") {
  const char* inp = R"(
[TITLE]
two junction line ; demo

[JUNCTIONS]
;id  elev
 J1  10.0
 J2  12.0

[PIPES]
;id  from to  length diam
 P1  J1   J2  100.0  1.0
)";
  SUBCASE("meters diameter column") {
    const WaterNetwork net = parse_inp_topology(inp, InpDiameterUnit::meters);
    CHECK(net.node_count() == 2);
    CHECK(net.link_count() == 1);
    CHECK(net.link(0).radius == doctest::Approx(0.5));
    CHECK(net.node(0).elevation == 10.0);
  }
  SUBCASE("millimeter default") {
    const WaterNetwork net = parse_inp_topology(inp);
    CHECK(net.link(0).radius == doctest::Approx(0.0005));
  }
  SUBCASE("case-insensitive sections and unknown-section warnings") {
    std::string lower = inp;
    for (char& ch : lower)
      if (ch >= 'A' && ch <= 'Z' && ch != 'J' && ch != 'P') ch = static_cast<char>(ch + 32);
    std::vector<std::string> warnings;
    const std::string with_extra = lower + "\n[patterns]\n pat1 1.0\n";
    const WaterNetwork net = parse_inp_topology(with_extra, InpDiameterUnit::meters, &warnings);
    CHECK(net.node_count() == 2);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("[PATTERNS]") != std::string::npos);
  }
  SUBCASE("missing pipes section") {
    CHECK_THROWS_WITH_AS(parse_inp_topology("[JUNCTIONS]\n J1 0\n J2 0\n"),
                         doctest::Contains("[PIPES]"), ParseError);
  }
  SUBCASE("bad numeric field carries the line number") {
    const char* broken = "[JUNCTIONS]\n J1 0\n J2 0\n[PIPES]\n P1 J1 J2 abc 1.0\n";
    CHECK_THROWS_WITH_AS(parse_inp_topology(broken), doctest::Contains("line 5"), ParseError);
  }
}

TEST_CASE("hydraulics CSV loading and mass balance") {
  const WaterNetwork net = parse_network_json(kMinimalJson);

  SUBCASE("exact balance accepted") {
    const char* csv =
        "# dt_h = 600\n"
        "step,entity_kind,entity_id,quantity,value\n"
        "0,link,P1,flow,2.0\n"
        "0,node,J1,demand,2.0\n";
    const HydraulicProfile hyd = load_hydraulics_csv(csv, net);
    CHECK(hyd.steps() == 1);
    CHECK(hyd.dt_h() == 600);
    CHECK(hyd.flow(0, 0) == 2.0);
    // velocity derived from q / (pi r^2)
    CHECK(hyd.velocity(0, 0) == doctest::Approx(2.0 / (std::numbers::pi * 0.15 * 0.15)));
  }
  SUBCASE("imbalance names junction and step") {
    const char* csv =
        "step,entity_kind,entity_id,quantity,value\n"
        "0,link,P1,flow,2.0\n"
        "0,node,J1,demand,1.0\n";
    CHECK_THROWS_WITH_AS(load_hydraulics_csv(csv, net), doctest::Contains("J1"),
                         ValidationError);
  }
  SUBCASE("flow reversal is recorded per step") {
    const char* csv =
        "step,entity_kind,entity_id,quantity,value\n"
        "0,link,P1,flow,0.1\n"
        "0,node,J1,demand,0.1\n"
        "1,link,P1,flow,-0.1\n";
    // step 1: flow leaves J1 through P1; a matching inflow must exist, so
    // model it as negative demand (external supply) at J1
    std::string with_supply = std::string(csv) + "1,node,J1,demand,-0.1\n";
    const HydraulicProfile hyd = load_hydraulics_csv(with_supply, net);
    CHECK(hyd.flow(0, 0) == 0.1);
    CHECK(hyd.flow(1, 0) == -0.1);
  }
  SUBCASE("unknown id rejected") {
    const char* csv =
        "step,entity_kind,entity_id,quantity,value\n"
        "0,link,P9,flow,2.0\n";
    CHECK_THROWS_AS(load_hydraulics_csv(csv, net), ValidationError);
  }
  SUBCASE("velocity consistent with flow accepted, inconsistent rejected") {
    const double v = 2.0 / (std::numbers::pi * 0.15 * 0.15);
    std::string csv =
        "step,entity_kind,entity_id,quantity,value\n"
        "0,link,P1,flow,2.0\n"
        "0,node,J1,demand,2.0\n"
        "0,link,P1,velocity," + std::to_string(v) + "\n";
    CHECK_NOTHROW(load_hydraulics_csv(csv, net));
    csv += "1,link,P1,flow,2.0\n1,node,J1,demand,2.0\n1,link,P1,velocity,99.0\n";
    CHECK_THROWS_AS(load_hydraulics_csv(csv, net), ValidationError);
  }
}

TEST_CASE("segmentation follows the max-velocity rule") {
  const WaterNetwork net = parse_network_json(kMinimalJson);

  SUBCASE("exact division, lambda = 1") {
    // L = 100, v = 1 m/s, dt = 10 -> 10 segments of 10 m
    const double q = 1.0 * std::numbers::pi * 0.15 * 0.15;
    HydraulicProfile hyd(1, 0, 2, 1);
    hyd.set_flow(0, 0, q);
    hyd.set_demand(0, 1, q);
    hyd.finalize(net);
    const Segmentation seg = segment_pipes(net, hyd, 10.0);
    CHECK(seg.segments[0] == 10);
    CHECK(seg.seg_length[0] == doctest::Approx(10.0));
    CHECK(seg.courant(0, 0) == doctest::Approx(1.0));
    CHECK(seg.state_size() == 2 * (2 + 10));
  }
  SUBCASE("lambda scales with the per-step velocity") {
    const double q = 1.0 * std::numbers::pi * 0.15 * 0.15;
    HydraulicProfile hyd(2, 0, 2, 1);
    hyd.set_flow(0, 0, q);
    hyd.set_demand(0, 1, q);
    hyd.set_flow(1, 0, q / 2);
    hyd.set_demand(1, 1, q / 2);
    hyd.finalize(net);
    const Segmentation seg = segment_pipes(net, hyd, 10.0);
    CHECK(seg.segments[0] == 10);
    CHECK(seg.courant(0, 0) == doctest::Approx(1.0));
    CHECK(seg.courant(1, 0) == doctest::Approx(0.5));
  }
  SUBCASE("short pipe clamps to one segment and trips the CFL check") {
    // L = 100 but dt so large that floor(L / v dt) = 0
    const double q = 1.0 * std::numbers::pi * 0.15 * 0.15;  // v = 1 m/s
    HydraulicProfile hyd(1, 0, 2, 1);
    hyd.set_flow(0, 0, q);
    hyd.set_demand(0, 1, q);
    hyd.finalize(net);
    CHECK_THROWS_WITH_AS(segment_pipes(net, hyd, 150.0), doctest::Contains("P1"),
                         ValidationError);
  }
}

TEST_CASE("segmentation state indexing is a bijection") {
  std::mt19937_64 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const auto c = testsupport::random_case(rng);
    const Segmentation& seg = c.seg;
    std::vector<int> seen(seg.state_size(), 0);
    for (int sp = 0; sp < 2; ++sp) {
      for (int ni = 0; ni < c.net.node_count(); ++ni) ++seen[seg.node_state(sp, ni)];
      for (int li = 0; li < c.net.link_count(); ++li) {
        if (c.net.link(li).kind != LinkKind::pipe) continue;
        for (int si = 0; si < seg.segments[li]; ++si) ++seen[seg.segment_state(sp, li, si)];
      }
    }
    for (int count : seen) CHECK(count == 1);
    CHECK(seg.state_size() == 2 * (c.net.node_count() + seg.total_segments));
  }
}

TEST_CASE("mass balance accepts balanced profiles and rejects perturbed ones") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    auto c = testsupport::random_case(rng);
    CHECK_NOTHROW(c.hyd.finalize(c.net));  // generator output balances exactly

    // find a junction with an incident link and break its balance
    for (int ni = 0; ni < c.net.node_count(); ++ni) {
      if (c.net.node(ni).kind != NodeKind::junction) continue;
      if (c.net.links_at(ni).empty()) continue;
      const int li = c.net.links_at(ni).front();
      HydraulicProfile broken = c.hyd;
      broken.set_flow(0, li, c.hyd.flow(0, li) + 5e-3);
      broken.set_velocity(0, li, 0.0);  // rederive from the perturbed flow
      bool threw = false;
      try {
        broken.finalize(c.net);
      } catch (const ValidationError&) {
        threw = true;
      }
      CHECK(threw);
      break;
    }
  }
}

TEST_CASE("segmentation properties on random balanced profiles") {
  std::mt19937_64 rng(19);
  for (int rep = 0; rep < 25; ++rep) {
    const auto c = testsupport::random_case(rng);
    // CFL everywhere
    for (int h = 0; h < c.hyd.steps(); ++h)
      for (int li = 0; li < c.net.link_count(); ++li) {
        if (c.net.link(li).kind != LinkKind::pipe) continue;
        CHECK(c.seg.courant(h, li) > 0.0);
        CHECK(c.seg.courant(h, li) <= 1.0);
      }
    // doubling dt never increases segment counts (single-segment pipes may
    // instead trip the CFL clamp, which is the documented error path)
    try {
      const Segmentation coarser = segment_pipes(c.net, c.hyd, 2 * c.seg.dt_wq);
      for (int li = 0; li < c.net.link_count(); ++li)
        CHECK(coarser.segments[li] <= c.seg.segments[li]);
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("CFL") != std::string::npos);
    }
  }
}
