#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>

#include "greenwave/net.hpp"
#include "greenwave/scenarios.hpp"

using namespace greenwave;

namespace {

std::string writeTemp(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path.string();
}

const char* kMinimalNet = R"(# two nodes, one edge
NODE a 0 0
NODE b 100 0
EDGE ab a b 100 1
LANE ab 0 10
)";

} // namespace

TEST_CASE("minimal network loads") {
    auto path = writeTemp("gw_min.gwnet", kMinimalNet);
    RoadNetwork net = loadNetwork(path);
    CHECK(net.edges.size() == 1);
    CHECK(net.lights.empty());
    CHECK(net.lanes[0].speedLimit == 10.0);
}

TEST_CASE("3x3 grid has 9 lights and 12 boundary edges") {
    RoadNetwork net = genGrid(GridSpec{}, 42);
    CHECK(net.lights.size() == 9);
    int boundary = 0;
    for (const Edge& e : net.edges)
        if (net.nodes[e.from].outEdges.size() == 1 && net.nodes[e.from].light < 0) boundary++;
    CHECK(boundary == 12); // one entry edge per outer stub
}

TEST_CASE("connection referencing a missing lane fails validation") {
    auto path = writeTemp("gw_badconn.gwnet", std::string(kMinimalNet) +
                                                  "NODE c 200 0\n"
                                                  "EDGE bc b c 100 1\n"
                                                  "LANE bc 0 10\n"
                                                  "CONN ab 3 bc 0\n");
    CHECK_THROWS_AS(loadNetwork(path), ValidationError);
}

TEST_CASE("parse error carries line context") {
    auto path = writeTemp("gw_badnum.gwnet", "NODE a 0 zero\n");
    CHECK_THROWS_WITH_AS(loadNetwork(path), doctest::Contains(":1"), ParseError);
}

TEST_CASE("network round-trips byte-identically") {
    RoadNetwork net = genGrid(GridSpec{}, 7);
    std::string first = networkToString(net);
    auto path = writeTemp("gw_round.gwnet", first);
    RoadNetwork again = loadNetwork(path);
    CHECK(networkToString(again) == first);
}

TEST_CASE("demand loads sorted with pending exits") {
    RoadNetwork net = loadNetwork(writeTemp("gw_min2.gwnet", kMinimalNet));
    auto path = writeTemp("gw_dem.gwdem",
                          "ROUTE r0 0 ab\n"
                          "CAR x r0 5 0\n"
                          "CAR b r0 1 1\n"
                          "CAR a r0 1 2\n");
    Demand d = loadDemand(path, net);
    REQUIRE(d.records.size() == 3);
    CHECK(d.records[0].vehicleId == "a"); // ties broken by vehicle id
    CHECK(d.records[1].vehicleId == "b");
    CHECK(d.records[2].vehicleId == "x");
    for (const TravelRecord& r : d.records) CHECK(!r.hasExit());
}

TEST_CASE("empty demand file loads as empty list") {
    RoadNetwork net = loadNetwork(writeTemp("gw_min3.gwnet", kMinimalNet));
    Demand d = loadDemand(writeTemp("gw_empty.gwdem", "# nothing\n"), net);
    CHECK(d.records.empty());
}

TEST_CASE("disconnected route is a route-continuity error") {
    auto netPath = writeTemp("gw_disc.gwnet", std::string(kMinimalNet) +
                                                  "NODE c 200 0\n"
                                                  "NODE d 300 0\n"
                                                  "EDGE cd c d 100 1\n"
                                                  "LANE cd 0 10\n"
                                                  "EDGE bc b c 100 1\n"
                                                  "LANE bc 0 10\n");
    RoadNetwork net = loadNetwork(netPath);
    auto demPath = writeTemp("gw_disc.gwdem",
                             "ROUTE r0 0 ab cd\n"
                             "CAR x r0 0 0\n");
    CHECK_THROWS_WITH_AS(loadDemand(demPath, net), doctest::Contains("not connected"),
                         ValidationError);
}

TEST_CASE("demand round-trips and preserves the record multiset") {
    RoadNetwork net = genGrid(GridSpec{}, 3);
    Demand d = genDemand(net, 200, 500, 9);
    std::string s = demandToString(d, net);
    auto path = writeTemp("gw_dem_rt.gwdem", s);
    Demand again = loadDemand(path, net);
    REQUIRE(again.records.size() == d.records.size());
    CHECK(demandToString(again, net) == s);
}

TEST_CASE("planning detectors at 3-second spacings") {
    // single approach lane at 10 m/s: detectors every 30 m from the stop line
    auto path = writeTemp("gw_pd.gwnet",
                          "NODE a 0 0\nNODE b 160 0\nNODE c 260 0\n"
                          "EDGE ab a b 160 1\nLANE ab 0 10\n"
                          "EDGE bc b c 100 1\nLANE bc 0 10\n"
                          "CONN ab 0 bc 0\n"
                          "LIGHT L1 b\n");
    RoadNetwork net = loadNetwork(path);
    auto dets = placePlanningDetectors(net, "L1", 15.0, 3.0);
    std::vector<double> positions;
    for (const Detector& d : dets)
        if (d.lane == net.laneIndex(net.edgeIndex("ab"), 0)) positions.push_back(d.position);
    std::sort(positions.begin(), positions.end());
    std::vector<double> expect = {0, 30, 60, 90, 120, 150};
    CHECK(positions == expect);
    // the stop-line detector is local, everything upstream remote
    for (const Detector& d : dets)
        CHECK((d.position == 0 ? d.kind == DetectorKind::Local : d.kind == DetectorKind::Remote));
}

TEST_CASE("short lane with no upstream keeps only the stop-line detector") {
    auto path = writeTemp("gw_pd2.gwnet",
                          "NODE a 0 0\nNODE b 20 0\nNODE c 120 0\n"
                          "EDGE ab a b 20 1\nLANE ab 0 10\n"
                          "EDGE bc b c 100 1\nLANE bc 0 10\n"
                          "CONN ab 0 bc 0\n"
                          "LIGHT L1 b\n");
    RoadNetwork net = loadNetwork(path);
    auto dets = placePlanningDetectors(net, "L1");
    REQUIRE(dets.size() == 1);
    CHECK(dets[0].position == 0);
}

TEST_CASE("two-lane approach gets identical positions per lane") {
    auto path = writeTemp("gw_pd3.gwnet",
                          "NODE a 0 0\nNODE b 160 0\nNODE c 260 0\n"
                          "EDGE ab a b 160 2\nLANE ab 0 10\nLANE ab 1 10\n"
                          "EDGE bc b c 100 1\nLANE bc 0 10\n"
                          "CONN ab 0 bc 0\nCONN ab 1 bc 0\n"
                          "LIGHT L1 b\n");
    RoadNetwork net = loadNetwork(path);
    auto dets = placePlanningDetectors(net, "L1");
    std::vector<double> lane0, lane1;
    for (const Detector& d : dets)
        (net.lanes[d.lane].index == 0 ? lane0 : lane1).push_back(d.position);
    std::sort(lane0.begin(), lane0.end());
    std::sort(lane1.begin(), lane1.end());
    CHECK(lane0 == lane1);
    CHECK(lane0.size() == 6);
}

TEST_CASE("planning detectors cross upstream intersections") {
    // 80 m approach behind another light: detectors continue upstream
    auto path = writeTemp("gw_pd4.gwnet",
                          "NODE a 0 0\nNODE b 200 0\nNODE c 280 0\nNODE d 380 0\n"
                          "EDGE ab a b 200 1\nLANE ab 0 10\n"
                          "EDGE bc b c 80 1\nLANE bc 0 10\n"
                          "EDGE cd c d 100 1\nLANE cd 0 10\n"
                          "CONN ab 0 bc 0\nCONN bc 0 cd 0\n"
                          "LIGHT L1 c\nLIGHT L0 b\n");
    RoadNetwork net = loadNetwork(path);
    auto dets = placePlanningDetectors(net, "L1");
    int abLane = net.laneIndex(net.edgeIndex("ab"), 0);
    std::vector<double> upstream;
    for (const Detector& d : dets)
        if (d.lane == abLane) upstream.push_back(d.position);
    std::sort(upstream.begin(), upstream.end());
    // times 9,12,15 s map to 10,40,70 m up the 200 m feeder (8 s to cross bc)
    std::vector<double> expect = {10, 40, 70};
    REQUIRE(upstream.size() == 3);
    for (size_t i = 0; i < 3; ++i) CHECK(upstream[i] == doctest::Approx(expect[i]));
}

TEST_CASE("detector positions strictly increase and stay inside the lane") {
    RoadNetwork net = genGrid(GridSpec{}, 11);
    for (const LightDef& l : net.lights) {
        auto dets = placePlanningDetectors(net, l.id);
        std::map<int, std::vector<double>> byLane;
        for (const Detector& d : dets) {
            double laneLen = net.edges[net.lanes[d.lane].edge].length;
            CHECK(d.position >= 0);
            CHECK(d.position + d.zoneLength <= laneLen + 1e-9);
            byLane[d.lane].push_back(d.position);
        }
        for (auto& [lane, pos] : byLane) {
            std::sort(pos.begin(), pos.end());
            for (size_t i = 1; i < pos.size(); ++i) CHECK(pos[i] > pos[i - 1]);
        }
    }
}
