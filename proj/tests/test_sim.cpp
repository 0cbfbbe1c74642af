#include <doctest.h>

#include <cmath>
#include <map>

#include "greenwave/controllers.hpp"
#include "greenwave/scenarios.hpp"

using namespace greenwave;

namespace {

RoadNetwork straightRoad(double length, double limit, int lanes = 1) {
    RoadNetwork net;
    net.nodes.push_back({"a", 0, 0, {}, {}, -1});
    net.nodes.push_back({"b", length, 0, {}, {}, -1});
    Edge e;
    e.id = "ab";
    e.from = 0;
    e.to = 1;
    e.length = length;
    e.laneCount = lanes;
    e.firstLane = 0;
    net.edges.push_back(e);
    for (int i = 0; i < lanes; ++i) {
        Lane l;
        l.edge = 0;
        l.index = i;
        l.speedLimit = limit;
        net.lanes.push_back(l);
    }
    net.rebuildIndexes();
    net.validate();
    return net;
}

Demand singleCar(const RoadNetwork& net, double entry, int vtype = 1) {
    Demand d;
    Route r;
    r.id = "r0";
    for (size_t e = 0; e < net.edges.size(); ++e) r.edges.push_back(static_cast<int>(e));
    d.routes.push_back(r);
    TravelRecord rec;
    rec.vehicleId = "c0";
    rec.route = 0;
    rec.entry = entry;
    rec.vehicleType = vtype;
    d.records.push_back(rec);
    d.rebuildIndexes();
    return d;
}

// two-edge road with a light between them
RoadNetwork signalRoad(double approachLen, double exitLen, double limit) {
    RoadNetwork net;
    net.nodes.push_back({"a", 0, 0, {}, {}, -1});
    net.nodes.push_back({"b", approachLen, 0, {}, {}, -1});
    net.nodes.push_back({"c", approachLen + exitLen, 0, {}, {}, -1});
    for (int i = 0; i < 2; ++i) {
        Edge e;
        e.id = i == 0 ? "ab" : "bc";
        e.from = i;
        e.to = i + 1;
        e.length = i == 0 ? approachLen : exitLen;
        e.laneCount = 1;
        e.firstLane = i;
        net.edges.push_back(e);
        Lane l;
        l.edge = i;
        l.index = 0;
        l.speedLimit = limit;
        net.lanes.push_back(l);
    }
    Connection c;
    c.fromLane = 0;
    c.toLane = 1;
    net.connections.push_back(c);
    LightDef light;
    light.id = "L";
    light.node = 1;
    net.lights.push_back(light);
    net.rebuildIndexes();
    net.validate();
    return net;
}

// controller pinning the light to one phase forever
class PinController : public LightController {
public:
    explicit PinController(int phase) : phase(phase) {}
    int decide(LightView&) override { return phase; }
    int phase;
};

} // namespace

TEST_CASE("yellow grid follows the v/3 + 1 rule") {
    std::vector<std::string> phases = {"GGrr", "rrGG"};
    std::vector<double> limits = {15, 15, 15, 15};
    YellowGrid grid = buildYellowGrid(phases, limits);
    REQUIRE(grid[0][1].exists);
    CHECK(grid[0][1].state == "yyrr");
    CHECK(grid[0][1].duration == doctest::Approx(6.0));
    CHECK(grid[1][0].state == "rryy");
}

TEST_CASE("pair without a green-to-red change has no yellow") {
    YellowGrid grid = buildYellowGrid({"Grrr", "GGrr"}, {10, 10, 10, 10});
    CHECK(!grid[0][1].exists);
    CHECK(grid[1][0].exists); // the way back drops a green
}

TEST_CASE("yellow duration uses the fastest yellowed lane") {
    YellowGrid grid = buildYellowGrid({"GG", "rr"}, {13.89, 22.22});
    CHECK(grid[0][1].duration == doctest::Approx(22.22 / 3.0 + 1.0));
}

TEST_CASE("mismatched state lengths are rejected") {
    CHECK_THROWS_AS(buildYellowGrid({"GG", "rrr"}, {10, 10}), ValidationError);
}

TEST_CASE("empty network step only advances the clock") {
    RoadNetwork net = straightRoad(100, 10);
    Demand d;
    SimOptions opts;
    opts.dt = 0.1;
    Simulation sim(net, d, {}, {}, opts);
    sim.step();
    CHECK(sim.clock() == doctest::Approx(0.1));
    CHECK(sim.activeCount() == 0);
}

TEST_CASE("free road journey matches closed-form kinematics") {
    // sedan: a=2.2, standstill to 10 m/s covers v^2/2a, then cruise;
    // t = d/v + v/(2a)
    RoadNetwork net = straightRoad(100, 10);
    Demand d = singleCar(net, 0, 1);
    SimOptions opts;
    opts.horizon = 120;
    opts.dt = 0.1;
    SimResult res = runSimulation(net, d, {}, {}, opts);
    REQUIRE(res.finished == 1);
    double v = 10, a = 2.2;
    double expect = 100.0 / v + v / (2 * a);
    CHECK(res.cars[0].journey > 10.0);
    CHECK(res.cars[0].journey <= 10.0 + v / a + 1.0);
    CHECK(res.cars[0].journey == doctest::Approx(expect).epsilon(0.1));
}

TEST_CASE("car stops before a red light") {
    RoadNetwork net = signalRoad(200, 100, 15);
    Demand d = singleCar(net, 0);
    std::vector<GreenPhase> phases = {{"G", 3}, {"r", 3}};
    PhaseTable table = makePhaseTable(phases, {15});
    SimOptions opts;
    opts.horizon = 60;
    opts.dt = 0.1;
    // phase 1 shows red to the only connection, held forever
    Simulation sim(net, d, {table}, {std::make_shared<PinController>(1)}, opts);
    for (int i = 0; i < 600; ++i) sim.step();
    CHECK(sim.activeCount() == 1); // never crossed
    CHECK(sim.finishedCount() == 0);
}

TEST_CASE("3-car arithmetic: objective 45, MTT 15") {
    std::vector<std::pair<double, double>> cars = {{0, 10}, {5, 20}, {10, 30}};
    double objective = 0;
    for (auto [entry, exit] : cars) objective += exit - entry;
    CHECK(objective == doctest::Approx(45));
    CHECK(objective / 3.0 == doctest::Approx(15));
}

TEST_CASE("simulated objective equals the journey sum") {
    RoadNetwork net = straightRoad(100, 10);
    Demand d;
    Route route;
    route.id = "r0";
    route.edges = {0};
    d.routes.push_back(route);
    for (int i = 0; i < 3; ++i) {
        TravelRecord rec;
        rec.vehicleId = "c" + std::to_string(i);
        rec.route = 0;
        rec.entry = i * 5.0;
        rec.vehicleType = 1;
        d.records.push_back(rec);
    }
    d.rebuildIndexes();
    SimOptions opts;
    opts.horizon = 200;
    SimResult res = runSimulation(net, d, {}, {}, opts);
    CHECK(res.finished == 3);
    double sum = 0;
    for (const CarResult& c : res.cars) sum += c.journey;
    CHECK(res.objective == doctest::Approx(sum));
    CHECK(res.mtt == doctest::Approx(sum / 3.0));
}

TEST_CASE("same inputs and seed give bit-identical results") {
    RoadNetwork net = genGrid(GridSpec{}, 5);
    Demand d = genDemand(net, 300, 600, 17);
    ControllerConfigSet cfg = defaultStaticConfig(net);
    SimOptions opts;
    opts.horizon = 900;
    opts.seed = 7;
    SimSetup s1 = buildSimSetup(net, cfg);
    SimResult r1 = runSimulation(net, d, std::move(s1.tables), std::move(s1.controllers), opts);
    SimSetup s2 = buildSimSetup(net, cfg);
    SimResult r2 = runSimulation(net, d, std::move(s2.tables), std::move(s2.controllers), opts);
    CHECK(r1.objective == r2.objective);
    CHECK(simResultCsv(r1) == simResultCsv(r2));
}

TEST_CASE("doubling demand raises MTT") {
    RoadNetwork net = genGrid(GridSpec{1, 1, 1, 1, {10.0}}, 2);
    ControllerConfigSet cfg = defaultStaticConfig(net);
    SimOptions opts;
    opts.horizon = 1200;
    Demand base = genDemand(net, 400, 600, 21);
    Demand heavy = genDemand(net, 800, 600, 21);
    SimSetup s1 = buildSimSetup(net, cfg);
    SimResult r1 = runSimulation(net, base, std::move(s1.tables), std::move(s1.controllers), opts);
    SimSetup s2 = buildSimSetup(net, cfg);
    SimResult r2 = runSimulation(net, heavy, std::move(s2.tables), std::move(s2.controllers), opts);
    CHECK(r2.mtt > r1.mtt);
}

TEST_CASE("detectors read empty lanes as zero and reject unknown ids") {
    RoadNetwork net = straightRoad(100, 10);
    Detector det;
    det.id = "d2";
    det.lane = 0;
    det.position = 0;
    det.zoneLength = 2;
    net.addDetectors({det});
    Demand d;
    SimOptions opts;
    opts.forceDetectors = true;
    Simulation sim(net, d, {}, {}, opts);
    sim.step();
    CHECK(sim.readDetector("d2").occupancy == 0);
    CHECK(sim.readDetector("d2").passCount == 0);
    CHECK_THROWS_AS(sim.readDetector("nope"), ValidationError);
}

TEST_CASE("occupancy counts overlap: long car in a short zone, queue of two") {
    RoadNetwork net = signalRoad(200, 100, 15);
    Detector shortZone;
    shortZone.id = "point";
    shortZone.lane = 0;
    shortZone.position = 0;
    shortZone.zoneLength = 2;
    Detector queueZone;
    queueZone.id = "queue";
    queueZone.lane = 0;
    queueZone.position = 0;
    queueZone.zoneLength = 40;
    net.addDetectors({shortZone, queueZone});

    Demand d;
    Route r;
    r.id = "r0";
    r.edges = {0, 1};
    d.routes.push_back(r);
    for (int i = 0; i < 2; ++i) {
        TravelRecord rec;
        rec.vehicleId = "c" + std::to_string(i);
        rec.route = 0;
        rec.entry = i * 3.0;
        rec.vehicleType = 1;
        d.records.push_back(rec);
    }
    d.rebuildIndexes();

    PhaseTable table = makePhaseTable({{"G", 3}, {"r", 3}}, {15});
    SimOptions opts;
    opts.forceDetectors = true;
    opts.horizon = 120;
    Simulation sim(net, d, {table}, {std::make_shared<PinController>(1)}, opts);
    for (int i = 0; i < 900; ++i) sim.step();
    // both cars queued at the red: front car (4.8 m long) overlaps the 2 m
    // stop-line zone alone, the 40 m zone holds both
    CHECK(sim.readDetector("point").occupancy == 1);
    CHECK(sim.readDetector("queue").occupancy == 2);
}

TEST_CASE("conservation and gap safety hold every step on a busy grid") {
    RoadNetwork net = genGrid(GridSpec{2, 2}, 13);
    Demand d = genDemand(net, 400, 400, 31);
    ControllerConfigSet cfg = defaultStaticConfig(net);
    SimSetup setup = buildSimSetup(net, cfg);
    SimOptions opts;
    opts.horizon = 600;
    opts.checkInvariants = true;
    int failures = 0;
    opts.onInvariantFailure = [&](const std::string&) { failures++; };
    Simulation sim(net, d, std::move(setup.tables), std::move(setup.controllers), opts);
    for (int i = 0; i < 6000; ++i) sim.step();
    CHECK(failures == 0);
    CHECK(sim.enteredCount() == sim.waitingCount() + sim.activeCount() + sim.finishedCount());
}

TEST_CASE("transitions pass through the yellow grid for exactly its duration") {
    RoadNetwork net = genGrid(GridSpec{1, 2}, 23);
    Demand d = genDemand(net, 150, 300, 5);
    ControllerConfigSet cfg = defaultStaticConfig(net, {12, 9});
    SimSetup setup = buildSimSetup(net, cfg);
    SimOptions opts;
    opts.horizon = 400;
    opts.recordPhaseTrace = true;
    Simulation sim(net, d, setup.tables, setup.controllers, opts);
    for (int i = 0; i < 4000; ++i) sim.step();
    const auto& traces = sim.phaseTrace();
    REQUIRE(traces.size() == net.lights.size());
    for (size_t li = 0; li < traces.size(); ++li) {
        const PhaseTable& table = setup.tables[li];
        const auto& tr = traces[li];
        for (size_t k = 0; k + 1 < tr.size(); ++k) {
            const PhaseChange& cur = tr[k];
            const PhaseChange& nxt = tr[k + 1];
            if (cur.phase >= 0 && nxt.phase >= 0) {
                // direct green-to-green jumps only where the grid has no yellow
                CHECK(!table.yellow[cur.phase][nxt.phase].exists);
            } else if (cur.phase == -1) {
                REQUIRE(k >= 1);
                int from = tr[k - 1].phase;
                const YellowPhase& y = table.yellow[from][cur.target];
                REQUIRE(y.exists);
                CHECK(nxt.time - cur.time == doctest::Approx(y.duration).epsilon(1e-9));
                CHECK(nxt.phase == cur.target);
            }
            if (cur.phase >= 0) {
                double held = nxt.time - cur.time;
                CHECK(held + 1e-6 >= table.phases[cur.phase].minDuration);
            }
        }
    }
}

TEST_CASE("halving dt moves MTT by less than 5 percent") {
    RoadNetwork net = genGrid(GridSpec{2, 2}, 29);
    Demand d = genDemand(net, 300, 500, 41);
    ControllerConfigSet cfg = defaultStaticConfig(net);
    SimOptions a;
    a.horizon = 800;
    a.dt = 0.1;
    SimOptions b = a;
    b.dt = 0.05;
    SimSetup s1 = buildSimSetup(net, cfg);
    SimResult r1 = runSimulation(net, d, std::move(s1.tables), std::move(s1.controllers), a);
    SimSetup s2 = buildSimSetup(net, cfg);
    SimResult r2 = runSimulation(net, d, std::move(s2.tables), std::move(s2.controllers), b);
    CHECK(std::abs(r1.mtt - r2.mtt) / r1.mtt < 0.05);
}

TEST_CASE("unfinished cars get horizon plus free-flow remainder") {
    RoadNetwork net = straightRoad(1000, 10);
    Demand d = singleCar(net, 0, 1); // sedan, speed factor 1.0
    SimOptions opts;
    opts.horizon = 10; // cannot finish 1000 m in 10 s
    SimResult res = runSimulation(net, d, {}, {}, opts);
    REQUIRE(res.unfinished == 1);
    CHECK(res.cars[0].exit > 10.0);
    CHECK(res.cars[0].exit < 10.0 + 1000.0 / 10.0 + 1.0);
}
