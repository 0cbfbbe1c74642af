#include "greenwave/scenarios.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

namespace greenwave {

namespace {

enum Dir { North = 0, East = 1, South = 2, West = 3 };

bool isNorthSouth(const RoadNetwork& net, int edge) {
    const Node& a = net.nodes[net.edges[edge].from];
    const Node& b = net.nodes[net.edges[edge].to];
    return std::abs(b.y - a.y) >= std::abs(b.x - a.x);
}

} // namespace

RoadNetwork genGrid(const GridSpec& spec, uint64_t seed) {
    if (spec.rows < 1 || spec.cols < 1) throw ValidationError("grid needs rows, cols >= 1");
    if (spec.minLanes < 1 || spec.maxLanes < spec.minLanes)
        throw ValidationError("bad lane count range");
    Rng rng(seed);
    RoadNetwork net;

    auto addNode = [&](const std::string& id, double x, double y) {
        Node n;
        n.id = id;
        n.x = x;
        n.y = y;
        net.nodes.push_back(n);
        return static_cast<int>(net.nodes.size()) - 1;
    };

    std::map<std::pair<int, int>, int> interior;
    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c)
            interior[{r, c}] = addNode("n" + std::to_string(r) + "_" + std::to_string(c),
                                       c * spec.blockLength, r * spec.blockLength);

    struct Stub { int node; int at; };
    std::vector<std::pair<int, int>> stubPairs; // (stub node, interior node)
    for (int c = 0; c < spec.cols; ++c) {
        stubPairs.push_back({addNode("sn" + std::to_string(c), c * spec.blockLength,
                                     -spec.boundaryLength),
                             interior[{0, c}]});
        stubPairs.push_back({addNode("ss" + std::to_string(c), c * spec.blockLength,
                                     (spec.rows - 1) * spec.blockLength + spec.boundaryLength),
                             interior[{spec.rows - 1, c}]});
    }
    for (int r = 0; r < spec.rows; ++r) {
        stubPairs.push_back({addNode("sw" + std::to_string(r), -spec.boundaryLength,
                                     r * spec.blockLength),
                             interior[{r, 0}]});
        stubPairs.push_back({addNode("se" + std::to_string(r),
                                     (spec.cols - 1) * spec.blockLength + spec.boundaryLength,
                                     r * spec.blockLength),
                             interior[{r, spec.cols - 1}]});
    }

    auto addEdgePair = [&](int a, int b, double length) {
        for (auto [from, to] : {std::pair{a, b}, std::pair{b, a}}) {
            Edge e;
            e.id = "e_" + net.nodes[from].id + "_" + net.nodes[to].id;
            e.from = from;
            e.to = to;
            e.length = length;
            e.laneCount = static_cast<int>(rng.uniformInt(spec.minLanes, spec.maxLanes));
            e.firstLane = static_cast<int>(net.lanes.size());
            double limit = spec.speedLimits[static_cast<size_t>(
                rng.uniformInt(0, static_cast<int64_t>(spec.speedLimits.size()) - 1))];
            for (int l = 0; l < e.laneCount; ++l) {
                Lane lane;
                lane.edge = static_cast<int>(net.edges.size());
                lane.index = l;
                lane.speedLimit = limit;
                net.lanes.push_back(lane);
            }
            net.edges.push_back(e);
        }
    };

    for (int r = 0; r < spec.rows; ++r)
        for (int c = 0; c < spec.cols; ++c) {
            if (c + 1 < spec.cols) addEdgePair(interior[{r, c}], interior[{r, c + 1}], spec.blockLength);
            if (r + 1 < spec.rows) addEdgePair(interior[{r, c}], interior[{r + 1, c}], spec.blockLength);
        }
    for (auto [stub, inner] : stubPairs) addEdgePair(stub, inner, spec.boundaryLength);

    net.rebuildIndexes();

    // all-movement connections at every interior node, no U-turns; incoming
    // edges in N,E,S,W order so signal strings group by approach
    for (int r = 0; r < spec.rows; ++r) {
        for (int c = 0; c < spec.cols; ++c) {
            int node = interior[{r, c}];
            std::vector<int> in = net.nodes[node].inEdges;
            auto dirOf = [&](int e, bool incoming) {
                const Node& a = net.nodes[net.edges[e].from];
                const Node& b = net.nodes[net.edges[e].to];
                double dx = b.x - a.x, dy = b.y - a.y;
                if (!incoming) { dx = -dx; dy = -dy; }
                if (std::abs(dy) >= std::abs(dx)) return dy > 0 ? North : South;
                return dx > 0 ? East : West;
            };
            std::sort(in.begin(), in.end(), [&](int a, int b) {
                int da = dirOf(a, true), db = dirOf(b, true);
                if (da != db) return da < db;
                return net.edges[a].id < net.edges[b].id;
            });
            for (int ein : in) {
                std::vector<int> outs = net.nodes[node].outEdges;
                std::sort(outs.begin(), outs.end(), [&](int a, int b) {
                    return net.edges[a].id < net.edges[b].id;
                });
                for (int eout : outs) {
                    if (net.edges[eout].to == net.edges[ein].from) continue; // no U-turn
                    for (int l = 0; l < net.edges[ein].laneCount; ++l) {
                        Connection conn;
                        conn.fromLane = net.edges[ein].firstLane + l;
                        conn.toLane = net.edges[eout].firstLane +
                                      std::min(l, net.edges[eout].laneCount - 1);
                        net.connections.push_back(conn);
                    }
                }
            }
            LightDef light;
            light.id = "L" + std::to_string(r) + "_" + std::to_string(c);
            light.node = node;
            net.lights.push_back(light);
        }
    }

    net.rebuildIndexes();
    std::vector<Detector> dets;
    for (const LightDef& l : net.lights) {
        auto d = placeQueueDetectors(net, l.id, spec.queueZone);
        dets.insert(dets.end(), d.begin(), d.end());
    }
    net.rebuildIndexes();
    net.addDetectors(dets);
    net.validate();
    return net;
}

namespace {

std::vector<GreenPhase> twoPhaseStates(const RoadNetwork& net, const LightDef& light) {
    std::string ns(light.conns.size(), 'r'), ew(light.conns.size(), 'r');
    for (size_t k = 0; k < light.conns.size(); ++k) {
        int fromEdge = net.lanes[net.connections[light.conns[k]].fromLane].edge;
        if (isNorthSouth(net, fromEdge)) ns[k] = 'G';
        else ew[k] = 'G';
    }
    std::vector<GreenPhase> phases;
    if (ns.find('G') != std::string::npos) phases.push_back({ns, 3.0});
    if (ew.find('G') != std::string::npos) phases.push_back({ew, 3.0});
    if (phases.empty()) phases.push_back({std::string(light.conns.size(), 'G'), 3.0});
    return phases;
}

} // namespace

ControllerConfigSet defaultStaticConfig(const RoadNetwork& net, std::vector<double> durations) {
    ControllerConfigSet cfg;
    for (const LightDef& l : net.lights) {
        LightControllerConfig c;
        c.lightId = l.id;
        c.kind = ControllerKind::Static;
        c.phases = twoPhaseStates(net, l);
        c.st.durations.assign(c.phases.size(), 20.0);
        for (size_t i = 0; i < c.phases.size() && i < durations.size(); ++i)
            c.st.durations[i] = durations[i];
        c.st.offset = 0;
        cfg.lights.push_back(std::move(c));
    }
    return cfg;
}

ControllerConfigSet randomStaticConfig(const RoadNetwork& net, Rng& rng, double durLo,
                                       double durHi) {
    ControllerConfigSet cfg = defaultStaticConfig(net);
    for (LightControllerConfig& c : cfg.lights) {
        double cycle = 0;
        for (double& d : c.st.durations) {
            d = rng.uniform(durLo, durHi);
            cycle += d;
        }
        c.st.offset = rng.uniform(0, cycle);
    }
    return cfg;
}

ControllerConfigSet defaultAuctionConfig(const RoadNetwork& net, double ownWeight, double minimum,
                                         double priority, double release) {
    ControllerConfigSet cfg;
    for (const LightDef& l : net.lights) {
        LightControllerConfig c;
        c.lightId = l.id;
        c.kind = ControllerKind::Auction;
        c.phases = twoPhaseStates(net, l);
        c.au.minimumDuration = minimum;
        c.au.priorityDuration = priority;
        c.au.releaseDuration = release;
        // the light's local detectors, in id order
        for (const Detector& d : net.detectors) {
            if (d.kind != DetectorKind::Local) continue;
            if (net.edges[net.lanes[d.lane].edge].to != l.node) continue;
            c.au.detectorIds.push_back(d.id);
        }
        std::sort(c.au.detectorIds.begin(), c.au.detectorIds.end());
        c.au.weights.assign(c.phases.size(),
                            std::vector<double>(c.au.detectorIds.size(), 0.0));
        for (size_t p = 0; p < c.phases.size(); ++p) {
            for (size_t j = 0; j < c.au.detectorIds.size(); ++j) {
                int di = net.detectorIndex(c.au.detectorIds[j]);
                int fromEdge = net.lanes[net.detectors[di].lane].edge;
                bool ns = isNorthSouth(net, fromEdge);
                bool phaseNs = c.phases[p].state.find('G') != std::string::npos &&
                               [&] {
                                   for (size_t k = 0; k < l.conns.size(); ++k)
                                       if (c.phases[p].state[k] == 'G')
                                           return isNorthSouth(
                                               net, net.lanes[net.connections[l.conns[k]].fromLane].edge);
                                   return false;
                               }();
                if (ns == phaseNs) c.au.weights[p][j] = ownWeight;
            }
        }
        cfg.lights.push_back(std::move(c));
    }
    return cfg;
}

ControllerConfigSet defaultPlanningConfig(const RoadNetwork& net, PlanningParams pen) {
    ControllerConfigSet cfg;
    for (const LightDef& l : net.lights) {
        LightControllerConfig c;
        c.lightId = l.id;
        c.kind = ControllerKind::Planning;
        c.phases = twoPhaseStates(net, l);
        c.pl = pen;
        cfg.lights.push_back(std::move(c));
    }
    return cfg;
}

namespace {

std::vector<int> boundaryEntryEdges(const RoadNetwork& net) {
    std::vector<int> out;
    for (size_t e = 0; e < net.edges.size(); ++e) {
        const Node& from = net.nodes[net.edges[e].from];
        if (from.light < 0 && from.outEdges.size() == 1) out.push_back(static_cast<int>(e));
    }
    return out;
}

std::vector<int> boundaryExitEdges(const RoadNetwork& net) {
    std::vector<int> out;
    for (size_t e = 0; e < net.edges.size(); ++e) {
        const Node& to = net.nodes[net.edges[e].to];
        if (to.light < 0 && to.inEdges.size() == 1) out.push_back(static_cast<int>(e));
    }
    return out;
}

// shared route table builder: returns the route index, adding it on demand
int internRoute(Demand& demand, std::map<std::vector<int>, int>& known,
                const std::vector<int>& edges) {
    auto it = known.find(edges);
    if (it != known.end()) return it->second;
    Route r;
    r.id = "r" + std::to_string(demand.routes.size());
    r.edges = edges;
    int idx = static_cast<int>(demand.routes.size());
    demand.routes.push_back(std::move(r));
    known[edges] = idx;
    return idx;
}

} // namespace

Demand genDemand(const RoadNetwork& net, int nCars, double horizon, uint64_t seed) {
    if (nCars < 0) throw ValidationError("car count must be >= 0");
    Rng rng(seed);
    Demand demand;
    std::map<std::vector<int>, int> known;
    auto entries = boundaryEntryEdges(net);
    auto exits = boundaryExitEdges(net);
    if (nCars > 0 && (entries.empty() || exits.empty()))
        throw ValidationError("network has no boundary entry/exit edges");

    for (int i = 0; i < nCars; ++i) {
        int routeIdx = -1;
        for (int attempt = 0; attempt < 100 && routeIdx < 0; ++attempt) {
            int from = entries[static_cast<size_t>(rng.uniformInt(0, static_cast<int64_t>(entries.size()) - 1))];
            int to = exits[static_cast<size_t>(rng.uniformInt(0, static_cast<int64_t>(exits.size()) - 1))];
            if (from == to) continue;
            auto path = shortestRoute(net, from, to);
            if (!path) continue;
            routeIdx = internRoute(demand, known, *path);
        }
        if (routeIdx < 0)
            throw ValidationError("could not sample a connected route after 100 attempts");
        TravelRecord rec;
        rec.vehicleId = "c" + std::to_string(i);
        rec.route = routeIdx;
        rec.entry = rng.uniform(0, horizon);
        rec.vehicleType = static_cast<int>(rng.uniformInt(0, static_cast<int64_t>(vehicleCatalog().size()) - 1));
        demand.records.push_back(std::move(rec));
    }
    demand.rebuildIndexes();
    sortRecords(demand.records);
    validateDemand(demand, net);
    return demand;
}

Demand genDirectedDemand(const RoadNetwork& net, const std::vector<FlowSpec>& flows, int nCars,
                         double horizon, uint64_t seed) {
    Rng rng(seed);
    Demand demand;
    std::map<std::vector<int>, int> known;
    double totalShare = 0;
    for (const FlowSpec& f : flows) totalShare += f.share;
    if (totalShare <= 0) throw ValidationError("flow shares must sum to > 0");

    std::vector<int> flowRoute(flows.size());
    for (size_t i = 0; i < flows.size(); ++i) {
        int from = net.edgeIndex(flows[i].fromEdge);
        int to = net.edgeIndex(flows[i].toEdge);
        if (from < 0 || to < 0)
            throw ValidationError("flow references unknown edge '" + flows[i].fromEdge + "' or '" +
                                  flows[i].toEdge + "'");
        auto path = shortestRoute(net, from, to);
        if (!path)
            throw ValidationError("no route from '" + flows[i].fromEdge + "' to '" +
                                  flows[i].toEdge + "'");
        flowRoute[i] = internRoute(demand, known, *path);
    }
    for (int i = 0; i < nCars; ++i) {
        double u = rng.uniform() * totalShare;
        size_t pick = 0;
        for (double acc = 0; pick < flows.size(); ++pick) {
            acc += flows[pick].share;
            if (u < acc) break;
        }
        pick = std::min(pick, flows.size() - 1);
        TravelRecord rec;
        rec.vehicleId = "c" + std::to_string(i);
        rec.route = flowRoute[pick];
        rec.entry = rng.uniform(0, horizon);
        rec.vehicleType = static_cast<int>(rng.uniformInt(0, static_cast<int64_t>(vehicleCatalog().size()) - 1));
        demand.records.push_back(std::move(rec));
    }
    demand.rebuildIndexes();
    sortRecords(demand.records);
    validateDemand(demand, net);
    return demand;
}

std::vector<Demand> perturbDemand(const Demand& base, const PerturbationSpec& spec,
                                  uint64_t seed) {
    if (base.records.empty()) throw ValidationError("cannot perturb an empty demand");
    if (spec.countJitter < 0 || spec.countJitter >= 1 || spec.count < 1)
        throw ValidationError("bad perturbation spec");

    std::vector<std::vector<const TravelRecord*>> byRoute(base.routes.size());
    for (const TravelRecord& r : base.records) byRoute[r.route].push_back(&r);

    std::vector<Demand> out;
    out.reserve(spec.count);
    Rng master(seed);
    for (int d = 0; d < spec.count; ++d) {
        Rng rng = master.fork(static_cast<uint64_t>(d) + 1);
        Demand ds;
        ds.routes = base.routes;
        long id = 0;
        for (size_t ri = 0; ri < byRoute.size(); ++ri) {
            const auto& cars = byRoute[ri];
            if (cars.empty()) continue;
            double jitter = rng.uniform(-spec.countJitter, spec.countJitter);
            long count = std::lround(static_cast<double>(cars.size()) * (1.0 + jitter));
            count = std::max<long>(0, count);
            for (long k = 0; k < count; ++k) {
                const TravelRecord* src =
                    k < static_cast<long>(cars.size())
                        ? cars[static_cast<size_t>(k)]
                        : cars[static_cast<size_t>(rng.uniformInt(0, static_cast<int64_t>(cars.size()) - 1))];
                TravelRecord rec;
                rec.vehicleId = "d" + std::to_string(d) + "_c" + std::to_string(id++);
                rec.route = static_cast<int>(ri);
                rec.entry = std::max(0.0, src->entry + rng.uniform(-spec.releaseJitter,
                                                                   spec.releaseJitter));
                rec.vehicleType = src->vehicleType;
                ds.records.push_back(std::move(rec));
            }
        }
        ds.rebuildIndexes();
        sortRecords(ds.records);
        out.push_back(std::move(ds));
    }
    return out;
}

Demand scaleDemand(const Demand& base, double scale, double horizon, uint64_t seed) {
    Rng rng(seed);
    Demand out;
    out.routes = base.routes;
    long n = std::lround(scale * static_cast<double>(base.records.size()));
    // route distribution of the base demand
    std::vector<double> cum;
    cum.reserve(base.records.size());
    for (size_t i = 0; i < base.records.size(); ++i) cum.push_back(static_cast<double>(i + 1));
    for (long i = 0; i < n; ++i) {
        const TravelRecord& src =
            base.records[static_cast<size_t>(rng.uniformInt(0, static_cast<int64_t>(base.records.size()) - 1))];
        TravelRecord rec;
        rec.vehicleId = "s" + std::to_string(i);
        rec.route = src.route;
        rec.entry = rng.uniform(0, horizon);
        rec.vehicleType = src.vehicleType;
        out.records.push_back(std::move(rec));
    }
    out.rebuildIndexes();
    sortRecords(out.records);
    return out;
}

double demandHorizon(const Demand& demand) {
    double last = 0;
    for (const TravelRecord& r : demand.records) last = std::max(last, r.entry);
    return last;
}

namespace {

double probeMtt(const RoadNetwork& net, const Demand& base, const ControllerConfigSet& cfg,
                double scale, const CapacityOptions& opts) {
    double window = opts.horizon > 0 ? opts.horizon : demandHorizon(base);
    double simHorizon = window + 600.0;
    std::vector<double> mtts(static_cast<size_t>(opts.seedsPerProbe), 0.0);
    std::atomic<int> next{0};
    auto work = [&]() {
        for (int i = next.fetch_add(1); i < opts.seedsPerProbe; i = next.fetch_add(1)) {
            Demand d = scaleDemand(base, scale, window, opts.seed + static_cast<uint64_t>(i) * 7919);
            SimSetup setup = buildSimSetup(net, cfg, &d);
            SimOptions so;
            so.horizon = simHorizon;
            so.dt = opts.dt;
            so.seed = opts.seed + static_cast<uint64_t>(i);
            SimResult res = runSimulation(net, d, std::move(setup.tables),
                                          std::move(setup.controllers), so);
            mtts[static_cast<size_t>(i)] = res.mtt;
        }
    };
    int jobs = std::max(1, std::min(opts.jobs, opts.seedsPerProbe));
    if (jobs == 1) {
        work();
    } else {
        std::vector<std::thread> ts;
        for (int i = 0; i < jobs; ++i) ts.emplace_back(work);
        for (auto& t : ts) t.join();
    }
    double sum = 0;
    for (double m : mtts) sum += m;
    return sum / static_cast<double>(opts.seedsPerProbe);
}

} // namespace

CapacityResult capacitySearch(const RoadNetwork& net, const Demand& base,
                              const ControllerConfigSet& cfg, double targetMtt,
                              const CapacityOptions& opts) {
    if (targetMtt <= 0) throw ValidationError("target MTT must be > 0");
    CapacityResult res;
    res.targetMtt = targetMtt;

    auto within = [&](double mtt) { return std::abs(mtt - targetMtt) <= opts.tolerance * targetMtt; };

    int probes = 0;
    double scale = 1.0;
    double mtt = probeMtt(net, base, cfg, scale, opts);
    ++probes;
    if (!within(mtt)) {
        double lo = opts.scaleLo, hi = opts.scaleHi;
        // keep the bracket around the target, seeded by the scale-1 probe
        if (mtt < targetMtt) lo = scale;
        else hi = scale;
        bool bracketed = true;
        if (mtt < targetMtt) {
            double hiMtt = probeMtt(net, base, cfg, hi, opts);
            ++probes;
            if (hiMtt < targetMtt) { scale = hi; mtt = hiMtt; bracketed = false; }
        } else {
            double loMtt = probeMtt(net, base, cfg, lo, opts);
            ++probes;
            if (loMtt > targetMtt) { scale = lo; mtt = loMtt; bracketed = false; }
        }
        if (bracketed) {
            while (probes < opts.maxProbes) {
                scale = 0.5 * (lo + hi);
                mtt = probeMtt(net, base, cfg, scale, opts);
                ++probes;
                if (within(mtt)) break;
                if (mtt < targetMtt) lo = scale;
                else hi = scale;
            }
        }
    }

    res.scale = scale;
    res.converged = within(mtt);
    res.cars = std::lround(scale * static_cast<double>(base.records.size()));
    // confirming run at the returned scale
    double window = opts.horizon > 0 ? opts.horizon : demandHorizon(base);
    Demand confirm = scaleDemand(base, scale, window, opts.seed);
    SimSetup setup = buildSimSetup(net, cfg, &confirm);
    SimOptions so;
    so.horizon = window + 600.0;
    so.dt = opts.dt;
    so.seed = opts.seed;
    SimResult r = runSimulation(net, confirm, std::move(setup.tables),
                                std::move(setup.controllers), so);
    res.mtt = r.mtt;
    return res;
}

} // namespace greenwave
