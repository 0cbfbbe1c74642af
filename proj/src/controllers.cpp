#include "greenwave/controllers.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

namespace greenwave {

double cycleLength(const StaticParams& params, const PhaseTable& table) {
    size_t n = params.durations.size();
    double cycle = 0;
    for (size_t i = 0; i < n; ++i) {
        cycle += params.durations[i];
        const YellowPhase& y = table.yellow[i][(i + 1) % n];
        if (y.exists) cycle += y.duration;
    }
    return cycle;
}

int staticDecide(const StaticParams& params, const PhaseTable& table, double clock) {
    size_t n = params.durations.size();
    if (n != table.phases.size())
        throw ValidationError("static durations do not match the phase table");
    if (n == 1) return 0;
    double cycle = cycleLength(params, table);
    double tau = std::fmod(clock - params.offset, cycle);
    if (tau < 0) tau += cycle;
    double cum = 0;
    for (size_t i = 0; i < n; ++i) {
        cum += params.durations[i];
        if (tau < cum) return static_cast<int>(i);
        const YellowPhase& y = table.yellow[i][(i + 1) % n];
        if (y.exists) cum += y.duration;
        // the yellow into phase i+1 already belongs to it
        if (tau < cum) return static_cast<int>((i + 1) % n);
    }
    return 0;
}

double computeBid(std::span<const double> weights, std::span<const double> readings) {
    double bid = 0;
    for (size_t i = 0; i < weights.size(); ++i) bid += weights[i] * readings[i];
    return bid;
}

int auctionRule(int current, double elapsed, const AuctionParams& params,
                std::span<const double> bids) {
    int n = static_cast<int>(bids.size());
    if (elapsed < params.minimumDuration) return current;

    auto holdAuction = [&](double currentBid) {
        double top = currentBid;
        for (int i = 0; i < n; ++i)
            if (i != current) top = std::max(top, bids[i]);
        if (top < 0) return current; // negative top bid: current is the default winner
        // first top bidder in cyclic order after the current phase
        for (int k = 1; k <= n; ++k) {
            int idx = (current + k) % n;
            double b = idx == current ? currentBid : bids[idx];
            if (b == top) return idx;
        }
        return current;
    };

    if (elapsed < params.priorityDuration) {
        if (bids[current] >= 0) return current; // greedy keep
        return holdAuction(bids[current]);
    }
    if (elapsed < params.releaseDuration) return holdAuction(bids[current]);
    return holdAuction(std::min(bids[current], 0.0)); // handicapped auction
}

int auctionDecide(const LightState& state, const AuctionParams& params,
                  std::span<const double> readings) {
    std::vector<double> bids(params.weights.size());
    for (size_t i = 0; i < params.weights.size(); ++i)
        bids[i] = computeBid(params.weights[i], readings);
    return auctionRule(state.phase, state.elapsed, params, bids);
}

// ---------------------------------------------------------------------------
// planning timeline

void updateTimeline(Timeline& tl, const RemoteSensorInput& sensor,
                    std::span<const PassEvent> passes, double observedSpeed, double now) {
    if (passes.empty()) return;
    double speed = std::max(observedSpeed, 0.5);
    for (const PassEvent& ev : passes) {
        double arrival = ev.time + sensor.distance / speed;
        if (arrival < now) continue;
        for (size_t p = 0; p < sensor.phaseWeight.size(); ++p) {
            if (sensor.phaseWeight[p] <= 0) continue;
            if (tl.phases.size() <= p) tl.phases.resize(p + 1);
            tl.phases[p].push_back({arrival, sensor.phaseWeight[p], sensor.downstreamLimit});
        }
    }
    for (auto& ph : tl.phases)
        std::sort(ph.begin(), ph.end(),
                  [](const TimelineEvent& a, const TimelineEvent& b) { return a.time < b.time; });
}

void dropStale(Timeline& tl, double now) {
    for (auto& ph : tl.phases)
        std::erase_if(ph, [now](const TimelineEvent& e) { return e.time < now; });
}

// ---------------------------------------------------------------------------
// planning DP

namespace {

struct Arrival {
    double time;
    int phase;
    double weight;
    double downLimit;
};

struct PlanNode {
    int phase;
    double time;
    double greenStart;
    double cost; // waiting accrued up to `time`
    int eventIdx;
    int changes;
    int firstTarget = -1;    // first change of the schedule this node extends
    double firstChange = 0;
    std::vector<double> waiting; // per-phase stopped weight
};

} // namespace

PlanAction planSchedule(const PlanningInstance& inst, bool usePruning, PlanStats* stats) {
    int P = static_cast<int>(inst.minDuration.size());
    const PlanningParams& pen = inst.penalties;

    std::vector<Arrival> events;
    for (size_t p = 0; p < inst.timeline.phases.size() && p < static_cast<size_t>(P); ++p)
        for (const TimelineEvent& e : inst.timeline.phases[p])
            if (e.time >= inst.now)
                events.push_back({e.time, static_cast<int>(p), e.weight, e.downstreamLimit});
    std::sort(events.begin(), events.end(), [](const Arrival& a, const Arrival& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.phase < b.phase;
    });
    int K = static_cast<int>(events.size());

    double maxYellow = 0;
    for (const auto& row : inst.yellow)
        for (double y : row) maxYellow = std::max(maxYellow, y);
    double flush = std::accumulate(inst.minDuration.begin(), inst.minDuration.end(), 0.0) +
                   P * maxYellow;
    double horizon = (K ? events.back().time : inst.now) + flush;

    PlanNode root;
    root.phase = inst.currentPhase;
    root.time = inst.now;
    root.greenStart = inst.phaseStart;
    root.cost = 0;
    root.eventIdx = 0;
    root.changes = 0;
    root.waiting.assign(P, 0.0);
    for (size_t p = 0; p < inst.waiting.size() && p < static_cast<size_t>(P); ++p)
        if (static_cast<int>(p) != inst.currentPhase)
            for (const auto& [w, v] : inst.waiting[p]) root.waiting[p] += w;

    auto totalWaiting = [&](const PlanNode& n) {
        double s = 0;
        for (double w : n.waiting) s += w;
        return s;
    };
    auto accrueTo = [&](PlanNode& n, double t) {
        if (t > n.time) {
            n.cost += pen.waitingWeight * totalWaiting(n) * (t - n.time);
            n.time = t;
        }
    };
    // consume arrivals strictly before `until` (or at it, when inclusive)
    // with `green` the phase currently showing green (-1 during yellow)
    auto consumeEvents = [&](PlanNode& n, double until, int green, bool inclusive) {
        while (n.eventIdx < K) {
            const Arrival& ev = events[n.eventIdx];
            if (inclusive ? ev.time > until : ev.time >= until) break;
            accrueTo(n, ev.time);
            if (ev.phase != green) {
                n.cost += pen.speedLossWeight * ev.weight * ev.downLimit;
                n.waiting[ev.phase] += ev.weight;
            }
            n.eventIdx++;
        }
    };

    bool haveBest = false;
    PlanNode best;
    auto finishNode = [&](PlanNode n) {
        accrueTo(n, horizon);
        if (!haveBest || n.cost < best.cost - 1e-12 ||
            (std::abs(n.cost - best.cost) <= 1e-12 && n.firstTarget >= 0 &&
             (best.firstTarget < 0 ? false : n.firstChange < best.firstChange))) {
            best = std::move(n);
            haveBest = true;
        }
    };

    // pruning table: (eventIdx, phase, waiting weights) -> Pareto (earliestChange, normCost)
    std::map<std::tuple<int, int, std::vector<long>>, std::vector<std::pair<double, double>>> seen;
    auto dominated = [&](const PlanNode& n) {
        if (!usePruning) return false;
        std::vector<long> wq(n.waiting.size());
        for (size_t i = 0; i < n.waiting.size(); ++i) wq[i] = std::lround(n.waiting[i] * 1e6);
        double enc = std::max(n.greenStart + inst.minDuration[n.phase], n.time);
        double norm = n.cost - pen.waitingWeight * totalWaiting(n) * n.time;
        auto& entries = seen[{n.eventIdx, n.phase, std::move(wq)}];
        for (const auto& [e, c] : entries)
            if (e <= enc + 1e-9 && c <= norm + 1e-9) return true;
        std::erase_if(entries, [&](const std::pair<double, double>& ec) {
            return enc <= ec.first + 1e-9 && norm <= ec.second + 1e-9;
        });
        entries.push_back({enc, norm});
        return false;
    };

    std::vector<PlanNode> stack;
    stack.push_back(root);
    long expanded = 0, prunedCount = 0;
    const long kNodeCap = 400000;

    while (!stack.empty()) {
        PlanNode n = std::move(stack.back());
        stack.pop_back();
        if (dominated(n)) {
            ++prunedCount;
            continue;
        }
        if (++expanded > kNodeCap) {
            finishNode(std::move(n));
            continue;
        }

        bool terminal = n.eventIdx >= K;

        // changes to every phase in demand, as early as the minimum allows
        if (inst.maxChanges < 0 || n.changes < inst.maxChanges) {
            for (int r = 0; r < P; ++r) {
                if (r == n.phase) continue;
                bool inDemand = n.waiting[r] > 0;
                for (int k = n.eventIdx; !inDemand && k < K; ++k)
                    if (events[k].phase == r) inDemand = true;
                if (!inDemand) continue;
                PlanNode c = n;
                double changeAt = std::max(c.greenStart + inst.minDuration[c.phase], c.time);
                // cars on the closing phase pass until the yellow starts
                consumeEvents(c, changeAt, c.phase, true);
                accrueTo(c, changeAt);
                double y = inst.yellow[c.phase][r];
                double greenAt = changeAt + y;
                consumeEvents(c, greenAt, -1, false);
                accrueTo(c, greenAt);
                c.cost += pen.phaseChangeWeight;
                c.waiting[r] = 0; // released at the green
                c.phase = r;
                c.greenStart = greenAt;
                c.changes++;
                if (c.firstTarget < 0) {
                    c.firstTarget = r;
                    c.firstChange = changeAt;
                }
                stack.push_back(std::move(c));
            }
        }

        if (terminal) {
            finishNode(std::move(n));
        } else {
            // keep: advance through the next arrival
            const Arrival& ev = events[n.eventIdx];
            accrueTo(n, ev.time);
            if (ev.phase != n.phase) {
                n.cost += pen.speedLossWeight * ev.weight * ev.downLimit;
                n.waiting[ev.phase] += ev.weight;
            }
            n.eventIdx++;
            stack.push_back(std::move(n));
        }
    }

    if (stats) {
        stats->expanded = expanded;
        stats->pruned = prunedCount;
    }
    PlanAction act;
    act.cost = haveBest ? best.cost : 0;
    if (haveBest && best.firstTarget >= 0) {
        act.switchPhase = true;
        act.target = best.firstTarget;
        act.changeTime = best.firstChange;
    }
    return act;
}

// ---------------------------------------------------------------------------
// controller implementations

namespace {

class StaticController : public LightController {
public:
    StaticController(StaticParams p, PhaseTable t) : params(std::move(p)), table(std::move(t)) {}
    int decide(LightView& view) override { return staticDecide(params, table, view.clock()); }

private:
    StaticParams params;
    PhaseTable table;
};

class AuctionController : public LightController {
public:
    AuctionController(AuctionParams p, std::vector<int> detIndices)
        : params(std::move(p)), dets(std::move(detIndices)) {}

    bool wantsDetectors() const override { return true; }

    int decide(LightView& view) override {
        readings.resize(dets.size());
        for (size_t i = 0; i < dets.size(); ++i)
            readings[i] = static_cast<double>(view.reading(dets[i]).occupancy);
        LightState st{view.currentPhase(), view.phaseElapsed()};
        return auctionDecide(st, params, readings);
    }

private:
    AuctionParams params;
    std::vector<int> dets;
    std::vector<double> readings;
};

class PlanningController : public LightController {
public:
    PlanningController(PlanningParams p, PlanningInputs in, std::vector<double> minDur,
                       std::vector<std::vector<double>> yel)
        : params(p), inputs(std::move(in)), minDuration(std::move(minDur)), yellow(std::move(yel)) {
        timeline.phases.resize(minDuration.size());
    }

    bool wantsDetectors() const override { return true; }
    bool wantsPassEvents() const override { return true; }

    int decide(LightView& view) override {
        double now = view.clock();
        for (const RemoteSensorInput& s : inputs.sensors) {
            scratch.clear();
            view.takePasses(s.detector, scratch);
            updateTimeline(timeline, s, scratch, view.observedSpeed(s.detector), now);
        }
        dropStale(timeline, now);

        PlanningInstance inst;
        inst.minDuration = minDuration;
        inst.yellow = yellow;
        inst.currentPhase = view.currentPhase();
        inst.phaseStart = now - view.phaseElapsed();
        inst.now = now;
        inst.waiting.resize(minDuration.size());
        for (const RemoteSensorInput& q : inputs.queues) {
            int occ = view.reading(q.detector).occupancy;
            if (occ == 0) continue;
            for (size_t p = 0; p < q.phaseWeight.size(); ++p) {
                if (p == static_cast<size_t>(inst.currentPhase) || q.phaseWeight[p] <= 0) continue;
                inst.waiting[p].push_back({occ * q.phaseWeight[p], q.downstreamLimit});
            }
        }
        inst.timeline = timeline;
        inst.penalties = params;

        PlanAction act = planSchedule(inst);
        if (act.switchPhase && act.changeTime <= now + 0.5) return act.target;
        return inst.currentPhase;
    }

private:
    PlanningParams params;
    PlanningInputs inputs;
    std::vector<double> minDuration;
    std::vector<std::vector<double>> yellow;
    Timeline timeline;
    std::vector<PassEvent> scratch;
};

} // namespace

// ---------------------------------------------------------------------------
// demand statistics for planning

PlanningInputs buildPlanningInputs(const RoadNetwork& net, const Demand& demand,
                                   const std::string& lightId,
                                   const std::vector<GreenPhase>& phases) {
    int li = net.lightIndex(lightId);
    if (li < 0) throw ValidationError("unknown light '" + lightId + "'");
    const LightDef& light = net.lights[li];
    int P = static_cast<int>(phases.size());

    // movement (inEdge -> outEdge) counts through this light
    std::map<std::pair<int, int>, double> movementCount;
    // edge chain occurrence helpers
    auto routeHasChain = [&](const Route& r, const std::vector<int>& chain) {
        if (chain.empty()) return false;
        for (size_t i = 0; i + chain.size() <= r.edges.size(); ++i) {
            bool ok = true;
            for (size_t k = 0; k < chain.size(); ++k)
                if (r.edges[i + k] != chain[k]) { ok = false; break; }
            if (ok) return true;
        }
        return false;
    };
    std::vector<double> routeCars(demand.routes.size(), 0.0);
    for (const TravelRecord& rec : demand.records) routeCars[rec.route] += 1.0;
    for (size_t ri = 0; ri < demand.routes.size(); ++ri) {
        const Route& r = demand.routes[ri];
        for (size_t i = 0; i + 1 < r.edges.size(); ++i)
            if (net.edges[r.edges[i]].to == light.node)
                movementCount[{r.edges[i], r.edges[i + 1]}] += routeCars[ri];
    }

    // phase serving a movement: phases whose state shows 'G' for a
    // connection implementing it (split evenly when several do)
    auto movementPhaseShare = [&](int inEdge, int outEdge) {
        std::vector<double> share(P, 0.0);
        std::vector<char> green(P, 0);
        int greens = 0;
        for (size_t k = 0; k < light.conns.size(); ++k) {
            const Connection& c = net.connections[light.conns[k]];
            if (net.lanes[c.fromLane].edge != inEdge || net.lanes[c.toLane].edge != outEdge)
                continue;
            for (int p = 0; p < P; ++p)
                if (phases[p].state[k] == 'G' && !green[p]) { green[p] = 1; greens++; }
        }
        if (greens)
            for (int p = 0; p < P; ++p)
                if (green[p]) share[p] = 1.0 / greens;
        return share;
    };

    PlanningInputs out;

    // queue detectors: widest local zone per incoming lane
    std::map<int, int> laneQueueDet;
    for (size_t di = 0; di < net.detectors.size(); ++di) {
        const Detector& d = net.detectors[di];
        if (d.kind != DetectorKind::Local) continue;
        const Lane& ln = net.lanes[d.lane];
        if (net.edges[ln.edge].to != light.node) continue;
        auto it = laneQueueDet.find(d.lane);
        if (it == laneQueueDet.end() ||
            net.detectors[it->second].zoneLength < d.zoneLength)
            laneQueueDet[d.lane] = static_cast<int>(di);
    }
    for (const auto& [lane, di] : laneQueueDet) {
        RemoteSensorInput q;
        q.detector = di;
        q.distance = 0;
        q.phaseWeight.assign(P, 0.0);
        double total = 0;
        double downLimit = 0;
        for (int c : net.lanes[lane].connsOut) {
            int inEdge = net.lanes[net.connections[c].fromLane].edge;
            int outEdge = net.lanes[net.connections[c].toLane].edge;
            double cnt = 0;
            auto it = movementCount.find({inEdge, outEdge});
            if (it != movementCount.end()) cnt = it->second;
            if (cnt <= 0) cnt = 1e-3; // movements unseen in the demand still count a little
            auto share = movementPhaseShare(inEdge, outEdge);
            for (int p = 0; p < P; ++p) q.phaseWeight[p] += cnt * share[p];
            total += cnt;
            downLimit = std::max(downLimit, net.lanes[net.connections[c].toLane].speedLimit);
        }
        if (total > 0)
            for (double& w : q.phaseWeight) w /= total;
        q.downstreamLimit = downLimit;
        out.queues.push_back(std::move(q));
    }

    // remote sensors: walk upstream like the placement op, tracking the edge
    // chain so turning ratios can be read off the demand routes
    struct Frame {
        int lane;
        double distAtEnd;
        std::vector<int> chainDown; // edges from this lane's edge to the light, inclusive
    };
    std::vector<Frame> stack;
    for (int e : net.nodes[light.node].inEdges) {
        const Edge& edge = net.edges[e];
        for (int l = edge.firstLane; l < edge.firstLane + edge.laneCount; ++l)
            stack.push_back({l, 0.0, {e}});
    }
    std::set<std::pair<int, long>> expanded;
    double horizonDist = 0;
    for (const Lane& l : net.lanes) horizonDist = std::max(horizonDist, l.speedLimit * 15.0);

    while (!stack.empty()) {
        Frame f = std::move(stack.back());
        stack.pop_back();
        if (!expanded.insert({f.lane, std::lround(f.distAtEnd)}).second) continue;
        const Lane& lane = net.lanes[f.lane];
        int inEdgeAtLight = f.chainDown.back();

        double throughHere = 0;
        for (size_t ri = 0; ri < demand.routes.size(); ++ri)
            if (routeHasChain(demand.routes[ri], {lane.edge})) throughHere += routeCars[ri];

        for (size_t di = 0; di < net.detectors.size(); ++di) {
            const Detector& d = net.detectors[di];
            if (d.kind != DetectorKind::Remote || d.lane != f.lane) continue;
            RemoteSensorInput s;
            s.detector = static_cast<int>(di);
            s.distance = d.position + f.distAtEnd;
            s.phaseWeight.assign(P, 0.0);
            s.downstreamLimit = 0;
            if (throughHere > 0) {
                for (size_t ri = 0; ri < demand.routes.size(); ++ri) {
                    const Route& r = demand.routes[ri];
                    if (routeCars[ri] <= 0 || !routeHasChain(r, f.chainDown)) continue;
                    // find where the chain ends and read the movement
                    for (size_t i = 0; i + f.chainDown.size() <= r.edges.size(); ++i) {
                        bool ok = true;
                        for (size_t k = 0; k < f.chainDown.size(); ++k)
                            if (r.edges[i + k] != f.chainDown[k]) { ok = false; break; }
                        if (!ok) continue;
                        size_t endIdx = i + f.chainDown.size() - 1;
                        if (endIdx + 1 >= r.edges.size()) break;
                        auto share = movementPhaseShare(inEdgeAtLight, r.edges[endIdx + 1]);
                        for (int p = 0; p < P; ++p)
                            s.phaseWeight[p] += routeCars[ri] / throughHere * share[p];
                        break;
                    }
                }
            }
            for (int c : net.lanes[f.lane].connsOut)
                s.downstreamLimit = std::max(
                    s.downstreamLimit, net.lanes[net.connections[c].toLane].speedLimit);
            if (s.downstreamLimit == 0) s.downstreamLimit = lane.speedLimit;
            out.sensors.push_back(std::move(s));
        }

        double upstreamDist = f.distAtEnd + net.edges[lane.edge].length;
        if (upstreamDist >= horizonDist) continue;
        for (int c : lane.connsIn) {
            Frame nf;
            nf.lane = net.connections[c].fromLane;
            nf.distAtEnd = upstreamDist;
            nf.chainDown = f.chainDown;
            nf.chainDown.insert(nf.chainDown.begin(), net.lanes[nf.lane].edge);
            stack.push_back(std::move(nf));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// sim assembly

SimSetup buildSimSetup(const RoadNetwork& net, const ControllerConfigSet& cfg,
                       const Demand* demandForPlanning) {
    validateControllers(cfg, net);
    SimSetup setup;
    setup.tables.reserve(net.lights.size());
    setup.controllers.reserve(net.lights.size());
    for (const LightDef& light : net.lights) {
        const LightControllerConfig* lc = cfg.find(light.id);
        if (!lc)
            throw ValidationError("no controller configured for light '" + light.id + "'");
        std::vector<double> connLimits;
        connLimits.reserve(light.conns.size());
        for (int c : light.conns)
            connLimits.push_back(net.lanes[net.connections[c].fromLane].speedLimit);
        PhaseTable table = makePhaseTable(lc->phases, connLimits);
        std::shared_ptr<LightController> ctrl;
        switch (lc->kind) {
            case ControllerKind::Static:
                ctrl = std::make_shared<StaticController>(lc->st, table);
                break;
            case ControllerKind::Auction: {
                std::vector<int> dets;
                dets.reserve(lc->au.detectorIds.size());
                for (const std::string& id : lc->au.detectorIds) {
                    int di = net.detectorIndex(id);
                    if (di < 0)
                        throw ValidationError("light '" + light.id + "': unknown detector '" + id + "'");
                    dets.push_back(di);
                }
                ctrl = std::make_shared<AuctionController>(lc->au, std::move(dets));
                break;
            }
            case ControllerKind::Planning: {
                if (!demandForPlanning)
                    throw ValidationError("light '" + light.id +
                                          "': planning control needs demand statistics");
                PlanningInputs inputs =
                    buildPlanningInputs(net, *demandForPlanning, light.id, lc->phases);
                std::vector<double> minDur;
                for (const GreenPhase& p : lc->phases) minDur.push_back(p.minDuration);
                std::vector<std::vector<double>> yel(lc->phases.size(),
                                                     std::vector<double>(lc->phases.size(), 0.0));
                for (size_t i = 0; i < lc->phases.size(); ++i)
                    for (size_t j = 0; j < lc->phases.size(); ++j)
                        if (table.yellow[i][j].exists) yel[i][j] = table.yellow[i][j].duration;
                ctrl = std::make_shared<PlanningController>(lc->pl, std::move(inputs),
                                                            std::move(minDur), std::move(yel));
                break;
            }
        }
        setup.tables.push_back(std::move(table));
        setup.controllers.push_back(std::move(ctrl));
    }
    return setup;
}

} // namespace greenwave
