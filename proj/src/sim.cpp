#include "greenwave/sim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

namespace greenwave {

const std::vector<VehicleType>& vehicleCatalog() {
    static const std::vector<VehicleType> catalog = {
        {"compact", 2.6, 4.5, 6.0, 4.0, 1.0, 0.8, 1.10},
        {"sedan", 2.2, 4.2, 5.5, 4.8, 1.2, 1.0, 1.00},
        {"suv", 2.0, 4.0, 5.5, 5.2, 1.5, 1.0, 1.00},
        {"van", 1.8, 4.0, 5.0, 5.8, 1.8, 1.2, 0.95},
        {"pickup", 1.9, 4.0, 5.2, 5.5, 1.5, 1.1, 1.00},
        {"bus", 1.2, 3.5, 4.5, 12.0, 2.5, 1.5, 0.90},
        {"truck", 1.0, 3.5, 4.5, 10.0, 2.5, 1.5, 0.85},
    };
    return catalog;
}

YellowGrid buildYellowGrid(const std::vector<std::string>& phaseStates,
                           const std::vector<double>& connSpeedLimits) {
    size_t n = phaseStates.size();
    for (const std::string& s : phaseStates) {
        if (s.size() != phaseStates[0].size())
            throw ValidationError("phase state strings have mismatched lengths");
        if (s.size() != connSpeedLimits.size())
            throw ValidationError("phase state length does not match connection count");
        for (double v : connSpeedLimits)
            if (v <= 0) throw ValidationError("connection speed limits must be > 0");
    }
    YellowGrid grid(n, std::vector<YellowPhase>(n));
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            std::string y = phaseStates[i];
            double maxLimit = 0;
            bool any = false;
            for (size_t k = 0; k < y.size(); ++k) {
                if (phaseStates[i][k] == 'G' && phaseStates[j][k] == 'r') {
                    y[k] = 'y';
                    maxLimit = std::max(maxLimit, connSpeedLimits[k]);
                    any = true;
                }
            }
            if (any) {
                grid[i][j].exists = true;
                grid[i][j].state = y;
                grid[i][j].duration = maxLimit / 3.0 + 1.0;
            }
        }
    }
    return grid;
}

PhaseTable makePhaseTable(const std::vector<GreenPhase>& phases,
                          const std::vector<double>& connSpeedLimits) {
    PhaseTable t;
    t.phases = phases;
    std::vector<std::string> states;
    states.reserve(phases.size());
    for (const GreenPhase& p : phases) states.push_back(p.state);
    t.yellow = buildYellowGrid(states, connSpeedLimits);
    return t;
}

namespace {

// exact "leader may brake to a stop" speed bound
inline double safeSpeed(double gap, double leaderSpeed, double decel, double headway) {
    if (gap <= 0) return 0;
    double bt = decel * headway;
    return -bt + std::sqrt(bt * bt + leaderSpeed * leaderSpeed + 2.0 * decel * gap);
}

constexpr double kStopMargin = 1.0; // cars aim to halt this far before the stop line

struct Vehicle {
    int record = -1;
    const VehicleType* type = nullptr;
    int lane = -1;
    int conn = -1;      // connection it will take at the lane end, -1 = exits
    int routeStep = 0;
    double pos = 0;     // front bumper, meters from lane start
    double prevPos = 0;
    double speed = 0;
    double stagedSpeed = 0;
};

struct LightRt {
    PhaseTable table;
    std::shared_ptr<LightController> ctrl;
    int phase = 0;
    double phaseStart = 0;
    bool inYellow = false;
    int target = 0;
    double yellowEnd = 0;
    int lastDecisionSecond = -1;
    const std::string* state = nullptr;
};

struct DetectorRt {
    int lane;
    double lineAbs;   // crossing line, meters from lane start
    double zoneFrom;  // zone interval on the lane, [zoneFrom, lineAbs]
    DetectorReading reading;
    double passSpeedSum = 0;
    std::vector<PassEvent> newPasses;
};

struct EdgeSpeedEma {
    double value = 0;
    double lastUpdate = 0;
    bool init = false;
};

} // namespace

struct Simulation::Impl : LightView {
    const RoadNetwork& net;
    const Demand& demand;
    SimOptions opts;

    std::vector<Vehicle> pool;
    std::vector<int> freeSlots;
    std::vector<std::vector<int>> laneCars; // per lane, front-most first
    std::vector<LightRt> lightRt;
    std::vector<DetectorRt> detRt;
    std::vector<std::vector<int>> laneDets;
    std::vector<EdgeSpeedEma> edgeSpeed;
    std::vector<std::deque<int>> entryQueues; // per edge, record indices
    std::vector<double> entryTimes;           // post-jitter entry per record
    std::vector<double> exitTimes;            // < 0 while pending
    std::vector<int> releaseOrder;            // record indices by entry time
    size_t nextRelease = 0;

    long stepIndex = 0;
    long released = 0, inNetwork = 0, finishedCars = 0, waiting = 0;
    int viewLight = 0; // light currently being decided, for the LightView

    std::vector<std::vector<PhaseChange>> trace;
    std::vector<char> finishedFlag;
    bool detectorsActive = true;
    bool collectPassEvents = false;
    std::vector<std::string> invariantFailures;

    Impl(const RoadNetwork& n, const Demand& d, std::vector<PhaseTable> tables,
         std::vector<std::shared_ptr<LightController>> controllers, const SimOptions& o)
        : net(n), demand(d), opts(o) {
        if (tables.size() != net.lights.size() || controllers.size() != net.lights.size())
            throw ValidationError("one phase table and controller required per light");
        laneCars.resize(net.lanes.size());
        entryQueues.resize(net.edges.size());
        edgeSpeed.resize(net.edges.size());
        lightRt.resize(net.lights.size());
        bool anyWantsDetectors = false;
        for (size_t i = 0; i < net.lights.size(); ++i) {
            LightRt& rt = lightRt[i];
            rt.table = std::move(tables[i]);
            rt.ctrl = std::move(controllers[i]);
            if (rt.table.phases.empty())
                throw ValidationError("light '" + net.lights[i].id + "' has no phases");
            for (const GreenPhase& p : rt.table.phases)
                if (p.state.size() != net.lights[i].conns.size())
                    throw ValidationError("light '" + net.lights[i].id +
                                          "': phase state length does not match controlled connections");
            rt.state = &rt.table.phases[0].state;
            if (!rt.ctrl && rt.table.phases.size() > 1)
                throw ValidationError("light '" + net.lights[i].id + "' needs a controller");
            if (rt.ctrl && rt.ctrl->wantsDetectors()) anyWantsDetectors = true;
            if (rt.ctrl && rt.ctrl->wantsPassEvents()) collectPassEvents = true;
        }
        detectorsActive = anyWantsDetectors || opts.forceDetectors;

        laneDets.resize(net.lanes.size());
        detRt.resize(net.detectors.size());
        for (size_t i = 0; i < net.detectors.size(); ++i) {
            const Detector& d = net.detectors[i];
            double laneLen = net.edges[net.lanes[d.lane].edge].length;
            detRt[i].lane = d.lane;
            detRt[i].lineAbs = laneLen - d.position;
            detRt[i].zoneFrom = laneLen - d.position - d.zoneLength;
            laneDets[d.lane].push_back(static_cast<int>(i));
        }

        entryTimes.resize(demand.records.size());
        exitTimes.assign(demand.records.size(), -1.0);
        finishedFlag.assign(demand.records.size(), 0);
        Rng rng(opts.seed);
        for (size_t i = 0; i < demand.records.size(); ++i) {
            entryTimes[i] = demand.records[i].entry;
            if (opts.entryJitter > 0)
                entryTimes[i] = std::max(0.0, entryTimes[i] + rng.uniform(-opts.entryJitter, opts.entryJitter));
        }
        releaseOrder.resize(demand.records.size());
        for (size_t i = 0; i < releaseOrder.size(); ++i) releaseOrder[i] = static_cast<int>(i);
        std::stable_sort(releaseOrder.begin(), releaseOrder.end(), [&](int a, int b) {
            if (entryTimes[a] != entryTimes[b]) return entryTimes[a] < entryTimes[b];
            return demand.records[a].vehicleId < demand.records[b].vehicleId;
        });

        if (opts.recordPhaseTrace) {
            trace.resize(net.lights.size());
            for (size_t i = 0; i < net.lights.size(); ++i) trace[i].push_back({0.0, 0, 0});
        }
    }

    double clockNow() const { return static_cast<double>(stepIndex) * opts.dt; }

    // ---- LightView ----
    double clock() const override { return clockNow(); }
    int currentPhase() const override { return lightRt[viewLight].phase; }
    double phaseElapsed() const override {
        return clockNow() - lightRt[viewLight].phaseStart;
    }
    int phaseCount() const override {
        return static_cast<int>(lightRt[viewLight].table.phases.size());
    }
    const DetectorReading& reading(int det) const override { return detRt[det].reading; }
    void takePasses(int det, std::vector<PassEvent>& out) override {
        DetectorRt& rt = detRt[det];
        out.insert(out.end(), rt.newPasses.begin(), rt.newPasses.end());
        rt.newPasses.clear();
        rt.reading.passCount = 0;
        rt.reading.meanSpeed = 0;
        rt.passSpeedSum = 0;
    }
    double observedSpeed(int det) const override {
        const EdgeSpeedEma& e = edgeSpeed[net.lanes[detRt[det].lane].edge];
        if (e.init) return e.value;
        return net.lanes[detRt[det].lane].speedLimit;
    }

    char signalChar(int conn) const {
        const Connection& c = net.connections[conn];
        if (c.light < 0) return 'G';
        return (*lightRt[c.light].state)[c.signalIndex];
    }

    void beginTransition(LightRt& rt, int lightIdx, int req, double now) {
        const YellowPhase& y = rt.table.yellow[rt.phase][req];
        if (y.exists) {
            rt.inYellow = true;
            rt.target = req;
            rt.yellowEnd = now + y.duration;
            rt.state = &y.state;
            if (opts.recordPhaseTrace) trace[lightIdx].push_back({now, -1, req});
        } else {
            rt.phase = req;
            rt.phaseStart = now;
            rt.state = &rt.table.phases[req].state;
            if (opts.recordPhaseTrace) trace[lightIdx].push_back({now, req, req});
        }
    }

    void updateLights() {
        double now = clockNow();
        for (size_t i = 0; i < lightRt.size(); ++i) {
            LightRt& rt = lightRt[i];
            if (rt.inYellow) {
                if (now + 1e-9 >= rt.yellowEnd) {
                    rt.inYellow = false;
                    rt.phase = rt.target;
                    rt.phaseStart = rt.yellowEnd;
                    rt.state = &rt.table.phases[rt.phase].state;
                    if (opts.recordPhaseTrace) trace[i].push_back({rt.yellowEnd, rt.phase, rt.phase});
                } else {
                    continue;
                }
            }
            if (!rt.ctrl || rt.table.phases.size() < 2) continue;
            int sec = static_cast<int>(std::floor(now + 1e-9));
            if (sec <= rt.lastDecisionSecond) continue;
            rt.lastDecisionSecond = sec;
            if (now - rt.phaseStart + 1e-9 < rt.table.phases[rt.phase].minDuration) continue;
            viewLight = static_cast<int>(i);
            int req = rt.ctrl->decide(*this);
            if (req != rt.phase && req >= 0 && req < static_cast<int>(rt.table.phases.size()))
                beginTransition(rt, static_cast<int>(i), req, now);
        }
    }

    int chooseLane(int edge, int nextEdge, int nextNextEdge) const {
        const Edge& e = net.edges[edge];
        int best = -1;
        int bestScore = std::numeric_limits<int>::max();
        for (int l = e.firstLane; l < e.firstLane + e.laneCount; ++l) {
            int c = nextEdge >= 0 ? net.connectionToward(l, nextEdge) : 0;
            if (nextEdge >= 0 && c < 0) continue;
            int onward = 0;
            if (nextEdge >= 0 && nextNextEdge >= 0) {
                int toLane = net.connections[c].toLane;
                onward = net.connectionToward(toLane, nextNextEdge) >= 0 ? 0 : 1;
            }
            int score = onward * 1000 + static_cast<int>(laneCars[l].size());
            if (score < bestScore) {
                bestScore = score;
                best = l;
            }
        }
        return best;
    }

    int routeEdge(const Vehicle& v, int offset) const {
        const Route& r = demand.routes[demand.records[v.record].route];
        size_t idx = static_cast<size_t>(v.routeStep + offset);
        return idx < r.edges.size() ? r.edges[idx] : -1;
    }

    void assignConnection(Vehicle& v) {
        int nextEdge = routeEdge(v, 1);
        if (nextEdge < 0) {
            v.conn = -1;
            return;
        }
        int nextNext = routeEdge(v, 2);
        int bestConn = -1;
        int bestScore = std::numeric_limits<int>::max();
        for (int c : net.lanes[v.lane].connsOut) {
            if (net.lanes[net.connections[c].toLane].edge != nextEdge) continue;
            int toLane = net.connections[c].toLane;
            int onward = (nextNext >= 0 && net.connectionToward(toLane, nextNext) < 0) ? 1 : 0;
            int score = onward * 1000 + static_cast<int>(laneCars[toLane].size());
            if (score < bestScore) {
                bestScore = score;
                bestConn = c;
            }
        }
        v.conn = bestConn; // may be -1 on malformed lane-level connectivity
    }

    void releaseDemand() {
        double now = clockNow();
        while (nextRelease < releaseOrder.size()) {
            int rec = releaseOrder[nextRelease];
            if (entryTimes[rec] > now + 1e-9) break;
            const Route& r = demand.routes[demand.records[rec].route];
            entryQueues[r.edges.front()].push_back(rec);
            ++nextRelease;
            ++released;
            ++waiting;
        }
    }

    void insertVehicles() {
        for (size_t e = 0; e < entryQueues.size(); ++e) {
            auto& q = entryQueues[e];
            if (q.empty()) continue;
            int rec = q.front();
            const TravelRecord& tr = demand.records[rec];
            const Route& route = demand.routes[tr.route];
            const VehicleType& vt = vehicleCatalog()[static_cast<size_t>(tr.vehicleType) %
                                                     vehicleCatalog().size()];
            int nextEdge = route.edges.size() > 1 ? route.edges[1] : -1;
            int nextNext = route.edges.size() > 2 ? route.edges[2] : -1;
            int lane = chooseLane(static_cast<int>(e), nextEdge, nextNext);
            if (lane < 0) lane = net.edges[e].firstLane;
            // need room for the whole car plus its standstill gap
            const auto& cars = laneCars[lane];
            if (!cars.empty()) {
                const Vehicle& rear = pool[cars.back()];
                if (rear.pos - rear.type->length - vt.minGap < 0) continue;
            }
            int slot;
            if (!freeSlots.empty()) {
                slot = freeSlots.back();
                freeSlots.pop_back();
            } else {
                slot = static_cast<int>(pool.size());
                pool.emplace_back();
            }
            Vehicle& v = pool[slot];
            v = Vehicle{};
            v.record = rec;
            v.type = &vt;
            v.lane = lane;
            v.routeStep = 0;
            v.pos = 0;
            v.prevPos = 0;
            v.speed = 0;
            assignConnection(v);
            laneCars[lane].push_back(slot);
            q.pop_front();
            --waiting;
            ++inNetwork;
        }
    }

    void computeSpeeds() {
        double dt = opts.dt;
        for (size_t l = 0; l < laneCars.size(); ++l) {
            const auto& cars = laneCars[l];
            if (cars.empty()) continue;
            double laneLen = net.edges[net.lanes[l].edge].length;
            double limit = net.lanes[l].speedLimit;
            for (size_t i = 0; i < cars.size(); ++i) {
                Vehicle& v = pool[cars[i]];
                const VehicleType& t = *v.type;
                double vMax = std::min(limit * t.speedFactor, v.speed + t.maxAccel * dt);
                double vCar = std::numeric_limits<double>::infinity();
                double vWall = std::numeric_limits<double>::infinity();
                if (i > 0) {
                    const Vehicle& lead = pool[cars[i - 1]];
                    double gap = lead.pos - lead.type->length - v.pos - t.minGap;
                    vCar = safeSpeed(gap, lead.speed, t.maxDecel, t.headway);
                } else {
                    bool mayCross = false;
                    double wallGap = laneLen - v.pos - kStopMargin;
                    if (v.conn < 0 && routeEdge(v, 1) < 0) {
                        mayCross = true; // route ends here, exit freely
                    } else if (v.conn < 0) {
                        mayCross = false; // dead-end lane for this route
                    } else {
                        char s = signalChar(v.conn);
                        if (s == 'G') {
                            mayCross = true;
                        } else if (s == 'y') {
                            double stopDist = v.speed * t.headway +
                                              v.speed * v.speed / (2.0 * t.maxDecel);
                            mayCross = stopDist > wallGap; // too close to stop, roll through
                        }
                    }
                    if (!mayCross) {
                        vWall = safeSpeed(wallGap, 0.0, t.maxDecel, t.headway);
                    } else if (v.conn >= 0) {
                        const auto& ahead = laneCars[net.connections[v.conn].toLane];
                        if (!ahead.empty()) {
                            const Vehicle& lead = pool[ahead.back()];
                            double gap = (laneLen - v.pos) + lead.pos - lead.type->length - t.minGap;
                            vCar = safeSpeed(gap, lead.speed, t.maxDecel, t.headway);
                        }
                    }
                }
                double vNew = std::min(vMax, std::max(vCar, v.speed - t.emergencyDecel * dt));
                vNew = std::min(vNew, vWall);
                v.stagedSpeed = std::max(0.0, vNew);
            }
        }
    }

    void finishVehicle(int slot, double exitTime) {
        Vehicle& v = pool[slot];
        exitTimes[v.record] = exitTime;
        finishedFlag[v.record] = 1;
        ++finishedCars;
        --inNetwork;
        freeSlots.push_back(slot);
    }

    void advanceVehicles() {
        double dt = opts.dt;
        double endTime = clockNow() + dt;
        for (auto& cars : laneCars) {
            for (int slot : cars) {
                Vehicle& v = pool[slot];
                v.prevPos = v.pos;
                v.speed = v.stagedSpeed;
                v.pos += v.speed * dt;
            }
        }
        // lane transfers in a second pass so every car moves exactly once
        for (size_t l = 0; l < laneCars.size(); ++l) {
            auto& cars = laneCars[l];
            if (cars.empty()) continue;
            double laneLen = net.edges[net.lanes[l].edge].length;
            while (!cars.empty()) {
                int slot = cars.front();
                Vehicle& v = pool[slot];
                if (v.pos < laneLen) break;
                if (v.conn < 0) {
                    if (routeEdge(v, 1) < 0) {
                        cars.erase(cars.begin());
                        finishVehicle(slot, endTime);
                        continue;
                    }
                    v.pos = laneLen - kStopMargin * 0.5; // stranded, hold at the end
                    v.speed = 0;
                    break;
                }
                char s = signalChar(v.conn);
                if (s == 'r') { // red wall overshoot, clamp behind the line
                    v.pos = std::min(v.pos, laneLen - kStopMargin * 0.25);
                    v.speed = 0;
                    break;
                }
                int toLane = net.connections[v.conn].toLane;
                auto& target = laneCars[toLane];
                double newPos = v.pos - laneLen;
                if (!target.empty()) {
                    const Vehicle& rear = pool[target.back()];
                    if (rear.pos - rear.type->length - newPos < 0) {
                        v.pos = laneLen - kStopMargin * 0.25; // spillback, wait at the line
                        v.speed = 0;
                        break;
                    }
                }
                cars.erase(cars.begin());
                v.lane = toLane;
                v.pos = newPos;
                v.prevPos = newPos - v.speed * dt;
                v.routeStep++;
                assignConnection(v);
                target.push_back(slot);
            }
        }
    }

    void updateDetectors() {
        if (!detectorsActive) return;
        double now = clockNow() + opts.dt;
        for (DetectorRt& d : detRt) d.reading.occupancy = 0;
        for (size_t l = 0; l < laneCars.size(); ++l) {
            if (laneDets[l].empty()) continue;
            for (int di : laneDets[l]) {
                DetectorRt& d = detRt[di];
                for (int slot : laneCars[l]) {
                    const Vehicle& v = pool[slot];
                    double front = v.pos;
                    double rear = v.pos - v.type->length;
                    if (front >= d.zoneFrom && rear <= d.lineAbs) d.reading.occupancy++;
                    if (v.prevPos < d.lineAbs && front >= d.lineAbs) {
                        d.reading.passCount++;
                        d.passSpeedSum += v.speed;
                        d.reading.meanSpeed = d.passSpeedSum / d.reading.passCount;
                        if (collectPassEvents) d.newPasses.push_back({now, v.speed});
                        EdgeSpeedEma& ema = edgeSpeed[net.lanes[l].edge];
                        if (!ema.init) {
                            ema.value = v.speed;
                            ema.init = true;
                        } else {
                            // half-life 60 s on the sampling gap
                            double a = 1.0 - std::exp2(-(now - ema.lastUpdate) / 60.0);
                            ema.value += a * (v.speed - ema.value);
                        }
                        ema.lastUpdate = now;
                    }
                }
            }
        }
    }

    void checkInvariants() {
        for (size_t l = 0; l < laneCars.size(); ++l) {
            const auto& cars = laneCars[l];
            for (size_t i = 1; i < cars.size(); ++i) {
                const Vehicle& lead = pool[cars[i - 1]];
                const Vehicle& fol = pool[cars[i]];
                double gap = lead.pos - lead.type->length - fol.pos;
                if (gap < -1e-9)
                    fail("gap violation on lane " + net.laneName(static_cast<int>(l)) + ": " +
                         formatDouble(gap));
            }
        }
        if (released != waiting + inNetwork + finishedCars)
            fail("conservation violation: released=" + std::to_string(released) +
                 " waiting=" + std::to_string(waiting) + " active=" + std::to_string(inNetwork) +
                 " finished=" + std::to_string(finishedCars));
    }

    void fail(const std::string& msg) {
        invariantFailures.push_back(msg);
        if (opts.onInvariantFailure) opts.onInvariantFailure(msg);
    }

    void stepOnce() {
        releaseDemand();
        updateLights();
        computeSpeeds();
        advanceVehicles();
        updateDetectors();
        insertVehicles();
        ++stepIndex;
        if (opts.checkInvariants) checkInvariants();
    }

    double freeFlowRemaining(const Vehicle& v) const {
        const Route& r = demand.routes[demand.records[v.record].route];
        double t = 0;
        {
            const Lane& ln = net.lanes[v.lane];
            double remaining = net.edges[ln.edge].length - v.pos;
            t += remaining / (ln.speedLimit * v.type->speedFactor);
        }
        for (size_t i = static_cast<size_t>(v.routeStep) + 1; i < r.edges.size(); ++i)
            t += edgeFreeFlowTime(r.edges[i], v.type->speedFactor);
        return t;
    }

    double edgeFreeFlowTime(int e, double speedFactor) const {
        const Edge& ed = net.edges[e];
        double best = 0;
        for (int l = ed.firstLane; l < ed.firstLane + ed.laneCount; ++l)
            best = std::max(best, net.lanes[l].speedLimit);
        return ed.length / (best * speedFactor);
    }

    double routeFreeFlowTime(int rec) const {
        const Route& r = demand.routes[demand.records[rec].route];
        double sf = vehicleCatalog()[static_cast<size_t>(demand.records[rec].vehicleType) %
                                     vehicleCatalog().size()]
                        .speedFactor;
        double t = 0;
        for (int e : r.edges) t += edgeFreeFlowTime(e, sf);
        return t;
    }

    SimResult finalize() {
        double horizon = opts.horizon;
        // unfinished cars are charged the horizon plus their remaining
        // free-flow time so the objective stays finite and rewards progress
        for (size_t l = 0; l < laneCars.size(); ++l)
            for (int slot : laneCars[l]) {
                const Vehicle& v = pool[slot];
                exitTimes[v.record] = horizon + freeFlowRemaining(v);
            }
        for (const auto& q : entryQueues)
            for (int rec : q)
                exitTimes[rec] = std::max(horizon, entryTimes[rec]) + routeFreeFlowTime(rec);
        for (size_t i = nextRelease; i < releaseOrder.size(); ++i) {
            int rec = releaseOrder[i];
            exitTimes[rec] = std::max(horizon, entryTimes[rec]) + routeFreeFlowTime(rec);
        }

        SimResult res;
        res.cars.reserve(demand.records.size());
        for (int rec : releaseOrder) {
            CarResult c;
            c.vehicleId = demand.records[rec].vehicleId;
            c.entry = entryTimes[rec];
            c.finished = finishedFlag[rec] != 0;
            c.exit = exitTimes[rec];
            c.journey = c.exit - c.entry;
            res.objective += c.journey;
            if (c.finished) res.finished++;
            else res.unfinished++;
            res.cars.push_back(std::move(c));
        }
        res.mtt = res.cars.empty() ? 0.0 : res.objective / static_cast<double>(res.cars.size());
        return res;
    }
};

Simulation::Simulation(const RoadNetwork& net, const Demand& demand,
                       std::vector<PhaseTable> tables,
                       std::vector<std::shared_ptr<LightController>> controllers,
                       const SimOptions& opts)
    : impl(std::make_unique<Impl>(net, demand, std::move(tables), std::move(controllers), opts)) {}

Simulation::~Simulation() = default;

void Simulation::step() { impl->stepOnce(); }

SimResult Simulation::run() {
    long maxSteps = static_cast<long>(std::ceil(impl->opts.horizon / impl->opts.dt - 1e-9));
    while (impl->stepIndex < maxSteps) {
        impl->stepOnce();
        if (impl->finishedCars == static_cast<long>(impl->demand.records.size())) break;
    }
    return impl->finalize();
}

double Simulation::clock() const { return impl->clockNow(); }

DetectorReading Simulation::readDetector(const std::string& id) const {
    int di = impl->net.detectorIndex(id);
    if (di < 0) throw ValidationError("unknown detector '" + id + "'");
    return impl->detRt[di].reading;
}

const std::vector<std::vector<PhaseChange>>& Simulation::phaseTrace() const { return impl->trace; }

long Simulation::enteredCount() const { return impl->released; }
long Simulation::waitingCount() const { return impl->waiting; }
long Simulation::activeCount() const { return impl->inNetwork; }
long Simulation::finishedCount() const { return impl->finishedCars; }

SimResult runSimulation(const RoadNetwork& net, const Demand& demand,
                        std::vector<PhaseTable> tables,
                        std::vector<std::shared_ptr<LightController>> controllers,
                        const SimOptions& opts) {
    Simulation sim(net, demand, std::move(tables), std::move(controllers), opts);
    return sim.run();
}

std::string simResultCsv(const SimResult& r) {
    std::ostringstream out;
    out << "car_id,entry_s,exit_s,journey_s,finished\n";
    for (const CarResult& c : r.cars)
        out << c.vehicleId << "," << formatDouble(c.entry) << "," << formatDouble(c.exit) << ","
            << formatDouble(c.journey) << "," << (c.finished ? 1 : 0) << "\n";
    return out.str();
}

void writeSimResult(const SimResult& r, const std::string& csvPath) {
    std::ofstream out(csvPath, std::ios::binary);
    if (!out) throw ParseError("cannot open '" + csvPath + "' for writing");
    out << simResultCsv(r);
}

} // namespace greenwave
