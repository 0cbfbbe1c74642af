#include "greenwave/net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <set>

namespace greenwave {

double parseDouble(const std::string& token, const std::string& context) {
    double v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw ParseError(context + ": expected a number, got '" + token + "'");
    return v;
}

long parseLong(const std::string& token, const std::string& context) {
    long v = 0;
    auto res = std::from_chars(token.data(), token.data() + token.size(), v);
    if (res.ec != std::errc() || res.ptr != token.data() + token.size())
        throw ParseError(context + ": expected an integer, got '" + token + "'");
    return v;
}

int RoadNetwork::nodeIndex(const std::string& id) const {
    auto it = nodeIds.find(id);
    return it == nodeIds.end() ? -1 : it->second;
}

int RoadNetwork::edgeIndex(const std::string& id) const {
    auto it = edgeIds.find(id);
    return it == edgeIds.end() ? -1 : it->second;
}

int RoadNetwork::lightIndex(const std::string& id) const {
    auto it = lightIds.find(id);
    return it == lightIds.end() ? -1 : it->second;
}

int RoadNetwork::detectorIndex(const std::string& id) const {
    auto it = detIds.find(id);
    return it == detIds.end() ? -1 : it->second;
}

int RoadNetwork::laneIndex(int edge, int lane) const {
    return edges[edge].firstLane + lane;
}

const std::string& RoadNetwork::laneName(int globalLane) const {
    if (laneNames.size() != lanes.size()) {
        laneNames.resize(lanes.size());
        for (size_t i = 0; i < lanes.size(); ++i)
            laneNames[i] = edges[lanes[i].edge].id + "_" + std::to_string(lanes[i].index);
    }
    return laneNames[globalLane];
}

std::vector<int> RoadNetwork::lanesToward(int edge, int nextEdge) const {
    std::vector<int> out;
    const Edge& e = edges[edge];
    for (int l = e.firstLane; l < e.firstLane + e.laneCount; ++l) {
        for (int c : lanes[l].connsOut) {
            if (lanes[connections[c].toLane].edge == nextEdge) {
                out.push_back(l);
                break;
            }
        }
    }
    return out;
}

int RoadNetwork::connectionToward(int globalLane, int nextEdge) const {
    for (int c : lanes[globalLane].connsOut)
        if (lanes[connections[c].toLane].edge == nextEdge) return c;
    return -1;
}

void RoadNetwork::rebuildIndexes() {
    nodeIds.clear();
    edgeIds.clear();
    lightIds.clear();
    detIds.clear();
    laneNames.clear();
    for (size_t i = 0; i < nodes.size(); ++i) nodeIds[nodes[i].id] = static_cast<int>(i);
    for (size_t i = 0; i < edges.size(); ++i) edgeIds[edges[i].id] = static_cast<int>(i);
    for (size_t i = 0; i < lights.size(); ++i) lightIds[lights[i].id] = static_cast<int>(i);
    for (size_t i = 0; i < detectors.size(); ++i) detIds[detectors[i].id] = static_cast<int>(i);

    for (Node& n : nodes) {
        n.inEdges.clear();
        n.outEdges.clear();
        n.light = -1;
    }
    for (size_t i = 0; i < edges.size(); ++i) {
        nodes[edges[i].from].outEdges.push_back(static_cast<int>(i));
        nodes[edges[i].to].inEdges.push_back(static_cast<int>(i));
    }
    for (Lane& l : lanes) {
        l.connsOut.clear();
        l.connsIn.clear();
    }
    for (size_t i = 0; i < connections.size(); ++i) {
        Connection& c = connections[i];
        c.node = edges[lanes[c.fromLane].edge].to;
        c.light = -1;
        c.signalIndex = -1;
        lanes[c.fromLane].connsOut.push_back(static_cast<int>(i));
        lanes[c.toLane].connsIn.push_back(static_cast<int>(i));
    }
    for (size_t li = 0; li < lights.size(); ++li) {
        LightDef& light = lights[li];
        light.conns.clear();
        nodes[light.node].light = static_cast<int>(li);
    }
    // Controlled connections keep file/declaration order; the position in
    // that order is the connection's index in the signal-state strings.
    for (size_t ci = 0; ci < connections.size(); ++ci) {
        Connection& c = connections[ci];
        int li = nodes[c.node].light;
        if (li >= 0) {
            c.light = li;
            c.signalIndex = static_cast<int>(lights[li].conns.size());
            lights[li].conns.push_back(static_cast<int>(ci));
        }
    }
}

void RoadNetwork::validate() const {
    for (const Edge& e : edges) {
        if (e.length <= 0)
            throw ValidationError("edge '" + e.id + "': edge length must be > 0");
        if (e.laneCount <= 0)
            throw ValidationError("edge '" + e.id + "': lane count must be > 0");
    }
    for (const Lane& l : lanes) {
        if (l.speedLimit <= 0)
            throw ValidationError("lane '" + edges[l.edge].id + "_" + std::to_string(l.index) +
                                  "': speed limit must be > 0");
    }
    for (size_t i = 0; i < connections.size(); ++i) {
        const Connection& c = connections[i];
        if (c.fromLane < 0 || c.fromLane >= static_cast<int>(lanes.size()) || c.toLane < 0 ||
            c.toLane >= static_cast<int>(lanes.size()))
            throw ValidationError("connection #" + std::to_string(i) + " references a missing lane");
        if (edges[lanes[c.fromLane].edge].to != edges[lanes[c.toLane].edge].from)
            throw ValidationError("connection #" + std::to_string(i) +
                                  ": lanes do not meet at a common node");
    }
    std::set<int> lightNodes;
    for (const LightDef& l : lights) {
        if (l.node < 0 || l.node >= static_cast<int>(nodes.size()))
            throw ValidationError("light '" + l.id + "' references a missing node");
        if (!lightNodes.insert(l.node).second)
            throw ValidationError("node '" + nodes[l.node].id +
                                  "' is referenced by more than one light");
    }
    for (const Detector& d : detectors) {
        if (d.lane < 0 || d.lane >= static_cast<int>(lanes.size()))
            throw ValidationError("detector '" + d.id + "' references a missing lane");
        if (d.position < 0)
            throw ValidationError("detector '" + d.id + "': position must be >= 0");
        if (d.zoneLength <= 0)
            throw ValidationError("detector '" + d.id + "': zone length must be > 0");
        if (d.position + d.zoneLength > edges[lanes[d.lane].edge].length + 1e-9)
            throw ValidationError("detector '" + d.id + "': zone extends beyond the lane");
    }
    // Weak connectivity over the whole edge set.
    if (!edges.empty()) {
        std::vector<char> seen(nodes.size(), 0);
        std::queue<int> q;
        q.push(edges[0].from);
        seen[edges[0].from] = 1;
        while (!q.empty()) {
            int n = q.front();
            q.pop();
            for (int e : nodes[n].outEdges)
                if (!seen[edges[e].to]) { seen[edges[e].to] = 1; q.push(edges[e].to); }
            for (int e : nodes[n].inEdges)
                if (!seen[edges[e].from]) { seen[edges[e].from] = 1; q.push(edges[e].from); }
        }
        for (const Edge& e : edges)
            if (!seen[e.from] || !seen[e.to])
                throw ValidationError("network is not connected: edge '" + e.id +
                                      "' is unreachable");
    }
}

void RoadNetwork::addDetectors(const std::vector<Detector>& dets) {
    for (const Detector& d : dets) {
        if (detectorIndex(d.id) >= 0)
            throw ValidationError("duplicate detector id '" + d.id + "'");
        detIds[d.id] = static_cast<int>(detectors.size());
        detectors.push_back(d);
    }
    validate();
}

int Demand::routeIndex(const std::string& id) const {
    auto it = routeIds.find(id);
    return it == routeIds.end() ? -1 : it->second;
}

void Demand::rebuildIndexes() {
    routeIds.clear();
    for (size_t i = 0; i < routes.size(); ++i) routeIds[routes[i].id] = static_cast<int>(i);
}

void sortRecords(std::vector<TravelRecord>& records) {
    std::stable_sort(records.begin(), records.end(), [](const TravelRecord& a, const TravelRecord& b) {
        if (a.entry != b.entry) return a.entry < b.entry;
        return a.vehicleId < b.vehicleId;
    });
}

void validateDemand(const Demand& demand, const RoadNetwork& net) {
    for (const Route& r : demand.routes) {
        if (r.edges.empty())
            throw ValidationError("route '" + r.id + "' has no edges");
        std::set<int> visited;
        for (size_t i = 0; i < r.edges.size(); ++i) {
            int e = r.edges[i];
            if (e < 0 || e >= static_cast<int>(net.edges.size()))
                throw ValidationError("route '" + r.id + "' references a missing edge");
            if (i + 1 < r.edges.size()) {
                if (net.lanesToward(e, r.edges[i + 1]).empty())
                    throw ValidationError("route '" + r.id + "' is not connected: no connection from '" +
                                          net.edges[e].id + "' to '" + net.edges[r.edges[i + 1]].id + "'");
                // interior nodes only; a route may not pass the same intersection twice
                int node = net.edges[e].to;
                if (!visited.insert(node).second)
                    throw ValidationError("route '" + r.id + "' visits intersection '" +
                                          net.nodes[node].id + "' twice");
            }
        }
    }
    for (const TravelRecord& rec : demand.records) {
        if (rec.route < 0 || rec.route >= static_cast<int>(demand.routes.size()))
            throw ValidationError("car '" + rec.vehicleId + "' references a missing route");
        if (rec.hasExit() && rec.exit < rec.entry)
            throw ValidationError("car '" + rec.vehicleId + "': exit time precedes entry time");
        if (rec.vehicleType < 0)
            throw ValidationError("car '" + rec.vehicleId + "': bad vehicle type");
    }
}

std::vector<Detector> placePlanningDetectors(const RoadNetwork& net, const std::string& lightId,
                                             double horizonS, double spacingS) {
    if (!(horizonS > spacingS && spacingS > 0))
        throw ValidationError("detector placement requires horizon > spacing > 0");
    int li = net.lightIndex(lightId);
    if (li < 0) throw ValidationError("unknown light '" + lightId + "'");
    int lightNode = net.lights[li].node;

    // Walk upstream from the stop line, accumulating travel time at the
    // speed limit. `timeAtEnd` is the travel time from this lane's
    // downstream end to the controlled stop line.
    struct Frame {
        int lane;
        double timeAtEnd;
        bool direct; // lane ends at the controlled intersection itself
    };
    std::vector<Frame> stack;
    for (int e : net.nodes[lightNode].inEdges) {
        const Edge& edge = net.edges[e];
        for (int l = edge.firstLane; l < edge.firstLane + edge.laneCount; ++l)
            stack.push_back({l, 0.0, true});
    }

    std::vector<Detector> result;
    std::set<std::pair<int, long>> placed; // (lane, position in mm) to dedupe converging walks
    std::set<std::pair<int, long>> expanded;

    while (!stack.empty()) {
        Frame f = stack.back();
        stack.pop_back();
        long timeKey = std::lround(f.timeAtEnd * 1000.0);
        if (!expanded.insert({f.lane, timeKey}).second) continue;

        const Lane& lane = net.lanes[f.lane];
        double laneTime = net.edges[lane.edge].length / lane.speedLimit;

        // detectors at total travel times k*spacing, k = 0..horizon/spacing
        for (int k = 0; ; ++k) {
            double t = k * spacingS;
            if (t > horizonS + 1e-9) break;
            if (t + 1e-9 < f.timeAtEnd) continue;
            if (t > f.timeAtEnd + laneTime + 1e-9) break;
            double pos = (t - f.timeAtEnd) * lane.speedLimit;
            if (pos > net.edges[lane.edge].length - 2.0) continue; // zone must fit on the lane
            long posKey = std::lround(pos * 1000.0);
            if (!placed.insert({f.lane, posKey}).second) continue;
            Detector d;
            d.id = "pd_" + lightId + "_" + net.laneName(f.lane) + "_" + std::to_string(k);
            d.lane = f.lane;
            d.position = pos;
            d.zoneLength = 2.0;
            d.kind = (f.direct && k == 0) ? DetectorKind::Local : DetectorKind::Remote;
            result.push_back(d);
        }

        double upstreamTime = f.timeAtEnd + laneTime;
        if (upstreamTime >= horizonS) continue;
        for (int c : lane.connsIn)
            stack.push_back({net.connections[c].fromLane, upstreamTime, false});
    }

    std::sort(result.begin(), result.end(), [](const Detector& a, const Detector& b) {
        return a.id < b.id;
    });
    return result;
}

std::vector<Detector> placeQueueDetectors(const RoadNetwork& net, const std::string& lightId,
                                          double zoneLength) {
    int li = net.lightIndex(lightId);
    if (li < 0) throw ValidationError("unknown light '" + lightId + "'");
    std::vector<Detector> result;
    for (int e : net.nodes[net.lights[li].node].inEdges) {
        const Edge& edge = net.edges[e];
        for (int l = edge.firstLane; l < edge.firstLane + edge.laneCount; ++l) {
            Detector d;
            d.id = "qd_" + lightId + "_" + net.laneName(l);
            d.lane = l;
            d.position = 0;
            d.zoneLength = std::min(zoneLength, edge.length);
            d.kind = DetectorKind::Local;
            result.push_back(d);
        }
    }
    return result;
}

std::optional<std::vector<int>> shortestRoute(const RoadNetwork& net, int fromEdge, int toEdge) {
    // Dijkstra over edges with travel-time weights; paths are node-simple
    // because we never re-enter a settled edge's end node.
    size_t n = net.edges.size();
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::vector<int> prev(n, -1);
    auto edgeTime = [&](int e) {
        const Edge& ed = net.edges[e];
        double limit = 0;
        for (int l = ed.firstLane; l < ed.firstLane + ed.laneCount; ++l)
            limit = std::max(limit, net.lanes[l].speedLimit);
        return ed.length / limit;
    };
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    dist[fromEdge] = edgeTime(fromEdge);
    pq.push({dist[fromEdge], fromEdge});
    while (!pq.empty()) {
        auto [d, e] = pq.top();
        pq.pop();
        if (d > dist[e]) continue;
        if (e == toEdge) break;
        const Edge& ed = net.edges[e];
        for (int l = ed.firstLane; l < ed.firstLane + ed.laneCount; ++l) {
            for (int c : net.lanes[l].connsOut) {
                int ne = net.lanes[net.connections[c].toLane].edge;
                double nd = d + edgeTime(ne);
                if (nd < dist[ne]) {
                    dist[ne] = nd;
                    prev[ne] = e;
                    pq.push({nd, ne});
                }
            }
        }
    }
    if (!std::isfinite(dist[toEdge])) return std::nullopt;
    std::vector<int> path;
    for (int e = toEdge; e != -1; e = prev[e]) path.push_back(e);
    std::reverse(path.begin(), path.end());
    if (path.front() != fromEdge) return std::nullopt;
    // reject paths that revisit an interior node (possible with parallel edges)
    std::set<int> visited;
    for (size_t i = 0; i + 1 < path.size(); ++i)
        if (!visited.insert(net.edges[path[i]].to).second) return std::nullopt;
    return path;
}

} // namespace greenwave
