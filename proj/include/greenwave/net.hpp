#ifndef GREENWAVE_NET_H
#define GREENWAVE_NET_H

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "greenwave/common.hpp"

namespace greenwave {

struct Node {
    std::string id;
    double x = 0, y = 0;
    std::vector<int> inEdges;
    std::vector<int> outEdges;
    int light = -1; // index into RoadNetwork::lights, -1 if uncontrolled
};

struct Edge {
    std::string id;
    int from = -1, to = -1; // node indices
    double length = 0;      // meters
    int laneCount = 0;
    int firstLane = -1; // lanes are contiguous: [firstLane, firstLane + laneCount)
};

struct Lane {
    int edge = -1;
    int index = 0;          // 0 = rightmost
    double speedLimit = 0;  // m/s
    std::vector<int> connsOut; // connection indices leaving this lane
    std::vector<int> connsIn;
};

// Lane-to-lane turning relation through the from-edge's end node.
struct Connection {
    int fromLane = -1;
    int toLane = -1;
    int node = -1;
    int light = -1;       // controlling light, -1 if none
    int signalIndex = -1; // position in the light's signal-state strings
};

struct LightDef {
    std::string id;
    int node = -1;
    std::vector<int> conns; // controlled connections, in declaration order
};

enum class DetectorKind { Local, Remote };

struct Detector {
    std::string id;
    int lane = -1;
    double position = 0;   // meters upstream of the lane end (stop line)
    double zoneLength = 2; // meters, zone extends upstream of `position`
    DetectorKind kind = DetectorKind::Local;
};

struct Route {
    std::string id;
    double entryOffset = 0;  // added to each car's entry time
    std::vector<int> edges;  // resolved edge indices, consecutive edges connected
};

struct TravelRecord {
    std::string vehicleId;
    int route = -1;          // index into Demand::routes
    double entry = 0;        // c_entry, seconds
    double exit = -1;        // c_exit, seconds; < 0 means pending
    int vehicleType = 0;     // index into vehicleCatalog()
    bool hasExit() const { return exit >= 0; }
};

class RoadNetwork {
public:
    std::vector<Node> nodes;
    std::vector<Edge> edges;
    std::vector<Lane> lanes;
    std::vector<Connection> connections;
    std::vector<LightDef> lights;
    std::vector<Detector> detectors;

    int nodeIndex(const std::string& id) const;
    int edgeIndex(const std::string& id) const;
    int lightIndex(const std::string& id) const;
    int detectorIndex(const std::string& id) const;
    int laneIndex(int edge, int lane) const; // global lane index

    const std::string& laneName(int globalLane) const; // "edge_index", for messages

    // Lanes of `edge` that connect onward to `nextEdge`.
    std::vector<int> lanesToward(int edge, int nextEdge) const;
    // Connection from a specific lane onto nextEdge, -1 if none.
    int connectionToward(int globalLane, int nextEdge) const;

    void rebuildIndexes();
    // Checks all structural invariants; throws ValidationError naming the
    // violated one. Called by loadNetwork and the generators.
    void validate() const;

    void addDetectors(const std::vector<Detector>& dets);

private:
    std::unordered_map<std::string, int> nodeIds, edgeIds, lightIds, detIds;
    mutable std::vector<std::string> laneNames;
};

struct Demand {
    std::vector<Route> routes;
    std::vector<TravelRecord> records; // sorted by (entry, vehicleId)

    int routeIndex(const std::string& id) const;
    std::unordered_map<std::string, int> routeIds;
    void rebuildIndexes();
};

RoadNetwork loadNetwork(const std::string& path);
void saveNetwork(const RoadNetwork& net, const std::string& path);
std::string networkToString(const RoadNetwork& net);

// Demand is always validated against its network: route continuity, edge
// existence, and the no-repeated-intersection rule.
Demand loadDemand(const std::string& path, const RoadNetwork& net);
void saveDemand(const Demand& demand, const RoadNetwork& net, const std::string& path);
std::string demandToString(const Demand& demand, const RoadNetwork& net);
void validateDemand(const Demand& demand, const RoadNetwork& net);
void sortRecords(std::vector<TravelRecord>& records);

// Point-pass detectors on every lane that can reach the light within
// `horizonS` seconds of travel at the speed limit, spaced `spacingS`
// seconds apart. Walks upstream across intersections.
std::vector<Detector> placePlanningDetectors(const RoadNetwork& net, const std::string& lightId,
                                             double horizonS = 15.0, double spacingS = 3.0);

// Stop-line queue-zone detectors on each incoming lane of the light.
std::vector<Detector> placeQueueDetectors(const RoadNetwork& net, const std::string& lightId,
                                          double zoneLength = 40.0);

// Travel-time shortest path between two edges (node-simple by construction).
std::optional<std::vector<int>> shortestRoute(const RoadNetwork& net, int fromEdge, int toEdge);

} // namespace greenwave

#endif
