#ifndef GREENWAVE_SCENARIOS_H
#define GREENWAVE_SCENARIOS_H

#include "greenwave/nash.hpp"

namespace greenwave {

struct GridSpec {
    int rows = 3, cols = 3;
    int minLanes = 1, maxLanes = 3;
    // common urban limits, 30-70 km/h
    std::vector<double> speedLimits = {8.33, 11.11, 13.89, 16.67, 19.44};
    double blockLength = 200;    // m between adjacent intersections
    double boundaryLength = 200; // m of the entry/exit stubs
    double queueZone = 40;       // stop-line detector length per approach lane
};

// rows x cols signalized grid with boundary entry/exit edges on every outer
// node, one light per intersection, and stop-line queue detectors.
RoadNetwork genGrid(const GridSpec& spec, uint64_t seed);

// Two-phase (north-south / east-west) static programs with the given phase
// durations for every light in the network.
ControllerConfigSet defaultStaticConfig(const RoadNetwork& net,
                                        std::vector<double> durations = {20, 20});

// Randomized static programs: per-phase durations ~ U(durLo, durHi), offset
// ~ U(0, cycle). Used both for hidden target lights and uncalibrated starts.
ControllerConfigSet randomStaticConfig(const RoadNetwork& net, Rng& rng, double durLo = 8,
                                       double durHi = 45);

// Auction configs over the grid's queue detectors; own-approach sensors get
// `ownWeight`, everything else 0.
ControllerConfigSet defaultAuctionConfig(const RoadNetwork& net, double ownWeight = 1.0,
                                         double minimum = 3, double priority = 15,
                                         double release = 45);

// Planning configs with the given penalty weights.
ControllerConfigSet defaultPlanningConfig(const RoadNetwork& net, PlanningParams pen = {});

// Routes between random boundary edges (shortest path, no intersection
// twice), entries ~ U(0, horizon), vehicle types from the catalog.
Demand genDemand(const RoadNetwork& net, int nCars, double horizon, uint64_t seed);

// Demand along explicit boundary-edge pairs with the given shares; used for
// directional (arterial-style) loads.
struct FlowSpec {
    std::string fromEdge;
    std::string toEdge;
    double share = 1;
};
Demand genDirectedDemand(const RoadNetwork& net, const std::vector<FlowSpec>& flows, int nCars,
                         double horizon, uint64_t seed);

struct PerturbationSpec {
    double countJitter = 0.10; // +-fraction applied to each route's car count
    double releaseJitter = 60; // +-seconds applied to each release time
    int count = 10;            // datasets to create
};

// Reality-based training copies: per-route counts scaled by (1 +- jitter),
// release times jittered and re-sorted. The base demand itself is never one
// of the outputs.
std::vector<Demand> perturbDemand(const Demand& base, const PerturbationSpec& spec, uint64_t seed);

// Rescales demand to scale x |base| cars keeping the route distribution.
Demand scaleDemand(const Demand& base, double scale, double horizon, uint64_t seed);

struct CapacityOptions {
    double tolerance = 0.03;  // relative MTT tolerance
    int maxProbes = 20;
    int seedsPerProbe = 3;
    double scaleLo = 0.25, scaleHi = 4.0;
    double horizon = 0;       // 0 = infer from demand
    double dt = 0.1;
    uint64_t seed = 1;
    int jobs = 1;
};

struct CapacityResult {
    double scale = 1;
    long cars = 0;
    double mtt = 0;
    double targetMtt = 0;
    bool converged = false;
};

// Bisection on the demand scale until the controller's MTT matches the
// target; each probe averages a few seeds. The returned MTT comes from one
// confirming simulation at the final scale.
CapacityResult capacitySearch(const RoadNetwork& net, const Demand& base,
                              const ControllerConfigSet& cfg, double targetMtt,
                              const CapacityOptions& opts);

double demandHorizon(const Demand& demand);

} // namespace greenwave

#endif
