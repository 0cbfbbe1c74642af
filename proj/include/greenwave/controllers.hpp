#ifndef GREENWAVE_CONTROLLERS_H
#define GREENWAVE_CONTROLLERS_H

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "greenwave/sim.hpp"

namespace greenwave {

constexpr double kWeightMax = 10.0;   // detector weight bound
constexpr double kWeightStep = 0.1;   // weights snap to this grid after repair
constexpr double kMinGreenFloor = 3.0;

// ---------------------------------------------------------------------------
// fixed-schedule control

struct StaticParams {
    std::vector<double> durations; // green seconds per phase
    double offset = 0;             // cycle start shift, [0, cycle)
    bool fixedCycle = false;       // repair keeps the duration sum constant
};

// Phase shown at `clock` under a round-robin schedule whose cycle includes
// the grid's yellow between consecutive greens. During the yellow leading
// into green j the function already reports j, so a reactive light that
// starts its yellow on the request lands the green exactly on schedule.
int staticDecide(const StaticParams& params, const PhaseTable& table, double clock);

double cycleLength(const StaticParams& params, const PhaseTable& table);

// ---------------------------------------------------------------------------
// micro-auction control

struct AuctionParams {
    std::vector<std::string> detectorIds;      // local detectors, bid order
    std::vector<std::vector<double>> weights;  // [phase][detector], 0 = sensor removed
    double minimumDuration = 3;
    double priorityDuration = 15;
    double releaseDuration = 45;
};

// b_i = sum_j w_ij s_j over the light's local detector readings
double computeBid(std::span<const double> weights, std::span<const double> readings);

// One auction evaluation: returns the phase that owns the light for the next
// second (== current means keep). `elapsed` is green time of the current
// phase.
//  elapsed <  minimum                  hold unconditionally
//  minimum <= elapsed < priority       keep while the current bid is >= 0
//  priority <= elapsed < release       open auction, negative top bid keeps
//  release <= elapsed                  auction with the current bid capped at 0
// Ties among top bidders go to the first phase in cyclic order after the
// current one.
int auctionRule(int current, double elapsed, const AuctionParams& params,
                std::span<const double> bids);

struct LightState {
    int phase = 0;
    double elapsed = 0;
};

int auctionDecide(const LightState& state, const AuctionParams& params,
                  std::span<const double> readings);

// ---------------------------------------------------------------------------
// planning control

struct PlanningParams {
    double speedLossWeight = 1.0;
    double waitingWeight = 0.1;
    double phaseChangeWeight = 1.0;
};

struct TimelineEvent {
    double time;        // predicted arrival at the stop line
    double weight;      // scaled car count
    double downstreamLimit; // speed limit the car accelerates back to
};

// per-phase predicted arrivals, each list time-ordered
struct Timeline {
    std::vector<std::vector<TimelineEvent>> phases;
};

struct RemoteSensorInput {
    int detector = -1;        // global detector index
    double distance = 0;      // meters from the stop line
    // per-phase weight = turning ratio x phase-need ratio
    std::vector<double> phaseWeight;
    double downstreamLimit = 0;
};

// Adds one arrival per (pass event, fed phase) at passTime + distance/speed
// and drops events whose arrival already lies in the past.
void updateTimeline(Timeline& tl, const RemoteSensorInput& sensor,
                    std::span<const PassEvent> passes, double observedSpeed, double now);
void dropStale(Timeline& tl, double now);

struct PlanningInstance {
    std::vector<double> minDuration;          // per phase
    std::vector<std::vector<double>> yellow;  // [from][to] seconds, 0 = instant
    int currentPhase = 0;
    double phaseStart = 0; // may lie in the past
    double now = 0;
    // cars already stopped, per phase: (weight, downstream limit)
    std::vector<std::vector<std::pair<double, double>>> waiting;
    Timeline timeline;
    PlanningParams penalties;
    int maxChanges = -1; // <0 = bounded by the event horizon
};

struct PlanAction {
    bool switchPhase = false;
    int target = 0;
    double changeTime = 0; // when the yellow should start
    double cost = 0;       // cost of the best schedule found
};

struct PlanStats {
    long expanded = 0;
    long pruned = 0;
};

// Dynamic-programming search over phase-change schedules. Branches at
// arrival events, keeps changes as early as the minimum durations allow,
// and prunes schedules that end on the same phase with the same waiting
// weights at higher cost. `usePruning=false` is for verification only.
PlanAction planSchedule(const PlanningInstance& inst, bool usePruning = true,
                        PlanStats* stats = nullptr);

// ---------------------------------------------------------------------------
// configuration & controller factory

enum class ControllerKind { Static, Auction, Planning };

struct LightControllerConfig {
    std::string lightId;
    ControllerKind kind = ControllerKind::Static;
    std::vector<GreenPhase> phases;
    StaticParams st;
    AuctionParams au;
    PlanningParams pl;
};

struct ControllerConfigSet {
    std::vector<LightControllerConfig> lights;

    const LightControllerConfig* find(const std::string& lightId) const;
};

ControllerConfigSet loadControllers(const std::string& path);
void saveControllers(const ControllerConfigSet& cfg, const std::string& path);
std::string controllersToString(const ControllerConfigSet& cfg);
void validateControllers(const ControllerConfigSet& cfg, const RoadNetwork& net);

// Demand statistics the planning controller needs: how often traffic seen
// at each remote sensor reaches the light, and which phase it will need.
struct PlanningInputs {
    std::vector<RemoteSensorInput> sensors;
    // stop-line queue detectors with their per-phase need split
    std::vector<RemoteSensorInput> queues;
};
PlanningInputs buildPlanningInputs(const RoadNetwork& net, const Demand& demand,
                                   const std::string& lightId,
                                   const std::vector<GreenPhase>& phases);

// Builds per-light phase tables (with yellow grids from lane limits) and
// controller instances ready for Simulation.
struct SimSetup {
    std::vector<PhaseTable> tables;
    std::vector<std::shared_ptr<LightController>> controllers;
};
SimSetup buildSimSetup(const RoadNetwork& net, const ControllerConfigSet& cfg,
                       const Demand* demandForPlanning = nullptr);

} // namespace greenwave

#endif
