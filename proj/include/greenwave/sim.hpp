#ifndef GREENWAVE_SIM_H
#define GREENWAVE_SIM_H

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "greenwave/net.hpp"

namespace greenwave {

struct VehicleType {
    std::string name;
    double maxAccel = 2.0;       // m/s^2
    double maxDecel = 4.0;       // comfortable braking, m/s^2
    double emergencyDecel = 5.5; // m/s^2
    double length = 5.0;         // m
    double minGap = 1.5;         // standstill gap to leader, m
    double headway = 1.0;        // driver reaction headway, s
    double speedFactor = 1.0;    // multiplier on speed limits
};

// The seven built-in vehicle profiles referenced by demand files (vtype 0-6).
const std::vector<VehicleType>& vehicleCatalog();

struct GreenPhase {
    std::string state;       // one char per controlled connection, 'G' or 'r'
    double minDuration = 3;  // s
};

struct YellowPhase {
    bool exists = false;
    std::string state;
    double duration = 0;
};

// yellow[i][j] is the transition inserted between green i and green j
using YellowGrid = std::vector<std::vector<YellowPhase>>;

struct PhaseTable {
    std::vector<GreenPhase> phases;
    YellowGrid yellow;
};

// For every ordered phase pair, marks stays-green-to-red states yellow and
// sets the duration to max(limit of yellowed lanes)/3 + 1 seconds.
// `connSpeedLimits[k]` is the approach-lane speed limit of the connection at
// string position k.
YellowGrid buildYellowGrid(const std::vector<std::string>& phaseStates,
                           const std::vector<double>& connSpeedLimits);

PhaseTable makePhaseTable(const std::vector<GreenPhase>& phases,
                          const std::vector<double>& connSpeedLimits);

struct DetectorReading {
    int occupancy = 0;     // vehicles currently overlapping the zone
    long passCount = 0;    // front-crossings since last reset
    double meanSpeed = 0;  // of passers since last reset, m/s
};

struct PassEvent {
    double time;
    double speed;
};

// What a light's controller is allowed to see when deciding. Detector
// indices are global (RoadNetwork::detectors order).
class LightView {
public:
    virtual ~LightView() = default;
    virtual double clock() const = 0;
    virtual int currentPhase() const = 0;
    virtual double phaseElapsed() const = 0;
    virtual int phaseCount() const = 0;
    virtual const DetectorReading& reading(int detectorIndex) const = 0;
    // moves accumulated pass events out and resets the detector's
    // pass-count/mean-speed accumulators
    virtual void takePasses(int detectorIndex, std::vector<PassEvent>& out) = 0;
    virtual double observedSpeed(int detectorIndex) const = 0; // EMA, falls back to limit
};

// Per-light decision logic. decide() is called once per simulation second
// while the light shows a green phase past its minimum duration; returning
// a different phase index requests the yellow transition toward it.
class LightController {
public:
    virtual ~LightController() = default;
    virtual int decide(LightView& view) = 0;
    virtual bool wantsDetectors() const { return false; }
    virtual bool wantsPassEvents() const { return false; }
};

struct CarResult {
    std::string vehicleId;
    double entry = 0;
    double exit = 0;
    double journey = 0;
    bool finished = false;
};

struct SimResult {
    std::vector<CarResult> cars; // in demand order (entry, vehicleId)
    double mtt = 0;              // mean of journey over all cars
    double objective = 0;        // sum of journeys, seconds
    long finished = 0;
    long unfinished = 0;
};

struct PhaseChange {
    double time;
    int phase;   // -1 while in yellow
    int target;  // meaningful when phase == -1
};

struct SimOptions {
    double horizon = 3600;
    double dt = 0.1;
    uint64_t seed = 1;
    double entryJitter = 0;     // uniform +-jitter applied to entry times
    bool recordPhaseTrace = false;
    bool checkInvariants = false;  // per-step gap & conservation checks
    bool forceDetectors = false;   // update detectors even under static control
    std::function<void(const std::string&)> onInvariantFailure;
};

class Simulation {
public:
    // `table[i]` and `controller[i]` belong to net.lights[i]. Controllers
    // may be null only for lights with a single phase.
    Simulation(const RoadNetwork& net, const Demand& demand,
               std::vector<PhaseTable> tables,
               std::vector<std::shared_ptr<LightController>> controllers,
               const SimOptions& opts);
    ~Simulation();

    void step();
    SimResult run(); // steps until horizon or all cars finished

    double clock() const;
    DetectorReading readDetector(const std::string& id) const;
    const std::vector<std::vector<PhaseChange>>& phaseTrace() const;

    // conservation counters
    long enteredCount() const;   // records released (clock >= entry)
    long waitingCount() const;   // released but not yet inserted
    long activeCount() const;    // driving in the network
    long finishedCount() const;

    struct Impl;

private:
    std::unique_ptr<Impl> impl;
};

SimResult runSimulation(const RoadNetwork& net, const Demand& demand,
                        std::vector<PhaseTable> tables,
                        std::vector<std::shared_ptr<LightController>> controllers,
                        const SimOptions& opts);

std::string simResultCsv(const SimResult& r);
void writeSimResult(const SimResult& r, const std::string& csvPath);

} // namespace greenwave

#endif
