#ifndef GREENWAVE_NASH_H
#define GREENWAVE_NASH_H

#include <functional>
#include <span>

#include "greenwave/params.hpp"

namespace greenwave {

// Perturbs k ~ U{1..max(1, floor(0.05|S|))} distinct entries: continuous
// values move by +-5% of their magnitude (zero values by +-1% of the bound
// range), then clamp; discrete values re-draw from the other options.
ParameterVector perturb(const ParameterVector& s, Rng& rng);

// Projects a vector back into the valid subspace: clamp + quantize entries,
// sort auction duration triples, rescale fixed-cycle light durations to
// their target sum. Idempotent.
ParameterVector repairParams(ParameterVector s);

enum class AcceptRule { Simple, Majority };

// Simple: new < old (single dataset). Majority: mean improves AND at least
// ceil(N/2) datasets improve.
bool acceptCandidate(std::span<const double> oldValues, std::span<const double> newValues,
                     AcceptRule rule);

enum class ObjectiveKind { TotalTravelTime, CalibrationSimilarity };

struct DatasetRef {
    Demand demand;      // for calibration, records carry observed exit times
    uint64_t seed = 1;  // fixed across trials so objective changes are parameter-driven
};

struct ObjectiveSpec {
    ObjectiveKind kind = ObjectiveKind::TotalTravelTime;
    const RoadNetwork* net = nullptr;
    ControllerConfigSet layout; // template the vectors are unflattened into
    std::vector<DatasetRef> datasets;
    double horizon = 3600;
    double dt = 0.1;
    int jobs = 1; // concurrent dataset evaluations per trial
};

// One objective value per dataset: total travel time sum, or the Eq.-style
// absolute journey-time mismatch for calibration. Pure in (vector, spec).
std::vector<double> evaluateObjective(const ParameterVector& s, const ObjectiveSpec& spec);

struct TrialRow {
    int trial = 0;
    double objectiveMean = 0;
    bool accepted = false;
    double bestSoFar = 0;
    double wallMs = 0;
};

struct RunLog {
    std::vector<TrialRow> rows;
};

std::string runLogCsv(const RunLog& log, bool includeWallMs);

struct OptimizeResult {
    ParameterVector best;
    std::vector<double> bestValues;
    std::vector<double> initialValues; // objective of the repaired s0
    RunLog log;
};

using TrialCallback = std::function<void(const TrialRow&)>;

OptimizeResult optimize(const ParameterVector& s0, const ObjectiveSpec& spec, int budget,
                        AcceptRule rule, Rng& rng, const TrialCallback& onTrial = {});

} // namespace greenwave

#endif
