#ifndef GREENWAVE_CALIBRATE_H
#define GREENWAVE_CALIBRATE_H

#include "greenwave/nash.hpp"

namespace greenwave {

struct CalibrationTarget {
    const RoadNetwork* net = nullptr;
    Demand demand; // every record carries an observed exit time
    double dt = 0.1;
    double horizon = 0; // 0 = last observed exit + slack
    uint64_t seed = 1;
};

void validateTarget(const CalibrationTarget& target);

struct SimilarityResult {
    double f = 0;   // sum of |simulated - observed| journey times
    double mae = 0; // f / number of cars
};

// Simulates the observed demand (same cars, same entry times and order)
// under the hypothesized light settings and scores the mismatch.
SimilarityResult similarityObjective(const ControllerConfigSet& hypothesis,
                                     const CalibrationTarget& target);

// Pearson correlation; throws on length < 2 or zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

struct HistogramPair {
    double binLo, binHi;
    long observed, simulated;
};

struct CalibrationReport {
    double initialMae = 0;
    double finalMae = 0;
    double correlation = 0; // per-car simulated vs observed journey times
    std::vector<std::pair<double, double>> pairs; // (simulated, observed) per car
    std::vector<HistogramPair> histogram;
    std::vector<TrialRow> trace; // per-trial match error
};

struct CalibrationResult {
    ControllerConfigSet params;
    CalibrationReport report;
};

// NASH from the given starting settings against the similarity objective.
CalibrationResult calibrateLights(const CalibrationTarget& target,
                                  const ControllerConfigSet& start, int budget, Rng& rng,
                                  const TrialCallback& onTrial = {});

// Journey times of `demand` simulated under `cfg`, ordered by vehicle id.
std::vector<double> journeyTimes(const RoadNetwork& net, const Demand& demand,
                                 const ControllerConfigSet& cfg, double horizon, double dt,
                                 uint64_t seed);

// Correlation between two light settings on unseen demand.
double robustnessCorrelation(const RoadNetwork& net, const ControllerConfigSet& a,
                             const ControllerConfigSet& b, const Demand& freshDemand,
                             double horizon, double dt, uint64_t seed);

std::vector<HistogramPair> journeyHistogram(std::span<const double> observed,
                                            std::span<const double> simulated, double binWidth);

} // namespace greenwave

#endif
