#include "greenwave/calibrate.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace greenwave {

void validateTarget(const CalibrationTarget& target) {
    if (!target.net) throw ValidationError("calibration target has no network");
    if (target.demand.records.empty())
        throw ValidationError("calibration target has no travel records");
    for (const TravelRecord& r : target.demand.records) {
        if (!r.hasExit())
            throw ValidationError("car '" + r.vehicleId + "' has no observed journey time");
        if (r.exit - r.entry <= 0)
            throw ValidationError("car '" + r.vehicleId + "' has a non-positive journey time");
    }
}

namespace {

double targetHorizon(const CalibrationTarget& target) {
    if (target.horizon > 0) return target.horizon;
    double last = 0;
    for (const TravelRecord& r : target.demand.records) last = std::max(last, r.exit);
    return last + 600.0; // slack so hypothesized lights can finish the tail
}

} // namespace

SimilarityResult similarityObjective(const ControllerConfigSet& hypothesis,
                                     const CalibrationTarget& target) {
    validateTarget(target);
    SimSetup setup = buildSimSetup(*target.net, hypothesis, &target.demand);
    SimOptions opts;
    opts.horizon = targetHorizon(target);
    opts.dt = target.dt;
    opts.seed = target.seed;
    SimResult res = runSimulation(*target.net, target.demand, std::move(setup.tables),
                                  std::move(setup.controllers), opts);
    std::map<std::string, double> observed;
    for (const TravelRecord& r : target.demand.records)
        observed[r.vehicleId] = r.exit - r.entry;
    SimilarityResult out;
    for (const CarResult& c : res.cars) out.f += std::abs(c.journey - observed.at(c.vehicleId));
    out.mae = out.f / static_cast<double>(res.cars.size());
    return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("correlation inputs differ in length");
    size_t n = a.size();
    if (n < 2) throw ValidationError("correlation needs at least two samples");
    double ma = 0, mb = 0;
    for (size_t i = 0; i < n; ++i) { ma += a[i]; mb += b[i]; }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double sab = 0, saa = 0, sbb = 0;
    for (size_t i = 0; i < n; ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (saa == 0 || sbb == 0) throw ValidationError("correlation input has zero variance");
    return sab / std::sqrt(saa * sbb);
}

std::vector<double> journeyTimes(const RoadNetwork& net, const Demand& demand,
                                 const ControllerConfigSet& cfg, double horizon, double dt,
                                 uint64_t seed) {
    SimSetup setup = buildSimSetup(net, cfg, &demand);
    SimOptions opts;
    opts.horizon = horizon;
    opts.dt = dt;
    opts.seed = seed;
    SimResult res =
        runSimulation(net, demand, std::move(setup.tables), std::move(setup.controllers), opts);
    std::vector<const CarResult*> cars;
    cars.reserve(res.cars.size());
    for (const CarResult& c : res.cars) cars.push_back(&c);
    std::sort(cars.begin(), cars.end(),
              [](const CarResult* x, const CarResult* y) { return x->vehicleId < y->vehicleId; });
    std::vector<double> out;
    out.reserve(cars.size());
    for (const CarResult* c : cars) out.push_back(c->journey);
    return out;
}

std::vector<HistogramPair> journeyHistogram(std::span<const double> observed,
                                            std::span<const double> simulated, double binWidth) {
    double top = 0;
    for (double v : observed) top = std::max(top, v);
    for (double v : simulated) top = std::max(top, v);
    size_t bins = static_cast<size_t>(std::floor(top / binWidth)) + 1;
    std::vector<HistogramPair> out(bins);
    for (size_t i = 0; i < bins; ++i)
        out[i] = {static_cast<double>(i) * binWidth, static_cast<double>(i + 1) * binWidth, 0, 0};
    for (double v : observed) out[static_cast<size_t>(v / binWidth)].observed++;
    for (double v : simulated) out[static_cast<size_t>(v / binWidth)].simulated++;
    return out;
}

CalibrationResult calibrateLights(const CalibrationTarget& target,
                                  const ControllerConfigSet& start, int budget, Rng& rng,
                                  const TrialCallback& onTrial) {
    validateTarget(target);
    ObjectiveSpec spec;
    spec.kind = ObjectiveKind::CalibrationSimilarity;
    spec.net = target.net;
    spec.layout = start;
    spec.datasets.push_back({target.demand, target.seed});
    spec.horizon = targetHorizon(target);
    spec.dt = target.dt;

    ParameterVector s0 = flattenControllers(start);
    double cars = static_cast<double>(target.demand.records.size());
    OptimizeResult opt = optimize(s0, spec, budget, AcceptRule::Simple, rng, onTrial);

    CalibrationResult out;
    out.params = unflattenControllers(opt.best, spec.layout);
    out.report.trace = opt.log.rows;
    out.report.initialMae = opt.initialValues[0] / cars;
    out.report.finalMae = opt.bestValues[0] / cars;

    // per-car pairs and correlation under the calibrated settings
    std::vector<double> sim = journeyTimes(*target.net, target.demand, out.params,
                                           targetHorizon(target), target.dt, target.seed);
    std::vector<const TravelRecord*> recs;
    for (const TravelRecord& r : target.demand.records) recs.push_back(&r);
    std::sort(recs.begin(), recs.end(), [](const TravelRecord* a, const TravelRecord* b) {
        return a->vehicleId < b->vehicleId;
    });
    std::vector<double> obs;
    obs.reserve(recs.size());
    for (const TravelRecord* r : recs) obs.push_back(r->exit - r->entry);
    out.report.pairs.reserve(sim.size());
    for (size_t i = 0; i < sim.size(); ++i) out.report.pairs.push_back({sim[i], obs[i]});
    out.report.correlation = pearson(sim, obs);
    out.report.histogram = journeyHistogram(obs, sim, 20.0);
    return out;
}

double robustnessCorrelation(const RoadNetwork& net, const ControllerConfigSet& a,
                             const ControllerConfigSet& b, const Demand& freshDemand,
                             double horizon, double dt, uint64_t seed) {
    std::vector<double> ta = journeyTimes(net, freshDemand, a, horizon, dt, seed);
    std::vector<double> tb = journeyTimes(net, freshDemand, b, horizon, dt, seed);
    return pearson(ta, tb);
}

} // namespace greenwave
