#include "greenwave/nash.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_map>

namespace greenwave {

ParameterVector perturb(const ParameterVector& s, Rng& rng) {
    ParameterVector out = s;
    size_t n = s.entries.size();
    if (n == 0) return out;
    int kMax = std::max<int>(1, static_cast<int>(0.05 * static_cast<double>(n)));
    int k = static_cast<int>(rng.uniformInt(1, kMax));

    // k distinct indices by partial Fisher-Yates
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    for (int i = 0; i < k; ++i) {
        size_t j = static_cast<size_t>(rng.uniformInt(i, static_cast<int64_t>(n) - 1));
        std::swap(idx[i], idx[j]);
    }

    for (int i = 0; i < k; ++i) {
        ParamEntry& e = out.entries[idx[i]];
        if (e.kind == ParamKind::Continuous) {
            double mag = std::abs(e.value);
            double delta;
            if (mag > 1e-12) {
                delta = rng.uniform(-0.05 * mag, 0.05 * mag);
            } else {
                // +-5% of zero is degenerate; nudge by 1% of the bound range
                double eps = 0.01 * (e.hi - e.lo);
                delta = rng.uniform(-eps, eps);
            }
            e.value = std::clamp(e.value + delta, e.lo, e.hi);
        } else {
            if (e.options.size() > 1) {
                size_t pick = static_cast<size_t>(rng.uniformInt(0, static_cast<int64_t>(e.options.size()) - 2));
                size_t cur = 0;
                for (size_t o = 0; o < e.options.size(); ++o)
                    if (e.options[o] == e.value) { cur = o; break; }
                if (pick >= cur) ++pick;
                e.value = e.options[pick];
            }
        }
    }
    return out;
}

ParameterVector repairParams(ParameterVector s) {
    for (ParamEntry& e : s.entries) {
        if (e.kind != ParamKind::Continuous) continue;
        e.value = std::clamp(e.value, e.lo, e.hi);
        if (e.quantum > 0) {
            e.value = std::round(e.value / e.quantum) * e.quantum;
            e.value = std::clamp(e.value, e.lo, e.hi);
        }
    }
    for (const ParamGroup& g : s.groups) {
        if (g.kind == GroupKind::AuctionDurations) {
            std::vector<double> vals;
            for (int m : g.members) vals.push_back(s.entries[m].value);
            std::sort(vals.begin(), vals.end());
            for (size_t i = 0; i < g.members.size(); ++i) {
                ParamEntry& e = s.entries[g.members[i]];
                e.value = std::clamp(vals[i], std::max(e.lo, kMinGreenFloor), e.hi);
            }
        } else if (g.kind == GroupKind::FixedCycle) {
            // proportional rescale to the target sum; entries pushed past a
            // bound get pinned there and the rest rescale again
            std::vector<char> pinned(g.members.size(), 0);
            for (int iter = 0; iter < static_cast<int>(g.members.size()) + 1; ++iter) {
                double pinnedSum = 0, freeSum = 0;
                for (size_t i = 0; i < g.members.size(); ++i) {
                    double v = s.entries[g.members[i]].value;
                    (pinned[i] ? pinnedSum : freeSum) += v;
                }
                if (freeSum <= 0) break;
                double scale = (g.target - pinnedSum) / freeSum;
                bool newPin = false;
                for (size_t i = 0; i < g.members.size(); ++i) {
                    if (pinned[i]) continue;
                    ParamEntry& e = s.entries[g.members[i]];
                    double v = e.value * scale;
                    if (v < e.lo - 1e-12) { e.value = e.lo; pinned[i] = 1; newPin = true; }
                    else if (v > e.hi + 1e-12) { e.value = e.hi; pinned[i] = 1; newPin = true; }
                }
                if (!newPin) {
                    for (size_t i = 0; i < g.members.size(); ++i)
                        if (!pinned[i]) s.entries[g.members[i]].value *= scale;
                    break;
                }
            }
        }
    }
    return s;
}

bool acceptCandidate(std::span<const double> oldValues, std::span<const double> newValues,
                     AcceptRule rule) {
    if (oldValues.size() != newValues.size())
        throw ValidationError("objective value vectors differ in length");
    size_t n = oldValues.size();
    if (n == 0) return false;
    double oldMean = 0, newMean = 0;
    size_t improved = 0;
    for (size_t i = 0; i < n; ++i) {
        oldMean += oldValues[i];
        newMean += newValues[i];
        if (newValues[i] < oldValues[i]) ++improved;
    }
    if (rule == AcceptRule::Simple) return newMean < oldMean;
    // at least N/2 datasets must individually improve
    return newMean < oldMean && 2 * improved >= n;
}

std::vector<double> evaluateObjective(const ParameterVector& s, const ObjectiveSpec& spec) {
    if (!spec.net) throw ValidationError("objective spec has no network");
    if (spec.datasets.empty()) throw ValidationError("objective spec needs at least one dataset");
    ControllerConfigSet cfg = unflattenControllers(s, spec.layout);

    std::vector<double> values(spec.datasets.size(), 0.0);
    auto evalOne = [&](size_t i) {
        const DatasetRef& ds = spec.datasets[i];
        SimSetup setup = buildSimSetup(*spec.net, cfg, &ds.demand);
        SimOptions opts;
        opts.horizon = spec.horizon;
        opts.dt = spec.dt;
        opts.seed = ds.seed;
        SimResult res = runSimulation(*spec.net, ds.demand, std::move(setup.tables),
                                      std::move(setup.controllers), opts);
        if (spec.kind == ObjectiveKind::TotalTravelTime) {
            values[i] = res.objective;
        } else {
            // sum |simulated - observed| journey time per car
            double f = 0;
            std::unordered_map<std::string, double> observed;
            for (const TravelRecord& r : ds.demand.records)
                if (r.hasExit()) observed[r.vehicleId] = r.exit - r.entry;
            for (const CarResult& c : res.cars) {
                auto it = observed.find(c.vehicleId);
                if (it != observed.end()) f += std::abs(c.journey - it->second);
            }
            values[i] = f;
        }
    };

    int jobs = std::max(1, spec.jobs);
    if (jobs == 1 || spec.datasets.size() == 1) {
        for (size_t i = 0; i < spec.datasets.size(); ++i) evalOne(i);
    } else {
        std::vector<std::thread> workers;
        std::atomic<size_t> next{0};
        size_t count = spec.datasets.size();
        for (int w = 0; w < std::min<int>(jobs, static_cast<int>(count)); ++w)
            workers.emplace_back([&]() {
                for (size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) evalOne(i);
            });
        for (auto& t : workers) t.join();
    }
    return values;
}

std::string runLogCsv(const RunLog& log, bool includeWallMs) {
    std::ostringstream out;
    out << "trial,objective_mean,accepted,best_so_far,wall_ms\n";
    for (const TrialRow& r : log.rows)
        out << r.trial << "," << formatDouble(r.objectiveMean) << "," << (r.accepted ? 1 : 0) << ","
            << formatDouble(r.bestSoFar) << "," << (includeWallMs ? formatDouble(r.wallMs) : "0")
            << "\n";
    return out.str();
}

OptimizeResult optimize(const ParameterVector& s0, const ObjectiveSpec& spec, int budget,
                        AcceptRule rule, Rng& rng, const TrialCallback& onTrial) {
    if (budget < 1) throw ValidationError("optimizer budget must be >= 1");
    OptimizeResult res;
    res.best = repairParams(s0);
    res.bestValues = evaluateObjective(res.best, spec);
    res.initialValues = res.bestValues;
    auto mean = [](const std::vector<double>& v) {
        double s = 0;
        for (double x : v) s += x;
        return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };
    double bestMean = mean(res.bestValues);

    for (int trial = 1; trial <= budget; ++trial) {
        auto t0 = std::chrono::steady_clock::now();
        ParameterVector cand = repairParams(perturb(res.best, rng));
        std::vector<double> values = evaluateObjective(cand, spec);
        bool ok = acceptCandidate(res.bestValues, values, rule);
        if (ok) {
            res.best = std::move(cand);
            res.bestValues = values;
            bestMean = mean(res.bestValues);
        }
        auto t1 = std::chrono::steady_clock::now();
        TrialRow row;
        row.trial = trial;
        row.objectiveMean = mean(values);
        row.accepted = ok;
        row.bestSoFar = bestMean;
        row.wallMs = std::chrono::duration<double, std::milli>(t1 - t0).count();
        res.log.rows.push_back(row);
        if (onTrial) onTrial(row);
    }
    return res;
}

} // namespace greenwave
