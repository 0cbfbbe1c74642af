#include "greenwave/params.hpp"

#include <cmath>

namespace greenwave {

namespace {

constexpr double kDurationLo = 3.0;
constexpr double kDurationHi = 180.0;
constexpr double kOffsetHi = 3600.0;
constexpr double kPenaltyHi = 50.0;

} // namespace

std::vector<double> ParameterVector::values() const {
    std::vector<double> v;
    v.reserve(entries.size());
    for (const ParamEntry& e : entries) v.push_back(e.value);
    return v;
}

bool ParameterVector::valid() const {
    for (const ParamEntry& e : entries) {
        if (e.kind == ParamKind::Continuous) {
            if (e.value < e.lo - 1e-9 || e.value > e.hi + 1e-9) return false;
        } else {
            bool found = false;
            for (double o : e.options)
                if (o == e.value) { found = true; break; }
            if (!found) return false;
        }
    }
    return true;
}

ParameterVector flattenControllers(const ControllerConfigSet& cfg) {
    ParameterVector vec;
    for (const LightControllerConfig& lc : cfg.lights) {
        if (lc.kind == ControllerKind::Static) {
            int group = -1;
            if (lc.st.fixedCycle) {
                group = static_cast<int>(vec.groups.size());
                double target = 0;
                for (double d : lc.st.durations) target += d;
                vec.groups.push_back({GroupKind::FixedCycle, target, {}});
            }
            for (size_t i = 0; i < lc.st.durations.size(); ++i) {
                ParamEntry e;
                e.value = lc.st.durations[i];
                e.lo = std::max(kDurationLo, lc.phases[i].minDuration);
                e.hi = kDurationHi;
                e.group = group;
                if (group >= 0) vec.groups[group].members.push_back(static_cast<int>(vec.entries.size()));
                vec.entries.push_back(e);
            }
            ParamEntry off;
            off.value = lc.st.offset;
            off.lo = 0;
            off.hi = kOffsetHi;
            vec.entries.push_back(off);
        } else if (lc.kind == ControllerKind::Auction) {
            for (const auto& row : lc.au.weights) {
                for (double w : row) {
                    ParamEntry e;
                    e.value = w;
                    e.lo = -kWeightMax;
                    e.hi = kWeightMax;
                    e.quantum = kWeightStep;
                    vec.entries.push_back(e);
                }
            }
            int group = static_cast<int>(vec.groups.size());
            vec.groups.push_back({GroupKind::AuctionDurations, 0, {}});
            for (double d : {lc.au.minimumDuration, lc.au.priorityDuration, lc.au.releaseDuration}) {
                ParamEntry e;
                e.value = d;
                e.lo = kDurationLo;
                e.hi = kDurationHi;
                e.group = group;
                vec.groups[group].members.push_back(static_cast<int>(vec.entries.size()));
                vec.entries.push_back(e);
            }
        } else {
            for (double w : {lc.pl.speedLossWeight, lc.pl.waitingWeight, lc.pl.phaseChangeWeight}) {
                ParamEntry e;
                e.value = w;
                e.lo = 0;
                e.hi = kPenaltyHi;
                vec.entries.push_back(e);
            }
        }
    }
    return vec;
}

ControllerConfigSet unflattenControllers(const ParameterVector& vec,
                                         const ControllerConfigSet& layout) {
    ControllerConfigSet cfg = layout;
    size_t k = 0;
    auto take = [&]() {
        if (k >= vec.entries.size())
            throw ValidationError("parameter vector too short for the controller layout");
        return vec.entries[k++].value;
    };
    for (LightControllerConfig& lc : cfg.lights) {
        if (lc.kind == ControllerKind::Static) {
            for (double& d : lc.st.durations) d = take();
            lc.st.offset = take(); // offsets beyond one cycle read modulo the cycle
        } else if (lc.kind == ControllerKind::Auction) {
            for (auto& row : lc.au.weights)
                for (double& w : row) w = take();
            lc.au.minimumDuration = take();
            lc.au.priorityDuration = take();
            lc.au.releaseDuration = take();
        } else {
            lc.pl.speedLossWeight = take();
            lc.pl.waitingWeight = take();
            lc.pl.phaseChangeWeight = take();
        }
    }
    if (k != vec.entries.size())
        throw ValidationError("parameter vector has " + std::to_string(vec.entries.size()) +
                              " entries but the layout needs " + std::to_string(k));
    return cfg;
}

} // namespace greenwave
