#ifndef GREENWAVE_PARAMS_H
#define GREENWAVE_PARAMS_H

#include <vector>

#include "greenwave/controllers.hpp"

namespace greenwave {

enum class ParamKind { Continuous, Discrete };

struct ParamEntry {
    double value = 0;
    ParamKind kind = ParamKind::Continuous;
    double lo = 0, hi = 0;         // continuous bounds
    double quantum = 0;            // snap grid applied by repair, 0 = none
    std::vector<double> options;   // discrete option set
    int group = -1;                // repair group, -1 = none
};

enum class GroupKind { AuctionDurations, FixedCycle };

struct ParamGroup {
    GroupKind kind;
    double target = 0;           // FixedCycle: required duration sum
    std::vector<int> members;    // entry indices
};

struct ParameterVector {
    std::vector<ParamEntry> entries;
    std::vector<ParamGroup> groups;

    size_t size() const { return entries.size(); }
    std::vector<double> values() const;
    bool valid() const; // all entries within bounds / option sets
};

// Flattens every tunable controller parameter, in light order:
//   static   n durations + 1 offset
//   auction  phases x detectors weights + (minimum, priority, release)
//   planning 3 penalty weights
ParameterVector flattenControllers(const ControllerConfigSet& cfg);

// Inverse of flattenControllers; `layout` supplies everything that is not
// tunable (ids, phases, detector lists). Throws on size mismatch.
ControllerConfigSet unflattenControllers(const ParameterVector& vec,
                                         const ControllerConfigSet& layout);

} // namespace greenwave

#endif
