#ifndef ECHOLOOP_TIMELINE_HPP
#define ECHOLOOP_TIMELINE_HPP

#include <map>
#include <set>
#include <span>
#include <vector>

#include "echoloop/core.hpp"

#include "json.hpp"

namespace echoloop::timeline {

// Default splits by timeline fraction: cutoff = min_tau + floor(f * span).
// The alternate mode places the cutoff so that the earliest round(f * |D|)
// interactions land in d0 (exact when no timestamp ties straddle the cut).
enum class SplitMode { timeline_fraction, interaction_count };

struct SplitConfig {
    double cutoff_fraction = 0.8;
    int num_periods = 5;
    SplitMode mode = SplitMode::timeline_fraction;

    void validate() const;
};

// Views into a canonically sorted dataset: d0 is the prefix with
// tau <= cutoff_time, dgt the suffix with tau > cutoff_time.
struct TemporalSplit {
    const Dataset* dataset = nullptr;
    Timestamp cutoff_time = 0;
    std::size_t boundary = 0;  // first index of dgt

    std::span<const Interaction> d0() const {
        return {dataset->interactions.data(), boundary};
    }
    std::span<const Interaction> dgt() const {
        return {dataset->interactions.data() + boundary,
                dataset->interactions.size() - boundary};
    }
};

TemporalSplit temporal_split(const Dataset& dataset, double cutoff_fraction,
                             SplitMode mode = SplitMode::timeline_fraction);

// Users with at least one interaction on both sides of the cutoff.
std::set<UserId> common_users(const TemporalSplit& split);

struct Period {
    int index = 0;                   // 1-based
    Timestamp begin_exclusive = 0;   // period covers (begin_exclusive, end_inclusive]
    Timestamp end_inclusive = 0;
    Timestamp tau = 0;               // canonical timestamp for injected interactions
    std::map<UserId, int> quotas;    // active users -> K_u

    bool contains(Timestamp t) const { return t > begin_exclusive && t <= end_inclusive; }
};

struct PeriodSchedule {
    Timestamp cutoff_time = 0;
    std::vector<Timestamp> boundaries;  // N+1 increasing timestamps
    std::vector<Period> periods;

    nlohmann::json to_json() const;
    static PeriodSchedule from_json(const nlohmann::json& j);
};

// Equal-duration periods over (cutoff_time, max_tau]; the last period absorbs
// the integer remainder. Active users are common users with >= 1 ground-truth
// interaction inside the period; K_u counts those interactions; tau is the
// floored period midpoint clamped inside the period.
PeriodSchedule build_period_schedule(const TemporalSplit& split, int num_periods);

}  // namespace echoloop::timeline

#endif  // ECHOLOOP_TIMELINE_HPP
