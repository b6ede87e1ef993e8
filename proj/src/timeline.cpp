#include "echoloop/timeline.hpp"

#include <algorithm>
#include <cmath>

namespace echoloop::timeline {

void SplitConfig::validate() const {
    if (!(cutoff_fraction > 0.0 && cutoff_fraction < 1.0))
        throw UsageError("cutoff_fraction must lie in (0,1), got " +
                         std::to_string(cutoff_fraction));
    if (num_periods < 1)
        throw UsageError("num_periods must be >= 1, got " + std::to_string(num_periods));
}

TemporalSplit temporal_split(const Dataset& dataset, double cutoff_fraction, SplitMode mode) {
    if (dataset.interactions.empty()) throw DataError("temporal_split: empty dataset");
    if (!(cutoff_fraction > 0.0 && cutoff_fraction < 1.0))
        throw UsageError("cutoff_fraction must lie in (0,1), got " +
                         std::to_string(cutoff_fraction));

    const auto& log = dataset.interactions;
    const Timestamp min_tau = log.front().timestamp;
    const Timestamp max_tau = log.back().timestamp;
    if (min_tau == max_tau)
        throw DataError("temporal_split: all interactions share timestamp " +
                        std::to_string(min_tau));

    Timestamp cutoff = 0;
    if (mode == SplitMode::timeline_fraction) {
        cutoff = min_tau + static_cast<Timestamp>(std::floor(
                               cutoff_fraction * static_cast<double>(max_tau - min_tau)));
    } else {
        // Nearest-integer target size; the cutoff timestamp is the one of the
        // target-th interaction, so ties at the boundary may shift the count.
        std::size_t target = static_cast<std::size_t>(
            std::floor(cutoff_fraction * static_cast<double>(log.size()) + 0.5));
        if (target == 0) target = 1;
        if (target >= log.size()) target = log.size() - 1;
        cutoff = log[target - 1].timestamp;
    }

    // First index with tau > cutoff; the log is sorted by timestamp.
    const auto it = std::upper_bound(
        log.begin(), log.end(), cutoff,
        [](Timestamp t, const Interaction& x) { return t < x.timestamp; });

    TemporalSplit split;
    split.dataset = &dataset;
    split.cutoff_time = cutoff;
    split.boundary = static_cast<std::size_t>(it - log.begin());
    return split;
}

std::set<UserId> common_users(const TemporalSplit& split) {
    std::set<UserId> before;
    for (const auto& x : split.d0()) before.insert(x.user_id);
    std::set<UserId> common;
    for (const auto& x : split.dgt())
        if (before.count(x.user_id)) common.insert(x.user_id);
    return common;
}

PeriodSchedule build_period_schedule(const TemporalSplit& split, int num_periods) {
    if (num_periods < 1)
        throw UsageError("num_periods must be >= 1, got " + std::to_string(num_periods));
    const auto dgt = split.dgt();
    if (dgt.empty()) throw DataError("build_period_schedule: empty ground-truth set");

    std::set<Timestamp> distinct;
    for (const auto& x : dgt) distinct.insert(x.timestamp);
    if (static_cast<std::size_t>(num_periods) > distinct.size())
        throw DataError("build_period_schedule: " + std::to_string(num_periods) +
                        " periods exceed " + std::to_string(distinct.size()) +
                        " distinct post-cutoff timestamps");

    const Timestamp max_tau = dgt.back().timestamp;
    const Timestamp span = max_tau - split.cutoff_time;
    const Timestamp base = span / num_periods;

    PeriodSchedule schedule;
    schedule.cutoff_time = split.cutoff_time;
    schedule.boundaries.resize(static_cast<std::size_t>(num_periods) + 1);
    schedule.boundaries.front() = split.cutoff_time;
    for (int n = 1; n < num_periods; ++n)
        schedule.boundaries[static_cast<std::size_t>(n)] = split.cutoff_time + base * n;
    schedule.boundaries.back() = max_tau;  // last period absorbs the remainder

    const auto common = common_users(split);

    schedule.periods.resize(static_cast<std::size_t>(num_periods));
    for (int n = 1; n <= num_periods; ++n) {
        auto& period = schedule.periods[static_cast<std::size_t>(n - 1)];
        period.index = n;
        period.begin_exclusive = schedule.boundaries[static_cast<std::size_t>(n - 1)];
        period.end_inclusive = schedule.boundaries[static_cast<std::size_t>(n)];
        period.tau = period.begin_exclusive +
                     std::max<Timestamp>(1, (period.end_inclusive - period.begin_exclusive) / 2);
    }

    // Single pass: each dgt interaction of a common user lands in exactly one period.
    std::size_t period_idx = 0;
    for (const auto& x : dgt) {
        while (x.timestamp > schedule.periods[period_idx].end_inclusive) ++period_idx;
        if (common.count(x.user_id)) schedule.periods[period_idx].quotas[x.user_id] += 1;
    }
    return schedule;
}

nlohmann::json PeriodSchedule::to_json() const {
    nlohmann::json j;
    j["cutoff_time"] = cutoff_time;
    j["boundaries"] = boundaries;
    j["periods"] = nlohmann::json::array();
    for (const auto& period : periods) {
        nlohmann::json p;
        p["index"] = period.index;
        p["tau"] = period.tau;
        p["active"] = nlohmann::json::array();
        for (const auto& [user, quota] : period.quotas)
            p["active"].push_back({{"user", user}, {"quota", quota}});
        j["periods"].push_back(std::move(p));
    }
    return j;
}

PeriodSchedule PeriodSchedule::from_json(const nlohmann::json& j) {
    PeriodSchedule schedule;
    schedule.cutoff_time = j.at("cutoff_time").get<Timestamp>();
    schedule.boundaries = j.at("boundaries").get<std::vector<Timestamp>>();
    for (const auto& p : j.at("periods")) {
        Period period;
        period.index = p.at("index").get<int>();
        period.tau = p.at("tau").get<Timestamp>();
        const auto idx = static_cast<std::size_t>(period.index);
        if (idx == 0 || idx >= schedule.boundaries.size())
            throw ValidationError("schedule JSON: period index out of range");
        period.begin_exclusive = schedule.boundaries[idx - 1];
        period.end_inclusive = schedule.boundaries[idx];
        for (const auto& entry : p.at("active"))
            period.quotas[entry.at("user").get<std::string>()] = entry.at("quota").get<int>();
        schedule.periods.push_back(std::move(period));
    }
    return schedule;
}

}  // namespace echoloop::timeline
