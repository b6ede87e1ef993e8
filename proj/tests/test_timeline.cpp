#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "echoloop/ingest.hpp"
#include "echoloop/rng.hpp"
#include "echoloop/synthetic.hpp"
#include "echoloop/timeline.hpp"

using namespace echoloop;
using namespace echoloop::timeline;

namespace {

// One interaction per timestamp 1..n, distinct users.
Dataset ladder(int n) {
    std::vector<Interaction> rows;
    for (int t = 1; t <= n; ++t)
        rows.push_back({"u" + std::to_string(t), "i" + std::to_string(t % 3), t});
    return ingest::build_dataset(std::move(rows));
}

}  // namespace

TEST_CASE("timeline split: ladder 1..10 at 0.8 cuts at 8") {
    const auto dataset = ladder(10);
    const auto split = temporal_split(dataset, 0.8);
    CHECK(split.cutoff_time == 8);
    CHECK(split.d0().size() == 8);
    CHECK(split.dgt().size() == 2);
    for (const auto& x : split.d0()) CHECK(x.timestamp <= 8);
    for (const auto& x : split.dgt()) CHECK(x.timestamp > 8);
}

TEST_CASE("split partition is exact for both modes") {
    const auto dataset = synthetic::generate_planted_partition({});
    for (const auto mode : {SplitMode::timeline_fraction, SplitMode::interaction_count}) {
        for (const double f : {0.3, 0.5, 0.8}) {
            const auto split = temporal_split(dataset, f, mode);
            CHECK(split.d0().size() + split.dgt().size() == dataset.interactions.size());
            if (!split.d0().empty())
                CHECK(split.d0().back().timestamp <= split.cutoff_time);
            if (!split.dgt().empty())
                CHECK(split.dgt().front().timestamp > split.cutoff_time);
        }
    }
}

TEST_CASE("count mode: nearest-integer split when timestamps are unique") {
    const auto dataset = ladder(10);
    const auto split = temporal_split(dataset, 0.75, SplitMode::interaction_count);
    // round(7.5) = 8
    CHECK(split.d0().size() == 8);
}

TEST_CASE("split errors") {
    const auto dataset = ladder(10);
    CHECK_THROWS_AS(temporal_split(dataset, 0.0), UsageError);
    CHECK_THROWS_AS(temporal_split(dataset, 1.5), UsageError);

    const auto flat = ingest::build_dataset({{"u1", "i1", 5}, {"u2", "i2", 5}});
    CHECK_THROWS_AS(temporal_split(flat, 0.5), DataError);

    const Dataset empty;
    CHECK_THROWS_AS(temporal_split(empty, 0.5), DataError);
}

TEST_CASE("common users: intersection by definition") {
    const auto dataset = ingest::build_dataset(
        {{"u1", "i1", 1}, {"u2", "i1", 2}, {"u2", "i2", 9}, {"u3", "i2", 10}});
    const auto split = temporal_split(dataset, 0.5);
    CHECK(common_users(split) == std::set<UserId>{"u2"});
}

TEST_CASE("period schedule: hand-enumerated 3-interaction ground truth") {
    // d0: (u1,i1,1), (u2,i2,2); dgt: (u1,i3,9), (u1,i4,9), (u2,i3,10)
    const auto dataset = ingest::build_dataset({{"u1", "i1", 1},
                                                {"u2", "i2", 2},
                                                {"u1", "i3", 9},
                                                {"u1", "i4", 9},
                                                {"u2", "i3", 10}});
    const auto split = temporal_split(dataset, 0.8);  // cutoff 1 + floor(0.8*9) = 8
    REQUIRE(split.cutoff_time == 8);
    const auto schedule = build_period_schedule(split, 2);

    REQUIRE(schedule.periods.size() == 2);
    CHECK(schedule.boundaries == std::vector<Timestamp>{8, 9, 10});
    CHECK(schedule.periods[0].quotas == std::map<UserId, int>{{"u1", 2}});
    CHECK(schedule.periods[1].quotas == std::map<UserId, int>{{"u2", 1}});
    for (const auto& period : schedule.periods)
        CHECK(period.contains(period.tau));
}

TEST_CASE("period schedule: quota conservation and single-period membership") {
    synthetic::SyntheticSpec spec;
    spec.users = 80;
    spec.items = 40;
    spec.seed = 11;
    const auto dataset = synthetic::generate_planted_partition(spec);
    const auto split = temporal_split(dataset, 0.6);
    const auto common = common_users(split);
    const auto schedule = build_period_schedule(split, 4);

    std::int64_t quota_sum = 0;
    for (const auto& period : schedule.periods)
        for (const auto& [user, quota] : period.quotas) {
            CHECK(common.count(user) == 1);
            CHECK(quota >= 1);
            quota_sum += quota;
        }

    std::int64_t expected = 0;
    for (const auto& x : split.dgt()) expected += common.count(x.user_id);
    CHECK(quota_sum == expected);

    // boundaries strictly increase; every common dgt interaction in exactly one period
    for (std::size_t i = 1; i < schedule.boundaries.size(); ++i)
        CHECK(schedule.boundaries[i] > schedule.boundaries[i - 1]);
    for (const auto& x : split.dgt()) {
        int hits = 0;
        for (const auto& period : schedule.periods) hits += period.contains(x.timestamp);
        CHECK(hits == 1);
    }
}

TEST_CASE("period schedule: K_u equals the user's in-period dgt count") {
    synthetic::SyntheticSpec spec;
    spec.users = 30;
    spec.items = 20;
    spec.seed = 3;
    const auto dataset = synthetic::generate_planted_partition(spec);
    const auto split = temporal_split(dataset, 0.5);
    const auto common = common_users(split);
    const auto schedule = build_period_schedule(split, 3);

    for (const auto& period : schedule.periods) {
        std::map<UserId, int> expected;
        for (const auto& x : split.dgt())
            if (period.contains(x.timestamp) && common.count(x.user_id))
                expected[x.user_id] += 1;
        CHECK(period.quotas == expected);
    }
}

TEST_CASE("period schedule: too many periods for the distinct timestamps") {
    const auto dataset = ingest::build_dataset(
        {{"u1", "i1", 1}, {"u1", "i2", 9}, {"u1", "i3", 9}});
    const auto split = temporal_split(dataset, 0.5);
    CHECK_THROWS_AS(build_period_schedule(split, 2), DataError);
}

TEST_CASE("schedule serialization is deterministic and round-trips") {
    synthetic::SyntheticSpec spec;
    spec.users = 25;
    spec.items = 15;
    spec.seed = 9;
    const auto dataset = synthetic::generate_planted_partition(spec);
    const auto split = temporal_split(dataset, 0.5);
    const auto a = build_period_schedule(split, 3);
    const auto b = build_period_schedule(split, 3);
    CHECK(a.to_json().dump() == b.to_json().dump());

    const auto restored = PeriodSchedule::from_json(a.to_json());
    CHECK(restored.to_json().dump() == a.to_json().dump());
    CHECK(restored.periods[1].begin_exclusive == a.periods[1].begin_exclusive);
}
