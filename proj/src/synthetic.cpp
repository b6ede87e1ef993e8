#include "echoloop/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "echoloop/ingest.hpp"
#include "echoloop/rng.hpp"

namespace echoloop::synthetic {

void SyntheticSpec::validate() const {
    if (users < 1) throw UsageError("users must be >= 1");
    if (items < 1) throw UsageError("items must be >= 1");
    if (communities < 1) throw UsageError("communities must be >= 1");
    if (communities > users)
        throw UsageError("communities (" + std::to_string(communities) + ") exceed users (" +
                         std::to_string(users) + ")");
    if (communities > items)
        throw UsageError("communities (" + std::to_string(communities) + ") exceed items (" +
                         std::to_string(items) + ")");
    if (inter_prob < 0.0 || inter_prob > 1.0)
        throw UsageError("inter-prob must lie in [0,1], got " + std::to_string(inter_prob));
    if (interactions_per_user < 1) throw UsageError("per-user must be >= 1");
    if (popularity_skew < 0.0) throw UsageError("popularity-skew must be >= 0");
    if (activity_skew < 0.0) throw UsageError("activity-skew must be >= 0");
    if (time_span < 2) throw UsageError("time-span must be >= 2");
}

namespace {

std::string padded_id(char prefix, int index, int total) {
    int width = 1;
    for (int v = total - 1; v >= 10; v /= 10) ++width;
    std::string digits = std::to_string(index);
    return prefix + std::string(static_cast<std::size_t>(width) - digits.size() > 0
                                    ? static_cast<std::size_t>(width) - digits.size()
                                    : 0,
                                '0') +
           digits;
}

// Balanced contiguous blocks: member i of `count` belongs to community
// floor(i * communities / count).
int community_of(int index, int count, int communities) {
    return static_cast<int>((static_cast<long long>(index) * communities) / count);
}

}  // namespace

Dataset generate_planted_partition(const SyntheticSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);

    std::vector<UserId> users(static_cast<std::size_t>(spec.users));
    std::vector<ItemId> items(static_cast<std::size_t>(spec.items));
    for (int i = 0; i < spec.users; ++i)
        users[static_cast<std::size_t>(i)] = padded_id('u', i, spec.users);
    for (int i = 0; i < spec.items; ++i)
        items[static_cast<std::size_t>(i)] = padded_id('i', i, spec.items);

    // Item index ranges per community.
    std::vector<std::pair<int, int>> item_range(static_cast<std::size_t>(spec.communities),
                                                {spec.items, 0});
    for (int i = 0; i < spec.items; ++i) {
        const auto c = static_cast<std::size_t>(community_of(i, spec.items, spec.communities));
        item_range[c].first = std::min(item_range[c].first, i);
        item_range[c].second = std::max(item_range[c].second, i + 1);
    }

    // Per-community cumulative item weights; Zipf over the community's items
    // when popularity_skew > 0, uniform otherwise.
    std::vector<std::vector<double>> cumulative(static_cast<std::size_t>(spec.communities));
    for (int c = 0; c < spec.communities; ++c) {
        const auto [lo, hi] = item_range[static_cast<std::size_t>(c)];
        auto& cum = cumulative[static_cast<std::size_t>(c)];
        double total = 0.0;
        for (int r = 0; r < hi - lo; ++r) {
            total += spec.popularity_skew > 0.0
                         ? std::pow(static_cast<double>(r + 1), -spec.popularity_skew)
                         : 1.0;
            cum.push_back(total);
        }
    }
    const auto draw_item = [&](int community, Rng& r) {
        const auto [lo, hi] = item_range[static_cast<std::size_t>(community)];
        const auto& cum = cumulative[static_cast<std::size_t>(community)];
        const double x = r.next_double() * cum.back();
        const auto it = std::upper_bound(cum.begin(), cum.end(), x);
        const int offset = static_cast<int>(std::min<std::ptrdiff_t>(it - cum.begin(),
                                                                     hi - lo - 1));
        return lo + offset;
    };

    // Per-user draw counts: equal by default, Zipf-redistributed within each
    // community when activity_skew > 0 (community totals are preserved).
    std::vector<int> draws(static_cast<std::size_t>(spec.users), spec.interactions_per_user);
    if (spec.activity_skew > 0.0) {
        std::vector<std::vector<int>> members(static_cast<std::size_t>(spec.communities));
        for (int u = 0; u < spec.users; ++u)
            members[static_cast<std::size_t>(community_of(u, spec.users, spec.communities))]
                .push_back(u);
        for (const auto& group : members) {
            double total_weight = 0.0;
            for (std::size_t r = 0; r < group.size(); ++r)
                total_weight += std::pow(static_cast<double>(r + 1), -spec.activity_skew);
            const long long budget =
                static_cast<long long>(group.size()) * spec.interactions_per_user;
            long long assigned = 0;
            for (std::size_t r = 0; r < group.size(); ++r) {
                const double share =
                    std::pow(static_cast<double>(r + 1), -spec.activity_skew) / total_weight;
                int n = std::max(2, static_cast<int>(std::floor(share * budget)));
                draws[static_cast<std::size_t>(group[r])] = n;
                assigned += n;
            }
            // hand the rounding remainder to the most active member
            if (assigned < budget && !group.empty())
                draws[static_cast<std::size_t>(group.front())] +=
                    static_cast<int>(budget - assigned);
        }
    }

    std::vector<Interaction> interactions;
    interactions.reserve(static_cast<std::size_t>(spec.users) *
                         static_cast<std::size_t>(spec.interactions_per_user));
    std::set<std::pair<std::string, Timestamp>> seen;  // per-user (item, tau) dedup

    for (int u = 0; u < spec.users; ++u) {
        const int own = community_of(u, spec.users, spec.communities);
        for (int k = 0; k < draws[static_cast<std::size_t>(u)]; ++k) {
            int community = own;
            if (spec.communities > 1 && rng.bernoulli(spec.inter_prob)) {
                int other = static_cast<int>(rng.uniform_int(
                    static_cast<std::uint64_t>(spec.communities - 1)));
                if (other >= own) ++other;
                community = other;
            }
            for (;;) {
                const int item = draw_item(community, rng);
                const Timestamp tau =
                    static_cast<Timestamp>(rng.uniform_int(static_cast<std::uint64_t>(spec.time_span)));
                const auto key = std::make_pair(users[static_cast<std::size_t>(u)] + "/" +
                                                    items[static_cast<std::size_t>(item)],
                                                tau);
                if (seen.insert(key).second) {
                    interactions.push_back(Interaction{users[static_cast<std::size_t>(u)],
                                                       items[static_cast<std::size_t>(item)],
                                                       tau});
                    break;
                }
            }
        }
    }

    AttributeTable user_attrs{SubjectKind::user};
    for (int u = 0; u < spec.users; ++u) {
        const std::string c = "c" + std::to_string(community_of(u, spec.users, spec.communities));
        user_attrs.records[users[static_cast<std::size_t>(u)]]["community"] = {c};
        user_attrs.vocab["community"].insert(c);
    }
    AttributeTable item_attrs{SubjectKind::item};
    for (int i = 0; i < spec.items; ++i) {
        const std::string c = "c" + std::to_string(community_of(i, spec.items, spec.communities));
        item_attrs.records[items[static_cast<std::size_t>(i)]]["community"] = {c};
        item_attrs.vocab["community"].insert(c);
    }

    return ingest::build_dataset(std::move(interactions), std::move(user_attrs),
                                 std::move(item_attrs));
}

void write_dataset_files(const Dataset& dataset, const std::string& directory) {
    namespace fs = std::filesystem;
    fs::create_directories(directory);
    {
        std::ofstream out(fs::path(directory) / "interactions.csv", std::ios::binary);
        if (!out) throw UsageError("cannot write interactions.csv in '" + directory + "'");
        ingest::write_interaction_log(dataset.interactions, out);
    }
    {
        std::ofstream out(fs::path(directory) / "user_attributes.csv", std::ios::binary);
        ingest::write_attribute_table(dataset.user_attributes, out);
    }
    {
        std::ofstream out(fs::path(directory) / "item_attributes.csv", std::ios::binary);
        ingest::write_attribute_table(dataset.item_attributes, out);
    }
}

}  // namespace echoloop::synthetic
