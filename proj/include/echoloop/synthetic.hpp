#ifndef ECHOLOOP_SYNTHETIC_HPP
#define ECHOLOOP_SYNTHETIC_HPP

#include <cstdint>

#include "echoloop/core.hpp"

namespace echoloop::synthetic {

// Planted-partition fixture: users and items split into balanced communities;
// each interaction stays inside the user's community with probability
// 1 - inter_prob, otherwise lands uniformly in another community. Timestamps
// are uniform over [0, time_span), so user activity spreads across the
// timeline and temporal splits produce common users.
struct SyntheticSpec {
    int users = 200;
    int items = 100;
    int communities = 2;
    double inter_prob = 0.05;
    int interactions_per_user = 10;
    // Zipf exponent for item choice within a community: weight of the r-th
    // item is (r+1)^-skew. 0 keeps the choice uniform.
    double popularity_skew = 0.0;
    // Zipf exponent for per-user activity: user ranks within their community
    // draw proportionally more interactions. 0 gives every user
    // interactions_per_user draws; > 0 redistributes the same total.
    double activity_skew = 0.0;
    Timestamp time_span = 1000000;
    std::uint64_t seed = 1;

    void validate() const;
};

Dataset generate_planted_partition(const SyntheticSpec& spec);

// Writes interactions.csv, user_attributes.csv, item_attributes.csv.
void write_dataset_files(const Dataset& dataset, const std::string& directory);

}  // namespace echoloop::synthetic

#endif  // ECHOLOOP_SYNTHETIC_HPP
