#ifndef ECHOLOOP_DIAGNOSTICS_HPP
#define ECHOLOOP_DIAGNOSTICS_HPP

#include <array>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "echoloop/core.hpp"
#include "echoloop/recommenders.hpp"
#include "echoloop/riskgen.hpp"

namespace echoloop::diag {

struct Histogram {
    std::string attribute_name;
    std::map<std::string, std::int64_t> counts;
    std::int64_t total = 0;
};

Histogram attribute_distribution(const std::vector<riskgen::Profile>& profiles,
                                 const std::string& attribute_name);
Histogram attribute_distribution(const AttributeTable& table, const std::string& attribute_name);

struct Divergence {
    double tv_distance = 0.0;
    double top1_share_delta = 0.0;
};

// Total variation over the union of supports plus the generated mode's share
// shift against the reference.
Divergence distribution_divergence(const Histogram& generated, const Histogram& reference);

struct ObservationSet {
    std::string subject_id;
    std::set<std::string> values;
};

// Pooled FEF: 1 - sum |O_llm & O_gt| / sum |O_gt|. Every O_gt must be nonempty.
double fef_rate(const std::vector<std::pair<ObservationSet, ObservationSet>>& pairs);

// Ranked-list membership variant: fraction of recommended entries outside the
// catalog, pooled over all lists.
double catalog_fef_rate(const std::vector<RankedList>& ranked_lists,
                        const std::set<ItemId>& catalog);

// LC trials: set inequality for observation sets, order-sensitive inequality
// for ranked lists. Both elements of a pair must be the same kind.
using TrialObservation = std::variant<ObservationSet, RankedList>;
double lc_rate(const std::vector<std::pair<TrialObservation, TrialObservation>>& trials);

struct PopularityIndex {
    std::map<ItemId, std::int64_t> counts;

    std::int64_t at(const ItemId& item) const {
        const auto it = counts.find(item);
        return it == counts.end() ? 0 : it->second;
    }
};

struct GapSummary {
    double min = 0, q1 = 0, median = 0, q3 = 0, max = 0, mean = 0;
};

struct GapStats {
    std::vector<std::pair<UserId, double>> gaps;  // sorted by user id
    GapSummary summary;
    std::size_t skipped_users = 0;  // ranked list entirely out-of-catalog
};

// Per user: mean popularity over the ranked list (fabricated entries excluded)
// minus mean popularity over the reference items. Both maps must cover the
// same users; lists must be nonempty.
GapStats popularity_gap(const std::map<UserId, RankedList>& ranked_lists,
                        const std::map<UserId, std::vector<ItemId>>& reference_items,
                        const PopularityIndex& index);

struct KMeansResult {
    std::vector<int> labels;
    std::vector<std::vector<double>> centroids;
    int iterations = 0;
    double sse = 0.0;
    std::vector<double> sse_history;  // after each Lloyd update
};

// Lloyd's algorithm with k-means++ seeding. Nearest-centroid ties break toward
// the lower centroid index; an empty cluster is re-seeded with the point
// farthest from its centroid. Stops at assignment fixpoint or 300 iterations.
KMeansResult kmeans(const rec::EmbeddingMatrix& points, int k, std::uint64_t seed);

// Shared linear projector: top-2 principal components of a reference matrix,
// applied to aligned matrices from other periods.
struct Projector {
    std::vector<double> mean;
    std::array<std::vector<double>, 2> components;

    std::array<double, 2> project(const std::vector<double>& v) const;
};

Projector fit_pca_top2(const rec::EmbeddingMatrix& reference);

struct PolarizationTrace {
    std::map<std::string, int> reference_labels;       // from final-period k-means
    std::vector<double> centroid_distances;            // one per period
    std::vector<std::vector<std::array<double, 2>>> projections;  // [period][subject]
    std::vector<std::string> subject_ids;              // row order of projections
};

// Labels subjects by k-means on the final period, then tracks the Euclidean
// distance between the two group means through every period, plus a 2D
// projection through the final period's principal components.
PolarizationTrace polarization_trace(const std::vector<rec::EmbeddingMatrix>& snapshots, int k,
                                     std::uint64_t seed);

}  // namespace echoloop::diag

#endif  // ECHOLOOP_DIAGNOSTICS_HPP
