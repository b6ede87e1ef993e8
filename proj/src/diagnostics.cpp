#include "echoloop/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "echoloop/rng.hpp"

namespace echoloop::diag {

Histogram attribute_distribution(const std::vector<riskgen::Profile>& profiles,
                                 const std::string& attribute_name) {
    Histogram h;
    h.attribute_name = attribute_name;
    for (const auto& profile : profiles) {
        const auto it = profile.attributes.find(attribute_name);
        if (it == profile.attributes.end()) continue;
        for (const auto& value : it->second) {
            h.counts[value] += 1;
            h.total += 1;
        }
    }
    if (h.total == 0)
        throw UsageError("attribute '" + attribute_name + "' absent from all profiles");
    return h;
}

Histogram attribute_distribution(const AttributeTable& table, const std::string& attribute_name) {
    if (table.vocab.count(attribute_name) == 0)
        throw UsageError("attribute '" + attribute_name + "' not in the table");
    Histogram h;
    h.attribute_name = attribute_name;
    for (const auto& [subject, attrs] : table.records) {
        const auto it = attrs.find(attribute_name);
        if (it == attrs.end()) continue;
        for (const auto& value : it->second) {
            h.counts[value] += 1;
            h.total += 1;
        }
    }
    return h;
}

Divergence distribution_divergence(const Histogram& generated, const Histogram& reference) {
    if (generated.total == 0 || reference.total == 0)
        throw UsageError("distribution_divergence: zero-total histogram");

    std::set<std::string> support;
    for (const auto& [v, c] : generated.counts) support.insert(v);
    for (const auto& [v, c] : reference.counts) support.insert(v);

    const auto share = [](const Histogram& h, const std::string& v) {
        const auto it = h.counts.find(v);
        return it == h.counts.end()
                   ? 0.0
                   : static_cast<double>(it->second) / static_cast<double>(h.total);
    };

    Divergence d;
    double sum_abs = 0.0;
    for (const auto& v : support) sum_abs += std::abs(share(generated, v) - share(reference, v));
    d.tv_distance = 0.5 * sum_abs;

    // Mode of the generated histogram; ties break toward the smaller value.
    std::string mode;
    std::int64_t best = -1;
    for (const auto& [v, c] : generated.counts) {
        if (c > best) {
            best = c;
            mode = v;
        }
    }
    d.top1_share_delta = share(generated, mode) - share(reference, mode);
    return d;
}

double fef_rate(const std::vector<std::pair<ObservationSet, ObservationSet>>& pairs) {
    if (pairs.empty()) throw UsageError("fef_rate: empty pair list");
    std::int64_t intersection = 0;
    std::int64_t gt_total = 0;
    for (const auto& [llm, gt] : pairs) {
        if (gt.values.empty())
            throw DataError("fef_rate: empty ground-truth set for subject '" + gt.subject_id +
                            "'");
        for (const auto& v : gt.values) intersection += llm.values.count(v);
        gt_total += static_cast<std::int64_t>(gt.values.size());
    }
    const double rate =
        1.0 - static_cast<double>(intersection) / static_cast<double>(gt_total);
    return std::clamp(rate, 0.0, 1.0);
}

double catalog_fef_rate(const std::vector<RankedList>& ranked_lists,
                        const std::set<ItemId>& catalog) {
    std::int64_t total = 0;
    std::int64_t outside = 0;
    for (const auto& list : ranked_lists) {
        for (const auto& entry : list) {
            ++total;
            if (catalog.count(entry.item_id) == 0) ++outside;
        }
    }
    if (total == 0) throw UsageError("catalog_fef_rate: zero recommended entries");
    return static_cast<double>(outside) / static_cast<double>(total);
}

namespace {

bool same_kind(const TrialObservation& a, const TrialObservation& b) {
    return a.index() == b.index();
}

bool trial_differs(const TrialObservation& a, const TrialObservation& b) {
    if (std::holds_alternative<ObservationSet>(a)) {
        return std::get<ObservationSet>(a).values != std::get<ObservationSet>(b).values;
    }
    const auto& la = std::get<RankedList>(a);
    const auto& lb = std::get<RankedList>(b);
    if (la.size() != lb.size()) return true;
    for (std::size_t i = 0; i < la.size(); ++i)
        if (la[i].item_id != lb[i].item_id) return true;
    return false;
}

}  // namespace

double lc_rate(const std::vector<std::pair<TrialObservation, TrialObservation>>& trials) {
    if (trials.empty()) throw UsageError("lc_rate: empty trial list");
    std::int64_t unequal = 0;
    for (const auto& [a, b] : trials) {
        if (!same_kind(a, b)) throw UsageError("lc_rate: mixed kinds within a trial pair");
        if (trial_differs(a, b)) ++unequal;
    }
    return static_cast<double>(unequal) / static_cast<double>(trials.size());
}

namespace {

// Type-7 linear interpolation on a sorted sample.
double percentile(const std::vector<double>& sorted, double p) {
    if (sorted.size() == 1) return sorted.front();
    const double h = p * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

GapStats popularity_gap(const std::map<UserId, RankedList>& ranked_lists,
                        const std::map<UserId, std::vector<ItemId>>& reference_items,
                        const PopularityIndex& index) {
    if (ranked_lists.empty()) throw UsageError("popularity_gap: no users");
    if (ranked_lists.size() != reference_items.size())
        throw UsageError("popularity_gap: user sets differ between maps");

    GapStats stats;
    for (const auto& [user, list] : ranked_lists) {
        const auto ref_it = reference_items.find(user);
        if (ref_it == reference_items.end())
            throw UsageError("popularity_gap: user '" + user + "' missing from reference map");
        if (list.empty() || ref_it->second.empty())
            throw UsageError("popularity_gap: empty list for user '" + user + "'");

        std::int64_t rec_sum = 0;
        std::int64_t rec_n = 0;
        for (const auto& entry : list) {
            if (entry.fabricated) continue;  // out-of-catalog entries excluded
            rec_sum += index.at(entry.item_id);
            ++rec_n;
        }
        if (rec_n == 0) {
            ++stats.skipped_users;
            log_warn("popularity_gap: user '" + user + "' has only out-of-catalog entries");
            continue;
        }
        std::int64_t ref_sum = 0;
        for (const auto& item : ref_it->second) ref_sum += index.at(item);
        const double gap = static_cast<double>(rec_sum) / static_cast<double>(rec_n) -
                           static_cast<double>(ref_sum) /
                               static_cast<double>(ref_it->second.size());
        stats.gaps.emplace_back(user, gap);
    }
    if (stats.gaps.empty()) throw DataError("popularity_gap: every user was skipped");

    std::vector<double> values;
    values.reserve(stats.gaps.size());
    for (const auto& [user, gap] : stats.gaps) values.push_back(gap);
    std::sort(values.begin(), values.end());
    stats.summary.min = values.front();
    stats.summary.max = values.back();
    stats.summary.q1 = percentile(values, 0.25);
    stats.summary.median = percentile(values, 0.5);
    stats.summary.q3 = percentile(values, 0.75);
    double sum = 0.0;
    for (double v : values) sum += v;
    stats.summary.mean = sum / static_cast<double>(values.size());
    return stats;
}

namespace {

double sq_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t d = 0; d < a.size(); ++d) {
        const double diff = a[d] - b[d];
        s += diff * diff;
    }
    return s;
}

}  // namespace

KMeansResult kmeans(const rec::EmbeddingMatrix& points, int k, std::uint64_t seed) {
    const std::size_t n = points.vectors.size();
    if (k < 1) throw UsageError("kmeans: k must be >= 1, got " + std::to_string(k));
    if (n < static_cast<std::size_t>(k))
        throw UsageError("kmeans: " + std::to_string(n) + " points for k=" + std::to_string(k));
    const std::size_t dim = points.dim;

    Rng rng(seed);
    KMeansResult result;
    auto& centroids = result.centroids;

    // k-means++ seeding.
    centroids.push_back(points.vectors[rng.uniform_int(n)]);
    std::vector<double> dist2(n);
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centroids) best = std::min(best, sq_distance(points.vectors[i], c));
            dist2[i] = best;
            total += best;
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double x = rng.next_double() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist2[i];
                if (x < acc) {
                    pick = i;
                    break;
                }
            }
        }
        centroids.push_back(points.vectors[pick]);
    }

    std::vector<int> labels(n, 0);
    const auto assign = [&]() {
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            int best_label = 0;
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < centroids.size(); ++c) {
                const double d = sq_distance(points.vectors[i], centroids[c]);
                if (d < best) {  // ties keep the lower centroid index
                    best = d;
                    best_label = static_cast<int>(c);
                }
            }
            if (labels[i] != best_label) {
                labels[i] = best_label;
                changed = true;
            }
        }
        return changed;
    };
    const auto current_sse = [&]() {
        double sse = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            sse += sq_distance(points.vectors[i], centroids[static_cast<std::size_t>(labels[i])]);
        return sse;
    };

    assign();
    constexpr int kMaxIterations = 300;
    for (int iter = 0; iter < kMaxIterations; ++iter) {
        // Update step.
        std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                              std::vector<double>(dim, 0.0));
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(labels[i]);
            sizes[c] += 1;
            for (std::size_t d = 0; d < dim; ++d) sums[c][d] += points.vectors[i][d];
        }
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
            if (sizes[c] == 0) {
                // Re-seed with the point farthest from its current centroid.
                std::size_t farthest = 0;
                double best = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    const double d = sq_distance(
                        points.vectors[i], centroids[static_cast<std::size_t>(labels[i])]);
                    if (d > best) {
                        best = d;
                        farthest = i;
                    }
                }
                centroids[c] = points.vectors[farthest];
            } else {
                for (std::size_t d = 0; d < dim; ++d)
                    centroids[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
            }
        }

        result.iterations = iter + 1;
        const bool changed = assign();
        result.sse_history.push_back(current_sse());
        if (!changed) break;
    }

    result.labels = std::move(labels);
    result.sse = result.sse_history.empty() ? current_sse() : result.sse_history.back();
    return result;
}

std::array<double, 2> Projector::project(const std::vector<double>& v) const {
    std::array<double, 2> out{0.0, 0.0};
    for (std::size_t axis = 0; axis < 2; ++axis) {
        if (components[axis].empty()) continue;
        double dot = 0.0;
        for (std::size_t d = 0; d < v.size(); ++d)
            dot += (v[d] - mean[d]) * components[axis][d];
        out[axis] = dot;
    }
    return out;
}

Projector fit_pca_top2(const rec::EmbeddingMatrix& reference) {
    const std::size_t n = reference.vectors.size();
    const std::size_t dim = reference.dim;
    if (n == 0) throw UsageError("fit_pca_top2: empty matrix");

    Projector projector;
    projector.mean.assign(dim, 0.0);
    for (const auto& v : reference.vectors)
        for (std::size_t d = 0; d < dim; ++d) projector.mean[d] += v[d];
    for (std::size_t d = 0; d < dim; ++d) projector.mean[d] /= static_cast<double>(n);

    Eigen::MatrixXd centered(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dim; ++d)
            centered(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
                reference.vectors[i][d] - projector.mean[d];

    const double denom = n > 1 ? static_cast<double>(n - 1) : 1.0;
    Eigen::MatrixXd cov = centered.transpose() * centered / denom;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) throw DataError("fit_pca_top2: eigensolver failed");

    // Eigenvalues come out ascending; take the top one or two.
    const Eigen::Index last = static_cast<Eigen::Index>(dim) - 1;
    for (std::size_t axis = 0; axis < 2; ++axis) {
        const Eigen::Index col = last - static_cast<Eigen::Index>(axis);
        if (col < 0) break;  // dim == 1: second component stays empty
        Eigen::VectorXd v = solver.eigenvectors().col(col);
        // Deterministic sign: largest-magnitude coefficient is positive.
        Eigen::Index arg_max = 0;
        v.cwiseAbs().maxCoeff(&arg_max);
        if (v(arg_max) < 0.0) v = -v;
        projector.components[axis].assign(v.data(), v.data() + v.size());
    }
    return projector;
}

PolarizationTrace polarization_trace(const std::vector<rec::EmbeddingMatrix>& snapshots, int k,
                                     std::uint64_t seed) {
    if (snapshots.empty()) throw UsageError("polarization_trace: no snapshots");
    const auto& final_period = snapshots.back();
    for (const auto& snapshot : snapshots) {
        if (snapshot.subject_ids != final_period.subject_ids || snapshot.dim != final_period.dim)
            throw DataError("polarization_trace: subject sets differ across periods");
    }
    if (k != 2)
        throw UsageError("polarization_trace: centroid distance is defined for k=2, got " +
                         std::to_string(k));

    const auto clustering = kmeans(final_period, k, seed);

    PolarizationTrace trace;
    trace.subject_ids = final_period.subject_ids;
    for (std::size_t i = 0; i < trace.subject_ids.size(); ++i)
        trace.reference_labels[trace.subject_ids[i]] = clustering.labels[i];

    const Projector projector = fit_pca_top2(final_period);

    for (const auto& snapshot : snapshots) {
        std::array<std::vector<double>, 2> sums{std::vector<double>(snapshot.dim, 0.0),
                                                std::vector<double>(snapshot.dim, 0.0)};
        std::array<std::size_t, 2> sizes{0, 0};
        for (std::size_t i = 0; i < snapshot.vectors.size(); ++i) {
            const auto group = static_cast<std::size_t>(clustering.labels[i]);
            sizes[group] += 1;
            for (std::size_t d = 0; d < snapshot.dim; ++d)
                sums[group][d] += snapshot.vectors[i][d];
        }
        double distance = 0.0;
        if (sizes[0] > 0 && sizes[1] > 0) {
            double s = 0.0;
            for (std::size_t d = 0; d < snapshot.dim; ++d) {
                const double diff = sums[0][d] / static_cast<double>(sizes[0]) -
                                    sums[1][d] / static_cast<double>(sizes[1]);
                s += diff * diff;
            }
            distance = std::sqrt(s);
        }
        trace.centroid_distances.push_back(distance);

        std::vector<std::array<double, 2>> coords;
        coords.reserve(snapshot.vectors.size());
        for (const auto& v : snapshot.vectors) coords.push_back(projector.project(v));
        trace.projections.push_back(std::move(coords));
    }
    return trace;
}

}  // namespace echoloop::diag
