#include "echoloop/recommenders.hpp"

#include <algorithm>
#include <cmath>

#include "echoloop/rng.hpp"

namespace echoloop::rec {

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "most_popular") return ModelKind::most_popular;
    if (name == "item_knn") return ModelKind::item_knn;
    if (name == "matrix_factorization") return ModelKind::matrix_factorization;
    throw UsageError("unknown recommender kind '" + name + "'");
}

const char* to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::most_popular: return "most_popular";
        case ModelKind::item_knn: return "item_knn";
        case ModelKind::matrix_factorization: return "matrix_factorization";
    }
    return "?";
}

void RecommenderConfig::validate() const {
    if (embedding_dim < 1)
        throw UsageError("embedding_dim must be >= 1, got " + std::to_string(embedding_dim));
    if (epochs < 1) throw UsageError("epochs must be >= 1, got " + std::to_string(epochs));
    if (!(learning_rate > 0.0))
        throw UsageError("learning_rate must be > 0, got " + std::to_string(learning_rate));
    if (negatives_per_positive < 1)
        throw UsageError("negatives_per_positive must be >= 1, got " +
                         std::to_string(negatives_per_positive));
    if (neighbors < 1)
        throw UsageError("neighbors must be >= 1, got " + std::to_string(neighbors));
}

TrainedModel::TrainedModel(std::span<const Interaction> snapshot,
                           const std::set<ItemId>& catalog) {
    catalog_.assign(catalog.begin(), catalog.end());
    item_counts_.assign(catalog_.size(), 0);
    item_index_.reserve(catalog_.size());
    for (std::size_t i = 0; i < catalog_.size(); ++i) item_index_[catalog_[i]] = i;

    std::set<UserId> user_set;
    for (const auto& x : snapshot) user_set.insert(x.user_id);
    users_.assign(user_set.begin(), user_set.end());
    user_index_.reserve(users_.size());
    for (std::size_t u = 0; u < users_.size(); ++u) user_index_[users_[u]] = u;

    user_items_.assign(users_.size(), {});
    for (const auto& x : snapshot) {
        const auto it = item_index_.find(x.item_id);
        if (it == item_index_.end())
            throw DataError("snapshot item '" + x.item_id + "' not in catalog");
        item_counts_[it->second] += 1;
        user_items_[user_index_.at(x.user_id)].push_back(it->second);
    }
    for (auto& items : user_items_) {
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
    }
}

std::optional<std::size_t> TrainedModel::item_index(const ItemId& item) const {
    const auto it = item_index_.find(item);
    if (it == item_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::size_t> TrainedModel::user_index(const UserId& user) const {
    const auto it = user_index_.find(user);
    if (it == user_index_.end()) return std::nullopt;
    return it->second;
}

std::int64_t TrainedModel::popularity(const ItemId& item) const {
    const auto idx = item_index(item);
    return idx ? item_counts_[*idx] : 0;
}

RankedList TrainedModel::recommend(const UserId& user, int k,
                                   const std::set<ItemId>& exclusions) const {
    if (k < 1) throw UsageError("recommend: k must be >= 1, got " + std::to_string(k));

    // (score, catalog index); ascending index doubles as the item-id tie-break
    // because the catalog is sorted.
    std::vector<std::pair<double, std::size_t>> scored;
    scored.reserve(catalog_.size());
    for (std::size_t i = 0; i < catalog_.size(); ++i) {
        if (exclusions.count(catalog_[i])) continue;
        scored.emplace_back(score(user, catalog_[i]), i);
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take),
                      scored.end(), [](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first > b.first;
                          return a.second < b.second;
                      });

    RankedList out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i)
        out.push_back(RankedEntry{catalog_[scored[i].second], false});
    return out;
}

namespace {

class MostPopularModel final : public TrainedModel {
public:
    MostPopularModel(std::span<const Interaction> snapshot, const std::set<ItemId>& catalog)
        : TrainedModel(snapshot, catalog) {}

    double score(const UserId&, const ItemId& item) const override {
        const auto idx = item_index(item);
        return idx ? static_cast<double>(item_counts_[*idx]) : 0.0;
    }
};

class ItemKnnModel final : public TrainedModel {
public:
    ItemKnnModel(std::span<const Interaction> snapshot, const std::set<ItemId>& catalog,
                 int neighbors)
        : TrainedModel(snapshot, catalog) {
        // Co-occurrence counts over the binary user-item matrix, then cosine.
        const std::size_t m = catalog_.size();
        top_neighbors_.assign(m, {});
        std::vector<std::int64_t> distinct_users(m, 0);
        for (const auto& items : user_items_)
            for (std::size_t i : items) distinct_users[i] += 1;

        std::vector<std::vector<std::pair<std::size_t, std::int64_t>>> co(m);
        for (const auto& items : user_items_) {
            for (std::size_t a = 0; a < items.size(); ++a) {
                for (std::size_t b = a + 1; b < items.size(); ++b) {
                    bump(co[items[a]], items[b]);
                    bump(co[items[b]], items[a]);
                }
            }
        }
        for (std::size_t i = 0; i < m; ++i) {
            std::vector<std::pair<double, std::size_t>> sims;
            sims.reserve(co[i].size());
            for (const auto& [j, count] : co[i]) {
                const double denom = std::sqrt(static_cast<double>(distinct_users[i]) *
                                               static_cast<double>(distinct_users[j]));
                sims.emplace_back(static_cast<double>(count) / denom, j);
            }
            std::sort(sims.begin(), sims.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first > b.first;
                return a.second < b.second;
            });
            if (sims.size() > static_cast<std::size_t>(neighbors))
                sims.resize(static_cast<std::size_t>(neighbors));
            auto& row = top_neighbors_[i];
            for (const auto& [sim, j] : sims) row.emplace_back(j, sim);
            std::sort(row.begin(), row.end());  // by neighbor index, for lookup
        }
    }

    double score(const UserId& user, const ItemId& item) const override {
        const auto uidx = user_index(user);
        const auto iidx = item_index(item);
        if (!iidx) return 0.0;
        if (!uidx)  // cold user: popularity fallback
            return static_cast<double>(item_counts_[*iidx]);
        const auto& consumed = user_items_[*uidx];
        double s = 0.0;
        for (const auto& [j, sim] : top_neighbors_[*iidx])
            if (std::binary_search(consumed.begin(), consumed.end(), j)) s += sim;
        return s;
    }

private:
    static void bump(std::vector<std::pair<std::size_t, std::int64_t>>& row, std::size_t j) {
        for (auto& [idx, count] : row) {
            if (idx == j) {
                ++count;
                return;
            }
        }
        row.emplace_back(j, 1);
    }

    std::vector<std::vector<std::pair<std::size_t, double>>> top_neighbors_;
};

class MatrixFactorizationModel final : public TrainedModel {
public:
    MatrixFactorizationModel(std::span<const Interaction> snapshot,
                             const std::set<ItemId>& catalog, const RecommenderConfig& config,
                             const std::pair<EmbeddingMatrix, EmbeddingMatrix>* warm_start)
        : TrainedModel(snapshot, catalog), dim_(static_cast<std::size_t>(config.embedding_dim)) {
        Rng rng(Rng::mix(config.seed, 0x6D66u));

        user_vecs_.assign(users_.size() * dim_, 0.0);
        item_vecs_.assign(catalog_.size() * dim_, 0.0);
        const double scale = 0.1;
        for (auto& v : user_vecs_) v = rng.normal() * scale;
        for (auto& v : item_vecs_) v = rng.normal() * scale;
        if (warm_start != nullptr) {
            copy_warm(warm_start->first, users_, user_vecs_);
            copy_warm(warm_start->second, catalog_, item_vecs_);
        }

        // Positive pairs in canonical order: training is invariant to the
        // snapshot's input permutation.
        std::vector<std::pair<std::size_t, std::size_t>> positives;
        positives.reserve(snapshot.size());
        for (const auto& x : snapshot)
            positives.emplace_back(user_index(x.user_id).value(), item_index(x.item_id).value());
        std::sort(positives.begin(), positives.end());

        std::vector<std::size_t> order(positives.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

        const double lr = config.learning_rate;
        const int negatives = config.negatives_per_positive;
        const std::size_t m = catalog_.size();
        std::vector<double> user_copy(dim_);

        const double decay = 1.0 - lr * kL2;
        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            // Fisher-Yates reshuffle per epoch from the model's own stream.
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.uniform_int(i)]);

            for (std::size_t idx : order) {
                const auto [u, pos] = positives[idx];
                sgd_step(u, pos, 1.0, lr, user_copy);
                for (int n = 0; n < negatives; ++n)
                    sgd_step(u, rng.uniform_int(m), 0.0, lr, user_copy);
            }
            // Decoupled weight decay, once per epoch.
            for (auto& v : user_vecs_) v *= decay;
            for (auto& v : item_vecs_) v *= decay;
        }
    }

    double score(const UserId& user, const ItemId& item) const override {
        const auto iidx = item_index(item);
        if (!iidx) return 0.0;
        const auto uidx = user_index(user);
        if (!uidx)  // cold user: popularity fallback
            return static_cast<double>(item_counts_[*iidx]);
        const double* x = &user_vecs_[*uidx * dim_];
        const double* y = &item_vecs_[*iidx * dim_];
        double dot = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) dot += x[d] * y[d];
        return dot;
    }

    std::optional<std::pair<EmbeddingMatrix, EmbeddingMatrix>> embeddings() const override {
        EmbeddingMatrix users;
        users.subject_ids = users_;
        users.dim = dim_;
        users.vectors.reserve(users_.size());
        for (std::size_t u = 0; u < users_.size(); ++u)
            users.vectors.emplace_back(user_vecs_.begin() + static_cast<std::ptrdiff_t>(u * dim_),
                                       user_vecs_.begin() +
                                           static_cast<std::ptrdiff_t>((u + 1) * dim_));
        EmbeddingMatrix items;
        items.subject_ids = catalog_;
        items.dim = dim_;
        items.vectors.reserve(catalog_.size());
        for (std::size_t i = 0; i < catalog_.size(); ++i)
            items.vectors.emplace_back(item_vecs_.begin() + static_cast<std::ptrdiff_t>(i * dim_),
                                       item_vecs_.begin() +
                                           static_cast<std::ptrdiff_t>((i + 1) * dim_));
        return std::make_pair(std::move(users), std::move(items));
    }

private:
    // Decoupled weight decay, applied once per epoch. Keeps embedding norms
    // at a data-share equilibrium across retrains of growing corpora.
    static constexpr double kL2 = 0.1;

    // Seed vectors from a previous model for subjects it knew; dimension
    // mismatches fall back to the random init.
    void copy_warm(const EmbeddingMatrix& source, const std::vector<std::string>& subjects,
                   std::vector<double>& target) {
        if (source.dim != dim_) return;
        std::unordered_map<std::string, std::size_t> index;
        index.reserve(source.subject_ids.size());
        for (std::size_t i = 0; i < source.subject_ids.size(); ++i)
            index[source.subject_ids[i]] = i;
        for (std::size_t s = 0; s < subjects.size(); ++s) {
            const auto it = index.find(subjects[s]);
            if (it == index.end()) continue;
            for (std::size_t d = 0; d < dim_; ++d)
                target[s * dim_ + d] = source.vectors[it->second][d];
        }
    }

    void sgd_step(std::size_t u, std::size_t i, double label, double lr,
                  std::vector<double>& user_copy) {
        double* x = &user_vecs_[u * dim_];
        double* y = &item_vecs_[i * dim_];
        double dot = 0.0;
        for (std::size_t d = 0; d < dim_; ++d) dot += x[d] * y[d];
        const double err = 1.0 / (1.0 + std::exp(-dot)) - label;
        for (std::size_t d = 0; d < dim_; ++d) user_copy[d] = x[d];
        for (std::size_t d = 0; d < dim_; ++d) {
            x[d] -= lr * err * y[d];
            y[d] -= lr * err * user_copy[d];
        }
    }

    std::size_t dim_;
    std::vector<double> user_vecs_;
    std::vector<double> item_vecs_;
};

}  // namespace

std::unique_ptr<TrainedModel> train(const RecommenderConfig& config,
                                    std::span<const Interaction> snapshot,
                                    const std::set<ItemId>& catalog,
                                    const std::pair<EmbeddingMatrix, EmbeddingMatrix>*
                                        warm_start) {
    config.validate();
    if (snapshot.empty()) throw DataError("train: empty snapshot");
    if (catalog.empty()) throw DataError("train: empty catalog");

    switch (config.kind) {
        case ModelKind::most_popular:
            return std::make_unique<MostPopularModel>(snapshot, catalog);
        case ModelKind::item_knn:
            return std::make_unique<ItemKnnModel>(snapshot, catalog, config.neighbors);
        case ModelKind::matrix_factorization:
            return std::make_unique<MatrixFactorizationModel>(snapshot, catalog, config,
                                                              warm_start);
    }
    throw UsageError("unknown recommender kind");
}

}  // namespace echoloop::rec
