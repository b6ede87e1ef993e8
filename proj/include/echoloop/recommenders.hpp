#ifndef ECHOLOOP_RECOMMENDERS_HPP
#define ECHOLOOP_RECOMMENDERS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "echoloop/core.hpp"

namespace echoloop::rec {

enum class ModelKind { most_popular, item_knn, matrix_factorization };

ModelKind model_kind_from_string(const std::string& name);
const char* to_string(ModelKind kind);

struct RecommenderConfig {
    ModelKind kind = ModelKind::most_popular;
    int embedding_dim = 16;          // matrix_factorization only
    double learning_rate = 0.05;
    int epochs = 10;
    int negatives_per_positive = 4;
    int neighbors = 20;              // item_knn only
    std::uint64_t seed = 0;

    void validate() const;
};

struct EmbeddingMatrix {
    std::vector<std::string> subject_ids;       // sorted, unique
    std::size_t dim = 0;
    std::vector<std::vector<double>> vectors;   // aligned with subject_ids
};

// Immutable trained backbone. Scoring is pure; recommend() is derived from
// score() so every model obeys the same ordering contract: descending score,
// ties broken by ascending item id. Unknown users fall back to popularity.
class TrainedModel {
public:
    virtual ~TrainedModel() = default;

    virtual double score(const UserId& user, const ItemId& item) const = 0;

    // Exactly min(k, #eligible) items from catalog \ exclusions.
    RankedList recommend(const UserId& user, int k, const std::set<ItemId>& exclusions) const;

    // Present for matrix factorization, absent otherwise.
    virtual std::optional<std::pair<EmbeddingMatrix, EmbeddingMatrix>> embeddings() const {
        return std::nullopt;
    }

    const std::vector<ItemId>& catalog() const { return catalog_; }
    std::int64_t popularity(const ItemId& item) const;
    bool knows_user(const UserId& user) const { return user_index_.count(user) > 0; }

protected:
    TrainedModel(std::span<const Interaction> snapshot, const std::set<ItemId>& catalog);

    std::optional<std::size_t> item_index(const ItemId& item) const;
    std::optional<std::size_t> user_index(const UserId& user) const;

    std::vector<ItemId> catalog_;            // sorted
    std::vector<UserId> users_;              // sorted, from snapshot
    std::vector<std::int64_t> item_counts_;  // interaction counts per catalog item
    std::unordered_map<ItemId, std::size_t> item_index_;
    std::unordered_map<UserId, std::size_t> user_index_;
    std::vector<std::vector<std::size_t>> user_items_;  // per user, sorted unique item indices
};

// Trains the configured backbone on a snapshot. The catalog may contain items
// without interactions; matrix factorization embeds the full catalog so that
// embedding snapshots stay aligned across retrains. When `warm_start` is
// given (matrix factorization only), subjects present in it keep their
// previous vectors as the starting point instead of a random init.
std::unique_ptr<TrainedModel> train(const RecommenderConfig& config,
                                    std::span<const Interaction> snapshot,
                                    const std::set<ItemId>& catalog,
                                    const std::pair<EmbeddingMatrix, EmbeddingMatrix>*
                                        warm_start = nullptr);

}  // namespace echoloop::rec

#endif  // ECHOLOOP_RECOMMENDERS_HPP
