#ifndef ECHOLOOP_LOOP_HPP
#define ECHOLOOP_LOOP_HPP

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "echoloop/core.hpp"
#include "echoloop/recommenders.hpp"
#include "echoloop/riskgen.hpp"
#include "echoloop/timeline.hpp"

namespace echoloop::loop {

enum class DecisionMode { backbone_only, rerank, open_generation };

DecisionMode decision_mode_from_string(const std::string& name);
const char* to_string(DecisionMode mode);

struct PipelineConfig {
    rec::RecommenderConfig recommender;
    std::optional<riskgen::GeneratorConfig> augmenter;
    std::optional<riskgen::GeneratorConfig> representer;
    std::optional<riskgen::GeneratorConfig> decision;
    DecisionMode decision_mode = DecisionMode::backbone_only;
    bool augment_each_period = true;
    bool exclude_seen = true;      // drop already-consumed items from candidates
    bool warm_start = false;       // seed each retrain from the previous embeddings
    // Keep the SGD step budget constant as the corpus grows: period n trains
    // for round(epochs * |D^(0)| / |snapshot|) epochs instead of a fixed
    // count. Only meaningful for matrix factorization.
    bool fixed_training_budget = false;
    // With warm_start: converge an initial model on D^(0) for this many
    // epochs before period 1, so the loop starts from a settled state.
    int pretrain_epochs = 0;
    int pairs_per_user = 1;        // augmenter cold pairs per user per period
    int candidate_pool = 0;        // rerank pool size; 0 = twice the quota
    std::uint64_t seed = 0;

    void validate() const;
};

// Everything recorded for one period of the loop.
struct PeriodTrace {
    int index = 0;
    Timestamp tau = 0;
    std::size_t dataset_size = 0;  // |D^(n)|
    std::vector<Interaction> injected;
    std::map<UserId, std::array<RankedList, 2>> ranked;  // trial 1 and 2
    std::map<UserId, std::array<riskgen::Profile, 2>> profiles;
    std::array<std::vector<riskgen::AugmentedPick>, 2> augmented;
    std::optional<std::pair<rec::EmbeddingMatrix, rec::EmbeddingMatrix>> embeddings;
    std::vector<std::string> warnings;
};

// Full history of a run plus the inputs diagnostics need, so that every
// metric is recomputable from a serialized trace alone.
struct LoopTrace {
    std::size_t initial_size = 0;  // |D^(0)|
    Timestamp cutoff_time = 0;
    std::vector<ItemId> catalog;   // sorted
    std::map<ItemId, std::int64_t> popularity_d0;
    timeline::PeriodSchedule schedule;
    std::vector<std::map<UserId, std::vector<ItemId>>> gt_items;  // per period
    AttributeTable user_attributes{SubjectKind::user};
    AttributeTable item_attributes{SubjectKind::item};
    PipelineConfig config;
    timeline::SplitConfig split_config;
    std::vector<PeriodTrace> periods;
    std::vector<std::string> warnings;
};

// Appends one interaction per recommended item at the canonical timestamp.
// Entries must be catalog members (flagged entries already filtered); tau
// must exceed the previous period's injection timestamp.
std::vector<Interaction> inject(std::vector<Interaction> d_prev,
                                const std::map<UserId, RankedList>& ranked_lists,
                                Timestamp tau, Timestamp previous_tau = -1);

// Runs the closed loop: per period, optionally augment/profile on the
// accumulated data, retrain the backbone, recommend quota-length lists for
// active users, and inject the in-catalog recommendations.
LoopTrace run_feedback_loop(const Dataset& dataset, const timeline::SplitConfig& split_config,
                            const PipelineConfig& pipeline_config);

// Profile schema used by the representer role: user attribute vocabularies
// plus item attribute vocabularies (preference attributes).
riskgen::AttributeSchema build_profile_schema(const Dataset& dataset);

}  // namespace echoloop::loop

#endif  // ECHOLOOP_LOOP_HPP
