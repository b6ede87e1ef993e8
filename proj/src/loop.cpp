#include "echoloop/loop.hpp"

#include <algorithm>

#include "echoloop/rng.hpp"

namespace echoloop::loop {

DecisionMode decision_mode_from_string(const std::string& name) {
    if (name == "backbone_only") return DecisionMode::backbone_only;
    if (name == "rerank") return DecisionMode::rerank;
    if (name == "open_generation") return DecisionMode::open_generation;
    throw UsageError("unknown decision_mode '" + name + "'");
}

const char* to_string(DecisionMode mode) {
    switch (mode) {
        case DecisionMode::backbone_only: return "backbone_only";
        case DecisionMode::rerank: return "rerank";
        case DecisionMode::open_generation: return "open_generation";
    }
    return "?";
}

void PipelineConfig::validate() const {
    recommender.validate();
    if (decision_mode != DecisionMode::backbone_only && !decision.has_value())
        throw UsageError(std::string("decision_mode=") + to_string(decision_mode) +
                         " requires a decision generator config");
    if (augmenter) augmenter->validate();
    if (representer) representer->validate();
    if (decision) decision->validate();
    if (pairs_per_user < 1)
        throw UsageError("pairs_per_user must be >= 1, got " + std::to_string(pairs_per_user));
    if (candidate_pool < 0)
        throw UsageError("candidate_pool must be >= 0, got " + std::to_string(candidate_pool));
}

std::vector<Interaction> inject(std::vector<Interaction> d_prev,
                                const std::map<UserId, RankedList>& ranked_lists,
                                Timestamp tau, Timestamp previous_tau) {
    if (tau <= previous_tau)
        throw LoopError("inject: tau " + std::to_string(tau) +
                        " does not advance past the previous injection at " +
                        std::to_string(previous_tau));
    const std::size_t old_size = d_prev.size();
    for (const auto& [user, list] : ranked_lists) {
        for (const auto& entry : list) {
            if (entry.fabricated)
                throw UsageError("inject: flagged entry '" + entry.item_id +
                                 "' must be filtered before injection");
            d_prev.push_back(Interaction{user, entry.item_id, tau});
        }
    }
    // All appended rows share tau, so sorting the new region keeps the whole
    // log canonical.
    std::sort(d_prev.begin() + static_cast<std::ptrdiff_t>(old_size), d_prev.end(),
              canonical_less);
    return d_prev;
}

riskgen::AttributeSchema build_profile_schema(const Dataset& dataset) {
    riskgen::AttributeSchema schema;
    for (const auto& [attribute, vocab] : dataset.user_attributes.vocab)
        schema[attribute].insert(vocab.begin(), vocab.end());
    for (const auto& [attribute, vocab] : dataset.item_attributes.vocab)
        schema[attribute].insert(vocab.begin(), vocab.end());
    return schema;
}

namespace {

riskgen::GeneratorConfig per_period(const riskgen::GeneratorConfig& base, int period) {
    riskgen::GeneratorConfig derived = base;
    derived.seed = Rng::mix(base.seed, static_cast<std::uint64_t>(period));
    return derived;
}

LoopTrace run_loop_impl(const Dataset& dataset, const timeline::SplitConfig& split_config,
                        const PipelineConfig& config) {
    const auto split = timeline::temporal_split(dataset, split_config.cutoff_fraction,
                                                split_config.mode);
    const auto schedule =
        timeline::build_period_schedule(split, split_config.num_periods);
    const auto common = timeline::common_users(split);
    if (common.empty()) throw LoopError("run_feedback_loop: no common users");

    LoopTrace trace;
    trace.initial_size = split.d0().size();
    trace.cutoff_time = split.cutoff_time;
    trace.catalog.assign(dataset.items.begin(), dataset.items.end());
    trace.schedule = schedule;
    trace.user_attributes = dataset.user_attributes;
    trace.item_attributes = dataset.item_attributes;
    trace.config = config;
    trace.split_config = split_config;

    for (const auto& x : split.d0()) trace.popularity_d0[x.item_id] += 1;

    // Ground-truth items per period for common users: the loop consumes only
    // their timing/quota structure, never the interactions themselves.
    trace.gt_items.resize(schedule.periods.size());
    {
        std::size_t period_idx = 0;
        for (const auto& x : split.dgt()) {
            while (x.timestamp > schedule.periods[period_idx].end_inclusive) ++period_idx;
            if (common.count(x.user_id))
                trace.gt_items[period_idx][x.user_id].push_back(x.item_id);
        }
    }

    const auto schema = build_profile_schema(dataset);

    std::vector<Interaction> accumulated(split.d0().begin(), split.d0().end());
    std::map<ItemId, std::int64_t> counts = trace.popularity_d0;
    Timestamp previous_tau = -1;
    std::optional<std::pair<rec::EmbeddingMatrix, rec::EmbeddingMatrix>> previous_embeddings;

    if (config.warm_start && config.pretrain_epochs > 0) {
        rec::RecommenderConfig pre_cfg = config.recommender;
        pre_cfg.seed = Rng::mix(Rng::mix(config.seed, pre_cfg.seed), 0xFEEDull);
        pre_cfg.epochs = config.pretrain_epochs;
        const auto base = rec::train(pre_cfg, accumulated, dataset.items);
        previous_embeddings = base->embeddings();
    }

    for (const auto& period : schedule.periods) {
        PeriodTrace pt;
        pt.index = period.index;
        pt.tau = period.tau;

        // (a) Content generation on D^(n-1).
        std::vector<Interaction> training = accumulated;
        if (config.augmenter && (period.index == 1 || config.augment_each_period)) {
            std::vector<ItemId> cold;
            for (const auto& item : trace.catalog)
                if (counts.find(item) == counts.end() || counts.at(item) == 0)
                    cold.push_back(item);
            if (cold.size() < 2) {
                pt.warnings.push_back("augmentation skipped: fewer than 2 cold items");
            } else {
                const auto aug_cfg = per_period(*config.augmenter, period.index);
                pt.augmented[0] = riskgen::augment_interactions(
                    aug_cfg, accumulated, dataset.item_attributes, cold, config.pairs_per_user,
                    period.tau, 1);
                pt.augmented[1] = riskgen::augment_interactions(
                    aug_cfg, accumulated, dataset.item_attributes, cold, config.pairs_per_user,
                    period.tau, 2);
                const auto synthetic = riskgen::to_interactions(pt.augmented[0]);
                training.insert(training.end(), synthetic.begin(), synthetic.end());
            }
        }

        // (b) Retrain the backbone on the period's training snapshot.
        rec::RecommenderConfig rec_cfg = config.recommender;
        rec_cfg.seed = Rng::mix(Rng::mix(config.seed, rec_cfg.seed),
                                static_cast<std::uint64_t>(period.index));
        if (config.fixed_training_budget && !training.empty()) {
            const double scaled = static_cast<double>(rec_cfg.epochs) *
                                  static_cast<double>(trace.initial_size) /
                                  static_cast<double>(training.size());
            rec_cfg.epochs = std::max(1, static_cast<int>(std::floor(scaled + 0.5)));
        }
        const auto model =
            rec::train(rec_cfg, training, dataset.items,
                       config.warm_start && previous_embeddings ? &*previous_embeddings
                                                                : nullptr);
        pt.embeddings = model->embeddings();
        if (config.warm_start) previous_embeddings = pt.embeddings;

        std::map<ItemId, std::int64_t> training_counts = counts;
        for (const auto& pick : pt.augmented[0]) training_counts[pick.interaction.item_id] += 1;

        // Representer profiles for the period's active users.
        std::optional<riskgen::GeneratorConfig> rep_cfg;
        if (config.representer) {
            if (schema.empty()) {
                if (period.index == 1)
                    pt.warnings.push_back("profiling skipped: empty attribute schema");
            } else {
                rep_cfg = per_period(*config.representer, period.index);
            }
        }
        std::optional<riskgen::GeneratorConfig> dec_cfg;
        if (config.decision) dec_cfg = per_period(*config.decision, period.index);

        // Distinct consumed items per user, for exclusions and history.
        std::map<UserId, std::vector<ItemId>> consumed;
        for (const auto& x : training) consumed[x.user_id].push_back(x.item_id);
        for (auto& [user, items] : consumed) {
            std::sort(items.begin(), items.end());
            items.erase(std::unique(items.begin(), items.end()), items.end());
        }

        // (c) Recommend for each active user.
        std::map<UserId, RankedList> injectable;
        for (const auto& [user, quota] : period.quotas) {
            std::set<ItemId> exclusions;
            if (config.exclude_seen) {
                const auto it = consumed.find(user);
                if (it != consumed.end()) exclusions.insert(it->second.begin(), it->second.end());
            }
            const auto eligible = static_cast<int>(trace.catalog.size() - exclusions.size());

            int k = quota;
            if (config.decision_mode == DecisionMode::open_generation) {
                k = std::min<int>(k, static_cast<int>(trace.catalog.size()));
            } else {
                k = std::min(k, eligible);
            }
            if (k < quota)
                pt.warnings.push_back("quota clamped for user '" + user + "': " +
                                      std::to_string(quota) + " -> " + std::to_string(k));
            if (k == 0) {
                pt.ranked[user] = {RankedList{}, RankedList{}};
                continue;
            }

            std::array<RankedList, 2> lists;
            switch (config.decision_mode) {
                case DecisionMode::backbone_only: {
                    lists[0] = model->recommend(user, k, exclusions);
                    lists[1] = lists[0];  // deterministic backbone: trial 2 replays
                    break;
                }
                case DecisionMode::rerank: {
                    int pool = config.candidate_pool > 0 ? config.candidate_pool : 2 * k;
                    pool = std::min(std::max(pool, k), eligible);
                    const auto candidates = model->recommend(user, pool, exclusions);
                    lists[0] = riskgen::rerank_or_generate(*dec_cfg, user, candidates, k,
                                                           trace.catalog, training_counts, 1);
                    lists[1] = riskgen::rerank_or_generate(*dec_cfg, user, candidates, k,
                                                           trace.catalog, training_counts, 2);
                    break;
                }
                case DecisionMode::open_generation: {
                    lists[0] = riskgen::rerank_or_generate(*dec_cfg, user, std::nullopt, k,
                                                           trace.catalog, training_counts, 1);
                    lists[1] = riskgen::rerank_or_generate(*dec_cfg, user, std::nullopt, k,
                                                           trace.catalog, training_counts, 2);
                    break;
                }
            }

            RankedList in_catalog;
            for (const auto& entry : lists[0])
                if (!entry.fabricated) in_catalog.push_back(entry);
            if (!in_catalog.empty()) injectable[user] = std::move(in_catalog);
            pt.ranked[user] = std::move(lists);

            if (rep_cfg) {
                static const std::vector<ItemId> kNoHistory;
                const auto it = consumed.find(user);
                const auto& history = it != consumed.end() ? it->second : kNoHistory;
                pt.profiles[user] = {
                    riskgen::infer_profile(*rep_cfg, user, history, dataset.item_attributes,
                                           schema, 1),
                    riskgen::infer_profile(*rep_cfg, user, history, dataset.item_attributes,
                                           schema, 2)};
            }
        }

        // (d) Inject in-catalog recommendations at the canonical timestamp.
        const std::size_t before = accumulated.size();
        accumulated = inject(std::move(accumulated), injectable, period.tau, previous_tau);
        previous_tau = period.tau;
        pt.injected.assign(accumulated.begin() + static_cast<std::ptrdiff_t>(before),
                           accumulated.end());
        for (const auto& x : pt.injected) counts[x.item_id] += 1;
        pt.dataset_size = accumulated.size();

        for (const auto& w : pt.warnings) log_debug("period " + std::to_string(pt.index) + ": " + w);
        trace.periods.push_back(std::move(pt));
    }
    return trace;
}

}  // namespace

LoopTrace run_feedback_loop(const Dataset& dataset, const timeline::SplitConfig& split_config,
                            const PipelineConfig& pipeline_config) {
    split_config.validate();
    pipeline_config.validate();
    return run_loop_impl(dataset, split_config, pipeline_config);
}

}  // namespace echoloop::loop
