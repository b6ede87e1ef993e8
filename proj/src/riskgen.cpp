#include "echoloop/riskgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "echoloop/rng.hpp"

namespace echoloop::riskgen {

bool is_fabricated_id(const std::string& id) {
    return id.rfind(kFabricatedPrefix, 0) == 0;
}

const char* to_string(Role role) {
    switch (role) {
        case Role::augmenter: return "augmenter";
        case Role::representer: return "representer";
        case Role::decision: return "decision";
    }
    return "?";
}

void GeneratorConfig::validate() const {
    if (!(popularity_temperature >= 0.0))
        throw UsageError("popularity_temperature must be >= 0");
    if (fef_probability < 0.0 || fef_probability > 1.0)
        throw UsageError("fef_probability must lie in [0,1], got " +
                         std::to_string(fef_probability));
    if (lc_flip_probability < 0.0 || lc_flip_probability > 1.0)
        throw UsageError("lc_flip_probability must lie in [0,1], got " +
                         std::to_string(lc_flip_probability));
    for (const auto& [attribute, weights] : attribute_skew) {
        bool any_positive = false;
        for (const auto& [value, weight] : weights) {
            if (weight < 0.0)
                throw UsageError("attribute_skew[" + attribute + "][" + value +
                                 "] must be >= 0");
            if (weight > 0.0) any_positive = true;
        }
        if (!any_positive)
            throw UsageError("attribute_skew[" + attribute + "] needs a positive weight");
    }
}

namespace {

// Stream for one (role, subject, invocation) triple.
Rng subject_rng(const GeneratorConfig& config, Role role, const std::string& subject,
                std::uint64_t invocation) {
    const std::uint64_t key =
        Rng::hash_string(std::string(to_string(role)) + "/" + subject);
    return Rng(Rng::mix(Rng::mix(config.seed, key), invocation));
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string fabricate(const std::string& scope, Rng& rng) {
    return std::string(kFabricatedPrefix) + scope + "::" + std::to_string(rng.uniform_int(1000000));
}

// Categorical draw over (value, weight) rows; total must be positive.
std::size_t draw_categorical(const std::vector<double>& weights, double total, Rng& rng) {
    const double x = rng.next_double() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        acc += weights[i];
        if (x < acc) return i;
    }
    for (std::size_t i = weights.size(); i > 0; --i)
        if (weights[i - 1] > 0.0) return i - 1;
    return 0;
}

// Popularity-tempered sampling without replacement in log-weight space,
// so that large beta cannot overflow. Returns indices into `pool`.
std::vector<std::size_t> tempered_sample(const std::vector<double>& log_weights,
                                         std::size_t take, Rng& rng) {
    std::vector<std::size_t> remaining(log_weights.size());
    for (std::size_t i = 0; i < remaining.size(); ++i) remaining[i] = i;
    std::vector<std::size_t> picked;
    picked.reserve(take);

    std::vector<double> w(remaining.size());
    while (picked.size() < take && !remaining.empty()) {
        double max_log = -std::numeric_limits<double>::infinity();
        for (std::size_t idx : remaining) max_log = std::max(max_log, log_weights[idx]);
        double total = 0.0;
        w.resize(remaining.size());
        for (std::size_t i = 0; i < remaining.size(); ++i) {
            w[i] = std::exp(log_weights[remaining[i]] - max_log);
            total += w[i];
        }
        const std::size_t slot = draw_categorical(w, total, rng);
        picked.push_back(remaining[slot]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(slot));
    }
    return picked;
}

std::set<std::string> attribute_value_set(const AttributeTable& attrs, const std::string& id) {
    std::set<std::string> values;
    const auto it = attrs.records.find(id);
    if (it == attrs.records.end()) return values;
    for (const auto& [attribute, vals] : it->second)
        for (const auto& v : vals) values.insert(attribute + "=" + v);
    return values;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    for (const auto& x : a) inter += b.count(x);
    return static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
}

}  // namespace

std::uint64_t invocation_for_trial(const GeneratorConfig& config, Role role,
                                   const std::string& subject, int trial) {
    if (trial <= 1) return 0;
    Rng flip(Rng::mix(config.seed,
                      Rng::hash_string(std::string(to_string(role)) + "/" + subject +
                                       "/flip/" + std::to_string(trial))));
    return flip.bernoulli(config.lc_flip_probability) ? static_cast<std::uint64_t>(trial - 1)
                                                      : 0;
}

std::vector<AugmentedPick> augment_interactions(const GeneratorConfig& config,
                                                std::span<const Interaction> snapshot,
                                                const AttributeTable& item_attrs,
                                                const std::vector<ItemId>& cold_items,
                                                int pairs_per_user, Timestamp stamp,
                                                int trial) {
    config.validate();
    if (pairs_per_user < 1)
        throw UsageError("pairs_per_user must be >= 1, got " + std::to_string(pairs_per_user));
    if (cold_items.size() < 2)
        throw DataError("augmentation needs at least 2 cold items, got " +
                        std::to_string(cold_items.size()));

    std::map<ItemId, std::int64_t> popularity;
    std::map<UserId, std::set<std::string>> history_attrs;
    for (const auto& x : snapshot) {
        popularity[x.item_id] += 1;
        auto item_values = attribute_value_set(item_attrs, x.item_id);
        history_attrs[x.user_id].insert(item_values.begin(), item_values.end());
    }
    for (const auto& item : cold_items)
        if (popularity.count(item))
            throw DataError("cold item '" + item + "' has interactions in the snapshot");

    std::vector<ItemId> cold_sorted = cold_items;
    std::sort(cold_sorted.begin(), cold_sorted.end());

    const double beta = config.popularity_temperature;
    std::vector<AugmentedPick> picks;
    picks.reserve(history_attrs.size() * static_cast<std::size_t>(pairs_per_user));

    for (const auto& [user, history] : history_attrs) {
        const std::uint64_t invocation = invocation_for_trial(config, Role::augmenter, user, trial);
        Rng rng = subject_rng(config, Role::augmenter, user, invocation);
        for (int p = 0; p < pairs_per_user; ++p) {
            const std::size_t ai = rng.uniform_int(cold_sorted.size());
            std::size_t bi = rng.uniform_int(cold_sorted.size() - 1);
            if (bi >= ai) ++bi;
            const ItemId& a = cold_sorted[ai];
            const ItemId& b = cold_sorted[bi];

            const auto pref = [&](const ItemId& item) {
                const auto it = popularity.find(item);
                const double pop = it == popularity.end() ? 0.0 : static_cast<double>(it->second);
                return jaccard(history, attribute_value_set(item_attrs, item)) +
                       std::log1p(pop);
            };
            const double delta = pref(a) - pref(b);
            bool choose_a;
            if (std::isinf(beta)) {
                choose_a = delta != 0.0 ? delta > 0.0 : a < b;
            } else {
                choose_a = rng.bernoulli(sigmoid(beta * delta));
            }
            picks.push_back(AugmentedPick{Interaction{user, choose_a ? a : b, stamp}, a, b, p});
        }
    }
    return picks;
}

std::vector<Interaction> to_interactions(const std::vector<AugmentedPick>& picks) {
    std::vector<Interaction> out;
    out.reserve(picks.size());
    for (const auto& pick : picks) out.push_back(pick.interaction);
    return out;
}

Profile infer_profile(const GeneratorConfig& config, const UserId& user_id,
                      const std::vector<ItemId>& history, const AttributeTable& item_attrs,
                      const AttributeSchema& schema, int trial) {
    config.validate();
    if (schema.empty()) throw UsageError("infer_profile: empty attribute schema");
    for (const auto& [attribute, vocab] : schema)
        if (vocab.empty())
            throw UsageError("infer_profile: empty vocabulary for attribute '" + attribute + "'");

    // Empirical per-attribute evidence from the user's history items.
    std::map<std::string, std::map<std::string, std::int64_t>> evidence;
    for (const auto& item : history) {
        const auto it = item_attrs.records.find(item);
        if (it == item_attrs.records.end()) continue;
        for (const auto& [attribute, values] : it->second)
            if (schema.count(attribute))
                for (const auto& v : values) evidence[attribute][v] += 1;
    }

    const std::uint64_t invocation =
        invocation_for_trial(config, Role::representer, user_id, trial);
    Rng rng = subject_rng(config, Role::representer, user_id, invocation);

    Profile profile;
    profile.subject_id = user_id;
    profile.provenance = Provenance::generated;

    for (const auto& [attribute, vocab] : schema) {
        if (rng.bernoulli(config.fef_probability)) {
            profile.attributes[attribute] = {fabricate(attribute, rng)};
            profile.fabricated_flags[attribute] = true;
            continue;
        }
        const std::vector<std::string> values(vocab.begin(), vocab.end());

        // Skew prior restricted to the vocabulary; uniform when absent or
        // fully outside it.
        std::vector<double> skew(values.size(), 0.0);
        double skew_total = 0.0;
        const auto skew_it = config.attribute_skew.find(attribute);
        if (skew_it != config.attribute_skew.end()) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                const auto w = skew_it->second.find(values[i]);
                if (w != skew_it->second.end()) skew[i] = w->second;
                skew_total += skew[i];
            }
        }
        if (skew_total <= 0.0) {
            skew.assign(values.size(), 1.0);
            skew_total = static_cast<double>(values.size());
        }

        std::vector<double> hist(values.size(), 0.0);
        double hist_total = 0.0;
        const auto ev_it = evidence.find(attribute);
        if (ev_it != evidence.end()) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                const auto c = ev_it->second.find(values[i]);
                if (c != ev_it->second.end()) hist[i] = static_cast<double>(c->second);
                hist_total += hist[i];
            }
        }

        std::vector<double> weights(values.size());
        double total = 0.0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            weights[i] = hist_total > 0.0
                             ? 0.5 * skew[i] / skew_total + 0.5 * hist[i] / hist_total
                             : skew[i] / skew_total;
            total += weights[i];
        }
        const std::size_t pick = draw_categorical(weights, total, rng);
        profile.attributes[attribute] = {values[pick]};
        profile.fabricated_flags[attribute] = false;
    }
    return profile;
}

RankedList rerank_or_generate(const GeneratorConfig& config, const UserId& user_id,
                              const std::optional<RankedList>& candidates, int k,
                              const std::vector<ItemId>& catalog,
                              const std::map<ItemId, std::int64_t>& popularity,
                              int trial) {
    config.validate();
    if (k < 1) throw UsageError("rerank_or_generate: k must be >= 1, got " + std::to_string(k));

    const auto pop_of = [&](const ItemId& item) {
        const auto it = popularity.find(item);
        return it == popularity.end() ? 0.0 : static_cast<double>(it->second);
    };
    const double beta = config.popularity_temperature;

    const std::uint64_t invocation = invocation_for_trial(config, Role::decision, user_id, trial);
    Rng rng = subject_rng(config, Role::decision, user_id, invocation);

    if (candidates.has_value()) {
        if (static_cast<std::size_t>(k) > candidates->size())
            throw UsageError("rerank_or_generate: k exceeds the candidate pool");
        const RankedList& pool = *candidates;

        std::vector<std::size_t> order;
        if (std::isinf(beta)) {
            order.resize(pool.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double pa = pop_of(pool[a].item_id);
                const double pb = pop_of(pool[b].item_id);
                if (pa != pb) return pa > pb;
                return pool[a].item_id < pool[b].item_id;
            });
            order.resize(static_cast<std::size_t>(k));
        } else {
            std::vector<double> log_w(pool.size());
            for (std::size_t i = 0; i < pool.size(); ++i)
                log_w[i] = beta * std::log1p(pop_of(pool[i].item_id));
            order = tempered_sample(log_w, static_cast<std::size_t>(k), rng);
        }
        RankedList out;
        out.reserve(order.size());
        for (std::size_t idx : order) out.push_back(pool[idx]);
        return out;
    }

    // Open mode.
    if (catalog.empty()) throw DataError("rerank_or_generate: empty catalog in open mode");
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), catalog.size());

    std::vector<std::size_t> picked;
    if (std::isinf(beta)) {
        picked.resize(catalog.size());
        for (std::size_t i = 0; i < picked.size(); ++i) picked[i] = i;
        std::sort(picked.begin(), picked.end(), [&](std::size_t a, std::size_t b) {
            const double pa = pop_of(catalog[a]);
            const double pb = pop_of(catalog[b]);
            if (pa != pb) return pa > pb;
            return catalog[a] < catalog[b];
        });
        picked.resize(take);
    } else {
        std::vector<double> log_w(catalog.size());
        for (std::size_t i = 0; i < catalog.size(); ++i)
            log_w[i] = beta * std::log1p(pop_of(catalog[i]));
        picked = tempered_sample(log_w, take, rng);
    }

    RankedList out;
    out.reserve(take);
    for (std::size_t idx : picked) out.push_back(RankedEntry{catalog[idx], false});
    for (auto& entry : out) {
        if (rng.bernoulli(config.fef_probability)) {
            entry.item_id = fabricate("item", rng);
            entry.fabricated = true;
        }
    }
    return out;
}

}  // namespace echoloop::riskgen
