#ifndef ECHOLOOP_RISKGEN_HPP
#define ECHOLOOP_RISKGEN_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "echoloop/core.hpp"

namespace echoloop::riskgen {

// Identifiers fabricated by a generator live in a reserved namespace so that
// hallucination accounting is exact and cannot collide with real ids.
inline constexpr const char* kFabricatedPrefix = "FAB::";

bool is_fabricated_id(const std::string& id);

// Knobs of the synthetic LLM roles. Each output is fully determined by
// (seed, subject, invocation_index); repeated trials re-sample only when the
// contradiction knob fires.
struct GeneratorConfig {
    double popularity_temperature = 0.0;  // beta >= 0; +inf = greedy toward popular
    double fef_probability = 0.0;         // chance an emitted value/item is fabricated
    double lc_flip_probability = 0.0;     // chance a repeated invocation re-samples
    std::map<std::string, std::map<std::string, double>> attribute_skew;
    std::uint64_t seed = 0;

    void validate() const;
};

enum class Provenance { generated, ground_truth };

struct Profile {
    std::string subject_id;
    std::map<std::string, std::vector<std::string>> attributes;
    Provenance provenance = Provenance::generated;
    std::map<std::string, bool> fabricated_flags;
};

// Attribute name -> vocabulary of admissible values.
using AttributeSchema = std::map<std::string, std::set<std::string>>;

// Roles, used to key deterministic sub-streams.
enum class Role { augmenter, representer, decision };
const char* to_string(Role role);

// Maps a trial index onto an invocation index: trial 1 always replays
// invocation 0; trial t >= 2 re-samples with a fresh invocation with
// probability lc_flip_probability, otherwise replays trial 1.
std::uint64_t invocation_for_trial(const GeneratorConfig& config, Role role,
                                   const std::string& subject, int trial);

// One synthetic cold-pair choice of the augmenter role.
struct AugmentedPick {
    Interaction interaction;  // (user, chosen item, stamp)
    ItemId option_a;
    ItemId option_b;
    int pair_index = 0;
};

// For every user in the snapshot, samples `pairs_per_user` cold-item pairs and
// picks one item per pair with probability sigma(beta * (pref(a) - pref(b))),
// where pref is the Jaccard overlap between the user's history attributes and
// the item's attributes plus a log(1 + popularity) prior. Chosen items become
// synthetic interactions stamped with `stamp`.
std::vector<AugmentedPick> augment_interactions(const GeneratorConfig& config,
                                                std::span<const Interaction> snapshot,
                                                const AttributeTable& item_attrs,
                                                const std::vector<ItemId>& cold_items,
                                                int pairs_per_user, Timestamp stamp,
                                                int trial = 1);

std::vector<Interaction> to_interactions(const std::vector<AugmentedPick>& picks);

// Emits one value per schema attribute. With probability fef_probability the
// value is fabricated (FAB:: namespace, flagged); otherwise it is sampled from
// attribute_skew blended 50/50 with the empirical distribution of the user's
// history for that attribute (pure skew when the history is silent).
Profile infer_profile(const GeneratorConfig& config, const UserId& user_id,
                      const std::vector<ItemId>& history, const AttributeTable& item_attrs,
                      const AttributeSchema& schema, int trial = 1);

// Candidate mode: reorders `candidates` by popularity-tempered sampling
// without replacement (exact greedy sort when beta is +inf). Open mode
// (candidates absent): samples k catalog items the same way, then replaces
// each slot with a fabricated identifier with probability fef_probability.
RankedList rerank_or_generate(const GeneratorConfig& config, const UserId& user_id,
                              const std::optional<RankedList>& candidates, int k,
                              const std::vector<ItemId>& catalog,
                              const std::map<ItemId, std::int64_t>& popularity,
                              int trial = 1);

}  // namespace echoloop::riskgen

#endif  // ECHOLOOP_RISKGEN_HPP
