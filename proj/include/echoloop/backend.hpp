#ifndef ECHOLOOP_BACKEND_HPP
#define ECHOLOOP_BACKEND_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "echoloop/core.hpp"
#include "echoloop/riskgen.hpp"

namespace echoloop::backend {

// Extension point for plugging a real LLM behind the generator roles. The
// toolkit ships no network client; adapters implement complete() and the
// recording/replay cache keeps experiments hermetic and reproducible.
class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const std::string& prompt, std::uint64_t seed) = 0;
};

// Parse-failure channel: parsers return either a value or an error message.
template <typename T>
struct ParseResult {
    std::optional<T> value;
    std::string error;

    bool ok() const { return value.has_value(); }

    static ParseResult success(T v) { return ParseResult{std::move(v), ""}; }
    static ParseResult failure(std::string message) {
        return ParseResult{std::nullopt, std::move(message)};
    }
};

// Canonical request texts; adapters may decorate them, but the replay cache
// hashes exactly these strings.
std::string build_profile_prompt(const std::string& subject,
                                 const std::vector<ItemId>& history,
                                 const riskgen::AttributeSchema& schema);
std::string build_item_choice_prompt(const std::string& subject, const ItemId& option_a,
                                     const ItemId& option_b);
std::string build_ranked_list_prompt(const std::string& subject, int k,
                                     const std::vector<ItemId>& candidates);

// Response format: one `attribute: value` line per value. Attribute names
// absent from the requested schema are a parse failure; values outside the
// vocabulary are accepted and flagged fabricated.
ParseResult<riskgen::Profile> parse_profile_response(const std::string& subject,
                                                     const riskgen::AttributeSchema& schema,
                                                     const std::string& text);

// Response: the chosen item id on a single line; must be one of the two
// offered options.
ParseResult<ItemId> parse_item_choice_response(const ItemId& option_a, const ItemId& option_b,
                                               const std::string& text);

// Response: one item id per line; duplicates are a parse failure. Entries are
// not checked against any catalog (out-of-catalog ids are the FEF channel).
ParseResult<RankedList> parse_ranked_list_response(const std::string& text,
                                                   std::size_t max_entries = 0);

// Append-only response cache, serialized as JSON lines keyed by request hash.
class ReplayCache {
public:
    static std::uint64_t request_hash(const std::string& prompt, std::uint64_t seed);

    void load(const std::string& path);        // missing file -> empty cache
    void save(const std::string& path) const;  // deterministic key order

    std::optional<std::string> lookup(std::uint64_t key) const;
    void record(std::uint64_t key, const std::string& response);
    std::size_t size() const { return entries_.size(); }

private:
    std::map<std::uint64_t, std::string> entries_;
};

// Serves responses from a cache, optionally delegating misses to an inner
// backend and recording its answers.
class ReplayBackend : public LlmBackend {
public:
    explicit ReplayBackend(std::shared_ptr<ReplayCache> cache,
                           std::shared_ptr<LlmBackend> inner = nullptr)
        : cache_(std::move(cache)), inner_(std::move(inner)) {}

    std::string complete(const std::string& prompt, std::uint64_t seed) override;

private:
    std::shared_ptr<ReplayCache> cache_;
    std::shared_ptr<LlmBackend> inner_;
};

}  // namespace echoloop::backend

#endif  // ECHOLOOP_BACKEND_HPP
