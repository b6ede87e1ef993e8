#include "echoloop/backend.hpp"

#include <fstream>
#include <sstream>

#include "echoloop/rng.hpp"

#include "json.hpp"

namespace echoloop::backend {

namespace {

std::string trim(const std::string& s) {
    const auto is_space = [](char c) {
        return c == ' ' || c == '\t' || c == '\r' || c == '\n';
    };
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

}  // namespace

std::string build_profile_prompt(const std::string& subject, const std::vector<ItemId>& history,
                                 const riskgen::AttributeSchema& schema) {
    std::ostringstream out;
    out << "profile-request v1\nsubject: " << subject << "\nattributes:";
    for (const auto& [attribute, vocab] : schema) {
        out << "\n  " << attribute << ":";
        for (const auto& v : vocab) out << " " << v;
    }
    out << "\nhistory:";
    for (const auto& item : history) out << " " << item;
    out << "\n";
    return out.str();
}

std::string build_item_choice_prompt(const std::string& subject, const ItemId& option_a,
                                     const ItemId& option_b) {
    return "item-choice-request v1\nsubject: " + subject + "\noptions: " + option_a + " " +
           option_b + "\n";
}

std::string build_ranked_list_prompt(const std::string& subject, int k,
                                     const std::vector<ItemId>& candidates) {
    std::ostringstream out;
    out << "ranked-list-request v1\nsubject: " << subject << "\nk: " << k << "\ncandidates:";
    for (const auto& item : candidates) out << " " << item;
    out << "\n";
    return out.str();
}

ParseResult<riskgen::Profile> parse_profile_response(const std::string& subject,
                                                     const riskgen::AttributeSchema& schema,
                                                     const std::string& text) {
    riskgen::Profile profile;
    profile.subject_id = subject;
    profile.provenance = riskgen::Provenance::generated;

    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(line);
        if (stripped.empty()) continue;
        const auto colon = stripped.find(':');
        if (colon == std::string::npos)
            return ParseResult<riskgen::Profile>::failure(
                "line " + std::to_string(line_no) + ": expected 'attribute: value'");
        const std::string attribute = trim(stripped.substr(0, colon));
        const std::string value = trim(stripped.substr(colon + 1));
        const auto it = schema.find(attribute);
        if (it == schema.end())
            return ParseResult<riskgen::Profile>::failure(
                "line " + std::to_string(line_no) + ": attribute '" + attribute +
                "' not in the request");
        if (value.empty())
            return ParseResult<riskgen::Profile>::failure(
                "line " + std::to_string(line_no) + ": empty value");
        profile.attributes[attribute].push_back(value);
        const bool outside = it->second.count(value) == 0;
        auto [flag_it, inserted] = profile.fabricated_flags.emplace(attribute, outside);
        if (!inserted) flag_it->second = flag_it->second || outside;
    }
    if (profile.attributes.empty())
        return ParseResult<riskgen::Profile>::failure("empty response");
    return ParseResult<riskgen::Profile>::success(std::move(profile));
}

ParseResult<ItemId> parse_item_choice_response(const ItemId& option_a, const ItemId& option_b,
                                               const std::string& text) {
    const std::string choice = trim(text);
    if (choice.empty()) return ParseResult<ItemId>::failure("empty response");
    if (choice != option_a && choice != option_b)
        return ParseResult<ItemId>::failure("choice '" + choice +
                                            "' is not one of the offered options");
    return ParseResult<ItemId>::success(choice);
}

ParseResult<RankedList> parse_ranked_list_response(const std::string& text,
                                                   std::size_t max_entries) {
    RankedList list;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string id = trim(line);
        if (id.empty()) continue;
        for (const auto& entry : list)
            if (entry.item_id == id)
                return ParseResult<RankedList>::failure(
                    "line " + std::to_string(line_no) + ": duplicate item '" + id + "'");
        list.push_back(RankedEntry{id, riskgen::is_fabricated_id(id)});
        if (max_entries > 0 && list.size() > max_entries)
            return ParseResult<RankedList>::failure("response exceeds " +
                                                    std::to_string(max_entries) + " entries");
    }
    if (list.empty()) return ParseResult<RankedList>::failure("empty response");
    return ParseResult<RankedList>::success(std::move(list));
}

std::uint64_t ReplayCache::request_hash(const std::string& prompt, std::uint64_t seed) {
    return Rng::mix(Rng::hash_string(prompt), seed);
}

void ReplayCache::load(const std::string& path) {
    entries_.clear();
    std::ifstream in(path);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("replay cache: ") + e.what());
        }
        entries_[j.at("key").get<std::uint64_t>()] = j.at("response").get<std::string>();
    }
}

void ReplayCache::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw UsageError("cannot write replay cache '" + path + "'");
    for (const auto& [key, response] : entries_) {
        nlohmann::json j;
        j["key"] = key;
        j["response"] = response;
        out << j.dump() << "\n";
    }
}

std::optional<std::string> ReplayCache::lookup(std::uint64_t key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ReplayCache::record(std::uint64_t key, const std::string& response) {
    entries_[key] = response;
}

std::string ReplayBackend::complete(const std::string& prompt, std::uint64_t seed) {
    const std::uint64_t key = ReplayCache::request_hash(prompt, seed);
    if (auto hit = cache_->lookup(key)) return *hit;
    if (!inner_) throw DataError("replay cache miss and no inner backend configured");
    std::string response = inner_->complete(prompt, seed);
    cache_->record(key, response);
    return response;
}

}  // namespace echoloop::backend
