#include "echoloop/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "echoloop/rng.hpp"

namespace echoloop::config {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return s.substr(b, e - b);
}

// Strips a trailing comment that starts outside quotes.
std::string strip_comment(const std::string& s) {
    bool in_quotes = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '"') in_quotes = !in_quotes;
        if (s[i] == '#' && !in_quotes) return s.substr(0, i);
    }
    return s;
}

}  // namespace

Document Document::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file '" + path + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_string(buffer.str(), path);
}

Document Document::parse_string(const std::string& text, const std::string& origin) {
    Document doc;
    doc.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::string section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string stripped = trim(strip_comment(line));
        if (stripped.empty()) continue;
        if (stripped.front() == '[') {
            if (stripped.back() != ']')
                throw ParseError(line_no, origin + ": unterminated section header");
            section = trim(stripped.substr(1, stripped.size() - 2));
            if (section.empty()) throw ParseError(line_no, origin + ": empty section name");
            continue;
        }
        const auto eq = stripped.find('=');
        if (eq == std::string::npos)
            throw ParseError(line_no, origin + ": expected 'key = value', got '" + stripped + "'");
        const std::string key = trim(stripped.substr(0, eq));
        std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ParseError(line_no, origin + ": empty key");
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        const std::string full_key = section.empty() ? key : section + "." + key;
        if (doc.values_.count(full_key))
            throw ParseError(line_no, origin + ": duplicate key '" + full_key + "'");
        doc.values_[full_key] = value;
    }
    return doc;
}

std::string Document::get_string(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end())
        throw UsageError(origin_ + ": missing required key '" + key + "'");
    return it->second;
}

std::string Document::get_string_or(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double Document::get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& text = it->second;
    if (text == "inf" || text == "+inf") return std::numeric_limits<double>::infinity();
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw UsageError(origin_ + ": key '" + key + "' is not a number: '" + text + "'");
    return value;
}

std::int64_t Document::get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::int64_t value = 0;
    const std::string& text = it->second;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw UsageError(origin_ + ": key '" + key + "' is not an integer: '" + text + "'");
    return value;
}

std::uint64_t Document::get_uint(const std::string& key, std::uint64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::uint64_t value = 0;
    const std::string& text = it->second;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw UsageError(origin_ + ": key '" + key + "' is not an unsigned integer: '" + text +
                         "'");
    return value;
}

bool Document::get_bool(const std::string& key, bool fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw UsageError(origin_ + ": key '" + key + "' is not a boolean: '" + it->second + "'");
}

std::map<std::string, std::string> Document::section(const std::string& prefix) const {
    std::map<std::string, std::string> out;
    const std::string full = prefix + ".";
    for (const auto& [key, value] : values_)
        if (key.rfind(full, 0) == 0) out[key.substr(full.size())] = value;
    return out;
}

namespace {

riskgen::GeneratorConfig parse_generator(const Document& doc, const std::string& role,
                                         std::uint64_t global_seed) {
    const std::string base = "generator." + role;
    riskgen::GeneratorConfig g;
    g.popularity_temperature = doc.get_double(base + ".popularity_temperature", 0.0);
    g.fef_probability = doc.get_double(base + ".fef_probability", 0.0);
    g.lc_flip_probability = doc.get_double(base + ".lc_flip_probability", 0.0);
    g.seed = doc.get_uint(base + ".seed", Rng::mix(global_seed, Rng::hash_string(role)));

    // [generator.<role>.skew.<attribute>] sections: value = weight.
    for (const auto& [key, value] : doc.section(base + ".skew")) {
        const auto dot = key.find('.');
        if (dot == std::string::npos)
            throw UsageError("skew key '" + base + ".skew." + key +
                             "' must be <attribute>.<value>... use a "
                             "[generator." + role + ".skew.<attribute>] section");
        const std::string attribute = key.substr(0, dot);
        const std::string attr_value = key.substr(dot + 1);
        double weight = 0.0;
        const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), weight);
        if (ec != std::errc{} || ptr != value.data() + value.size())
            throw UsageError("skew weight for '" + attribute + "." + attr_value +
                             "' is not a number: '" + value + "'");
        g.attribute_skew[attribute][attr_value] = weight;
    }
    g.validate();
    return g;
}

bool has_section(const Document& doc, const std::string& prefix) {
    return !doc.section(prefix).empty();
}

}  // namespace

RunConfig parse_run_config(const std::string& path) {
    const Document doc = Document::parse_file(path);
    RunConfig run;

    run.interactions_path = doc.get_string("input.interactions");
    run.user_attributes_path = doc.get_string_or("input.user_attributes", "");
    run.item_attributes_path = doc.get_string_or("input.item_attributes", "");

    run.split.cutoff_fraction = doc.get_double("split.cutoff_fraction", 0.8);
    run.split.num_periods = static_cast<int>(doc.get_int("split.num_periods", 5));
    const std::string mode = doc.get_string_or("split.mode", "timeline");
    if (mode == "timeline")
        run.split.mode = timeline::SplitMode::timeline_fraction;
    else if (mode == "count")
        run.split.mode = timeline::SplitMode::interaction_count;
    else
        throw UsageError("split.mode must be 'timeline' or 'count', got '" + mode + "'");
    run.split.validate();

    run.seed = doc.get_uint("pipeline.seed", 42);
    run.pipeline.seed = run.seed;

    auto& rc = run.pipeline.recommender;
    rc.kind = rec::model_kind_from_string(doc.get_string_or("recommender.kind", "most_popular"));
    rc.embedding_dim = static_cast<int>(doc.get_int("recommender.embedding_dim", 16));
    rc.learning_rate = doc.get_double("recommender.learning_rate", 0.05);
    rc.epochs = static_cast<int>(doc.get_int("recommender.epochs", 10));
    rc.negatives_per_positive =
        static_cast<int>(doc.get_int("recommender.negatives_per_positive", 4));
    rc.neighbors = static_cast<int>(doc.get_int("recommender.neighbors", 20));
    rc.seed = doc.get_uint("recommender.seed", Rng::mix(run.seed, Rng::hash_string("recommender")));

    run.pipeline.decision_mode =
        loop::decision_mode_from_string(doc.get_string_or("pipeline.decision_mode",
                                                          "backbone_only"));
    run.pipeline.augment_each_period = doc.get_bool("pipeline.augment_each_period", true);
    run.pipeline.exclude_seen = doc.get_bool("pipeline.exclude_seen", true);
    run.pipeline.warm_start = doc.get_bool("pipeline.warm_start", false);
    run.pipeline.fixed_training_budget =
        doc.get_bool("pipeline.fixed_training_budget", false);
    run.pipeline.pretrain_epochs =
        static_cast<int>(doc.get_int("pipeline.pretrain_epochs", 0));
    run.pipeline.pairs_per_user = static_cast<int>(doc.get_int("pipeline.pairs_per_user", 1));
    run.pipeline.candidate_pool = static_cast<int>(doc.get_int("pipeline.candidate_pool", 0));

    if (has_section(doc, "generator.augmenter"))
        run.pipeline.augmenter = parse_generator(doc, "augmenter", run.seed);
    if (has_section(doc, "generator.representer"))
        run.pipeline.representer = parse_generator(doc, "representer", run.seed);
    if (has_section(doc, "generator.decision"))
        run.pipeline.decision = parse_generator(doc, "decision", run.seed);

    const std::string phases = doc.get_string_or("diagnostics.phases", "1,2,3");
    run.diagnostics.phase1 = phases.find('1') != std::string::npos;
    run.diagnostics.phase2 = phases.find('2') != std::string::npos;
    run.diagnostics.phase3 = phases.find('3') != std::string::npos;
    const std::string pop_mode = doc.get_string_or("diagnostics.popularity_index", "accumulated");
    if (pop_mode == "accumulated")
        run.diagnostics.pop_index_mode = report::DiagnosticsConfig::PopIndexMode::accumulated;
    else if (pop_mode == "d0")
        run.diagnostics.pop_index_mode = report::DiagnosticsConfig::PopIndexMode::d0;
    else
        throw UsageError("diagnostics.popularity_index must be 'accumulated' or 'd0', got '" +
                         pop_mode + "'");

    run.output_directory = doc.get_string("output.directory");
    run.pipeline.validate();
    return run;
}

}  // namespace echoloop::config
