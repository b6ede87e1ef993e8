#ifndef ECHOLOOP_CONFIG_HPP
#define ECHOLOOP_CONFIG_HPP

#include <map>
#include <string>

#include "echoloop/loop.hpp"
#include "echoloop/report.hpp"
#include "echoloop/timeline.hpp"

namespace echoloop::config {

// Minimal TOML-style document: [section.path] headers, `key = value` pairs,
// `#` comments. Values: quoted strings, numbers (inf allowed), booleans, or
// bare words. Keys flatten to "section.path.key".
class Document {
public:
    static Document parse_file(const std::string& path);
    static Document parse_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get_string(const std::string& key) const;
    std::string get_string_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // All keys under `prefix.` with the prefix stripped.
    std::map<std::string, std::string> section(const std::string& prefix) const;

private:
    std::map<std::string, std::string> values_;
    std::string origin_;
};

struct RunConfig {
    std::string interactions_path;
    std::string user_attributes_path;  // optional
    std::string item_attributes_path;  // optional
    timeline::SplitConfig split;
    loop::PipelineConfig pipeline;
    report::DiagnosticsConfig diagnostics;
    std::string output_directory;
    std::uint64_t seed = 42;
};

// Parses and validates a run configuration; errors name the offending key.
RunConfig parse_run_config(const std::string& path);

}  // namespace echoloop::config

#endif  // ECHOLOOP_CONFIG_HPP
