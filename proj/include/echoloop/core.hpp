#ifndef ECHOLOOP_CORE_HPP
#define ECHOLOOP_CORE_HPP

#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace echoloop {

using UserId = std::string;
using ItemId = std::string;
using Timestamp = std::int64_t;

// One (user, item, timestamp) event from the interaction log.
struct Interaction {
    UserId user_id;
    ItemId item_id;
    Timestamp timestamp = 0;

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Canonical order: (timestamp, user_id, item_id).
inline bool canonical_less(const Interaction& a, const Interaction& b) {
    if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
    if (a.user_id != b.user_id) return a.user_id < b.user_id;
    return a.item_id < b.item_id;
}

enum class SubjectKind { user, item };

inline const char* to_string(SubjectKind k) {
    return k == SubjectKind::user ? "user" : "item";
}

// Attribute records for users or items. Multi-valued attributes keep
// their source order in `records`; `vocab` holds every observed value.
struct AttributeTable {
    SubjectKind subject_kind = SubjectKind::user;
    std::map<std::string, std::map<std::string, std::vector<std::string>>> records;
    std::map<std::string, std::set<std::string>> vocab;

    AttributeTable() = default;
    explicit AttributeTable(SubjectKind kind) : subject_kind(kind) {}

    bool empty() const { return records.empty(); }
};

// Canonical in-memory dataset: interactions sorted by (timestamp, user, item),
// id sets derived from the log, attribute tables restricted to seen subjects.
struct Dataset {
    std::vector<Interaction> interactions;
    std::set<UserId> users;
    std::set<ItemId> items;
    AttributeTable user_attributes{SubjectKind::user};
    AttributeTable item_attributes{SubjectKind::item};
    std::size_t dropped_user_attribute_records = 0;
    std::size_t dropped_item_attribute_records = 0;
};

// Entry of a ranked recommendation list. `fabricated` marks identifiers
// emitted outside the catalog; such entries are recorded but never injected.
struct RankedEntry {
    ItemId item_id;
    bool fabricated = false;

    friend bool operator==(const RankedEntry&, const RankedEntry&) = default;
};

using RankedList = std::vector<RankedEntry>;

// ---------------------------------------------------------------------------
// Errors. Exit-code contract: parse/validation/usage/config -> 2, loop -> 3.
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    Error(std::string message, int exit_code)
        : std::runtime_error(std::move(message)), exit_code_(exit_code) {}
    int exit_code() const { return exit_code_; }

private:
    int exit_code_;
};

class ParseError : public Error {
public:
    explicit ParseError(const std::string& message) : Error(message, 2) {}
    ParseError(std::size_t line, const std::string& message)
        : Error("line " + std::to_string(line) + ": " + message, 2), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_ = 0;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message) : Error(message, 2) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(message, 2) {}
};

// Domain errors: preconditions on data (empty ground truth sets, degenerate
// timelines, too few cold items, ...).
class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(message, 2) {}
};

class LoopError : public Error {
public:
    explicit LoopError(const std::string& message) : Error(message, 3) {}
};

// ---------------------------------------------------------------------------
// Logging. Level comes from the ECHOLOOP_LOG env var (error|warn|info|debug).
// ---------------------------------------------------------------------------

enum class LogLevel { error = 0, warn = 1, info = 2, debug = 3 };

LogLevel log_level();
void set_log_level(LogLevel level);
void log(LogLevel level, const std::string& message);

inline void log_error(const std::string& m) { log(LogLevel::error, m); }
inline void log_warn(const std::string& m) { log(LogLevel::warn, m); }
inline void log_info(const std::string& m) { log(LogLevel::info, m); }
inline void log_debug(const std::string& m) { log(LogLevel::debug, m); }

}  // namespace echoloop

#endif  // ECHOLOOP_CORE_HPP
