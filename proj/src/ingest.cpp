#include "echoloop/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace echoloop::ingest {

namespace {

// Splits a CSV record on commas. Ids are opaque strings without embedded
// commas or quoting; the writer emits the same dialect, so parse/serialize
// round-trips exactly.
std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::string current;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(current);
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    fields.push_back(current);
    return fields;
}

bool read_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

// Strict non-negative integer: digits only. Fractional, signed, or
// exponent-style timestamps are rejected rather than truncated.
Timestamp parse_timestamp(const std::string& text, std::size_t line_no) {
    if (text.empty()) throw ParseError(line_no, "empty timestamp");
    if (text[0] == '-') throw ParseError(line_no, "negative timestamp '" + text + "'");
    for (char c : text) {
        if (c < '0' || c > '9')
            throw ParseError(line_no, "timestamp '" + text + "' is not a non-negative integer");
    }
    Timestamp value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw ParseError(line_no, "timestamp '" + text + "' out of range");
    return value;
}

}  // namespace

std::vector<Interaction> parse_interaction_log(std::istream& source, LogFormat format) {
    if (format != LogFormat::csv) throw UsageError("unsupported log format");

    std::string line;
    if (!read_line(source, line)) throw ParseError(1, "missing header");
    if (line != "user_id,item_id,timestamp")
        throw ParseError(1, "expected header 'user_id,item_id,timestamp', got '" + line + "'");

    std::vector<Interaction> interactions;
    std::size_t line_no = 1;
    while (read_line(source, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 3)
            throw ParseError(line_no, "expected 3 columns, got " + std::to_string(fields.size()));
        if (fields[0].empty()) throw ParseError(line_no, "empty user_id");
        if (fields[1].empty()) throw ParseError(line_no, "empty item_id");
        interactions.push_back(Interaction{std::move(fields[0]), std::move(fields[1]),
                                           parse_timestamp(fields[2], line_no)});
    }
    return interactions;
}

AttributeTable parse_attribute_table(std::istream& source, SubjectKind subject_kind) {
    std::string line;
    if (!read_line(source, line)) throw ParseError(1, "missing header");
    if (line != "subject_id,attribute,value")
        throw ParseError(1, "expected header 'subject_id,attribute,value', got '" + line + "'");

    AttributeTable table;
    table.subject_kind = subject_kind;
    std::size_t line_no = 1;
    while (read_line(source, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_fields(line);
        if (fields.size() != 3)
            throw ParseError(line_no, "expected 3 columns, got " + std::to_string(fields.size()));
        const std::string& subject = fields[0];
        const std::string& attribute = fields[1];
        const std::string& value = fields[2];
        if (subject.empty()) throw ParseError(line_no, "empty subject_id");
        if (attribute.empty()) throw ParseError(line_no, "empty attribute");

        auto& values = table.records[subject][attribute];
        if (std::find(values.begin(), values.end(), value) != values.end())
            throw ValidationError("duplicate attribute row at line " + std::to_string(line_no) +
                                  ": (" + subject + ", " + attribute + ", " + value + ")");
        values.push_back(value);
        table.vocab[attribute].insert(value);
    }
    return table;
}

namespace {

// Restrict an attribute table to subjects present in the log and rebuild the
// vocab from what survives. Returns the number of dropped subject records.
std::size_t restrict_to_subjects(AttributeTable& table, const std::set<std::string>& subjects) {
    std::size_t dropped = 0;
    for (auto it = table.records.begin(); it != table.records.end();) {
        if (subjects.count(it->first) == 0) {
            ++dropped;
            it = table.records.erase(it);
        } else {
            ++it;
        }
    }
    table.vocab.clear();
    for (const auto& [subject, attrs] : table.records)
        for (const auto& [attribute, values] : attrs)
            for (const auto& value : values) table.vocab[attribute].insert(value);
    return dropped;
}

}  // namespace

Dataset build_dataset(std::vector<Interaction> interactions, AttributeTable user_attrs,
                      AttributeTable item_attrs) {
    Dataset dataset;
    std::stable_sort(interactions.begin(), interactions.end(), canonical_less);
    for (std::size_t i = 1; i < interactions.size(); ++i) {
        if (interactions[i] == interactions[i - 1]) {
            const auto& d = interactions[i];
            throw ValidationError("duplicate interaction (" + d.user_id + ", " + d.item_id +
                                  ", " + std::to_string(d.timestamp) + ")");
        }
    }
    for (const auto& interaction : interactions) {
        dataset.users.insert(interaction.user_id);
        dataset.items.insert(interaction.item_id);
    }
    dataset.interactions = std::move(interactions);

    dataset.dropped_user_attribute_records = restrict_to_subjects(user_attrs, dataset.users);
    dataset.dropped_item_attribute_records = restrict_to_subjects(item_attrs, dataset.items);
    if (dataset.dropped_user_attribute_records > 0)
        log_warn("dropped " + std::to_string(dataset.dropped_user_attribute_records) +
                 " user attribute record(s) for subjects absent from the log");
    if (dataset.dropped_item_attribute_records > 0)
        log_warn("dropped " + std::to_string(dataset.dropped_item_attribute_records) +
                 " item attribute record(s) for subjects absent from the log");

    user_attrs.subject_kind = SubjectKind::user;
    item_attrs.subject_kind = SubjectKind::item;
    dataset.user_attributes = std::move(user_attrs);
    dataset.item_attributes = std::move(item_attrs);
    return dataset;
}

void write_interaction_log(const std::vector<Interaction>& interactions, std::ostream& out) {
    out << "user_id,item_id,timestamp\n";
    for (const auto& interaction : interactions)
        out << interaction.user_id << ',' << interaction.item_id << ','
            << interaction.timestamp << '\n';
}

void write_attribute_table(const AttributeTable& table, std::ostream& out) {
    out << "subject_id,attribute,value\n";
    for (const auto& [subject, attrs] : table.records)
        for (const auto& [attribute, values] : attrs)
            for (const auto& value : values)
                out << subject << ',' << attribute << ',' << value << '\n';
}

std::vector<Interaction> load_interaction_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open interaction log '" + path + "'");
    return parse_interaction_log(in);
}

AttributeTable load_attribute_table(const std::string& path, SubjectKind subject_kind) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open attribute table '" + path + "'");
    return parse_attribute_table(in, subject_kind);
}

Dataset load_dataset(const std::string& interactions_path, const std::string& user_attrs_path,
                     const std::string& item_attrs_path) {
    auto interactions = load_interaction_log(interactions_path);
    AttributeTable user_attrs{SubjectKind::user};
    AttributeTable item_attrs{SubjectKind::item};
    if (!user_attrs_path.empty())
        user_attrs = load_attribute_table(user_attrs_path, SubjectKind::user);
    if (!item_attrs_path.empty())
        item_attrs = load_attribute_table(item_attrs_path, SubjectKind::item);
    return build_dataset(std::move(interactions), std::move(user_attrs), std::move(item_attrs));
}

}  // namespace echoloop::ingest
