#ifndef ECHOLOOP_INGEST_HPP
#define ECHOLOOP_INGEST_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "echoloop/core.hpp"

namespace echoloop::ingest {

enum class LogFormat { csv };

// Parses an interaction log. Expects the header `user_id,item_id,timestamp`;
// rows with a wrong column count, empty ids, or a timestamp that is not a
// non-negative integer raise ParseError with the 1-based line number.
// An empty body after the header yields an empty list.
std::vector<Interaction> parse_interaction_log(std::istream& source,
                                               LogFormat format = LogFormat::csv);

// Parses an attribute table with header `subject_id,attribute,value`.
// Multi-valued attributes appear as repeated rows; an exact duplicate
// (subject, attribute, value) row raises ValidationError.
AttributeTable parse_attribute_table(std::istream& source, SubjectKind subject_kind);

// Builds the canonical dataset: derives user/item sets, sorts interactions by
// (timestamp, user, item), rejects duplicate (u, i, tau) triples, and drops
// attribute records whose subject never appears in the log (counted on the
// returned Dataset).
Dataset build_dataset(std::vector<Interaction> interactions,
                      AttributeTable user_attrs = AttributeTable{SubjectKind::user},
                      AttributeTable item_attrs = AttributeTable{SubjectKind::item});

void write_interaction_log(const std::vector<Interaction>& interactions, std::ostream& out);
void write_attribute_table(const AttributeTable& table, std::ostream& out);

// File-based convenience wrappers. Attribute paths may be empty.
std::vector<Interaction> load_interaction_log(const std::string& path);
AttributeTable load_attribute_table(const std::string& path, SubjectKind subject_kind);
Dataset load_dataset(const std::string& interactions_path,
                     const std::string& user_attrs_path = "",
                     const std::string& item_attrs_path = "");

}  // namespace echoloop::ingest

#endif  // ECHOLOOP_INGEST_HPP
