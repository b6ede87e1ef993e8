#ifndef ECHOLOOP_TRACE_IO_HPP
#define ECHOLOOP_TRACE_IO_HPP

#include <string>

#include "echoloop/loop.hpp"

namespace echoloop::trace_io {

// Serializes a loop trace into a directory:
//   trace.json, schedule.json, catalog.csv, user_attributes.csv,
//   item_attributes.csv, period_{n}/{recs.csv, injected.csv, generated.jsonl,
//   gt.csv, embeddings_user.csv, embeddings_item.csv}
// Output is byte-deterministic for identical traces.
void write_trace(const loop::LoopTrace& trace, const std::string& directory);

// Reads a trace back; missing or corrupt files raise ValidationError naming
// the file. write_trace(read_trace(dir)) reproduces the directory bit-exactly.
loop::LoopTrace read_trace(const std::string& directory);

void write_embedding_matrix(const rec::EmbeddingMatrix& matrix, const std::string& path);
rec::EmbeddingMatrix read_embedding_matrix(const std::string& path);

// Shortest round-trip formatting for doubles (also used by report CSVs).
std::string format_double(double value);

}  // namespace echoloop::trace_io

#endif  // ECHOLOOP_TRACE_IO_HPP
