#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "longmab/chunking.hpp"
#include "longmab/errors.hpp"

namespace longmab {

struct Passage {
  std::string title;
  std::string text;
  bool is_distractor = false;
};

struct QAInstance {
  std::string id;
  std::string question;
  std::vector<std::string> gold_answers;
  std::vector<Passage> passages;
  std::map<std::string, std::string> meta;
};

/// Meta key set by extend_context when the pool ran out before min_tokens.
inline constexpr const char* kExtendStatusKey = "extend_context.status";

/// Full context C: passages in order, each rendered as "title\ntext" (or
/// just text when untitled), separated by blank lines.
std::string context_text(const QAInstance& inst);

/// Streaming reader over line-delimited QA records. Malformed lines are
/// reported through the error callback and skipped.
class DatasetReader {
 public:
  using ErrorSink = std::function<void(const DatasetError&)>;

  DatasetReader(std::istream& in, ErrorSink on_error);

  /// Next well-formed instance, or nullopt at end of input.
  std::optional<QAInstance> next();

  std::size_t error_count() const { return errors_; }

 private:
  std::istream& in_;
  ErrorSink on_error_;
  std::size_t line_no_ = 0;
  std::size_t errors_ = 0;
};

struct LoadResult {
  std::vector<QAInstance> instances;
  std::vector<DatasetError> errors;
};

/// Reads a whole file. Throws DatasetError for a missing file or duplicate ids.
LoadResult load_dataset(const std::string& path);

/// Parses one JSON record; throws DatasetError with `line` on schema problems.
QAInstance parse_instance(std::string_view json_line, std::size_t line);
Passage parse_passage(std::string_view json_line, std::size_t line);

/// Reads a distractor pool (one passage object per line).
std::vector<Passage> load_passages(const std::string& path);

/// Pads the context with seeded draws from `pool` until it holds at least
/// `min_tokens`. Original passages keep their relative order; each distractor
/// lands in a uniformly drawn slot.
QAInstance extend_context(const QAInstance& inst, std::span<const Passage> pool,
                          std::size_t min_tokens, std::size_t max_tokens, std::uint64_t seed,
                          const TokenizerSpec& spec = {});

/// Indices of chunks whose normalized text contains a normalized gold answer.
std::set<std::size_t> ground_truth_chunk_ids(std::span<const Chunk> chunks,
                                             std::span<const std::string> golds);

}  // namespace longmab
