#include "longmab/corpus.hpp"

#include <fstream>
#include <random>
#include <unordered_set>

#include <json.hpp>

#include "longmab/metrics.hpp"
#include "longmab/random.hpp"

namespace longmab {

using nlohmann::json;

namespace {

std::string passage_block(const Passage& p) {
  return p.title.empty() ? p.text : p.title + "\n" + p.text;
}

std::string require_string(const json& obj, const char* key, std::size_t line) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw DatasetError(line, std::string("missing `") + key + "`");
  if (!it->is_string()) throw DatasetError(line, std::string("`") + key + "` must be a string");
  return it->get<std::string>();
}

Passage passage_from_json(const json& obj, std::size_t line) {
  if (!obj.is_object()) throw DatasetError(line, "passage must be an object");
  Passage p;
  if (const auto it = obj.find("title"); it != obj.end() && !it->is_null()) {
    if (!it->is_string()) throw DatasetError(line, "`title` must be a string");
    p.title = it->get<std::string>();
  }
  p.text = require_string(obj, "text", line);
  if (p.text.empty()) throw DatasetError(line, "passage text is empty");
  return p;
}

json parse_json_line(std::string_view text, std::size_t line) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw DatasetError(line, std::string("invalid JSON: ") + e.what());
  }
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

}  // namespace

std::string context_text(const QAInstance& inst) {
  std::string out;
  for (const auto& p : inst.passages) {
    if (!out.empty()) out += "\n\n";
    out += passage_block(p);
  }
  return out;
}

QAInstance parse_instance(std::string_view json_line, std::size_t line) {
  const json obj = parse_json_line(json_line, line);
  if (!obj.is_object()) throw DatasetError(line, "record must be an object");

  QAInstance inst;
  inst.id = require_string(obj, "id", line);
  inst.question = require_string(obj, "question", line);

  const auto answers = obj.find("answers");
  if (answers == obj.end()) throw DatasetError(line, "missing `answers`");
  if (!answers->is_array()) throw DatasetError(line, "`answers` must be a list");
  for (const auto& a : *answers) {
    if (!a.is_string()) throw DatasetError(line, "`answers` entries must be strings");
    inst.gold_answers.push_back(a.get<std::string>());
  }
  if (inst.gold_answers.empty()) throw DatasetError(line, "`answers` is empty");

  const auto passages = obj.find("passages");
  if (passages == obj.end()) throw DatasetError(line, "missing `passages`");
  if (!passages->is_array()) throw DatasetError(line, "`passages` must be a list");
  for (const auto& p : *passages) inst.passages.push_back(passage_from_json(p, line));

  if (const auto meta = obj.find("meta"); meta != obj.end() && meta->is_object()) {
    for (const auto& [key, value] : meta->items()) {
      inst.meta[key] = value.is_string() ? value.get<std::string>() : value.dump();
    }
  }
  return inst;
}

Passage parse_passage(std::string_view json_line, std::size_t line) {
  return passage_from_json(parse_json_line(json_line, line), line);
}

DatasetReader::DatasetReader(std::istream& in, ErrorSink on_error)
    : in_(in), on_error_(std::move(on_error)) {}

std::optional<QAInstance> DatasetReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_no_;
    if (is_blank(line)) continue;
    try {
      return parse_instance(line, line_no_);
    } catch (const DatasetError& e) {
      ++errors_;
      if (on_error_) on_error_(e);
    }
  }
  return std::nullopt;
}

LoadResult load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(0, "cannot open dataset: " + path);
  LoadResult result;
  DatasetReader reader(in, [&](const DatasetError& e) { result.errors.push_back(e); });
  std::unordered_set<std::string> seen;
  while (auto inst = reader.next()) {
    if (!seen.insert(inst->id).second) throw DatasetError(0, "duplicate id: " + inst->id);
    result.instances.push_back(std::move(*inst));
  }
  return result;
}

std::vector<Passage> load_passages(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(0, "cannot open passage pool: " + path);
  std::vector<Passage> pool;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    pool.push_back(parse_passage(line, line_no));
  }
  return pool;
}

QAInstance extend_context(const QAInstance& inst, std::span<const Passage> pool,
                          std::size_t min_tokens, std::size_t max_tokens, std::uint64_t seed,
                          const TokenizerSpec& spec) {
  if (min_tokens > max_tokens) throw std::invalid_argument("min_tokens > max_tokens");

  std::size_t total = 0;
  std::unordered_set<std::string> original_texts;
  for (const auto& p : inst.passages) {
    total += count_tokens(passage_block(p), spec);
    original_texts.insert(p.text);
  }
  if (total >= min_tokens) return inst;

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!original_texts.contains(pool[i].text)) order.push_back(i);
  }
  std::mt19937_64 rng(seed);
  seeded_shuffle(order, rng);

  QAInstance out = inst;
  for (std::size_t idx : order) {
    if (total >= min_tokens) break;
    Passage distractor = pool[idx];
    distractor.is_distractor = true;
    total += count_tokens(passage_block(distractor), spec);
    const auto slot = uniform_below(rng, out.passages.size() + 1);
    out.passages.insert(out.passages.begin() + static_cast<std::ptrdiff_t>(slot),
                        std::move(distractor));
  }
  if (total < min_tokens) out.meta[kExtendStatusKey] = "pool_exhausted";
  return out;
}

std::set<std::size_t> ground_truth_chunk_ids(std::span<const Chunk> chunks,
                                             std::span<const std::string> golds) {
  std::vector<std::string> norm_golds;
  for (const auto& g : golds) norm_golds.push_back(normalize_text(g));
  std::set<std::size_t> ids;
  for (const auto& chunk : chunks) {
    const std::string norm = normalize_text(chunk.text);
    for (const auto& g : norm_golds) {
      if (norm.find(g) != std::string::npos) {
        ids.insert(chunk.index);
        break;
      }
    }
  }
  return ids;
}

}  // namespace longmab
