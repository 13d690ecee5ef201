#include "longmab/chunking.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "longmab/errors.hpp"

namespace longmab {

namespace {

bool is_word_byte(unsigned char c) { return c >= 0x80 || std::isalnum(c) || c == '_'; }

std::vector<TokenSpan> default_tokenize(std::string_view text) {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isspace(c)) {
      ++i;
    } else if (is_word_byte(c)) {
      const std::size_t begin = i;
      while (i < text.size() && is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
      spans.push_back({begin, i});
    } else {
      spans.push_back({i, i + 1});
      ++i;
    }
  }
  return spans;
}

constexpr std::string_view kDefaultQa =
    "Answer the question based on the given passages. Think step by step about which "
    "passages are relevant, then give a short final answer.\n"
    "Respond in exactly this format:\n"
    "Reasoning: <your reasoning>\n"
    "Answer: <short answer>\n"
    "\n"
    "Passages:\n"
    "{context}\n"
    "\n"
    "Question: {question}\n";

constexpr std::string_view kDefaultProbe =
    "Read the passages below. The answer to the question is given. Extract the "
    "sentences from the passages that support this answer, quoting them faithfully, "
    "and explain step by step how they lead to the answer.\n"
    "\n"
    "Passages:\n"
    "{context}\n"
    "\n"
    "Question: {question}\n"
    "Answer: {answers}\n"
    "\n"
    "Evidence:\n";

}  // namespace

std::vector<TokenSpan> tokenize(std::string_view text, const TokenizerSpec& spec) {
  if (spec.kind == TokenizerSpec::Kind::external) {
    if (!spec.external) throw ConfigError("external tokenizer selected but no hook installed");
    return spec.external(text);
  }
  return default_tokenize(text);
}

std::size_t count_tokens(std::string_view text, const TokenizerSpec& spec) {
  return tokenize(text, spec).size();
}

std::vector<Chunk> split_chunks(std::string_view context, std::size_t budget,
                                const TokenizerSpec& spec) {
  if (budget == 0) throw std::invalid_argument("chunk budget must be >= 1");
  const auto spans = tokenize(context, spec);
  if (spans.empty()) throw std::invalid_argument("empty context");

  std::vector<Chunk> chunks;
  std::size_t begin = 0;
  for (std::size_t first = 0; first < spans.size(); first += budget) {
    const std::size_t last = std::min(first + budget, spans.size());
    const std::size_t end = last < spans.size() ? spans[last].begin : context.size();
    chunks.push_back({chunks.size(), std::string(context.substr(begin, end - begin)),
                      last - first});
    begin = end;
  }
  return chunks;
}

PromptTemplate::PromptTemplate(std::string text) : text_(std::move(text)) {}

PromptTemplate PromptTemplate::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read prompt template: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return PromptTemplate(buf.str());
}

PromptTemplate PromptTemplate::default_qa() { return PromptTemplate(std::string(kDefaultQa)); }

PromptTemplate PromptTemplate::default_probe() {
  return PromptTemplate(std::string(kDefaultProbe));
}

bool PromptTemplate::has_slot(std::string_view name) const {
  return text_.find("{" + std::string(name) + "}") != std::string::npos;
}

std::string PromptTemplate::render(const std::map<std::string, std::string>& values,
                                   std::span<const std::string_view> required) const {
  for (auto slot : required) {
    if (!has_slot(slot)) {
      throw ConfigError("prompt template is missing the {" + std::string(slot) + "} slot");
    }
  }
  std::string out;
  out.reserve(text_.size());
  std::size_t pos = 0;
  while (pos < text_.size()) {
    const std::size_t open = text_.find('{', pos);
    if (open == std::string::npos) break;
    const std::size_t close = text_.find('}', open + 1);
    if (close == std::string::npos) break;
    const auto it = values.find(text_.substr(open + 1, close - open - 1));
    if (it == values.end()) {
      out.append(text_, pos, open + 1 - pos);
      pos = open + 1;
      continue;
    }
    out.append(text_, pos, open - pos);
    out.append(it->second);
    pos = close + 1;
  }
  out.append(text_, pos, std::string::npos);
  return out;
}

std::string assemble_prompt(std::span<const Chunk> selected, std::string_view question,
                            const PromptTemplate& tmpl) {
  if (selected.empty()) throw std::invalid_argument("assemble_prompt: no chunks selected");
  std::vector<const Chunk*> ordered;
  ordered.reserve(selected.size());
  for (const auto& chunk : selected) ordered.push_back(&chunk);
  std::sort(ordered.begin(), ordered.end(),
            [](const Chunk* a, const Chunk* b) { return a->index < b->index; });

  std::string context;
  for (const Chunk* chunk : ordered) {
    if (!context.empty()) context += "\n\n";
    context += chunk->text;
  }
  static constexpr std::array<std::string_view, 2> kRequired{"context", "question"};
  return tmpl.render({{"context", std::move(context)}, {"question", std::string(question)}},
                     kRequired);
}

}  // namespace longmab
