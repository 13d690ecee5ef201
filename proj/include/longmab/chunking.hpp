#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace longmab {

/// Byte range [begin, end) of one token inside the tokenized text.
struct TokenSpan {
  std::size_t begin = 0;
  std::size_t end = 0;
};

using ExternalTokenizeFn = std::function<std::vector<TokenSpan>(std::string_view)>;

struct TokenizerSpec {
  enum class Kind { whitespace_regex, external };
  Kind kind = Kind::whitespace_regex;
  std::map<std::string, std::string> parameters;
  /// Required when kind == external. Must return ordered, non-overlapping spans.
  ExternalTokenizeFn external;
};

/// Default rule: maximal runs of word characters (ASCII alphanumerics,
/// underscore and any non-ASCII byte) are tokens, and every other
/// non-whitespace character is a token by itself.
std::vector<TokenSpan> tokenize(std::string_view text, const TokenizerSpec& spec = {});
std::size_t count_tokens(std::string_view text, const TokenizerSpec& spec = {});

/// One arm of the bandit: a contiguous slice of the context.
struct Chunk {
  std::size_t index = 0;
  std::string text;
  std::size_t token_count = 0;
};

/// Greedy left-to-right packing of `budget` tokens per chunk. Whitespace
/// between chunks stays with the earlier chunk so the texts concatenate back
/// to `context` exactly.
std::vector<Chunk> split_chunks(std::string_view context, std::size_t budget,
                                const TokenizerSpec& spec = {});

/// Plain text with `{name}` placeholders. Substituted values are inserted
/// verbatim and never re-scanned.
class PromptTemplate {
 public:
  explicit PromptTemplate(std::string text);

  static PromptTemplate from_file(const std::string& path);
  static PromptTemplate default_qa();
  static PromptTemplate default_probe();

  bool has_slot(std::string_view name) const;
  const std::string& text() const { return text_; }

  /// Throws ConfigError if a slot named in `required` is absent from the
  /// template.
  std::string render(const std::map<std::string, std::string>& values,
                     std::span<const std::string_view> required) const;

 private:
  std::string text_;
};

/// Selected chunks are placed in document order regardless of input order.
std::string assemble_prompt(std::span<const Chunk> selected, std::string_view question,
                            const PromptTemplate& tmpl);

}  // namespace longmab
