#include "longmab/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "longmab/errors.hpp"

namespace longmab {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_article(std::string_view token) {
  return token == "a" || token == "an" || token == "the";
}

double f1_single(const std::vector<std::string>& pred,
                 const std::vector<std::string>& gold) {
  if (pred.empty() || gold.empty()) return pred.empty() && gold.empty() ? 1.0 : 0.0;
  std::map<std::string_view, int> gold_counts;
  for (const auto& g : gold) ++gold_counts[g];
  int common = 0;
  for (const auto& p : pred) {
    auto it = gold_counts.find(p);
    if (it != gold_counts.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  if (common == 0) return 0.0;
  const double precision = static_cast<double>(common) / static_cast<double>(pred.size());
  const double recall = static_cast<double>(common) / static_cast<double>(gold.size());
  return 2.0 * precision * recall / (precision + recall);
}

}  // namespace

std::string_view to_string(RewardStrategy strategy) {
  switch (strategy) {
    case RewardStrategy::full_response:
      return "full_response";
    case RewardStrategy::answer_based:
      return "answer_based";
  }
  return "unknown";
}

RewardStrategy parse_reward_strategy(std::string_view name) {
  if (name == "full_response") return RewardStrategy::full_response;
  if (name == "answer_based") return RewardStrategy::answer_based;
  throw ConfigError("unknown reward strategy: " + std::string(name));
}

std::string normalize_text(std::string_view s) {
  std::string stripped;
  stripped.reserve(s.size());
  for (char c : s) {
    const auto uc = static_cast<unsigned char>(c);
    if (uc < 0x80 && std::ispunct(uc)) continue;
    stripped.push_back(static_cast<char>(uc < 0x80 ? std::tolower(uc) : uc));
  }

  std::string out;
  out.reserve(stripped.size());
  std::size_t i = 0;
  while (i < stripped.size()) {
    while (i < stripped.size() && is_space(stripped[i])) ++i;
    const std::size_t begin = i;
    while (i < stripped.size() && !is_space(stripped[i])) ++i;
    if (begin == i) break;
    std::string_view token(stripped.data() + begin, i - begin);
    if (is_article(token)) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(token);
  }
  return out;
}

std::vector<std::string> normalized_tokens(std::string_view s) {
  const std::string norm = normalize_text(s);
  std::vector<std::string> tokens;
  std::size_t begin = 0;
  while (begin < norm.size()) {
    std::size_t end = norm.find(' ', begin);
    if (end == std::string::npos) end = norm.size();
    tokens.emplace_back(norm.substr(begin, end - begin));
    begin = end + 1;
  }
  return tokens;
}

int sub_em(std::string_view pred, std::span<const std::string> golds) {
  const std::string norm_pred = normalize_text(pred);
  for (const auto& gold : golds) {
    if (norm_pred.find(normalize_text(gold)) != std::string::npos) return 1;
  }
  return 0;
}

double token_f1(std::string_view pred, std::span<const std::string> golds) {
  const auto pred_tokens = normalized_tokens(pred);
  double best = 0.0;
  for (const auto& gold : golds) {
    best = std::max(best, f1_single(pred_tokens, normalized_tokens(gold)));
  }
  return best;
}

std::string extract_answer(std::string_view response) {
  static constexpr std::string_view kMarker = "answer:";
  std::size_t found = std::string_view::npos;
  if (response.size() >= kMarker.size()) {
    for (std::size_t pos = 0; pos + kMarker.size() <= response.size(); ++pos) {
      bool match = true;
      for (std::size_t j = 0; j < kMarker.size(); ++j) {
        if (std::tolower(static_cast<unsigned char>(response[pos + j])) != kMarker[j]) {
          match = false;
          break;
        }
      }
      if (match) found = pos;
    }
  }
  std::string_view tail =
      found == std::string_view::npos ? response : response.substr(found + kMarker.size());
  while (!tail.empty() && is_space(tail.front())) tail.remove_prefix(1);
  while (!tail.empty() && (is_space(tail.back()) || tail.back() == '.')) tail.remove_suffix(1);
  return std::string(tail);
}

double response_reward(std::string_view response,
                       std::span<const std::string> golds,
                       RewardStrategy strategy) {
  const std::string answer = extract_answer(response);
  const int em = strategy == RewardStrategy::full_response ? sub_em(response, golds)
                                                           : sub_em(answer, golds);
  return (static_cast<double>(em) + token_f1(answer, golds)) / 2.0;
}

}  // namespace longmab
