#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace longmab {

enum class RewardStrategy {
  /// SubEM over the whole response, F1 over the extracted answer.
  full_response,
  /// SubEM and F1 both over the extracted answer.
  answer_based,
};

std::string_view to_string(RewardStrategy strategy);
RewardStrategy parse_reward_strategy(std::string_view name);

/// Lowercase, strip punctuation, drop the articles a/an/the, collapse
/// whitespace. Operates on ASCII; other bytes pass through untouched.
std::string normalize_text(std::string_view s);

/// Splits normalized text on single spaces.
std::vector<std::string> normalized_tokens(std::string_view s);

/// 1 iff some normalized gold occurs inside the normalized prediction.
int sub_em(std::string_view pred, std::span<const std::string> golds);

/// Bag-of-tokens F1, maximized over golds.
double token_f1(std::string_view pred, std::span<const std::string> golds);

/// Text after the last case-insensitive "Answer:" marker, or the whole
/// response when there is none.
std::string extract_answer(std::string_view response);

double response_reward(std::string_view response,
                       std::span<const std::string> golds,
                       RewardStrategy strategy);

}  // namespace longmab
