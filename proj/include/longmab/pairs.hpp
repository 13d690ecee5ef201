#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "longmab/corpus.hpp"
#include "longmab/rollout.hpp"

namespace longmab {

struct PreferencePair {
  std::string id;
  std::string context;
  std::string question;
  std::string chosen;
  std::string rejected;
  double reward_chosen = 0.0;
  double reward_rejected = 0.0;
  std::int64_t chosen_step = 0;
  std::int64_t rejected_step = 0;

  bool operator==(const PreferencePair&) const = default;
};

enum class DpoAdapter { lora, full };

struct DpoConfig {
  double beta = 0.1;
  double learning_rate = 2e-5;
  int epochs = 2;
  DpoAdapter adapter = DpoAdapter::lora;
};

/// Best unflagged response against the worst, ties to the earliest step.
/// Returns nullopt (and logs why) when fewer than two unflagged records
/// exist, the rewards are all equal, or both texts are identical.
std::optional<PreferencePair> build_pair(const RolloutTrace& trace, const QAInstance& inst);

/// Same, taking context, question and gold answers from the trace header.
std::optional<PreferencePair> build_pair(const RolloutTrace& trace);

/// Recomputes every record's reward under `strategy` from its response.
void rescore(RolloutTrace& trace, RewardStrategy strategy);

using PairSource = std::function<std::optional<PreferencePair>()>;

/// Writes pairs line by line to a temporary file and renames it over `path`
/// on success. On any failure the temporary is removed and the error
/// rethrown, leaving no destination file behind.
std::size_t emit_pairs(const PairSource& next, const std::string& path);
std::size_t emit_pairs(std::span<const PreferencePair> pairs, const std::string& path);

std::vector<PreferencePair> read_pairs(const std::string& path);

/// -log sigmoid(beta * (chosen log-ratio - rejected log-ratio)), evaluated as
/// a softplus so it stays finite for very large margins.
double dpo_loss_term(double logp_policy_chosen, double logp_ref_chosen,
                     double logp_policy_rejected, double logp_ref_rejected, double beta);

}  // namespace longmab
