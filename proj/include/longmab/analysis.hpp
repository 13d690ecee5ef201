#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "longmab/probing.hpp"
#include "longmab/rollout.hpp"

namespace longmab {

/// Which text the per-step SubEM curve scores.
enum class SubemTarget { full_response, extracted_answer };

std::string_view to_string(SubemTarget target);
SubemTarget parse_subem_target(std::string_view name);

struct TrendReport {
  /// nullopt at a step where no question has a ground-truth chunk.
  std::vector<std::optional<double>> per_step_recall;
  std::vector<double> per_step_subem;
  std::vector<double> per_step_reward;
  std::size_t question_count = 0;
  std::size_t recall_question_count = 0;
};

struct DiversityReport {
  double mean_pairwise_similarity = 0.0;
  /// Population variance.
  double variance_pairwise_similarity = 0.0;
  std::size_t pair_count = 0;
};

/// |selected ∩ gt| / |gt|; nullopt when gt is empty.
std::optional<double> gt_recall_at_step(const RolloutRecord& record,
                                        const std::set<std::size_t>& gt_ids);

/// Per-step means over questions. Throws std::invalid_argument when traces
/// disagree on T or a question has no golds in `golds_by_id`.
TrendReport quality_trend(std::span<const RolloutTrace> traces,
                          const std::map<std::string, std::vector<std::string>>& golds_by_id,
                          SubemTarget target = SubemTarget::full_response);

/// Uses each trace's own gold answers.
TrendReport quality_trend(std::span<const RolloutTrace> traces,
                          SubemTarget target = SubemTarget::full_response);

/// Mean and population variance of pairwise similarities.
DiversityReport similarity_stats(std::span<const double> similarities);

/// Cosine over all unordered response pairs.
DiversityReport diversity_stats(std::span<const std::string> responses, Embedder& embedder);

/// The document written by `longmab analyze`.
nlohmann::ordered_json analysis_report(std::span<const RolloutTrace> traces, Embedder& embedder,
                                       SubemTarget target = SubemTarget::full_response);

}  // namespace longmab
