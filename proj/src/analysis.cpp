#include "longmab/analysis.hpp"

#include <stdexcept>

#include "longmab/errors.hpp"
#include "longmab/metrics.hpp"

namespace longmab {

using nlohmann::ordered_json;

std::string_view to_string(SubemTarget target) {
  return target == SubemTarget::full_response ? "full_response" : "extracted_answer";
}

SubemTarget parse_subem_target(std::string_view name) {
  if (name == "full_response") return SubemTarget::full_response;
  if (name == "extracted_answer") return SubemTarget::extracted_answer;
  throw ConfigError("unknown SubEM target: " + std::string(name));
}

std::optional<double> gt_recall_at_step(const RolloutRecord& record,
                                        const std::set<std::size_t>& gt_ids) {
  if (gt_ids.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t id : record.selected_chunk_ids) hits += gt_ids.contains(id) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(gt_ids.size());
}

TrendReport quality_trend(std::span<const RolloutTrace> traces,
                          const std::map<std::string, std::vector<std::string>>& golds_by_id,
                          SubemTarget target) {
  TrendReport report;
  if (traces.empty()) return report;
  const std::size_t steps = traces.front().records.size();
  for (const auto& trace : traces) {
    if (trace.records.size() != steps) {
      throw std::invalid_argument("quality_trend: trace " + trace.question_id + " has T=" +
                                  std::to_string(trace.records.size()) + ", expected " +
                                  std::to_string(steps));
    }
  }

  std::vector<double> recall_sum(steps, 0.0);
  std::vector<double> subem_sum(steps, 0.0);
  std::vector<double> reward_sum(steps, 0.0);
  for (const auto& trace : traces) {
    const auto golds = golds_by_id.find(trace.question_id);
    if (golds == golds_by_id.end() || golds->second.empty()) {
      throw std::invalid_argument("quality_trend: no gold answers for " + trace.question_id);
    }
    if (!trace.gt_chunk_ids.empty()) ++report.recall_question_count;
    for (std::size_t s = 0; s < steps; ++s) {
      const auto& r = trace.records[s];
      if (auto recall = gt_recall_at_step(r, trace.gt_chunk_ids)) recall_sum[s] += *recall;
      const std::string scored =
          target == SubemTarget::full_response ? r.response : extract_answer(r.response);
      subem_sum[s] += sub_em(scored, golds->second);
      reward_sum[s] += r.reward;
    }
  }

  const auto q = static_cast<double>(traces.size());
  const auto rq = static_cast<double>(report.recall_question_count);
  report.question_count = traces.size();
  for (std::size_t s = 0; s < steps; ++s) {
    report.per_step_recall.push_back(report.recall_question_count
                                         ? std::optional<double>(recall_sum[s] / rq)
                                         : std::nullopt);
    report.per_step_subem.push_back(subem_sum[s] / q);
    report.per_step_reward.push_back(reward_sum[s] / q);
  }
  return report;
}

TrendReport quality_trend(std::span<const RolloutTrace> traces, SubemTarget target) {
  std::map<std::string, std::vector<std::string>> golds;
  for (const auto& t : traces) golds[t.question_id] = t.gold_answers;
  return quality_trend(traces, golds, target);
}

DiversityReport similarity_stats(std::span<const double> similarities) {
  DiversityReport report;
  report.pair_count = similarities.size();
  if (similarities.empty()) return report;
  double sum = 0.0;
  for (double s : similarities) sum += s;
  const double mean = sum / static_cast<double>(similarities.size());
  double sq = 0.0;
  for (double s : similarities) sq += (s - mean) * (s - mean);
  report.mean_pairwise_similarity = mean;
  report.variance_pairwise_similarity = sq / static_cast<double>(similarities.size());
  return report;
}

DiversityReport diversity_stats(std::span<const std::string> responses, Embedder& embedder) {
  if (responses.size() < 2) throw std::invalid_argument("diversity_stats: need >= 2 responses");
  const auto vecs = embedder.embed(responses);
  if (vecs.size() != responses.size()) throw ProtocolError("embedder returned a short batch");
  std::vector<double> sims;
  sims.reserve(vecs.size() * (vecs.size() - 1) / 2);
  for (std::size_t i = 0; i < vecs.size(); ++i) {
    for (std::size_t j = i + 1; j < vecs.size(); ++j) sims.push_back(cosine(vecs[i], vecs[j]));
  }
  return similarity_stats(sims);
}

nlohmann::ordered_json analysis_report(std::span<const RolloutTrace> traces, Embedder& embedder,
                                       SubemTarget target) {
  const TrendReport trend = quality_trend(traces, target);

  ordered_json report;
  report["question_count"] = trend.question_count;
  report["T"] = traces.empty() ? 0 : traces.front().records.size();
  report["subem_target"] = to_string(target);
  report["recall_question_count"] = trend.recall_question_count;
  ordered_json recall = ordered_json::array();
  for (const auto& v : trend.per_step_recall) {
    recall.push_back(v ? ordered_json(*v) : ordered_json(nullptr));
  }
  report["per_step_recall"] = recall;
  report["per_step_subem"] = trend.per_step_subem;
  report["per_step_reward"] = trend.per_step_reward;

  ordered_json per_question = ordered_json::array();
  double mean_sum = 0.0;
  double var_sum = 0.0;
  for (const auto& trace : traces) {
    std::vector<std::string> responses;
    for (const auto& r : trace.records) {
      if (!r.flagged()) responses.push_back(r.response);
    }
    if (responses.size() < 2) continue;
    const auto d = diversity_stats(responses, embedder);
    mean_sum += d.mean_pairwise_similarity;
    var_sum += d.variance_pairwise_similarity;
    ordered_json entry;
    entry["question_id"] = trace.question_id;
    entry["mean_pairwise_similarity"] = d.mean_pairwise_similarity;
    entry["variance_pairwise_similarity"] = d.variance_pairwise_similarity;
    entry["pair_count"] = d.pair_count;
    per_question.push_back(std::move(entry));
  }
  ordered_json diversity;
  const auto n = per_question.size();
  diversity["question_count"] = n;
  diversity["mean_pairwise_similarity"] = n ? mean_sum / static_cast<double>(n) : 0.0;
  diversity["mean_variance_pairwise_similarity"] = n ? var_sum / static_cast<double>(n) : 0.0;
  diversity["per_question"] = std::move(per_question);
  report["diversity"] = std::move(diversity);
  return report;
}

}  // namespace longmab
