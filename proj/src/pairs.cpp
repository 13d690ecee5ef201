#include "longmab/pairs.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "longmab/errors.hpp"

namespace longmab {

using nlohmann::ordered_json;

namespace {

std::optional<PreferencePair> pick(const RolloutTrace& trace, const std::string& context,
                                   const std::string& question) {
  const RolloutRecord* best = nullptr;
  const RolloutRecord* worst = nullptr;
  std::size_t usable = 0;
  for (const auto& r : trace.records) {
    if (r.flagged()) continue;
    ++usable;
    if (!best || r.reward > best->reward) best = &r;
    if (!worst || r.reward < worst->reward) worst = &r;
  }
  if (usable < 2) {
    spdlog::info("skip {}: only {} unflagged responses", trace.question_id, usable);
    return std::nullopt;
  }
  if (!(best->reward > worst->reward)) {
    spdlog::info("skip {}: all rewards equal ({})", trace.question_id, best->reward);
    return std::nullopt;
  }
  if (best->response == worst->response) {
    spdlog::info("skip {}: chosen and rejected texts are identical", trace.question_id);
    return std::nullopt;
  }
  return PreferencePair{trace.question_id, context,        question,
                        best->response,    worst->response, best->reward,
                        worst->reward,     best->step,      worst->step};
}

ordered_json to_json(const PreferencePair& p) {
  ordered_json j;
  j["id"] = p.id;
  j["context"] = p.context;
  j["question"] = p.question;
  j["chosen"] = p.chosen;
  j["rejected"] = p.rejected;
  j["reward_chosen"] = p.reward_chosen;
  j["reward_rejected"] = p.reward_rejected;
  j["chosen_step"] = p.chosen_step;
  j["rejected_step"] = p.rejected_step;
  return j;
}

}  // namespace

std::optional<PreferencePair> build_pair(const RolloutTrace& trace, const QAInstance& inst) {
  return pick(trace, context_text(inst), inst.question);
}

std::optional<PreferencePair> build_pair(const RolloutTrace& trace) {
  return pick(trace, trace.context, trace.question);
}

void rescore(RolloutTrace& trace, RewardStrategy strategy) {
  for (auto& r : trace.records) {
    if (!r.flagged()) r.reward = response_reward(r.response, trace.gold_answers, strategy);
  }
}

std::size_t emit_pairs(const PairSource& next, const std::string& path) {
  namespace fs = std::filesystem;
  const fs::path dest(path);
  const fs::path tmp = dest.string() + ".tmp";
  std::size_t count = 0;
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
      while (auto pair = next()) {
        out << to_json(*pair).dump() << '\n';
        if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
        ++count;
      }
      out.flush();
      if (!out) throw std::runtime_error("flush of " + tmp.string() + " failed");
    }
    fs::rename(tmp, dest);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
  return count;
}

std::size_t emit_pairs(std::span<const PreferencePair> pairs, const std::string& path) {
  std::size_t i = 0;
  return emit_pairs(
      [&]() -> std::optional<PreferencePair> {
        if (i == pairs.size()) return std::nullopt;
        return pairs[i++];
      },
      path);
}

std::vector<PreferencePair> read_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(0, "cannot open pairs file: " + path);
  std::vector<PreferencePair> pairs;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(text);
      pairs.push_back({j.at("id").get<std::string>(), j.at("context").get<std::string>(),
                       j.at("question").get<std::string>(), j.at("chosen").get<std::string>(),
                       j.at("rejected").get<std::string>(), j.at("reward_chosen").get<double>(),
                       j.at("reward_rejected").get<double>(),
                       j.at("chosen_step").get<std::int64_t>(),
                       j.at("rejected_step").get<std::int64_t>()});
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(line_no, std::string("bad pair record: ") + e.what());
    }
  }
  return pairs;
}

double dpo_loss_term(double logp_policy_chosen, double logp_ref_chosen,
                     double logp_policy_rejected, double logp_ref_rejected, double beta) {
  if (!std::isfinite(logp_policy_chosen) || !std::isfinite(logp_ref_chosen) ||
      !std::isfinite(logp_policy_rejected) || !std::isfinite(logp_ref_rejected) ||
      !std::isfinite(beta)) {
    throw std::invalid_argument("dpo_loss_term: non-finite input");
  }
  if (!(beta > 0.0)) throw std::invalid_argument("dpo_loss_term: beta must be > 0");
  const double margin = beta * ((logp_policy_chosen - logp_ref_chosen) -
                                (logp_policy_rejected - logp_ref_rejected));
  // softplus(-margin)
  if (margin > 0.0) return std::log1p(std::exp(-margin));
  return -margin + std::log1p(std::exp(margin));
}

}  // namespace longmab
