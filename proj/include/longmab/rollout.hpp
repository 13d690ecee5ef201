#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "longmab/bandit.hpp"
#include "longmab/chunking.hpp"
#include "longmab/corpus.hpp"
#include "longmab/generation.hpp"
#include "longmab/metrics.hpp"

namespace longmab {

inline constexpr const char* kGenerationErrorFlag = "generation_error";

struct RolloutConfig {
  std::size_t rounds = 30;
  BanditParams bandit;
  RewardStrategy strategy = RewardStrategy::full_response;
  /// Store mu/n after each step's update.
  bool record_snapshots = true;
  PromptTemplate prompt = PromptTemplate::default_qa();
};

struct RolloutRecord {
  std::string question_id;
  std::int64_t step = 0;
  std::vector<std::size_t> selected_chunk_ids;
  std::string response;
  std::string answer;
  double reward = 0.0;
  std::vector<std::string> flags;
  std::optional<std::vector<double>> mu_snapshot;
  std::optional<std::vector<std::int64_t>> n_snapshot;

  bool flagged() const { return !flags.empty(); }
};

/// Everything recorded for one question. The header fields make a trace
/// file self-contained for pair building and analysis.
struct RolloutTrace {
  std::string question_id;
  std::string question;
  std::vector<std::string> gold_answers;
  std::string context;
  std::size_t n_chunks = 0;
  std::set<std::size_t> gt_chunk_ids;
  std::vector<double> init_mu;
  std::vector<std::string> warnings;
  nlohmann::ordered_json config;
  std::vector<RolloutRecord> records;
};

nlohmann::ordered_json rollout_config_echo(const RolloutConfig& cfg);

/// Plays cfg.rounds bandit steps for one question. A step whose generation
/// fails is recorded with reward 0 and kGenerationErrorFlag, and the bandit
/// is credited that 0 so the trace stays replayable.
RolloutTrace run_rollouts(const QAInstance& inst, std::span<const Chunk> chunks,
                          std::span<const double> init_mu, ResponseGenerator& gen,
                          const RolloutConfig& cfg);

/// Header line followed by one line per step.
void write_trace(std::ostream& out, const RolloutTrace& trace);

/// Parses a trace file; throws DatasetError naming the offending line.
std::vector<RolloutTrace> read_traces(std::istream& in);
std::vector<RolloutTrace> read_traces_file(const std::string& path);

}  // namespace longmab
