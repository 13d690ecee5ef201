#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "longmab/analysis.hpp"
#include "longmab/bandit.hpp"
#include "longmab/generation.hpp"
#include "longmab/metrics.hpp"
#include "longmab/probing.hpp"

namespace longmab {

enum class Backend { mock, http };

std::string_view to_string(Backend backend);
Backend parse_backend(std::string_view name);

/// Every tunable of a run. Serialized verbatim into trace headers and the
/// run manifest; credentials are never part of it.
struct PipelineConfig {
  std::size_t chunk_budget = 1500;
  std::size_t rounds = 30;
  std::size_t k = 4;
  double alpha = 1.0;
  double epsilon = 1e-6;
  RewardStrategy reward_strategy = RewardStrategy::full_response;
  MuUpdateMode mu_update_mode = MuUpdateMode::verbatim_global_t;
  InitRescale init_rescale = InitRescale::none;
  bool record_snapshots = true;

  Backend generator_backend = Backend::http;
  std::string generator_model = "gpt-4o-mini";
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> generation_seed;
  std::int64_t timeout_ms = 60000;
  int max_retries = 4;

  Backend embedder_backend = Backend::http;
  std::string embedder_model = "text-embedding-3-small";
  std::size_t embed_batch_size = 32;

  std::size_t workers = 4;
  std::size_t max_in_flight = 8;
  std::uint64_t seed = 0;
  std::size_t extend_min_tokens = 8000;
  std::size_t extend_max_tokens = 16000;

  /// Empty means the built-in template.
  std::string prompt_template;
  std::string probe_template;

  SuccessRule mock_success_rule = SuccessRule::all_evidence_required;
  double mock_theta = 0.5;
  SubemTarget subem_target = SubemTarget::full_response;

  /// Throws ConfigError on out-of-range values.
  void validate() const;
};

nlohmann::ordered_json to_json(const PipelineConfig& cfg);

/// Hex FNV-1a of the compact JSON echo.
std::string config_hash(const PipelineConfig& cfg);

/// Endpoint and key, read from LONGMAB_API_BASE / LONGMAB_API_KEY.
struct ApiEnvironment {
  std::string base_url;
  std::string api_key;

  static ApiEnvironment from_env();
};

/// Clients shared by every question of a run. Mock generators are built per
/// question because the oracle needs that question's evidence chunks.
class Backends {
 public:
  /// Throws ConfigError when a required HTTP backend has no API key. Without
  /// `with_generator` only the embedder is set up.
  Backends(const PipelineConfig& cfg, const ApiEnvironment& env, bool with_generator = true);

  std::unique_ptr<ResponseGenerator> generator_for(const MockOracleSpec& mock_spec) const;
  Embedder& embedder() { return *embedder_; }

 private:
  const PipelineConfig& cfg_;
  std::shared_ptr<HttpJsonClient> chat_client_;
  std::unique_ptr<Embedder> embedder_;
};

/// Meta key that makes the mock generator fail the probe for an instance.
inline constexpr const char* kMockFailProbeKey = "mock.fail_probe";

struct RolloutRunSummary {
  std::size_t questions = 0;
  std::size_t traces_written = 0;
  std::size_t failed_questions = 0;
  std::size_t probe_fallbacks = 0;
  std::size_t generation_errors = 0;
  std::size_t dataset_errors = 0;
  std::size_t pool_exhausted = 0;
};

struct RolloutPaths {
  std::string input;
  std::string pool;  ///< empty: no context extension
  std::string trace;
  std::string manifest;  ///< empty: trace + ".manifest.json"
};

/// extend -> chunk -> probe-init -> rollouts for every instance; traces are
/// written in input order whatever the worker count.
RolloutRunSummary cmd_rollout(const PipelineConfig& cfg, const ApiEnvironment& env,
                              const RolloutPaths& paths);

struct PairsRunSummary {
  std::size_t traces = 0;
  std::size_t pairs = 0;
  std::size_t skipped = 0;
};

/// `strategy` set: rewards are recomputed under it before pairing.
PairsRunSummary cmd_pairs(const std::string& traces_path, const std::string& output_path,
                          std::optional<RewardStrategy> strategy);

void cmd_analyze(const PipelineConfig& cfg, const ApiEnvironment& env,
                 const std::string& traces_path, const std::string& report_path);

struct EvalSummary {
  std::size_t count = 0;
  std::size_t missing_predictions = 0;
  double sub_em = 0.0;  ///< percentage
  double f1 = 0.0;      ///< percentage
};

EvalSummary cmd_eval(const std::string& predictions_path, const std::string& gold_path,
                     bool extract);

/// Entry point shared by the binary and the tests. Returns the exit status.
int run_cli(int argc, const char* const* argv);

}  // namespace longmab
