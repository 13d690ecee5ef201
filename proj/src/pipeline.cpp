#include "longmab/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "longmab/corpus.hpp"
#include "longmab/errors.hpp"
#include "longmab/hash.hpp"
#include "longmab/pairs.hpp"
#include "longmab/rollout.hpp"

namespace longmab {

using nlohmann::ordered_json;

std::string_view to_string(Backend backend) { return backend == Backend::mock ? "mock" : "http"; }

Backend parse_backend(std::string_view name) {
  if (name == "mock") return Backend::mock;
  if (name == "http") return Backend::http;
  throw ConfigError("unknown backend: " + std::string(name));
}

void PipelineConfig::validate() const {
  if (chunk_budget < 1) throw ConfigError("chunk-budget must be >= 1");
  if (rounds < 2) throw ConfigError("rounds must be >= 2 to form a preference pair");
  if (k < 1) throw ConfigError("top-k must be >= 1");
  if (!(alpha >= 0.0)) throw ConfigError("alpha must be >= 0");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (max_tokens < 1) throw ConfigError("max-tokens must be >= 1");
  if (!(temperature >= 0.0)) throw ConfigError("temperature must be >= 0");
  if (timeout_ms < 1) throw ConfigError("timeout-ms must be >= 1");
  if (max_retries < 0) throw ConfigError("max-retries must be >= 0");
  if (embed_batch_size < 1) throw ConfigError("embed-batch-size must be >= 1");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (max_in_flight < 1) throw ConfigError("max-in-flight must be >= 1");
  if (extend_min_tokens > extend_max_tokens) {
    throw ConfigError("extend-min-tokens exceeds extend-max-tokens");
  }
  if (!(mock_theta >= 0.0 && mock_theta <= 1.0)) throw ConfigError("mock-theta must be in [0,1]");
}

ordered_json to_json(const PipelineConfig& cfg) {
  ordered_json j;
  j["chunk_budget"] = cfg.chunk_budget;
  j["T"] = cfg.rounds;
  j["K"] = cfg.k;
  j["alpha"] = cfg.alpha;
  j["epsilon"] = cfg.epsilon;
  j["reward_strategy"] = to_string(cfg.reward_strategy);
  j["mu_update_mode"] = to_string(cfg.mu_update_mode);
  j["init_rescale"] = to_string(cfg.init_rescale);
  j["record_snapshots"] = cfg.record_snapshots;
  j["generator_backend"] = to_string(cfg.generator_backend);
  j["generator_model"] = cfg.generator_model;
  j["temperature"] = cfg.temperature;
  j["max_tokens"] = cfg.max_tokens;
  j["generation_seed"] = cfg.generation_seed ? ordered_json(*cfg.generation_seed) : nullptr;
  j["timeout_ms"] = cfg.timeout_ms;
  j["max_retries"] = cfg.max_retries;
  j["embedder_backend"] = to_string(cfg.embedder_backend);
  j["embedder_model"] = cfg.embedder_model;
  j["embed_batch_size"] = cfg.embed_batch_size;
  j["workers"] = cfg.workers;
  j["max_in_flight"] = cfg.max_in_flight;
  j["seed"] = cfg.seed;
  j["extend_min_tokens"] = cfg.extend_min_tokens;
  j["extend_max_tokens"] = cfg.extend_max_tokens;
  j["prompt_template"] = cfg.prompt_template.empty() ? "builtin" : cfg.prompt_template;
  j["probe_template"] = cfg.probe_template.empty() ? "builtin" : cfg.probe_template;
  j["mock_success_rule"] = to_string(cfg.mock_success_rule);
  j["mock_theta"] = cfg.mock_theta;
  j["subem_target"] = to_string(cfg.subem_target);
  return j;
}

std::string config_hash(const PipelineConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(cfg).dump())));
  return buf;
}

ApiEnvironment ApiEnvironment::from_env() {
  ApiEnvironment env;
  if (const char* base = std::getenv("LONGMAB_API_BASE")) env.base_url = base;
  if (const char* key = std::getenv("LONGMAB_API_KEY")) env.api_key = key;
  if (env.base_url.empty()) env.base_url = "https://api.openai.com/v1";
  return env;
}

Backends::Backends(const PipelineConfig& cfg, const ApiEnvironment& env, bool with_generator)
    : cfg_(cfg) {
  const bool http_generator = with_generator && cfg.generator_backend == Backend::http;
  const bool needs_http = http_generator || cfg.embedder_backend == Backend::http;
  if (needs_http && env.api_key.empty()) {
    throw ConfigError("LONGMAB_API_KEY is not set but an http backend is selected");
  }
  auto make_client = [&] {
    HttpClientOptions opts;
    opts.base_url = env.base_url;
    opts.api_key = env.api_key;
    opts.timeout = std::chrono::milliseconds(cfg.timeout_ms);
    opts.retry.max_retries = cfg.max_retries;
    opts.max_in_flight = cfg.max_in_flight;
    return std::make_shared<HttpJsonClient>(opts);
  };
  if (http_generator) chat_client_ = make_client();
  if (cfg.embedder_backend == Backend::http) {
    embedder_ = std::make_unique<HttpEmbedder>(make_client(), cfg.embedder_model);
  } else {
    embedder_ = std::make_unique<HashingEmbedder>();
  }
}

std::unique_ptr<ResponseGenerator> Backends::generator_for(const MockOracleSpec& mock_spec) const {
  if (cfg_.generator_backend == Backend::mock) return std::make_unique<MockOracle>(mock_spec);
  GenerationParams params;
  params.model = cfg_.generator_model;
  params.temperature = cfg_.temperature;
  params.max_tokens = cfg_.max_tokens;
  params.seed = cfg_.generation_seed;
  return std::make_unique<HttpChatGenerator>(chat_client_, params);
}

namespace {

struct QuestionOutcome {
  std::string trace_text;
  bool ok = false;
  std::string failure_stage;
  std::string failure_message;
  bool probe_fallback = false;
  bool pool_exhausted = false;
  std::size_t generation_errors = 0;
};

struct RunContext {
  const PipelineConfig& cfg;
  Backends& backends;
  std::span<const Passage> pool;
  bool extend = false;
  PromptTemplate qa_template;
  PromptTemplate probe_template;
};

QuestionOutcome process_question(const QAInstance& original, RunContext& run) {
  QuestionOutcome out;
  const PipelineConfig& cfg = run.cfg;
  std::string stage = "extend";
  try {
    QAInstance inst = original;
    std::vector<std::string> warnings;
    if (run.extend) {
      inst = extend_context(original, run.pool, cfg.extend_min_tokens, cfg.extend_max_tokens,
                            cfg.seed ^ fnv1a64(original.id));
      if (inst.meta.contains(kExtendStatusKey)) {
        out.pool_exhausted = true;
        warnings.push_back("pool_exhausted");
      }
    }

    stage = "chunk";
    const auto chunks = split_chunks(context_text(inst), cfg.chunk_budget);
    const auto gt = ground_truth_chunk_ids(chunks, inst.gold_answers);

    MockOracleSpec mock;
    mock.evidence_chunk_ids = gt;
    mock.gold_answer = inst.gold_answers.front();
    mock.success_rule = cfg.mock_success_rule;
    mock.theta = cfg.mock_theta;
    const auto fail_probe = inst.meta.find(kMockFailProbeKey);
    mock.fail_probe = fail_probe != inst.meta.end() && fail_probe->second == "true";
    auto generator = run.backends.generator_for(mock);

    stage = "probe";
    std::vector<double> init_mu;
    try {
      const ProbeTrace probe = generate_probe(inst, *generator, run.probe_template);
      init_mu = rescale(init_rewards(chunks, probe, run.backends.embedder(), cfg.embed_batch_size),
                        cfg.init_rescale);
    } catch (const std::exception& e) {
      spdlog::warn("question {}: probe initialization failed, cold start: {}", inst.id, e.what());
      init_mu.assign(chunks.size(), 0.0);
      out.probe_fallback = true;
      warnings.push_back(std::string("probe_fallback: ") + e.what());
    }

    stage = "rollout";
    RolloutConfig rc;
    rc.rounds = cfg.rounds;
    rc.bandit = {cfg.alpha, cfg.epsilon, cfg.k, cfg.mu_update_mode};
    rc.strategy = cfg.reward_strategy;
    rc.record_snapshots = cfg.record_snapshots;
    rc.prompt = run.qa_template;
    RolloutTrace trace = run_rollouts(inst, chunks, init_mu, *generator, rc);
    trace.config = to_json(cfg);
    trace.warnings = std::move(warnings);
    for (const auto& r : trace.records) out.generation_errors += r.flagged() ? 1 : 0;

    std::ostringstream buf;
    write_trace(buf, trace);
    out.trace_text = buf.str();
    out.ok = true;
  } catch (const std::exception& e) {
    spdlog::error("question {} failed during {}: {}", original.id, stage, e.what());
    out.failure_stage = stage;
    out.failure_message = e.what();
  }
  return out;
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  out << text;
  if (!out) throw std::runtime_error("write to " + path + " failed");
}

}  // namespace

RolloutRunSummary cmd_rollout(const PipelineConfig& cfg, const ApiEnvironment& env,
                              const RolloutPaths& paths) {
  cfg.validate();
  Backends backends(cfg, env);
  RunContext run{cfg, backends, {}, false, PromptTemplate::default_qa(),
                 PromptTemplate::default_probe()};
  if (!cfg.prompt_template.empty()) run.qa_template = PromptTemplate::from_file(cfg.prompt_template);
  if (!cfg.probe_template.empty()) {
    run.probe_template = PromptTemplate::from_file(cfg.probe_template);
  }

  std::vector<Passage> pool;
  if (!paths.pool.empty()) {
    pool = load_passages(paths.pool);
    run.pool = pool;
    run.extend = true;
  }

  RolloutRunSummary summary;
  LoadResult data = load_dataset(paths.input);
  for (const auto& e : data.errors) spdlog::error("{}: {}", paths.input, e.what());
  summary.dataset_errors = data.errors.size();
  summary.questions = data.instances.size();

  std::vector<QuestionOutcome> outcomes(data.instances.size());
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> workers;
    const std::size_t n_workers = std::min(cfg.workers, std::max<std::size_t>(outcomes.size(), 1));
    for (std::size_t w = 0; w < n_workers; ++w) {
      workers.emplace_back([&] {
        for (std::size_t i = next++; i < outcomes.size(); i = next++) {
          outcomes[i] = process_question(data.instances[i], run);
        }
      });
    }
  }

  ordered_json failures = ordered_json::array();
  {
    std::ofstream trace_out(paths.trace, std::ios::binary | std::ios::trunc);
    if (!trace_out) throw std::runtime_error("cannot open " + paths.trace + " for writing");
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
      const auto& o = outcomes[i];
      summary.probe_fallbacks += o.probe_fallback ? 1 : 0;
      summary.pool_exhausted += o.pool_exhausted ? 1 : 0;
      summary.generation_errors += o.generation_errors;
      if (!o.ok) {
        ++summary.failed_questions;
        failures.push_back({{"question_id", data.instances[i].id},
                            {"stage", o.failure_stage},
                            {"message", o.failure_message}});
        continue;
      }
      trace_out << o.trace_text;
      ++summary.traces_written;
    }
    if (!trace_out.flush()) throw std::runtime_error("write to " + paths.trace + " failed");
  }

  ordered_json manifest;
  manifest["config_hash"] = config_hash(cfg);
  manifest["config"] = to_json(cfg);
  manifest["input"] = paths.input;
  manifest["pool"] = paths.pool.empty() ? ordered_json(nullptr) : ordered_json(paths.pool);
  manifest["trace"] = paths.trace;
  manifest["counts"] = {{"questions", summary.questions},
                        {"traces_written", summary.traces_written},
                        {"failed_questions", summary.failed_questions},
                        {"probe_fallbacks", summary.probe_fallbacks},
                        {"generation_errors", summary.generation_errors},
                        {"dataset_errors", summary.dataset_errors},
                        {"pool_exhausted", summary.pool_exhausted}};
  manifest["failures"] = std::move(failures);
  write_text_file(paths.manifest.empty() ? paths.trace + ".manifest.json" : paths.manifest,
                  manifest.dump(2) + "\n");
  return summary;
}

PairsRunSummary cmd_pairs(const std::string& traces_path, const std::string& output_path,
                          std::optional<RewardStrategy> strategy) {
  auto traces = read_traces_file(traces_path);
  PairsRunSummary summary;
  summary.traces = traces.size();
  std::vector<PreferencePair> pairs;
  for (auto& trace : traces) {
    if (strategy) rescore(trace, *strategy);
    if (auto pair = build_pair(trace)) {
      pairs.push_back(std::move(*pair));
    } else {
      ++summary.skipped;
    }
  }
  summary.pairs = emit_pairs(pairs, output_path);
  return summary;
}

void cmd_analyze(const PipelineConfig& cfg, const ApiEnvironment& env,
                 const std::string& traces_path, const std::string& report_path) {
  cfg.validate();
  const auto traces = read_traces_file(traces_path);
  Backends backends(cfg, env, false);
  const auto report = analysis_report(traces, backends.embedder(), cfg.subem_target);
  write_text_file(report_path, report.dump(2) + "\n");
}

EvalSummary cmd_eval(const std::string& predictions_path, const std::string& gold_path,
                     bool extract) {
  auto read_lines = [](const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DatasetError(0, "cannot open " + path);
    std::vector<std::pair<std::size_t, nlohmann::json>> rows;
    std::string text;
    std::size_t line_no = 0;
    while (std::getline(in, text)) {
      ++line_no;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        rows.emplace_back(line_no, nlohmann::json::parse(text));
      } catch (const nlohmann::json::parse_error& e) {
        throw DatasetError(line_no, path + ": invalid JSON: " + e.what());
      }
    }
    return rows;
  };

  std::map<std::string, std::string> predictions;
  for (const auto& [line, row] : read_lines(predictions_path)) {
    try {
      predictions[row.at("id").get<std::string>()] = row.at("prediction").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(line, predictions_path + ": " + e.what());
    }
  }

  EvalSummary summary;
  double em_sum = 0.0;
  double f1_sum = 0.0;
  for (const auto& [line, row] : read_lines(gold_path)) {
    std::string id;
    std::vector<std::string> golds;
    try {
      id = row.at("id").get<std::string>();
      golds = row.at("answers").get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(line, gold_path + ": " + e.what());
    }
    if (golds.empty()) throw DatasetError(line, gold_path + ": `answers` is empty");
    std::string pred;
    if (const auto it = predictions.find(id); it != predictions.end()) {
      pred = extract ? extract_answer(it->second) : it->second;
    } else {
      ++summary.missing_predictions;
      spdlog::warn("no prediction for {}; scored as empty", id);
    }
    em_sum += sub_em(pred, golds);
    f1_sum += token_f1(pred, golds);
    ++summary.count;
  }
  if (summary.count > 0) {
    summary.sub_em = 100.0 * em_sum / static_cast<double>(summary.count);
    summary.f1 = 100.0 * f1_sum / static_cast<double>(summary.count);
  }
  return summary;
}

}  // namespace longmab
