#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "longmab/corpus.hpp"
#include "longmab/errors.hpp"
#include "longmab/hash.hpp"
#include "longmab/pipeline.hpp"

namespace longmab {

namespace {

void use_stderr_logger() {
  static const bool installed = [] {
    auto logger = spdlog::stderr_color_mt("longmab");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    return true;
  }();
  (void)installed;
}

template <typename Enum, typename Parse>
void add_enum_option(CLI::App& app, const std::string& name, Enum& target, Parse parse,
                     const std::string& help) {
  app.add_option_function<std::string>(
         name, [&target, parse](const std::string& v) { target = parse(v); }, help)
      ->default_str(std::string(to_string(target)));
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  use_stderr_logger();

  PipelineConfig cfg;
  CLI::App app{"Bandit-guided chunk sampling and preference-pair construction"};
  app.set_config("--config", "", "Key-value config file; command-line flags take precedence");
  app.fallthrough();
  app.require_subcommand(1);

  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")
      ->capture_default_str();

  app.add_option("--chunk-budget", cfg.chunk_budget, "Tokens per chunk")->capture_default_str();
  app.add_option("-T,--rounds", cfg.rounds, "Rollout steps per question")->capture_default_str();
  app.add_option("-K,--top-k", cfg.k, "Chunks selected per rollout")->capture_default_str();
  app.add_option("--alpha", cfg.alpha, "UCB exploration weight")->capture_default_str();
  app.add_option("--epsilon", cfg.epsilon, "UCB division guard")->capture_default_str();
  add_enum_option(app, "--reward-strategy", cfg.reward_strategy, parse_reward_strategy,
                  "full_response|answer_based");
  add_enum_option(app, "--mu-update-mode", cfg.mu_update_mode, parse_mu_update_mode,
                  "verbatim_global_t|per_arm_mean");
  add_enum_option(app, "--init-rescale", cfg.init_rescale, parse_init_rescale, "none|minmax");
  app.add_option("--record-snapshots", cfg.record_snapshots, "Store mu/n per step")
      ->capture_default_str();

  add_enum_option(app, "--generator-backend", cfg.generator_backend, parse_backend, "mock|http");
  app.add_option("--generator-model", cfg.generator_model)->capture_default_str();
  app.add_option("--temperature", cfg.temperature)->capture_default_str();
  app.add_option("--max-tokens", cfg.max_tokens)->capture_default_str();
  app.add_option_function<std::int64_t>(
      "--generation-seed", [&](std::int64_t v) { cfg.generation_seed = v; },
      "Seed forwarded to the chat endpoint");
  app.add_option("--timeout-ms", cfg.timeout_ms)->capture_default_str();
  app.add_option("--max-retries", cfg.max_retries)->capture_default_str();

  add_enum_option(app, "--embedder-backend", cfg.embedder_backend, parse_backend, "mock|http");
  app.add_option("--embedder-model", cfg.embedder_model)->capture_default_str();
  app.add_option("--embed-batch-size", cfg.embed_batch_size)->capture_default_str();

  app.add_option("--workers", cfg.workers, "Questions processed concurrently")
      ->capture_default_str();
  app.add_option("--max-in-flight", cfg.max_in_flight, "Outstanding requests per client")
      ->capture_default_str();
  app.add_option("--seed", cfg.seed, "Seed for distractor sampling and placement")
      ->capture_default_str();
  app.add_option("--extend-min-tokens", cfg.extend_min_tokens)->capture_default_str();
  app.add_option("--extend-max-tokens", cfg.extend_max_tokens)->capture_default_str();
  app.add_option("--prompt-template", cfg.prompt_template, "QA template file")
      ->check(CLI::ExistingFile);
  app.add_option("--probe-template", cfg.probe_template, "Evidence-probe template file")
      ->check(CLI::ExistingFile);
  add_enum_option(app, "--mock-success-rule", cfg.mock_success_rule, parse_success_rule,
                  "all_evidence_required|any_evidence|fraction_threshold");
  app.add_option("--mock-theta", cfg.mock_theta)->capture_default_str();
  add_enum_option(app, "--subem-target", cfg.subem_target, parse_subem_target,
                  "full_response|extracted_answer");

  RolloutPaths rollout_paths;
  auto* rollout = app.add_subcommand("rollout", "Run bandit rollouts and write traces");
  rollout->add_option("--input", rollout_paths.input, "QA records (JSONL)")
      ->required()
      ->check(CLI::ExistingFile);
  rollout->add_option("--pool", rollout_paths.pool, "Distractor passages (JSONL)")
      ->check(CLI::ExistingFile);
  rollout->add_option("--output", rollout_paths.trace, "Trace file")->required();
  rollout->add_option("--manifest", rollout_paths.manifest, "Run manifest path");

  std::string pairs_traces, pairs_out;
  bool rescore_pairs = false;
  auto* pairs = app.add_subcommand("pairs", "Build preference pairs from traces");
  pairs->add_option("--traces", pairs_traces)->required()->check(CLI::ExistingFile);
  pairs->add_option("--output", pairs_out)->required();
  pairs->add_flag("--rescore", rescore_pairs,
                  "Recompute rewards with --reward-strategy before pairing");

  std::string analyze_traces, analyze_out;
  auto* analyze = app.add_subcommand("analyze", "Recall, quality and diversity report");
  analyze->add_option("--traces", analyze_traces)->required()->check(CLI::ExistingFile);
  analyze->add_option("--output", analyze_out)->required();

  std::string eval_pred, eval_gold;
  bool eval_extract = false;
  auto* eval = app.add_subcommand("eval", "SubEM / F1 over predictions");
  eval->add_option("--predictions", eval_pred, "JSONL {id, prediction}")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--gold", eval_gold, "JSONL {id, answers}")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_flag("--extract-answer", eval_extract, "Score the text after the last Answer:");

  std::string chunk_input, chunk_pool;
  auto* chunk = app.add_subcommand("chunk", "Print chunk boundaries per question");
  chunk->add_option("--input", chunk_input)->required()->check(CLI::ExistingFile);
  chunk->add_option("--pool", chunk_pool)->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 2;
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    const ApiEnvironment env = ApiEnvironment::from_env();
    if (*rollout) {
      const auto s = cmd_rollout(cfg, env, rollout_paths);
      spdlog::info("{} questions, {} traces, {} failed, {} probe fallbacks, {} generation errors",
                   s.questions, s.traces_written, s.failed_questions, s.probe_fallbacks,
                   s.generation_errors);
      return s.questions > 0 && s.traces_written == 0 ? 1 : 0;
    }
    if (*pairs) {
      const auto s = cmd_pairs(pairs_traces, pairs_out,
                               rescore_pairs ? std::optional(cfg.reward_strategy) : std::nullopt);
      spdlog::info("{} traces, {} pairs, {} skipped", s.traces, s.pairs, s.skipped);
      return 0;
    }
    if (*analyze) {
      cmd_analyze(cfg, env, analyze_traces, analyze_out);
      return 0;
    }
    if (*eval) {
      const auto s = cmd_eval(eval_pred, eval_gold, eval_extract);
      std::cout << fmt::format("count\t{}\nmissing\t{}\nSubEM\t{:.2f}\nF1\t{:.2f}\n", s.count,
                               s.missing_predictions, s.sub_em, s.f1);
      return 0;
    }
    if (*chunk) {
      cfg.validate();
      auto data = load_dataset(chunk_input);
      std::vector<Passage> pool;
      if (!chunk_pool.empty()) pool = load_passages(chunk_pool);
      for (const auto& inst : data.instances) {
        const QAInstance full =
            pool.empty() ? inst
                         : extend_context(inst, pool, cfg.extend_min_tokens,
                                          cfg.extend_max_tokens, cfg.seed ^ fnv1a64(inst.id));
        const std::string context = context_text(full);
        const auto chunks = split_chunks(context, cfg.chunk_budget);
        const auto gt = ground_truth_chunk_ids(chunks, full.gold_answers);
        std::size_t offset = 0;
        for (const auto& c : chunks) {
          nlohmann::ordered_json row;
          row["question_id"] = inst.id;
          row["index"] = c.index;
          row["token_count"] = c.token_count;
          row["begin"] = offset;
          row["end"] = offset + c.text.size();
          row["ground_truth"] = gt.contains(c.index);
          std::cout << row.dump() << "\n";
          offset += c.text.size();
        }
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    spdlog::error("config error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}

}  // namespace longmab
