#include "longmab/rollout.hpp"

#include <fstream>

#include <spdlog/spdlog.h>

#include "longmab/errors.hpp"

namespace longmab {

using nlohmann::ordered_json;

nlohmann::ordered_json rollout_config_echo(const RolloutConfig& cfg) {
  ordered_json echo;
  echo["T"] = cfg.rounds;
  echo["K"] = cfg.bandit.k;
  echo["alpha"] = cfg.bandit.alpha;
  echo["epsilon"] = cfg.bandit.epsilon;
  echo["reward_strategy"] = to_string(cfg.strategy);
  echo["mu_update_mode"] = to_string(cfg.bandit.mode);
  echo["record_snapshots"] = cfg.record_snapshots;
  return echo;
}

RolloutTrace run_rollouts(const QAInstance& inst, std::span<const Chunk> chunks,
                          std::span<const double> init_mu, ResponseGenerator& gen,
                          const RolloutConfig& cfg) {
  if (chunks.empty()) throw std::invalid_argument("run_rollouts: no chunks");
  if (init_mu.size() != chunks.size()) {
    throw std::invalid_argument("run_rollouts: init_mu has " + std::to_string(init_mu.size()) +
                                " entries for " + std::to_string(chunks.size()) + " chunks");
  }
  if (cfg.rounds < 2) throw std::invalid_argument("run_rollouts: T must be >= 2");
  if (inst.gold_answers.empty()) throw std::invalid_argument("run_rollouts: no gold answers");

  RolloutTrace trace;
  trace.question_id = inst.id;
  trace.question = inst.question;
  trace.gold_answers = inst.gold_answers;
  trace.context = context_text(inst);
  trace.n_chunks = chunks.size();
  trace.gt_chunk_ids = ground_truth_chunk_ids(chunks, inst.gold_answers);
  trace.init_mu.assign(init_mu.begin(), init_mu.end());
  trace.config = rollout_config_echo(cfg);

  BanditState state = init_state(init_mu, cfg.bandit);
  std::vector<Chunk> picked;
  for (std::size_t step = 1; step <= cfg.rounds; ++step) {
    const auto selected = select_top_k(ucb_scores(state), cfg.bandit.k);

    picked.clear();
    for (std::size_t idx : selected) picked.push_back(chunks[idx]);

    RolloutRecord record;
    record.question_id = inst.id;
    record.step = state.t;
    record.selected_chunk_ids = selected;

    GenerationRequest request{assemble_prompt(picked, inst.question, cfg.prompt), selected,
                              RequestPurpose::answer};
    try {
      record.response = gen.generate(request);
      record.answer = extract_answer(record.response);
      record.reward = response_reward(record.response, inst.gold_answers, cfg.strategy);
    } catch (const RequestError& e) {
      spdlog::warn("question {} step {}: {}", inst.id, record.step, e.what());
      record.flags.emplace_back(kGenerationErrorFlag);
    } catch (const ProtocolError& e) {
      spdlog::warn("question {} step {}: {}", inst.id, record.step, e.what());
      record.flags.emplace_back(kGenerationErrorFlag);
    }

    update(state, selected, record.reward);
    if (cfg.record_snapshots) {
      record.mu_snapshot = state.mu();
      record.n_snapshot = state.counts();
    }
    trace.records.push_back(std::move(record));
  }
  return trace;
}

void write_trace(std::ostream& out, const RolloutTrace& trace) {
  ordered_json header;
  header["type"] = "header";
  header["question_id"] = trace.question_id;
  header["question"] = trace.question;
  header["answers"] = trace.gold_answers;
  header["n_chunks"] = trace.n_chunks;
  header["gt_chunk_ids"] = trace.gt_chunk_ids;
  header["init_mu"] = trace.init_mu;
  header["warnings"] = trace.warnings;
  header["config"] = trace.config;
  header["context"] = trace.context;
  out << header.dump() << '\n';

  for (const auto& r : trace.records) {
    ordered_json line;
    line["question_id"] = r.question_id;
    line["step"] = r.step;
    line["selected_chunk_ids"] = r.selected_chunk_ids;
    line["response"] = r.response;
    line["answer"] = r.answer;
    line["reward"] = r.reward;
    line["flags"] = r.flags;
    if (r.mu_snapshot) line["mu"] = *r.mu_snapshot;
    if (r.n_snapshot) line["n"] = *r.n_snapshot;
    out << line.dump() << '\n';
  }
}

std::vector<RolloutTrace> read_traces(std::istream& in) {
  std::vector<RolloutTrace> traces;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(in, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto obj = ordered_json::parse(text);
      if (obj.value("type", "") == "header") {
        RolloutTrace trace;
        trace.question_id = obj.at("question_id").get<std::string>();
        trace.question = obj.at("question").get<std::string>();
        trace.gold_answers = obj.at("answers").get<std::vector<std::string>>();
        trace.n_chunks = obj.at("n_chunks").get<std::size_t>();
        trace.gt_chunk_ids = obj.at("gt_chunk_ids").get<std::set<std::size_t>>();
        trace.init_mu = obj.value("init_mu", std::vector<double>{});
        trace.warnings = obj.value("warnings", std::vector<std::string>{});
        trace.config = obj.at("config");
        trace.context = obj.at("context").get<std::string>();
        traces.push_back(std::move(trace));
        continue;
      }
      if (traces.empty()) throw DatasetError(line_no, "step record before any header");
      auto& trace = traces.back();
      RolloutRecord r;
      r.question_id = obj.at("question_id").get<std::string>();
      r.step = obj.at("step").get<std::int64_t>();
      r.selected_chunk_ids = obj.at("selected_chunk_ids").get<std::vector<std::size_t>>();
      r.response = obj.at("response").get<std::string>();
      r.answer = obj.at("answer").get<std::string>();
      r.reward = obj.at("reward").get<double>();
      r.flags = obj.value("flags", std::vector<std::string>{});
      if (obj.contains("mu")) r.mu_snapshot = obj.at("mu").get<std::vector<double>>();
      if (obj.contains("n")) r.n_snapshot = obj.at("n").get<std::vector<std::int64_t>>();
      if (r.question_id != trace.question_id) {
        throw DatasetError(line_no, "step for `" + r.question_id + "` under header `" +
                                        trace.question_id + "`");
      }
      if (r.step != static_cast<std::int64_t>(trace.records.size()) + 1) {
        throw DatasetError(line_no, "steps out of order");
      }
      trace.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(line_no, std::string("bad trace record: ") + e.what());
    }
  }
  return traces;
}

std::vector<RolloutTrace> read_traces_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DatasetError(0, "cannot open trace file: " + path);
  return read_traces(in);
}

}  // namespace longmab
