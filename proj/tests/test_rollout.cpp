#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "longmab/errors.hpp"
#include "longmab/rollout.hpp"

using namespace longmab;

namespace {

QAInstance lisbon(std::size_t n_passages) {
  QAInstance inst;
  inst.id = "lisbon";
  inst.question = "What is the capital of Portugal?";
  inst.gold_answers = {"Lisbon"};
  for (std::size_t i = 0; i < n_passages; ++i) {
    inst.passages.push_back({"", "passage number " + std::to_string(i), false});
  }
  return inst;
}

std::vector<Chunk> chunks_of(const QAInstance& inst) {
  std::vector<Chunk> out;
  for (std::size_t i = 0; i < inst.passages.size(); ++i) {
    out.push_back({i, inst.passages[i].text, 3});
  }
  return out;
}

// Straight transcription of the bandit loop used as the reference trajectory.
struct Reference {
  std::vector<std::vector<std::size_t>> selections;
  std::vector<double> rewards;
  std::vector<double> final_mu;
};

Reference simulate(std::vector<double> mu, const std::set<std::size_t>& evidence, std::size_t k,
                   std::size_t rounds, double alpha, double eps) {
  Reference ref;
  std::vector<double> n(mu.size(), 0.0);
  for (std::size_t t = 1; t <= rounds; ++t) {
    std::vector<std::pair<double, std::size_t>> ranked;
    for (std::size_t i = 0; i < mu.size(); ++i) {
      ranked.emplace_back(-(mu[i] + alpha * std::sqrt(2.0 * std::log(double(t)) / (n[i] + eps))), i);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<std::size_t> sel;
    for (std::size_t j = 0; j < std::min(k, mu.size()); ++j) sel.push_back(ranked[j].second);
    std::sort(sel.begin(), sel.end());
    const bool ok = std::includes(sel.begin(), sel.end(), evidence.begin(), evidence.end());
    const double r = ok ? 1.0 : 0.0;
    for (auto i : sel) {
      n[i] += 1.0;
      mu[i] = (mu[i] * double(t - 1) + r) / double(t);
    }
    ref.selections.push_back(sel);
    ref.rewards.push_back(r);
  }
  ref.final_mu = mu;
  return ref;
}

class FlakyGenerator final : public ResponseGenerator {
 public:
  explicit FlakyGenerator(MockOracle inner) : inner_(std::move(inner)) {}
  std::string generate(const GenerationRequest& r) override {
    if (++calls_ == 3) throw RequestError("timeout", 5, 0);
    return inner_.generate(r);
  }
  std::string id() const override { return "flaky"; }

 private:
  MockOracle inner_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("run_rollouts follows the reference trajectory") {
  const auto inst = lisbon(6);
  const auto chunks = chunks_of(inst);
  const std::vector<double> init{0.9, 0.8, 0.3, 0.2, 0.1, 0.0};  // evidence ranked top-2
  MockOracle mock({{0, 1}, "Lisbon", SuccessRule::all_evidence_required, 0.5, false});
  RolloutConfig cfg;
  cfg.rounds = 10;
  cfg.bandit = {1.0, 1e-6, 2, MuUpdateMode::verbatim_global_t};
  const auto trace = run_rollouts(inst, chunks, init, mock, cfg);

  const auto ref = simulate(init, {0, 1}, 2, 10, 1.0, 1e-6);
  REQUIRE(trace.records.size() == 10);
  for (std::size_t s = 0; s < 10; ++s) {
    CHECK(trace.records[s].step == static_cast<std::int64_t>(s + 1));
    CHECK(trace.records[s].selected_chunk_ids == ref.selections[s]);
    CHECK(trace.records[s].reward == ref.rewards[s]);
  }
  CHECK(trace.records[0].selected_chunk_ids == std::vector<std::size_t>{0, 1});
  CHECK(trace.records[0].reward == 1.0);

  const auto& mu = *trace.records.back().mu_snapshot;
  CHECK(mu == ref.final_mu);
  auto order = select_top_k(mu, 2);
  CHECK(order == std::vector<std::size_t>{0, 1});
}

TEST_CASE("replaying recorded rewards reproduces every selection") {
  const auto inst = lisbon(9);
  const auto chunks = chunks_of(inst);
  const std::vector<double> init{0.1, 0.5, 0.2, 0.9, 0.0, 0.4, 0.3, 0.8, 0.6};
  MockOracle mock({{2, 7}, "Lisbon", SuccessRule::fraction_threshold, 0.5, false});
  RolloutConfig cfg;
  cfg.rounds = 25;
  cfg.bandit = {0.6, 1e-6, 3, MuUpdateMode::verbatim_global_t};
  const auto trace = run_rollouts(inst, chunks, init, mock, cfg);

  auto state = init_state(init, cfg.bandit);
  for (const auto& r : trace.records) {
    const auto sel = select_top_k(ucb_scores(state), cfg.bandit.k);
    CHECK(sel == r.selected_chunk_ids);
    update(state, sel, r.reward);
    CHECK(state.mu() == *r.mu_snapshot);
    CHECK(state.counts() == *r.n_snapshot);
    const double success = response_reward(MockOracle::success_response("Lisbon"),
                                           inst.gold_answers, cfg.strategy);
    CHECK((r.reward == 0.0 || r.reward == success));
    CHECK(r.reward == response_reward(r.response, inst.gold_answers, cfg.strategy));
  }
}

TEST_CASE("K larger than the chunk count selects everything") {
  const auto inst = lisbon(3);
  MockOracle mock({{0}, "Lisbon", SuccessRule::all_evidence_required, 0.5, false});
  RolloutConfig cfg;
  cfg.rounds = 4;
  cfg.bandit.k = 4;
  const auto trace = run_rollouts(inst, chunks_of(inst), std::vector<double>(3, 0.0), mock, cfg);
  for (const auto& r : trace.records) CHECK(r.selected_chunk_ids == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("generation failure is flagged and the loop continues") {
  const auto inst = lisbon(4);
  FlakyGenerator gen(MockOracle({{0}, "Lisbon", SuccessRule::any_evidence, 0.5, false}));
  RolloutConfig cfg;
  cfg.rounds = 5;
  cfg.bandit.k = 2;
  const auto trace = run_rollouts(inst, chunks_of(inst), std::vector<double>(4, 0.0), gen, cfg);
  REQUIRE(trace.records.size() == 5);
  CHECK(trace.records[2].flags == std::vector<std::string>{kGenerationErrorFlag});
  CHECK(trace.records[2].reward == 0.0);
  CHECK(trace.records[2].response.empty());
  CHECK_FALSE(trace.records[3].flagged());
}

TEST_CASE("preconditions") {
  const auto inst = lisbon(3);
  MockOracle mock({{0}, "Lisbon", SuccessRule::any_evidence, 0.5, false});
  RolloutConfig cfg;
  CHECK_THROWS(run_rollouts(inst, chunks_of(inst), std::vector<double>(2, 0.0), mock, cfg));
  cfg.rounds = 1;
  CHECK_THROWS(run_rollouts(inst, chunks_of(inst), std::vector<double>(3, 0.0), mock, cfg));
  cfg.rounds = 2;
  CHECK_THROWS(run_rollouts(inst, std::vector<Chunk>{}, std::vector<double>{}, mock, cfg));
}

TEST_CASE("trace serialization round-trips") {
  const auto inst = lisbon(5);
  MockOracle mock({{1, 3}, "Lisbon", SuccessRule::all_evidence_required, 0.5, false});
  RolloutConfig cfg;
  cfg.rounds = 6;
  cfg.bandit.k = 2;
  auto trace = run_rollouts(inst, chunks_of(inst), std::vector<double>{0.3, 0.1, 0.7, 0.2, 0.5},
                            mock, cfg);
  trace.warnings = {"probe_fallback: test"};

  std::stringstream buf;
  write_trace(buf, trace);
  write_trace(buf, trace);
  const std::string first = buf.str();
  const auto back = read_traces(buf);
  REQUIRE(back.size() == 2);
  CHECK(back[0].question_id == trace.question_id);
  CHECK(back[0].context == trace.context);
  CHECK(back[0].gold_answers == trace.gold_answers);
  CHECK(back[0].gt_chunk_ids == trace.gt_chunk_ids);
  CHECK(back[0].warnings == trace.warnings);
  CHECK(back[0].config == trace.config);
  REQUIRE(back[0].records.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(back[0].records[i].reward == trace.records[i].reward);
    CHECK(back[0].records[i].selected_chunk_ids == trace.records[i].selected_chunk_ids);
    CHECK(back[0].records[i].mu_snapshot == trace.records[i].mu_snapshot);
  }
  std::stringstream again;
  write_trace(again, back[0]);
  write_trace(again, back[1]);
  CHECK(again.str() == first);

  std::istringstream orphan(R"({"question_id":"x","step":1})");
  CHECK_THROWS_AS(read_traces(orphan), DatasetError);
}
