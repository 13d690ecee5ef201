#include <doctest.h>

#include <cmath>

#include "longmab/analysis.hpp"
#include "test_support.hpp"

using namespace longmab;
using longmab::testing::TableEmbedder;

namespace {

RolloutTrace trace(const std::string& id, std::set<std::size_t> gt,
                   const std::vector<std::vector<std::size_t>>& selections,
                   const std::vector<double>& rewards) {
  RolloutTrace t;
  t.question_id = id;
  t.gold_answers = {"paris"};
  t.gt_chunk_ids = std::move(gt);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    RolloutRecord r;
    r.question_id = id;
    r.step = static_cast<std::int64_t>(i + 1);
    r.selected_chunk_ids = selections[i];
    r.reward = rewards[i];
    r.response = rewards[i] > 0 ? "Answer: Paris" : "Answer: unknown";
    t.records.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("gt_recall_at_step") {
  RolloutRecord r;
  r.selected_chunk_ids = {1, 3, 4, 5};
  CHECK(*gt_recall_at_step(r, {0, 1}) == 0.5);
  CHECK(*gt_recall_at_step(r, {3, 5}) == 1.0);
  CHECK_FALSE(gt_recall_at_step(r, {}));
}

TEST_CASE("quality_trend") {
  SUBCASE("single trace with perfect rewards") {
    const std::vector<RolloutTrace> ts{trace("a", {0}, {{0}, {1}, {0}}, {1, 1, 1})};
    const auto rep = quality_trend(ts);
    CHECK(rep.per_step_reward == std::vector<double>{1, 1, 1});
    CHECK(rep.per_step_subem == std::vector<double>{1, 1, 1});
    CHECK(*rep.per_step_recall[1] == 0.0);
  }
  SUBCASE("averages over questions") {
    const std::vector<RolloutTrace> ts{trace("a", {0}, {{0}, {1}}, {1, 0}),
                                       trace("b", {1}, {{0}, {1}}, {0, 1})};
    const auto rep = quality_trend(ts);
    CHECK(rep.per_step_reward == std::vector<double>{0.5, 0.5});
    CHECK(*rep.per_step_recall[0] == 0.5);
    CHECK(rep.question_count == 2);
  }
  SUBCASE("questions without ground truth are excluded from recall") {
    const std::vector<RolloutTrace> ts{trace("a", {0}, {{0}, {0}}, {1, 1}),
                                       trace("b", {}, {{0}, {1}}, {0, 0})};
    const auto rep = quality_trend(ts);
    CHECK(*rep.per_step_recall[0] == 1.0);
    CHECK(rep.recall_question_count == 1);
    CHECK(rep.per_step_reward == std::vector<double>{0.5, 0.5});
  }
  SUBCASE("no ground truth anywhere leaves recall undefined") {
    const std::vector<RolloutTrace> ts{trace("a", {}, {{0}, {0}}, {1, 1})};
    CHECK_FALSE(quality_trend(ts).per_step_recall[0]);
  }
  SUBCASE("mismatched T") {
    const std::vector<RolloutTrace> ts{trace("a", {0}, {{0}, {0}}, {1, 1}),
                                       trace("b", {0}, {{0}}, {1})};
    CHECK_THROWS(quality_trend(ts));
  }
  SUBCASE("extracted-answer SubEM") {
    auto t = trace("a", {0}, {{0}}, {0.5});
    t.records[0].response = "Reasoning: maybe Paris. Answer: Lyon";
    const std::vector<RolloutTrace> ts{t};
    CHECK(quality_trend(ts, SubemTarget::full_response).per_step_subem[0] == 1.0);
    CHECK(quality_trend(ts, SubemTarget::extracted_answer).per_step_subem[0] == 0.0);
  }
}

TEST_CASE("diversity_stats") {
  SUBCASE("identical responses") {
    TableEmbedder emb({}, {0.3, 0.4});
    const std::vector<std::string> r{"x", "x", "x", "x"};
    const auto d = diversity_stats(r, emb);
    CHECK(d.mean_pairwise_similarity == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(d.variance_pairwise_similarity == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(d.pair_count == 6);
  }
  SUBCASE("orthogonal pair") {
    TableEmbedder emb({{"a", {1, 0}}, {"b", {0, 1}}}, {1, 1});
    const std::vector<std::string> r{"a", "b"};
    const auto d = diversity_stats(r, emb);
    CHECK(d.mean_pairwise_similarity == 0.0);
    CHECK(d.variance_pairwise_similarity == 0.0);
    CHECK(d.pair_count == 1);
  }
  SUBCASE("similarities 1, 0.5, 0.5") {
    TableEmbedder emb({{"a", {1, 0}}, {"b", {1, 0}}, {"c", {0.5, std::sqrt(3.0) / 2.0}}}, {1, 1});
    const std::vector<std::string> r{"a", "b", "c"};
    const auto d = diversity_stats(r, emb);
    CHECK(d.mean_pairwise_similarity == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(std::abs(d.variance_pairwise_similarity - 0.0556) <= 1e-4);
    CHECK(d.variance_pairwise_similarity == doctest::Approx(1.0 / 18.0).epsilon(1e-12));
  }
  TableEmbedder emb({}, {1, 0});
  CHECK_THROWS(diversity_stats(std::vector<std::string>{"a"}, emb));
  CHECK(similarity_stats(std::vector<double>{0.2, 0.2, 0.2}).variance_pairwise_similarity == doctest::Approx(0.0));
}
