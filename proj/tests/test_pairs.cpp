#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "longmab/pairs.hpp"
#include "test_support.hpp"

using namespace longmab;
using longmab::testing::TempDir;
using longmab::testing::read_file;

namespace {

RolloutTrace trace_with(const std::vector<double>& rewards) {
  RolloutTrace t;
  t.question_id = "q";
  t.question = "Q?";
  t.gold_answers = {"g"};
  t.context = "full context";
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    RolloutRecord r;
    r.question_id = "q";
    r.step = static_cast<std::int64_t>(i + 1);
    r.response = "response " + std::to_string(i + 1);
    r.reward = rewards[i];
    t.records.push_back(r);
  }
  return t;
}

}  // namespace

TEST_CASE("build_pair picks best and worst with earliest ties") {
  auto pair = build_pair(trace_with({0.2, 0.9, 0.9, 0.0}));
  REQUIRE(pair);
  CHECK(pair->chosen_step == 2);
  CHECK(pair->rejected_step == 4);
  CHECK(pair->chosen == "response 2");
  CHECK(pair->reward_chosen == 0.9);
  CHECK(pair->reward_rejected == 0.0);
  CHECK(pair->context == "full context");

  CHECK_FALSE(build_pair(trace_with({0.5, 0.5, 0.5})));
  pair = build_pair(trace_with({1.0, 0.0}));
  REQUIRE(pair);
  CHECK(pair->chosen_step == 1);
  CHECK(pair->rejected_step == 2);

  pair = build_pair(trace_with({0.0, 1.0, 0.0, 1.0}));
  CHECK(pair->chosen_step == 2);
  CHECK(pair->rejected_step == 1);
}

TEST_CASE("build_pair skips flagged records and degenerate traces") {
  auto t = trace_with({1.0, 0.0, 0.5});
  t.records[0].flags = {kGenerationErrorFlag};
  auto pair = build_pair(t);
  REQUIRE(pair);
  CHECK(pair->chosen_step == 3);
  CHECK(pair->rejected_step == 2);

  t.records[1].flags = {kGenerationErrorFlag};
  CHECK_FALSE(build_pair(t));

  auto same = trace_with({1.0, 0.0});
  same.records[1].response = same.records[0].response;
  CHECK_FALSE(build_pair(same));
}

TEST_CASE("build_pair with an instance uses the instance context") {
  QAInstance inst;
  inst.id = "q";
  inst.question = "Inst Q?";
  inst.gold_answers = {"g"};
  inst.passages = {{"T", "one", false}, {"", "two", false}};
  const auto pair = build_pair(trace_with({0.1, 0.6}), inst);
  REQUIRE(pair);
  CHECK(pair->context == "T\none\n\ntwo");
  CHECK(pair->question == "Inst Q?");
}

TEST_CASE("emit_pairs writes, round-trips and cleans up") {
  TempDir dir;
  const auto path = dir.file("pairs.jsonl");
  CHECK(emit_pairs(std::vector<PreferencePair>{}, path) == 0);
  CHECK(std::filesystem::exists(path));
  CHECK(read_file(path).empty());

  std::vector<PreferencePair> pairs;
  for (int i = 0; i < 3; ++i) {
    pairs.push_back({"id" + std::to_string(i), "ctx \"quoted\"\nline", "q?", "yes", "no",
                     0.75 + i * 0.01, 0.1 / 3.0, i + 1, i + 5});
  }
  CHECK(emit_pairs(pairs, path) == 3);
  CHECK(read_pairs(path) == pairs);

  const auto broken = dir.file("broken.jsonl");
  int produced = 0;
  CHECK_THROWS(emit_pairs(
      [&]() -> std::optional<PreferencePair> {
        if (produced == 2) throw std::runtime_error("upstream failure");
        return pairs[produced++];
      },
      broken));
  CHECK_FALSE(std::filesystem::exists(broken));
  CHECK_FALSE(std::filesystem::exists(broken + ".tmp"));

  CHECK_THROWS(emit_pairs(pairs, dir.file("no/such/dir/pairs.jsonl")));
}

TEST_CASE("dpo_loss_term") {
  for (double beta : {0.05, 0.1, 0.5}) {
    CHECK(std::abs(dpo_loss_term(0, 0, 0, 0, beta) - std::log(2.0)) <= 1e-12);
  }
  CHECK(dpo_loss_term(2.0, 0.0, -1.0, 0.0, 0.1) == doctest::Approx(0.5543552444685271).epsilon(1e-14));
  CHECK(dpo_loss_term(-500.0, 0.0, 0.0, 0.0, 0.1) == doctest::Approx(50.0).epsilon(1e-14));
  CHECK(dpo_loss_term(500.0, 0.0, 0.0, 0.0, 0.1) < 1e-21);
  CHECK(std::isfinite(dpo_loss_term(7000.0, 0.0, 0.0, 0.0, 0.1)));
  CHECK(std::isfinite(dpo_loss_term(-7000.0, 0.0, 0.0, 0.0, 0.1)));

  // Only the difference of log-ratios matters.
  CHECK(dpo_loss_term(1.0, 0.5, 0.2, 0.4, 0.3) == dpo_loss_term(3.0, 2.5, 1.2, 1.4, 0.3));
  // Swapping chosen and rejected mirrors the margin.
  const double m = 0.3 * ((1.0 - 0.5) - (0.2 - 0.4));
  CHECK(dpo_loss_term(0.2, 0.4, 1.0, 0.5, 0.3) == doctest::Approx(std::log1p(std::exp(m))));

  CHECK_THROWS(dpo_loss_term(std::nan(""), 0, 0, 0, 0.1));
  CHECK_THROWS(dpo_loss_term(0, 0, 0, 0, 0.0));
}
