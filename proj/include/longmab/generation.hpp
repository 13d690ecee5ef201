#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "longmab/http_client.hpp"

namespace longmab {

struct GenerationParams {
  std::string model;
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
};

enum class RequestPurpose { answer, probe };

struct GenerationRequest {
  std::string prompt;
  /// Arms behind the prompt, passed alongside the text so test oracles do
  /// not need to parse it. Empty for probe requests.
  std::vector<std::size_t> selected_chunk_ids;
  RequestPurpose purpose = RequestPurpose::answer;
};

class ResponseGenerator {
 public:
  virtual ~ResponseGenerator() = default;
  virtual std::string generate(const GenerationRequest& request) = 0;
  virtual std::string id() const = 0;
};

enum class SuccessRule { all_evidence_required, any_evidence, fraction_threshold };

std::string_view to_string(SuccessRule rule);
SuccessRule parse_success_rule(std::string_view name);

struct MockOracleSpec {
  std::set<std::size_t> evidence_chunk_ids;
  std::string gold_answer;
  SuccessRule success_rule = SuccessRule::all_evidence_required;
  /// Minimum evidence fraction for fraction_threshold.
  double theta = 0.5;
  /// Answer probe requests with an empty string.
  bool fail_probe = false;
};

/// Deterministic stand-in for the LLM: answers correctly exactly when the
/// selected arms satisfy the success rule. With no evidence arms it never
/// answers correctly.
class MockOracle final : public ResponseGenerator {
 public:
  explicit MockOracle(MockOracleSpec spec) : spec_(std::move(spec)) {}

  std::string generate(const GenerationRequest& request) override;
  std::string id() const override { return "mock-oracle"; }

  bool satisfied(const std::vector<std::size_t>& selected) const;
  const MockOracleSpec& spec() const { return spec_; }

  static std::string success_response(std::string_view gold);
  static std::string failure_response();

 private:
  MockOracleSpec spec_;
};

/// OpenAI-compatible chat completions backend.
class HttpChatGenerator final : public ResponseGenerator {
 public:
  HttpChatGenerator(std::shared_ptr<HttpJsonClient> client, GenerationParams params);

  std::string generate(const GenerationRequest& request) override;
  std::string id() const override { return "http:" + params_.model; }

 private:
  std::shared_ptr<HttpJsonClient> client_;
  GenerationParams params_;
};

}  // namespace longmab
