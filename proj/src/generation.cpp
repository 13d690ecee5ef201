#include "longmab/generation.hpp"

#include <algorithm>

#include "longmab/errors.hpp"

namespace longmab {

std::string_view to_string(SuccessRule rule) {
  switch (rule) {
    case SuccessRule::all_evidence_required:
      return "all_evidence_required";
    case SuccessRule::any_evidence:
      return "any_evidence";
    case SuccessRule::fraction_threshold:
      return "fraction_threshold";
  }
  return "unknown";
}

SuccessRule parse_success_rule(std::string_view name) {
  if (name == "all_evidence_required") return SuccessRule::all_evidence_required;
  if (name == "any_evidence") return SuccessRule::any_evidence;
  if (name == "fraction_threshold") return SuccessRule::fraction_threshold;
  throw ConfigError("unknown mock success rule: " + std::string(name));
}

std::string MockOracle::success_response(std::string_view gold) {
  return "Reasoning: The selected passages contain the supporting evidence.\nAnswer: " +
         std::string(gold);
}

std::string MockOracle::failure_response() {
  return "Reasoning: The selected passages do not contain enough evidence.\nAnswer: unknown";
}

bool MockOracle::satisfied(const std::vector<std::size_t>& selected) const {
  if (spec_.evidence_chunk_ids.empty()) return false;
  const auto hits = static_cast<std::size_t>(
      std::count_if(spec_.evidence_chunk_ids.begin(), spec_.evidence_chunk_ids.end(),
                    [&](std::size_t id) {
                      return std::find(selected.begin(), selected.end(), id) != selected.end();
                    }));
  switch (spec_.success_rule) {
    case SuccessRule::all_evidence_required:
      return hits == spec_.evidence_chunk_ids.size();
    case SuccessRule::any_evidence:
      return hits > 0;
    case SuccessRule::fraction_threshold:
      return static_cast<double>(hits) / static_cast<double>(spec_.evidence_chunk_ids.size()) >=
             spec_.theta;
  }
  return false;
}

std::string MockOracle::generate(const GenerationRequest& request) {
  if (request.prompt.empty()) throw std::invalid_argument("generate: empty prompt");
  if (request.purpose == RequestPurpose::probe) {
    if (spec_.fail_probe) return {};
    return "Evidence: The passages state that the answer is " + spec_.gold_answer +
           ".\nAnswer: " + spec_.gold_answer;
  }
  return satisfied(request.selected_chunk_ids) ? success_response(spec_.gold_answer)
                                               : failure_response();
}

HttpChatGenerator::HttpChatGenerator(std::shared_ptr<HttpJsonClient> client,
                                     GenerationParams params)
    : client_(std::move(client)), params_(std::move(params)) {
  if (params_.max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
  if (params_.temperature < 0.0) throw ConfigError("temperature must be >= 0");
}

std::string HttpChatGenerator::generate(const GenerationRequest& request) {
  if (request.prompt.empty()) throw std::invalid_argument("generate: empty prompt");
  nlohmann::json body = {
      {"model", params_.model},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", params_.temperature},
      {"max_tokens", params_.max_tokens},
  };
  if (params_.seed) body["seed"] = *params_.seed;

  const nlohmann::json reply = client_->post_json("/v1/chat/completions", body);
  try {
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProtocolError("message content is not a string");
    return content.get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed chat completion: ") + e.what());
  }
}

}  // namespace longmab
