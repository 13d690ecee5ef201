#include "longmab/probing.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "longmab/errors.hpp"
#include "longmab/hash.hpp"
#include "longmab/metrics.hpp"

namespace longmab {


double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) {
    throw std::invalid_argument("cosine: dimension mismatch (" + std::to_string(u.dim()) +
                                " vs " + std::to_string(v.dim()) + ")");
  }
  if (u.dim() == 0) throw std::invalid_argument("cosine: empty vector");
  double dot = 0.0;
  double uu = 0.0;
  double vv = 0.0;
  for (std::size_t i = 0; i < u.dim(); ++i) {
    dot += u.values[i] * v.values[i];
    uu += u.values[i] * u.values[i];
    vv += v.values[i] * v.values[i];
  }
  if (uu == 0.0 || vv == 0.0) throw std::invalid_argument("cosine: zero-norm vector");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

HttpEmbedder::HttpEmbedder(std::shared_ptr<HttpJsonClient> client, std::string model)
    : client_(std::move(client)), model_(std::move(model)) {}

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) {
  if (texts.empty()) return {};
  const nlohmann::json body = {{"model", model_},
                               {"input", std::vector<std::string>(texts.begin(), texts.end())}};
  const nlohmann::json reply = client_->post_json("/v1/embeddings", body);

  std::vector<EmbeddingVector> out(texts.size());
  std::vector<bool> filled(texts.size(), false);
  try {
    const auto& data = reply.at("data");
    if (!data.is_array() || data.size() != texts.size()) {
      throw ProtocolError("embeddings response has " + std::to_string(data.size()) +
                          " entries for " + std::to_string(texts.size()) + " inputs");
    }
    for (std::size_t pos = 0; pos < data.size(); ++pos) {
      const auto& item = data[pos];
      const std::size_t idx = item.contains("index") ? item.at("index").get<std::size_t>() : pos;
      if (idx >= out.size() || filled[idx]) throw ProtocolError("bad embedding index");
      out[idx].values = item.at("embedding").get<std::vector<double>>();
      filled[idx] = true;
      for (double x : out[idx].values) {
        if (!std::isfinite(x)) throw ProtocolError("non-finite embedding value");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(std::string("malformed embeddings response: ") + e.what());
  }
  return out;
}

std::vector<EmbeddingVector> HashingEmbedder::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    EmbeddingVector vec{std::vector<double>(dim_, 0.0)};
    for (const auto& token : normalized_tokens(text)) {
      const std::uint64_t h = fnv1a64(token);
      vec.values[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    }
    out.push_back(std::move(vec));
  }
  return out;
}

ProbeTrace generate_probe(const QAInstance& inst, ResponseGenerator& gen,
                          const PromptTemplate& tmpl) {
  if (inst.gold_answers.empty()) throw ProbeUnavailable("probe needs gold answers");
  std::string answers;
  for (const auto& a : inst.gold_answers) {
    if (!answers.empty()) answers += "; ";
    answers += a;
  }
  static constexpr std::array<std::string_view, 3> kRequired{"context", "question", "answers"};
  GenerationRequest request;
  request.prompt = tmpl.render(
      {{"context", context_text(inst)}, {"question", inst.question}, {"answers", answers}},
      kRequired);
  request.purpose = RequestPurpose::probe;

  std::string text;
  try {
    text = gen.generate(request);
  } catch (const RequestError& e) {
    throw ProbeUnavailable(std::string("probe generation failed: ") + e.what());
  } catch (const ProtocolError& e) {
    throw ProbeUnavailable(std::string("probe generation failed: ") + e.what());
  }
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw ProbeUnavailable("generator returned an empty probe");
  }
  return {inst.id, std::move(text), gen.id()};
}

std::vector<double> init_rewards(std::span<const Chunk> chunks, const ProbeTrace& probe,
                                 Embedder& embedder, std::size_t batch_size) {
  if (chunks.empty()) throw std::invalid_argument("init_rewards: no chunks");
  batch_size = std::max<std::size_t>(batch_size, 1);

  const std::array<std::string, 1> probe_text{probe.text};
  const auto probe_vec = embedder.embed(probe_text);
  if (probe_vec.size() != 1) throw ProtocolError("embedder returned no probe vector");

  std::vector<double> scores;
  scores.reserve(chunks.size());
  std::vector<std::string> batch;
  for (std::size_t start = 0; start < chunks.size(); start += batch_size) {
    batch.clear();
    const std::size_t stop = std::min(start + batch_size, chunks.size());
    for (std::size_t i = start; i < stop; ++i) batch.push_back(chunks[i].text);
    const auto vecs = embedder.embed(batch);
    if (vecs.size() != batch.size()) throw ProtocolError("embedder returned a short batch");
    for (const auto& v : vecs) scores.push_back(cosine(probe_vec.front(), v));
  }
  return scores;
}

std::string_view to_string(InitRescale mode) {
  return mode == InitRescale::minmax ? "minmax" : "none";
}

InitRescale parse_init_rescale(std::string_view name) {
  if (name == "none") return InitRescale::none;
  if (name == "minmax") return InitRescale::minmax;
  throw ConfigError("unknown init rescale mode: " + std::string(name));
}

std::vector<double> rescale(std::vector<double> scores, InitRescale mode) {
  if (mode == InitRescale::none || scores.empty()) return scores;
  const auto [lo, hi] = std::minmax_element(scores.begin(), scores.end());
  const double low = *lo;
  const double span = *hi - *lo;
  for (double& s : scores) s = span > 0.0 ? (s - low) / span : 0.0;
  return scores;
}

}  // namespace longmab
