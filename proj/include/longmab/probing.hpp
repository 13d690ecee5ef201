#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "longmab/chunking.hpp"
#include "longmab/corpus.hpp"
#include "longmab/generation.hpp"
#include "longmab/http_client.hpp"

namespace longmab {

struct EmbeddingVector {
  std::vector<double> values;
  std::size_t dim() const { return values.size(); }
};

/// Throws std::invalid_argument on dimension mismatch or a zero-norm input.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One vector per input, in input order.
  virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
};

/// OpenAI-compatible /v1/embeddings backend. Each call is one request.
class HttpEmbedder final : public Embedder {
 public:
  HttpEmbedder(std::shared_ptr<HttpJsonClient> client, std::string model);
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

 private:
  std::shared_ptr<HttpJsonClient> client_;
  std::string model_;
};

/// Offline embedder: signed feature hashing of normalized tokens. Texts that
/// share words land close together, which is enough for tests and dry runs.
class HashingEmbedder final : public Embedder {
 public:
  explicit HashingEmbedder(std::size_t dim = 256) : dim_(dim) {}
  std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;

 private:
  std::size_t dim_;
};

struct ProbeTrace {
  std::string question_id;
  std::string text;
  std::string created_with;
};

/// Asks the generator for an evidence trace given the full context and the
/// gold answers. Throws ProbeUnavailable on failure or empty output.
ProbeTrace generate_probe(const QAInstance& inst, ResponseGenerator& gen,
                          const PromptTemplate& tmpl);

/// Cosine similarity of every chunk to the probe, in chunk order.
std::vector<double> init_rewards(std::span<const Chunk> chunks, const ProbeTrace& probe,
                                 Embedder& embedder, std::size_t batch_size = 32);

enum class InitRescale { none, minmax };

std::string_view to_string(InitRescale mode);
InitRescale parse_init_rescale(std::string_view name);

/// minmax maps the scores onto [0, 1]; a constant vector maps to zeros.
std::vector<double> rescale(std::vector<double> scores, InitRescale mode);

}  // namespace longmab
