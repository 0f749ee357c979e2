#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>

#include "intertext/rerank.hpp"
#include "intertext/retrieval.hpp"

namespace intertext {

// Deterministic test embedder. For each normalized token t of the text (with
// multiplicity), a splitmix64 stream seeded with fnv1a64(t) ^ seed yields dim
// values x_d, mapped to 2 * (x_d >> 11) * 2^-53 - 1 and summed component-wise.
// The sum is scaled to unit length (an all-punctuation text yields the zero
// vector).
class HashEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HashEmbeddingProvider(std::size_t dim = 64, std::uint64_t seed = 0);

  std::string name() const override;
  std::size_t dim() const override { return dim_; }
  std::vector<Vector> embed(std::span<const EmbedItem> items) const override;

  Vector embed_text(std::string_view text) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

// Serves precomputed vectors keyed by segment id, optionally from separate
// files for query and candidate roles. A missing id raises a non-retryable
// TransportError naming the segment.
class FileEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit FileEmbeddingProvider(const std::filesystem::path& path);
  FileEmbeddingProvider(const std::filesystem::path& query_path, const std::filesystem::path& candidate_path);

  std::string name() const override { return name_; }
  std::size_t dim() const override { return dim_; }
  std::vector<Vector> embed(std::span<const EmbedItem> items) const override;

 private:
  using Table = std::unordered_map<std::string, Vector>;
  static Table load_table(const std::filesystem::path& path, std::size_t& dim);

  std::string name_;
  std::size_t dim_ = 0;
  Table query_;
  Table candidate_;
};

struct HttpOptions {
  std::chrono::seconds timeout{60};
  unsigned retries = 2;  // additional attempts after a transport failure
};

// POST {"texts": [...]} -> {"vectors": [[...], ...]}. The dimension is fixed by
// the first response (or by expected_dim when non-zero); later responses that
// disagree raise a configuration error.
class HttpEmbeddingProvider final : public EmbeddingProvider {
 public:
  explicit HttpEmbeddingProvider(std::string url, std::size_t expected_dim = 0, HttpOptions options = {});

  std::string name() const override { return "http:" + url_; }
  std::size_t dim() const override { return dim_.load(); }
  std::vector<Vector> embed(std::span<const EmbedItem> items) const override;

 private:
  std::string url_;
  mutable std::atomic<std::size_t> dim_;
  HttpOptions options_;
};

// Test classifier: Jaccard similarity of the normalized token sets of the two
// texts; 1.0 when both sets are empty.
class JaccardPairClassifier final : public PairClassifierProvider {
 public:
  explicit JaccardPairClassifier(std::size_t max_tokens = 512) : max_tokens_(max_tokens) {}

  std::string name() const override { return "jaccard"; }
  std::size_t max_tokens() const override { return max_tokens_; }
  std::vector<double> classify(std::span<const TextPair> pairs) const override;

  static double score(std::string_view a, std::string_view b);

 private:
  std::size_t max_tokens_;
};

// POST {"pairs": [["q", "c"], ...]} -> {"probs": [...]}.
class HttpPairClassifier final : public PairClassifierProvider {
 public:
  HttpPairClassifier(std::string url, std::size_t max_tokens = 512, HttpOptions options = {});

  std::string name() const override { return "http:" + url_; }
  std::size_t max_tokens() const override { return max_tokens_; }
  std::vector<double> classify(std::span<const TextPair> pairs) const override;

 private:
  std::string url_;
  std::size_t max_tokens_;
  HttpOptions options_;
};

// Provider specs:
//   embedders:   "hash" | "hash:DIM" | "hash:DIM:SEED" | "file:PATH" |
//                "file:QUERY_PATH,CANDIDATE_PATH" | "http://host:port/path"
//   classifiers: "jaccard" | "http://host:port/path"
// Unknown specs raise configuration errors.
std::unique_ptr<EmbeddingProvider> make_embedder(std::string_view spec);
std::unique_ptr<PairClassifierProvider> make_classifier(std::string_view spec, std::size_t max_tokens = 512);

}  // namespace intertext
