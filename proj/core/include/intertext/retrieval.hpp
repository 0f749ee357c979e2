#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intertext/corpus.hpp"

namespace intertext {

using Vector = std::vector<float>;

enum class EmbedRole { query, candidate };

// "Query: " or "Candidate: ", prepended verbatim to the segment text.
std::string_view embed_prefix(EmbedRole role);

struct EmbedItem {
  std::string segment_id;
  std::string text;  // already prefixed
  EmbedRole role = EmbedRole::query;
};

// Maps texts to fixed-dimension vectors. Implementations must be
// deterministic, return one vector per item in input order, and be safe to
// call from several threads at once.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual std::string name() const = 0;
  // 0 when the dimension is only known after the first response.
  virtual std::size_t dim() const = 0;
  virtual std::vector<Vector> embed(std::span<const EmbedItem> items) const = 0;
};

struct EmbedOptions {
  std::size_t batch_size = 64;
  unsigned jobs = 1;
};

// Embeds segments with the role prefix. Batches may run concurrently; output
// order always matches input order. A provider returning the wrong number of
// vectors is a provider_contract error; inconsistent dimensions are a
// configuration error. Provider TransportErrors propagate with segment ids.
std::vector<Vector> embed_segments(const EmbeddingProvider& provider, std::span<const Segment> segments,
                                   EmbedRole role, const EmbedOptions& options = {});

struct RankedCandidate {
  std::string source_seg_id;
  std::size_t source_index = 0;  // position in the index (= source ordinal)
  double similarity = 0.0;       // cosine, clamped to [-1, 1]
  std::size_t rank = 0;          // 1-based

  friend bool operator==(const RankedCandidate&, const RankedCandidate&) = default;
};

// Exact cosine index over unit-normalized vectors, in insertion order.
class VectorIndex {
 public:
  VectorIndex() = default;

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  bool empty() const noexcept { return ids_.empty(); }
  const std::string& id(std::size_t i) const { return ids_[i]; }
  std::span<const float> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }

 private:
  friend VectorIndex build_index(std::span<const std::string> ids, std::span<const Vector> vectors);

  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<float> data_;
};

// Throws validation on length mismatch, duplicate ids or zero-norm vectors
// (naming the segment), configuration on non-uniform dimension.
VectorIndex build_index(std::span<const std::string> ids, std::span<const Vector> vectors);

// The k highest-cosine entries (fewer when the index is smaller), ties broken
// by ascending insertion position. Empty index yields an empty list.
std::vector<RankedCandidate> topk(const VectorIndex& index, std::span<const float> query, std::size_t k);

double cosine(std::span<const float> a, std::span<const float> b);

// Precomputed vector files: JSONL of {"id": ..., "vector": [...]}, or a
// little-endian binary layout ("ITXVEC01", u32 dim, u64 count, then per
// entry u32 id length, id bytes, dim float32).
struct StoredVectors {
  std::vector<std::string> ids;
  std::vector<Vector> vectors;
};

StoredVectors load_vectors(const std::filesystem::path& path);
void write_vectors_jsonl(const std::filesystem::path& path, const StoredVectors& stored);
void write_vectors_binary(const std::filesystem::path& path, const StoredVectors& stored);

}  // namespace intertext
