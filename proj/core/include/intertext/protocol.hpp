#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intertext/corpus.hpp"
#include "intertext/retrieval.hpp"

namespace intertext {

struct FoldSpec {
  std::size_t fold_id = 0;
  std::vector<LinkRecord> train_links;
  std::vector<LinkRecord> test_links;
};

// Seeded shuffle then contiguous partition; test set sizes differ by at most
// one. Throws configuration when k is 0 or exceeds the link count.
std::vector<FoldSpec> make_folds(std::span<const LinkRecord> links, std::size_t k, std::uint64_t seed);

inline constexpr std::size_t default_eval_query_size = 937;
inline constexpr std::size_t default_eval_source_size = 880;

struct EvalDocs {
  Document query;
  Document source;
  std::vector<LinkRecord> gold;
};

// Test-link segments plus seeded distractors drawn from segments that take
// part in no link of the fold (train or test). Segments keep corpus order.
// Throws configuration when the sizes cannot be met.
EvalDocs build_eval_docs(const FoldSpec& fold, const Document& query_corpus, const Document& source_corpus,
                         std::size_t q_size = default_eval_query_size,
                         std::size_t s_size = default_eval_source_size, std::uint64_t seed = 0);

enum class SamplingStrategy { positive, random_pair, random_negative, hard_negative, mixed };
std::string_view to_string(SamplingStrategy strategy);
SamplingStrategy parse_sampling_strategy(std::string_view text);

struct TrainingPair {
  std::string query_seg_id;
  std::string source_seg_id;
  std::string query_text;
  std::string candidate_text;
  int label = 0;
  SamplingStrategy strategy = SamplingStrategy::random_negative;

  friend bool operator==(const TrainingPair&, const TrainingPair&) = default;
};

std::vector<TrainingPair> positive_pairs(std::span<const LinkRecord> positives, const Document& query_corpus,
                                         const Document& source_corpus);

struct NegativeSamplingOptions {
  std::size_t ratio = 1;
  std::uint64_t seed = 0;
  const EmbeddingProvider* embedder = nullptr;  // required for hard_negative and mixed
  // Pairs that must never be emitted. Defaults to the positives when empty.
  std::span<const LinkRecord> gold;
  std::size_t batch_size = 64;
};

// Exactly options.ratio negatives per positive, grouped by positive in input
// order. Hard negatives are the highest-cosine non-gold sources (ties by
// source ordinal). mixed takes ceil(r/2) random and floor(r/2) hard.
std::vector<TrainingPair> sample_negatives(SamplingStrategy strategy, std::span<const LinkRecord> positives,
                                           const Document& query_corpus, const Document& source_corpus,
                                           const NegativeSamplingOptions& options);

enum class PairFormat { csv, jsonl };
PairFormat pair_format_from_path(const std::filesystem::path& path);

// Columns query_text,candidate_text,label,strategy. Returns rows written.
std::size_t export_training_pairs(std::span<const TrainingPair> pairs, const std::filesystem::path& path,
                                  PairFormat format);
std::string format_training_pairs(std::span<const TrainingPair> pairs, PairFormat format);
std::vector<TrainingPair> parse_training_pairs(std::string_view content, PairFormat format);
std::vector<TrainingPair> load_training_pairs(const std::filesystem::path& path);

}  // namespace intertext
