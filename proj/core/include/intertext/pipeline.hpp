#pragma once

#include <cstddef>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "intertext/corpus.hpp"
#include "intertext/matcher.hpp"
#include "intertext/rerank.hpp"
#include "intertext/retrieval.hpp"

namespace intertext {

enum class Architecture { retrieval_only, classification_only, retrieve_rerank, ngram };

std::string_view to_string(Architecture arch);
// Accepts the canonical names plus the short forms retrieval, classification,
// rerank.
Architecture parse_architecture(std::string_view text);

struct CandidateMatch {
  std::string query_seg_id;
  std::string source_seg_id;
  std::size_t query_ordinal = 0;
  std::size_t source_ordinal = 0;
  std::size_t rank = 0;  // 1-based within the query segment
  std::optional<double> similarity;
  std::optional<double> probability;
  Label label = Label::no_reference;
  Architecture origin = Architecture::retrieve_rerank;
  std::vector<std::string> shared_tokens;  // n-gram matches only

  friend bool operator==(const CandidateMatch&, const CandidateMatch&) = default;
};

struct FilterSettings {
  std::optional<std::string> stoplist_path;  // default: most frequent source tokens
  std::size_t stoplist_size = 100;
  std::optional<std::set<std::string>> pos_allow;
  double max_doc_freq = 0.01;
};

struct RunConfig {
  Architecture architecture = Architecture::retrieve_rerank;
  std::size_t k = 10;
  double threshold = 0.5;
  std::string embedder = "hash";
  std::string classifier = "jaccard";
  std::size_t token_budget = 512;
  std::size_t batch_size = 64;
  unsigned jobs = 1;
  MatchParams match;
  FilterSettings filters;

  // Field-level diagnostics; throws Error{validation} listing every problem.
  void validate() const;
  nlohmann::json to_json() const;
  // Unknown keys are rejected; missing keys keep their defaults.
  static RunConfig from_json(const nlohmann::json& j);
};

struct RunOptions {
  std::size_t batch_size = 64;
  unsigned jobs = 1;
};

// Embedded source index plus query vectors, reusable across k values.
struct RetrievalStage {
  VectorIndex index;
  std::vector<Vector> query_vectors;
};

RetrievalStage prepare_retrieval(const Document& query, const Document& source, const EmbeddingProvider& embedder,
                                 const RunOptions& options = {});

// Per-query ranked lists of depth min(depth, |source|).
std::vector<std::vector<RankedCandidate>> rank_all(const RetrievalStage& stage, std::size_t depth);

// Every query segment gets exactly min(k, |source|) matches, all labeled
// reference.
std::vector<CandidateMatch> run_retrieval_only(const Document& query, const Document& source,
                                               const EmbeddingProvider& embedder, std::size_t k,
                                               const RunOptions& options = {});
std::vector<CandidateMatch> run_retrieval_only(const Document& query, const RetrievalStage& stage, std::size_t k);

// Scores every query x source pair. All pairs are returned, labeled by
// threshold, ranked per query by descending probability (ties by source
// ordinal).
std::vector<CandidateMatch> run_classification_only(const Document& query, const Document& source,
                                                    const PairClassifierProvider& classifier, double threshold,
                                                    std::size_t token_budget, const RunOptions& options = {});

// Classifies each query's top-k retrieved candidates; matches carry both
// scores and keep the retrieval rank.
std::vector<CandidateMatch> run_retrieve_rerank(const Document& query, const Document& source,
                                                const EmbeddingProvider& embedder,
                                                const PairClassifierProvider& classifier, std::size_t k,
                                                double threshold, std::size_t token_budget,
                                                const RunOptions& options = {});
std::vector<CandidateMatch> run_retrieve_rerank(const Document& query, const Document& source,
                                                const RetrievalStage& stage,
                                                const PairClassifierProvider& classifier, std::size_t k,
                                                double threshold, std::size_t token_budget,
                                                const RunOptions& options = {});

// Filtered n-gram candidates as reference-labeled matches.
std::vector<CandidateMatch> run_ngram(const Document& query, const Document& source, const MatchParams& match,
                                      const FilterSettings& filters);

struct RunResult {
  std::vector<CandidateMatch> matches;
  std::vector<std::string> warnings;
  std::string embedder_name;
  std::string classifier_name;

  std::size_t review_count() const;  // matches labeled reference
};

struct Providers {
  const EmbeddingProvider* embedder = nullptr;
  const PairClassifierProvider* classifier = nullptr;
};

// Runs the configured architecture. k larger than the source document is
// clamped with a warning.
RunResult run_pipeline(const RunConfig& config, const Document& query, const Document& source,
                       const Providers& providers);
// Builds providers from the config's provider specs.
RunResult run_pipeline(const RunConfig& config, const Document& query, const Document& source);

enum class OutputFormat { csv, jsonl, json };
std::string_view to_string(OutputFormat format);
OutputFormat parse_output_format(std::string_view text);

nlohmann::json to_json(const CandidateMatch& match);
CandidateMatch match_from_json(const nlohmann::json& j);

// CSV columns: query_id,source_id,rank,similarity,probability,label,origin,
// shared_tokens (pipe-joined). Missing scores are empty cells. Numbers use
// shortest round-trip formatting so output is byte-stable.
std::string format_matches(std::span<const CandidateMatch> matches, OutputFormat format);

nlohmann::json make_manifest(const RunConfig& config, const Document& query, const Document& source,
                             const RunResult& result, std::string_view timestamp);

// Current UTC time as ISO-8601 with seconds.
std::string utc_timestamp();

}  // namespace intertext
