#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intertext/metrics.hpp"
#include "intertext/pipeline.hpp"
#include "intertext/protocol.hpp"

namespace intertext {

struct EvalReport {
  ConfusionCounts counts;
  ClassificationMetrics classification;
  GlobalRates rates;
  std::map<QueryMetric, double> per_query;  // per-query means
  std::optional<IrMetrics> ir;
  std::size_t review_count = 0;  // candidates a scholar has to inspect: tp + fp
};

// ranked may be null (no IR block). IR is also skipped when no query in the
// pair carries gold.
EvalReport evaluate_matches(std::span<const CandidateMatch> matches, std::span<const LinkRecord> gold,
                            const Document& query, const Document& source,
                            const std::vector<std::vector<RankedCandidate>>* ranked = nullptr,
                            std::span<const std::size_t> ks = {});

struct BenchmarkConfig {
  RunConfig run;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::size_t query_size = default_eval_query_size;
  std::size_t source_size = default_eval_source_size;
  std::vector<std::size_t> ir_ks{1, 5, 10, 20, 100};
  // With retrieve_rerank, also score retrieval-only at the same k so the
  // report shows the review workload both ways.
  bool baseline = true;
  unsigned fold_jobs = 1;

  nlohmann::json to_json() const;
};

struct FoldResult {
  std::size_t fold_id = 0;
  std::size_t query_segments = 0;
  std::size_t source_segments = 0;
  std::size_t gold_links = 0;
  EvalReport report;
  std::optional<EvalReport> baseline;
  std::vector<std::string> warnings;
};

// Unweighted means over folds.
struct MeanReport {
  double tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0, recall = 0, f1 = 0, accuracy = 0;
  double fpr = 0, fnr = 0, smr = 0;
  std::map<QueryMetric, double> per_query;
  std::map<std::size_t, double> recall_at, mrr_at, ndcg_at;
  std::optional<double> map;
  double review_count = 0;
  std::optional<double> baseline_review_count;
  std::optional<double> workload_reduction;  // 1 - review / baseline review
};

struct BenchmarkReport {
  BenchmarkConfig config;
  std::string embedder_name;
  std::string classifier_name;
  std::vector<FoldResult> folds;
  MeanReport mean;
};

BenchmarkReport run_benchmark(const BenchmarkConfig& config, const Document& query_corpus,
                              const Document& source_corpus, std::span<const LinkRecord> links,
                              const Providers& providers);

nlohmann::json to_json(const EvalReport& report);
nlohmann::json to_json(const BenchmarkReport& report);
std::string format_report_text(const BenchmarkReport& report);

}  // namespace intertext
