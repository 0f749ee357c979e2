#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "intertext/corpus.hpp"
#include "intertext/pipeline.hpp"
#include "intertext/retrieval.hpp"

namespace intertext {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t n() const noexcept { return tp + fp + fn + tn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Error rates normalized by the full pair grid N. smr is computed as
// fpr + fnr so the decomposition holds exactly in floating point; it equals
// (fp + fn) / n to within one ulp.
struct GlobalRates {
  double fpr = 0.0;
  double fnr = 0.0;
  double smr = 0.0;
};

struct ClassificationMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};

// Predictions are the matches labeled reference. tp/fp/fn from set algebra
// against gold, tn = |query| * |source| - tp - fp - fn. Throws validation for
// gold or predicted ids outside the document pair.
ConfusionCounts confusion(std::span<const CandidateMatch> predictions, std::span<const LinkRecord> gold,
                          const Document& query, const Document& source);

// Throws undefined_metric when n == 0.
GlobalRates global_rates(const ConfusionCounts& counts);

// Zero denominators give 0 for precision, recall and f1. Throws
// undefined_metric when n == 0.
ClassificationMetrics classification_metrics(const ConfusionCounts& counts);

enum class QueryMetric { fpr, fnr, smr, precision, recall, f1, accuracy };
std::string_view to_string(QueryMetric metric);

// One confusion row per query segment (n_row = |source|), in query order.
std::vector<ConfusionCounts> per_query_counts(std::span<const CandidateMatch> predictions,
                                              std::span<const LinkRecord> gold, const Document& query,
                                              const Document& source);

double metric_value(const ConfusionCounts& counts, QueryMetric metric);

// Unweighted mean over query segments of the metric computed on each row.
double per_query_mean(std::span<const CandidateMatch> predictions, std::span<const LinkRecord> gold,
                      const Document& query, const Document& source, QueryMetric metric);

struct IrMetrics {
  std::vector<std::size_t> ks;
  std::map<std::size_t, double> recall;  // Recall@k
  std::map<std::size_t, double> mrr;     // MRR@k
  std::map<std::size_t, double> ndcg;    // NDCG@k, binary gain, log2 discount
  double map = 0.0;                      // over the full supplied ranking
  std::size_t queries = 0;               // gold-bearing queries averaged over
};

// ranked[i] is the ranking for query segment i. Only queries with at least
// one gold link contribute. Throws undefined_metric when there are none.
IrMetrics ir_metrics(std::span<const std::vector<RankedCandidate>> ranked, const Document& query,
                     std::span<const LinkRecord> gold, std::span<const std::size_t> ks);

}  // namespace intertext
