#include "intertext/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>
#include <unordered_set>

#include "intertext/error.hpp"

namespace intertext {

namespace {

using PairSet = std::unordered_set<SegmentPair, SegmentPairHash>;

PairSet predicted_pairs(std::span<const CandidateMatch> predictions, const Document& query, const Document& source) {
  PairSet out;
  for (const auto& m : predictions) {
    if (m.label != Label::reference) continue;
    if (!query.find(m.query_seg_id) || !source.find(m.source_seg_id)) {
      throw Error(ErrorCode::validation, "prediction (" + m.query_seg_id + ", " + m.source_seg_id +
                                             ") lies outside the evaluated document pair");
    }
    out.emplace(m.query_seg_id, m.source_seg_id);
  }
  return out;
}

PairSet gold_pairs(std::span<const LinkRecord> gold, const Document& query, const Document& source) {
  PairSet out;
  for (const auto& l : gold) {
    if (!query.find(l.query_seg_id) || !source.find(l.source_seg_id)) {
      throw Error(ErrorCode::validation, "gold link (" + l.query_seg_id + ", " + l.source_seg_id +
                                             ") lies outside the evaluated document pair");
    }
    out.emplace(l.query_seg_id, l.source_seg_id);
  }
  return out;
}

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ConfusionCounts confusion(std::span<const CandidateMatch> predictions, std::span<const LinkRecord> gold,
                          const Document& query, const Document& source) {
  const auto predicted = predicted_pairs(predictions, query, source);
  const auto truth = gold_pairs(gold, query, source);
  ConfusionCounts c;
  for (const auto& p : predicted) {
    if (truth.contains(p)) {
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  c.fn = truth.size() - c.tp;
  const std::uint64_t n = static_cast<std::uint64_t>(query.size()) * source.size();
  c.tn = n - c.tp - c.fp - c.fn;
  return c;
}

GlobalRates global_rates(const ConfusionCounts& counts) {
  const auto n = counts.n();
  if (n == 0) throw Error(ErrorCode::undefined_metric, "error rates are undefined for an empty pair grid");
  GlobalRates r;
  r.fpr = static_cast<double>(counts.fp) / static_cast<double>(n);
  r.fnr = static_cast<double>(counts.fn) / static_cast<double>(n);
  r.smr = r.fpr + r.fnr;
  return r;
}

ClassificationMetrics classification_metrics(const ConfusionCounts& counts) {
  const auto n = counts.n();
  if (n == 0) throw Error(ErrorCode::undefined_metric, "classification metrics are undefined for an empty pair grid");
  ClassificationMetrics m;
  m.precision = ratio(counts.tp, counts.tp + counts.fp);
  m.recall = ratio(counts.tp, counts.tp + counts.fn);
  m.f1 = (m.precision + m.recall) > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.accuracy = ratio(counts.tp + counts.tn, n);
  return m;
}

std::string_view to_string(QueryMetric metric) {
  switch (metric) {
    case QueryMetric::fpr: return "fpr";
    case QueryMetric::fnr: return "fnr";
    case QueryMetric::smr: return "smr";
    case QueryMetric::precision: return "precision";
    case QueryMetric::recall: return "recall";
    case QueryMetric::f1: return "f1";
    case QueryMetric::accuracy: return "accuracy";
  }
  return "smr";
}

std::vector<ConfusionCounts> per_query_counts(std::span<const CandidateMatch> predictions,
                                              std::span<const LinkRecord> gold, const Document& query,
                                              const Document& source) {
  const auto predicted = predicted_pairs(predictions, query, source);
  const auto truth = gold_pairs(gold, query, source);
  std::vector<ConfusionCounts> rows(query.size());
  for (const auto& p : predicted) {
    auto& row = rows[*query.index_of(p.first)];
    if (truth.contains(p)) {
      ++row.tp;
    } else {
      ++row.fp;
    }
  }
  for (const auto& g : truth) {
    if (!predicted.contains(g)) ++rows[*query.index_of(g.first)].fn;
  }
  for (auto& row : rows) row.tn = source.size() - row.tp - row.fp - row.fn;
  return rows;
}

double metric_value(const ConfusionCounts& counts, QueryMetric metric) {
  switch (metric) {
    case QueryMetric::fpr: return global_rates(counts).fpr;
    case QueryMetric::fnr: return global_rates(counts).fnr;
    case QueryMetric::smr: return global_rates(counts).smr;
    case QueryMetric::precision: return classification_metrics(counts).precision;
    case QueryMetric::recall: return classification_metrics(counts).recall;
    case QueryMetric::f1: return classification_metrics(counts).f1;
    case QueryMetric::accuracy: return classification_metrics(counts).accuracy;
  }
  return 0.0;
}

double per_query_mean(std::span<const CandidateMatch> predictions, std::span<const LinkRecord> gold,
                      const Document& query, const Document& source, QueryMetric metric) {
  const auto rows = per_query_counts(predictions, gold, query, source);
  if (rows.empty()) throw Error(ErrorCode::undefined_metric, "per-query mean over an empty query document");
  double sum = 0.0;
  for (const auto& row : rows) sum += metric_value(row, metric);
  return sum / static_cast<double>(rows.size());
}

IrMetrics ir_metrics(std::span<const std::vector<RankedCandidate>> ranked, const Document& query,
                     std::span<const LinkRecord> gold, std::span<const std::size_t> ks) {
  if (ranked.size() != query.size()) {
    throw Error(ErrorCode::validation, "ir_metrics: one ranking per query segment required");
  }
  std::unordered_map<std::string, std::unordered_set<std::string>> gold_by_query;
  for (const auto& l : gold) {
    if (!query.find(l.query_seg_id)) {
      throw Error(ErrorCode::validation, "gold link (" + l.query_seg_id + ", " + l.source_seg_id +
                                             ") names an unknown query segment");
    }
    gold_by_query[l.query_seg_id].insert(l.source_seg_id);
  }

  IrMetrics out;
  out.ks.assign(ks.begin(), ks.end());
  for (auto k : out.ks) {
    if (k == 0) throw Error(ErrorCode::configuration, "ir_metrics: cutoffs must be >= 1");
    out.recall[k] = out.mrr[k] = out.ndcg[k] = 0.0;
  }

  for (std::size_t q = 0; q < query.size(); ++q) {
    const auto it = gold_by_query.find(query[q].id);
    if (it == gold_by_query.end()) continue;
    const auto& relevant = it->second;
    ++out.queries;
    const auto& list = ranked[q];

    double hits = 0.0, precision_sum = 0.0;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (relevant.contains(list[i].source_seg_id)) {
        hits += 1.0;
        precision_sum += hits / static_cast<double>(i + 1);
      }
    }
    out.map += precision_sum / static_cast<double>(relevant.size());

    for (auto k : out.ks) {
      const std::size_t depth = std::min(k, list.size());
      std::size_t found = 0;
      double dcg = 0.0, rr = 0.0;
      for (std::size_t i = 0; i < depth; ++i) {
        if (!relevant.contains(list[i].source_seg_id)) continue;
        ++found;
        dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
        if (rr == 0.0) rr = 1.0 / static_cast<double>(i + 1);
      }
      double idcg = 0.0;
      for (std::size_t i = 0; i < std::min(k, relevant.size()); ++i) idcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
      out.recall[k] += static_cast<double>(found) / static_cast<double>(relevant.size());
      out.mrr[k] += rr;
      out.ndcg[k] += dcg / idcg;
    }
  }
  if (out.queries == 0) throw Error(ErrorCode::undefined_metric, "no query segment carries a gold link");
  const double nq = static_cast<double>(out.queries);
  out.map /= nq;
  for (auto k : out.ks) {
    out.recall[k] /= nq;
    out.mrr[k] /= nq;
    out.ndcg[k] /= nq;
  }
  return out;
}

}  // namespace intertext
