#include "intertext/harness.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>

#include "intertext/error.hpp"
#include "intertext/parallel.hpp"

namespace intertext {

using nlohmann::json;

namespace {

constexpr QueryMetric kQueryMetrics[] = {QueryMetric::fpr,       QueryMetric::fnr,    QueryMetric::smr,
                                         QueryMetric::precision, QueryMetric::recall, QueryMetric::f1};

std::vector<std::vector<RankedCandidate>> ranking_from_matches(std::span<const CandidateMatch> matches,
                                                               const Document& query) {
  std::vector<std::vector<RankedCandidate>> ranked(query.size());
  for (const auto& m : matches) {
    ranked[m.query_ordinal].push_back({m.source_seg_id, m.source_ordinal, m.probability.value_or(0.0), m.rank});
  }
  for (auto& list : ranked) {
    std::stable_sort(list.begin(), list.end(), [](const auto& a, const auto& b) { return a.rank < b.rank; });
  }
  return ranked;
}

}  // namespace

EvalReport evaluate_matches(std::span<const CandidateMatch> matches, std::span<const LinkRecord> gold,
                            const Document& query, const Document& source,
                            const std::vector<std::vector<RankedCandidate>>* ranked,
                            std::span<const std::size_t> ks) {
  EvalReport r;
  r.counts = confusion(matches, gold, query, source);
  r.classification = classification_metrics(r.counts);
  r.rates = global_rates(r.counts);
  const auto rows = per_query_counts(matches, gold, query, source);
  for (auto metric : kQueryMetrics) {
    double sum = 0.0;
    for (const auto& row : rows) sum += metric_value(row, metric);
    r.per_query[metric] = sum / static_cast<double>(rows.size());
  }
  if (ranked && !gold.empty() && !ks.empty()) r.ir = ir_metrics(*ranked, query, gold, ks);
  r.review_count = r.counts.tp + r.counts.fp;
  return r;
}

json BenchmarkConfig::to_json() const {
  return {{"run", run.to_json()},           {"folds", folds},
          {"seed", seed},                   {"query_size", query_size},
          {"source_size", source_size},     {"ir_ks", ir_ks},
          {"baseline", baseline}};
}

namespace {

FoldResult run_fold(const BenchmarkConfig& config, const FoldSpec& fold, const Document& query_corpus,
                    const Document& source_corpus, const Providers& providers) {
  const auto docs = build_eval_docs(fold, query_corpus, source_corpus, config.query_size, config.source_size,
                                    config.seed);
  FoldResult out;
  out.fold_id = fold.fold_id;
  out.query_segments = docs.query.size();
  out.source_segments = docs.source.size();
  out.gold_links = docs.gold.size();

  const auto& run = config.run;
  const RunOptions options{run.batch_size, run.jobs};
  std::size_t k = run.k;
  if (k > docs.source.size()) {
    out.warnings.push_back(fmt::format("fold {}: k={} clamped to {}", fold.fold_id, k, docs.source.size()));
    k = docs.source.size();
  }
  std::size_t depth = k;
  for (auto cut : config.ir_ks) depth = std::max(depth, cut);
  depth = std::min(depth, docs.source.size());

  auto need = [](const auto* p, const char* what) {
    if (!p) throw Error(ErrorCode::configuration, std::string("no ") + what + " provider supplied");
    return p;
  };

  switch (run.architecture) {
    case Architecture::retrieval_only:
    case Architecture::retrieve_rerank: {
      const auto stage = prepare_retrieval(docs.query, docs.source, *need(providers.embedder, "embedding"), options);
      const auto ranked = rank_all(stage, depth);
      const auto retrieved = run_retrieval_only(docs.query, stage, k);
      if (run.architecture == Architecture::retrieval_only) {
        out.report = evaluate_matches(retrieved, docs.gold, docs.query, docs.source, &ranked, config.ir_ks);
        break;
      }
      const auto matches = run_retrieve_rerank(docs.query, docs.source, stage, *need(providers.classifier, "classifier"),
                                               k, run.threshold, run.token_budget, options);
      out.report = evaluate_matches(matches, docs.gold, docs.query, docs.source, &ranked, config.ir_ks);
      if (config.baseline) out.baseline = evaluate_matches(retrieved, docs.gold, docs.query, docs.source);
      break;
    }
    case Architecture::classification_only: {
      const auto matches = run_classification_only(docs.query, docs.source, *need(providers.classifier, "classifier"),
                                                   run.threshold, run.token_budget, options);
      const auto ranked = ranking_from_matches(matches, docs.query);
      out.report = evaluate_matches(matches, docs.gold, docs.query, docs.source, &ranked, config.ir_ks);
      break;
    }
    case Architecture::ngram: {
      auto match = run.match;
      match.jobs = run.jobs;
      const auto matches = run_ngram(docs.query, docs.source, match, run.filters);
      out.report = evaluate_matches(matches, docs.gold, docs.query, docs.source);
      break;
    }
  }
  return out;
}

MeanReport average(const std::vector<FoldResult>& folds) {
  MeanReport m;
  const double n = static_cast<double>(folds.size());
  bool all_ir = true, all_baseline = true;
  for (const auto& f : folds) {
    const auto& r = f.report;
    m.tp += static_cast<double>(r.counts.tp);
    m.fp += static_cast<double>(r.counts.fp);
    m.fn += static_cast<double>(r.counts.fn);
    m.tn += static_cast<double>(r.counts.tn);
    m.precision += r.classification.precision;
    m.recall += r.classification.recall;
    m.f1 += r.classification.f1;
    m.accuracy += r.classification.accuracy;
    m.fpr += r.rates.fpr;
    m.fnr += r.rates.fnr;
    m.smr += r.rates.smr;
    for (const auto& [metric, value] : r.per_query) m.per_query[metric] += value;
    m.review_count += static_cast<double>(r.review_count);
    all_ir = all_ir && r.ir.has_value();
    all_baseline = all_baseline && f.baseline.has_value();
  }
  for (double* v : {&m.tp, &m.fp, &m.fn, &m.tn, &m.precision, &m.recall, &m.f1, &m.accuracy, &m.fpr, &m.fnr, &m.smr,
                    &m.review_count}) {
    *v /= n;
  }
  for (auto& [metric, value] : m.per_query) value /= n;

  if (all_ir && !folds.empty()) {
    double map = 0.0;
    for (const auto& f : folds) {
      const auto& ir = *f.report.ir;
      for (auto k : ir.ks) {
        m.recall_at[k] += ir.recall.at(k) / n;
        m.mrr_at[k] += ir.mrr.at(k) / n;
        m.ndcg_at[k] += ir.ndcg.at(k) / n;
      }
      map += ir.map;
    }
    m.map = map / n;
  }
  if (all_baseline && !folds.empty()) {
    double base = 0.0;
    for (const auto& f : folds) base += static_cast<double>(f.baseline->review_count);
    m.baseline_review_count = base / n;
    if (base > 0.0) m.workload_reduction = 1.0 - m.review_count / *m.baseline_review_count;
  }
  return m;
}

}  // namespace

BenchmarkReport run_benchmark(const BenchmarkConfig& config, const Document& query_corpus,
                              const Document& source_corpus, std::span<const LinkRecord> links,
                              const Providers& providers) {
  config.run.validate();
  validate_links(links, &query_corpus, &source_corpus);
  const auto folds = make_folds(links, config.folds, config.seed);

  BenchmarkReport report;
  report.config = config;
  if (providers.embedder) report.embedder_name = providers.embedder->name();
  if (providers.classifier) report.classifier_name = providers.classifier->name();
  report.folds.resize(folds.size());
  parallel_for(folds.size(), config.fold_jobs, [&](std::size_t i) {
    report.folds[i] = run_fold(config, folds[i], query_corpus, source_corpus, providers);
    spdlog::info("fold {}: tp={} fp={} fn={} review={}", i, report.folds[i].report.counts.tp,
                 report.folds[i].report.counts.fp, report.folds[i].report.counts.fn,
                 report.folds[i].report.review_count);
  });
  report.mean = average(report.folds);
  return report;
}

namespace {

json ir_json(const IrMetrics& ir) {
  json j = {{"map", ir.map}, {"queries", ir.queries}};
  for (auto k : ir.ks) {
    const auto key = std::to_string(k);
    j["recall_at"][key] = ir.recall.at(k);
    j["mrr_at"][key] = ir.mrr.at(k);
    j["ndcg_at"][key] = ir.ndcg.at(k);
  }
  return j;
}

json per_query_json(const std::map<QueryMetric, double>& values) {
  json j = json::object();
  for (const auto& [metric, value] : values) j[std::string(to_string(metric))] = value;
  return j;
}

}  // namespace

json to_json(const EvalReport& r) {
  json j = {{"counts", {{"tp", r.counts.tp}, {"fp", r.counts.fp}, {"fn", r.counts.fn}, {"tn", r.counts.tn},
                        {"n", r.counts.n()}}},
            {"precision", r.classification.precision},
            {"recall", r.classification.recall},
            {"f1", r.classification.f1},
            {"accuracy", r.classification.accuracy},
            {"fpr", r.rates.fpr},
            {"fnr", r.rates.fnr},
            {"smr", r.rates.smr},
            {"per_query", per_query_json(r.per_query)},
            {"review_count", r.review_count}};
  if (r.ir) j["ir"] = ir_json(*r.ir);
  return j;
}

json to_json(const BenchmarkReport& report) {
  json folds = json::array();
  for (const auto& f : report.folds) {
    json fj = {{"fold_id", f.fold_id},
               {"query_segments", f.query_segments},
               {"source_segments", f.source_segments},
               {"gold_links", f.gold_links},
               {"report", to_json(f.report)}};
    if (f.baseline) fj["baseline_retrieval_only"] = to_json(*f.baseline);
    if (!f.warnings.empty()) fj["warnings"] = f.warnings;
    folds.push_back(std::move(fj));
  }
  const auto& m = report.mean;
  json mean = {{"tp", m.tp},
               {"fp", m.fp},
               {"fn", m.fn},
               {"tn", m.tn},
               {"precision", m.precision},
               {"recall", m.recall},
               {"f1", m.f1},
               {"accuracy", m.accuracy},
               {"fpr", m.fpr},
               {"fnr", m.fnr},
               {"smr", m.smr},
               {"per_query", per_query_json(m.per_query)},
               {"review_count", m.review_count}};
  if (m.map) {
    json ir = {{"map", *m.map}};
    for (const auto& [k, v] : m.recall_at) ir["recall_at"][std::to_string(k)] = v;
    for (const auto& [k, v] : m.mrr_at) ir["mrr_at"][std::to_string(k)] = v;
    for (const auto& [k, v] : m.ndcg_at) ir["ndcg_at"][std::to_string(k)] = v;
    mean["ir"] = std::move(ir);
  }
  if (m.baseline_review_count) mean["baseline_review_count"] = *m.baseline_review_count;
  if (m.workload_reduction) mean["workload_reduction"] = *m.workload_reduction;
  return {{"config", report.config.to_json()},
          {"embedder", report.embedder_name},
          {"classifier", report.classifier_name},
          {"folds", std::move(folds)},
          {"mean", std::move(mean)}};
}

std::string format_report_text(const BenchmarkReport& report) {
  std::string out;
  const auto& run = report.config.run;
  out += fmt::format("architecture: {}  k: {}  threshold: {}  folds: {}  seed: {}\n", to_string(run.architecture),
                     run.k, run.threshold, report.config.folds, report.config.seed);
  if (!report.embedder_name.empty()) out += fmt::format("embedder: {}\n", report.embedder_name);
  if (!report.classifier_name.empty()) out += fmt::format("classifier: {}\n", report.classifier_name);
  out += '\n';
  out += fmt::format("{:<6} {:>6} {:>6} {:>5} {:>10} {:>10} {:>10} {:>12} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>9} {:>10}\n",
                     "fold", "query", "source", "gold", "TP", "FP", "FN", "TN", "prec", "recall", "F1", "acc", "FPR",
                     "FNR", "SMR", "review");
  for (const auto& f : report.folds) {
    const auto& r = f.report;
    out += fmt::format(
        "{:<6} {:>6} {:>6} {:>5} {:>10} {:>10} {:>10} {:>12} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} "
        "{:>9.4f} {:>10}\n",
        f.fold_id, f.query_segments, f.source_segments, f.gold_links, r.counts.tp, r.counts.fp, r.counts.fn,
        r.counts.tn, r.classification.precision, r.classification.recall, r.classification.f1,
        r.classification.accuracy, r.rates.fpr, r.rates.fnr, r.rates.smr, r.review_count);
  }
  const auto& m = report.mean;
  out += fmt::format(
      "{:<6} {:>6} {:>6} {:>5} {:>10.1f} {:>10.1f} {:>10.1f} {:>12.1f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} {:>9.4f} "
      "{:>9.4f} {:>9.4f} {:>10.1f}\n",
      "mean", "", "", "", m.tp, m.fp, m.fn, m.tn, m.precision, m.recall, m.f1, m.accuracy, m.fpr, m.fnr, m.smr,
      m.review_count);

  out += "\nper-query means:";
  for (const auto& [metric, value] : m.per_query) out += fmt::format("  {} {:.4f}", to_string(metric), value);
  out += '\n';

  if (m.map) {
    out += fmt::format("\n{:<8} {:>9} {:>9} {:>9}\n", "cutoff", "recall", "MRR", "NDCG");
    for (const auto& [k, v] : m.recall_at) {
      out += fmt::format("{:<8} {:>9.4f} {:>9.4f} {:>9.4f}\n", k, v, m.mrr_at.at(k), m.ndcg_at.at(k));
    }
    out += fmt::format("MAP {:.4f}\n", *m.map);
  }
  if (m.baseline_review_count) {
    out += fmt::format("\ncandidates to review: {:.1f} (retrieval-only at k={}: {:.1f})", m.review_count, run.k,
                       *m.baseline_review_count);
    if (m.workload_reduction) out += fmt::format(", reduction {:.2f}%", 100.0 * *m.workload_reduction);
    out += '\n';
  }
  return out;
}

}  // namespace intertext
