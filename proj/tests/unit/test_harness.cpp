#include <gtest/gtest.h>

#include <intertext/error.hpp>
#include <intertext/harness.hpp>
#include <intertext/providers.hpp>
#include <intertext/synthetic.hpp>

#include "oracles.hpp"

using namespace intertext;

namespace {

const SyntheticCorpus& corpus() {
  static const auto c = [] {
    SyntheticSpec spec;
    spec.query_segments = 400;
    spec.source_segments = 400;
    spec.links = 60;
    spec.vocabulary = 300;
    spec.seed = 13;
    return make_synthetic_corpus(spec);
  }();
  return c;
}

BenchmarkConfig small_config(Architecture arch, std::size_t k) {
  BenchmarkConfig cfg;
  cfg.run.architecture = arch;
  cfg.run.k = k;
  cfg.run.threshold = 0.2;
  cfg.folds = 3;
  cfg.seed = 5;
  cfg.query_size = 80;
  cfg.source_size = 90;
  cfg.ir_ks = {1, 5, 10};
  return cfg;
}

struct MockProviders {
  HashEmbeddingProvider embedder{64, 0};
  JaccardPairClassifier classifier;
  Providers get() const { return {&embedder, &classifier}; }
};

}  // namespace

TEST(EvaluateMatches, ReviewCountIsTpPlusFp) {
  const auto& c = corpus();
  MockProviders p;
  const auto fold = make_folds(c.links, 3, 1)[0];
  const auto docs = build_eval_docs(fold, c.query, c.source, 60, 70, 2);
  const auto matches = run_retrieve_rerank(docs.query, docs.source, p.embedder, p.classifier, 10, 0.2, 512);
  const auto report = evaluate_matches(matches, docs.gold, docs.query, docs.source);
  EXPECT_EQ(report.review_count, report.counts.tp + report.counts.fp);
  EXPECT_EQ(report.counts.n(), docs.query.size() * docs.source.size());
  EXPECT_FALSE(report.ir.has_value());
  EXPECT_EQ(report.rates.smr, report.rates.fpr + report.rates.fnr);
  EXPECT_EQ(report.per_query.count(QueryMetric::smr), 1u);
}

TEST(RunBenchmark, RetrievalOnlyReviewsKPerQuery) {
  const auto& c = corpus();
  MockProviders p;
  const auto report = run_benchmark(small_config(Architecture::retrieval_only, 20), c.query, c.source, c.links, p.get());
  ASSERT_EQ(report.folds.size(), 3u);
  for (const auto& f : report.folds) {
    EXPECT_EQ(f.query_segments, 80u);
    EXPECT_EQ(f.source_segments, 90u);
    EXPECT_EQ(f.report.review_count, 20u * 80u);
    ASSERT_TRUE(f.report.ir.has_value());
    EXPECT_LE(f.report.ir->recall.at(1), f.report.ir->recall.at(5));
    EXPECT_LE(f.report.ir->recall.at(5), f.report.ir->recall.at(10));
  }
  EXPECT_DOUBLE_EQ(report.mean.review_count, 1600.0);
  EXPECT_EQ(report.folds[0].gold_links + report.folds[1].gold_links + report.folds[2].gold_links, c.links.size());
}

TEST(RunBenchmark, RerankReportsBaselineAndReduction) {
  const auto& c = corpus();
  MockProviders p;
  const auto report = run_benchmark(small_config(Architecture::retrieve_rerank, 10), c.query, c.source, c.links, p.get());
  double mean_review = 0.0;
  for (const auto& f : report.folds) {
    EXPECT_EQ(f.report.review_count, f.report.counts.tp + f.report.counts.fp);
    ASSERT_TRUE(f.baseline.has_value());
    EXPECT_EQ(f.baseline->review_count, 10u * f.query_segments);
    EXPECT_LE(f.report.counts.tp, f.baseline->counts.tp);
    mean_review += static_cast<double>(f.report.review_count) / 3.0;
  }
  EXPECT_NEAR(report.mean.review_count, mean_review, 1e-9);
  ASSERT_TRUE(report.mean.baseline_review_count.has_value());
  ASSERT_TRUE(report.mean.workload_reduction.has_value());
  EXPECT_NEAR(*report.mean.workload_reduction, 1.0 - report.mean.review_count / *report.mean.baseline_review_count,
              1e-12);
}

TEST(RunBenchmark, MeansAreUnweightedOverFolds) {
  const auto& c = corpus();
  MockProviders p;
  const auto report = run_benchmark(small_config(Architecture::retrieve_rerank, 5), c.query, c.source, c.links, p.get());
  double tp = 0, smr = 0, precision = 0;
  for (const auto& f : report.folds) {
    tp += static_cast<double>(f.report.counts.tp);
    smr += f.report.rates.smr;
    precision += f.report.classification.precision;
  }
  EXPECT_NEAR(report.mean.tp, tp / 3.0, 1e-12);
  EXPECT_NEAR(report.mean.smr, smr / 3.0, 1e-12);
  EXPECT_NEAR(report.mean.precision, precision / 3.0, 1e-12);
}

TEST(RunBenchmark, ParallelFoldsMatchSerial) {
  const auto& c = corpus();
  MockProviders p;
  auto cfg = small_config(Architecture::retrieve_rerank, 5);
  const auto serial = to_json(run_benchmark(cfg, c.query, c.source, c.links, p.get()));
  cfg.fold_jobs = 3;
  const auto parallel = to_json(run_benchmark(cfg, c.query, c.source, c.links, p.get()));
  EXPECT_EQ(serial.dump(), parallel.dump());
}

TEST(RunBenchmark, ReportsAreDeterministic) {
  const auto& c = corpus();
  MockProviders p;
  const auto cfg = small_config(Architecture::retrieve_rerank, 5);
  const auto a = run_benchmark(cfg, c.query, c.source, c.links, p.get());
  const auto b = run_benchmark(cfg, c.query, c.source, c.links, p.get());
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  EXPECT_EQ(format_report_text(a), format_report_text(b));
  EXPECT_NE(format_report_text(a).find("candidates to review"), std::string::npos);
}

TEST(RunBenchmark, NgramHasNoIrBlock) {
  const auto& c = corpus();
  auto cfg = small_config(Architecture::ngram, 5);
  cfg.run.filters.max_doc_freq = 1.0;
  const auto report = run_benchmark(cfg, c.query, c.source, c.links, {});
  for (const auto& f : report.folds) EXPECT_FALSE(f.report.ir.has_value());
  EXPECT_FALSE(report.mean.map.has_value());
}

TEST(RunBenchmark, ConfigJsonListsTheProtocol) {
  const auto j = small_config(Architecture::retrieval_only, 7).to_json();
  EXPECT_EQ(j["folds"], 3);
  EXPECT_EQ(j["run"]["k"], 7);
  EXPECT_EQ(j["ir_ks"], nlohmann::json::array({1, 5, 10}));
}
