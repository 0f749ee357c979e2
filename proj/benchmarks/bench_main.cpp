#include <benchmark/benchmark.h>

#include <intertext/matcher.hpp>
#include <intertext/metrics.hpp>
#include <intertext/pipeline.hpp>
#include <intertext/providers.hpp>
#include <intertext/retrieval.hpp>
#include <intertext/synthetic.hpp>

using namespace intertext;

namespace {

SyntheticCorpus corpus_of(std::size_t n) {
  SyntheticSpec spec;
  spec.query_segments = n;
  spec.source_segments = n;
  spec.links = n / 10;
  spec.seed = 1;
  return make_synthetic_corpus(spec);
}

void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto c = corpus_of(n);
  HashEmbeddingProvider emb(256, 0);
  std::vector<std::string> ids;
  std::vector<Vector> vectors;
  for (const auto& s : c.source.segments()) {
    ids.push_back(s.id);
    vectors.push_back(emb.embed_text(s.text));
  }
  const auto index = build_index(ids, vectors);
  const auto query = emb.embed_text(c.query[0].text);
  for (auto _ : state) benchmark::DoNotOptimize(topk(index, query, 100));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n));
}
BENCHMARK(BM_TopK)->Arg(1000)->Arg(10000);

void BM_FindRawCandidates(benchmark::State& state) {
  const auto c = corpus_of(static_cast<std::size_t>(state.range(0)));
  MatchParams p;
  for (auto _ : state) benchmark::DoNotOptimize(find_raw_candidates(c.query, c.source, p));
}
BENCHMARK(BM_FindRawCandidates)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Confusion(benchmark::State& state) {
  const auto c = corpus_of(static_cast<std::size_t>(state.range(0)));
  HashEmbeddingProvider emb;
  const auto stage = prepare_retrieval(c.query, c.source, emb);
  const auto matches = run_retrieval_only(c.query, stage, 20);
  for (auto _ : state) benchmark::DoNotOptimize(confusion(matches, c.links, c.query, c.source));
}
BENCHMARK(BM_Confusion)->Arg(1000);

void BM_RetrieveRerank(benchmark::State& state) {
  const auto c = corpus_of(static_cast<std::size_t>(state.range(0)));
  HashEmbeddingProvider emb;
  JaccardPairClassifier clf;
  const auto stage = prepare_retrieval(c.query, c.source, emb);
  for (auto _ : state) benchmark::DoNotOptimize(run_retrieve_rerank(c.query, c.source, stage, clf, 10, 0.5, 512));
}
BENCHMARK(BM_RetrieveRerank)->Arg(500)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
