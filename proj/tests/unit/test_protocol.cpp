#include <gtest/gtest.h>

#include <set>

#include <intertext/error.hpp>
#include <intertext/protocol.hpp>
#include <intertext/providers.hpp>
#include <intertext/synthetic.hpp>

#include "oracles.hpp"

using namespace intertext;

namespace {

std::vector<LinkRecord> numbered_links(std::size_t n) {
  std::vector<LinkRecord> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({"q" + std::to_string(i), "s" + std::to_string(i), {}, ""});
  return out;
}

std::set<SegmentPair> as_set(std::span<const LinkRecord> links) {
  std::set<SegmentPair> out;
  for (const auto& l : links) out.emplace(l.query_seg_id, l.source_seg_id);
  return out;
}

const SyntheticCorpus& fold_corpus() {
  static const auto c = [] {
    SyntheticSpec spec;
    spec.query_segments = 1400;
    spec.source_segments = 1400;
    spec.links = 545;
    spec.vocabulary = 800;
    spec.seed = 21;
    return make_synthetic_corpus(spec);
  }();
  return c;
}

const SyntheticCorpus& sampling_corpus() {
  static const auto c = [] {
    SyntheticSpec spec;
    spec.query_segments = 120;
    spec.source_segments = 150;
    spec.links = 30;
    spec.repeat_query_fraction = 0.3;
    spec.seed = 5;
    return make_synthetic_corpus(spec);
  }();
  return c;
}

}  // namespace

TEST(Folds, FiveHundredFortyFiveLinksGiveFiveEqualFolds) {
  const auto links = numbered_links(545);
  const auto folds = make_folds(links, 5, 7);
  ASSERT_EQ(folds.size(), 5u);
  std::set<SegmentPair> seen;
  for (const auto& f : folds) {
    EXPECT_EQ(f.test_links.size(), 109u);
    EXPECT_EQ(f.train_links.size(), 436u);
    for (const auto& p : as_set(f.test_links)) EXPECT_TRUE(seen.insert(p).second);
  }
  EXPECT_EQ(seen, as_set(links));
}

TEST(Folds, TrainIsTheComplementOfTest) {
  const auto links = numbered_links(23);
  for (const auto& f : make_folds(links, 4, 1)) {
    auto train = as_set(f.train_links);
    const auto test = as_set(f.test_links);
    for (const auto& p : test) EXPECT_FALSE(train.contains(p));
    train.insert(test.begin(), test.end());
    EXPECT_EQ(train, as_set(links));
  }
}

TEST(Folds, SizesDifferByAtMostOne) {
  const auto folds = make_folds(numbered_links(11), 3, 2);
  std::multiset<std::size_t> sizes;
  for (const auto& f : folds) sizes.insert(f.test_links.size());
  EXPECT_EQ(sizes, (std::multiset<std::size_t>{3, 4, 4}));
  for (const auto& f : make_folds(numbered_links(10), 5, 2)) EXPECT_EQ(f.test_links.size(), 2u);
}

TEST(Folds, SeedDeterminesTheSplit) {
  const auto links = numbered_links(50);
  const auto a = make_folds(links, 5, 99);
  const auto b = make_folds(links, 5, 99);
  const auto c = make_folds(links, 5, 100);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(as_set(a[i].test_links), as_set(b[i].test_links));
  bool differs = false;
  for (std::size_t i = 0; i < 5; ++i) differs |= as_set(a[i].test_links) != as_set(c[i].test_links);
  EXPECT_TRUE(differs);
}

TEST(Folds, InvalidKIsConfigurationError) {
  const auto links = numbered_links(4);
  for (std::size_t k : {0, 5}) {
    try {
      make_folds(links, k, 0);
      FAIL() << k;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::configuration);
    }
  }
}

TEST(EvalDocs, DefaultSizesWithHeldOutLinks) {
  const auto& c = fold_corpus();
  const auto folds = make_folds(c.links, 5, 7);
  const auto docs = build_eval_docs(folds[0], c.query, c.source);
  EXPECT_EQ(docs.query.size(), 937u);
  EXPECT_EQ(docs.source.size(), 880u);
  EXPECT_EQ(as_set(docs.gold), as_set(folds[0].test_links));

  for (const auto& l : folds[0].test_links) {
    EXPECT_NE(docs.query.find(l.query_seg_id), nullptr);
    EXPECT_NE(docs.source.find(l.source_seg_id), nullptr);
  }
  std::set<std::string> test_q, test_s;
  for (const auto& l : folds[0].test_links) {
    test_q.insert(l.query_seg_id);
    test_s.insert(l.source_seg_id);
  }
  for (const auto& l : folds[0].train_links) {
    if (!test_q.contains(l.query_seg_id)) EXPECT_EQ(docs.query.find(l.query_seg_id), nullptr);
    if (!test_s.contains(l.source_seg_id)) EXPECT_EQ(docs.source.find(l.source_seg_id), nullptr);
  }
  for (std::size_t i = 1; i < docs.query.size(); ++i) {
    EXPECT_LT(*c.query.index_of(docs.query[i - 1].id), *c.query.index_of(docs.query[i].id));
  }
}

TEST(EvalDocs, ExactPositiveCountMeansNoDistractors) {
  const auto& c = fold_corpus();
  const auto fold = make_folds(c.links, 5, 7)[1];
  std::set<std::string> qs, ss;
  for (const auto& l : fold.test_links) {
    qs.insert(l.query_seg_id);
    ss.insert(l.source_seg_id);
  }
  const auto docs = build_eval_docs(fold, c.query, c.source, qs.size(), ss.size(), 3);
  EXPECT_EQ(docs.query.size(), qs.size());
  EXPECT_EQ(docs.source.size(), ss.size());
}

TEST(EvalDocs, SeedIsReproducible) {
  const auto& c = fold_corpus();
  const auto fold = make_folds(c.links, 5, 7)[2];
  const auto a = build_eval_docs(fold, c.query, c.source, 300, 300, 11);
  const auto b = build_eval_docs(fold, c.query, c.source, 300, 300, 11);
  const auto other = build_eval_docs(fold, c.query, c.source, 300, 300, 12);
  EXPECT_EQ(a.query.checksum(), b.query.checksum());
  EXPECT_EQ(a.source.checksum(), b.source.checksum());
  EXPECT_NE(a.query.checksum(), other.query.checksum());
}

TEST(EvalDocs, InsufficientCorpusIsConfigurationError) {
  const auto& c = fold_corpus();
  const auto fold = make_folds(c.links, 5, 7)[0];
  try {
    build_eval_docs(fold, c.query, c.source, 5000, 880, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::configuration);
  }
  EXPECT_THROW(build_eval_docs(fold, c.query, c.source, 3, 880, 0), Error);
}

TEST(Strategies, NamesRoundTrip) {
  for (auto s : {SamplingStrategy::positive, SamplingStrategy::random_pair, SamplingStrategy::random_negative,
                 SamplingStrategy::hard_negative, SamplingStrategy::mixed}) {
    EXPECT_EQ(parse_sampling_strategy(to_string(s)), s);
  }
  EXPECT_EQ(parse_sampling_strategy("hard"), SamplingStrategy::hard_negative);
  EXPECT_THROW(parse_sampling_strategy("clever"), Error);
}

TEST(Sampling, PositivePairsCarryTextsAndLabelOne) {
  const auto& c = sampling_corpus();
  const auto pos = positive_pairs(c.links, c.query, c.source);
  ASSERT_EQ(pos.size(), c.links.size());
  for (std::size_t i = 0; i < pos.size(); ++i) {
    EXPECT_EQ(pos[i].label, 1);
    EXPECT_EQ(pos[i].strategy, SamplingStrategy::positive);
    EXPECT_EQ(pos[i].query_text, c.query.find(c.links[i].query_seg_id)->text);
    EXPECT_EQ(pos[i].candidate_text, c.source.find(c.links[i].source_seg_id)->text);
  }
}

TEST(Sampling, ForcedSingleNonGoldSource) {
  const auto q = testing_support::make_doc({{"q", "a"}});
  const auto s = testing_support::make_doc({{"g", "a"}, {"n", "b"}}, Role::source);
  const std::vector<LinkRecord> links{{"q", "g", {}, ""}};
  NegativeSamplingOptions opts;
  const auto neg = sample_negatives(SamplingStrategy::random_negative, links, q, s, opts);
  ASSERT_EQ(neg.size(), 1u);
  EXPECT_EQ(neg[0].source_seg_id, "n");
  EXPECT_EQ(neg[0].label, 0);
  opts.ratio = 2;
  EXPECT_THROW(sample_negatives(SamplingStrategy::random_negative, links, q, s, opts), Error);
}

class RatioSweep : public ::testing::TestWithParam<std::tuple<SamplingStrategy, std::size_t>> {};

TEST_P(RatioSweep, ExactCountAndNoGoldCollisions) {
  const auto [strategy, r] = GetParam();
  const auto& c = sampling_corpus();
  HashEmbeddingProvider emb(32, 1);
  NegativeSamplingOptions opts;
  opts.ratio = r;
  opts.seed = 4;
  opts.embedder = &emb;
  const auto neg = sample_negatives(strategy, c.links, c.query, c.source, opts);
  ASSERT_EQ(neg.size(), r * c.links.size());
  const auto gold = as_set(c.links);
  for (std::size_t i = 0; i < neg.size(); ++i) {
    EXPECT_FALSE(gold.contains({neg[i].query_seg_id, neg[i].source_seg_id}));
    EXPECT_EQ(neg[i].label, 0);
    EXPECT_EQ(neg[i].strategy, strategy);
    if (strategy != SamplingStrategy::random_pair) EXPECT_EQ(neg[i].query_seg_id, c.links[i / r].query_seg_id);
  }
  if (strategy != SamplingStrategy::random_pair) {
    for (std::size_t p = 0; p < c.links.size(); ++p) {
      std::set<std::string> sources;
      for (std::size_t i = p * r; i < (p + 1) * r; ++i) sources.insert(neg[i].source_seg_id);
      EXPECT_EQ(sources.size(), r);
    }
  } else {
    std::set<SegmentPair> distinct;
    for (const auto& n : neg) distinct.emplace(n.query_seg_id, n.source_seg_id);
    EXPECT_EQ(distinct.size(), neg.size());
  }
  EXPECT_EQ(sample_negatives(strategy, c.links, c.query, c.source, opts), neg);
}

INSTANTIATE_TEST_SUITE_P(
    Strategies, RatioSweep,
    ::testing::Combine(::testing::Values(SamplingStrategy::random_pair, SamplingStrategy::random_negative,
                                         SamplingStrategy::hard_negative, SamplingStrategy::mixed),
                       ::testing::Values(std::size_t{1}, std::size_t{5}, std::size_t{10})));

TEST(Sampling, HardNegativesAreTheTopNonGoldByCosine) {
  const auto& c = sampling_corpus();
  HashEmbeddingProvider emb(32, 1);
  std::vector<Vector> source_vectors;
  for (const auto& s : c.source.segments()) source_vectors.push_back(emb.embed_text("Candidate: " + s.text));
  const auto gold = as_set(c.links);
  for (std::size_t r : {1, 5, 10}) {
    NegativeSamplingOptions opts;
    opts.ratio = r;
    opts.embedder = &emb;
    const auto neg = sample_negatives(SamplingStrategy::hard_negative, c.links, c.query, c.source, opts);
    for (std::size_t p = 0; p < c.links.size(); ++p) {
      const auto& qid = c.links[p].query_seg_id;
      const auto ranking = oracle::cosine_ranking(source_vectors, emb.embed_text("Query: " + c.query.find(qid)->text));
      std::vector<std::string> expected;
      for (auto idx : ranking) {
        if (expected.size() == r) break;
        if (!gold.contains({qid, c.source[idx].id})) expected.push_back(c.source[idx].id);
      }
      for (std::size_t i = 0; i < r; ++i) EXPECT_EQ(neg[p * r + i].source_seg_id, expected[i]) << qid << " r=" << r;
    }
  }
}

TEST(Sampling, MixedSplitsTowardRandom) {
  const auto& c = sampling_corpus();
  HashEmbeddingProvider emb(32, 1);
  NegativeSamplingOptions opts;
  opts.ratio = 5;
  opts.embedder = &emb;
  const auto hard = sample_negatives(SamplingStrategy::hard_negative, c.links, c.query, c.source, opts);
  const auto mixed = sample_negatives(SamplingStrategy::mixed, c.links, c.query, c.source, opts);
  // floor(5/2) = 2 hard negatives lead each group.
  for (std::size_t p = 0; p < c.links.size(); ++p) {
    EXPECT_EQ(mixed[p * 5].source_seg_id, hard[p * 5].source_seg_id);
    EXPECT_EQ(mixed[p * 5 + 1].source_seg_id, hard[p * 5 + 1].source_seg_id);
  }
}

TEST(Sampling, HardWithoutEmbedderIsConfigurationError) {
  const auto& c = sampling_corpus();
  try {
    sample_negatives(SamplingStrategy::hard_negative, c.links, c.query, c.source, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::configuration);
  }
}

TEST(Sampling, ExtraGoldIsAlsoAvoided) {
  const auto q = testing_support::make_doc({{"q", "a"}});
  const auto s = testing_support::make_doc({{"g1", "a"}, {"g2", "b"}, {"n", "c"}}, Role::source);
  const std::vector<LinkRecord> positives{{"q", "g1", {}, ""}};
  const std::vector<LinkRecord> all_gold{{"q", "g1", {}, ""}, {"q", "g2", {}, ""}};
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    NegativeSamplingOptions opts;
    opts.seed = seed;
    opts.gold = all_gold;
    EXPECT_EQ(sample_negatives(SamplingStrategy::random_negative, positives, q, s, opts)[0].source_seg_id, "n");
  }
}

TEST(TrainingPairs, ExportRoundTrip) {
  const auto& c = sampling_corpus();
  auto pairs = positive_pairs(std::span(c.links).first(3), c.query, c.source);
  NegativeSamplingOptions opts;
  const auto neg = sample_negatives(SamplingStrategy::random_negative, std::span(c.links).first(3), c.query, c.source,
                                    opts);
  pairs.insert(pairs.end(), neg.begin(), neg.end());
  testing_support::TempDir dir;
  for (const auto* name : {"pairs.csv", "pairs.jsonl"}) {
    EXPECT_EQ(export_training_pairs(pairs, dir / name, pair_format_from_path(dir / name)), 6u);
    const auto back = load_training_pairs(dir / name);
    ASSERT_EQ(back.size(), pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      EXPECT_EQ(back[i].query_text, pairs[i].query_text);
      EXPECT_EQ(back[i].candidate_text, pairs[i].candidate_text);
      EXPECT_EQ(back[i].label, pairs[i].label);
      EXPECT_EQ(back[i].strategy, pairs[i].strategy);
    }
  }
}

TEST(TrainingPairs, EmptyListWritesHeaderOnly) {
  testing_support::TempDir dir;
  EXPECT_EQ(export_training_pairs({}, dir / "p.csv", PairFormat::csv), 0u);
  EXPECT_EQ(read_file(dir / "p.csv"), "query_text,candidate_text,label,strategy\n");
  EXPECT_TRUE(load_training_pairs(dir / "p.csv").empty());
}

TEST(TrainingPairs, LabelMustAgreeWithStrategy) {
  EXPECT_THROW(parse_training_pairs("query_text,candidate_text,label,strategy\na,b,1,hard_negative\n", PairFormat::csv),
               Error);
  EXPECT_THROW(parse_training_pairs("query_text,candidate_text,label,strategy\na,b,yes,positive\n", PairFormat::csv),
               Error);
}
