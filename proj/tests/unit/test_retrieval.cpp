#include <gtest/gtest.h>

#include <atomic>

#include <intertext/error.hpp>
#include <intertext/providers.hpp>
#include <intertext/retrieval.hpp>
#include <intertext/rng.hpp>

#include "oracles.hpp"

using namespace intertext;

namespace {

std::vector<Vector> random_vectors(std::size_t n, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Vector> out(n, Vector(dim));
  for (auto& v : out) {
    for (auto& x : v) x = static_cast<float>(rng.unit() * 2.0 - 1.0);
  }
  return out;
}

std::vector<std::string> ids_for(std::size_t n) {
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(i));
  return ids;
}

class CountingEmbedder final : public EmbeddingProvider {
 public:
  std::string name() const override { return "counting"; }
  std::size_t dim() const override { return 3; }
  std::vector<Vector> embed(std::span<const EmbedItem> items) const override {
    ++calls;
    std::vector<Vector> out;
    for (const auto& item : items) {
      seen_prefix = seen_prefix && (item.text.rfind("Query: ", 0) == 0 || item.text.rfind("Candidate: ", 0) == 0);
      out.push_back({static_cast<float>(item.text.size()), 1.0f, 0.0f});
    }
    if (short_by_one && !out.empty()) out.pop_back();
    return out;
  }
  mutable std::atomic<int> calls{0};
  mutable std::atomic<bool> seen_prefix{true};
  bool short_by_one = false;
};

}  // namespace

TEST(Prefix, RoleStrings) {
  EXPECT_EQ(embed_prefix(EmbedRole::query), "Query: ");
  EXPECT_EQ(embed_prefix(EmbedRole::candidate), "Candidate: ");
}

TEST(Topk, MatchesDoublePrecisionOracle) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto corpus = random_vectors(200, 16, seed);
    const auto ids = ids_for(corpus.size());
    const auto index = build_index(ids, corpus);
    const auto query = random_vectors(1, 16, seed + 100)[0];
    const auto expected = oracle::cosine_ranking(corpus, query);
    const auto got = topk(index, query, 20);
    ASSERT_EQ(got.size(), 20u);
    for (std::size_t i = 0; i < got.size(); ++i) {
      EXPECT_EQ(got[i].source_index, expected[i]) << "seed " << seed << " rank " << i + 1;
      EXPECT_EQ(got[i].rank, i + 1);
      EXPECT_EQ(got[i].source_seg_id, ids[expected[i]]);
    }
  }
}

TEST(Topk, TiesBreakByInsertionOrder) {
  const std::vector<Vector> corpus{{1, 0}, {0, 1}, {2, 0}, {1, 0}};
  const auto index = build_index(ids_for(4), corpus);
  const auto got = topk(index, Vector{1, 0}, 4);
  ASSERT_EQ(got.size(), 4u);
  EXPECT_EQ(got[0].source_index, 0u);
  EXPECT_EQ(got[1].source_index, 2u);
  EXPECT_EQ(got[2].source_index, 3u);
  EXPECT_EQ(got[3].source_index, 1u);
  EXPECT_DOUBLE_EQ(got[0].similarity, 1.0);
}

TEST(Topk, KLargerThanIndexReturnsEverything) {
  const auto corpus = random_vectors(7, 4, 9);
  const auto index = build_index(ids_for(7), corpus);
  EXPECT_EQ(topk(index, corpus[0], 100).size(), 7u);
  EXPECT_TRUE(topk(VectorIndex{}, corpus[0], 5).empty());
}

TEST(Topk, SelfIsRankedFirst) {
  const auto corpus = random_vectors(50, 8, 3);
  const auto index = build_index(ids_for(50), corpus);
  for (std::size_t i = 0; i < corpus.size(); ++i) EXPECT_EQ(topk(index, corpus[i], 1)[0].source_index, i);
}

TEST(BuildIndex, Errors) {
  const auto ids = ids_for(2);
  EXPECT_THROW(build_index(ids, std::vector<Vector>{{1, 0}}), Error);
  try {
    build_index(ids, std::vector<Vector>{{1, 0}, {0, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::validation);
    EXPECT_NE(std::string(e.what()).find("s1"), std::string::npos);
  }
  try {
    build_index(ids, std::vector<Vector>{{1, 0}, {0, 1, 0}});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::configuration);
  }
  const std::vector<std::string> dup{"a", "a"};
  EXPECT_THROW(build_index(dup, std::vector<Vector>{{1, 0}, {0, 1}}), Error);
}

TEST(Cosine, Basics) {
  EXPECT_DOUBLE_EQ(cosine(Vector{1, 0}, Vector{0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine(Vector{1, 1}, Vector{2, 2}), 1.0);
  EXPECT_DOUBLE_EQ(cosine(Vector{1, 0}, Vector{-3, 0}), -1.0);
}

TEST(EmbedSegments, PrefixesBatchesAndOrder) {
  const auto doc = testing_support::make_doc({{"a", "x"}, {"b", "xx"}, {"c", "xxx"}, {"d", "xxxx"}, {"e", "xxxxx"}});
  CountingEmbedder emb;
  const auto vectors = embed_segments(emb, doc.segments(), EmbedRole::query, {2, 3});
  ASSERT_EQ(vectors.size(), 5u);
  EXPECT_EQ(emb.calls.load(), 3);
  EXPECT_TRUE(emb.seen_prefix.load());
  for (std::size_t i = 0; i < vectors.size(); ++i) EXPECT_FLOAT_EQ(vectors[i][0], 8.0f + static_cast<float>(i));
}

TEST(EmbedSegments, WrongCountIsProviderContractError) {
  const auto doc = testing_support::make_doc({{"a", "x"}, {"b", "y"}});
  CountingEmbedder emb;
  emb.short_by_one = true;
  try {
    embed_segments(emb, doc.segments(), EmbedRole::candidate);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::provider_contract);
  }
}

TEST(EmbedSegments, ParallelEqualsSerial) {
  const auto doc = testing_support::make_doc(
      {{"a", "arma uirumque cano"}, {"b", "troiae qui primus"}, {"c", "ab oris"}, {"d", "italiam fato"}});
  HashEmbeddingProvider emb(32, 5);
  EXPECT_EQ(embed_segments(emb, doc.segments(), EmbedRole::query, {1, 4}),
            embed_segments(emb, doc.segments(), EmbedRole::query, {64, 1}));
}

TEST(StoredVectors, JsonlAndBinaryRoundTrip) {
  testing_support::TempDir dir;
  StoredVectors stored{{"a", "b"}, {{0.5f, -1.25f, 3.0f}, {1e-7f, 2.0f, -0.0f}}};
  write_vectors_jsonl(dir / "v.jsonl", stored);
  write_vectors_binary(dir / "v.bin", stored);
  for (const auto* name : {"v.jsonl", "v.bin"}) {
    const auto back = load_vectors(dir / name);
    EXPECT_EQ(back.ids, stored.ids) << name;
    EXPECT_EQ(back.vectors, stored.vectors) << name;
  }
}

TEST(StoredVectors, TruncatedBinaryIsRejected) {
  testing_support::TempDir dir;
  write_vectors_binary(dir / "v.bin", StoredVectors{{"a"}, {{1.0f, 2.0f}}});
  auto bytes = read_file(dir / "v.bin");
  bytes.resize(bytes.size() - 3);
  write_file(dir / "cut.bin", bytes);
  EXPECT_THROW(load_vectors(dir / "cut.bin"), Error);
}
