#include <gtest/gtest.h>

#include <functional>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>

#include <intertext/error.hpp>
#include <intertext/providers.hpp>
#include <intertext/text.hpp>

#include "oracles.hpp"

using namespace intertext;
using nlohmann::json;

namespace {

// Reference for the hash embedder written straight from its documented
// definition.
std::vector<double> hash_embedding_reference(const std::string& text, std::size_t dim, std::uint64_t seed) {
  std::vector<double> acc(dim, 0.0);
  for (const auto& tok : tokenize(text)) {
    std::uint64_t state = fnv1a64(tok) ^ seed;
    for (std::size_t d = 0; d < dim; ++d) {
      state += 0x9e3779b97f4a7c15ULL;
      std::uint64_t z = state;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
      z ^= z >> 31;
      acc[d] += 2.0 * std::ldexp(static_cast<double>(z >> 11), -53) - 1.0;
    }
  }
  double norm = 0.0;
  for (double v : acc) norm += v * v;
  norm = std::sqrt(norm);
  if (norm > 0.0) {
    for (double& v : acc) v /= norm;
  }
  return acc;
}

class StubServer {
 public:
  explicit StubServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/embed", handler);
    server_.Post("/classify", handler);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~StubServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::vector<EmbedItem> items(std::initializer_list<std::string> texts) {
  std::vector<EmbedItem> out;
  int i = 0;
  for (const auto& t : texts) out.push_back({"seg" + std::to_string(i++), t, EmbedRole::query});
  return out;
}

HttpOptions fast_options(unsigned retries) {
  HttpOptions o;
  o.timeout = std::chrono::seconds(5);
  o.retries = retries;
  return o;
}

}  // namespace

TEST(HashEmbedder, MatchesReferenceDefinition) {
  HashEmbeddingProvider emb(48, 11);
  for (const std::string text : {"Arma uirumque cano", "Troiae qui primus ab oris", "et et et"}) {
    const auto got = emb.embed_text(text);
    const auto want = hash_embedding_reference(text, 48, 11);
    ASSERT_EQ(got.size(), 48u);
    for (std::size_t d = 0; d < 48; ++d) EXPECT_NEAR(got[d], want[d], 1e-6) << text << " dim " << d;
  }
}

TEST(HashEmbedder, UnitNormAndOrderInsensitive) {
  HashEmbeddingProvider emb;
  const auto a = emb.embed_text("uox faucibus haesit");
  const auto b = emb.embed_text("Haesit uox faucibus");
  EXPECT_EQ(a, b);
  double sq = 0.0;
  for (float x : a) sq += static_cast<double>(x) * x;
  EXPECT_NEAR(sq, 1.0, 1e-5);
}

TEST(HashEmbedder, PunctuationOnlyGivesZeroVector) {
  HashEmbeddingProvider emb(8);
  EXPECT_EQ(emb.embed_text("... ;"), Vector(8, 0.0f));
}

TEST(HashEmbedder, SeedChangesVectors) {
  EXPECT_NE(HashEmbeddingProvider(16, 1).embed_text("rosa"), HashEmbeddingProvider(16, 2).embed_text("rosa"));
  EXPECT_THROW(HashEmbeddingProvider(0), Error);
}

TEST(FileEmbedder, ServesByIdAndRole) {
  testing_support::TempDir dir;
  write_vectors_jsonl(dir / "q.jsonl", StoredVectors{{"a"}, {{1.0f, 0.0f}}});
  write_vectors_jsonl(dir / "c.jsonl", StoredVectors{{"a"}, {{0.0f, 1.0f}}});
  FileEmbeddingProvider emb((dir / "q.jsonl"), (dir / "c.jsonl"));
  std::vector<EmbedItem> req{{"a", "Query: x", EmbedRole::query}, {"a", "Candidate: x", EmbedRole::candidate}};
  const auto out = emb.embed(req);
  EXPECT_EQ(out[0], (Vector{1.0f, 0.0f}));
  EXPECT_EQ(out[1], (Vector{0.0f, 1.0f}));
  EXPECT_EQ(emb.dim(), 2u);
}

TEST(FileEmbedder, MissingIdIsNonRetryableTransportError) {
  testing_support::TempDir dir;
  write_vectors_jsonl(dir / "v.jsonl", StoredVectors{{"a"}, {{1.0f, 0.0f}}});
  FileEmbeddingProvider emb(dir / "v.jsonl");
  std::vector<EmbedItem> req{{"zz", "Query: x", EmbedRole::query}};
  try {
    emb.embed(req);
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_FALSE(e.retryable());
    EXPECT_NE(std::string(e.what()).find("zz"), std::string::npos);
  }
}

TEST(HttpEmbedder, PostsTextsAndParsesVectors) {
  StubServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    json vectors = json::array();
    for (const auto& t : body["texts"]) vectors.push_back({static_cast<double>(t.get<std::string>().size()), 1.0});
    res.set_content(json{{"vectors", vectors}}.dump(), "application/json");
  });
  HttpEmbeddingProvider emb(server.url("/embed"), 0, fast_options(0));
  EXPECT_EQ(emb.dim(), 0u);
  const auto out = emb.embed(items({"abc", "de"}));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0], (Vector{3.0f, 1.0f}));
  EXPECT_EQ(out[1], (Vector{2.0f, 1.0f}));
  EXPECT_EQ(emb.dim(), 2u);
}

TEST(HttpEmbedder, RetriesServerErrorsThenSucceeds) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 3) {
      res.status = 503;
      return;
    }
    res.set_content(R"({"vectors": [[1, 0]]})", "application/json");
  });
  HttpEmbeddingProvider emb(server.url("/embed"), 0, fast_options(2));
  EXPECT_EQ(emb.embed(items({"x"})).size(), 1u);
  EXPECT_EQ(hits.load(), 3);
}

TEST(HttpEmbedder, ExhaustedRetriesRaiseTransportErrorWithSegmentIds) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
  });
  HttpEmbeddingProvider emb(server.url("/embed"), 0, fast_options(1));
  try {
    emb.embed(items({"x", "y"}));
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_TRUE(e.retryable());
    EXPECT_EQ(e.segment_ids(), (std::vector<std::string>{"seg0", "seg1"}));
  }
  EXPECT_EQ(hits.load(), 2);
}

TEST(HttpEmbedder, UnreachableHostIsTransportError) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  HttpEmbeddingProvider emb("http://127.0.0.1:" + std::to_string(port) + "/embed", 0, fast_options(0));
  EXPECT_THROW(emb.embed(items({"x"})), TransportError);
}

TEST(HttpEmbedder, ClientErrorsAndMalformedBodiesBreakTheContract) {
  StubServer bad_status([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
  StubServer no_vectors([](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"embeddings": []})", "application/json");
  });
  StubServer not_json([](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
  for (const auto* server : {&bad_status, &no_vectors, &not_json}) {
    HttpEmbeddingProvider emb(server->url("/embed"), 0, fast_options(0));
    try {
      emb.embed(items({"x"}));
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::provider_contract);
    }
  }
}

TEST(HttpEmbedder, DimensionChangeIsConfigurationError) {
  std::atomic<int> hits{0};
  StubServer server([&](const httplib::Request&, httplib::Response& res) {
    res.set_content(++hits == 1 ? R"({"vectors": [[1, 0]]})" : R"({"vectors": [[1, 0, 0]]})", "application/json");
  });
  HttpEmbeddingProvider emb(server.url("/embed"), 0, fast_options(0));
  emb.embed(items({"x"}));
  try {
    emb.embed(items({"y"}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::configuration);
  }
}

TEST(HttpClassifier, PostsPairsAndParsesProbabilities) {
  StubServer server([](const httplib::Request& req, httplib::Response& res) {
    const auto body = json::parse(req.body);
    json probs = json::array();
    for (const auto& p : body["pairs"]) probs.push_back(p[0] == p[1] ? 1.0 : 0.25);
    res.set_content(json{{"probs", probs}}.dump(), "application/json");
  });
  HttpPairClassifier clf(server.url("/classify"), 256, fast_options(0));
  const std::vector<TextPair> pairs{{"a", "a"}, {"a", "b"}};
  EXPECT_EQ(clf.classify(pairs), (std::vector<double>{1.0, 0.25}));
  EXPECT_EQ(clf.max_tokens(), 256u);
}

TEST(Jaccard, TokenSetSimilarity) {
  EXPECT_DOUBLE_EQ(JaccardPairClassifier::score("uox faucibus haesit", "Haesit uox faucibus"), 1.0);
  EXPECT_DOUBLE_EQ(JaccardPairClassifier::score("a b", "b c"), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(JaccardPairClassifier::score("", ""), 1.0);
  EXPECT_DOUBLE_EQ(JaccardPairClassifier::score("a", ""), 0.0);
}

TEST(ProviderSpecs, Factories) {
  EXPECT_EQ(make_embedder("hash")->name(), "hash:64:0");
  EXPECT_EQ(make_embedder("hash:32:9")->name(), "hash:32:9");
  EXPECT_EQ(make_embedder("hash:16")->dim(), 16u);
  EXPECT_EQ(make_classifier("jaccard")->name(), "jaccard");
  EXPECT_EQ(make_embedder("http://localhost:1/embed")->name(), "http:http://localhost:1/embed");
  for (const auto* bad : {"bert", "hash:x", "hash:1:2:3", "file:"}) {
    try {
      make_embedder(bad);
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_NE(e.code(), ErrorCode::transport) << bad;
    }
  }
  EXPECT_THROW(make_classifier("roberta"), Error);
}
