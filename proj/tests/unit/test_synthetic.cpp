#include <gtest/gtest.h>

#include <map>
#include <set>

#include <intertext/synthetic.hpp>

using namespace intertext;

TEST(Synthetic, ShapeFollowsTheSpec) {
  SyntheticSpec spec;
  spec.query_segments = 120;
  spec.source_segments = 90;
  spec.links = 25;
  const auto c = make_synthetic_corpus(spec);
  EXPECT_EQ(c.query.size(), 120u);
  EXPECT_EQ(c.source.size(), 90u);
  EXPECT_EQ(c.links.size(), 25u);
  EXPECT_EQ(c.query.role(), Role::query);
  EXPECT_EQ(c.source.role(), Role::source);
  for (const auto& seg : c.source.segments()) {
    EXPECT_GE(seg.tokens.size(), spec.min_tokens);
    EXPECT_LE(seg.tokens.size(), spec.max_tokens);
  }
}

TEST(Synthetic, SameSeedSameCorpus) {
  SyntheticSpec spec;
  const auto a = make_synthetic_corpus(spec);
  const auto b = make_synthetic_corpus(spec);
  EXPECT_EQ(a.query.checksum(), b.query.checksum());
  EXPECT_EQ(a.source.checksum(), b.source.checksum());
  EXPECT_EQ(format_links(a.links, FileFormat::csv), format_links(b.links, FileFormat::csv));
  spec.seed = 8;
  EXPECT_NE(make_synthetic_corpus(spec).query.checksum(), a.query.checksum());
}

TEST(Synthetic, LinksAreValidAndSourcesUsedOnce) {
  SyntheticSpec spec;
  spec.links = 60;
  spec.repeat_query_fraction = 0.25;
  const auto c = make_synthetic_corpus(spec);
  EXPECT_NO_THROW(validate_links(c.links, &c.query, &c.source));
  std::set<std::string> sources;
  std::map<std::string, int> per_query;
  for (const auto& l : c.links) {
    EXPECT_TRUE(sources.insert(l.source_seg_id).second);
    ++per_query[l.query_seg_id];
    EXPECT_EQ(l.provenance, "synthetic");
  }
  EXPECT_LT(per_query.size(), c.links.size());
}

TEST(Synthetic, LinkedQueriesBorrowSourceTokens) {
  SyntheticSpec spec;
  spec.links = 30;
  const auto c = make_synthetic_corpus(spec);
  for (const auto& l : c.links) {
    const auto& q = c.query.find(l.query_seg_id)->tokens;
    const auto& s = c.source.find(l.source_seg_id)->tokens;
    const std::set<std::string> qs(q.begin(), q.end());
    std::size_t shared = 0;
    for (const auto& t : std::set<std::string>(s.begin(), s.end())) shared += qs.contains(t);
    EXPECT_GE(shared, 2u) << l.query_seg_id << " " << l.source_seg_id;
  }
}

TEST(Synthetic, AnnotationsAlignWithTokens) {
  SyntheticSpec spec;
  spec.annotations = true;
  const auto c = make_synthetic_corpus(spec);
  EXPECT_TRUE(c.query.has_lemmas());
  EXPECT_TRUE(c.source.has_pos());
  for (const auto& seg : c.source.segments()) {
    EXPECT_EQ(seg.lemmas->size(), seg.tokens.size());
    EXPECT_EQ(seg.pos->size(), seg.tokens.size());
  }
}

TEST(Synthetic, TextRoundTripsThroughTheTokenizer) {
  const auto c = make_synthetic_corpus({});
  for (const auto& seg : c.query.segments()) {
    EXPECT_EQ(make_segment(seg.id, seg.text).tokens, seg.tokens);
    EXPECT_EQ(seg.text.back(), '.');
  }
}
