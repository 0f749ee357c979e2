#include "intertext/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <string>
#include <unordered_set>

#include "intertext/error.hpp"
#include "intertext/rng.hpp"
#include "intertext/text.hpp"

namespace intertext {

namespace {

constexpr std::array<const char*, 24> kSyllables = {"ae", "ba", "ce", "di", "fo", "gra", "hu", "la", "me", "ni",
                                                    "or", "pu", "qua", "re", "si", "ta", "ul", "ri", "mo", "ne",
                                                    "cu", "tis", "bus", "um"};
constexpr std::array<const char*, 5> kTags = {"NOUN", "VERB", "ADJ", "ADV", "CCONJ"};
constexpr std::array<LinkCategory, 6> kCategories = {
    LinkCategory::verbatim_marked, LinkCategory::verbatim_unmarked, LinkCategory::paraphrase_minor,
    LinkCategory::paraphrase_major, LinkCategory::allusion_single, LinkCategory::allusion_systemic};

std::vector<std::string> make_vocabulary(std::size_t size, Rng& rng) {
  std::vector<std::string> words;
  std::unordered_set<std::string> seen;
  while (words.size() < size) {
    const auto syllables = 2 + rng.below(3);
    std::string w;
    for (std::uint64_t i = 0; i < syllables; ++i) w += kSyllables[rng.below(kSyllables.size())];
    if (seen.insert(w).second) words.push_back(std::move(w));
  }
  return words;
}

class ZipfSampler {
 public:
  explicit ZipfSampler(std::size_t n) : cumulative_(n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += 1.0 / static_cast<double>(i + 1);
      cumulative_[i] = total;
    }
    for (auto& c : cumulative_) c /= total;
  }

  std::size_t draw(Rng& rng) const {
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), rng.unit());
    return std::min<std::size_t>(it - cumulative_.begin(), cumulative_.size() - 1);
  }

 private:
  std::vector<double> cumulative_;
};

std::string render(const std::vector<std::string>& words) {
  auto text = join(words, " ");
  if (!text.empty()) text[0] = static_cast<char>(text[0] - 'a' + 'A');
  return text + ".";
}

Segment build_segment(std::string id, const std::vector<std::string>& words, bool annotations) {
  if (!annotations) return make_segment(std::move(id), render(words));
  std::vector<std::string> lemmas, pos;
  for (const auto& w : words) {
    lemmas.push_back(w.size() > 4 && (w.ends_with("s") || w.ends_with("m")) ? w.substr(0, w.size() - 1) : w);
    pos.emplace_back(kTags[fnv1a64(w) % kTags.size()]);
  }
  return make_segment(std::move(id), render(words), std::move(lemmas), std::move(pos));
}

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  if (spec.query_segments == 0 || spec.source_segments == 0) {
    throw Error(ErrorCode::configuration, "synthetic corpora need at least one segment per side");
  }
  if (spec.links > spec.source_segments) {
    throw Error(ErrorCode::configuration, "more links than source segments requested");
  }
  if (spec.min_tokens == 0 || spec.min_tokens > spec.max_tokens || spec.vocabulary < 2) {
    throw Error(ErrorCode::configuration, "invalid synthetic segment length or vocabulary settings");
  }
  Rng rng(spec.seed);
  const auto vocab = make_vocabulary(spec.vocabulary, rng);
  const ZipfSampler zipf(vocab.size());
  auto random_words = [&] {
    const auto len = spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
    std::vector<std::string> words;
    for (std::uint64_t i = 0; i < len; ++i) words.push_back(vocab[zipf.draw(rng)]);
    return words;
  };

  std::vector<std::vector<std::string>> source_words(spec.source_segments);
  for (auto& w : source_words) w = random_words();
  std::vector<std::vector<std::string>> query_words(spec.query_segments);
  for (auto& w : query_words) w = random_words();

  SyntheticCorpus out;
  const auto sources = rng.sample(spec.source_segments, spec.links);
  std::vector<std::size_t> linked_queries;
  const auto fresh = rng.sample(spec.query_segments, std::min(spec.links, spec.query_segments));
  std::size_t next_fresh = 0;
  for (std::size_t i = 0; i < spec.links; ++i) {
    std::size_t q;
    const bool repeat = !linked_queries.empty() && (next_fresh == fresh.size() || rng.unit() < spec.repeat_query_fraction);
    if (repeat) {
      q = linked_queries[rng.below(linked_queries.size())];
    } else {
      q = fresh[next_fresh++];
      linked_queries.push_back(q);
    }
    const auto s = sources[i];
    const auto& src = source_words[s];
    const std::size_t run = std::min(spec.borrowed_tokens, src.size());
    const auto start = rng.below(src.size() - run + 1);
    std::vector<std::string> borrowed(src.begin() + start, src.begin() + start + run);
    rng.shuffle(borrowed);
    auto& qw = query_words[q];
    const auto at = rng.below(qw.size() + 1);
    qw.insert(qw.begin() + at, borrowed.begin(), borrowed.end());

    LinkRecord link;
    link.query_seg_id = fmt::format("q{:05}", q);
    link.source_seg_id = fmt::format("s{:05}", s);
    link.category = kCategories[rng.below(kCategories.size())];
    link.provenance = "synthetic";
    out.links.push_back(std::move(link));
  }

  std::vector<Segment> qs, ss;
  for (std::size_t i = 0; i < query_words.size(); ++i) {
    qs.push_back(build_segment(fmt::format("q{:05}", i), query_words[i], spec.annotations));
  }
  for (std::size_t i = 0; i < source_words.size(); ++i) {
    ss.push_back(build_segment(fmt::format("s{:05}", i), source_words[i], spec.annotations));
  }
  out.query = Document("synthetic-query", "Query Author", Role::query, std::move(qs));
  out.source = Document("synthetic-source", "Source Author", Role::source, std::move(ss));
  return out;
}

}  // namespace intertext
