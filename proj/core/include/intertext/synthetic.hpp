#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "intertext/corpus.hpp"

namespace intertext {

struct SyntheticSpec {
  std::size_t query_segments = 200;
  std::size_t source_segments = 200;
  std::size_t links = 20;
  std::size_t vocabulary = 400;
  std::size_t min_tokens = 6;
  std::size_t max_tokens = 24;
  std::size_t borrowed_tokens = 4;   // source tokens planted in a linked query segment
  double repeat_query_fraction = 0.1;  // links reusing an already linked query segment
  bool annotations = false;            // attach lemma and POS sequences
  std::uint64_t seed = 7;
};

struct SyntheticCorpus {
  Document query;
  Document source;
  std::vector<LinkRecord> links;
};

// Latin-looking pseudo-words with a Zipf-like frequency profile. Each link
// copies a short run of source tokens, shuffled, into its query segment.
// Every source segment takes part in at most one link. The same seed always
// gives the same corpus.
SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

}  // namespace intertext
