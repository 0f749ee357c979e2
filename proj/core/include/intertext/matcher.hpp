#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "intertext/corpus.hpp"

namespace intertext {

enum class MatchBasis { surface, lemma };

std::string_view to_string(MatchBasis basis);
MatchBasis parse_match_basis(std::string_view text);

struct MatchParams {
  std::size_t min_shared = 2;  // distinct shared tokens required
  std::size_t window = 10;     // max(pos) - min(pos) < window on each side
  MatchBasis match_on = MatchBasis::surface;
  unsigned jobs = 1;           // worker threads; output does not depend on it

  // Throws configuration unless min_shared >= 2 and window >= min_shared.
  void validate() const;
};

// A query/source segment pair sharing at least min_shared distinct tokens
// that fit inside one window on each side. Positions index the token (or
// lemma) sequence of the respective segment and are strictly increasing;
// shared_tokens is listed in query-position order.
struct RawCandidate {
  std::string query_seg_id;
  std::string source_seg_id;
  std::size_t query_ordinal = 0;
  std::size_t source_ordinal = 0;
  std::vector<std::string> shared_tokens;
  std::vector<std::size_t> query_positions;
  std::vector<std::size_t> source_positions;
  MatchBasis basis = MatchBasis::surface;

  friend bool operator==(const RawCandidate&, const RawCandidate&) = default;
};

// Exhaustive over all segment pairs; order-insensitive (shared tokens may be
// permuted between the two segments). For each pair only the largest shared
// set is kept. Ties prefer the set whose merged, sorted query+source position
// list is lexicographically smallest, then the lexicographically smallest
// sorted token list; on each side the lexicographically smallest position
// vector is reported. Output is sorted by query ordinal, then source ordinal.
// Throws configuration when lemma matching is requested without lemma data.
std::vector<RawCandidate> find_raw_candidates(const Document& query, const Document& source,
                                              const MatchParams& params);

struct FilterConfig {
  std::set<std::string> stoplist;
  std::optional<std::set<std::string>> pos_allow;
  double max_doc_freq = 0.01;  // in (0, 1]

  void validate() const;
};

// Drops candidates whose shared tokens are all stopwords; when pos_allow is
// set, candidates with no shared token tagged (on the source side) with an
// allowed POS; and candidates whose full shared set co-occurs in more than
// max_doc_freq * |source| source segments. Order is preserved. Each filter is
// a per-candidate predicate, so the cascade is order-independent.
// Throws configuration when the POS filter is requested without POS data.
std::vector<RawCandidate> apply_filters(std::span<const RawCandidate> candidates, const FilterConfig& config,
                                        const Document& source);

// Number of source segments whose token (or lemma) set contains all of `tokens`.
std::size_t shared_set_doc_freq(const Document& source, std::span<const std::string> tokens, MatchBasis basis);

// The n most frequent tokens of the document (ties broken lexicographically).
std::set<std::string> default_stoplist(const Document& source, std::size_t n = 100,
                                       MatchBasis basis = MatchBasis::surface);

// One token per line, UTF-8; blank lines and surrounding whitespace ignored.
// Entries are normalized like tokens.
std::set<std::string> load_stoplist(const std::filesystem::path& path);

// CSV with columns query_id,source_id,shared_tokens (pipe-joined).
std::string format_candidates_csv(std::span<const RawCandidate> candidates);

}  // namespace intertext
