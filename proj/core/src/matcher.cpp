#include "intertext/matcher.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <map>
#include <unordered_map>

#include "intertext/csv.hpp"
#include "intertext/error.hpp"
#include "intertext/parallel.hpp"
#include "intertext/text.hpp"

namespace intertext {

std::string_view to_string(MatchBasis basis) { return basis == MatchBasis::surface ? "surface" : "lemma"; }

MatchBasis parse_match_basis(std::string_view text) {
  if (text == "surface") return MatchBasis::surface;
  if (text == "lemma") return MatchBasis::lemma;
  throw Error(ErrorCode::configuration, "unknown match basis '" + std::string(text) + "'",
              {{"match_on", "expected surface or lemma"}});
}

void MatchParams::validate() const {
  if (min_shared < 2) {
    throw Error(ErrorCode::configuration, "min_shared must be >= 2", {{"min_shared", "must be >= 2"}});
  }
  if (window < min_shared) {
    throw Error(ErrorCode::configuration, "window must be >= min_shared", {{"window", "must be >= min_shared"}});
  }
}

void FilterConfig::validate() const {
  if (!(max_doc_freq > 0.0 && max_doc_freq <= 1.0)) {
    throw Error(ErrorCode::configuration, "max_doc_freq must be in (0, 1]", {{"max_doc_freq", "must be in (0, 1]"}});
  }
}

namespace {

const std::vector<std::string>& keys_of(const Segment& seg, MatchBasis basis) {
  return basis == MatchBasis::surface ? seg.tokens : seg.lemma_keys;
}

using Bits = std::vector<std::uint64_t>;

std::size_t popcount(const Bits& bits) {
  std::size_t n = 0;
  for (auto w : bits) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

bool test(const Bits& bits, std::size_t i) { return (bits[i / 64] >> (i % 64)) & 1U; }

// Distinct shared-token sets realisable inside one window on a side.
std::vector<Bits> window_sets(const std::vector<int>& seq_idx, std::size_t window, std::size_t words) {
  std::vector<Bits> sets;
  const std::size_t n = seq_idx.size();
  for (std::size_t p = 0; p < n; ++p) {
    if (seq_idx[p] < 0) continue;
    Bits bits(words, 0);
    const std::size_t end = std::min(n, p + window);
    for (std::size_t r = p; r < end; ++r) {
      if (seq_idx[r] >= 0) bits[seq_idx[r] / 64] |= std::uint64_t{1} << (seq_idx[r] % 64);
    }
    sets.push_back(std::move(bits));
  }
  std::sort(sets.begin(), sets.end());
  sets.erase(std::unique(sets.begin(), sets.end()), sets.end());
  return sets;
}

// Lexicographically smallest increasing position vector holding one
// occurrence of every token in `set` within a span < window.
std::vector<std::size_t> side_positions(const std::vector<int>& seq_idx, const Bits& set, std::size_t set_size,
                                        std::size_t window) {
  const std::size_t n = seq_idx.size();
  std::vector<std::size_t> positions;
  std::vector<char> seen;
  for (std::size_t a = 0; a < n; ++a) {
    if (seq_idx[a] < 0 || !test(set, static_cast<std::size_t>(seq_idx[a]))) continue;
    positions.clear();
    seen.assign(set.size() * 64, 0);
    const std::size_t end = std::min(n, a + window);
    for (std::size_t r = a; r < end && positions.size() < set_size; ++r) {
      const int t = seq_idx[r];
      if (t < 0 || !test(set, static_cast<std::size_t>(t)) || seen[t]) continue;
      seen[t] = 1;
      positions.push_back(r);
    }
    if (positions.size() == set_size) return positions;
  }
  return {};
}

struct PairMatch {
  std::vector<std::string> shared_tokens;
  std::vector<std::size_t> query_positions;
  std::vector<std::size_t> source_positions;
};

std::optional<PairMatch> best_pair_match(const std::vector<std::string>& qseq, const std::vector<std::string>& sseq,
                                         const MatchParams& params) {
  std::vector<std::string_view> qkeys(qseq.begin(), qseq.end());
  std::vector<std::string_view> skeys(sseq.begin(), sseq.end());
  std::sort(qkeys.begin(), qkeys.end());
  qkeys.erase(std::unique(qkeys.begin(), qkeys.end()), qkeys.end());
  std::sort(skeys.begin(), skeys.end());
  skeys.erase(std::unique(skeys.begin(), skeys.end()), skeys.end());
  std::vector<std::string_view> shared;
  std::set_intersection(qkeys.begin(), qkeys.end(), skeys.begin(), skeys.end(), std::back_inserter(shared));
  shared.erase(std::remove(shared.begin(), shared.end(), std::string_view{}), shared.end());
  if (shared.size() < params.min_shared) return std::nullopt;

  // shared is sorted, so index order equals lexicographic token order.
  auto index_seq = [&shared](const std::vector<std::string>& seq) {
    std::vector<int> idx(seq.size(), -1);
    for (std::size_t i = 0; i < seq.size(); ++i) {
      const auto it = std::lower_bound(shared.begin(), shared.end(), std::string_view(seq[i]));
      if (it != shared.end() && *it == seq[i]) idx[i] = static_cast<int>(it - shared.begin());
    }
    return idx;
  };
  const auto q_idx = index_seq(qseq);
  const auto s_idx = index_seq(sseq);
  const std::size_t words = (shared.size() + 63) / 64;

  const auto q_sets = window_sets(q_idx, params.window, words);
  const auto s_sets = window_sets(s_idx, params.window, words);

  std::size_t best = 0;
  std::vector<Bits> best_sets;
  Bits inter(words);
  for (const auto& qs : q_sets) {
    if (popcount(qs) < std::max(best, params.min_shared)) continue;
    for (const auto& ss : s_sets) {
      for (std::size_t w = 0; w < words; ++w) inter[w] = qs[w] & ss[w];
      const auto c = popcount(inter);
      if (c < params.min_shared || c < best) continue;
      if (c > best) {
        best = c;
        best_sets.clear();
      }
      best_sets.push_back(inter);
    }
  }
  if (best < params.min_shared) return std::nullopt;
  std::sort(best_sets.begin(), best_sets.end());
  best_sets.erase(std::unique(best_sets.begin(), best_sets.end()), best_sets.end());

  struct Choice {
    std::vector<std::size_t> merged;
    std::vector<std::size_t> token_ids;
    std::vector<std::size_t> qpos;
    std::vector<std::size_t> spos;
  };
  std::optional<Choice> chosen;
  for (const auto& set : best_sets) {
    Choice c;
    c.qpos = side_positions(q_idx, set, best, params.window);
    c.spos = side_positions(s_idx, set, best, params.window);
    c.merged = c.qpos;
    c.merged.insert(c.merged.end(), c.spos.begin(), c.spos.end());
    std::sort(c.merged.begin(), c.merged.end());
    for (std::size_t t = 0; t < shared.size(); ++t) {
      if (test(set, t)) c.token_ids.push_back(t);
    }
    if (!chosen || std::tie(c.merged, c.token_ids) < std::tie(chosen->merged, chosen->token_ids)) {
      chosen = std::move(c);
    }
  }

  PairMatch match;
  for (auto p : chosen->qpos) match.shared_tokens.push_back(qseq[p]);
  match.query_positions = std::move(chosen->qpos);
  match.source_positions = std::move(chosen->spos);
  return match;
}

}  // namespace

std::vector<RawCandidate> find_raw_candidates(const Document& query, const Document& source,
                                              const MatchParams& params) {
  params.validate();
  if (params.match_on == MatchBasis::lemma && (!query.has_lemmas() || !source.has_lemmas())) {
    throw Error(ErrorCode::configuration, "lemma matching requested but documents lack lemma_seq data",
                {{"match_on", "lemma data missing"}});
  }

  // Inverted index: source key -> ascending list of source segment indices.
  std::unordered_map<std::string_view, std::vector<std::uint32_t>> postings;
  for (std::size_t s = 0; s < source.size(); ++s) {
    for (const auto& key : keys_of(source[s], params.match_on)) {
      if (key.empty()) continue;
      auto& list = postings[key];
      if (list.empty() || list.back() != s) list.push_back(static_cast<std::uint32_t>(s));
    }
  }

  std::vector<std::vector<RawCandidate>> per_query(query.size());
  parallel_for(query.size(), params.jobs, [&](std::size_t q) {
    const auto& qseg = query[q];
    const auto& qseq = keys_of(qseg, params.match_on);
    std::vector<std::string_view> distinct(qseq.begin(), qseq.end());
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

    std::vector<std::uint32_t> counts(source.size(), 0);
    std::vector<std::uint32_t> touched;
    for (auto key : distinct) {
      if (key.empty()) continue;
      const auto it = postings.find(key);
      if (it == postings.end()) continue;
      for (auto s : it->second) {
        if (counts[s]++ == 0) touched.push_back(s);
      }
    }
    std::sort(touched.begin(), touched.end());
    for (auto s : touched) {
      if (counts[s] < params.min_shared) continue;
      const auto& sseg = source[s];
      auto match = best_pair_match(qseq, keys_of(sseg, params.match_on), params);
      if (!match) continue;
      RawCandidate c;
      c.query_seg_id = qseg.id;
      c.source_seg_id = sseg.id;
      c.query_ordinal = q;
      c.source_ordinal = s;
      c.shared_tokens = std::move(match->shared_tokens);
      c.query_positions = std::move(match->query_positions);
      c.source_positions = std::move(match->source_positions);
      c.basis = params.match_on;
      per_query[q].push_back(std::move(c));
    }
  });

  std::vector<RawCandidate> out;
  for (auto& list : per_query) {
    std::move(list.begin(), list.end(), std::back_inserter(out));
  }
  return out;
}

std::size_t shared_set_doc_freq(const Document& source, std::span<const std::string> tokens, MatchBasis basis) {
  std::size_t freq = 0;
  for (const auto& seg : source.segments()) {
    const auto& keys = keys_of(seg, basis);
    const bool all = std::all_of(tokens.begin(), tokens.end(), [&keys](const std::string& t) {
      return std::find(keys.begin(), keys.end(), t) != keys.end();
    });
    if (all) ++freq;
  }
  return freq;
}

std::vector<RawCandidate> apply_filters(std::span<const RawCandidate> candidates, const FilterConfig& config,
                                        const Document& source) {
  config.validate();
  if (config.pos_allow && !source.has_pos()) {
    throw Error(ErrorCode::configuration, "POS filter requested but source document lacks pos_seq data",
                {{"pos_allow", "POS data missing"}});
  }

  // Posting lists per basis, built on demand for the collocation cut.
  std::map<MatchBasis, std::unordered_map<std::string, std::vector<std::uint32_t>>> postings;
  auto postings_for = [&](MatchBasis basis) -> const auto& {
    auto [it, inserted] = postings.try_emplace(basis);
    if (inserted) {
      for (std::size_t s = 0; s < source.size(); ++s) {
        for (const auto& key : keys_of(source[s], basis)) {
          auto& list = it->second[key];
          if (list.empty() || list.back() != s) list.push_back(static_cast<std::uint32_t>(s));
        }
      }
    }
    return it->second;
  };
  auto doc_freq = [&](const RawCandidate& c) -> std::size_t {
    const auto& index = postings_for(c.basis);
    std::vector<std::uint32_t> acc;
    bool first = true;
    for (const auto& token : c.shared_tokens) {
      const auto it = index.find(token);
      if (it == index.end()) return 0;
      if (first) {
        acc = it->second;
        first = false;
      } else {
        std::vector<std::uint32_t> next;
        std::set_intersection(acc.begin(), acc.end(), it->second.begin(), it->second.end(),
                              std::back_inserter(next));
        acc.swap(next);
      }
      if (acc.empty()) return 0;
    }
    return acc.size();
  };

  const double limit = config.max_doc_freq * static_cast<double>(source.size());
  std::vector<RawCandidate> out;
  for (const auto& c : candidates) {
    const bool all_stop = std::all_of(c.shared_tokens.begin(), c.shared_tokens.end(),
                                      [&](const std::string& t) { return config.stoplist.contains(t); });
    if (all_stop) continue;

    if (config.pos_allow) {
      const auto* seg = source.find(c.source_seg_id);
      if (!seg || !seg->pos) continue;
      const auto& tags = *seg->pos;
      if (tags.size() != keys_of(*seg, c.basis).size()) {
        throw Error(ErrorCode::configuration, "segment '" + seg->id + "': pos_seq is not aligned with its " +
                                                  std::string(to_string(c.basis)) + " sequence");
      }
      const bool any_allowed = std::any_of(c.source_positions.begin(), c.source_positions.end(), [&](std::size_t p) {
        return p < tags.size() && config.pos_allow->contains(tags[p]);
      });
      if (!any_allowed) continue;
    }

    if (static_cast<double>(doc_freq(c)) > limit) continue;
    out.push_back(c);
  }
  return out;
}

std::set<std::string> default_stoplist(const Document& source, std::size_t n, MatchBasis basis) {
  std::unordered_map<std::string_view, std::size_t> freq;
  for (const auto& seg : source.segments()) {
    for (const auto& key : keys_of(seg, basis)) {
      if (!key.empty()) ++freq[key];
    }
  }
  std::vector<std::pair<std::string_view, std::size_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  std::set<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < n; ++i) out.emplace(ranked[i].first);
  return out;
}

std::set<std::string> load_stoplist(const std::filesystem::path& path) {
  const auto content = read_file(path);
  std::set<std::string> out;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    auto token = normalize_token(std::string_view(content).substr(pos, end - pos));
    if (!token.empty()) out.insert(std::move(token));
    pos = end + 1;
  }
  return out;
}

std::string format_candidates_csv(std::span<const RawCandidate> candidates) {
  std::string out = csv::format_row({"query_id", "source_id", "shared_tokens"});
  for (const auto& c : candidates) {
    out += csv::format_row({c.query_seg_id, c.source_seg_id, join(c.shared_tokens, "|")});
  }
  return out;
}

}  // namespace intertext
