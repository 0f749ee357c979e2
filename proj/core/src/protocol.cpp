#include "intertext/protocol.hpp"

#include <algorithm>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "intertext/csv.hpp"
#include "intertext/error.hpp"
#include "intertext/rng.hpp"

namespace intertext {

using nlohmann::json;

std::vector<FoldSpec> make_folds(std::span<const LinkRecord> links, std::size_t k, std::uint64_t seed) {
  if (k == 0) throw Error(ErrorCode::configuration, "fold count must be >= 1", {{"folds", "must be >= 1"}});
  if (k > links.size()) {
    throw Error(ErrorCode::configuration,
                "cannot split " + std::to_string(links.size()) + " links into " + std::to_string(k) + " folds",
                {{"folds", "must not exceed the number of links"}});
  }
  std::vector<std::size_t> order(links.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  std::vector<std::size_t> assignment(links.size());
  const std::size_t base = links.size() / k, extra = links.size() % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t size = base + (f < extra ? 1 : 0);
    for (std::size_t i = 0; i < size; ++i) assignment[order[pos++]] = f;
  }

  std::vector<FoldSpec> folds(k);
  for (std::size_t f = 0; f < k; ++f) folds[f].fold_id = f;
  // Within each fold, links keep their input order.
  for (std::size_t i = 0; i < links.size(); ++i) {
    for (std::size_t f = 0; f < k; ++f) {
      (assignment[i] == f ? folds[f].test_links : folds[f].train_links).push_back(links[i]);
    }
  }
  return folds;
}

namespace {

// Keeps `required` segments and fills up to `size` with seeded distractors
// from segments that are neither required nor excluded.
Document assemble(const Document& corpus, const std::unordered_set<std::string>& required,
                  const std::unordered_set<std::string>& excluded, std::size_t size, Rng& rng,
                  std::string_view side) {
  for (const auto& id : required) {
    if (!corpus.find(id)) {
      throw Error(ErrorCode::validation, "test link names unknown " + std::string(side) + " segment '" + id + "'");
    }
  }
  if (size < required.size()) {
    throw Error(ErrorCode::configuration, std::string(side) + " size " + std::to_string(size) + " is below the " +
                                              std::to_string(required.size()) + " segments the test links need");
  }
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& id = corpus[i].id;
    if (!required.contains(id) && !excluded.contains(id)) eligible.push_back(i);
  }
  const std::size_t needed = size - required.size();
  if (eligible.size() < needed) {
    throw Error(ErrorCode::configuration, std::string(side) + " corpus has " + std::to_string(eligible.size()) +
                                              " distractor segments, " + std::to_string(needed) + " needed");
  }
  std::vector<bool> keep(corpus.size(), false);
  for (auto i : rng.sample(eligible.size(), needed)) keep[eligible[i]] = true;
  std::vector<Segment> segments;
  segments.reserve(size);
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (keep[i] || required.contains(corpus[i].id)) segments.push_back(corpus[i]);
  }
  return Document(corpus.doc_id(), corpus.author(), corpus.role(), std::move(segments));
}

}  // namespace

EvalDocs build_eval_docs(const FoldSpec& fold, const Document& query_corpus, const Document& source_corpus,
                         std::size_t q_size, std::size_t s_size, std::uint64_t seed) {
  std::unordered_set<std::string> q_required, s_required, q_linked, s_linked;
  for (const auto& l : fold.test_links) {
    q_required.insert(l.query_seg_id);
    s_required.insert(l.source_seg_id);
  }
  for (const auto* set : {&fold.test_links, &fold.train_links}) {
    for (const auto& l : *set) {
      q_linked.insert(l.query_seg_id);
      s_linked.insert(l.source_seg_id);
    }
  }
  std::uint64_t state = seed;
  for (std::size_t i = 0; i <= fold.fold_id; ++i) splitmix64(state);
  Rng rng(splitmix64(state));
  EvalDocs docs;
  docs.query = assemble(query_corpus, q_required, q_linked, q_size, rng, "query");
  docs.source = assemble(source_corpus, s_required, s_linked, s_size, rng, "source");
  docs.gold = fold.test_links;
  return docs;
}

std::string_view to_string(SamplingStrategy strategy) {
  switch (strategy) {
    case SamplingStrategy::positive: return "positive";
    case SamplingStrategy::random_pair: return "random_pair";
    case SamplingStrategy::random_negative: return "random_negative";
    case SamplingStrategy::hard_negative: return "hard_negative";
    case SamplingStrategy::mixed: return "mixed";
  }
  return "positive";
}

SamplingStrategy parse_sampling_strategy(std::string_view text) {
  for (auto s : {SamplingStrategy::positive, SamplingStrategy::random_pair, SamplingStrategy::random_negative,
                 SamplingStrategy::hard_negative, SamplingStrategy::mixed}) {
    if (text == to_string(s)) return s;
  }
  if (text == "random") return SamplingStrategy::random_negative;
  if (text == "hard") return SamplingStrategy::hard_negative;
  throw Error(ErrorCode::validation, "unknown sampling strategy '" + std::string(text) + "'",
              {{"strategy", "expected random_pair, random_negative, hard_negative or mixed"}});
}

namespace {

struct Resolved {
  std::size_t query;
  std::size_t source;
};

std::vector<Resolved> resolve(std::span<const LinkRecord> links, const Document& query_corpus,
                              const Document& source_corpus) {
  std::vector<Resolved> out;
  out.reserve(links.size());
  for (const auto& l : links) {
    const auto q = query_corpus.index_of(l.query_seg_id);
    const auto s = source_corpus.index_of(l.source_seg_id);
    if (!q || !s) {
      throw Error(ErrorCode::validation,
                  "link (" + l.query_seg_id + ", " + l.source_seg_id + ") does not resolve in the corpora");
    }
    out.push_back({*q, *s});
  }
  return out;
}

TrainingPair make_pair(const Segment& q, const Segment& s, int label, SamplingStrategy strategy) {
  return {q.id, s.id, q.text, s.text, label, strategy};
}

}  // namespace

std::vector<TrainingPair> positive_pairs(std::span<const LinkRecord> positives, const Document& query_corpus,
                                         const Document& source_corpus) {
  std::vector<TrainingPair> out;
  for (const auto& r : resolve(positives, query_corpus, source_corpus)) {
    out.push_back(make_pair(query_corpus[r.query], source_corpus[r.source], 1, SamplingStrategy::positive));
  }
  return out;
}

std::vector<TrainingPair> sample_negatives(SamplingStrategy strategy, std::span<const LinkRecord> positives,
                                           const Document& query_corpus, const Document& source_corpus,
                                           const NegativeSamplingOptions& options) {
  if (strategy == SamplingStrategy::positive) {
    throw Error(ErrorCode::configuration, "positive is not a negative-sampling strategy");
  }
  if (options.ratio == 0) throw Error(ErrorCode::configuration, "ratio must be >= 1", {{"ratio", "must be >= 1"}});
  const bool needs_embedder = strategy == SamplingStrategy::hard_negative || strategy == SamplingStrategy::mixed;
  if (needs_embedder && options.embedder == nullptr) {
    throw Error(ErrorCode::configuration, std::string(to_string(strategy)) + " sampling requires an embedding provider",
                {{"embedder", "required for hard_negative and mixed"}});
  }

  const auto pos = resolve(positives, query_corpus, source_corpus);
  const auto gold_links = options.gold.empty() ? positives : options.gold;
  std::unordered_map<std::size_t, std::unordered_set<std::size_t>> gold_by_query;
  std::size_t gold_in_grid = 0;
  for (const auto& l : gold_links) {
    const auto q = query_corpus.index_of(l.query_seg_id);
    const auto s = source_corpus.index_of(l.source_seg_id);
    if (q && s && gold_by_query[*q].insert(*s).second) ++gold_in_grid;
  }
  auto is_gold = [&](std::size_t q, std::size_t s) {
    const auto it = gold_by_query.find(q);
    return it != gold_by_query.end() && it->second.contains(s);
  };

  const std::size_t r = options.ratio;
  const std::size_t n_source = source_corpus.size();
  Rng rng(options.seed);
  std::vector<TrainingPair> out;
  out.reserve(pos.size() * r);

  if (strategy == SamplingStrategy::random_pair) {
    const std::uint64_t grid = static_cast<std::uint64_t>(query_corpus.size()) * n_source;
    if (grid - gold_in_grid < pos.size() * r) {
      throw Error(ErrorCode::configuration, "corpora too small for " + std::to_string(pos.size() * r) +
                                                " distinct random pairs");
    }
    std::unordered_set<std::uint64_t> emitted;
    for (std::size_t p = 0; p < pos.size(); ++p) {
      for (std::size_t i = 0; i < r;) {
        const auto q = static_cast<std::size_t>(rng.below(query_corpus.size()));
        const auto s = static_cast<std::size_t>(rng.below(n_source));
        if (is_gold(q, s) || !emitted.insert(static_cast<std::uint64_t>(q) * n_source + s).second) continue;
        out.push_back(make_pair(query_corpus[q], source_corpus[s], 0, SamplingStrategy::random_pair));
        ++i;
      }
    }
    return out;
  }

  const std::size_t hard_count = strategy == SamplingStrategy::hard_negative ? r
                                 : strategy == SamplingStrategy::mixed      ? r / 2
                                                                            : 0;
  const std::size_t random_count = r - hard_count;

  VectorIndex index;
  std::unordered_map<std::size_t, Vector> query_vectors;
  if (hard_count > 0) {
    const EmbedOptions embed_options{options.batch_size, 1};
    const auto source_vectors = embed_segments(*options.embedder, source_corpus.segments(), EmbedRole::candidate,
                                               embed_options);
    std::vector<std::string> ids;
    ids.reserve(n_source);
    for (const auto& seg : source_corpus.segments()) ids.push_back(seg.id);
    index = build_index(ids, source_vectors);

    std::vector<std::size_t> wanted;
    for (const auto& p : pos) {
      if (!query_vectors.contains(p.query)) {
        query_vectors[p.query];
        wanted.push_back(p.query);
      }
    }
    std::vector<Segment> segs;
    for (auto q : wanted) segs.push_back(query_corpus[q]);
    auto vectors = embed_segments(*options.embedder, segs, EmbedRole::query, embed_options);
    for (std::size_t i = 0; i < wanted.size(); ++i) query_vectors[wanted[i]] = std::move(vectors[i]);
  }

  for (const auto& p : pos) {
    const auto gold_it = gold_by_query.find(p.query);
    const std::size_t gold_here = gold_it == gold_by_query.end() ? 0 : gold_it->second.size();
    if (n_source - gold_here < r) {
      throw Error(ErrorCode::configuration, "query segment '" + query_corpus[p.query].id + "' has only " +
                                                std::to_string(n_source - gold_here) + " non-gold sources, " +
                                                std::to_string(r) + " negatives requested");
    }
    const auto label = strategy == SamplingStrategy::mixed ? SamplingStrategy::mixed : strategy;
    std::unordered_set<std::size_t> taken;
    if (hard_count > 0) {
      const auto ranked = topk(index, query_vectors.at(p.query), std::min(n_source, hard_count + gold_here));
      for (const auto& c : ranked) {
        if (taken.size() == hard_count) break;
        if (is_gold(p.query, c.source_index)) continue;
        taken.insert(c.source_index);
        out.push_back(make_pair(query_corpus[p.query], source_corpus[c.source_index], 0, label));
      }
    }
    for (std::size_t i = 0; i < random_count;) {
      const auto s = static_cast<std::size_t>(rng.below(n_source));
      if (is_gold(p.query, s) || !taken.insert(s).second) continue;
      out.push_back(make_pair(query_corpus[p.query], source_corpus[s], 0, label));
      ++i;
    }
  }
  return out;
}

PairFormat pair_format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".jsonl" || ext == ".ndjson") return PairFormat::jsonl;
  return PairFormat::csv;
}

std::string format_training_pairs(std::span<const TrainingPair> pairs, PairFormat format) {
  std::string out;
  if (format == PairFormat::csv) {
    out = csv::format_row({"query_text", "candidate_text", "label", "strategy"});
    for (const auto& p : pairs) {
      out += csv::format_row({p.query_text, p.candidate_text, std::to_string(p.label), std::string(to_string(p.strategy))});
    }
    return out;
  }
  for (const auto& p : pairs) {
    json j = {{"query_text", p.query_text},
              {"candidate_text", p.candidate_text},
              {"label", p.label},
              {"strategy", to_string(p.strategy)}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::size_t export_training_pairs(std::span<const TrainingPair> pairs, const std::filesystem::path& path,
                                  PairFormat format) {
  write_file(path, format_training_pairs(pairs, format));
  return pairs.size();
}

namespace {

TrainingPair checked_pair(std::string query_text, std::string candidate_text, int label, std::string_view strategy,
                          std::size_t row) {
  TrainingPair p;
  p.query_text = std::move(query_text);
  p.candidate_text = std::move(candidate_text);
  p.label = label;
  p.strategy = parse_sampling_strategy(strategy);
  if ((label == 1) != (p.strategy == SamplingStrategy::positive) || (label != 0 && label != 1)) {
    throw Error(ErrorCode::validation, "training pair row " + std::to_string(row) + ": label " +
                                           std::to_string(label) + " does not fit strategy '" +
                                           std::string(strategy) + "'");
  }
  return p;
}

}  // namespace

std::vector<TrainingPair> parse_training_pairs(std::string_view content, PairFormat format) {
  std::vector<TrainingPair> out;
  if (format == PairFormat::csv) {
    if (content.empty()) return out;
    const auto table = csv::read_table(content);
    const auto qi = table.require("query_text"), ci = table.require("candidate_text"), li = table.require("label"),
               si = table.require("strategy");
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
      const auto& row = table.rows[r];
      int label = 0;
      try {
        label = std::stoi(row[li]);
      } catch (const std::exception&) {
        throw Error(ErrorCode::schema, "training pair row " + std::to_string(r + 1) + ": label is not an integer");
      }
      out.push_back(checked_pair(row[qi], row[ci], label, row[si], r + 1));
    }
    return out;
  }
  std::size_t line_no = 0, start = 0;
  while (start < content.size()) {
    auto end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    const auto line = content.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = json::parse(line);
      out.push_back(checked_pair(j.at("query_text").get<std::string>(), j.at("candidate_text").get<std::string>(),
                                 j.at("label").get<int>(), j.at("strategy").get<std::string>(), line_no));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::schema, "training pair line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TrainingPair> load_training_pairs(const std::filesystem::path& path) {
  return parse_training_pairs(read_file(path), pair_format_from_path(path));
}

}  // namespace intertext
