#include "intertext/pipeline.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <memory>

#include "intertext/csv.hpp"
#include "intertext/error.hpp"
#include "intertext/parallel.hpp"
#include "intertext/providers.hpp"
#include "intertext/text.hpp"

namespace intertext {

using nlohmann::json;

std::string_view to_string(Architecture arch) {
  switch (arch) {
    case Architecture::retrieval_only: return "retrieval_only";
    case Architecture::classification_only: return "classification_only";
    case Architecture::retrieve_rerank: return "retrieve_rerank";
    case Architecture::ngram: return "ngram";
  }
  return "retrieve_rerank";
}

Architecture parse_architecture(std::string_view text) {
  if (text == "retrieval_only" || text == "retrieval") return Architecture::retrieval_only;
  if (text == "classification_only" || text == "classification") return Architecture::classification_only;
  if (text == "retrieve_rerank" || text == "rerank") return Architecture::retrieve_rerank;
  if (text == "ngram") return Architecture::ngram;
  throw Error(ErrorCode::validation, "unknown architecture '" + std::string(text) + "'",
              {{"architecture", "expected retrieval_only, classification_only, retrieve_rerank or ngram"}});
}

void RunConfig::validate() const {
  std::vector<FieldIssue> issues;
  if (k < 1) issues.push_back({"k", "must be >= 1"});
  if (!(threshold >= 0.0 && threshold <= 1.0)) issues.push_back({"threshold", "must be in [0, 1]"});
  if (token_budget < 2) issues.push_back({"token_budget", "must be >= 2"});
  if (batch_size < 1) issues.push_back({"batch_size", "must be >= 1"});
  if (match.min_shared < 2) issues.push_back({"min_shared", "must be >= 2"});
  if (match.window < match.min_shared) issues.push_back({"window", "must be >= min_shared"});
  if (!(filters.max_doc_freq > 0.0 && filters.max_doc_freq <= 1.0)) {
    issues.push_back({"max_doc_freq", "must be in (0, 1]"});
  }
  const bool needs_embedder =
      architecture == Architecture::retrieval_only || architecture == Architecture::retrieve_rerank;
  const bool needs_classifier =
      architecture == Architecture::classification_only || architecture == Architecture::retrieve_rerank;
  if (needs_embedder && embedder.empty()) issues.push_back({"embedder", "required for this architecture"});
  if (needs_classifier && classifier.empty()) issues.push_back({"classifier", "required for this architecture"});
  if (!issues.empty()) {
    std::string message = "invalid run configuration:";
    for (const auto& issue : issues) message += " " + issue.field + " " + issue.message + ";";
    message.pop_back();
    throw Error(ErrorCode::validation, message, std::move(issues));
  }
}

json RunConfig::to_json() const {
  json j = {
      {"architecture", to_string(architecture)},
      {"k", k},
      {"threshold", threshold},
      {"embedder", embedder},
      {"classifier", classifier},
      {"token_budget", token_budget},
      {"batch_size", batch_size},
      {"jobs", jobs},
      {"min_shared", match.min_shared},
      {"window", match.window},
      {"match_on", to_string(match.match_on)},
      {"stoplist_size", filters.stoplist_size},
      {"max_doc_freq", filters.max_doc_freq},
  };
  j["stoplist"] = filters.stoplist_path ? json(*filters.stoplist_path) : json(nullptr);
  j["pos_allow"] = filters.pos_allow ? json(*filters.pos_allow) : json(nullptr);
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  if (!j.is_object()) throw Error(ErrorCode::validation, "run configuration must be a JSON object");
  RunConfig config;
  std::vector<FieldIssue> issues;

  auto read_uint = [&](const char* key, auto& target) {
    if (!j.contains(key) || j[key].is_null()) return;
    const auto& v = j[key];
    if (v.is_number_integer() && v.get<long long>() >= 0) {
      target = static_cast<std::remove_reference_t<decltype(target)>>(v.get<long long>());
    } else {
      issues.push_back({key, "must be a non-negative integer"});
    }
  };
  auto read_double = [&](const char* key, double& target) {
    if (!j.contains(key) || j[key].is_null()) return;
    if (j[key].is_number()) {
      target = j[key].get<double>();
    } else {
      issues.push_back({key, "must be a number"});
    }
  };
  auto read_string = [&](const char* key, std::string& target) {
    if (!j.contains(key) || j[key].is_null()) return;
    if (j[key].is_string()) {
      target = j[key].get<std::string>();
    } else {
      issues.push_back({key, "must be a string"});
    }
  };

  static const std::set<std::string> known = {"architecture", "k",         "threshold",     "embedder",
                                              "classifier",   "token_budget", "batch_size", "jobs",
                                              "min_shared",   "window",    "match_on",      "stoplist",
                                              "stoplist_size", "max_doc_freq", "pos_allow"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) issues.push_back({key, "unknown field"});
  }

  if (j.contains("architecture")) {
    std::string arch;
    read_string("architecture", arch);
    if (!arch.empty()) {
      try {
        config.architecture = parse_architecture(arch);
      } catch (const Error&) {
        issues.push_back({"architecture", "unknown value '" + arch + "'"});
      }
    }
  }
  read_uint("k", config.k);
  read_double("threshold", config.threshold);
  read_string("embedder", config.embedder);
  read_string("classifier", config.classifier);
  read_uint("token_budget", config.token_budget);
  read_uint("batch_size", config.batch_size);
  read_uint("jobs", config.jobs);
  read_uint("min_shared", config.match.min_shared);
  read_uint("window", config.match.window);
  if (j.contains("match_on") && j["match_on"].is_string()) {
    try {
      config.match.match_on = parse_match_basis(j["match_on"].get<std::string>());
    } catch (const Error&) {
      issues.push_back({"match_on", "expected surface or lemma"});
    }
  }
  if (j.contains("stoplist") && !j["stoplist"].is_null()) {
    std::string path;
    read_string("stoplist", path);
    config.filters.stoplist_path = path;
  }
  read_uint("stoplist_size", config.filters.stoplist_size);
  read_double("max_doc_freq", config.filters.max_doc_freq);
  if (j.contains("pos_allow") && !j["pos_allow"].is_null()) {
    try {
      config.filters.pos_allow = j["pos_allow"].get<std::set<std::string>>();
    } catch (const json::exception&) {
      issues.push_back({"pos_allow", "must be an array of strings"});
    }
  }
  config.match.jobs = config.jobs;

  if (!issues.empty()) {
    std::string message = "invalid run configuration:";
    for (const auto& issue : issues) message += " " + issue.field + " " + issue.message + ";";
    message.pop_back();
    throw Error(ErrorCode::validation, message, std::move(issues));
  }
  config.validate();
  return config;
}

RetrievalStage prepare_retrieval(const Document& query, const Document& source, const EmbeddingProvider& embedder,
                                 const RunOptions& options) {
  const EmbedOptions embed_options{options.batch_size, options.jobs};
  RetrievalStage stage;
  const auto source_vectors = embed_segments(embedder, source.segments(), EmbedRole::candidate, embed_options);
  std::vector<std::string> ids;
  ids.reserve(source.size());
  for (const auto& seg : source.segments()) ids.push_back(seg.id);
  stage.index = build_index(ids, source_vectors);
  stage.query_vectors = embed_segments(embedder, query.segments(), EmbedRole::query, embed_options);
  if (!stage.query_vectors.empty() && !stage.index.empty() && stage.query_vectors.front().size() != stage.index.dim()) {
    throw Error(ErrorCode::configuration, "query and source embeddings differ in dimension");
  }
  return stage;
}

std::vector<std::vector<RankedCandidate>> rank_all(const RetrievalStage& stage, std::size_t depth) {
  std::vector<std::vector<RankedCandidate>> out;
  out.reserve(stage.query_vectors.size());
  for (const auto& qv : stage.query_vectors) out.push_back(topk(stage.index, qv, depth));
  return out;
}

std::vector<CandidateMatch> run_retrieval_only(const Document& query, const RetrievalStage& stage, std::size_t k) {
  std::vector<CandidateMatch> out;
  const auto ranked = rank_all(stage, k);
  for (std::size_t q = 0; q < ranked.size(); ++q) {
    for (const auto& r : ranked[q]) {
      CandidateMatch m;
      m.query_seg_id = query[q].id;
      m.source_seg_id = r.source_seg_id;
      m.query_ordinal = q;
      m.source_ordinal = r.source_index;
      m.rank = r.rank;
      m.similarity = r.similarity;
      m.label = Label::reference;
      m.origin = Architecture::retrieval_only;
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<CandidateMatch> run_retrieval_only(const Document& query, const Document& source,
                                               const EmbeddingProvider& embedder, std::size_t k,
                                               const RunOptions& options) {
  return run_retrieval_only(query, prepare_retrieval(query, source, embedder, options), k);
}

std::vector<CandidateMatch> run_classification_only(const Document& query, const Document& source,
                                                    const PairClassifierProvider& classifier, double threshold,
                                                    std::size_t token_budget, const RunOptions& options) {
  decide(0.0, threshold);  // validates the threshold
  std::vector<PairInput> inputs;
  inputs.reserve(query.size() * source.size());
  for (const auto& q : query.segments()) {
    for (const auto& s : source.segments()) inputs.push_back(build_pair_input(q, s, token_budget, &classifier));
  }
  const auto probs = classify_pairs(classifier, inputs, {options.batch_size, options.jobs});

  std::vector<CandidateMatch> out;
  out.reserve(inputs.size());
  std::vector<std::size_t> order(source.size());
  for (std::size_t q = 0; q < query.size(); ++q) {
    const double* row = probs.data() + q * source.size();
    for (std::size_t s = 0; s < source.size(); ++s) order[s] = s;
    std::stable_sort(order.begin(), order.end(), [row](std::size_t a, std::size_t b) { return row[a] > row[b]; });
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto s = order[r];
      CandidateMatch m;
      m.query_seg_id = query[q].id;
      m.source_seg_id = source[s].id;
      m.query_ordinal = q;
      m.source_ordinal = s;
      m.rank = r + 1;
      m.probability = row[s];
      m.label = decide(row[s], threshold).label;
      m.origin = Architecture::classification_only;
      out.push_back(std::move(m));
    }
  }
  return out;
}

std::vector<CandidateMatch> run_retrieve_rerank(const Document& query, const Document& source,
                                                const RetrievalStage& stage,
                                                const PairClassifierProvider& classifier, std::size_t k,
                                                double threshold, std::size_t token_budget,
                                                const RunOptions& options) {
  decide(0.0, threshold);
  auto matches = run_retrieval_only(query, stage, k);
  std::vector<PairInput> inputs;
  inputs.reserve(matches.size());
  for (const auto& m : matches) {
    inputs.push_back(build_pair_input(query[m.query_ordinal], source[m.source_ordinal], token_budget, &classifier));
  }
  const auto probs = classify_pairs(classifier, inputs, {options.batch_size, options.jobs});
  for (std::size_t i = 0; i < matches.size(); ++i) {
    matches[i].probability = probs[i];
    matches[i].label = decide(probs[i], threshold).label;
    matches[i].origin = Architecture::retrieve_rerank;
  }
  return matches;
}

std::vector<CandidateMatch> run_retrieve_rerank(const Document& query, const Document& source,
                                                const EmbeddingProvider& embedder,
                                                const PairClassifierProvider& classifier, std::size_t k,
                                                double threshold, std::size_t token_budget,
                                                const RunOptions& options) {
  return run_retrieve_rerank(query, source, prepare_retrieval(query, source, embedder, options), classifier, k,
                             threshold, token_budget, options);
}

std::vector<CandidateMatch> run_ngram(const Document& query, const Document& source, const MatchParams& match,
                                      const FilterSettings& filters) {
  FilterConfig config;
  config.stoplist = filters.stoplist_path ? load_stoplist(*filters.stoplist_path)
                                          : default_stoplist(source, filters.stoplist_size, match.match_on);
  config.pos_allow = filters.pos_allow;
  config.max_doc_freq = filters.max_doc_freq;

  const auto raw = find_raw_candidates(query, source, match);
  const auto kept = apply_filters(raw, config, source);

  std::vector<CandidateMatch> out;
  out.reserve(kept.size());
  std::size_t rank = 0;
  std::optional<std::size_t> current;
  for (const auto& c : kept) {
    if (current != c.query_ordinal) {
      current = c.query_ordinal;
      rank = 0;
    }
    CandidateMatch m;
    m.query_seg_id = c.query_seg_id;
    m.source_seg_id = c.source_seg_id;
    m.query_ordinal = c.query_ordinal;
    m.source_ordinal = c.source_ordinal;
    m.rank = ++rank;
    m.label = Label::reference;
    m.origin = Architecture::ngram;
    m.shared_tokens = c.shared_tokens;
    out.push_back(std::move(m));
  }
  return out;
}

std::size_t RunResult::review_count() const {
  return static_cast<std::size_t>(
      std::count_if(matches.begin(), matches.end(), [](const CandidateMatch& m) { return m.label == Label::reference; }));
}

RunResult run_pipeline(const RunConfig& config, const Document& query, const Document& source,
                       const Providers& providers) {
  config.validate();
  if (query.empty() || source.empty()) {
    throw Error(ErrorCode::empty_document, "a run needs a non-empty query and source document");
  }
  RunResult result;
  const RunOptions options{config.batch_size, config.jobs};
  std::size_t k = config.k;
  if ((config.architecture == Architecture::retrieval_only || config.architecture == Architecture::retrieve_rerank) &&
      k > source.size()) {
    result.warnings.push_back(fmt::format("k={} exceeds the {} source segments; clamped to {}", k, source.size(),
                                          source.size()));
    spdlog::warn("{}", result.warnings.back());
    k = source.size();
  }
  auto need = [](const auto* p, const char* what) {
    if (!p) throw Error(ErrorCode::configuration, std::string("no ") + what + " provider supplied");
    return p;
  };

  switch (config.architecture) {
    case Architecture::retrieval_only: {
      const auto* e = need(providers.embedder, "embedding");
      result.embedder_name = e->name();
      result.matches = run_retrieval_only(query, source, *e, k, options);
      break;
    }
    case Architecture::classification_only: {
      const auto* c = need(providers.classifier, "classifier");
      result.classifier_name = c->name();
      result.matches =
          run_classification_only(query, source, *c, config.threshold, config.token_budget, options);
      break;
    }
    case Architecture::retrieve_rerank: {
      const auto* e = need(providers.embedder, "embedding");
      const auto* c = need(providers.classifier, "classifier");
      result.embedder_name = e->name();
      result.classifier_name = c->name();
      result.matches =
          run_retrieve_rerank(query, source, *e, *c, k, config.threshold, config.token_budget, options);
      break;
    }
    case Architecture::ngram: {
      auto match = config.match;
      match.jobs = config.jobs;
      result.matches = run_ngram(query, source, match, config.filters);
      break;
    }
  }
  return result;
}

RunResult run_pipeline(const RunConfig& config, const Document& query, const Document& source) {
  config.validate();
  std::unique_ptr<EmbeddingProvider> embedder;
  std::unique_ptr<PairClassifierProvider> classifier;
  if (config.architecture == Architecture::retrieval_only || config.architecture == Architecture::retrieve_rerank) {
    embedder = make_embedder(config.embedder);
  }
  if (config.architecture == Architecture::classification_only ||
      config.architecture == Architecture::retrieve_rerank) {
    classifier = make_classifier(config.classifier, config.token_budget);
  }
  return run_pipeline(config, query, source, Providers{embedder.get(), classifier.get()});
}

std::string_view to_string(OutputFormat format) {
  switch (format) {
    case OutputFormat::csv: return "csv";
    case OutputFormat::jsonl: return "jsonl";
    case OutputFormat::json: return "json";
  }
  return "csv";
}

OutputFormat parse_output_format(std::string_view text) {
  if (text == "csv") return OutputFormat::csv;
  if (text == "jsonl") return OutputFormat::jsonl;
  if (text == "json") return OutputFormat::json;
  throw Error(ErrorCode::validation, "unknown output format '" + std::string(text) + "'",
              {{"format", "expected csv, jsonl or json"}});
}

json to_json(const CandidateMatch& m) {
  json j = {{"query_id", m.query_seg_id},
            {"source_id", m.source_seg_id},
            {"query_ordinal", m.query_ordinal},
            {"source_ordinal", m.source_ordinal},
            {"rank", m.rank},
            {"similarity", m.similarity ? json(*m.similarity) : json(nullptr)},
            {"probability", m.probability ? json(*m.probability) : json(nullptr)},
            {"label", to_string(m.label)},
            {"origin", to_string(m.origin)}};
  j["shared_tokens"] = m.shared_tokens;
  return j;
}

CandidateMatch match_from_json(const json& j) {
  CandidateMatch m;
  m.query_seg_id = j.at("query_id").get<std::string>();
  m.source_seg_id = j.at("source_id").get<std::string>();
  m.query_ordinal = j.value("query_ordinal", std::size_t{0});
  m.source_ordinal = j.value("source_ordinal", std::size_t{0});
  m.rank = j.value("rank", std::size_t{0});
  if (j.contains("similarity") && !j["similarity"].is_null()) m.similarity = j["similarity"].get<double>();
  if (j.contains("probability") && !j["probability"].is_null()) m.probability = j["probability"].get<double>();
  m.label = parse_label(j.at("label").get<std::string>());
  m.origin = parse_architecture(j.at("origin").get<std::string>());
  if (j.contains("shared_tokens")) m.shared_tokens = j["shared_tokens"].get<std::vector<std::string>>();
  return m;
}

std::string format_matches(std::span<const CandidateMatch> matches, OutputFormat format) {
  std::string out;
  switch (format) {
    case OutputFormat::csv: {
      out += csv::format_row(
          {"query_id", "source_id", "rank", "similarity", "probability", "label", "origin", "shared_tokens"});
      for (const auto& m : matches) {
        out += csv::format_row({m.query_seg_id, m.source_seg_id, std::to_string(m.rank),
                                m.similarity ? fmt::format("{}", *m.similarity) : "",
                                m.probability ? fmt::format("{}", *m.probability) : "",
                                std::string(to_string(m.label)), std::string(to_string(m.origin)),
                                join(m.shared_tokens, "|")});
      }
      break;
    }
    case OutputFormat::jsonl:
      for (const auto& m : matches) {
        out += to_json(m).dump();
        out.push_back('\n');
      }
      break;
    case OutputFormat::json: {
      json arr = json::array();
      for (const auto& m : matches) arr.push_back(to_json(m));
      out = arr.dump(2);
      out.push_back('\n');
      break;
    }
  }
  return out;
}

json make_manifest(const RunConfig& config, const Document& query, const Document& source, const RunResult& result,
                   std::string_view timestamp) {
  return {
      {"config", config.to_json()},
      {"providers", {{"embedder", result.embedder_name}, {"classifier", result.classifier_name}}},
      {"query", {{"doc_id", query.doc_id()}, {"segments", query.size()}, {"checksum", query.checksum()}}},
      {"source", {{"doc_id", source.doc_id()}, {"segments", source.size()}, {"checksum", source.checksum()}}},
      {"matches", result.matches.size()},
      {"review_count", result.review_count()},
      {"warnings", result.warnings},
      {"timestamp", timestamp},
  };
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace intertext
