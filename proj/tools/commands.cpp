#include "commands.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <thread>

#include <intertext/corpus.hpp>
#include <intertext/error.hpp>
#include <intertext/harness.hpp>
#include <intertext/matcher.hpp>
#include <intertext/pipeline.hpp>
#include <intertext/protocol.hpp>
#include <intertext/providers.hpp>
#include <intertext/service.hpp>
#include <intertext/synthetic.hpp>

namespace intertext::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit(const std::string& path, std::string_view content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    std::cout.flush();
  } else {
    write_file(path, content);
    spdlog::info("wrote {}", path);
  }
}

Document read_doc(const std::string& path, Role role, const std::string& doc_id = {}, const std::string& author = {}) {
  DocumentOptions options;
  options.role = role;
  options.doc_id = doc_id;
  options.author = author;
  return load_document(path, options);
}

struct RunFlags {
  std::string arch = "retrieve_rerank";
  std::size_t k = 10;
  double threshold = 0.5;
  std::string embedder = "hash";
  std::string classifier = "jaccard";
  std::size_t token_budget = 512;
  std::size_t batch_size = 64;
  unsigned jobs = 1;
  std::size_t min_shared = 2;
  std::size_t window = 10;
  std::string match_on = "surface";
  std::string stoplist;
  std::size_t stoplist_size = 100;
  std::vector<std::string> pos_allow;
  double max_doc_freq = 0.01;

  void add_to(CLI::App& sub) {
    sub.add_option("--arch", arch, "retrieval, classification, rerank or ngram")->capture_default_str();
    sub.add_option("--k", k, "Retrieval depth")->capture_default_str();
    sub.add_option("--threshold", threshold, "Reference decision threshold")->capture_default_str();
    sub.add_option("--embedder", embedder, "hash[:DIM[:SEED]], file:PATH[,PATH] or http://...")
        ->capture_default_str();
    sub.add_option("--classifier", classifier, "jaccard or http://...")->capture_default_str();
    sub.add_option("--token-budget", token_budget, "Pair classifier input length in tokens")->capture_default_str();
    sub.add_option("--batch-size", batch_size)->capture_default_str();
    sub.add_option("--jobs", jobs, "Worker threads (0 = all cores)")->capture_default_str();
    sub.add_option("--min-shared", min_shared, "n-gram: distinct shared tokens required")->capture_default_str();
    sub.add_option("--window", window, "n-gram: token window on each side")->capture_default_str();
    sub.add_option("--match-on", match_on, "n-gram: surface or lemma")->capture_default_str();
    sub.add_option("--stoplist", stoplist, "n-gram: stoplist file (one token per line)");
    sub.add_option("--stoplist-size", stoplist_size, "n-gram: size of the frequency-derived stoplist")
        ->capture_default_str();
    sub.add_option("--pos-allow", pos_allow, "n-gram: POS tags allowed on shared source tokens");
    sub.add_option("--max-doc-freq", max_doc_freq, "n-gram: collocation cut-off")->capture_default_str();
  }

  // Goes through the same schema the service validates.
  RunConfig build() const {
    json j = {{"architecture", arch},
              {"k", k},
              {"threshold", threshold},
              {"embedder", embedder},
              {"classifier", classifier},
              {"token_budget", token_budget},
              {"batch_size", batch_size},
              {"jobs", jobs},
              {"min_shared", min_shared},
              {"window", window},
              {"match_on", match_on},
              {"stoplist_size", stoplist_size},
              {"max_doc_freq", max_doc_freq}};
    if (!stoplist.empty()) j["stoplist"] = stoplist;
    if (!pos_allow.empty()) j["pos_allow"] = pos_allow;
    return RunConfig::from_json(j);
  }
};

}  // namespace

void add_ingest(CLI::App& app) {
  struct Opts {
    std::string in, role = "query", doc_id, author, out, format;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("ingest", "Validate a segmented document and report its summary");
  sub->add_option("--in", o->in, "Document file (.csv or .jsonl)")->required();
  sub->add_option("--role", o->role, "query or source")->capture_default_str();
  sub->add_option("--doc-id", o->doc_id, "Document id (default: file stem)");
  sub->add_option("--author", o->author);
  sub->add_option("--out", o->out, "Write the normalized document here");
  sub->add_option("--format", o->format, "Output format for --out: csv or jsonl");
  sub->callback([o] {
    const auto doc = read_doc(o->in, parse_role(o->role), o->doc_id, o->author);
    if (!o->out.empty()) {
      const auto format = o->format.empty() ? format_from_path(o->out) : parse_file_format(o->format);
      write_document(doc, o->out, format);
    }
    const auto stats = corpus_stats(doc);
    json summary = {{"doc_id", doc.doc_id()},      {"role", to_string(doc.role())},
                    {"author", doc.author()},      {"segments", doc.size()},
                    {"avg_tokens", stats.avg_tokens}, {"lemmas", doc.has_lemmas()},
                    {"pos", doc.has_pos()},        {"checksum", doc.checksum()}};
    std::cout << summary.dump(2) << '\n';
  });
}

void add_stats(CLI::App& app) {
  struct Opts {
    std::vector<std::string> in, author;
    std::string out, format = "text";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("stats", "Segment length statistics per document");
  sub->add_option("--in", o->in, "Document files")->required();
  sub->add_option("--author", o->author, "Row labels, one per input (default: file stem)");
  sub->add_option("--format", o->format, "text or json")->capture_default_str();
  sub->add_option("--out", o->out, "Output file (default: stdout)");
  sub->callback([o] {
    if (!o->author.empty() && o->author.size() != o->in.size()) {
      throw Error(ErrorCode::validation, "give one --author per --in", {{"author", "count must match --in"}});
    }
    std::vector<Document> docs;
    std::vector<std::pair<std::string, CorpusStats>> rows;
    for (std::size_t i = 0; i < o->in.size(); ++i) {
      const auto label = o->author.empty() ? fs::path(o->in[i]).stem().string() : o->author[i];
      docs.push_back(read_doc(o->in[i], Role::source, {}, label));
      rows.emplace_back(label, corpus_stats(docs.back()));
    }
    std::optional<CorpusStats> total;
    if (docs.size() > 1) total = corpus_stats(std::span<const Document>(docs));
    if (o->format == "json") {
      auto to_j = [](const CorpusStats& s) {
        return json{{"segments", s.segment_count}, {"avg_tokens", s.avg_tokens}, {"min_tokens", s.min_tokens},
                    {"max_tokens", s.max_tokens},  {"stddev_tokens", s.stddev_tokens}};
      };
      json out = json::array();
      for (const auto& [label, s] : rows) out.push_back({{"author", label}, {"stats", to_j(s)}});
      json body = {{"documents", out}};
      if (total) body["total"] = to_j(*total);
      emit(o->out, body.dump(2) + "\n");
    } else if (o->format == "text") {
      emit(o->out, format_stats_table(rows, total));
    } else {
      throw Error(ErrorCode::validation, "unknown stats format '" + o->format + "'", {{"format", "text or json"}});
    }
  });
}

void add_match(CLI::App& app) {
  auto flags = std::make_shared<RunFlags>();
  auto paths = std::make_shared<std::array<std::string, 4>>();  // query, source, out, format
  (*paths)[3] = "csv";
  auto* sub = app.add_subcommand("match", "Rule-based n-gram candidates with the filter cascade");
  sub->add_option("--query", (*paths)[0], "Query document")->required();
  sub->add_option("--source", (*paths)[1], "Source document")->required();
  sub->add_option("--out", (*paths)[2], "Output file (default: stdout)");
  sub->add_option("--format", (*paths)[3], "csv, jsonl or json")->capture_default_str();
  sub->add_option("--min-shared", flags->min_shared)->capture_default_str();
  sub->add_option("--window", flags->window)->capture_default_str();
  sub->add_option("--match-on", flags->match_on, "surface or lemma")->capture_default_str();
  sub->add_option("--stoplist", flags->stoplist, "Stoplist file (one token per line)");
  sub->add_option("--stoplist-size", flags->stoplist_size)->capture_default_str();
  sub->add_option("--pos-allow", flags->pos_allow, "POS tags allowed on shared source tokens");
  sub->add_option("--max-doc-freq", flags->max_doc_freq)->capture_default_str();
  sub->add_option("--jobs", flags->jobs)->capture_default_str();
  sub->callback([flags, paths] {
    flags->arch = "ngram";
    const auto config = flags->build();
    const auto q = read_doc((*paths)[0], Role::query);
    const auto s = read_doc((*paths)[1], Role::source);
    const auto result = run_pipeline(config, q, s);
    emit((*paths)[2], format_matches(result.matches, parse_output_format((*paths)[3])));
  });
}

void add_index(CLI::App& app) {
  struct Opts {
    std::string in, embedder = "hash", out, role = "candidate";
    std::size_t batch_size = 64;
    unsigned jobs = 1;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("index", "Embed a document and store its vectors");
  sub->add_option("--in", o->in, "Document file")->required();
  sub->add_option("--embedder", o->embedder)->capture_default_str();
  sub->add_option("--role", o->role, "query or candidate prefix")->capture_default_str();
  sub->add_option("--out", o->out, "Vector file (.bin for binary, otherwise JSONL)")->required();
  sub->add_option("--batch-size", o->batch_size)->capture_default_str();
  sub->add_option("--jobs", o->jobs)->capture_default_str();
  sub->callback([o] {
    EmbedRole role;
    if (o->role == "query") {
      role = EmbedRole::query;
    } else if (o->role == "candidate") {
      role = EmbedRole::candidate;
    } else {
      throw Error(ErrorCode::validation, "unknown role '" + o->role + "'", {{"role", "query or candidate"}});
    }
    const auto doc = read_doc(o->in, role == EmbedRole::query ? Role::query : Role::source);
    const auto embedder = make_embedder(o->embedder);
    StoredVectors stored;
    stored.vectors = embed_segments(*embedder, doc.segments(), role, {o->batch_size, o->jobs});
    for (const auto& seg : doc.segments()) stored.ids.push_back(seg.id);
    build_index(stored.ids, stored.vectors);  // rejects zero vectors and duplicates before writing
    if (fs::path(o->out).extension() == ".bin") {
      write_vectors_binary(o->out, stored);
    } else {
      write_vectors_jsonl(o->out, stored);
    }
    spdlog::info("indexed {} segments with {}", stored.ids.size(), embedder->name());
  });
}

void add_detect(CLI::App& app) {
  auto flags = std::make_shared<RunFlags>();
  struct Paths {
    std::string query, source, out, format = "csv", manifest;
  };
  auto p = std::make_shared<Paths>();
  auto* sub = app.add_subcommand("detect", "Run a detection pipeline over a query/source document pair");
  sub->add_option("--query", p->query, "Query document")->required();
  sub->add_option("--source", p->source, "Source document")->required();
  sub->add_option("--out", p->out, "Output file (default: stdout)");
  sub->add_option("--format", p->format, "csv, jsonl or json")->capture_default_str();
  sub->add_option("--manifest", p->manifest, "Write a run manifest (config, checksums, counts) here");
  flags->add_to(*sub);
  sub->callback([flags, p] {
    const auto config = flags->build();
    const auto q = read_doc(p->query, Role::query);
    const auto s = read_doc(p->source, Role::source);
    const auto result = run_pipeline(config, q, s);
    for (const auto& w : result.warnings) spdlog::warn("{}", w);
    emit(p->out, format_matches(result.matches, parse_output_format(p->format)));
    if (!p->manifest.empty()) {
      write_file(p->manifest, make_manifest(config, q, s, result, utc_timestamp()).dump(2) + "\n");
    }
    spdlog::info("{} matches, {} labeled reference", result.matches.size(), result.review_count());
  });
}

void add_evaluate(CLI::App& app) {
  auto flags = std::make_shared<RunFlags>();
  struct Opts {
    std::string query, source, links, out, format = "json";
    std::size_t folds = 5, query_size = default_eval_query_size, source_size = default_eval_source_size;
    std::uint64_t seed = 0;
    std::vector<std::size_t> ks{1, 5, 10, 20, 100};
    bool no_baseline = false;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("evaluate", "Cross-validated benchmark with confusion, error-rate and IR metrics");
  sub->add_option("--query", o->query, "Query corpus")->required();
  sub->add_option("--source", o->source, "Source corpus")->required();
  sub->add_option("--links", o->links, "Gold links")->required();
  sub->add_option("--folds", o->folds)->capture_default_str();
  sub->add_option("--seed", o->seed)->capture_default_str();
  sub->add_option("--query-size", o->query_size, "Segments per evaluation query document")->capture_default_str();
  sub->add_option("--source-size", o->source_size, "Segments per evaluation source document")
      ->capture_default_str();
  sub->add_option("--ks", o->ks, "IR cutoffs")->delimiter(',')->capture_default_str();
  sub->add_flag("--no-baseline", o->no_baseline, "Skip the retrieval-only workload baseline");
  sub->add_option("--out", o->out, "Report file (default: stdout)");
  sub->add_option("--format", o->format, "json or text")->capture_default_str();
  flags->add_to(*sub);
  sub->callback([flags, o] {
    if (o->format != "json" && o->format != "text") {
      throw Error(ErrorCode::validation, "unknown report format '" + o->format + "'", {{"format", "json or text"}});
    }
    BenchmarkConfig config;
    config.run = flags->build();
    config.folds = o->folds;
    config.seed = o->seed;
    config.query_size = o->query_size;
    config.source_size = o->source_size;
    config.ir_ks = o->ks;
    config.baseline = !o->no_baseline;
    const auto q = read_doc(o->query, Role::query);
    const auto s = read_doc(o->source, Role::source);
    const auto links = load_links(o->links, &q, &s);

    std::unique_ptr<EmbeddingProvider> embedder;
    std::unique_ptr<PairClassifierProvider> classifier;
    const auto arch = config.run.architecture;
    if (arch == Architecture::retrieval_only || arch == Architecture::retrieve_rerank) {
      embedder = make_embedder(config.run.embedder);
    }
    if (arch == Architecture::classification_only || arch == Architecture::retrieve_rerank) {
      classifier = make_classifier(config.run.classifier, config.run.token_budget);
    }
    const auto report = run_benchmark(config, q, s, links, Providers{embedder.get(), classifier.get()});
    emit(o->out, o->format == "json" ? to_json(report).dump(2) + "\n" : format_report_text(report));
  });
}

namespace {

struct SamplingFlags {
  std::string query, source, links, strategy = "random_negative", embedder = "hash", out, format;
  std::size_t ratio = 1, batch_size = 64;
  std::uint64_t seed = 0;

  void add_to(CLI::App& sub) {
    sub.add_option("--query", query, "Query corpus")->required();
    sub.add_option("--source", source, "Source corpus")->required();
    sub.add_option("--links", links, "Gold links")->required();
    sub.add_option("--strategy", strategy, "random_pair, random_negative, hard_negative or mixed")
        ->capture_default_str();
    sub.add_option("--ratio", ratio, "Negatives per positive")->capture_default_str();
    sub.add_option("--embedder", embedder, "Embedding provider for hard_negative and mixed")->capture_default_str();
    sub.add_option("--seed", seed)->capture_default_str();
    sub.add_option("--batch-size", batch_size)->capture_default_str();
    sub.add_option("--out", out, "Output file (default: stdout)");
    sub.add_option("--format", format, "csv or jsonl (default: from --out, else csv)");
  }

  PairFormat pair_format() const {
    if (format.empty()) return out.empty() || out == "-" ? PairFormat::csv : pair_format_from_path(out);
    if (format == "csv") return PairFormat::csv;
    if (format == "jsonl") return PairFormat::jsonl;
    throw Error(ErrorCode::validation, "unknown pair format '" + format + "'", {{"format", "csv or jsonl"}});
  }
};

std::vector<TrainingPair> negatives_for(const SamplingFlags& f, std::span<const LinkRecord> positives,
                                        std::span<const LinkRecord> gold, const Document& q, const Document& s) {
  const auto strategy = parse_sampling_strategy(f.strategy);
  std::unique_ptr<EmbeddingProvider> embedder;
  if (strategy == SamplingStrategy::hard_negative || strategy == SamplingStrategy::mixed) {
    embedder = make_embedder(f.embedder);
  }
  NegativeSamplingOptions options;
  options.ratio = f.ratio;
  options.seed = f.seed;
  options.embedder = embedder.get();
  options.gold = gold;
  options.batch_size = f.batch_size;
  return sample_negatives(strategy, positives, q, s, options);
}

}  // namespace

void add_sample_negatives(CLI::App& app) {
  auto f = std::make_shared<SamplingFlags>();
  auto* sub = app.add_subcommand("sample-negatives", "Draw negative training pairs for every gold link");
  f->add_to(*sub);
  sub->callback([f] {
    const auto q = read_doc(f->query, Role::query);
    const auto s = read_doc(f->source, Role::source);
    const auto links = load_links(f->links, &q, &s);
    const auto pairs = negatives_for(*f, links, links, q, s);
    emit(f->out, format_training_pairs(pairs, f->pair_format()));
    spdlog::info("{} negatives for {} positives", pairs.size(), links.size());
  });
}

void add_export_pairs(CLI::App& app) {
  auto f = std::make_shared<SamplingFlags>();
  auto fold = std::make_shared<std::pair<std::size_t, std::size_t>>(5, 0);  // folds, fold id
  auto* sub = app.add_subcommand("export-pairs",
                                 "Write a fold's training pairs: its train links as positives plus sampled negatives");
  f->add_to(*sub);
  sub->add_option("--folds", fold->first, "Fold count")->capture_default_str();
  sub->add_option("--fold", fold->second, "Which fold's training split to export")->capture_default_str();
  sub->callback([f, fold] {
    const auto q = read_doc(f->query, Role::query);
    const auto s = read_doc(f->source, Role::source);
    const auto links = load_links(f->links, &q, &s);
    const auto folds = make_folds(links, fold->first, f->seed);
    if (fold->second >= folds.size()) {
      throw Error(ErrorCode::validation, "fold index out of range", {{"fold", "must be below --folds"}});
    }
    const auto& train = folds[fold->second].train_links;
    auto pairs = positive_pairs(train, q, s);
    const auto negatives = negatives_for(*f, train, links, q, s);
    pairs.insert(pairs.end(), negatives.begin(), negatives.end());
    if (!f->out.empty() && f->out != "-") {
      const auto n = export_training_pairs(pairs, f->out, f->pair_format());
      spdlog::info("wrote {} training pairs to {}", n, f->out);
    } else {
      emit(f->out, format_training_pairs(pairs, f->pair_format()));
    }
  });
}

void add_serve(CLI::App& app) {
  struct Opts {
    std::string db = "intertext.db", host = "127.0.0.1";
    int port = 8080;
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("serve", "Start the review service (HTTP+JSON)");
  sub->add_option("--db", o->db, "SQLite database file")->capture_default_str();
  sub->add_option("--host", o->host)->capture_default_str();
  sub->add_option("--port", o->port)->capture_default_str();
  sub->callback([o] {
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Service service(ServiceOptions{o->db, true});
    HttpServer server(service, ServerOptions{o->host, o->port});
    std::thread waiter([&] {
      int sig = 0;
      sigwait(&signals, &sig);
      spdlog::info("signal {} received, shutting down", sig);
      server.stop();
    });
    const int port = server.start();
    std::cout << fmt::format("serving on http://{}:{}", o->host, port) << std::endl;
    waiter.join();
    service.stop();
  });
}

void add_synth(CLI::App& app) {
  struct Opts {
    SyntheticSpec spec;
    std::string out_dir = ".";
    std::string format = "csv";
  };
  auto o = std::make_shared<Opts>();
  auto* sub = app.add_subcommand("synth", "Generate a seeded synthetic query/source corpus with planted links");
  sub->add_option("--queries", o->spec.query_segments)->capture_default_str();
  sub->add_option("--sources", o->spec.source_segments)->capture_default_str();
  sub->add_option("--links", o->spec.links)->capture_default_str();
  sub->add_option("--vocabulary", o->spec.vocabulary)->capture_default_str();
  sub->add_option("--borrowed", o->spec.borrowed_tokens, "Source tokens planted per link")->capture_default_str();
  sub->add_flag("--annotations", o->spec.annotations, "Attach lemma and POS sequences");
  sub->add_option("--seed", o->spec.seed)->capture_default_str();
  sub->add_option("--out-dir", o->out_dir)->capture_default_str();
  sub->add_option("--format", o->format, "csv or jsonl")->capture_default_str();
  sub->callback([o] {
    const auto format = parse_file_format(o->format);
    const auto corpus = make_synthetic_corpus(o->spec);
    const fs::path dir(o->out_dir);
    fs::create_directories(dir);
    const auto ext = "." + o->format;
    write_document(corpus.query, dir / ("query" + ext), format);
    write_document(corpus.source, dir / ("source" + ext), format);
    write_links(corpus.links, dir / ("links" + ext), format);
    std::cout << fmt::format("{} query segments, {} source segments, {} links -> {}\n", corpus.query.size(),
                             corpus.source.size(), corpus.links.size(), dir.string());
  });
}

}  // namespace intertext::cli
