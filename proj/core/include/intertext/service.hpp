#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "intertext/corpus.hpp"
#include "intertext/pipeline.hpp"

namespace intertext {

enum class RunState { pending, running, done, failed };
std::string_view to_string(RunState state);
RunState parse_run_state(std::string_view text);

enum class Verdict { confirmed, rejected, undecided };
std::string_view to_string(Verdict verdict);
Verdict parse_verdict(std::string_view text);

struct DocumentInfo {
  std::string doc_id;
  Role role = Role::query;
  std::string author;
  std::size_t segments = 0;
  std::string checksum;
};

struct RunRecord {
  std::string run_id;
  RunConfig config;
  std::string query_doc;
  std::string source_doc;
  RunState state = RunState::pending;
  std::string created_at;
  std::string updated_at;
  std::string error;
  std::vector<std::string> warnings;
  std::size_t match_count = 0;
};

struct MatchKey {
  std::string run_id;
  std::string query_seg_id;
  std::string source_seg_id;
};

struct ReviewDecision {
  MatchKey key;
  Verdict verdict = Verdict::undecided;
  std::string reviewer;
  std::string decided_at;  // empty while undecided
};

struct ResultFilter {
  std::optional<double> min_prob;
  std::optional<Label> label;
  std::optional<std::string> query_seg_id;
};

struct ResultItem {
  CandidateMatch match;
  ReviewDecision decision;
};

struct ResultPage {
  std::size_t page = 1;  // 1-based
  std::size_t page_size = 50;
  std::size_t total = 0;
  std::size_t pages = 0;
  std::vector<ResultItem> items;
};

nlohmann::json to_json(const DocumentInfo& info);
nlohmann::json to_json(const RunRecord& run);
nlohmann::json to_json(const ReviewDecision& decision);
nlohmann::json to_json(const ResultPage& page);

class Store;

struct ServiceOptions {
  std::filesystem::path database = "intertext.db";
  bool start_worker = true;
};

// Durable run queue and review store. Runs execute on one background worker
// in submission order. On open, runs left running by a previous process are
// marked failed and pending runs are queued again.
class Service {
 public:
  explicit Service(ServiceOptions options);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Re-uploading identical content is a no-op; different content under an
  // existing id is a conflict.
  DocumentInfo put_document(std::string_view content, FileFormat format, const DocumentOptions& options);
  DocumentInfo get_document(const std::string& doc_id) const;

  // Validates eagerly (field diagnostics) and queues the run.
  std::string submit_run(const RunConfig& config, const std::string& query_doc, const std::string& source_doc);
  std::string submit_run(const nlohmann::json& config, const std::string& query_doc, const std::string& source_doc);

  RunRecord get_run(const std::string& run_id) const;
  std::vector<RunRecord> list_runs() const;

  // Blocks until the run is done or failed, or the timeout passes.
  RunRecord wait_for(const std::string& run_id, std::chrono::milliseconds timeout) const;

  // Ordered by (query ordinal, rank). Throws not_found for an unknown run and
  // conflict when the run is not done.
  ResultPage get_results(const std::string& run_id, std::size_t page, std::size_t page_size,
                         const ResultFilter& filter = {}) const;
  std::vector<CandidateMatch> all_matches(const std::string& run_id) const;

  // Upsert; the latest decision for a key wins. Unknown key is not_found.
  ReviewDecision record_decision(const MatchKey& key, Verdict verdict, const std::string& reviewer);

  // Confirmed matches as a links file readable by load_links.
  std::string export_confirmed(const std::string& run_id, FileFormat format) const;

  void stop();

 private:
  void worker_loop();
  void execute(const std::string& run_id);
  void enqueue(const std::string& run_id);
  std::string new_run_id();

  std::unique_ptr<Store> store_;
  mutable std::mutex mutex_;
  mutable std::condition_variable queue_cv_;
  mutable std::condition_variable state_cv_;
  std::deque<std::string> queue_;
  bool stopping_ = false;
  std::uint64_t id_counter_ = 0;
  std::uint64_t id_salt_ = 0;
  std::thread worker_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
};

// HTTP+JSON facade over a Service. Error bodies are
// {"code", "message", "fields"}.
class HttpServer {
 public:
  HttpServer(Service& service, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds and starts serving on a background thread; returns the bound port.
  int start();
  // Binds and serves on the calling thread until stop().
  void run();
  void stop();
  int port() const noexcept { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace intertext
