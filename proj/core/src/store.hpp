#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "intertext/service.hpp"

struct sqlite3;

namespace intertext {

struct StoredDocument {
  DocumentInfo info;
  FileFormat format = FileFormat::csv;
  std::string content;
};

// SQLite persistence for documents, runs, matches and decisions. All calls
// are serialized on one connection.
class Store {
 public:
  explicit Store(const std::filesystem::path& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  std::optional<StoredDocument> find_document(const std::string& doc_id) const;
  void insert_document(const StoredDocument& doc);

  void insert_run(const RunRecord& run);
  std::optional<RunRecord> find_run(const std::string& run_id) const;
  std::vector<RunRecord> runs() const;
  std::vector<std::string> runs_in_state(RunState state) const;
  void set_state(const std::string& run_id, RunState state, const std::string& error = {});
  // Stores matches and flips the run to done in one transaction.
  void complete_run(const std::string& run_id, const std::vector<CandidateMatch>& matches,
                    const std::vector<std::string>& warnings);

  std::size_t count_matches(const std::string& run_id, const ResultFilter& filter) const;
  std::vector<ResultItem> matches(const std::string& run_id, const ResultFilter& filter, std::size_t offset,
                                  std::size_t limit) const;
  bool has_match(const MatchKey& key) const;
  ReviewDecision upsert_decision(const ReviewDecision& decision);
  std::vector<ResultItem> confirmed(const std::string& run_id) const;

 private:
  sqlite3* db_ = nullptr;
  mutable std::mutex mutex_;
};

}  // namespace intertext
