#include "store.hpp"

#include <sqlite3.h>

#include <nlohmann/json.hpp>

#include "intertext/error.hpp"

namespace intertext {

using nlohmann::json;

namespace {

class Statement {
 public:
  Statement(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &stmt_, nullptr) != SQLITE_OK) {
      throw Error(ErrorCode::io, std::string("sqlite prepare failed: ") + sqlite3_errmsg(db));
    }
  }
  ~Statement() { sqlite3_finalize(stmt_); }
  Statement(const Statement&) = delete;
  Statement& operator=(const Statement&) = delete;

  Statement& bind(int i, const std::string& v) {
    sqlite3_bind_text(stmt_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Statement& bind(int i, std::string_view v) { return bind(i, std::string(v)); }
  Statement& bind(int i, const char* v) { return bind(i, std::string(v)); }
  Statement& bind(int i, std::int64_t v) {
    sqlite3_bind_int64(stmt_, i, v);
    return *this;
  }
  Statement& bind(int i, std::size_t v) { return bind(i, static_cast<std::int64_t>(v)); }
  Statement& bind(int i, const std::optional<double>& v) {
    if (v) {
      sqlite3_bind_double(stmt_, i, *v);
    } else {
      sqlite3_bind_null(stmt_, i);
    }
    return *this;
  }

  // True while a row is available.
  bool step() {
    const int rc = sqlite3_step(stmt_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    throw Error(ErrorCode::io, std::string("sqlite step failed: ") + sqlite3_errmsg(db_));
  }
  void run() { step(); }
  void reset() {
    sqlite3_reset(stmt_);
    sqlite3_clear_bindings(stmt_);
  }

  std::string text(int col) const {
    const auto* p = sqlite3_column_text(stmt_, col);
    return p ? std::string(reinterpret_cast<const char*>(p), sqlite3_column_bytes(stmt_, col)) : std::string();
  }
  std::int64_t integer(int col) const { return sqlite3_column_int64(stmt_, col); }
  std::optional<double> real(int col) const {
    if (sqlite3_column_type(stmt_, col) == SQLITE_NULL) return std::nullopt;
    return sqlite3_column_double(stmt_, col);
  }
  bool is_null(int col) const { return sqlite3_column_type(stmt_, col) == SQLITE_NULL; }

 private:
  sqlite3* db_;
  sqlite3_stmt* stmt_ = nullptr;
};

void exec(sqlite3* db, const char* sql) {
  char* err = nullptr;
  if (sqlite3_exec(db, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown error";
    sqlite3_free(err);
    throw Error(ErrorCode::io, "sqlite: " + msg);
  }
}

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS documents (
  doc_id TEXT PRIMARY KEY,
  role TEXT NOT NULL,
  author TEXT NOT NULL,
  format TEXT NOT NULL,
  content TEXT NOT NULL,
  checksum TEXT NOT NULL,
  segments INTEGER NOT NULL
);
CREATE TABLE IF NOT EXISTS runs (
  run_id TEXT PRIMARY KEY,
  config TEXT NOT NULL,
  query_doc TEXT NOT NULL,
  source_doc TEXT NOT NULL,
  state TEXT NOT NULL,
  created_at TEXT NOT NULL,
  updated_at TEXT NOT NULL,
  error TEXT NOT NULL DEFAULT '',
  warnings TEXT NOT NULL DEFAULT '[]',
  match_count INTEGER NOT NULL DEFAULT 0
);
CREATE TABLE IF NOT EXISTS matches (
  run_id TEXT NOT NULL,
  query_seg_id TEXT NOT NULL,
  source_seg_id TEXT NOT NULL,
  query_ordinal INTEGER NOT NULL,
  source_ordinal INTEGER NOT NULL,
  rank INTEGER NOT NULL,
  similarity REAL,
  probability REAL,
  label TEXT NOT NULL,
  origin TEXT NOT NULL,
  shared_tokens TEXT NOT NULL,
  PRIMARY KEY (run_id, query_seg_id, source_seg_id)
);
CREATE INDEX IF NOT EXISTS matches_order ON matches (run_id, query_ordinal, rank, source_ordinal);
CREATE TABLE IF NOT EXISTS decisions (
  run_id TEXT NOT NULL,
  query_seg_id TEXT NOT NULL,
  source_seg_id TEXT NOT NULL,
  verdict TEXT NOT NULL,
  reviewer TEXT NOT NULL,
  decided_at TEXT NOT NULL,
  PRIMARY KEY (run_id, query_seg_id, source_seg_id)
);
)sql";

constexpr const char* kRunColumns =
    "run_id, config, query_doc, source_doc, state, created_at, updated_at, error, warnings, match_count";

RunRecord read_run(const Statement& st) {
  RunRecord r;
  r.run_id = st.text(0);
  r.config = RunConfig::from_json(json::parse(st.text(1)));
  r.query_doc = st.text(2);
  r.source_doc = st.text(3);
  r.state = parse_run_state(st.text(4));
  r.created_at = st.text(5);
  r.updated_at = st.text(6);
  r.error = st.text(7);
  r.warnings = json::parse(st.text(8)).get<std::vector<std::string>>();
  r.match_count = static_cast<std::size_t>(st.integer(9));
  return r;
}

// Shared WHERE clause for filtered match queries; parameters 1..4.
constexpr const char* kMatchFilter =
    " WHERE m.run_id = ?1"
    " AND (?2 IS NULL OR (m.probability IS NOT NULL AND m.probability >= ?2))"
    " AND (?3 IS NULL OR m.label = ?3)"
    " AND (?4 IS NULL OR m.query_seg_id = ?4)";

void bind_filter(Statement& st, const std::string& run_id, const ResultFilter& f) {
  st.bind(1, run_id).bind(2, f.min_prob);
  if (f.label) st.bind(3, to_string(*f.label));
  if (f.query_seg_id) st.bind(4, *f.query_seg_id);
}

constexpr const char* kMatchSelect =
    "SELECT m.query_seg_id, m.source_seg_id, m.query_ordinal, m.source_ordinal, m.rank, m.similarity,"
    " m.probability, m.label, m.origin, m.shared_tokens, d.verdict, d.reviewer, d.decided_at"
    " FROM matches m LEFT JOIN decisions d ON d.run_id = m.run_id AND d.query_seg_id = m.query_seg_id"
    " AND d.source_seg_id = m.source_seg_id";

ResultItem read_item(const Statement& st, const std::string& run_id) {
  ResultItem item;
  auto& m = item.match;
  m.query_seg_id = st.text(0);
  m.source_seg_id = st.text(1);
  m.query_ordinal = static_cast<std::size_t>(st.integer(2));
  m.source_ordinal = static_cast<std::size_t>(st.integer(3));
  m.rank = static_cast<std::size_t>(st.integer(4));
  m.similarity = st.real(5);
  m.probability = st.real(6);
  m.label = parse_label(st.text(7));
  m.origin = parse_architecture(st.text(8));
  m.shared_tokens = json::parse(st.text(9)).get<std::vector<std::string>>();
  item.decision.key = {run_id, m.query_seg_id, m.source_seg_id};
  if (!st.is_null(10)) {
    item.decision.verdict = parse_verdict(st.text(10));
    item.decision.reviewer = st.text(11);
    item.decision.decided_at = st.text(12);
  }
  return item;
}

}  // namespace

Store::Store(const std::filesystem::path& path) {
  if (sqlite3_open_v2(path.string().c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw Error(ErrorCode::io, "cannot open database '" + path.string() + "': " + msg);
  }
  sqlite3_busy_timeout(db_, 5000);
  exec(db_, "PRAGMA journal_mode=WAL; PRAGMA synchronous=NORMAL; PRAGMA foreign_keys=ON;");
  exec(db_, kSchema);
}

Store::~Store() { sqlite3_close(db_); }

std::optional<StoredDocument> Store::find_document(const std::string& doc_id) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT doc_id, role, author, format, content, checksum, segments FROM documents WHERE doc_id = ?1");
  st.bind(1, doc_id);
  if (!st.step()) return std::nullopt;
  StoredDocument d;
  d.info.doc_id = st.text(0);
  d.info.role = parse_role(st.text(1));
  d.info.author = st.text(2);
  d.format = parse_file_format(st.text(3));
  d.content = st.text(4);
  d.info.checksum = st.text(5);
  d.info.segments = static_cast<std::size_t>(st.integer(6));
  return d;
}

void Store::insert_document(const StoredDocument& doc) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "INSERT INTO documents (doc_id, role, author, format, content, checksum, segments)"
               " VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)");
  st.bind(1, doc.info.doc_id)
      .bind(2, to_string(doc.info.role))
      .bind(3, doc.info.author)
      .bind(4, to_string(doc.format))
      .bind(5, doc.content)
      .bind(6, doc.info.checksum)
      .bind(7, doc.info.segments);
  st.run();
}

void Store::insert_run(const RunRecord& run) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "INSERT INTO runs (run_id, config, query_doc, source_doc, state, created_at, updated_at)"
               " VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7)");
  st.bind(1, run.run_id)
      .bind(2, run.config.to_json().dump())
      .bind(3, run.query_doc)
      .bind(4, run.source_doc)
      .bind(5, to_string(run.state))
      .bind(6, run.created_at)
      .bind(7, run.updated_at);
  st.run();
}

std::optional<RunRecord> Store::find_run(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, (std::string("SELECT ") + kRunColumns + " FROM runs WHERE run_id = ?1").c_str());
  st.bind(1, run_id);
  if (!st.step()) return std::nullopt;
  return read_run(st);
}

std::vector<RunRecord> Store::runs() const {
  std::lock_guard lock(mutex_);
  Statement st(db_, (std::string("SELECT ") + kRunColumns + " FROM runs ORDER BY rowid").c_str());
  std::vector<RunRecord> out;
  while (st.step()) out.push_back(read_run(st));
  return out;
}

std::vector<std::string> Store::runs_in_state(RunState state) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT run_id FROM runs WHERE state = ?1 ORDER BY rowid");
  st.bind(1, to_string(state));
  std::vector<std::string> out;
  while (st.step()) out.push_back(st.text(0));
  return out;
}

void Store::set_state(const std::string& run_id, RunState state, const std::string& error) {
  std::lock_guard lock(mutex_);
  Statement st(db_, "UPDATE runs SET state = ?2, error = ?3, updated_at = ?4 WHERE run_id = ?1");
  st.bind(1, run_id).bind(2, to_string(state)).bind(3, error).bind(4, utc_timestamp());
  st.run();
}

void Store::complete_run(const std::string& run_id, const std::vector<CandidateMatch>& matches,
                         const std::vector<std::string>& warnings) {
  std::lock_guard lock(mutex_);
  exec(db_, "BEGIN IMMEDIATE");
  try {
    Statement del(db_, "DELETE FROM matches WHERE run_id = ?1");
    del.bind(1, run_id);
    del.run();
    Statement ins(db_,
                  "INSERT INTO matches (run_id, query_seg_id, source_seg_id, query_ordinal, source_ordinal, rank,"
                  " similarity, probability, label, origin, shared_tokens)"
                  " VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)");
    for (const auto& m : matches) {
      ins.reset();
      ins.bind(1, run_id)
          .bind(2, m.query_seg_id)
          .bind(3, m.source_seg_id)
          .bind(4, m.query_ordinal)
          .bind(5, m.source_ordinal)
          .bind(6, m.rank)
          .bind(7, m.similarity)
          .bind(8, m.probability)
          .bind(9, to_string(m.label))
          .bind(10, to_string(m.origin))
          .bind(11, json(m.shared_tokens).dump());
      ins.run();
    }
    Statement upd(db_,
                  "UPDATE runs SET state = 'done', updated_at = ?2, warnings = ?3, match_count = ?4, error = ''"
                  " WHERE run_id = ?1");
    upd.bind(1, run_id).bind(2, utc_timestamp()).bind(3, json(warnings).dump()).bind(4, matches.size());
    upd.run();
    exec(db_, "COMMIT");
  } catch (...) {
    exec(db_, "ROLLBACK");
    throw;
  }
}

std::size_t Store::count_matches(const std::string& run_id, const ResultFilter& filter) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, (std::string("SELECT COUNT(*) FROM matches m") + kMatchFilter).c_str());
  bind_filter(st, run_id, filter);
  st.step();
  return static_cast<std::size_t>(st.integer(0));
}

std::vector<ResultItem> Store::matches(const std::string& run_id, const ResultFilter& filter, std::size_t offset,
                                       std::size_t limit) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, (std::string(kMatchSelect) + kMatchFilter +
                     " ORDER BY m.query_ordinal, m.rank, m.source_ordinal LIMIT ?5 OFFSET ?6")
                        .c_str());
  bind_filter(st, run_id, filter);
  st.bind(5, limit == 0 ? std::int64_t{-1} : static_cast<std::int64_t>(limit)).bind(6, offset);
  std::vector<ResultItem> out;
  while (st.step()) out.push_back(read_item(st, run_id));
  return out;
}

bool Store::has_match(const MatchKey& key) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, "SELECT 1 FROM matches WHERE run_id = ?1 AND query_seg_id = ?2 AND source_seg_id = ?3");
  st.bind(1, key.run_id).bind(2, key.query_seg_id).bind(3, key.source_seg_id);
  return st.step();
}

ReviewDecision Store::upsert_decision(const ReviewDecision& d) {
  std::lock_guard lock(mutex_);
  Statement st(db_,
               "INSERT INTO decisions (run_id, query_seg_id, source_seg_id, verdict, reviewer, decided_at)"
               " VALUES (?1, ?2, ?3, ?4, ?5, ?6)"
               " ON CONFLICT (run_id, query_seg_id, source_seg_id) DO UPDATE SET"
               " verdict = excluded.verdict, reviewer = excluded.reviewer, decided_at = excluded.decided_at");
  st.bind(1, d.key.run_id)
      .bind(2, d.key.query_seg_id)
      .bind(3, d.key.source_seg_id)
      .bind(4, to_string(d.verdict))
      .bind(5, d.reviewer)
      .bind(6, d.decided_at);
  st.run();
  return d;
}

std::vector<ResultItem> Store::confirmed(const std::string& run_id) const {
  std::lock_guard lock(mutex_);
  Statement st(db_, (std::string(kMatchSelect) +
                     " WHERE m.run_id = ?1 AND d.verdict = 'confirmed'"
                     " ORDER BY m.query_ordinal, m.rank, m.source_ordinal")
                        .c_str());
  st.bind(1, run_id);
  std::vector<ResultItem> out;
  while (st.step()) out.push_back(read_item(st, run_id));
  return out;
}

}  // namespace intertext
