#include "intertext/service.hpp"

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <random>

#include "intertext/error.hpp"
#include "intertext/text.hpp"
#include "store.hpp"

namespace intertext {

using nlohmann::json;

std::string_view to_string(RunState state) {
  switch (state) {
    case RunState::pending: return "pending";
    case RunState::running: return "running";
    case RunState::done: return "done";
    case RunState::failed: return "failed";
  }
  return "pending";
}

RunState parse_run_state(std::string_view text) {
  for (auto s : {RunState::pending, RunState::running, RunState::done, RunState::failed}) {
    if (text == to_string(s)) return s;
  }
  throw Error(ErrorCode::validation, "unknown run state '" + std::string(text) + "'");
}

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::confirmed: return "confirmed";
    case Verdict::rejected: return "rejected";
    case Verdict::undecided: return "undecided";
  }
  return "undecided";
}

Verdict parse_verdict(std::string_view text) {
  for (auto v : {Verdict::confirmed, Verdict::rejected, Verdict::undecided}) {
    if (text == to_string(v)) return v;
  }
  throw Error(ErrorCode::validation, "unknown verdict '" + std::string(text) + "'",
              {{"verdict", "expected confirmed, rejected or undecided"}});
}

json to_json(const DocumentInfo& info) {
  return {{"doc_id", info.doc_id},
          {"role", to_string(info.role)},
          {"author", info.author},
          {"segments", info.segments},
          {"checksum", info.checksum}};
}

json to_json(const RunRecord& run) {
  json j = {{"run_id", run.run_id},           {"config", run.config.to_json()}, {"query_doc", run.query_doc},
            {"source_doc", run.source_doc},   {"state", to_string(run.state)},  {"created_at", run.created_at},
            {"updated_at", run.updated_at},   {"warnings", run.warnings},       {"match_count", run.match_count}};
  if (!run.error.empty()) j["error"] = run.error;
  return j;
}

json to_json(const ReviewDecision& d) {
  return {{"run_id", d.key.run_id},
          {"query_seg_id", d.key.query_seg_id},
          {"source_seg_id", d.key.source_seg_id},
          {"verdict", to_string(d.verdict)},
          {"reviewer", d.reviewer},
          {"decided_at", d.decided_at.empty() ? json(nullptr) : json(d.decided_at)}};
}

json to_json(const ResultPage& page) {
  json items = json::array();
  for (const auto& item : page.items) {
    auto j = to_json(item.match);
    j["verdict"] = to_string(item.decision.verdict);
    j["reviewer"] = item.decision.reviewer;
    j["decided_at"] = item.decision.decided_at.empty() ? json(nullptr) : json(item.decision.decided_at);
    items.push_back(std::move(j));
  }
  return {{"page", page.page},
          {"page_size", page.page_size},
          {"total", page.total},
          {"pages", page.pages},
          {"items", std::move(items)}};
}

Service::Service(ServiceOptions options) : store_(std::make_unique<Store>(options.database)) {
  id_salt_ = std::random_device{}();
  for (const auto& id : store_->runs_in_state(RunState::running)) {
    spdlog::warn("run {} was interrupted by a restart; marking failed", id);
    store_->set_state(id, RunState::failed, "interrupted by service restart");
  }
  for (const auto& id : store_->runs_in_state(RunState::pending)) queue_.push_back(id);
  if (options.start_worker) worker_ = std::thread([this] { worker_loop(); });
}

Service::~Service() { stop(); }

void Service::stop() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  queue_cv_.notify_all();
  state_cv_.notify_all();
  if (worker_.joinable()) worker_.join();
}

DocumentInfo Service::put_document(std::string_view content, FileFormat format, const DocumentOptions& options) {
  if (options.doc_id.empty()) {
    throw Error(ErrorCode::validation, "document id is required", {{"doc_id", "must not be empty"}});
  }
  const auto doc = parse_document(content, format, options);
  StoredDocument stored;
  stored.info = {doc.doc_id(), doc.role(), doc.author(), doc.size(), doc.checksum()};
  stored.format = format;
  stored.content = std::string(content);

  std::lock_guard lock(mutex_);
  if (const auto existing = store_->find_document(options.doc_id)) {
    if (existing->info.checksum == stored.info.checksum && existing->info.role == stored.info.role) {
      return existing->info;
    }
    throw Error(ErrorCode::conflict, "document '" + options.doc_id + "' already exists with different content",
                {{"doc_id", "already in use"}});
  }
  store_->insert_document(stored);
  return stored.info;
}

DocumentInfo Service::get_document(const std::string& doc_id) const {
  const auto doc = store_->find_document(doc_id);
  if (!doc) throw Error(ErrorCode::not_found, "unknown document '" + doc_id + "'");
  return doc->info;
}

std::string Service::new_run_id() {
  std::lock_guard lock(mutex_);
  const auto stamp = std::chrono::system_clock::now().time_since_epoch().count();
  const auto id = fnv1a64(std::to_string(stamp) + ":" + std::to_string(++id_counter_), id_salt_ ^ 0xcbf29ce484222325ULL);
  return "run-" + hex64(id);
}

std::string Service::submit_run(const RunConfig& config, const std::string& query_doc, const std::string& source_doc) {
  std::vector<FieldIssue> issues;
  try {
    config.validate();
  } catch (const Error& e) {
    issues = e.fields();
    if (issues.empty()) issues.push_back({"config", e.what()});
  }
  if (query_doc.empty() || !store_->find_document(query_doc)) issues.push_back({"query_doc", "unknown document"});
  if (source_doc.empty() || !store_->find_document(source_doc)) issues.push_back({"source_doc", "unknown document"});
  if (!issues.empty()) throw Error(ErrorCode::validation, "run submission rejected", std::move(issues));

  RunRecord run;
  run.run_id = new_run_id();
  run.config = config;
  run.query_doc = query_doc;
  run.source_doc = source_doc;
  run.state = RunState::pending;
  run.created_at = run.updated_at = utc_timestamp();
  store_->insert_run(run);
  enqueue(run.run_id);
  spdlog::info("run {} queued ({})", run.run_id, to_string(config.architecture));
  return run.run_id;
}

std::string Service::submit_run(const json& config, const std::string& query_doc, const std::string& source_doc) {
  RunConfig parsed;
  try {
    parsed = RunConfig::from_json(config);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::validation) throw;
    auto issues = e.fields();
    if (query_doc.empty() || !store_->find_document(query_doc)) issues.push_back({"query_doc", "unknown document"});
    if (source_doc.empty() || !store_->find_document(source_doc)) issues.push_back({"source_doc", "unknown document"});
    throw Error(ErrorCode::validation, "run submission rejected", std::move(issues));
  }
  return submit_run(parsed, query_doc, source_doc);
}

void Service::enqueue(const std::string& run_id) {
  {
    std::lock_guard lock(mutex_);
    queue_.push_back(run_id);
  }
  queue_cv_.notify_one();
}

RunRecord Service::get_run(const std::string& run_id) const {
  auto run = store_->find_run(run_id);
  if (!run) throw Error(ErrorCode::not_found, "unknown run '" + run_id + "'");
  return *run;
}

std::vector<RunRecord> Service::list_runs() const { return store_->runs(); }

RunRecord Service::wait_for(const std::string& run_id, std::chrono::milliseconds timeout) const {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::unique_lock lock(mutex_);
  while (true) {
    auto run = get_run(run_id);
    if (run.state == RunState::done || run.state == RunState::failed || stopping_) return run;
    if (state_cv_.wait_until(lock, deadline) == std::cv_status::timeout) return get_run(run_id);
  }
}

void Service::worker_loop() {
  while (true) {
    std::string run_id;
    {
      std::unique_lock lock(mutex_);
      queue_cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      run_id = queue_.front();
      queue_.pop_front();
    }
    execute(run_id);
    { std::lock_guard lock(mutex_); }
    state_cv_.notify_all();
  }
}

void Service::execute(const std::string& run_id) {
  const auto run = store_->find_run(run_id);
  if (!run || run->state != RunState::pending) return;
  store_->set_state(run_id, RunState::running);
  try {
    auto load = [&](const std::string& doc_id) {
      const auto stored = store_->find_document(doc_id);
      if (!stored) throw Error(ErrorCode::not_found, "document '" + doc_id + "' disappeared");
      return parse_document(stored->content, stored->format,
                            DocumentOptions{stored->info.role, stored->info.doc_id, stored->info.author});
    };
    const auto query = load(run->query_doc);
    const auto source = load(run->source_doc);
    const auto result = run_pipeline(run->config, query, source);
    store_->complete_run(run_id, result.matches, result.warnings);
    spdlog::info("run {} done: {} matches, {} to review", run_id, result.matches.size(), result.review_count());
  } catch (const std::exception& e) {
    spdlog::error("run {} failed: {}", run_id, e.what());
    store_->set_state(run_id, RunState::failed, e.what());
  }
}

namespace {

void require_done(const RunRecord& run) {
  if (run.state != RunState::done) {
    throw Error(ErrorCode::conflict, "run '" + run.run_id + "' is " + std::string(to_string(run.state)),
                {{"state", std::string(to_string(run.state))}});
  }
}

}  // namespace

ResultPage Service::get_results(const std::string& run_id, std::size_t page, std::size_t page_size,
                                const ResultFilter& filter) const {
  require_done(get_run(run_id));
  if (page == 0 || page_size == 0) {
    std::vector<FieldIssue> issues;
    if (page == 0) issues.push_back({"page", "must be >= 1"});
    if (page_size == 0) issues.push_back({"page_size", "must be >= 1"});
    throw Error(ErrorCode::validation, "invalid pagination", std::move(issues));
  }
  ResultPage out;
  out.page = page;
  out.page_size = page_size;
  out.total = store_->count_matches(run_id, filter);
  out.pages = (out.total + page_size - 1) / page_size;
  out.items = store_->matches(run_id, filter, (page - 1) * page_size, page_size);
  return out;
}

std::vector<CandidateMatch> Service::all_matches(const std::string& run_id) const {
  require_done(get_run(run_id));
  std::vector<CandidateMatch> out;
  for (auto& item : store_->matches(run_id, {}, 0, 0)) out.push_back(std::move(item.match));
  return out;
}

ReviewDecision Service::record_decision(const MatchKey& key, Verdict verdict, const std::string& reviewer) {
  require_done(get_run(key.run_id));
  if (!store_->has_match(key)) {
    throw Error(ErrorCode::not_found, "run '" + key.run_id + "' has no match (" + key.query_seg_id + ", " +
                                          key.source_seg_id + ")");
  }
  ReviewDecision d{key, verdict, reviewer, utc_timestamp()};
  return store_->upsert_decision(d);
}

std::string Service::export_confirmed(const std::string& run_id, FileFormat format) const {
  require_done(get_run(run_id));
  std::vector<LinkRecord> links;
  for (const auto& item : store_->confirmed(run_id)) {
    LinkRecord l;
    l.query_seg_id = item.match.query_seg_id;
    l.source_seg_id = item.match.source_seg_id;
    l.category = LinkCategory::unspecified;
    l.provenance = "run:" + run_id + ";reviewer:" + item.decision.reviewer;
    links.push_back(std::move(l));
  }
  return format_links(links, format);
}

}  // namespace intertext
