#include <gtest/gtest.h>

#include <functional>

#include <set>
#include <thread>

#include <intertext/error.hpp>
#include <intertext/service.hpp>
#include <intertext/synthetic.hpp>

#include "oracles.hpp"

using namespace intertext;
using namespace std::chrono_literals;
using testing_support::TempDir;

namespace {

struct Fixture {
  SyntheticCorpus corpus;
  std::string query_csv;
  std::string source_csv;

  Fixture() {
    SyntheticSpec spec;
    spec.query_segments = 12;
    spec.source_segments = 20;
    spec.links = 6;
    spec.seed = 31;
    corpus = make_synthetic_corpus(spec);
    query_csv = format_document(corpus.query, FileFormat::csv);
    source_csv = format_document(corpus.source, FileFormat::csv);
  }

  void upload(Service& svc) const {
    svc.put_document(query_csv, FileFormat::csv, {Role::query, "hier", "Jerome"});
    svc.put_document(source_csv, FileFormat::csv, {Role::source, "lact", "Lactantius"});
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

RunConfig rerank_config(std::size_t k = 5) {
  RunConfig cfg;
  cfg.k = k;
  cfg.threshold = 0.1;
  return cfg;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an intertext::Error";
  return ErrorCode::io;
}

}  // namespace

TEST(Service, DocumentsAreStoredWithChecksums) {
  TempDir dir;
  Service svc({dir / "db.sqlite", false});
  const auto info = svc.put_document(fixture().query_csv, FileFormat::csv, {Role::query, "hier", "Jerome"});
  EXPECT_EQ(info.segments, 12u);
  EXPECT_EQ(info.checksum, fixture().corpus.query.checksum());
  EXPECT_EQ(svc.get_document("hier").author, "Jerome");
  EXPECT_NO_THROW(svc.put_document(fixture().query_csv, FileFormat::csv, {Role::query, "hier", "Jerome"}));
  EXPECT_EQ(code_of([&] { svc.put_document("id,text\n1,other\n", FileFormat::csv, {Role::query, "hier", ""}); }),
            ErrorCode::conflict);
  EXPECT_EQ(code_of([&] { svc.get_document("nope"); }), ErrorCode::not_found);
  EXPECT_EQ(code_of([&] { svc.put_document("id,body\n1,x\n", FileFormat::csv, {Role::query, "bad", ""}); }),
            ErrorCode::schema);
}

TEST(Service, RunMatchesTheLibraryPipeline) {
  TempDir dir;
  Service svc({dir / "db.sqlite", true});
  fixture().upload(svc);
  const auto id = svc.submit_run(rerank_config(), "hier", "lact");
  const auto run = svc.wait_for(id, 30s);
  ASSERT_EQ(run.state, RunState::done) << run.error;
  const auto expected = run_pipeline(rerank_config(), fixture().corpus.query, fixture().corpus.source);
  EXPECT_EQ(svc.all_matches(id), expected.matches);
  EXPECT_EQ(run.match_count, expected.matches.size());
  EXPECT_EQ(format_matches(svc.all_matches(id), OutputFormat::csv), format_matches(expected.matches, OutputFormat::csv));
}

TEST(Service, SubmitValidatesEagerly) {
  TempDir dir;
  Service svc({dir / "db.sqlite", false});
  fixture().upload(svc);
  try {
    svc.submit_run(nlohmann::json{{"k", 0}, {"threshold", 1.5}}, "hier", "missing");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::validation);
    std::set<std::string> fields;
    for (const auto& f : e.fields()) fields.insert(f.field);
    EXPECT_TRUE(fields.contains("k"));
    EXPECT_TRUE(fields.contains("threshold"));
    EXPECT_TRUE(fields.contains("source_doc"));
  }
  EXPECT_TRUE(svc.list_runs().empty());
}

TEST(Service, ResultsBeforeCompletionAreAConflict) {
  TempDir dir;
  Service svc({dir / "db.sqlite", false});
  fixture().upload(svc);
  const auto id = svc.submit_run(rerank_config(), "hier", "lact");
  EXPECT_EQ(svc.get_run(id).state, RunState::pending);
  EXPECT_EQ(code_of([&] { svc.get_results(id, 1, 10); }), ErrorCode::conflict);
  EXPECT_EQ(code_of([&] { svc.get_results("run-unknown", 1, 10); }), ErrorCode::not_found);
}

TEST(Service, PendingRunsSurviveARestart) {
  TempDir dir;
  std::string id;
  {
    Service svc({dir / "db.sqlite", false});
    fixture().upload(svc);
    id = svc.submit_run(rerank_config(), "hier", "lact");
  }
  Service svc({dir / "db.sqlite", true});
  EXPECT_EQ(svc.wait_for(id, 30s).state, RunState::done);
  EXPECT_EQ(svc.get_document("lact").segments, 20u);
}

TEST(Service, FailedRunKeepsTheMessage) {
  TempDir dir;
  Service svc({dir / "db.sqlite", true});
  fixture().upload(svc);
  auto cfg = rerank_config();
  cfg.embedder = "file:/nonexistent/vectors.jsonl";
  const auto run = svc.wait_for(svc.submit_run(cfg, "hier", "lact"), 30s);
  EXPECT_EQ(run.state, RunState::failed);
  EXPECT_FALSE(run.error.empty());
}

class ServiceResults : public ::testing::Test {
 protected:
  void SetUp() override {
    svc = std::make_unique<Service>(ServiceOptions{dir / "db.sqlite", true});
    fixture().upload(*svc);
    run_id = svc->submit_run(rerank_config(5), "hier", "lact");
    ASSERT_EQ(svc->wait_for(run_id, 30s).state, RunState::done);
  }

  TempDir dir;
  std::unique_ptr<Service> svc;
  std::string run_id;
};

TEST_F(ServiceResults, Pagination) {
  const auto first = svc->get_results(run_id, 1, 7);
  EXPECT_EQ(first.total, 60u);
  EXPECT_EQ(first.pages, 9u);
  EXPECT_EQ(first.items.size(), 7u);
  const auto last = svc->get_results(run_id, 9, 7);
  EXPECT_EQ(last.items.size(), 4u);
  EXPECT_TRUE(svc->get_results(run_id, 10, 7).items.empty());
  EXPECT_EQ(code_of([&] { svc->get_results(run_id, 0, 7); }), ErrorCode::validation);

  std::vector<CandidateMatch> paged;
  for (std::size_t p = 1; p <= 9; ++p) {
    for (const auto& item : svc->get_results(run_id, p, 7).items) paged.push_back(item.match);
  }
  EXPECT_EQ(paged, svc->all_matches(run_id));
}

TEST_F(ServiceResults, FiveItemsInPagesOfTwo) {
  ResultFilter f;
  f.query_seg_id = fixture().corpus.query[0].id;
  const auto page = svc->get_results(run_id, 1, 2, f);
  EXPECT_EQ(page.total, 5u);
  EXPECT_EQ(page.pages, 3u);
  EXPECT_EQ(svc->get_results(run_id, 3, 2, f).items.size(), 1u);
}

TEST_F(ServiceResults, Filters) {
  ResultFilter impossible;
  impossible.min_prob = 1.1;
  EXPECT_EQ(svc->get_results(run_id, 1, 50, impossible).total, 0u);

  ResultFilter refs;
  refs.label = Label::reference;
  const auto page = svc->get_results(run_id, 1, 100, refs);
  for (const auto& item : page.items) EXPECT_EQ(item.match.label, Label::reference);

  ResultFilter strong;
  strong.min_prob = 0.3;
  for (const auto& item : svc->get_results(run_id, 1, 100, strong).items) EXPECT_GE(*item.match.probability, 0.3);
}

TEST_F(ServiceResults, DecisionsUpsertAndPersist) {
  const auto matches = svc->all_matches(run_id);
  const MatchKey key{run_id, matches[0].query_seg_id, matches[0].source_seg_id};
  svc->record_decision(key, Verdict::rejected, "ana");
  const auto d = svc->record_decision(key, Verdict::confirmed, "ben");
  EXPECT_EQ(d.verdict, Verdict::confirmed);
  EXPECT_EQ(d.reviewer, "ben");
  EXPECT_FALSE(d.decided_at.empty());
  EXPECT_EQ(code_of([&] { svc->record_decision({run_id, "nope", "nope"}, Verdict::confirmed, "x"); }),
            ErrorCode::not_found);

  svc.reset();
  Service reopened({dir / "db.sqlite", false});
  const auto first = reopened.get_results(run_id, 1, 1).items.at(0);
  EXPECT_EQ(first.decision.verdict, Verdict::confirmed);
  EXPECT_EQ(first.decision.reviewer, "ben");
  EXPECT_EQ(reopened.get_results(run_id, 2, 1).items.at(0).decision.verdict, Verdict::undecided);
}

TEST_F(ServiceResults, ConcurrentDecisionsAreAllRecorded) {
  const auto matches = svc->all_matches(run_id);
  std::vector<std::thread> threads;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&, t] {
      for (std::size_t i = static_cast<std::size_t>(t); i < 40; i += 4) {
        svc->record_decision({run_id, matches[i].query_seg_id, matches[i].source_seg_id},
                             i % 2 ? Verdict::rejected : Verdict::confirmed, "r" + std::to_string(t));
      }
    });
  }
  for (auto& t : threads) t.join();
  const auto page = svc->get_results(run_id, 1, 40);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(page.items[i].decision.verdict, i % 2 ? Verdict::rejected : Verdict::confirmed) << i;
  }
}

TEST_F(ServiceResults, ExportRoundTripsThroughLoadLinks) {
  const auto matches = svc->all_matches(run_id);
  svc->record_decision({run_id, matches[3].query_seg_id, matches[3].source_seg_id}, Verdict::confirmed, "ana");
  svc->record_decision({run_id, matches[8].query_seg_id, matches[8].source_seg_id}, Verdict::confirmed, "ana");
  svc->record_decision({run_id, matches[9].query_seg_id, matches[9].source_seg_id}, Verdict::rejected, "ana");
  for (auto format : {FileFormat::csv, FileFormat::jsonl}) {
    const auto content = svc->export_confirmed(run_id, format);
    const auto links = parse_links(content, format, &fixture().corpus.query, &fixture().corpus.source);
    ASSERT_EQ(links.size(), 2u);
    EXPECT_EQ(links[0].query_seg_id, matches[3].query_seg_id);
    EXPECT_EQ(links[1].source_seg_id, matches[8].source_seg_id);
    EXPECT_NE(links[0].provenance.find(run_id), std::string::npos);
  }
}

TEST_F(ServiceResults, NothingConfirmedExportsAHeader) {
  const auto content = svc->export_confirmed(run_id, FileFormat::csv);
  EXPECT_TRUE(parse_links(content, FileFormat::csv).empty());
  EXPECT_EQ(std::count(content.begin(), content.end(), '\n'), 1);
}

TEST(ServiceJson, RunAndPageShapes) {
  RunRecord run;
  run.run_id = "run-1";
  run.state = RunState::done;
  const auto j = to_json(run);
  EXPECT_EQ(j["run_id"], "run-1");
  EXPECT_EQ(j["state"], "done");
  EXPECT_TRUE(j.contains("config"));
  ResultPage page;
  page.total = 3;
  EXPECT_EQ(to_json(page)["total"], 3);
  EXPECT_EQ(parse_verdict("confirmed"), Verdict::confirmed);
  EXPECT_THROW(parse_verdict("perhaps"), Error);
}
