#include <gtest/gtest.h>

#include <chrono>
#include <set>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "kgqa/el_backends.hpp"

using namespace kgqa;
using namespace std::chrono_literals;

namespace {

const std::string kCurieQuestion =
    "How many PhD students of Marie Curie were nominated for the Nobel Prize in Chemistry?";

ElSystemConfig fixture_config(const std::string& name, TargetKb kb) {
  ElSystemConfig c;
  c.system_id = name;
  c.endpoint = std::string(KGQA_SAMPLES_DIR) + "/curie/el/" + name + ".json";
  c.target_kb = kb;
  c.timeout = 2000ms;
  return c;
}

std::vector<ElSystemConfig> curie_configs() {
  return {fixture_config("aida", TargetKb::kWikipedia), fixture_config("spotlight", TargetKb::kDbpedia),
          fixture_config("opentapioca", TargetKb::kWikidata), fixture_config("tagme", TargetKb::kWikipedia)};
}

// Backend answering with fixed candidates after a delay, or throwing.
class ScriptedBackend : public ElBackend {
 public:
  ScriptedBackend(std::vector<EntityCandidate> out, std::chrono::milliseconds delay, bool fail = false)
      : out_(std::move(out)), delay_(delay), fail_(fail) {}
  std::vector<EntityCandidate> link(const std::string&) override {
    std::this_thread::sleep_for(delay_);
    if (fail_) throw Error(ErrorCode::kIoError, "scripted failure");
    return out_;
  }

 private:
  std::vector<EntityCandidate> out_;
  std::chrono::milliseconds delay_;
  bool fail_;
};

ElSystemConfig plain(const std::string& id, std::chrono::milliseconds timeout = 1000ms) {
  ElSystemConfig c;
  c.system_id = id;
  c.timeout = timeout;
  return c;
}

EntityCandidate one(const std::string& system) {
  EntityCandidate c;
  c.system_id = system;
  c.mention = "Marie Curie";
  c.span = {25, 36};
  c.kb_id = "Q7186";
  c.score = 1.0;
  return c;
}

}  // namespace

TEST(ParseLinks, DropsInvalidSpansAndScores) {
  std::string q = "Who was Marie Curie?";
  json resp = json::parse(R"({"links": [
    {"mention": "Marie Curie", "start": 8, "end": 19, "id": "Q7186", "score": 0.9},
    {"mention": "x", "start": 15, "end": 99, "id": "Q1", "score": 0.9},
    {"mention": "x", "start": 5, "end": 2, "id": "Q1", "score": 0.9},
    {"start": 0, "end": 3, "id": "Q2", "score": 0.5, "kb": "dbpedia"}
  ]})");
  auto out = parse_links_response(resp, q, plain("s"));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].kb_id, "Q7186");
  EXPECT_EQ(out[1].mention, "Who");
  EXPECT_EQ(out[1].kb, TargetKb::kDbpedia);
  EXPECT_THROW(parse_links_response(json::object(), q, plain("s")), Error);
}

TEST(LinkAll, CurieFixturesCoverAllFourEntities) {
  LinkResult r = link_all(kCurieQuestion, curie_configs());
  ASSERT_EQ(r.per_system.size(), 4u);
  SameAsStore mapping = SameAsStore::load(std::string(KGQA_SAMPLES_DIR) + "/curie/sameas.tsv");
  std::set<std::string> covered;
  for (const auto& s : map_all_to_wikidata(r.per_system, mapping)) {
    EXPECT_FALSE(s.candidates.empty()) << s.system_id;
    for (const auto& c : s.candidates) covered.insert(c.kb_id);
  }
  EXPECT_EQ(covered, (std::set<std::string>{"Q7186", "Q44585", "Q7191", "Q12764792"}));
}

TEST(LinkAll, QuestionWithoutMentionsGivesEmptyLists) {
  LinkResult r = link_all("Nothing to see here", curie_configs());
  for (const auto& s : r.per_system) EXPECT_TRUE(s.candidates.empty());
  EXPECT_FALSE(r.all_failed());
}

TEST(LinkAll, TimeoutLeavesOneListEmptyAndLogs) {
  std::vector<ElSystemConfig> configs = {plain("a"), plain("b"), plain("c"), plain("slow", 50ms)};
  std::vector<std::shared_ptr<ElBackend>> backends = {
      std::make_shared<ScriptedBackend>(std::vector{one("a")}, 0ms),
      std::make_shared<ScriptedBackend>(std::vector{one("b")}, 0ms),
      std::make_shared<ScriptedBackend>(std::vector{one("c")}, 0ms),
      std::make_shared<ScriptedBackend>(std::vector{one("slow")}, 2000ms)};
  std::ostringstream log;
  auto start = std::chrono::steady_clock::now();
  LinkResult r = link_all(kCurieQuestion, configs, backends, &log);
  EXPECT_LT(std::chrono::steady_clock::now() - start, 1500ms);
  ASSERT_EQ(r.per_system.size(), 4u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(r.per_system[i].candidates.size(), 1u);
  EXPECT_TRUE(r.per_system[3].candidates.empty());
  EXPECT_NE(r.calls[3].error.find("timeout"), std::string::npos);

  std::istringstream lines(log.str());
  int n = 0;
  for (std::string line; std::getline(lines, line); ++n) {
    json j = json::parse(line);
    EXPECT_TRUE(j.contains("system_id") && j.contains("latency_ms") && j.contains("candidates") && j.contains("error"));
  }
  EXPECT_EQ(n, 4);
}

TEST(LinkAll, FailureOfOneBackendIsContained) {
  std::vector<ElSystemConfig> configs = {plain("a"), plain("broken")};
  std::vector<std::shared_ptr<ElBackend>> backends = {
      std::make_shared<ScriptedBackend>(std::vector{one("a")}, 0ms),
      std::make_shared<ScriptedBackend>(std::vector<EntityCandidate>{}, 0ms, true)};
  LinkResult r = link_all(kCurieQuestion, configs, backends);
  EXPECT_EQ(r.per_system[0].candidates.size(), 1u);
  EXPECT_TRUE(r.per_system[1].candidates.empty());
  EXPECT_FALSE(r.calls[1].error.empty());
}

TEST(LinkAll, EveryBackendFailing) {
  std::vector<ElSystemConfig> configs = {plain("x"), plain("y", 30ms)};
  std::vector<std::shared_ptr<ElBackend>> backends = {
      std::make_shared<ScriptedBackend>(std::vector<EntityCandidate>{}, 0ms, true),
      std::make_shared<ScriptedBackend>(std::vector{one("y")}, 1000ms)};
  try {
    link_all(kCurieQuestion, configs, backends);
    FAIL();
  } catch (const AllSystemsFailed& e) {
    EXPECT_EQ(e.code(), ErrorCode::kAllSystemsFailed);
    EXPECT_EQ(e.result().calls.size(), 2u);
  }
  ElEnsemble ensemble(configs, backends, SameAsStore{});
  EXPECT_TRUE(ensemble.link(kCurieQuestion).empty());
}

TEST(LinkAll, FixtureFailFlag) {
  auto dir = std::filesystem::temp_directory_path() / "kgqa_el_fail";
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "down.json") << R"({"fail": true})";
  ElSystemConfig c = plain("down");
  c.endpoint = (dir / "down.json").string();
  EXPECT_THROW(link_all(kCurieQuestion, {c}), AllSystemsFailed);
}

TEST(Ensemble, CurieRankedEntities) {
  ElEnsemble ensemble(curie_configs(), SameAsStore::load(std::string(KGQA_SAMPLES_DIR) + "/curie/sameas.tsv"));
  RankedEntityList r = ensemble.link(kCurieQuestion);
  ASSERT_EQ(r.size(), 4u);
  EXPECT_EQ(r[0].wikidata_id, "Q7186");
  EXPECT_EQ(r[0].votes, 4);
  EXPECT_EQ(r[1].wikidata_id, "Q44585");
  EXPECT_EQ(r[1].mention, "Nobel Prize in Chemistry");
  EXPECT_EQ(r[2].wikidata_id, "Q7191");
  EXPECT_EQ(r[3].wikidata_id, "Q12764792");
  EXPECT_EQ(json(r[0]).at("id"), "wd:Q7186");
}

TEST(HttpBackend, PostsContractRequest) {
  httplib::Server server;
  std::string received;
  server.Post("/link", [&](const httplib::Request& req, httplib::Response& res) {
    received = req.body;
    res.set_content(R"({"links":[{"mention":"Marie Curie","start":8,"end":19,"id":"Marie_Curie","kb":"dbpedia","score":0.7}]})",
                    "application/json");
  });
  server.Post("/broken", [](const httplib::Request&, httplib::Response& res) { res.status = 503; });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread t([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  ElSystemConfig c = plain("spotlight");
  c.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/link";
  c.target_kb = TargetKb::kDbpedia;
  auto backend = make_backend(c);
  auto out = backend->link("Who was Marie Curie?");
  EXPECT_EQ(json::parse(received), (json{{"question", "Who was Marie Curie?"}}));
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].kb, TargetKb::kDbpedia);
  EXPECT_EQ(out[0].kb_id, "Marie_Curie");

  ElSystemConfig broken = c;
  broken.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/broken";
  EXPECT_THROW(make_backend(broken)->link("q"), Error);

  server.stop();
  t.join();
}
