#include <gtest/gtest.h>

#include <chrono>
#include <thread>

#include <httplib.h>

#include "kgqa/kb_client.hpp"

using namespace kgqa;
using namespace std::chrono_literals;

namespace {

const std::string kCurieQuery =
    "SELECT (COUNT(*) AS ?ans) WHERE { ?subj wdt:P1411 wd:Q44585 . ?subj wdt:P184 wd:Q7186 . }";

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

// Counts calls and returns a fixed answer.
class CountingEndpoint : public SparqlEndpoint {
 public:
  explicit CountingEndpoint(EndpointResult r, bool remote = false) : r_(std::move(r)), remote_(remote) {}
  EndpointResult run(const std::string&) override {
    ++calls;
    return r_;
  }
  bool remote() const override { return remote_; }
  int calls = 0;

 private:
  EndpointResult r_;
  bool remote_;
};

// SPARQL protocol mock: /sparql answers, /reject gives 400, /down gives 503.
class MockServer {
 public:
  MockServer() {
    server_.Post("/sparql", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits;
      last_query = req.get_param_value("query");
      if (last_query.find("ASK") != std::string::npos) {
        res.set_content(R"({"head":{},"boolean":true})", "application/sparql-results+json");
        return;
      }
      res.set_content(R"({"head":{"vars":["x"]},"results":{"bindings":[
        {"x":{"type":"uri","value":"http://www.wikidata.org/entity/Q1"}},
        {"x":{"type":"literal","value":"Paris","xml:lang":"en"}},
        {"x":{"type":"literal","value":"3","datatype":"http://www.w3.org/2001/XMLSchema#integer"}}]}})",
                      "application/sparql-results+json");
    });
    server_.Post("/reject", [this](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.status = 400;
    });
    server_.Post("/down", [this](const httplib::Request&, httplib::Response& res) {
      ++hits;
      res.status = 503;
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockServer() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

  std::atomic<int> hits{0};
  std::string last_query;

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

KbClientOptions fast(std::optional<std::filesystem::path> cache = std::nullopt) {
  KbClientOptions o;
  o.timeout = 2000ms;
  o.min_request_interval = 0ms;
  o.cache_dir = std::move(cache);
  return o;
}

}  // namespace

TEST(Sha256, KnownDigest) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(KbClient, CurieFixtureCount) {
  KbClient kb(std::string(KGQA_SAMPLES_DIR) + "/curie/kb.nt", fast());
  auto a = kb.execute(kCurieQuery);
  ASSERT_TRUE(a.has_results());
  EXPECT_EQ(a.rows->begin()->at("ans"), "\"2\"^^<http://www.w3.org/2001/XMLSchema#integer>");
}

TEST(KbClient, EmptyAskIsTrue) {
  KbClient kb(std::string(KGQA_SAMPLES_DIR) + "/curie/kb.nt", fast());
  EXPECT_EQ(kb.execute("ASK {}"), AnswerSet::of_boolean(true));
}

TEST(KbClient, UnfilledPlaceholderNeverReachesBackend) {
  auto* backend = new CountingEndpoint({AnswerSet::of_boolean(true), true});
  KbClient kb("mock", std::unique_ptr<SparqlEndpoint>(backend), fast());
  auto a = kb.execute("ASK { wd:Q1 wdt:P31 <obj2> }");
  EXPECT_TRUE(a.is_error());
  EXPECT_EQ(backend->calls, 0);
  EXPECT_TRUE(kb.execute("ASK { wd:Q1 wdt:P31 ").is_error());
  EXPECT_EQ(backend->calls, 0);
}

TEST(KbClient, CacheHitSkipsBackend) {
  auto dir = fresh_dir("kgqa_cache_hit");
  auto* backend = new CountingEndpoint({AnswerSet::of_boolean(true), true});
  KbClient kb("mock", std::unique_ptr<SparqlEndpoint>(backend), fast(dir));
  EXPECT_EQ(kb.execute("ASK { wd:Q1 wdt:P31 wd:Q5 }"), AnswerSet::of_boolean(true));
  // Same query after normalization.
  EXPECT_EQ(kb.execute("ask {wd:Q1   wdt:P31 wd:Q5}"), AnswerSet::of_boolean(true));
  EXPECT_EQ(backend->calls, 1);

  // A second client over the same directory also hits.
  auto* other = new CountingEndpoint({AnswerSet::of_boolean(false), true});
  KbClient kb2("mock", std::unique_ptr<SparqlEndpoint>(other), fast(dir));
  EXPECT_EQ(kb2.execute("ASK { wd:Q1 wdt:P31 wd:Q5 }"), AnswerSet::of_boolean(true));
  EXPECT_EQ(other->calls, 0);

  std::size_t files = 0;
  for (const auto& f : std::filesystem::directory_iterator(dir)) {
    EXPECT_EQ(f.path().extension(), ".json");
    ++files;
  }
  EXPECT_EQ(files, 1u);
}

TEST(KbClient, CacheIsKeyedByEndpoint) {
  auto dir = fresh_dir("kgqa_cache_endpoint");
  KbClient a("one", std::make_unique<CountingEndpoint>(EndpointResult{AnswerSet::of_boolean(true), true}), fast(dir));
  KbClient b("two", std::make_unique<CountingEndpoint>(EndpointResult{AnswerSet::of_boolean(false), true}), fast(dir));
  EXPECT_EQ(a.execute("ASK {}"), AnswerSet::of_boolean(true));
  EXPECT_EQ(b.execute("ASK {}"), AnswerSet::of_boolean(false));
}

TEST(KbClient, CorruptEntryIsAMiss) {
  auto dir = fresh_dir("kgqa_cache_corrupt");
  auto* backend = new CountingEndpoint({AnswerSet::of_boolean(true), true});
  KbClient kb("mock", std::unique_ptr<SparqlEndpoint>(backend), fast(dir));
  std::string key = AnswerCache::key("mock", "ASK {}");
  std::filesystem::create_directories(dir);
  std::ofstream(dir / (key + ".json")) << "{ not json";
  EXPECT_EQ(kb.execute("ASK {}"), AnswerSet::of_boolean(true));
  EXPECT_EQ(backend->calls, 1);
  EXPECT_EQ(kb.execute("ASK {}"), AnswerSet::of_boolean(true));
  EXPECT_EQ(backend->calls, 1);
}

TEST(KbClient, TransientErrorsAreNotCached) {
  auto dir = fresh_dir("kgqa_cache_transient");
  auto* backend = new CountingEndpoint({AnswerSet::of_error("HTTP 503"), false});
  KbClient kb("mock", std::unique_ptr<SparqlEndpoint>(backend), fast(dir));
  EXPECT_TRUE(kb.execute("ASK {}").is_error());
  EXPECT_TRUE(kb.execute("ASK {}").is_error());
  EXPECT_EQ(backend->calls, 2);
}

TEST(KbClient, OfflineModeServesCacheOnly) {
  auto dir = fresh_dir("kgqa_cache_offline");
  {
    KbClient warm("remote", std::make_unique<CountingEndpoint>(EndpointResult{AnswerSet::of_boolean(true), true}, true),
                  fast(dir));
    warm.execute("ASK {}");
  }
  auto opts = fast(dir);
  opts.offline = true;
  auto* backend = new CountingEndpoint({AnswerSet::of_boolean(false), true}, true);
  KbClient kb("remote", std::unique_ptr<SparqlEndpoint>(backend), opts);
  EXPECT_EQ(kb.execute("ASK {}"), AnswerSet::of_boolean(true));
  EXPECT_TRUE(kb.execute("ASK { wd:Q1 ?p ?o }").is_error());
  EXPECT_EQ(backend->calls, 0);
}

TEST(KbClient, ConcurrentWritersLeaveReadableEntries) {
  auto dir = fresh_dir("kgqa_cache_concurrent");
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&] {
      KbClient kb("mock", std::make_unique<CountingEndpoint>(EndpointResult{AnswerSet::of_boolean(true), true}),
                  fast(dir));
      for (int i = 0; i < 20; ++i) kb.execute("ASK { wd:Q" + std::to_string(i) + " ?p ?o }");
    });
  }
  for (auto& t : threads) t.join();
  AnswerCache cache(dir);
  for (int i = 0; i < 20; ++i)
    EXPECT_TRUE(cache.lookup(AnswerCache::key("mock", "ASK { wd:Q" + std::to_string(i) + " ?p ?o }")));
  for (const auto& f : std::filesystem::directory_iterator(dir)) EXPECT_EQ(f.path().extension(), ".json");
}

TEST(HttpEndpoint, ParsesSparqlJsonResults) {
  MockServer server;
  KbClient kb(server.url("/sparql"), fast());
  auto a = kb.execute("SELECT ?x WHERE { ?x ?p ?o }");
  ASSERT_EQ(a.kind, AnswerKind::kBindings);
  std::set<std::string> xs;
  for (const auto& r : *a.rows) xs.insert(r.at("x"));
  EXPECT_EQ(xs, (std::set<std::string>{"<http://www.wikidata.org/entity/Q1>", "\"Paris\"@en",
                                       "\"3\"^^<http://www.w3.org/2001/XMLSchema#integer>"}));
  EXPECT_EQ(server.last_query, "SELECT ?x WHERE { ?x ?p ?o }");
  EXPECT_EQ(kb.execute("ASK {}"), AnswerSet::of_boolean(true));
}

TEST(HttpEndpoint, ClientErrorsCachedServerErrorsNot) {
  MockServer server;
  auto dir = fresh_dir("kgqa_cache_http");
  KbClient reject(server.url("/reject"), fast(dir));
  EXPECT_TRUE(reject.execute("ASK {}").is_error());
  EXPECT_TRUE(reject.execute("ASK {}").is_error());
  EXPECT_EQ(server.hits.load(), 1);

  KbClient down(server.url("/down"), fast(dir));
  EXPECT_TRUE(down.execute("ASK {}").is_error());
  EXPECT_TRUE(down.execute("ASK {}").is_error());
  EXPECT_EQ(server.hits.load(), 3);
}

TEST(HttpEndpoint, UnreachableHostIsAnError) {
  auto opts = fast();
  opts.timeout = 200ms;
  KbClient kb("http://127.0.0.1:1/sparql", opts);
  EXPECT_TRUE(kb.execute("ASK {}").is_error());
}

TEST(HttpEndpoint, RequestsAreSpacedByTheRateLimit) {
  MockServer server;
  auto opts = fast();
  opts.min_request_interval = 100ms;
  KbClient kb(server.url("/sparql"), opts);
  auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 3; ++i) kb.execute("ASK { wd:Q" + std::to_string(i) + " ?p ?o }");
  EXPECT_GE(std::chrono::steady_clock::now() - start, 200ms);
  EXPECT_EQ(kb.backend_calls(), 3u);
}
