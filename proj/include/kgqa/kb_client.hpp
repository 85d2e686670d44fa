#pragma once

// Executes SPARQL queries against an endpoint speaking the SPARQL 1.1
// protocol (JSON results) or against a local fixture store, behind a
// content-addressed answer cache.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>
#include <unistd.h>

#include "kgqa/answer_set.hpp"
#include "kgqa/el_backends.hpp"
#include "kgqa/error.hpp"
#include "kgqa/fixture_store.hpp"
#include "kgqa/sparql.hpp"

namespace kgqa {

inline std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1)
    throw Error(ErrorCode::kIoError, "SHA-256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[md[i] >> 4]);
    out.push_back(kHex[md[i] & 0xF]);
  }
  return out;
}

// Message explaining why a query must not be sent, or nullopt if it may be.
inline std::optional<std::string> query_rejection(std::string_view query) {
  std::vector<QueryToken> tokens;
  try {
    tokens = tokenize(query);
  } catch (const Error& e) {
    return std::string(e.what());
  }
  if (tokens.empty()) return std::string("empty query");
  for (const auto& t : tokens) {
    if (t.kind == TokenKind::kPlaceholder) return "unfilled placeholder " + t.text;
  }
  return std::nullopt;
}

inline std::string rdf_term_from_json(const nlohmann::json& b) {
  std::string type = b.value("type", "");
  std::string value = b.value("value", "");
  if (type == "uri") return "<" + value + ">";
  if (type == "bnode") return "_:" + value;
  std::string out = "\"" + value + "\"";
  if (b.contains("xml:lang")) {
    out += "@" + b["xml:lang"].get<std::string>();
  } else if (b.contains("datatype")) {
    out += "^^<" + b["datatype"].get<std::string>() + ">";
  }
  return out;
}

// SPARQL 1.1 query results JSON -> AnswerSet, rows projected to head.vars.
inline AnswerSet parse_sparql_results(const nlohmann::json& body) {
  if (body.contains("boolean")) return AnswerSet::of_boolean(body["boolean"].get<bool>());
  if (!body.contains("results")) return AnswerSet::of_error("malformed SPARQL results");
  std::vector<std::string> vars;
  if (body.contains("head") && body["head"].contains("vars"))
    vars = body["head"]["vars"].get<std::vector<std::string>>();
  std::set<BindingRow> rows;
  for (const auto& b : body["results"].value("bindings", nlohmann::json::array())) {
    BindingRow row;
    for (const auto& v : vars) {
      if (b.contains(v)) row[v] = rdf_term_from_json(b[v]);
    }
    rows.insert(std::move(row));
  }
  return AnswerSet::of_rows(std::move(rows));
}

struct EndpointResult {
  AnswerSet answer;
  bool cacheable = true;  // false for transient failures
};

class SparqlEndpoint {
 public:
  virtual ~SparqlEndpoint() = default;
  virtual EndpointResult run(const std::string& query) = 0;
  virtual bool remote() const { return false; }
};

class FixtureEndpoint : public SparqlEndpoint {
 public:
  explicit FixtureEndpoint(FixtureStore store) : store_(std::move(store)) {}
  EndpointResult run(const std::string& query) override { return {store_.query(query), true}; }

 private:
  FixtureStore store_;
};

class HttpSparqlEndpoint : public SparqlEndpoint {
 public:
  HttpSparqlEndpoint(std::string url, std::chrono::milliseconds timeout)
      : url_(std::move(url)), timeout_(timeout) {}

  bool remote() const override { return true; }

  EndpointResult run(const std::string& query) override {
    auto [base, path] = split_url(url_);
    httplib::Client client(base);
    auto us = std::chrono::duration_cast<std::chrono::microseconds>(timeout_).count();
    client.set_connection_timeout(0, us);
    client.set_read_timeout(0, us);
    client.set_follow_location(true);
    httplib::Headers headers = {{"Accept", "application/sparql-results+json"},
                                {"User-Agent", "kgqa/0.1 (offline evaluation harness)"}};
    httplib::Params form = {{"query", query}};
    auto res = client.Post(path, headers, form);
    if (!res) return {AnswerSet::of_error(httplib::to_string(res.error())), false};
    if (res->status != 200) {
      // 4xx means the query itself was rejected; retrying will not help.
      bool permanent = res->status >= 400 && res->status < 500 && res->status != 429;
      return {AnswerSet::of_error("HTTP " + std::to_string(res->status)), permanent};
    }
    try {
      return {parse_sparql_results(nlohmann::json::parse(res->body)), true};
    } catch (const std::exception& e) {
      return {AnswerSet::of_error(std::string("unparseable results: ") + e.what()), false};
    }
  }

 private:
  std::string url_;
  std::chrono::milliseconds timeout_;
};

// One JSON file per (endpoint, normalized query), named by the SHA-256 of
// both. Corrupt entries read as misses; writes go through a rename.
class AnswerCache {
 public:
  explicit AnswerCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }

  static std::string key(std::string_view endpoint, std::string_view query) {
    std::string canonical;
    try {
      canonical = normalize(query);
    } catch (const Error&) {
      canonical = std::string(query);
    }
    return sha256_hex(std::string(endpoint) + "\n" + canonical);
  }

  std::filesystem::path path_for(const std::string& key) const { return dir_ / (key + ".json"); }

  std::optional<AnswerSet> lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    std::ifstream in(path_for(key));
    if (!in) return std::nullopt;
    try {
      return nlohmann::json::parse(in).at("answer").get<AnswerSet>();
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }

  void store(const std::string& key, std::string_view endpoint, std::string_view query,
             const AnswerSet& answer) {
    static std::atomic<unsigned> counter{0};
    nlohmann::json entry{{"endpoint", endpoint}, {"query", query}, {"answer", answer}};
    std::unique_lock lock(mutex_);
    auto tmp = dir_ / (key + ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++));
    {
      std::ofstream out(tmp);
      if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
      out << entry.dump() << '\n';
    }
    std::filesystem::rename(tmp, path_for(key));
  }

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
};

struct KbClientOptions {
  std::chrono::milliseconds timeout{60000};
  std::chrono::milliseconds min_request_interval{1000};
  std::optional<std::filesystem::path> cache_dir;
  bool offline = false;  // never contact a remote endpoint; cache misses are errors
};

class KbClient {
 public:
  // `endpoint` is an http(s) URL or the path of a triple fixture file.
  KbClient(std::string endpoint, KbClientOptions options = {})
      : endpoint_(std::move(endpoint)), options_(std::move(options)) {
    if (is_http_url(endpoint_)) {
      backend_ = std::make_unique<HttpSparqlEndpoint>(endpoint_, options_.timeout);
    } else {
      backend_ = std::make_unique<FixtureEndpoint>(FixtureStore::load(endpoint_));
    }
    if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
  }

  KbClient(std::string endpoint_id, std::unique_ptr<SparqlEndpoint> backend, KbClientOptions options = {})
      : endpoint_(std::move(endpoint_id)), options_(std::move(options)), backend_(std::move(backend)) {
    if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
  }

  const std::string& endpoint() const { return endpoint_; }
  std::size_t backend_calls() const { return calls_.load(); }

  AnswerSet execute(const std::string& query) {
    if (auto why = query_rejection(query)) return AnswerSet::of_error(*why);
    std::string key = AnswerCache::key(endpoint_, query);
    if (cache_) {
      if (auto hit = cache_->lookup(key)) return *hit;
    }
    if (backend_->remote() && options_.offline)
      return AnswerSet::of_error("offline mode: no cached answer");
    EndpointResult result = throttled_run(query);
    if (cache_ && result.cacheable) cache_->store(key, endpoint_, normalize(query), result.answer);
    return result.answer;
  }

 private:
  EndpointResult throttled_run(const std::string& query) {
    std::lock_guard lock(rate_mutex_);
    if (backend_->remote() && last_request_) {
      auto ready = *last_request_ + options_.min_request_interval;
      std::this_thread::sleep_until(ready);
    }
    ++calls_;
    EndpointResult r = backend_->run(query);
    last_request_ = std::chrono::steady_clock::now();
    return r;
  }

  std::string endpoint_;
  KbClientOptions options_;
  std::unique_ptr<SparqlEndpoint> backend_;
  std::optional<AnswerCache> cache_;
  std::mutex rate_mutex_;
  std::optional<std::chrono::steady_clock::time_point> last_request_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace kgqa
