#pragma once

// Entity-linking backends behind a uniform JSON contract
//   request  { "question": string }
//   response { "links": [ { "mention", "start", "end", "id", "kb", "score" } ] }
// and the concurrent fan-out over all configured backends.

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <memory>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "kgqa/entity_linking.hpp"
#include "kgqa/error.hpp"

namespace kgqa {

using json = nlohmann::json;

inline void to_json(json& j, const Span& s) { j = json{{"start", s.start}, {"end", s.end}}; }

inline void to_json(json& j, const EntityCandidate& c) {
  j = json{{"mention", c.mention}, {"start", c.span.start}, {"end", c.span.end},
           {"id", c.kb_id},        {"kb", target_kb_name(c.kb)},
           {"score", c.score},     {"system_id", c.system_id}};
}

inline void to_json(json& j, const RankedEntity& e) {
  j = json{{"rank", e.rank},
           {"mention", e.mention},
           {"start", e.span.start},
           {"end", e.span.end},
           {"id", wikidata_prefixed(e.wikidata_id)},
           {"votes", e.votes},
           {"weight_sum", e.weight_sum},
           {"score", e.score},
           {"systems", e.systems}};
}

// Reads a contract response. Links whose span falls outside the question or
// whose score is not finite are dropped.
inline std::vector<EntityCandidate> parse_links_response(
    const json& response, std::string_view question, const ElSystemConfig& config) {
  if (!response.is_object() || !response.contains("links") ||
      !response["links"].is_array()) {
    throw Error(ErrorCode::kSchemaError, "response lacks a \"links\" array");
  }
  std::vector<EntityCandidate> out;
  for (const auto& link : response["links"]) {
    EntityCandidate c;
    c.system_id = config.system_id;
    c.mention = link.value("mention", "");
    c.span = {link.value("start", std::size_t{0}), link.value("end", std::size_t{0})};
    c.kb_id = link.value("id", "");
    c.kb = config.target_kb;
    if (link.contains("kb")) {
      if (auto kb = parse_target_kb(link["kb"].get<std::string>())) c.kb = *kb;
    }
    c.score = link.value("score", 0.0);
    if (c.kb_id.empty() || !std::isfinite(c.score) || c.span.end < c.span.start ||
        !c.span.within(question))
      continue;
    if (c.mention.empty()) c.mention = std::string(question.substr(c.span.start, c.span.length()));
    out.push_back(std::move(c));
  }
  return out;
}

class ElBackend {
 public:
  virtual ~ElBackend() = default;
  virtual std::vector<EntityCandidate> link(const std::string& question) = 0;
};

// Canned responses keyed by question text:
//   { "responses": { "<question>": { "links": [...] } },
//     "delay_ms": 0, "fail": false }
// Questions without an entry get an empty link list.
class FixtureBackend : public ElBackend {
 public:
  FixtureBackend(ElSystemConfig config, json fixture)
      : config_(std::move(config)), fixture_(std::move(fixture)) {}

  static std::shared_ptr<FixtureBackend> load(const ElSystemConfig& config) {
    std::ifstream in(config.endpoint);
    if (!in) throw Error(ErrorCode::kIoError, "cannot open EL fixture " + config.endpoint);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchemaError, config.endpoint + ": " + e.what());
    }
    return std::make_shared<FixtureBackend>(config, std::move(j));
  }

  std::vector<EntityCandidate> link(const std::string& question) override {
    if (int delay = fixture_.value("delay_ms", 0); delay > 0)
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    if (fixture_.value("fail", false))
      throw Error(ErrorCode::kIoError, config_.system_id + ": injected failure");
    const json& responses = fixture_.contains("responses") ? fixture_["responses"] : json::object();
    auto it = responses.find(question);
    if (it == responses.end()) return {};
    return parse_links_response(*it, question, config_);
  }

 private:
  ElSystemConfig config_;
  json fixture_;
};

inline std::pair<std::string, std::string> split_url(const std::string& url) {
  auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(ErrorCode::kConfigError, "not a URL: " + url);
  auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

inline bool is_http_url(std::string_view s) {
  return s.starts_with("http://") || s.starts_with("https://");
}

// POSTs the contract request to a linker service (or a thin adapter in
// front of AIDA, Spotlight, OpenTapioca, TagME).
class HttpBackend : public ElBackend {
 public:
  explicit HttpBackend(ElSystemConfig config) : config_(std::move(config)) {}

  std::vector<EntityCandidate> link(const std::string& question) override {
    auto [base, path] = split_url(config_.endpoint);
    httplib::Client client(base);
    auto secs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout);
    client.set_connection_timeout(0, secs.count());
    client.set_read_timeout(0, secs.count());
    auto res = client.Post(path, json{{"question", question}}.dump(), "application/json");
    if (!res) {
      throw Error(ErrorCode::kIoError,
                  config_.system_id + ": " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw Error(ErrorCode::kIoError,
                  config_.system_id + ": HTTP " + std::to_string(res->status));
    }
    json body;
    try {
      body = json::parse(res->body);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kSchemaError, config_.system_id + ": " + e.what());
    }
    return parse_links_response(body, question, config_);
  }

 private:
  ElSystemConfig config_;
};

inline std::shared_ptr<ElBackend> make_backend(const ElSystemConfig& config) {
  if (is_http_url(config.endpoint)) return std::make_shared<HttpBackend>(config);
  return FixtureBackend::load(config);
}

struct BackendCall {
  std::string system_id;
  double latency_ms = 0.0;
  std::size_t candidates = 0;
  std::string error;  // empty on success
};

inline void to_json(json& j, const BackendCall& c) {
  j = json{{"system_id", c.system_id},
           {"latency_ms", c.latency_ms},
           {"candidates", c.candidates},
           {"error", c.error.empty() ? json(nullptr) : json(c.error)}};
}

struct LinkResult {
  std::vector<SystemCandidates> per_system;  // in configuration order
  std::vector<BackendCall> calls;

  bool all_failed() const {
    return !calls.empty() &&
           std::all_of(calls.begin(), calls.end(),
                       [](const BackendCall& c) { return !c.error.empty(); });
  }
};

// Thrown by link_all when no backend answered; carries the diagnostics.
class AllSystemsFailed : public Error {
 public:
  explicit AllSystemsFailed(LinkResult result)
      : Error(ErrorCode::kAllSystemsFailed, "every entity-linking backend failed"),
        result_(std::move(result)) {}
  const LinkResult& result() const { return result_; }

 private:
  LinkResult result_;
};

// Queries every backend concurrently, each under its own timeout. A failed
// or late backend contributes an empty list. Each call is logged as one JSON
// line to `log` when given.
inline LinkResult link_all(const std::string& question,
                           const std::vector<ElSystemConfig>& configs,
                           const std::vector<std::shared_ptr<ElBackend>>& backends,
                           std::ostream* log = nullptr) {
  if (configs.empty()) throw Error(ErrorCode::kConfigError, "no entity-linking systems configured");
  if (backends.size() != configs.size())
    throw Error(ErrorCode::kConfigError, "one backend per configured system required");

  using Clock = std::chrono::steady_clock;
  auto start = Clock::now();
  std::vector<std::future<std::vector<EntityCandidate>>> pending;
  for (const auto& backend : backends) {
    auto promise = std::make_shared<std::promise<std::vector<EntityCandidate>>>();
    pending.push_back(promise->get_future());
    // Detached so a hung backend cannot block the caller past its timeout.
    std::thread([backend, promise, question] {
      try {
        promise->set_value(backend->link(question));
      } catch (...) {
        promise->set_exception(std::current_exception());
      }
    }).detach();
  }

  LinkResult result;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    BackendCall call{configs[i].system_id, 0.0, 0, {}};
    SystemCandidates out{configs[i].system_id, {}};
    if (pending[i].wait_until(start + configs[i].timeout) == std::future_status::ready) {
      try {
        out.candidates = pending[i].get();
      } catch (const std::exception& e) {
        call.error = e.what();
      }
    } else {
      call.error = "timeout after " + std::to_string(configs[i].timeout.count()) + " ms";
    }
    call.latency_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    call.candidates = out.candidates.size();
    if (log) *log << json(call).dump() << '\n';
    result.calls.push_back(std::move(call));
    result.per_system.push_back(std::move(out));
  }
  if (result.all_failed()) throw AllSystemsFailed(std::move(result));
  return result;
}

inline LinkResult link_all(const std::string& question,
                           const std::vector<ElSystemConfig>& configs,
                           std::ostream* log = nullptr) {
  std::vector<std::shared_ptr<ElBackend>> backends;
  for (const auto& c : configs) backends.push_back(make_backend(c));
  return link_all(question, configs, backends, log);
}

// Drops candidates that cannot be mapped to Wikidata.
inline std::vector<SystemCandidates> map_all_to_wikidata(
    const std::vector<SystemCandidates>& per_system, const SameAsStore& mapping,
    std::ostream* log = nullptr) {
  std::vector<SystemCandidates> out;
  for (const auto& sys : per_system) {
    SystemCandidates mapped{sys.system_id, {}};
    for (const auto& c : sys.candidates) {
      if (auto m = map_to_wikidata(c, mapping)) {
        mapped.candidates.push_back(std::move(*m));
      } else if (log) {
        *log << json{{"system_id", c.system_id}, {"unmapped", c.kb_id},
                     {"kb", target_kb_name(c.kb)}}.dump()
             << '\n';
      }
    }
    out.push_back(std::move(mapped));
  }
  return out;
}

// Configured linkers, their backends and the sameAs store; read-only once
// built and shareable across threads.
class ElEnsemble {
 public:
  ElEnsemble(std::vector<ElSystemConfig> configs, SameAsStore mapping)
      : configs_(std::move(configs)), mapping_(std::move(mapping)) {
    for (const auto& c : configs_) backends_.push_back(make_backend(c));
  }

  ElEnsemble(std::vector<ElSystemConfig> configs,
             std::vector<std::shared_ptr<ElBackend>> backends, SameAsStore mapping)
      : configs_(std::move(configs)),
        backends_(std::move(backends)),
        mapping_(std::move(mapping)) {}

  const std::vector<ElSystemConfig>& configs() const { return configs_; }
  const SameAsStore& mapping() const { return mapping_; }

  // Raw per-system output mapped to Wikidata. Empty lists when every
  // backend failed.
  std::vector<SystemCandidates> candidates(const std::string& question,
                                           std::ostream* log = nullptr) const {
    LinkResult raw;
    try {
      raw = link_all(question, configs_, backends_, log);
    } catch (const AllSystemsFailed& e) {
      raw = e.result();
    }
    return map_all_to_wikidata(raw.per_system, mapping_, log);
  }

  RankedEntityList link(const std::string& question, std::ostream* log = nullptr) const {
    return vote(candidates(question, log), configs_);
  }

 private:
  std::vector<ElSystemConfig> configs_;
  std::vector<std::shared_ptr<ElBackend>> backends_;
  SameAsStore mapping_;
};

}  // namespace kgqa
