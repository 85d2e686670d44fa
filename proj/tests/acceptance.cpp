// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "kgqa/dataset.hpp"
#include "kgqa/entity_linking.hpp"
#include "kgqa/eval.hpp"
#include "kgqa/pipeline.hpp"
#include "kgqa/query_template.hpp"
#include "kgqa/slot_filling.hpp"
#include "support/bleu_oracle.hpp"
#include "support/fixture_files.hpp"
#include "support/random_ensembles.hpp"
#include "support/random_slot_instances.hpp"
#include "support/slot_fill_oracle.hpp"

using namespace kgqa;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

Outcome golden_example() {
  auto start = Clock::now();
  Pipeline p = Pipeline::from_config(PipelineConfig::load(std::string(KGQA_SAMPLES_DIR) + "/curie/config.json"));
  PipelineResult r = p.answer(
      {"curie", "How many PhD students of Marie Curie were nominated for the Nobel Prize in Chemistry?"});
  double elapsed = seconds_since(start);
  const CandidateOutcome* c = r.chosen();
  if (!c) return {false, "no query produced: " + r.verdict};
  bool query_ok = exact_match(
      c->filled.query, "SELECT (COUNT(*) AS ?ans) WHERE { ?subj wdt:P1411 wd:Q44585 . ?subj wdt:P184 wd:Q7186 . }");
  bool stages_ok = c->filled.assignments.size() == 2 &&
                   std::all_of(c->filled.assignments.begin(), c->filled.assignments.end(),
                               [](const SlotAssignment& a) { return a.stage == FillStage::kStandard; });
  char buf[160];
  std::snprintf(buf, sizeof buf, "query %s, stages %s, %.3fs", query_ok ? "matches" : "differs",
                stages_ok ? "STANDARD" : "not STANDARD", elapsed);
  return {query_ok && stages_ok && elapsed < 1.0, buf};
}

Outcome slot_filling_oracle() {
  std::mt19937 rng(20211);
  auto start = Clock::now();
  int agree = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    auto inst = gen::random_slot_instance(rng);
    QueryTemplate tmpl;
    tmpl.placeholders = inst.slots;
    for (const auto& s : inst.slots) tmpl.tokens.push_back(QueryToken::make(TokenKind::kPlaceholder, s.name()));
    FilledQuery f = fill_slots(tmpl, inst.spans, inst.entities);
    oracle::OracleResult got;
    for (const auto& a : f.assignments) got[a.label] = {a.entity, static_cast<int>(a.stage)};
    agree += got == oracle::brute_force_fill(inst.slots, inst.spans, inst.entities);
  }
  double elapsed = seconds_since(start);
  char buf[128];
  std::snprintf(buf, sizeof buf, "%d/%d agree, %.2fs", agree, n, elapsed);
  return {agree == n && elapsed < 10.0, buf};
}

Outcome bleu_cross_check() {
  auto c = fixtures::bleu_pairs(KGQA_FIXTURES_DIR);
  auto h = fixtures::tokens_of(c.hypotheses, 0, c.hypotheses.size());
  auto r = fixtures::tokens_of(c.references, 0, c.references.size());
  double ours = bleu(h, r);
  double ref = oracle::reference_bleu(h, r);
  double nltk = 0.0;
  for (const auto& [name, b, e, v] : c.slices)
    if (name == "all") nltk = v;
  bool identity = bleu(r, r) == 1.0;
  bool disjoint = bleu({{"a", "b", "c", "d"}}, {{"e", "f", "g", "h"}}) == 0.0;
  char buf[200];
  std::snprintf(buf, sizeof buf, "%zu pairs, bleu %.9f, oracle %.9f, nltk %.9f, identity %s, disjoint %s",
                h.size(), ours, ref, nltk, identity ? "1" : "!=1", disjoint ? "0" : "!=0");
  return {h.size() == 25 && std::abs(ours - ref) <= 1e-6 && std::abs(ours - nltk) <= 1e-6 && identity && disjoint,
          buf};
}

Outcome voting_properties() {
  std::mt19937 rng(500);
  int passed = 0;
  const int n = 500;
  for (int trial = 0; trial < n; ++trial) {
    gen::Ensemble e = gen::random_ensemble(rng);
    RankedEntityList base = vote(e.outputs, e.configs);
    bool ok = true;
    for (std::size_t i = 0; i < base.size(); ++i) ok &= base[i].rank == static_cast<int>(i) + 1;

    auto outputs = e.outputs;
    auto configs = e.configs;
    std::shuffle(outputs.begin(), outputs.end(), rng);
    std::shuffle(configs.begin(), configs.end(), rng);
    ok &= vote(outputs, configs) == base;

    if (!base.empty()) {
      const RankedEntity& target = base[std::uniform_int_distribution<std::size_t>(0, base.size() - 1)(rng)];
      auto more = e.outputs;
      auto more_configs = e.configs;
      ElSystemConfig extra;
      extra.system_id = "extra";
      extra.precision_weight = 0.5;
      more_configs.push_back(extra);
      EntityCandidate c;
      c.system_id = "extra";
      c.mention = target.mention;
      c.span = target.span;
      c.kb_id = target.wikidata_id;
      c.score = 0.5;
      more.push_back({"extra", {c}});
      auto after = vote(more, more_configs);
      auto it = std::find_if(after.begin(), after.end(), [&](const RankedEntity& x) {
        return x.wikidata_id == target.wikidata_id && text::casefold(x.mention) == text::casefold(target.mention);
      });
      ok &= it != after.end() && it->rank <= target.rank;
    }
    passed += ok;
  }
  return {passed == n, std::to_string(passed) + "/" + std::to_string(n) + " ensembles"};
}

Outcome metric_fixture() {
  auto fx = fixtures::eval_fixture(KGQA_FIXTURES_DIR);
  KbClientOptions opts;
  opts.min_request_interval = std::chrono::milliseconds(0);
  KbClient kb(fx.kb_path, opts);
  EvalReport r = evaluate_corpus(fx.inputs, kb);
  const auto& w = fx.expected;
  auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  bool ok = r.questions == 10 && near(r.bleu, w.at("bleu")) && near(r.accuracy, w.at("accuracy")) &&
            near(r.macro_p, w.at("macro_precision")) && near(r.macro_r, w.at("macro_recall")) &&
            near(r.macro_f1, w.at("macro_f1")) && r.both_empty_answers == w.at("both_empty_answers").get<std::size_t>();
  for (ErrorClass c : kAllErrorClasses)
    ok &= near(r.error_class_histogram.at(c), w.at("error_classes").at(std::string(error_class_name(c))));
  char buf[160];
  std::snprintf(buf, sizeof buf, "B %.4f A %.2f P %.4f R %.4f F1 %.4f", r.bleu, r.accuracy, r.macro_p, r.macro_r,
                r.macro_f1);
  return {ok, buf};
}

Outcome error_taxonomy() {
  const std::map<std::tuple<bool, bool, bool>, std::string> want = {
      {{true, true, true}, "TES"},   {{true, true, false}, "TE!"},  {{true, false, false}, "T!!"},
      {{false, true, true}, "!ES"},  {{false, true, false}, "!E!"}, {{false, false, false}, "!!!"},
      {{true, false, true}, "raise"}, {{false, false, true}, "raise"}};
  int right = 0, classes = 0, raised = 0;
  for (const auto& [tes, name] : want) {
    auto [t, e, s] = tes;
    std::string got;
    try {
      got = std::string(error_class_name(classify_error(t, e, s)));
      ++classes;
    } catch (const Error& err) {
      got = err.code() == ErrorCode::kInvalidCombination ? "raise" : "other error";
      raised += got == "raise";
    }
    right += got == name;
  }
  return {right == 8 && classes == 6 && raised == 2,
          std::to_string(classes) + " classes, " + std::to_string(raised) + " InvalidCombination"};
}

Outcome cleaning_fixture() {
  std::ifstream in(KGQA_FIXTURES_DIR "/cleaning_planted.jsonl");
  int total = 0, right = 0, kept = 0;
  for (std::string line; std::getline(in, line); ++total) {
    auto j = nlohmann::json::parse(line);
    CleaningVerdict v = clean(j.get<QAInstance>());
    std::set<std::string> got, want;
    for (auto r : v.reasons) got.insert(std::string(cleaning_reason_name(r)));
    for (const auto& r : j.at("expected_reasons")) want.insert(r.get<std::string>());
    right += got == want && v.keep == want.empty();
    kept += v.keep;
  }
  return {total == 20 && right == total,
          std::to_string(right) + "/" + std::to_string(total) + " verdicts correct, " + std::to_string(kept) + " kept"};
}

Outcome round_trip() {
  LoadResult data = load_dataset(KGQA_FIXTURES_DIR "/roundtrip_pairs.jsonl");
  int ok = 0;
  for (const auto& inst : data.instances) {
    try {
      Templatized t = templatize(inst.query, inst.annotations);
      Instantiation i = fill(t.query_template, t.assignment);
      ok += i.complete && normalize(i.query) == normalize(inst.query);
    } catch (const Error&) {
    }
  }
  int n = static_cast<int>(data.instances.size());
  return {n == 200 && data.issues.empty() && ok == n, std::to_string(ok) + "/" + std::to_string(n) + " pairs"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"golden_example", golden_example},   {"slot_filling_oracle", slot_filling_oracle},
      {"bleu_cross_check", bleu_cross_check}, {"voting_properties", voting_properties},
      {"metric_fixture", metric_fixture},   {"error_taxonomy", error_taxonomy},
      {"cleaning_fixture", cleaning_fixture}, {"round_trip", round_trip},
  };
  int failures = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
