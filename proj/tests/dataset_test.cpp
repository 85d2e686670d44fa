#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "kgqa/dataset.hpp"

using namespace kgqa;

namespace {

const std::string kCurieQuestion =
    "How many PhD students of Marie Curie were nominated for the Nobel Prize in Chemistry?";
const std::string kCurieQuery =
    "SELECT (COUNT(*) AS ?ans) WHERE { ?subj wdt:P1411 wd:Q44585 . ?subj wdt:P184 wd:Q7186 . }";

EntityAnnotation ann(const std::string& q, const std::string& mention, const std::string& kb, PlaceholderLabel role) {
  auto start = q.find(mention);
  return {mention, {start, start + mention.size()}, kb, role};
}

QAInstance curie() {
  QAInstance q;
  q.id = "curie";
  q.question = kCurieQuestion;
  q.query = kCurieQuery;
  q.annotations = {ann(kCurieQuestion, "Marie Curie", "wd:Q7186", {PlaceholderKind::kObj, 2}),
                   ann(kCurieQuestion, "Nobel Prize in Chemistry", "wd:Q44585", {PlaceholderKind::kObj, 1})};
  return q;
}

std::string reasons(const CleaningVerdict& v) {
  std::string out;
  for (auto r : v.reasons) out += std::string(out.empty() ? "" : ",") + std::string(cleaning_reason_name(r));
  return out;
}

}  // namespace

TEST(Clean, PlantedFixture) {
  std::ifstream in(KGQA_FIXTURES_DIR "/cleaning_planted.jsonl");
  int n = 0, kept = 0;
  for (std::string line; std::getline(in, line); ++n) {
    auto j = nlohmann::json::parse(line);
    auto inst = j.get<QAInstance>();
    std::string want;
    for (const auto& r : j.at("expected_reasons")) want += std::string(want.empty() ? "" : ",") + r.get<std::string>();
    CleaningVerdict v = clean(inst);
    EXPECT_EQ(reasons(v), want) << inst.id << ": " << inst.question;
    EXPECT_EQ(v.keep, want.empty());
    kept += v.keep;
  }
  EXPECT_EQ(n, 20);
  EXPECT_EQ(kept, 10);
}

TEST(Clean, LengthBoundsCountCodePoints) {
  QAInstance q;
  q.query = "ASK {}";
  q.question = "éééééééééé";  // 10 code points, 20 bytes
  EXPECT_TRUE(clean(q).keep);
  q.question = "ééééééééé";
  EXPECT_EQ(reasons(clean(q)), "BAD_LENGTH");
  q.question = std::string(351, 'a');
  EXPECT_EQ(reasons(clean(q)), "BAD_LENGTH");
}

TEST(Clean, SyntheticRatioBounds) {
  QAInstance q;
  q.query = "ASK {}";
  q.synthetic_question = std::string(20, 's');
  q.question = std::string(10, 'q');  // ratio 0.5
  EXPECT_TRUE(clean(q).keep);
  q.question = std::string(60, 'q');  // ratio 3
  EXPECT_TRUE(clean(q).keep);
  q.question = std::string(61, 'q');
  EXPECT_FALSE(clean(q).keep);
}

TEST(Dataset, SaveLoadRoundTrip) {
  QAInstance a = curie();
  a.synthetic_question = "What is {x} ?";
  a.answer_labels = {"2"};
  QAInstance b;
  b.id = "b";
  b.question = "Is it?";
  b.query = "ASK {\n  wd:Q1 wdt:P31 wd:Q5\n}";
  b.split = Split::kTest;
  auto path = (std::filesystem::temp_directory_path() / "kgqa_ds.jsonl").string();
  save_dataset(path, {a, b});
  LoadResult r = load_dataset(path);
  ASSERT_TRUE(r.issues.empty());
  ASSERT_EQ(r.instances.size(), 2u);
  EXPECT_EQ(r.instances[0], a);
  EXPECT_EQ(r.instances[1].query, "ASK {   wd:Q1 wdt:P31 wd:Q5 }");
  EXPECT_EQ(normalize(r.instances[1].query), normalize(b.query));
  EXPECT_EQ(r.instances[1].split, Split::kTest);
}

TEST(Dataset, MalformedLinesAreReportedAndSkipped) {
  auto path = (std::filesystem::temp_directory_path() / "kgqa_ds_bad.jsonl").string();
  std::ofstream(path) << R"({"id":"ok","question":"q","query":"ASK {}"})" "\n"
                      << "not json\n"
                      << R"({"id":"x"})" "\n"
                      << R"({"id":"y","query":"ASK {}","split":"dev"})" "\n"
                      << R"({"id":"z","question":null,"query":"ASK {}"})" "\n";
  LoadResult r = load_dataset(path);
  ASSERT_EQ(r.instances.size(), 2u);
  EXPECT_EQ(r.instances[1].question, "");
  ASSERT_EQ(r.issues.size(), 3u);
  EXPECT_EQ(r.issues[0].line, 2u);
  EXPECT_EQ(r.issues[2].line, 4u);
  EXPECT_THROW(load_dataset("/nonexistent.jsonl"), Error);
}

TEST(DeriveGold, Curie) {
  GoldDerivation g = derive_gold(curie());
  EXPECT_EQ(g.query_template.text(),
            "SELECT ( COUNT ( * ) AS ?ans ) WHERE { ?subj wdt:P1411 <obj1> . ?subj wdt:P184 <obj2> . }");
  EXPECT_EQ(detail::reference_key(g.assignment.at({PlaceholderKind::kObj, 1})), detail::reference_key("Q44585"));
  EXPECT_EQ(g.spans.size(), 2u);
  EXPECT_EQ(g.spans[0].text, "Marie Curie");
}

TEST(DeriveGold, InconsistentAnnotationIsASchemaError) {
  QAInstance q = curie();
  q.annotations[0].span.start += 1;
  try {
    derive_gold(q);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchemaError);
  }
  std::vector<std::string> skipped;
  EXPECT_TRUE(training_pairs({q}, &skipped).empty());
  EXPECT_EQ(skipped.size(), 1u);
}

TEST(TrainingPairs, SkipsNonContiguousOrdinals) {
  QAInstance q = curie();
  // Roles swapped so obj2 appears first in the query.
  std::swap(q.annotations[0].role, q.annotations[1].role);
  std::vector<std::string> skipped;
  EXPECT_TRUE(training_pairs({q}, &skipped).empty());
  ASSERT_EQ(skipped.size(), 1u);
  EXPECT_NE(skipped[0].find("ordinals"), std::string::npos);
  EXPECT_EQ(training_pairs({curie()}).size(), 1u);
}

TEST(ConvertLcquad, RecordsAndAnnotations) {
  auto raw = nlohmann::json::parse(R"([
    {"uid": 19719, "question": "What is the capital of France?", "NNQT_question": "What is {capital} of {France} ?",
     "sparql_wikidata": " select distinct ?obj where { wd:Q142 wdt:P36 ?obj . ?obj wdt:P31 wd:Q5119 } "},
    {"uid": "7", "question": null, "NNQT_question": "x", "sparql_wikidata": "SELECT ?x WHERE { "}
  ])");
  auto out = convert_lcquad(raw, Split::kTest, {{"Q142", "France"}, {"Q5119", "capital city"}});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].id, "19719");
  EXPECT_EQ(out[0].split, Split::kTest);
  EXPECT_EQ(*out[0].synthetic_question, "What is {capital} of {France} ?");
  ASSERT_EQ(out[0].annotations.size(), 1u);
  EXPECT_EQ(out[0].annotations[0].mention, "France");
  EXPECT_EQ(out[0].annotations[0].role, (PlaceholderLabel{PlaceholderKind::kSubj, 1}));
  EXPECT_TRUE(out[0].annotations[0].consistent_with(out[0].question));
  EXPECT_EQ(out[1].question, "");
  EXPECT_TRUE(out[1].annotations.empty());
  EXPECT_EQ(reasons(clean(out[1])), "NULL_TEXT,INVALID_TOKENS");
  EXPECT_THROW(convert_lcquad(nlohmann::json::object(), Split::kTrain), Error);
}
