#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "topicmark/error.hpp"
#include "topicmark/experiment.hpp"
#include "world_files.hpp"

using namespace topicmark;
using namespace topicmark::testing;
namespace fs = std::filesystem;

namespace {

SyntheticOptions small_world() {
  SyntheticOptions o;
  o.corpus_bytes = 150'000;
  o.heldout_docs = 12;
  o.continuation_words = 80;
  return o;
}

class ExperimentTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    files_ = new WorldFiles(write_world(fs::temp_directory_path() / "topicmark_experiment_test", small_world()));
  }
  static void TearDownTestSuite() {
    fs::remove_all(files_->dir);
    delete files_;
  }

  static ExperimentManifest manifest(const std::string& extra = "") {
    std::string text = basic_manifest(4);
    text.pop_back();
    text += R"(, "generation": {"delta": 3.0, "max_tokens": 60, "seed": 11},
                "detectors": [{"scheme": "max-z"}, {"scheme": "oracle"}, {"scheme": "sliding", "window": 20}])";
    text += extra + "}";
    return parse_manifest(text, files_->dir);
  }

  static std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  static WorldFiles* files_;
};

WorldFiles* ExperimentTest::files_ = nullptr;

}  // namespace

TEST(Manifest, ResolvesRelativePaths) {
  const auto m = parse_manifest(basic_manifest(3), "/data/exp");
  EXPECT_EQ(m.vocab, fs::path("/data/exp/vocab.txt"));
  EXPECT_EQ(m.limit, 3u);
  EXPECT_EQ(m.detectors.size(), 1u);
  EXPECT_EQ(m.fpr_levels, (std::vector<double>{0.01, 0.10}));
  const auto abs = parse_manifest(
      R"({"vocab":"/v","embeddings":"e","partition":"p","model":"m","prompts":"q","clean":"c"})", "/x");
  EXPECT_EQ(abs.vocab, fs::path("/v"));
  EXPECT_FALSE(abs.resources);
}

TEST(Manifest, Rejections) {
  EXPECT_THROW(parse_manifest("{not json", "."), ParseError);
  EXPECT_THROW(parse_manifest("[]", "."), Error);
  EXPECT_THROW(parse_manifest(R"({"vocab":"v"})", "."), Error);
  // Attacks need lexical resources.
  EXPECT_THROW(parse_manifest(
                   R"({"vocab":"v","embeddings":"e","partition":"p","model":"m","prompts":"q","clean":"c",
                       "attacks":[{"percent":10}]})",
                   "."),
               Error);
  EXPECT_THROW(parse_manifest(
                   R"({"vocab":"v","embeddings":"e","partition":"p","model":"m","prompts":"q","clean":"c",
                       "detectors":[{"scheme":"nope"}]})",
                   "."),
               Error);
}

TEST(RawRecords, JsonRoundTrip) {
  const RawRecord r{"rand", "max-z", "doc7", Label::watermarked, 5.125, true, 2, 90, 200, 0.2503};
  const auto line = raw_record_json(r);
  EXPECT_EQ(line.rfind(R"({"group":"rand","detector":"max-z","doc":"doc7","label":"watermarked")", 0), 0u);
  const auto back = parse_raw_record(line);
  EXPECT_EQ(back.z, r.z);
  EXPECT_EQ(back.gamma, r.gamma);
  EXPECT_EQ(back.green, r.green);
  EXPECT_EQ(back.label, r.label);
}

TEST_F(ExperimentTest, CountsPerLabel) {
  const auto res = run_experiment(manifest());
  ASSERT_EQ(res.reports.size(), 3u);
  for (const auto& r : res.reports) {
    EXPECT_EQ(r.n_watermarked, 4u) << r.group;
    EXPECT_EQ(r.n_clean, 4u) << r.group;
  }
  EXPECT_EQ(res.reports[0].group, "none/max-z");
  EXPECT_EQ(res.reports[2].group, "none/sliding:w20");
  EXPECT_EQ(res.raw.size(), 3u * 8u);
}

TEST_F(ExperimentTest, RerunGivesIdenticalLogs) {
  const auto m = manifest(R"(, "attacks": [{"name": "r10", "mode": "random", "percent": 10, "seed": 4},
                                            {"name": "t10", "mode": "targeted", "percent": 10, "seed": 4}])");
  const fs::path a = files_->dir / "run_a", b = files_->dir / "run_b";
  run_experiment(m, a, true);
  run_experiment(m, b, true);
  for (const char* f : {"raw.jsonl", "metrics.json", "roc.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    EXPECT_FALSE(slurp(a / f).empty()) << f;
  }
}

TEST_F(ExperimentTest, AggregateRecomputesFromRawLog) {
  const auto m = manifest(R"(, "attacks": [{"name": "r20", "percent": 20, "seed": 1}])");
  const fs::path out = files_->dir / "run_agg";
  const auto res = run_experiment(m, out);
  std::ifstream in(out / "raw.jsonl");
  std::vector<RawRecord> raw;
  for (std::string line; std::getline(in, line);) raw.push_back(parse_raw_record(line));
  ASSERT_EQ(raw.size(), res.raw.size());
  const auto again = aggregate_raw(raw, m.detectors, m.fpr_levels, m.tpr_convention);
  ASSERT_EQ(again.size(), res.reports.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    EXPECT_EQ(again[i].group, res.reports[i].group);
    EXPECT_EQ(again[i].roc_auc, res.reports[i].roc_auc);
    EXPECT_EQ(again[i].best_f1, res.reports[i].best_f1);
    EXPECT_EQ(again[i].tpr_at, res.reports[i].tpr_at);
    EXPECT_EQ(again[i].z_watermarked.mean, res.reports[i].z_watermarked.mean);
  }
  // Every record's z is reproducible from its own counts.
  for (const auto& r : raw) EXPECT_NEAR(r.z, z_score(r.green, r.scored, r.gamma), 1e-9);
}

TEST_F(ExperimentTest, DegradationCurvesPerMode) {
  const auto m = manifest(R"(, "degradation": {"levels": [10, 40], "trials": 2, "samples": 2, "seed": 9})");
  const auto res = run_experiment(m);
  ASSERT_EQ(res.degradation.size(), 2u);
  EXPECT_EQ(res.degradation[0].first, "random");
  EXPECT_EQ(res.degradation[1].first, "targeted");
  EXPECT_EQ(res.degradation[0].second.trials.size(), 2u * 2u * 2u);
}

TEST_F(ExperimentTest, MissingArtifactsAreListedUpFront) {
  auto m = manifest();
  m.model = files_->dir / "no_such.ngram";
  m.clean = files_->dir / "no_such.tsv";
  try {
    run_experiment(m);
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("no_such.ngram"), std::string::npos);
    EXPECT_NE(what.find("no_such.tsv"), std::string::npos);
  }
}

TEST_F(ExperimentTest, ParaphrasesAreScoredAsAGroup) {
  const fs::path para = files_->dir / "para.tsv";
  {
    std::ofstream out(para);
    const auto prompts = read_documents_file((files_->dir / "prompts.tsv").string());
    for (std::size_t i = 0; i < 4; ++i) out << prompts[i].id << "\t" << prompts[i].text << "\n";
  }
  auto m = manifest();
  m.paraphrases = para;
  const auto res = run_experiment(m);
  bool found = false;
  for (const auto& r : res.reports) found |= r.group == "paraphrase/max-z";
  EXPECT_TRUE(found);
}
