#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "json.hpp"
#include "stylebench/classifier.hpp"
#include "stylebench/corpus.hpp"
#include "stylebench/manifest.hpp"

using namespace stylebench;
namespace fs = std::filesystem;

namespace {

const std::string kTiny =
    " --set epochs=2 embed=4 hidden=6 z_dim=3 max_len=8 batch_size=4 disc_pretrain_epochs=1";

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() /
             ("stylebench_cli_test_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string p(const std::string& name) { return (work_dir() / name).string(); }

int run(const std::string& args) {
  const std::string cmd =
      std::string(STYLEBENCH_BIN) + " " + args + " >>" + p("cli.log") + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

// Shared benchmark written once: corpora, references, classifier, model.
class Pipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ASSERT_EQ(run("synth --seed 1 --n 40 --out " + p("train.tsv")), 0);
    ASSERT_EQ(run("synth --seed 2 --n 20 --out " + p("test.tsv") + " --refs-out " +
                  p("refs.txt")),
              0);
    ASSERT_EQ(run("train-classifier --corpus " + p("train.tsv") + " --out " + p("clf.json")), 0);
    ASSERT_EQ(run("train --arch baseline --corpus " + p("train.tsv") + " --seed 3 --out " +
                  p("model.json") + kTiny),
              0);
    ASSERT_EQ(run("transfer --model " + p("model.json") + " --corpus " + p("test.tsv") +
                  " --out " + p("batch.tsv")),
              0);
    ASSERT_EQ(run("eval --model " + p("model.json") + " --corpus " + p("test.tsv") + " --refs " +
                  p("refs.txt") + " --classifier " + p("clf.json") + " --out " +
                  p("metrics.json")),
              0);
    ASSERT_EQ(run("manipulate --model-output " + p("batch.tsv") + " --classifier-internal " +
                  p("clf.json") + " --classifier-external " + p("clf.json") + " --refs " +
                  p("refs.txt") + " --out " + p("sweep.csv")),
              0);
  }
  static void TearDownTestSuite() { fs::remove_all(work_dir()); }
};

}  // namespace

TEST_F(Pipeline, ArtifactsAndManifestsExist) {
  for (const char* f : {"train.tsv", "test.tsv", "clf.json", "model.json", "batch.tsv",
                        "metrics.json", "sweep.csv"}) {
    EXPECT_TRUE(fs::exists(p(f))) << f;
    EXPECT_TRUE(fs::exists(manifest_path(p(f)))) << f;
    EXPECT_TRUE(verify_manifest(manifest_path(p(f)))) << f;
  }
  EXPECT_TRUE(fs::exists(p("refs.txt")));
  EXPECT_TRUE(fs::exists(p("model.log.csv")));
}

TEST_F(Pipeline, ManifestRecordsSeedAndConfig) {
  const auto j = nlohmann::json::parse(read_text_file(manifest_path(p("model.json"))));
  EXPECT_EQ(j["command"], "train");
  EXPECT_EQ(j["seeds"], nlohmann::json::array({3}));
  EXPECT_EQ(j["config"]["epochs"], 2);
  EXPECT_EQ(j["config"]["arch"], "baseline");
}

TEST_F(Pipeline, RerunsAreByteIdentical) {
  ASSERT_EQ(run("synth --seed 2 --n 20 --out " + p("test2.tsv") + " --refs-out " +
                p("refs2.txt")),
            0);
  ASSERT_EQ(run("train-classifier --corpus " + p("train.tsv") + " --out " + p("clf2.json")), 0);
  ASSERT_EQ(run("train --arch baseline --corpus " + p("train.tsv") + " --seed 3 --out " +
                p("model2.json") + kTiny),
            0);
  ASSERT_EQ(run("transfer --model " + p("model2.json") + " --corpus " + p("test.tsv") +
                " --out " + p("batch2.tsv")),
            0);
  ASSERT_EQ(run("eval --model " + p("model2.json") + " --corpus " + p("test.tsv") + " --refs " +
                p("refs.txt") + " --classifier " + p("clf.json") + " --out " +
                p("metrics2.json")),
            0);
  ASSERT_EQ(run("manipulate --model-output " + p("batch.tsv") + " --classifier-internal " +
                p("clf.json") + " --classifier-external " + p("clf.json") + " --refs " +
                p("refs.txt") + " --out " + p("sweep2.csv")),
            0);
  const std::vector<std::pair<const char*, const char*>> pairs = {
      {"test.tsv", "test2.tsv"},        {"refs.txt", "refs2.txt"},
      {"clf.json", "clf2.json"},        {"model.json", "model2.json"},
      {"model.log.csv", "model2.log.csv"},
      {"batch.tsv", "batch2.tsv"},      {"metrics.json", "metrics2.json"},
      {"sweep.csv", "sweep2.csv"}};
  for (const auto& [a, b] : pairs) {
    EXPECT_EQ(read_text_file(p(a)), read_text_file(p(b))) << a;
  }
}

TEST_F(Pipeline, SweepHasElevenRowsStartingAtEval) {
  const auto rows = lines(read_text_file(p("sweep.csv")));
  ASSERT_EQ(rows.size(), 12u);
  EXPECT_EQ(rows[0], "k,accuracy,self_bleu,ref_bleu");
  const auto metrics = nlohmann::json::parse(read_text_file(p("metrics.json")));
  const auto first = split(rows[1], ',');
  ASSERT_EQ(first.size(), 4u);
  EXPECT_EQ(first[0], "0");
  EXPECT_DOUBLE_EQ(std::stod(first[1]), metrics["accuracy"].get<double>());
  EXPECT_DOUBLE_EQ(std::stod(first[2]), metrics["self_bleu"].get<double>());
  EXPECT_DOUBLE_EQ(std::stod(first[3]), metrics["ref_bleu"].get<double>());
  double prev = -1;
  for (std::size_t k = 1; k < rows.size(); ++k) {
    const auto cells = split(rows[k], ',');
    EXPECT_EQ(cells[0], std::to_string(k - 1));
    const double acc = std::stod(cells[1]);
    EXPECT_GE(acc, prev);
    prev = acc;
  }
}

TEST_F(Pipeline, TransferBatchMatchesModelEval) {
  ASSERT_EQ(run("eval --precomputed " + p("batch.tsv") + " --refs " + p("refs.txt") +
                " --classifier " + p("clf.json") + " --out " + p("metrics_pre.json")),
            0);
  EXPECT_EQ(read_text_file(p("metrics_pre.json")), read_text_file(p("metrics.json")));
}

TEST_F(Pipeline, CopyInputHasFullSelfBleu) {
  std::string tsv;
  for (const auto& item : load_corpus(p("test.tsv")).items) {
    tsv += item.sentence.text() + '\t' + item.sentence.text() + '\n';
  }
  write_text_file(p("copy.tsv"), tsv);
  ASSERT_EQ(run("eval --precomputed " + p("copy.tsv") + " --corpus " + p("test.tsv") +
                " --classifier " + p("clf.json") + " --out " + p("copy.json")),
            0);
  const auto j = nlohmann::json::parse(read_text_file(p("copy.json")));
  EXPECT_DOUBLE_EQ(j["self_bleu"].get<double>(), 100.0);
  // A copied input keeps its source style, so every record the classifier
  // gets right on the corpus is a transfer failure.
  const auto clf = ClassifierModel::load(p("clf.json"));
  EXPECT_NEAR(j["accuracy"].get<double>(),
              1.0 - classifier_accuracy(clf, load_corpus(p("test.tsv"))), 1e-12);
  EXPECT_FALSE(j.contains("ref_bleu"));
}

TEST_F(Pipeline, InputsNotMutated) {
  const auto before = sha256_file(p("train.tsv"));
  const auto model_before = sha256_file(p("model.json"));
  ASSERT_EQ(run("eval --model " + p("model.json") + " --corpus " + p("train.tsv") +
                " --classifier " + p("clf.json") + " --out " + p("metrics_train.json")),
            0);
  EXPECT_EQ(sha256_file(p("train.tsv")), before);
  EXPECT_EQ(sha256_file(p("model.json")), model_before);
}

TEST_F(Pipeline, ValidationErrorsExitTwo) {
  EXPECT_EQ(run("synth --n 9 --out " + p("x.tsv")), 2);
  EXPECT_EQ(run("synth --out /proc/nope/x.tsv"), 2);
  EXPECT_EQ(run("train --arch transformer --corpus " + p("train.tsv") + " --out " + p("m.json")),
            2);
  EXPECT_EQ(run("train --arch baseline --corpus " + p("missing.tsv") + " --out " + p("m.json")),
            2);
  EXPECT_EQ(run("train --arch baseline --corpus " + p("train.tsv") + " --out " + p("m.json") +
                " --set nonsense=1"),
            2);
  EXPECT_EQ(run("eval --model " + p("model.json") + " --precomputed " + p("batch.tsv") +
                " --corpus " + p("test.tsv") + " --classifier " + p("clf.json") + " --out " +
                p("m.json")),
            2);
  EXPECT_EQ(run("bogus-command"), 2);
  EXPECT_EQ(run("ensemble --arch baseline --corpus " + p("train.tsv") + " --classifier " +
                p("clf.json") + " --runs 1 --out " + p("ens1")),
            2);
}

TEST_F(Pipeline, DivergenceExitsThreeWithPartialLog) {
  EXPECT_EQ(run("train --arch baseline --corpus " + p("train.tsv") + " --out " +
                p("diverged.json") + kTiny + " lr=1e300 grad_clip=1e300"),
            3);
  EXPECT_FALSE(fs::exists(p("diverged.json")));
  EXPECT_TRUE(fs::exists(p("diverged.log.csv")));
  EXPECT_EQ(run("ensemble --arch baseline --corpus " + p("train.tsv") + " --classifier " +
                p("clf.json") + " --runs 2 --out " + p("ens_diverged") + kTiny +
                " lr=1e300 grad_clip=1e300"),
            3);
  EXPECT_TRUE(fs::exists(p("ens_diverged/run-0/log.csv")));
  EXPECT_FALSE(fs::exists(p("ens_diverged/ensemble.json")));
}

TEST_F(Pipeline, ConfigFileAndFlagPrecedence) {
  write_text_file(p("over.conf"), "# test overrides\nepochs = 5\nlambda_z = 0.1\n");
  ASSERT_EQ(run("train --arch baseline --corpus " + p("train.tsv") + " --config " +
                p("over.conf") + " --out " + p("mc.json") + kTiny),
            0);
  const auto j = nlohmann::json::parse(read_text_file(p("mc.json")));
  EXPECT_EQ(j["config"]["epochs"], 2);
  EXPECT_DOUBLE_EQ(j["config"]["lambda_z"].get<double>(), 0.1);
}

TEST_F(Pipeline, ShippedConfigsLoad) {
  for (const char* arch : {"baseline", "disc", "sae", "combo"}) {
    const std::string conf = std::string(STYLEBENCH_CONFIGS) + "/desk-" + arch + ".conf";
    EXPECT_EQ(run(std::string("train --arch ") + arch + " --corpus " + p("train.tsv") +
                  " --config " + conf + " --out " + p(std::string("desk-") + arch + ".json") +
                  kTiny),
              0)
        << arch;
  }
}

TEST_F(Pipeline, EnsembleWritesRunsAndAggregate) {
  const std::string args = "ensemble --arch baseline --corpus " + p("train.tsv") +
                           " --test-corpus " + p("test.tsv") + " --refs " + p("refs.txt") +
                           " --classifier " + p("clf.json") + " --runs 5 --seed-base 20" + kTiny;
  ASSERT_EQ(run(args + " --out " + p("ens")), 0);
  const auto report = nlohmann::json::parse(read_text_file(p("ens/ensemble.json")));
  ASSERT_EQ(report["runs"].size(), 5u);
  double acc = 0, self = 0, ref = 0;
  for (int seed = 20; seed < 25; ++seed) {
    const fs::path dir = work_dir() / "ens" / ("run-" + std::to_string(seed));
    for (const char* f : {"log.csv", "model.json", "batch.tsv", "metrics.json"}) {
      EXPECT_TRUE(fs::exists(dir / f)) << dir / f;
    }
    const auto m = nlohmann::json::parse(read_text_file(dir / "metrics.json"));
    acc += m["accuracy"].get<double>() / 5;
    self += m["self_bleu"].get<double>() / 5;
    ref += m["ref_bleu"].get<double>() / 5;
  }
  EXPECT_NEAR(report["aggregate"]["accuracy"]["mean"].get<double>(), acc, 1e-9);
  EXPECT_NEAR(report["aggregate"]["self_bleu"]["mean"].get<double>(), self, 1e-9);
  EXPECT_NEAR(report["aggregate"]["ref_bleu"]["mean"].get<double>(), ref, 1e-9);
  EXPECT_TRUE(verify_manifest(manifest_path(p("ens/ensemble.json"))));

  // A trailing slash names the same directory.
  ASSERT_EQ(run(args + " --jobs 2 --out " + p("ens_again") + "/"), 0);
  EXPECT_EQ(read_text_file(p("ens/ensemble.json")), read_text_file(p("ens_again/ensemble.json")));
  EXPECT_EQ(read_text_file(p("ens/run-22/model.json")),
            read_text_file(p("ens_again/run-22/model.json")));
}

TEST_F(Pipeline, EnsembleRecordReproducibleFromSeed) {
  // A single train + eval with the logged seed reproduces the run's artifacts.
  ASSERT_EQ(run("ensemble --arch baseline --corpus " + p("train.tsv") + " --test-corpus " +
                p("test.tsv") + " --refs " + p("refs.txt") + " --classifier " + p("clf.json") +
                " --runs 2 --seed-base 30 --out " + p("ens_pair") + kTiny),
            0);
  ASSERT_EQ(run("train --arch baseline --corpus " + p("train.tsv") + " --seed 31 --out " +
                p("seed31.json") + kTiny),
            0);
  ASSERT_EQ(run("eval --model " + p("seed31.json") + " --corpus " + p("test.tsv") + " --refs " +
                p("refs.txt") + " --classifier " + p("clf.json") + " --out " + p("seed31m.json")),
            0);
  EXPECT_EQ(read_text_file(p("seed31m.json")), read_text_file(p("ens_pair/run-31/metrics.json")));
  EXPECT_EQ(read_text_file(p("seed31.json")), read_text_file(p("ens_pair/run-31/model.json")));
}
