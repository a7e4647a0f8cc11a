#include <gtest/gtest.h>

#include <cmath>

#include "bleu_fixtures.hpp"
#include "json.hpp"
#include "stylebench/errors.hpp"
#include "stylebench/metrics.hpp"
#include "stylebench/random.hpp"

using namespace stylebench;

namespace {

Sentence T(const char* text) { return tokenize(text); }

TransferRecord rec(const char* input, int source, const char* output) {
  return make_record(T(input), source, T(output));
}

std::vector<Sentence> random_corpus(Rng& rng, std::size_t n, std::size_t min_len,
                                    std::size_t alphabet = 5) {
  static const std::vector<std::string> all = {"a", "b", "c", "d", "e"};
  const std::vector<std::string> words(all.begin(), all.begin() + static_cast<long>(alphabet));
  std::vector<Sentence> out(n);
  for (auto& s : out) {
    const std::size_t len = min_len + rng.below(6);
    for (std::size_t i = 0; i < len; ++i) s.tokens.push_back(words[rng.below(words.size())]);
  }
  return out;
}

}  // namespace

TEST(ModifiedPrecision, ClipsRepeatedUnigram) {
  const auto m = modified_precision({T("the the the the the the the")},
                                    {T("the cat is on the mat")}, 1);
  EXPECT_EQ(m, (NgramMatch{2, 7}));
}

TEST(ModifiedPrecision, IdentityCountsEverything) {
  const Sentence s = T("a b c d e");
  for (int n = 1; n <= 4; ++n) {
    const auto m = modified_precision({s}, {s}, n);
    EXPECT_EQ(m.clipped, m.total);
    EXPECT_EQ(m.total, static_cast<std::size_t>(6 - n));
  }
}

TEST(ModifiedPrecision, Disjoint) {
  EXPECT_EQ(modified_precision({T("a b")}, {T("c d")}, 1), (NgramMatch{0, 2}));
}

TEST(ModifiedPrecision, MisalignedThrows) {
  EXPECT_THROW(modified_precision({T("a")}, {}, 1), AlignmentError);
  EXPECT_THROW(modified_precision({}, {}, 1), AlignmentError);
  EXPECT_THROW(corpus_bleu({T("a"), T("b")}, {T("a")}), AlignmentError);
}

TEST(CorpusBleu, FixturesMatchHandCounts) {
  for (const auto& c : fixtures::bleu_cases()) {
    const auto hyps = fixtures::sentences(c.hyps);
    const auto refs = fixtures::sentences(c.refs);
    const double got = c.kind == fixtures::Kind::kCorpus
                           ? corpus_bleu(hyps, refs).score
                           : sentence_bleu_smoothed(hyps[0], refs[0]);
    EXPECT_NEAR(got, c.expected, 1e-9) << c.name;
  }
}

TEST(CorpusBleu, BrevityPenaltyExpMinusOne) {
  const auto r = corpus_bleu({T("a b c d e")}, {T("a b c d e f g h i j")});
  EXPECT_NEAR(r.brevity_penalty, std::exp(-1.0), 1e-12);
  EXPECT_NEAR(r.brevity_penalty, 0.36788, 1e-5);
  EXPECT_NEAR(r.score, 36.788, 1e-3);
  for (double p : r.precisions) EXPECT_DOUBLE_EQ(p, 1.0);
}

TEST(CorpusBleu, EmptyHypothesisReportsIndex) {
  try {
    corpus_bleu({T("a"), Sentence{}}, {T("a"), T("b")});
    FAIL();
  } catch (const EmptyHypothesis& e) {
    EXPECT_NE(std::string(e.what()).find('1'), std::string::npos);
  }
}

TEST(CorpusBleu, JsonFields) {
  const auto j = nlohmann::json::parse(corpus_bleu({T("a b c d")}, {T("a b c d")}).to_json());
  for (const char* k : {"p1", "p2", "p3", "p4", "bp", "score"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_DOUBLE_EQ(j["score"].get<double>(), 100.0);
}

TEST(CorpusBleu, PermutationInvariant) {
  Rng rng(4, "bleu-perm");
  for (int trial = 0; trial < 50; ++trial) {
    auto hyps = random_corpus(rng, 6, 4);
    auto refs = random_corpus(rng, 6, 4);
    const double before = corpus_bleu(hyps, refs).score;
    std::vector<std::size_t> order = {0, 1, 2, 3, 4, 5};
    rng.shuffle(std::span(order));
    std::vector<Sentence> h2, r2;
    for (auto i : order) {
      h2.push_back(hyps[i]);
      r2.push_back(refs[i]);
    }
    EXPECT_NEAR(corpus_bleu(h2, r2).score, before, 1e-9);
  }
}

TEST(CorpusBleu, DuplicationInvariant) {
  Rng rng(5, "bleu-dup");
  for (int trial = 0; trial < 50; ++trial) {
    auto hyps = random_corpus(rng, 4, 4);
    auto refs = random_corpus(rng, 4, 4);
    const double before = corpus_bleu(hyps, refs).score;
    auto h2 = hyps, r2 = refs;
    h2.insert(h2.end(), hyps.begin(), hyps.end());
    r2.insert(r2.end(), refs.begin(), refs.end());
    EXPECT_NEAR(corpus_bleu(h2, r2).score, before, 1e-9);
  }
}

TEST(CorpusBleu, ClippedNeverExceedsTotal) {
  Rng rng(6, "bleu-clip");
  for (int trial = 0; trial < 100; ++trial) {
    auto hyps = random_corpus(rng, 3, 1);
    auto refs = random_corpus(rng, 3, 1);
    for (int n = 1; n <= 4; ++n) {
      const auto m = modified_precision(hyps, refs, n);
      EXPECT_LE(m.clipped, m.total);
    }
  }
}

TEST(SentenceBleu, SmoothedOracle) {
  EXPECT_NEAR(sentence_bleu_smoothed(T("a b c d"), T("a b c e")), 59.46, 5e-3);
}

TEST(SentenceBleu, Identity) {
  EXPECT_DOUBLE_EQ(sentence_bleu_smoothed(T("a b c d"), T("a b c d")), 100.0);
}

TEST(SentenceBleu, UnigramNeverSmoothed) {
  EXPECT_DOUBLE_EQ(sentence_bleu_smoothed(T("x"), T("y")), 0.0);
}

TEST(SentenceBleu, AgreesWithCorpusWhenAllPrecisionsPositive) {
  Rng rng(7, "bleu-agree");
  int compared = 0;
  for (int trial = 0; trial < 400; ++trial) {
    auto h = random_corpus(rng, 1, 4, 2)[0];
    auto r = random_corpus(rng, 1, 4, 2)[0];
    const auto report = corpus_bleu({h}, {r});
    bool all_positive = true;
    for (double p : report.precisions) all_positive = all_positive && p > 0;
    if (!all_positive) continue;
    ++compared;
    EXPECT_NEAR(sentence_bleu_smoothed(h, r), report.score, 1e-9);
  }
  EXPECT_GT(compared, 10);
}

TEST(TransferAccuracy, AllCorrect) {
  const ClassifierModel clf({{"good", 5.0}, {"bad", -5.0}}, 0.0);
  TransferBatch b;
  b.records = {rec("bad food", 0, "good food"), rec("good food", 1, "bad food")};
  EXPECT_DOUBLE_EQ(transfer_accuracy(b, clf), 1.0);
}

TEST(TransferAccuracy, Half) {
  const ClassifierModel clf({{"good", 5.0}, {"bad", -5.0}}, 0.0);
  TransferBatch b;
  b.records = {rec("bad food", 0, "good food"), rec("good food", 1, "good food")};
  EXPECT_DOUBLE_EQ(transfer_accuracy(b, clf), 0.5);
}

TEST(TransferAccuracy, BruteForceOracle) {
  const ClassifierModel clf({{"good", 2.0}, {"bad", -3.0}, {"food", 0.5}}, -0.25);
  TransferBatch b;
  b.records = {rec("x", 0, "good bad"), rec("y", 1, "food"), rec("z", 0, "bad food good")};
  // logits: 2-3-0.25 < 0 -> 0 (target 1, wrong); 0.5-0.25 > 0 -> 1 (target 0,
  // wrong); -3+0.5+2-0.25 < 0 -> 0 (target 1, wrong)
  std::size_t hits = 0;
  for (const auto& r : b.records) {
    double z = clf.bias();
    for (const auto& t : r.output.tokens) {
      if (auto it = clf.weights().find(t); it != clf.weights().end()) z += it->second;
    }
    hits += (z >= 0 ? 1 : 0) == r.target.label();
  }
  EXPECT_DOUBLE_EQ(transfer_accuracy(b, clf), static_cast<double>(hits) / 3.0);
}

TEST(TransferAccuracy, EmptyBatchThrows) {
  EXPECT_THROW(transfer_accuracy(TransferBatch{}, ClassifierModel{}), EmptyBatch);
}

TEST(EvaluateBatch, RefBleuOnlyWithRefs) {
  const ClassifierModel clf({{"good", 5.0}, {"bad", -5.0}}, 0.0);
  TransferBatch b;
  b.records = {rec("bad food", 0, "good food")};
  const auto without = evaluate_batch(b, clf, nullptr);
  EXPECT_FALSE(without.ref_bleu.has_value());
  EXPECT_FALSE(nlohmann::json::parse(without.to_json()).contains("ref_bleu"));
  const std::vector<Sentence> refs = {T("good food")};
  const auto with = evaluate_batch(b, clf, &refs);
  ASSERT_TRUE(with.ref_bleu.has_value());
  EXPECT_TRUE(nlohmann::json::parse(with.to_json()).contains("ref_bleu"));
}

TEST(EvaluateBatch, CopyInputGivesFullSelfBleu) {
  const ClassifierModel clf({{"good", 5.0}, {"bad", -5.0}}, 0.0);
  TransferBatch b;
  b.records = {rec("the food was bad", 0, "the food was bad"),
               rec("the food was good", 1, "the food was good")};
  const auto m = evaluate_batch(b, clf, nullptr);
  EXPECT_DOUBLE_EQ(m.self_bleu, 100.0);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.0);
}
