#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "stylebench/corpus.hpp"
#include "stylebench/errors.hpp"
#include "stylebench/random.hpp"

using namespace stylebench;

namespace {

Sentence S(std::initializer_list<const char*> toks) {
  Sentence s;
  for (const char* t : toks) s.tokens.emplace_back(t);
  return s;
}

LabeledCorpus corpus_of(std::initializer_list<std::pair<int, const char*>> items) {
  LabeledCorpus c;
  for (auto [label, text] : items) c.items.push_back({tokenize(text), label});
  return c;
}

std::filesystem::path temp_file(const std::string& name, const std::string& body) {
  auto p = std::filesystem::temp_directory_path() / ("stylebench_corpus_" + name);
  std::ofstream(p, std::ios::binary) << body;
  return p;
}

}  // namespace

TEST(Tokenize, IsolatesPunctuationAndLowercases) {
  EXPECT_EQ(tokenize("Great food!"), S({"great", "food", "!"}));
}

TEST(Tokenize, CollapsesWhitespace) {
  EXPECT_EQ(tokenize("a  b"), S({"a", "b"}));
}

TEST(Tokenize, TrailingPeriod) {
  EXPECT_EQ(tokenize("i love it."), S({"i", "love", "it", "."}));
}

TEST(Tokenize, BlankInputThrows) {
  EXPECT_THROW(tokenize(""), EmptySentence);
  EXPECT_THROW(tokenize(" \t \n"), EmptySentence);
}

TEST(Tokenize, AllPunctuationMarks) {
  EXPECT_EQ(tokenize("a,b;c:d?e"), S({"a", ",", "b", ";", "c", ":", "d", "?", "e"}));
}

TEST(LoadCorpus, TwoItems) {
  auto p = temp_file("two.tsv", "1\tgreat food\n0\tbad service");
  const LabeledCorpus c = load_corpus(p);
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c.items[0].label, 1);
  EXPECT_EQ(c.items[1].label, 0);
  EXPECT_EQ(c.items[1].sentence, S({"bad", "service"}));
}

TEST(LoadCorpus, BadLabelReportsLine) {
  auto p = temp_file("bad.tsv", "2\tx");
  try {
    load_corpus(p);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 1u);
  }
}

TEST(LoadCorpus, BadLabelOnLaterLine) {
  try {
    parse_corpus("1\ta\n\n0\tb\nx\tc\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(LoadCorpus, BlankLineSkipped) {
  auto p = temp_file("blank.tsv", "1\tgreat food\n\n0\tbad service\n");
  EXPECT_EQ(load_corpus(p).size(), 2u);
}

TEST(LoadCorpus, EmptyFileThrows) {
  auto p = temp_file("empty.tsv", "");
  EXPECT_THROW(load_corpus(p), EmptyCorpus);
}

TEST(LoadCorpus, SaveRoundTripIsByteIdentical) {
  const LabeledCorpus c = synth_corpus(3, 40);
  auto p = std::filesystem::temp_directory_path() / "stylebench_corpus_rt.tsv";
  save_corpus(c, p);
  const std::string first = read_text_file(p);
  const LabeledCorpus back = load_corpus(p);
  EXPECT_EQ(back, c);
  save_corpus(back, p);
  EXPECT_EQ(read_text_file(p), first);
}

TEST(BuildVocab, KeepsMostFrequent) {
  // a:3 b:2 c:1
  const auto c = corpus_of({{1, "a a a b"}, {0, "b c"}});
  const Vocab v = build_vocab(c, 6);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"a", "b"}));
}

TEST(BuildVocab, TiesAreLexicographic) {
  const auto c = corpus_of({{1, "b"}, {0, "a"}});
  const Vocab v = build_vocab(c, 6);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"a", "b"}));
}

TEST(BuildVocab, CapacityFive) {
  const Vocab v = build_vocab(synth_corpus(1, 20), 5);
  EXPECT_EQ(v.tokens().size(), 1u);
  EXPECT_EQ(v.size(), 5u);
}

TEST(BuildVocab, TooSmallThrows) {
  EXPECT_THROW(build_vocab(synth_corpus(1, 20), 4), ConfigError);
}

TEST(BuildVocab, SpecialsFixed) {
  const Vocab v = build_vocab(synth_corpus(1, 20), 100);
  EXPECT_EQ(v.token_of(kPad), "<pad>");
  EXPECT_EQ(v.token_of(kUnk), "<unk>");
  EXPECT_EQ(v.token_of(kBos), "<bos>");
  EXPECT_EQ(v.token_of(kEos), "<eos>");
  EXPECT_EQ(v.id_of("never-seen"), kUnk);
}

TEST(EncodeIds, SingleToken) {
  const Vocab v({"a"});
  EXPECT_EQ(encode_ids(v, S({"a"}), 4), (std::vector<int>{2, 4, 3, 0}));
}

TEST(EncodeIds, UnknownToken) {
  const Vocab v({"a"});
  EXPECT_EQ(encode_ids(v, S({"zzz"}), 3), (std::vector<int>{2, 1, 3}));
}

TEST(EncodeIds, TruncationKeepsEos) {
  const Vocab v({"a", "b", "c"});
  Sentence s;
  for (int i = 0; i < 10; ++i) s.tokens.push_back(i % 2 ? "b" : "a");
  EXPECT_EQ(encode_ids(v, s, 4), (std::vector<int>{kBos, 4, 5, kEos}));
}

TEST(EncodeIds, DecodeRoundTripProperty) {
  Rng rng(11, "prop");
  const std::vector<std::string> pool = {"a", "b", "c", "d", "oov1", "oov2"};
  const Vocab v({"a", "b", "c", "d"});
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t max_len = 2 + rng.below(10);
    Sentence s;
    const std::size_t n = 1 + rng.below(max_len);
    for (std::size_t i = 0; i < n && i + 2 < max_len; ++i) {
      s.tokens.push_back(pool[rng.below(pool.size())]);
    }
    if (s.empty()) continue;
    Sentence expected = s;
    for (auto& t : expected.tokens) {
      if (!v.contains(t)) t = "<unk>";
    }
    EXPECT_EQ(decode_ids(v, encode_ids(v, s, max_len)), expected);
  }
}

TEST(SynthCorpus, Deterministic) {
  EXPECT_EQ(format_corpus(synth_corpus(7, 20)), format_corpus(synth_corpus(7, 20)));
}

TEST(SynthCorpus, Balanced) {
  const auto c = synth_corpus(7, 20);
  EXPECT_EQ(c.count_label(0), 10u);
  EXPECT_EQ(c.count_label(1), 10u);
}

TEST(SynthCorpus, SeedsDiffer) {
  EXPECT_NE(format_corpus(synth_corpus(7, 20)), format_corpus(synth_corpus(8, 20)));
}

TEST(SynthCorpus, InvalidSizes) {
  EXPECT_THROW(synth_corpus(7, 9), ConfigError);
  EXPECT_THROW(synth_corpus(7, 21), ConfigError);
  EXPECT_THROW(synth_corpus(7, 18), ConfigError);
}

TEST(SynthCorpus, ReferencesFlipSentimentOnly) {
  const auto c = synth_corpus(5, 40);
  const auto refs = synth_references(c);
  ASSERT_EQ(refs.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& a = c.items[i].sentence.tokens;
    const auto& b = refs[i].tokens;
    ASSERT_EQ(a.size(), b.size());
    int changed = 0;
    for (std::size_t j = 0; j < a.size(); ++j) changed += a[j] != b[j];
    EXPECT_EQ(changed, 1) << c.items[i].sentence.text();
  }
}

TEST(SynthCorpus, ReferencesInvolution) {
  const auto c = synth_corpus(5, 40);
  LabeledCorpus flipped;
  const auto refs = synth_references(c);
  for (std::size_t i = 0; i < c.size(); ++i) {
    flipped.items.push_back({refs[i], 1 - c.items[i].label});
  }
  const auto back = synth_references(flipped);
  for (std::size_t i = 0; i < c.size(); ++i) EXPECT_EQ(back[i], c.items[i].sentence);
}
