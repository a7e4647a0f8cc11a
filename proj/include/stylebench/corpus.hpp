#ifndef STYLEBENCH_CORPUS_HPP_
#define STYLEBENCH_CORPUS_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace stylebench {

struct Sentence {
  std::vector<std::string> tokens;

  bool empty() const { return tokens.empty(); }
  std::size_t size() const { return tokens.size(); }
  // Tokens joined by single spaces.
  std::string text() const;

  friend bool operator==(const Sentence&, const Sentence&) = default;
};

struct LabeledItem {
  Sentence sentence;
  int label = 0;

  friend bool operator==(const LabeledItem&, const LabeledItem&) = default;
};

struct LabeledCorpus {
  std::vector<LabeledItem> items;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
  std::size_t count_label(int label) const;
  // Same sentences with every label complemented.
  LabeledCorpus flipped() const;

  friend bool operator==(const LabeledCorpus&, const LabeledCorpus&) = default;
};

// Lowercases ASCII, isolates . , ! ? ; : as tokens, splits on whitespace.
// Throws EmptySentence when nothing remains.
Sentence tokenize(std::string_view text);

// Whole-file text I/O; failures throw ValidationError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& data);

// Reads `<label>\t<text>` lines; blank lines are skipped.
LabeledCorpus load_corpus(const std::filesystem::path& path);
LabeledCorpus parse_corpus(std::string_view contents);
void save_corpus(const LabeledCorpus& corpus,
                 const std::filesystem::path& path);
std::string format_corpus(const LabeledCorpus& corpus);

// One tokenized rewrite per line, aligned with a test corpus.
std::vector<Sentence> load_references(const std::filesystem::path& path);
void save_references(const std::vector<Sentence>& refs,
                     const std::filesystem::path& path);

enum SpecialId : int { kPad = 0, kUnk = 1, kBos = 2, kEos = 3 };
inline constexpr int kNumSpecials = 4;

class Vocab {
 public:
  // Specials only.
  Vocab();
  // `tokens` are the non-special entries in id order (ids 4, 5, ...).
  explicit Vocab(const std::vector<std::string>& tokens);

  std::size_t size() const { return token_of_.size(); }
  int id_of(std::string_view token) const;  // kUnk when absent
  const std::string& token_of(int id) const;
  bool contains(std::string_view token) const;
  // Non-special entries in id order.
  std::vector<std::string> tokens() const;

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.token_of_ == b.token_of_;
  }

 private:
  std::vector<std::string> token_of_;
  std::unordered_map<std::string, int> id_of_;
};

// Keeps the max_size-4 most frequent tokens, ties broken lexicographically.
Vocab build_vocab(const LabeledCorpus& corpus, std::size_t max_size);

// BOS + ids + EOS, truncated to max_len with EOS kept last, PAD to max_len.
std::vector<int> encode_ids(const Vocab& vocab, const Sentence& s,
                            std::size_t max_len);
// Drops PAD/BOS and stops at EOS; UNK stays as the "<unk>" token.
Sentence decode_ids(const Vocab& vocab, const std::vector<int>& ids);

// Balanced template corpus ("the <noun> was <adj>" and variants) where label 1
// draws adjectives from a positive lexicon and label 0 from a negative one.
LabeledCorpus synth_corpus(std::uint64_t seed, std::size_t n);
// Gold rewrites of a synthetic corpus: every sentiment adjective replaced by
// its antonym, everything else kept.
std::vector<Sentence> synth_references(const LabeledCorpus& corpus);

}  // namespace stylebench

#endif  // STYLEBENCH_CORPUS_HPP_
