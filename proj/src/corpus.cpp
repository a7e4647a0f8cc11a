#include "stylebench/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "stylebench/errors.hpp"
#include "stylebench/random.hpp"

namespace stylebench {
namespace {

constexpr std::string_view kPunctuation = ".,!?;:";
const std::array<std::string, kNumSpecials> kSpecialTokens = {
    "<pad>", "<unk>", "<bos>", "<eos>"};

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::vector<std::string_view> split_lines(std::string_view contents) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= contents.size()) {
    std::size_t end = contents.find('\n', start);
    if (end == std::string_view::npos) end = contents.size();
    std::string_view line = contents.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  if (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), is_space);
}

// Positive/negative adjective pairs; index i of one is the antonym of index i
// of the other.
constexpr std::array<std::string_view, 8> kPositive = {
    "good", "great", "tasty", "friendly",
    "amazing", "fresh", "excellent", "clean"};
constexpr std::array<std::string_view, 8> kNegative = {
    "bad", "awful", "bland", "rude", "terrible", "stale", "poor", "dirty"};
constexpr std::array<std::string_view, 12> kNouns = {
    "food",  "service", "staff", "pizza", "place", "waiter",
    "coffee", "bread",  "pasta", "salad", "soup",  "bar"};
// '#' marks the noun slot, '@' the adjective slot.
constexpr std::array<std::string_view, 4> kTemplates = {
    "the # was @", "the # is @", "the # was really @", "our # was very @"};

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << data;
  if (!out) throw ValidationError("write failed for " + path.string());
}

std::string Sentence::text() const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::size_t LabeledCorpus::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(items.begin(), items.end(),
                    [label](const LabeledItem& it) { return it.label == label; }));
}

LabeledCorpus LabeledCorpus::flipped() const {
  LabeledCorpus out = *this;
  for (auto& item : out.items) item.label = 1 - item.label;
  return out;
}

Sentence tokenize(std::string_view text) {
  Sentence s;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) s.tokens.push_back(std::move(current));
    current.clear();
  };
  for (char c : text) {
    if (is_space(c)) {
      flush();
    } else if (kPunctuation.find(c) != std::string_view::npos) {
      flush();
      s.tokens.emplace_back(1, c);
    } else {
      current += static_cast<char>(
          std::tolower(static_cast<unsigned char>(c)));
    }
  }
  flush();
  if (s.tokens.empty()) throw EmptySentence();
  return s;
}

LabeledCorpus parse_corpus(std::string_view contents) {
  LabeledCorpus corpus;
  const auto lines = split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string_view line = lines[i];
    if (is_blank(line)) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ParseError(i + 1, "expected <label>\\t<text>");
    }
    const std::string_view label = line.substr(0, tab);
    if (label != "0" && label != "1") {
      throw ParseError(i + 1, "label must be 0 or 1, got '" +
                                  std::string(label) + "'");
    }
    Sentence s;
    try {
      s = tokenize(line.substr(tab + 1));
    } catch (const EmptySentence&) {
      throw ParseError(i + 1, "empty text");
    }
    corpus.items.push_back({std::move(s), label == "1" ? 1 : 0});
  }
  if (corpus.empty()) throw EmptyCorpus("no items");
  return corpus;
}

LabeledCorpus load_corpus(const std::filesystem::path& path) {
  try {
    return parse_corpus(read_text_file(path));
  } catch (const EmptyCorpus&) {
    throw EmptyCorpus(path.string());
  }
}

std::string format_corpus(const LabeledCorpus& corpus) {
  std::string out;
  for (const auto& item : corpus.items) {
    out += item.label == 1 ? '1' : '0';
    out += '\t';
    out += item.sentence.text();
    out += '\n';
  }
  return out;
}

void save_corpus(const LabeledCorpus& corpus,
                 const std::filesystem::path& path) {
  write_text_file(path, format_corpus(corpus));
}

std::vector<Sentence> load_references(const std::filesystem::path& path) {
  std::vector<Sentence> refs;
  const std::string contents = read_text_file(path);
  const auto lines = split_lines(contents);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    try {
      refs.push_back(tokenize(lines[i]));
    } catch (const EmptySentence&) {
      throw ParseError(i + 1, "blank reference line");
    }
  }
  return refs;
}

void save_references(const std::vector<Sentence>& refs,
                     const std::filesystem::path& path) {
  std::string out;
  for (const auto& r : refs) out += r.text() + '\n';
  write_text_file(path, out);
}

Vocab::Vocab() : Vocab(std::vector<std::string>{}) {}

Vocab::Vocab(const std::vector<std::string>& tokens) {
  token_of_.assign(kSpecialTokens.begin(), kSpecialTokens.end());
  for (int id = 0; id < kNumSpecials; ++id) id_of_[token_of_[id]] = id;
  for (const auto& t : tokens) {
    if (id_of_.contains(t)) {
      throw ConfigError("duplicate vocabulary token '" + t + "'");
    }
    id_of_[t] = static_cast<int>(token_of_.size());
    token_of_.push_back(t);
  }
}

int Vocab::id_of(std::string_view token) const {
  auto it = id_of_.find(std::string(token));
  return it == id_of_.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= token_of_.size()) {
    return token_of_[kUnk];
  }
  return token_of_[static_cast<std::size_t>(id)];
}

bool Vocab::contains(std::string_view token) const {
  return id_of_.contains(std::string(token));
}

std::vector<std::string> Vocab::tokens() const {
  return {token_of_.begin() + kNumSpecials, token_of_.end()};
}

Vocab build_vocab(const LabeledCorpus& corpus, std::size_t max_size) {
  if (max_size < kNumSpecials + 1) {
    throw ConfigError("vocabulary max_size must be >= 5");
  }
  std::map<std::string, std::size_t> freq;
  for (const auto& item : corpus.items) {
    for (const auto& t : item.sentence.tokens) ++freq[t];
  }
  for (const auto& special : kSpecialTokens) freq.erase(special);
  std::vector<std::pair<std::string, std::size_t>> ranked(freq.begin(),
                                                          freq.end());
  // std::map iteration is already lexicographic; stable sort keeps that order
  // among equal counts.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kNumSpecials);
  std::vector<std::string> tokens;
  tokens.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) tokens.push_back(ranked[i].first);
  return Vocab(tokens);
}

std::vector<int> encode_ids(const Vocab& vocab, const Sentence& s,
                            std::size_t max_len) {
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  std::vector<int> ids;
  ids.reserve(max_len);
  ids.push_back(kBos);
  for (const auto& t : s.tokens) {
    if (ids.size() + 1 >= max_len) break;
    ids.push_back(vocab.id_of(t));
  }
  ids.push_back(kEos);
  ids.resize(max_len, kPad);
  return ids;
}

Sentence decode_ids(const Vocab& vocab, const std::vector<int>& ids) {
  Sentence s;
  for (int id : ids) {
    if (id == kEos) break;
    if (id == kPad || id == kBos) continue;
    s.tokens.push_back(vocab.token_of(id));
  }
  return s;
}

LabeledCorpus synth_corpus(std::uint64_t seed, std::size_t n) {
  if (n < 20 || n % 2 != 0) {
    throw ConfigError("synthetic corpus size must be even and >= 20, got " +
                      std::to_string(n));
  }
  Rng rng(seed, "synth");
  std::vector<int> labels(n, 0);
  std::fill(labels.begin(), labels.begin() + static_cast<long>(n / 2), 1);
  rng.shuffle(std::span<int>(labels));

  LabeledCorpus corpus;
  corpus.items.reserve(n);
  for (int label : labels) {
    const auto& tmpl = kTemplates[rng.below(kTemplates.size())];
    const auto& noun = kNouns[rng.below(kNouns.size())];
    const auto& lexicon = label == 1 ? kPositive : kNegative;
    const auto& adj = lexicon[rng.below(lexicon.size())];
    std::string text;
    for (char c : tmpl) {
      if (c == '#') {
        text += noun;
      } else if (c == '@') {
        text += adj;
      } else {
        text += c;
      }
    }
    corpus.items.push_back({tokenize(text), label});
  }
  return corpus;
}

std::vector<Sentence> synth_references(const LabeledCorpus& corpus) {
  std::unordered_map<std::string, std::string> antonym;
  for (std::size_t i = 0; i < kPositive.size(); ++i) {
    antonym.emplace(kPositive[i], kNegative[i]);
    antonym.emplace(kNegative[i], kPositive[i]);
  }
  std::vector<Sentence> refs;
  refs.reserve(corpus.size());
  for (const auto& item : corpus.items) {
    Sentence r = item.sentence;
    for (auto& t : r.tokens) {
      if (auto it = antonym.find(t); it != antonym.end()) t = it->second;
    }
    refs.push_back(std::move(r));
  }
  return refs;
}

}  // namespace stylebench
