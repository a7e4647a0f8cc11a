#include "stylebench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "json.hpp"
#include "stylebench/errors.hpp"

namespace stylebench {
namespace {

using NgramCounts = std::map<std::string, std::size_t>;

NgramCounts count_ngrams(const Sentence& s, int n) {
  NgramCounts counts;
  const std::size_t len = s.tokens.size();
  const auto un = static_cast<std::size_t>(n);
  if (len < un) return counts;
  for (std::size_t i = 0; i + un <= len; ++i) {
    std::string key = s.tokens[i];
    for (std::size_t k = 1; k < un; ++k) {
      key += '\x1f';
      key += s.tokens[i + k];
    }
    ++counts[key];
  }
  return counts;
}

NgramMatch sentence_match(const Sentence& hyp, const Sentence& ref, int n) {
  const NgramCounts h = count_ngrams(hyp, n);
  const NgramCounts r = count_ngrams(ref, n);
  NgramMatch m;
  for (const auto& [gram, count] : h) {
    m.total += count;
    if (auto it = r.find(gram); it != r.end()) {
      m.clipped += std::min(count, it->second);
    }
  }
  return m;
}

double brevity_penalty(std::size_t hyp_len, std::size_t ref_len) {
  if (hyp_len >= ref_len) return 1.0;
  return std::exp(1.0 - static_cast<double>(ref_len) /
                            static_cast<double>(hyp_len));
}

BleuReport finalize(const std::array<double, kMaxNgram>& precisions,
                    std::size_t hyp_len, std::size_t ref_len) {
  BleuReport report;
  report.precisions = precisions;
  report.brevity_penalty = brevity_penalty(hyp_len, ref_len);
  double log_sum = 0.0;
  for (double p : precisions) {
    if (p <= 0.0) {
      report.score = 0.0;
      return report;
    }
    log_sum += std::log(p);
  }
  report.score =
      report.brevity_penalty * std::exp(log_sum / kMaxNgram) * 100.0;
  return report;
}

void check_aligned(const std::vector<Sentence>& hyps,
                   const std::vector<Sentence>& refs) {
  if (hyps.size() != refs.size() || hyps.empty()) {
    throw AlignmentError(hyps.size(), refs.size());
  }
}

}  // namespace

std::string BleuReport::to_json() const {
  nlohmann::ordered_json j;
  for (int n = 0; n < kMaxNgram; ++n) {
    j["p" + std::to_string(n + 1)] = precisions[static_cast<std::size_t>(n)];
  }
  j["bp"] = brevity_penalty;
  j["score"] = score;
  return j.dump();
}

NgramMatch modified_precision(const std::vector<Sentence>& hyps,
                              const std::vector<Sentence>& refs, int n) {
  check_aligned(hyps, refs);
  if (n < 1 || n > kMaxNgram) throw ConfigError("n-gram order must be 1..4");
  NgramMatch total;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    const NgramMatch m = sentence_match(hyps[i], refs[i], n);
    total.clipped += m.clipped;
    total.total += m.total;
  }
  return total;
}

BleuReport corpus_bleu(const std::vector<Sentence>& hyps,
                       const std::vector<Sentence>& refs) {
  check_aligned(hyps, refs);
  std::size_t hyp_len = 0;
  std::size_t ref_len = 0;
  for (std::size_t i = 0; i < hyps.size(); ++i) {
    if (hyps[i].empty()) throw EmptyHypothesis(i);
    hyp_len += hyps[i].size();
    ref_len += refs[i].size();
  }
  std::array<double, kMaxNgram> p{};
  for (int n = 1; n <= kMaxNgram; ++n) {
    const NgramMatch m = modified_precision(hyps, refs, n);
    p[static_cast<std::size_t>(n - 1)] =
        m.total == 0 ? 0.0
                     : static_cast<double>(m.clipped) /
                           static_cast<double>(m.total);
  }
  return finalize(p, hyp_len, ref_len);
}

double sentence_bleu_smoothed(const Sentence& hyp, const Sentence& ref) {
  if (hyp.empty()) throw EmptyHypothesis(0);
  if (ref.empty()) throw EmptySentence();
  std::array<double, kMaxNgram> p{};
  for (int n = 1; n <= kMaxNgram; ++n) {
    const NgramMatch m = sentence_match(hyp, ref, n);
    double num = static_cast<double>(m.clipped);
    double den = static_cast<double>(m.total);
    if (n >= 2 && m.clipped == 0) {
      num += 1.0;
      den += 1.0;
    }
    p[static_cast<std::size_t>(n - 1)] = den == 0.0 ? 0.0 : num / den;
  }
  return finalize(p, hyp.size(), ref.size()).score;
}

double transfer_accuracy(const TransferBatch& batch,
                         const ClassifierModel& clf) {
  if (batch.empty()) throw EmptyBatch();
  std::size_t hits = 0;
  for (const auto& r : batch.records) {
    if (clf.predict(r.output).code == r.target.label()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(batch.size());
}

std::string EvalMetrics::to_json() const {
  nlohmann::ordered_json j;
  j["accuracy"] = accuracy;
  j["self_bleu"] = self_bleu;
  if (ref_bleu) j["ref_bleu"] = *ref_bleu;
  return j.dump(1) + "\n";
}

EvalMetrics evaluate_batch(const TransferBatch& batch,
                           const ClassifierModel& clf,
                           const std::vector<Sentence>* refs) {
  EvalMetrics m;
  m.accuracy = transfer_accuracy(batch, clf);
  const auto outputs = batch.outputs();
  m.self_bleu = corpus_bleu(outputs, batch.inputs()).score;
  if (refs) m.ref_bleu = corpus_bleu(outputs, *refs).score;
  return m;
}

}  // namespace stylebench
