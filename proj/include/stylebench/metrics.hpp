#ifndef STYLEBENCH_METRICS_HPP_
#define STYLEBENCH_METRICS_HPP_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "stylebench/classifier.hpp"
#include "stylebench/corpus.hpp"
#include "stylebench/transfer_batch.hpp"

namespace stylebench {

inline constexpr int kMaxNgram = 4;

struct NgramMatch {
  std::size_t clipped = 0;
  std::size_t total = 0;

  friend bool operator==(const NgramMatch&, const NgramMatch&) = default;
};

// BLEU on the 0-100 scale with a single reference per hypothesis.
struct BleuReport {
  std::array<double, kMaxNgram> precisions{};  // p1..p4 as fractions
  double brevity_penalty = 1.0;
  double score = 0.0;

  // {"p1":..,"p2":..,"p3":..,"p4":..,"bp":..,"score":..}
  std::string to_json() const;
};

// Corpus-level clipped n-gram matches. Each hypothesis n-gram count is clipped
// by its count in the aligned reference.
NgramMatch modified_precision(const std::vector<Sentence>& hyps,
                              const std::vector<Sentence>& refs, int n);

// Unsmoothed corpus BLEU; BP uses summed hypothesis/reference lengths.
BleuReport corpus_bleu(const std::vector<Sentence>& hyps,
                       const std::vector<Sentence>& refs);

// Sentence BLEU with add-one smoothing of p_n (n >= 2) when no n-gram matches.
double sentence_bleu_smoothed(const Sentence& hyp, const Sentence& ref);

// Fraction of outputs the classifier assigns to the record's target code.
double transfer_accuracy(const TransferBatch& batch,
                         const ClassifierModel& clf);

struct EvalMetrics {
  double accuracy = 0.0;
  double self_bleu = 0.0;
  std::optional<double> ref_bleu;

  // Absent ref_bleu is omitted from the JSON.
  std::string to_json() const;
};

// Accuracy with `clf`, BLEU(output, input) and, when refs are given,
// BLEU(output, refs).
EvalMetrics evaluate_batch(const TransferBatch& batch,
                           const ClassifierModel& clf,
                           const std::vector<Sentence>* refs);

}  // namespace stylebench

#endif  // STYLEBENCH_METRICS_HPP_
