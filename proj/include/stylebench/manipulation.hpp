#ifndef STYLEBENCH_MANIPULATION_HPP_
#define STYLEBENCH_MANIPULATION_HPP_

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "stylebench/classifier.hpp"
#include "stylebench/corpus.hpp"
#include "stylebench/transfer_batch.hpp"

namespace stylebench {

inline constexpr std::size_t kDefaultGroups = 10;

// The "delete, duplicate and conquer" audit. Outputs the internal classifier
// rejects are replaced, group after group, by verbatim copies of in-batch
// outputs it accepts, choosing the copy with the highest sentence BLEU
// against the replaced record's own input.

// Indices of records whose output the classifier does not assign to the
// target code, in batch order, split contiguously into `groups` near-equal
// groups (larger groups first).
std::vector<std::vector<std::size_t>> partition_wrong(
    const TransferBatch& batch, const ClassifierModel& internal_clf,
    std::size_t groups = kDefaultGroups);

struct Candidate {
  Sentence output;
  Sentence input;
  std::size_t index = 0;  // batch position; lower wins ties
};

// Candidate output maximizing sentence_bleu_smoothed(output, input).
// Throws NoCandidates(record) on an empty pool.
const Candidate& best_duplicate(const Sentence& input,
                                const std::vector<Candidate>& candidates,
                                std::size_t record = 0);

struct ManipulationResult {
  TransferBatch batch;
  std::vector<std::size_t> unreplaced;  // records that found no candidate
};

// Replaces the outputs of the first k groups. Inputs and codes never change.
ManipulationResult manipulate_detailed(const TransferBatch& batch,
                                       const ClassifierModel& internal_clf,
                                       std::size_t k,
                                       std::size_t groups = kDefaultGroups);
TransferBatch manipulate(const TransferBatch& batch,
                         const ClassifierModel& internal_clf, std::size_t k,
                         std::size_t groups = kDefaultGroups);

struct SweepPoint {
  std::size_t k = 0;
  double accuracy = 0.0;
  double self_bleu = 0.0;
  std::optional<double> ref_bleu;
};

// k = 0..groups with metrics from the external classifier; replacement is
// cumulative.
std::vector<SweepPoint> sweep(const TransferBatch& batch,
                              const std::vector<Sentence>* refs,
                              const ClassifierModel& internal_clf,
                              const ClassifierModel& external_clf,
                              std::size_t groups = kDefaultGroups);

// k,accuracy,self_bleu,ref_bleu (ref_bleu empty when absent).
std::string sweep_to_csv(const std::vector<SweepPoint>& points);

}  // namespace stylebench

#endif  // STYLEBENCH_MANIPULATION_HPP_
