#ifndef STYLEBENCH_RIGOR_HPP_
#define STYLEBENCH_RIGOR_HPP_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "stylebench/architectures.hpp"
#include "stylebench/classifier.hpp"
#include "stylebench/corpus.hpp"
#include "stylebench/transfer_batch.hpp"

namespace stylebench {

// Closed interval [lo, hi].
struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Mean with a +-1 sample standard deviation margin.
struct Aggregate {
  double mean = 0.0;
  double std = 0.0;  // n - 1 denominator
  Interval margin;
};

// Throws InsufficientRuns for fewer than two values.
Aggregate aggregate(const std::vector<double>& values);

// True iff the closed intervals intersect; touching counts.
bool margins_overlap(const Interval& a, const Interval& b);

struct MetricPoint {
  double accuracy = 0.0;
  double bleu = 0.0;

  friend bool operator==(const MetricPoint&, const MetricPoint&) = default;
};

// p dominates q iff p >= q on both metrics and > on at least one.
bool dominates(const MetricPoint& p, const MetricPoint& q);

// Non-dominated points in input order. Duplicates are all kept.
std::vector<MetricPoint> pareto_front(const std::vector<MetricPoint>& points);

struct EvalRecord {
  double accuracy = 0.0;
  double self_bleu = 0.0;
  std::optional<double> ref_bleu;
  std::uint64_t seed = 0;
  Arch arch = Arch::kBaseline;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

struct RunFailure {
  std::uint64_t seed = 0;
  std::string message;
};

struct Ensemble {
  Arch arch = Arch::kBaseline;
  std::vector<EvalRecord> records;
  std::vector<RunFailure> failures;
  Aggregate accuracy;
  Aggregate self_bleu;
  std::optional<Aggregate> ref_bleu;

  // {"arch", "runs": [...], "aggregate": {metric: {mean, std, lo, hi}},
  //  "margin", "failures": [...]}
  std::string to_json() const;
};

// What one retrain needs besides its seed.
struct EnsembleInputs {
  const LabeledCorpus* train = nullptr;
  const LabeledCorpus* test = nullptr;         // transfer + evaluation split
  const std::vector<Sentence>* refs = nullptr;  // aligned with *test
  const ClassifierModel* external = nullptr;
};

// Artifacts of a single retrain.
struct RunOutcome {
  EvalRecord record;
  std::optional<StyleModel> model;
  TrainingLog log;
  std::optional<TransferBatch> batch;
  std::optional<std::string> failure;  // DivergenceError text
};

// Train on `train`, transfer `test`, evaluate with `external`. Reproducible
// from (inputs, cfg) alone.
RunOutcome run_single(const EnsembleInputs& inputs, const TrainConfig& cfg);

// Runs seeds seed_base .. seed_base + n_runs - 1 (up to `jobs` in parallel),
// excludes diverged runs and aggregates the rest. Throws InsufficientRuns when
// fewer than two survive. Per-run outcomes are returned through `outcomes`.
Ensemble run_ensemble(const EnsembleInputs& inputs, const TrainConfig& cfg,
                      std::size_t n_runs, std::uint64_t seed_base,
                      std::size_t jobs = 1,
                      std::vector<RunOutcome>* outcomes = nullptr);

// Aggregates already-computed records (all of one arch).
Ensemble aggregate_records(Arch arch, std::vector<EvalRecord> records,
                           std::vector<RunFailure> failures);

}  // namespace stylebench

#endif  // STYLEBENCH_RIGOR_HPP_
