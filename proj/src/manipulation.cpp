#include "stylebench/manipulation.hpp"

#include <charconv>

#include "stylebench/errors.hpp"
#include "stylebench/metrics.hpp"

namespace stylebench {
namespace {

std::vector<bool> correct_mask(const TransferBatch& batch,
                               const ClassifierModel& clf) {
  std::vector<bool> ok(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& r = batch.records[i];
    ok[i] = clf.predict(r.output).code == r.target.label();
  }
  return ok;
}

std::string shortest(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<std::vector<std::size_t>> partition_wrong(
    const TransferBatch& batch, const ClassifierModel& internal_clf,
    std::size_t groups) {
  if (groups < 1) throw ConfigError("number of groups must be >= 1");
  const auto ok = correct_mask(batch, internal_clf);
  std::vector<std::size_t> wrong;
  for (std::size_t i = 0; i < ok.size(); ++i) {
    if (!ok[i]) wrong.push_back(i);
  }
  std::vector<std::vector<std::size_t>> out(groups);
  const std::size_t base = wrong.size() / groups;
  const std::size_t extra = wrong.size() % groups;
  std::size_t pos = 0;
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::size_t n = base + (gi < extra ? 1 : 0);
    out[gi].assign(wrong.begin() + static_cast<long>(pos),
                   wrong.begin() + static_cast<long>(pos + n));
    pos += n;
  }
  return out;
}

const Candidate& best_duplicate(const Sentence& input,
                                const std::vector<Candidate>& candidates,
                                std::size_t record) {
  if (candidates.empty()) throw NoCandidates(record);
  const Candidate* best = nullptr;
  double best_score = -1.0;
  for (const auto& c : candidates) {
    const double s = sentence_bleu_smoothed(c.output, input);
    if (s > best_score || (s == best_score && c.index < best->index)) {
      best = &c;
      best_score = s;
    }
  }
  return *best;
}

ManipulationResult manipulate_detailed(const TransferBatch& batch,
                                       const ClassifierModel& internal_clf,
                                       std::size_t k, std::size_t groups) {
  if (k > groups) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds " +
                      std::to_string(groups) + " groups");
  }
  ManipulationResult result{batch, {}};
  if (k == 0) return result;

  const auto ok = correct_mask(batch, internal_clf);
  // Pools of accepted outputs keyed by the style they carry.
  std::vector<Candidate> pool[2];
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!ok[i]) continue;
    const auto& r = batch.records[i];
    pool[r.target.label()].push_back({r.output, r.input, i});
  }
  const auto parts = partition_wrong(batch, internal_clf, groups);
  for (std::size_t gi = 0; gi < k; ++gi) {
    for (std::size_t idx : parts[gi]) {
      auto& rec = result.batch.records[idx];
      const auto& candidates = pool[rec.target.label()];
      if (candidates.empty()) {
        result.unreplaced.push_back(idx);
        continue;
      }
      rec.output = best_duplicate(rec.input, candidates, idx).output;
    }
  }
  return result;
}

TransferBatch manipulate(const TransferBatch& batch,
                         const ClassifierModel& internal_clf, std::size_t k,
                         std::size_t groups) {
  return manipulate_detailed(batch, internal_clf, k, groups).batch;
}

std::vector<SweepPoint> sweep(const TransferBatch& batch,
                              const std::vector<Sentence>* refs,
                              const ClassifierModel& internal_clf,
                              const ClassifierModel& external_clf,
                              std::size_t groups) {
  std::vector<SweepPoint> points;
  points.reserve(groups + 1);
  for (std::size_t k = 0; k <= groups; ++k) {
    const TransferBatch edited = manipulate(batch, internal_clf, k, groups);
    const EvalMetrics m = evaluate_batch(edited, external_clf, refs);
    points.push_back({k, m.accuracy, m.self_bleu, m.ref_bleu});
  }
  return points;
}

std::string sweep_to_csv(const std::vector<SweepPoint>& points) {
  std::string out = "k,accuracy,self_bleu,ref_bleu\n";
  for (const auto& p : points) {
    out += std::to_string(p.k) + ',' + shortest(p.accuracy) + ',' +
           shortest(p.self_bleu) + ',' +
           (p.ref_bleu ? shortest(*p.ref_bleu) : std::string()) + '\n';
  }
  return out;
}

}  // namespace stylebench
