#include "stylebench/rigor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "json.hpp"
#include "stylebench/errors.hpp"
#include "stylebench/metrics.hpp"

namespace stylebench {

Aggregate aggregate(const std::vector<double>& values) {
  if (values.size() < 2) throw InsufficientRuns(values.size());
  const double n = static_cast<double>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / n;
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  const double std = std::sqrt(sq / (n - 1.0));
  return {mean, std, {mean - std, mean + std}};
}

bool margins_overlap(const Interval& a, const Interval& b) {
  if (a.lo > a.hi || b.lo > b.hi) throw ConfigError("interval with lo > hi");
  return a.lo <= b.hi && b.lo <= a.hi;
}

bool dominates(const MetricPoint& p, const MetricPoint& q) {
  return p.accuracy >= q.accuracy && p.bleu >= q.bleu &&
         (p.accuracy > q.accuracy || p.bleu > q.bleu);
}

std::vector<MetricPoint> pareto_front(const std::vector<MetricPoint>& points) {
  if (points.empty()) throw ConfigError("pareto_front of an empty set");
  // Sweep by accuracy descending; a point survives if no point with
  // accuracy >= its own has a strictly better BLEU, or equal BLEU and
  // strictly better accuracy.
  std::vector<std::size_t> order(points.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].accuracy != points[b].accuracy) {
      return points[a].accuracy > points[b].accuracy;
    }
    return points[a].bleu > points[b].bleu;
  });
  std::vector<bool> keep(points.size(), false);
  double best_bleu = -INFINITY;         // over strictly higher accuracy
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    const double acc = points[order[i]].accuracy;
    while (j < order.size() && points[order[j]].accuracy == acc) ++j;
    // Within a tie group the first element has the highest BLEU.
    const double group_best = points[order[i]].bleu;
    for (std::size_t k = i; k < j; ++k) {
      const double b = points[order[k]].bleu;
      keep[order[k]] = b == group_best && b > best_bleu;
    }
    best_bleu = std::max(best_bleu, group_best);
    i = j;
  }
  std::vector<MetricPoint> out;
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (keep[k]) out.push_back(points[k]);
  }
  return out;
}

Ensemble aggregate_records(Arch arch, std::vector<EvalRecord> records,
                           std::vector<RunFailure> failures) {
  if (records.size() < 2) throw InsufficientRuns(records.size());
  Ensemble e;
  e.arch = arch;
  std::vector<double> acc, self, ref;
  bool all_refs = true;
  for (const auto& r : records) {
    if (r.arch != arch) throw ConfigError("ensemble mixes architectures");
    acc.push_back(r.accuracy);
    self.push_back(r.self_bleu);
    if (r.ref_bleu) {
      ref.push_back(*r.ref_bleu);
    } else {
      all_refs = false;
    }
  }
  e.accuracy = aggregate(acc);
  e.self_bleu = aggregate(self);
  if (all_refs) e.ref_bleu = aggregate(ref);
  e.records = std::move(records);
  e.failures = std::move(failures);
  return e;
}

std::string Ensemble::to_json() const {
  using nlohmann::ordered_json;
  ordered_json j;
  j["arch"] = arch_name(arch);
  j["runs"] = ordered_json::array();
  for (const auto& r : records) {
    ordered_json run;
    run["seed"] = r.seed;
    run["accuracy"] = r.accuracy;
    run["self_bleu"] = r.self_bleu;
    if (r.ref_bleu) run["ref_bleu"] = *r.ref_bleu;
    j["runs"].push_back(std::move(run));
  }
  auto agg = [](const Aggregate& a) {
    ordered_json o;
    o["mean"] = a.mean;
    o["std"] = a.std;
    o["lo"] = a.margin.lo;
    o["hi"] = a.margin.hi;
    return o;
  };
  j["aggregate"]["accuracy"] = agg(accuracy);
  j["aggregate"]["self_bleu"] = agg(self_bleu);
  if (ref_bleu) j["aggregate"]["ref_bleu"] = agg(*ref_bleu);
  j["margin"] = "mean +- 1 sample std (n-1)";
  j["failures"] = ordered_json::array();
  for (const auto& f : failures) {
    ordered_json o;
    o["seed"] = f.seed;
    o["error"] = f.message;
    j["failures"].push_back(std::move(o));
  }
  return j.dump(1) + "\n";
}

RunOutcome run_single(const EnsembleInputs& inputs, const TrainConfig& cfg) {
  if (!inputs.train || !inputs.test || !inputs.external) {
    throw ConfigError("ensemble inputs need train, test and classifier");
  }
  RunOutcome out;
  out.record.seed = cfg.seed;
  out.record.arch = cfg.arch;
  try {
    TrainResult trained = train(*inputs.train, cfg, &out.log);
    out.log = std::move(trained.log);
    out.batch = transfer(trained.model, *inputs.test);
    const EvalMetrics m = evaluate_batch(*out.batch, *inputs.external, inputs.refs);
    out.record.accuracy = m.accuracy;
    out.record.self_bleu = m.self_bleu;
    out.record.ref_bleu = m.ref_bleu;
    out.model = std::move(trained.model);
  } catch (const DivergenceError& e) {
    out.failure = e.what();
  }
  return out;
}

Ensemble run_ensemble(const EnsembleInputs& inputs, const TrainConfig& cfg,
                      std::size_t n_runs, std::uint64_t seed_base,
                      std::size_t jobs, std::vector<RunOutcome>* outcomes) {
  if (n_runs < 2) throw InsufficientRuns(n_runs);
  cfg.validate();
  std::vector<RunOutcome> results(n_runs);
  std::vector<std::exception_ptr> errors(n_runs);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n_runs; i = next++) {
      TrainConfig run_cfg = cfg;
      run_cfg.seed = seed_base + i;
      try {
        results[i] = run_single(inputs, run_cfg);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::max<std::size_t>(1, std::min(jobs, n_runs));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<EvalRecord> records;
  std::vector<RunFailure> failures;
  for (const auto& r : results) {
    if (r.failure) {
      failures.push_back({r.record.seed, *r.failure});
    } else {
      records.push_back(r.record);
    }
  }
  if (outcomes) *outcomes = std::move(results);
  if (records.size() < 2) throw InsufficientRuns(records.size());
  return aggregate_records(cfg.arch, std::move(records), std::move(failures));
}

}  // namespace stylebench
