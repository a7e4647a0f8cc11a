// stylebench: corpus preparation, training, transfer, evaluation, the
// manipulation audit and retrain ensembles from the command line.
//
// Exit codes: 0 success, 2 usage or validation error, 3 runtime failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "stylebench/architectures.hpp"
#include "stylebench/classifier.hpp"
#include "stylebench/corpus.hpp"
#include "stylebench/errors.hpp"
#include "stylebench/manifest.hpp"
#include "stylebench/manipulation.hpp"
#include "stylebench/metrics.hpp"
#include "stylebench/rigor.hpp"
#include "stylebench/transfer_batch.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace stylebench;

namespace {

using Clock = std::chrono::steady_clock;

struct Invocation {
  std::string command;
  Clock::time_point start = Clock::now();
  RunManifest manifest;

  explicit Invocation(std::string name) : command(std::move(name)) {
    manifest.command = command;
  }

  void input(const fs::path& p) { manifest.inputs.push_back(p.string()); }
  void input(const std::string& p) { manifest.inputs.push_back(p); }
  void input(const std::optional<std::string>& p) {
    if (p) input(*p);
  }
  void output(const fs::path& p) { manifest.outputs.push_back(p.string()); }
  void output(const std::string& p) { manifest.outputs.push_back(p); }

  void finish(const fs::path& primary) {
    manifest.duration_seconds =
        std::chrono::duration<double>(Clock::now() - start).count();
    manifest.write(primary);
  }
};

void ensure_parent(const fs::path& out) {
  const fs::path parent = out.parent_path();
  if (!parent.empty() && !fs::is_directory(parent)) {
    throw ValidationError("output directory does not exist: " + parent.string());
  }
}

std::vector<int> labels_of(const LabeledCorpus& corpus) {
  std::vector<int> labels;
  labels.reserve(corpus.size());
  for (const auto& item : corpus.items) labels.push_back(item.label);
  return labels;
}

// defaults for the arch, then the config file, then --set pairs, then flags.
TrainConfig build_config(const std::string& arch_text,
                         const std::optional<std::string>& config_file,
                         const std::vector<std::string>& sets,
                         std::optional<std::uint64_t> seed) {
  const Arch arch = parse_arch(arch_text);
  TrainConfig cfg = TrainConfig::defaults_for(arch);
  std::map<std::string, std::string> overrides;
  if (config_file) overrides = load_config_file(*config_file);
  for (const auto& s : sets) {
    for (auto& [k, v] : parse_config_text(s)) overrides[k] = v;
  }
  overrides.erase("arch");
  cfg.apply(overrides);
  if (seed) cfg.seed = *seed;
  cfg.validate();
  return cfg;
}

fs::path log_path_for(const fs::path& model_out) {
  fs::path p = model_out;
  p.replace_extension(".log.csv");
  return p;
}

// The classifier's vocabulary must be largely expressible by the model.
void check_vocab(const StyleModel& model, const ClassifierModel& clf) {
  const auto features = clf.unigram_features();
  if (features.empty()) return;
  std::size_t known = 0;
  for (const auto& f : features) {
    if (model.vocab.id_of(f) != kUnk) ++known;
  }
  if (2 * known < features.size()) {
    throw VocabMismatch("model vocabulary covers " + std::to_string(known) +
                        " of " + std::to_string(features.size()) +
                        " classifier unigrams");
  }
}

ordered_json flag_snapshot(const CLI::App& sub) {
  ordered_json j = ordered_json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->get_name() == "--help" || opt->count() == 0) continue;
    const auto values = opt->results();
    std::string name = opt->get_name();
    while (!name.empty() && name.front() == '-') name.erase(name.begin());
    if (values.size() == 1) {
      j[name] = values.front();
    } else {
      j[name] = values;
    }
  }
  return j;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
  std::uint64_t seed = 0;
  std::size_t n = 200;
  std::string out;
  std::optional<std::string> refs_out;
};

void cmd_synth(const SynthArgs& a, const CLI::App& sub) {
  Invocation inv("synth");
  ensure_parent(a.out);
  const LabeledCorpus corpus = synth_corpus(a.seed, a.n);
  save_corpus(corpus, a.out);
  inv.output(a.out);
  if (a.refs_out) {
    ensure_parent(*a.refs_out);
    save_references(synth_references(corpus), *a.refs_out);
    inv.output(*a.refs_out);
  }
  inv.manifest.config = flag_snapshot(sub);
  inv.manifest.seeds = {a.seed};
  inv.finish(a.out);
}

// ------------------------------------------------------- train-classifier

struct ClassifierArgs {
  std::string corpus;
  std::uint64_t seed = 0;
  std::size_t epochs = 50;
  double lr = 0.1;
  std::string out;
};

void cmd_train_classifier(const ClassifierArgs& a, const CLI::App& sub) {
  Invocation inv("train-classifier");
  ensure_parent(a.out);
  const LabeledCorpus corpus = load_corpus(a.corpus);
  inv.input(a.corpus);
  const ClassifierModel clf = train_classifier(corpus, a.epochs, a.lr, a.seed);
  clf.save(a.out);
  inv.output(a.out);
  inv.manifest.config = flag_snapshot(sub);
  inv.manifest.seeds = {a.seed};
  inv.finish(a.out);
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  std::string arch;
  std::string corpus;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::string out;
  std::optional<std::string> log;
};

void cmd_train(const TrainArgs& a) {
  Invocation inv("train");
  ensure_parent(a.out);
  const TrainConfig cfg = build_config(a.arch, a.config, a.sets, a.seed);
  const LabeledCorpus corpus = load_corpus(a.corpus);
  inv.input(a.corpus);
  inv.input(a.config);
  inv.manifest.config = cfg.to_json();
  inv.manifest.seeds = {cfg.seed};
  const fs::path log_out = a.log ? fs::path(*a.log) : log_path_for(a.out);
  ensure_parent(log_out);

  TrainingLog partial;
  try {
    const TrainResult result = train(corpus, cfg, &partial);
    result.model.save(a.out);
    write_text_file(log_out, result.log.to_csv());
  } catch (const DivergenceError&) {
    write_text_file(log_out, partial.to_csv());
    inv.output(log_out);
    inv.finish(log_out);
    throw;
  }
  inv.output(a.out);
  inv.output(log_out);
  inv.finish(a.out);
}

// --------------------------------------------------------------- transfer

struct TransferArgs {
  std::string model;
  std::string corpus;
  std::string out;
};

void cmd_transfer(const TransferArgs& a, const CLI::App& sub) {
  Invocation inv("transfer");
  ensure_parent(a.out);
  const StyleModel model = StyleModel::load(a.model);
  const LabeledCorpus corpus = load_corpus(a.corpus);
  inv.input(a.model);
  inv.input(a.corpus);
  save_batch(transfer(model, corpus), a.out);
  inv.output(a.out);
  inv.manifest.config = flag_snapshot(sub);
  inv.manifest.seeds = {model.config.seed};
  inv.finish(a.out);
}

// Batch file given with --precomputed or produced by a model on --corpus.
TransferBatch batch_from(const std::optional<std::string>& precomputed,
                         const std::optional<std::string>& model_path,
                         const std::optional<std::string>& corpus_path,
                         const ClassifierModel* clf, Invocation& inv) {
  std::optional<LabeledCorpus> corpus;
  if (corpus_path) {
    corpus = load_corpus(*corpus_path);
    inv.input(*corpus_path);
  }
  if (precomputed) {
    inv.input(*precomputed);
    if (corpus) {
      const auto labels = labels_of(*corpus);
      return load_batch(*precomputed, &labels);
    }
    return load_batch(*precomputed);
  }
  if (!model_path) throw ConfigError("one of --model or --precomputed is required");
  if (!corpus) throw ConfigError("--model requires --corpus");
  const StyleModel model = StyleModel::load(*model_path);
  inv.input(*model_path);
  inv.manifest.seeds = {model.config.seed};
  if (clf) check_vocab(model, *clf);
  return transfer(model, *corpus);
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  std::optional<std::string> model;
  std::optional<std::string> precomputed;
  std::optional<std::string> corpus;
  std::optional<std::string> refs;
  std::string classifier;
  std::string out;
};

void cmd_eval(const EvalArgs& a, const CLI::App& sub) {
  Invocation inv("eval");
  ensure_parent(a.out);
  const ClassifierModel clf = ClassifierModel::load(a.classifier);
  inv.input(a.classifier);
  const TransferBatch batch = batch_from(a.precomputed, a.model, a.corpus, &clf, inv);
  std::optional<std::vector<Sentence>> refs;
  if (a.refs) {
    refs = load_references(*a.refs);
    inv.input(*a.refs);
  }
  const EvalMetrics m = evaluate_batch(batch, clf, refs ? &*refs : nullptr);
  write_text_file(a.out, m.to_json());
  inv.output(a.out);
  inv.manifest.config = flag_snapshot(sub);
  inv.finish(a.out);
}

// ------------------------------------------------------------- manipulate

struct ManipulateArgs {
  std::string batch;
  std::optional<std::string> corpus;
  std::string internal;
  std::string external;
  std::optional<std::string> refs;
  std::size_t groups = kDefaultGroups;
  std::string out;
};

void cmd_manipulate(const ManipulateArgs& a, const CLI::App& sub) {
  Invocation inv("manipulate");
  ensure_parent(a.out);
  const ClassifierModel internal = ClassifierModel::load(a.internal);
  const ClassifierModel external = ClassifierModel::load(a.external);
  inv.input(a.internal);
  inv.input(a.external);
  const TransferBatch batch = batch_from(a.batch, std::nullopt, a.corpus, nullptr, inv);
  std::optional<std::vector<Sentence>> refs;
  if (a.refs) {
    refs = load_references(*a.refs);
    inv.input(*a.refs);
  }
  const auto points =
      sweep(batch, refs ? &*refs : nullptr, internal, external, a.groups);
  write_text_file(a.out, sweep_to_csv(points));
  inv.output(a.out);
  inv.manifest.config = flag_snapshot(sub);
  inv.finish(a.out);
}

// --------------------------------------------------------------- ensemble

struct EnsembleArgs {
  std::string arch;
  std::string corpus;
  std::optional<std::string> test_corpus;
  std::string classifier;
  std::optional<std::string> refs;
  std::size_t runs = 5;
  std::uint64_t seed_base = 0;
  std::size_t jobs = 1;
  std::optional<std::string> config;
  std::vector<std::string> sets;
  std::string out;
};

void cmd_ensemble(const EnsembleArgs& a) {
  Invocation inv("ensemble");
  if (a.runs < 2) throw ConfigError("--runs must be >= 2");
  if (a.jobs < 1) throw ConfigError("--jobs must be >= 1");
  const TrainConfig cfg = build_config(a.arch, a.config, a.sets, std::nullopt);
  fs::path dir = a.out;
  if (!dir.has_filename()) dir = dir.parent_path();  // "runs/" names the directory "runs"
  ensure_parent(dir);
  fs::create_directories(dir);
  const LabeledCorpus train_set = load_corpus(a.corpus);
  const LabeledCorpus test_set = a.test_corpus ? load_corpus(*a.test_corpus) : train_set;
  const ClassifierModel clf = ClassifierModel::load(a.classifier);
  std::optional<std::vector<Sentence>> refs;
  if (a.refs) refs = load_references(*a.refs);
  inv.input(a.corpus);
  inv.input(a.test_corpus);
  inv.input(a.classifier);
  inv.input(a.refs);
  inv.input(a.config);

  EnsembleInputs inputs{&train_set, &test_set, refs ? &*refs : nullptr, &clf};
  std::vector<RunOutcome> outcomes;
  std::optional<Ensemble> ensemble;
  std::optional<InsufficientRuns> insufficient;
  try {
    ensemble = run_ensemble(inputs, cfg, a.runs, a.seed_base, a.jobs, &outcomes);
  } catch (const InsufficientRuns& e) {
    insufficient = e;
  }

  ordered_json config = cfg.to_json();
  config.erase("seed");
  inv.manifest.config = config;
  for (std::size_t i = 0; i < a.runs; ++i) {
    inv.manifest.seeds.push_back(a.seed_base + i);
  }
  for (const auto& run : outcomes) {
    const fs::path run_dir = dir / ("run-" + std::to_string(run.record.seed));
    fs::create_directories(run_dir);
    write_text_file(run_dir / "log.csv", run.log.to_csv());
    inv.output(run_dir / "log.csv");
    if (run.failure) continue;
    run.model->save(run_dir / "model.json");
    save_batch(*run.batch, run_dir / "batch.tsv");
    const EvalMetrics m{run.record.accuracy, run.record.self_bleu, run.record.ref_bleu};
    write_text_file(run_dir / "metrics.json", m.to_json());
    for (const char* f : {"model.json", "batch.tsv", "metrics.json"}) {
      inv.output(run_dir / f);
    }
  }
  if (insufficient) throw *insufficient;
  const fs::path report = dir / "ensemble.json";
  write_text_file(report, ensemble->to_json());
  inv.output(report);
  inv.finish(report);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stylebench: text style-transfer training and evaluation audit"};
  app.require_subcommand(1, 1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "write a deterministic synthetic sentiment corpus");
  s->add_option("--seed", synth.seed, "corpus seed");
  s->add_option("--n", synth.n, "number of sentences (even, >= 20)");
  s->add_option("--out", synth.out, "corpus TSV path")->required();
  s->add_option("--refs-out", synth.refs_out, "gold style-flipped references");

  ClassifierArgs ca;
  auto* c = app.add_subcommand("train-classifier", "train the logistic-regression style classifier");
  c->add_option("--corpus", ca.corpus)->required();
  c->add_option("--seed", ca.seed);
  c->add_option("--epochs", ca.epochs);
  c->add_option("--lr", ca.lr);
  c->add_option("--out", ca.out, "classifier JSON path")->required();

  TrainArgs ta;
  auto* t = app.add_subcommand("train", "train a style-transfer model");
  t->add_option("--arch", ta.arch, "baseline | disc | sae | combo")->required();
  t->add_option("--corpus", ta.corpus)->required();
  t->add_option("--seed", ta.seed);
  t->add_option("--config", ta.config, "key = value overrides file");
  t->add_option("--set", ta.sets, "key=value override (repeatable, wins over --config)");
  t->add_option("--out", ta.out, "checkpoint JSON path")->required();
  t->add_option("--log", ta.log, "training log CSV (default <out>.log.csv)");

  TransferArgs xa;
  auto* x = app.add_subcommand("transfer", "transfer a corpus to the opposite style");
  x->add_option("--model", xa.model)->required();
  x->add_option("--corpus", xa.corpus)->required();
  x->add_option("--out", xa.out, "batch TSV path")->required();

  EvalArgs ea;
  auto* e = app.add_subcommand("eval", "accuracy, self-BLEU and reference BLEU");
  auto* e_model = e->add_option("--model", ea.model);
  auto* e_pre = e->add_option("--precomputed", ea.precomputed, "batch TSV scored as is");
  e_model->excludes(e_pre);
  e->add_option("--corpus", ea.corpus);
  e->add_option("--refs", ea.refs);
  e->add_option("--classifier", ea.classifier)->required();
  e->add_option("--out", ea.out, "metrics JSON path")->required();

  ManipulateArgs ma;
  auto* m = app.add_subcommand("manipulate", "delete, duplicate and conquer sweep");
  m->add_option("--model-output,--precomputed", ma.batch, "batch TSV")->required();
  m->add_option("--corpus", ma.corpus, "labels for a two-column batch");
  m->add_option("--classifier-internal", ma.internal)->required();
  m->add_option("--classifier-external", ma.external)->required();
  m->add_option("--refs", ma.refs);
  m->add_option("--groups", ma.groups);
  m->add_option("--out", ma.out, "sweep CSV path")->required();

  EnsembleArgs na;
  auto* n = app.add_subcommand("ensemble", "retrain with consecutive seeds and report mean +- std");
  n->add_option("--arch", na.arch)->required();
  n->add_option("--corpus", na.corpus, "training corpus")->required();
  n->add_option("--test-corpus", na.test_corpus, "transfer split (default: --corpus)");
  n->add_option("--classifier", na.classifier)->required();
  n->add_option("--refs", na.refs);
  n->add_option("--runs", na.runs);
  n->add_option("--seed-base", na.seed_base);
  n->add_option("--jobs", na.jobs);
  n->add_option("--config", na.config);
  n->add_option("--set", na.sets);
  n->add_option("--out", na.out, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int rc = app.exit(err);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*s) cmd_synth(synth, *s);
    else if (*c) cmd_train_classifier(ca, *c);
    else if (*t) cmd_train(ta);
    else if (*x) cmd_transfer(xa, *x);
    else if (*e) cmd_eval(ea, *e);
    else if (*m) cmd_manipulate(ma, *m);
    else if (*n) cmd_ensemble(na);
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const RuntimeFailure& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 3;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
  return 0;
}
