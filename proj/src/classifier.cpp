#include "stylebench/classifier.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "stylebench/errors.hpp"
#include "stylebench/random.hpp"

namespace stylebench {
namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(-x)) without overflow.
double softplus_neg(double x) {
  return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x));
}

}  // namespace

FeatureCounts featurize(const Sentence& s) {
  FeatureCounts f;
  for (std::size_t i = 0; i < s.tokens.size(); ++i) {
    f[s.tokens[i]] += 1.0;
    if (i + 1 < s.tokens.size()) f[s.tokens[i] + "_" + s.tokens[i + 1]] += 1.0;
  }
  return f;
}

double ClassifierModel::logit(const FeatureCounts& features) const {
  double z = bias_;
  for (const auto& [name, count] : features) {
    if (auto it = weights_.find(name); it != weights_.end()) {
      z += it->second * count;
    }
  }
  return z;
}

Prediction ClassifierModel::predict(const Sentence& s) const {
  const double p = sigmoid(logit(featurize(s)));
  return {p >= 0.5 ? 1 : 0, p};
}

std::vector<std::string> ClassifierModel::unigram_features() const {
  std::vector<std::string> out;
  for (const auto& [name, w] : weights_) {
    if (name.find('_') == std::string::npos) out.push_back(name);
  }
  return out;
}

std::string ClassifierModel::to_json() const {
  nlohmann::ordered_json j;
  j["bias"] = bias_;
  j["weights"] = nlohmann::ordered_json::object();
  for (const auto& [name, w] : weights_) j["weights"][name] = w;
  return j.dump(1) + "\n";
}

ClassifierModel ClassifierModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
    ClassifierModel m;
    m.bias_ = j.at("bias").get<double>();
    for (const auto& [name, w] : j.at("weights").items()) {
      m.weights_[name] = w.get<double>();
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed classifier checkpoint: ") +
                          e.what());
  }
}

void ClassifierModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json();
}

ClassifierModel ClassifierModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open classifier " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

struct ClassifierTrainer {
  static ClassifierModel run(const LabeledCorpus& corpus, std::size_t epochs,
                             double lr, std::uint64_t seed,
                             ClassifierTrainingLog* log) {
    if (epochs < 1) throw ConfigError("classifier epochs must be >= 1");
    if (!(lr > 0)) throw ConfigError("classifier lr must be > 0");
    if (corpus.empty()) throw EmptyCorpus("classifier training corpus");
    if (corpus.count_label(0) == 0 || corpus.count_label(1) == 0) {
      throw DegenerateCorpus();
    }
    std::vector<FeatureCounts> features;
    features.reserve(corpus.size());
    ClassifierModel model;
    for (const auto& item : corpus.items) {
      features.push_back(featurize(item.sentence));
      for (const auto& [name, c] : features.back()) model.weights_[name] = 0.0;
    }

    Rng rng(seed, "classifier-shuffle");
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
      rng.shuffle(std::span<std::size_t>(order));
      double loss = 0.0;
      for (std::size_t idx : order) {
        const double y = corpus.items[idx].label;
        const double z = model.logit(features[idx]);
        loss += y == 1 ? softplus_neg(z) : softplus_neg(-z);
        const double g = sigmoid(z) - y;
        for (const auto& [name, count] : features[idx]) {
          model.weights_[name] -= lr * g * count;
        }
        model.bias_ -= lr * g;
      }
      if (log) log->epoch_loss.push_back(loss / corpus.size());
    }
    return model;
  }
};

ClassifierModel train_classifier(const LabeledCorpus& corpus,
                                 std::size_t epochs, double lr,
                                 std::uint64_t seed,
                                 ClassifierTrainingLog* log) {
  return ClassifierTrainer::run(corpus, epochs, lr, seed, log);
}

double classifier_loss(const ClassifierModel& model,
                       const LabeledCorpus& corpus) {
  if (corpus.empty()) throw EmptyCorpus("classifier evaluation corpus");
  double loss = 0.0;
  for (const auto& item : corpus.items) {
    const double z = model.logit(featurize(item.sentence));
    loss += item.label == 1 ? softplus_neg(z) : softplus_neg(-z);
  }
  return loss / corpus.size();
}

double classifier_accuracy(const ClassifierModel& model,
                           const LabeledCorpus& corpus) {
  if (corpus.empty()) throw EmptyCorpus("classifier evaluation corpus");
  std::size_t correct = 0;
  for (const auto& item : corpus.items) {
    if (model.predict(item.sentence).code == item.label) ++correct;
  }
  return static_cast<double>(correct) / corpus.size();
}

}  // namespace stylebench
