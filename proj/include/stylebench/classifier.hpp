#ifndef STYLEBENCH_CLASSIFIER_HPP_
#define STYLEBENCH_CLASSIFIER_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "stylebench/corpus.hpp"

namespace stylebench {

// Sparse unigram + bigram counts. Bigram keys join the two tokens with '_'.
using FeatureCounts = std::map<std::string, double>;

FeatureCounts featurize(const Sentence& s);

struct Prediction {
  int code = 1;
  double prob = 0.5;  // P(label = 1)
};

// Binary logistic regression over featurize(). Used both as the external
// evaluation classifier and as the internal classifier of the manipulation
// audit; the two differ only in training data and seed.
class ClassifierModel {
 public:
  ClassifierModel() = default;
  ClassifierModel(std::map<std::string, double> weights, double bias)
      : weights_(std::move(weights)), bias_(bias) {}

  // prob = sigmoid(w . phi(s) + b); code = 1 iff prob >= 0.5.
  Prediction predict(const Sentence& s) const;
  double logit(const FeatureCounts& features) const;

  const std::map<std::string, double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  // Unigram features the model was trained on.
  std::vector<std::string> unigram_features() const;

  std::string to_json() const;
  static ClassifierModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static ClassifierModel load(const std::filesystem::path& path);

  friend bool operator==(const ClassifierModel&,
                         const ClassifierModel&) = default;

 private:
  friend struct ClassifierTrainer;
  std::map<std::string, double> weights_;
  double bias_ = 0.0;
};

struct ClassifierTrainingLog {
  std::vector<double> epoch_loss;  // mean logistic loss, measured during SGD
};

// Plain per-example SGD from zero weights, seeded shuffling each epoch.
ClassifierModel train_classifier(const LabeledCorpus& corpus,
                                 std::size_t epochs, double lr,
                                 std::uint64_t seed,
                                 ClassifierTrainingLog* log = nullptr);

// Mean logistic loss of `model` over `corpus`.
double classifier_loss(const ClassifierModel& model,
                       const LabeledCorpus& corpus);

double classifier_accuracy(const ClassifierModel& model,
                           const LabeledCorpus& corpus);

}  // namespace stylebench

#endif  // STYLEBENCH_CLASSIFIER_HPP_
