#ifndef STYLEBENCH_ARCHITECTURES_HPP_
#define STYLEBENCH_ARCHITECTURES_HPP_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "stylebench/corpus.hpp"
#include "stylebench/difcore.hpp"
#include "stylebench/random.hpp"
#include "stylebench/transfer_batch.hpp"

namespace stylebench {

// baseline: L_ae + l_c L_c + l_z L_z
// disc:     baseline - l_Dz L_Dz, with an adversarial latent discriminator
// sae:      baseline + l_cos L_cos + l_cos- L_cos-
// combo:    both extensions
enum class Arch { kBaseline, kDisc, kSae, kCombo };

std::string_view arch_name(Arch arch);
Arch parse_arch(std::string_view name);  // ConfigError on unknown names
bool uses_latent_discriminator(Arch arch);
bool uses_cosine_losses(Arch arch);

struct TrainConfig {
  Arch arch = Arch::kBaseline;
  double lambda_c = 1.0;
  double lambda_z = 1.0;
  double lambda_dz = 0.0;
  double lambda_cos = 0.0;
  double lambda_cosneg = 0.0;
  double tau0 = 1.0;
  double tau_min = 0.1;
  double tau_decay = 0.05;
  std::size_t epochs = 30;
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;
  std::size_t embed = 32;
  std::size_t hidden = 64;
  std::size_t z_dim = 16;
  std::size_t max_len = 16;
  std::size_t vocab_max = 1000;
  double lr = 0.005;        // generator (encoder + decoder) Adam step
  double disc_lr = 0.01;    // D and D_z Adam step
  double sigma_z = 0.1;     // encoder noise at training time
  double grad_clip = 5.0;   // global-norm clip of the generator gradient
  double init_scale = 0.08;
  std::size_t disc_pretrain_epochs = 3;

  // Relevant lambdas set to 1, irrelevant ones to 0.
  static TrainConfig defaults_for(Arch arch);

  // Temperature used during epoch t (0-based).
  double tau_at(std::size_t epoch) const;

  void validate() const;
  // Applies `key = value` overrides; unknown keys and bad values throw
  // ConfigError.
  void apply(const std::map<std::string, std::string>& overrides);

  nlohmann::ordered_json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Parses `key = value` lines; '#' starts a comment.
std::map<std::string, std::string> parse_config_text(std::string_view text);
std::map<std::string, std::string> load_config_file(
    const std::filesystem::path& path);

struct LatentVector {
  std::vector<double> z;
};

// Per-step probability vectors over the vocabulary.
struct SoftSentence {
  std::vector<std::vector<double>> steps;
};

struct StyleModel {
  TrainConfig config;
  Vocab vocab;
  dif::ParamSet params;

  // difcore checkpoint plus {"arch", "config", "seed", "vocab"} header.
  std::string to_json() const;
  static StyleModel from_json(const std::string& text);
  void save(const std::filesystem::path& path) const;
  static StyleModel load(const std::filesystem::path& path);
};

// Parameter groups. The generator group holds the shared embedding, the
// encoder E and the generator G; "disc." is the style discriminator D and
// "dz." the latent style discriminator D_z.
inline const std::vector<std::string> kGeneratorGroup = {"embedding", "enc.",
                                                         "gen."};
inline const std::vector<std::string> kDiscGroup = {"disc."};
inline const std::vector<std::string> kLatentDiscGroup = {"dz."};

dif::ParamSet init_params(const TrainConfig& cfg, std::size_t vocab_size,
                          std::uint64_t seed);

// Final encoder GRU state mapped to z. `noise`, when given, is added to the
// mean (training mode); otherwise the noise-free mean is returned.
LatentVector encode(const dif::ParamSet& params, const std::vector<int>& ids,
                    const std::vector<double>* noise = nullptr);
// Draws the training-time encoder noise, sigma * N(0, 1) per coordinate.
std::vector<double> draw_latent_noise(Rng& rng, std::size_t z_dim,
                                      double sigma);

// max_len - 1 soft decoding steps from hidden state dense([z; c]).
SoftSentence generate_soft(const dif::ParamSet& params, std::size_t max_len,
                           const LatentVector& z, StyleCode c, double tau);
// Argmax decoding; returns ids without BOS, ending before EOS.
std::vector<int> generate_greedy_ids(const dif::ParamSet& params,
                                     std::size_t max_len,
                                     const LatentVector& z, StyleCode c);
// Specials stripped; an empty generation becomes [<unk>].
Sentence generate_greedy(const dif::ParamSet& params, const Vocab& vocab,
                         std::size_t max_len, const LatentVector& z,
                         StyleCode c);

// Mean per-token NLL of the encoded sentence under teacher forcing.
double reconstruction_loss(const dif::ParamSet& params,
                           const std::vector<int>& ids, const LatentVector& z,
                           StyleCode c);
// -log q_D(c | soft).
double attribute_loss(const dif::ParamSet& params, const SoftSentence& soft,
                      StyleCode c);
// 0.5 * ||E(soft) - z||^2.
double independence_loss(const dif::ParamSet& params, const SoftSentence& soft,
                         const LatentVector& z);
// -log q_Dz(c | z).
double latent_style_discriminator_loss(const dif::ParamSet& params,
                                       const LatentVector& z, StyleCode c);
// Mean of -log q_Dz(c_i | z_i) over a batch, with z held fixed. When
// `grads` is non-null the gradient with respect to dz.* is added into it.
double latent_discriminator_batch_loss(const dif::ParamSet& params,
                                       const std::vector<LatentVector>& zs,
                                       const std::vector<StyleCode>& codes,
                                       dif::ParamSet* grads);
// -log q_D(c | x) for a real sentence presented as one-hot steps.
double real_discriminator_loss(const dif::ParamSet& params,
                               const std::vector<int>& ids, StyleCode c);

struct CosinePair {
  double loss = 0.0;      // 1 - cos(E(G~(E(x), c)), E(x))
  double loss_neg = 0.0;  // 1 - cos(E(G~(E(x), inverse c)), E(x))
};
CosinePair cosine_pair_loss(const dif::ParamSet& params, std::size_t max_len,
                            const std::vector<int>& ids, StyleCode c,
                            double tau);

struct LossParts {
  std::optional<double> ae, c, z, dz, cos, cosneg;
};

// Coefficient of every loss term in the generator objective of `cfg.arch`;
// terms outside the architecture get 0.
struct ObjectiveWeights {
  double ae = 1.0, c = 0.0, z = 0.0, dz = 0.0, cos = 0.0, cosneg = 0.0;
};
ObjectiveWeights objective_weights(const TrainConfig& cfg);

// ConfigError when a part required by cfg.arch is missing.
double objective(const TrainConfig& cfg, const LossParts& parts);

struct SentenceLoss {
  LossParts parts;
  double objective = 0.0;
};

// Fixed side of L_z and the cosine losses. Re-encoding a soft sentence uses
// a frozen copy of the encoder and compares against the latent vector as a
// constant target, so those terms send gradient only through the soft
// generation path.
struct SoftCritic {
  const dif::ParamSet* params = nullptr;  // encoder weights to freeze
  std::vector<double> latent_target;      // z, including training noise
};

// Critic pinned at `params` (used by finite-difference checks, which must
// hold the frozen side at the unperturbed point).
SoftCritic make_soft_critic(const dif::ParamSet& params,
                            const std::vector<int>& ids,
                            const std::vector<double>* noise);

// Full generator objective for one sentence with the given training noise.
// When `grads` is non-null the gradient with respect to every parameter is
// added into it. Without `critic` the frozen side is taken from the current
// parameters.
SentenceLoss sentence_objective(const dif::ParamSet& params,
                                const TrainConfig& cfg,
                                const std::vector<int>& ids, StyleCode source,
                                double tau, const std::vector<double>* noise,
                                dif::ParamSet* grads,
                                const SoftCritic* critic = nullptr);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double tau = 0.0;
  LossParts means;
  double objective = 0.0;
};

struct TrainingLog {
  std::vector<EpochLog> epochs;

  // epoch,tau,loss_ae,loss_c,loss_z,loss_dz,loss_cos,loss_cosneg,objective
  // with empty cells for terms the architecture does not use.
  std::string to_csv() const;
};

struct TrainResult {
  StyleModel model;
  TrainingLog log;
};

// Deterministic in (corpus, cfg). Throws DivergenceError on a non-finite loss.
// `partial_log`, when given, receives the epochs completed so far even if
// training diverges.
TrainResult train(const LabeledCorpus& corpus, const TrainConfig& cfg,
                  TrainingLog* partial_log = nullptr);

// Greedy transfer of every item to the inverse of its label.
TransferBatch transfer(const StyleModel& model, const LabeledCorpus& corpus);

}  // namespace stylebench

#endif  // STYLEBENCH_ARCHITECTURES_HPP_
