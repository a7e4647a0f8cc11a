// Two-sentence, 8-token toy setup shared by the unit tests and the acceptance
// run for finite-difference checks of the full objectives.
#ifndef STYLEBENCH_TESTS_TOY_MODEL_HPP_
#define STYLEBENCH_TESTS_TOY_MODEL_HPP_

#include <cstdint>
#include <vector>

#include "stylebench/architectures.hpp"
#include "stylebench/random.hpp"

namespace toy {

inline stylebench::TrainConfig config(stylebench::Arch arch) {
  auto cfg = stylebench::TrainConfig::defaults_for(arch);
  cfg.embed = 3;
  cfg.hidden = 4;
  cfg.z_dim = 3;
  cfg.max_len = 5;
  cfg.init_scale = 0.5;
  return cfg;
}

// Four regular tokens plus the four specials.
inline stylebench::Vocab vocab() { return stylebench::Vocab({"good", "bad", "food", "was"}); }

struct Sample {
  std::vector<int> ids;
  stylebench::StyleCode source;
  std::vector<double> noise;
};

inline std::vector<Sample> samples(const stylebench::TrainConfig& cfg, std::uint64_t seed) {
  const auto v = vocab();
  stylebench::Rng rng(seed, "toy-noise");
  std::vector<Sample> out;
  out.push_back({stylebench::encode_ids(v, stylebench::tokenize("food was good"), cfg.max_len),
                 stylebench::StyleCode(1), {}});
  out.push_back({stylebench::encode_ids(v, stylebench::tokenize("bad food"), cfg.max_len),
                 stylebench::StyleCode(0), {}});
  for (auto& s : out) s.noise = stylebench::draw_latent_noise(rng, cfg.z_dim, cfg.sigma_z);
  return out;
}

// Max relative error of the summed two-sentence objective of `arch`, with the
// frozen critic pinned at the unperturbed parameters.
inline double objective_grad_error(stylebench::Arch arch, std::uint64_t seed) {
  const auto cfg = config(arch);
  const auto params = stylebench::init_params(cfg, vocab().size(), seed);
  const auto batch = samples(cfg, seed);
  std::vector<stylebench::SoftCritic> critics;
  for (const auto& s : batch) {
    critics.push_back(stylebench::make_soft_critic(params, s.ids, &s.noise));
  }
  const double tau = 0.7;
  auto loss = [&](const stylebench::dif::ParamSet& p, stylebench::dif::ParamSet* grads) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      total += stylebench::sentence_objective(p, cfg, batch[i].ids, batch[i].source, tau,
                                              &batch[i].noise, grads, &critics[i])
                   .objective;
    }
    return total;
  };
  return stylebench::dif::grad_check(loss, params, 1e-5);
}

}  // namespace toy

#endif  // STYLEBENCH_TESTS_TOY_MODEL_HPP_
