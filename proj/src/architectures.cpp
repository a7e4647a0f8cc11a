#include "stylebench/architectures.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "stylebench/errors.hpp"

namespace stylebench {

using dif::Graph;
using dif::GruCell;
using dif::ParamSet;
using dif::Tensor;
using dif::Var;

namespace {

// Tokens fed to the encoder (and to D for real data): everything after BOS up
// to and including EOS.
std::vector<int> content_ids(const std::vector<int>& ids) {
  std::vector<int> out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (i == 0 && id == kBos) continue;
    if (id == kPad) break;
    out.push_back(id);
    if (id == kEos) break;
  }
  if (out.empty()) out.push_back(kEos);
  return out;
}

// Encoder weights bound inside one Graph, either as live parameters or as
// constants (a frozen critic that passes no gradient to its weights).
struct EncoderVars {
  Var embedding;
  GruCell cell;
  Var w_z, b_z;
};

// Binds the model parameters inside one Graph and builds the sub-networks.
class ModelGraph {
 public:
  explicit ModelGraph(Graph& g) : g_(g) {}

  Var embedding() { return lazy(embedding_, "embedding"); }

  const EncoderVars& encoder() {
    if (!enc_) {
      enc_ = EncoderVars{embedding(), GruCell::bind(g_, "enc."),
                         g_.param("enc.W_z"), g_.param("enc.b_z")};
    }
    return *enc_;
  }

  // Copy of the encoder taken from `frozen` as graph constants.
  const EncoderVars& frozen_encoder(const ParamSet& frozen) {
    if (!frozen_enc_) {
      auto c = [&](const std::string& name) { return g_.constant(frozen.at(name)); };
      GruCell cell{c("enc.W_u"), c("enc.U_u"), c("enc.b_u"),
                   c("enc.W_r"), c("enc.U_r"), c("enc.b_r"),
                   c("enc.W_h"), c("enc.U_h"), c("enc.b_h")};
      frozen_enc_ = EncoderVars{c("embedding"), cell, c("enc.W_z"), c("enc.b_z")};
    }
    return *frozen_enc_;
  }

  Var encode_inputs(const EncoderVars& enc, const std::vector<Var>& inputs) {
    const std::size_t hidden = g_.size(enc.cell.b_u);
    Var h = g_.constant(std::vector<double>(hidden, 0.0));
    for (Var x : inputs) h = enc.cell.step(g_, h, x);
    return g_.affine(enc.w_z, h, enc.b_z);
  }

  Var encode_ids(const std::vector<int>& ids) {
    const EncoderVars& enc = encoder();
    std::vector<Var> inputs;
    for (int id : content_ids(ids)) inputs.push_back(g_.row(enc.embedding, id));
    return encode_inputs(enc, inputs);
  }

  Var encode_soft(const EncoderVars& enc, const std::vector<Var>& probs) {
    std::vector<Var> inputs;
    inputs.reserve(probs.size());
    for (Var p : probs) inputs.push_back(g_.matvec_t(enc.embedding, p));
    return encode_inputs(enc, inputs);
  }

  Var encode_soft(const std::vector<Var>& probs) {
    return encode_soft(encoder(), probs);
  }

  Var init_hidden(Var z, StyleCode c) {
    const auto oh = c.one_hot();
    const Var zc = g_.concat(z, g_.constant({oh[0], oh[1]}));
    return g_.affine(lazy(gen_winit_, "gen.W_init"), zc,
                     lazy(gen_binit_, "gen.b_init"));
  }

  Var gen_step(Var h, Var x) {
    if (!gen_) gen_ = GruCell::bind(g_, "gen.");
    return gen_->step(g_, h, x);
  }

  Var logits(Var h) {
    return g_.affine(lazy(gen_wout_, "gen.W_out"), h,
                     lazy(gen_bout_, "gen.b_out"));
  }

  // Mean NLL of ids[1..] (through EOS) under teacher forcing.
  Var teacher_forced_nll(Var h0, const std::vector<int>& ids) {
    std::vector<int> seq = {kBos};
    for (int id : content_ids(ids)) seq.push_back(id);
    std::vector<std::pair<double, Var>> terms;
    const double w = -1.0 / static_cast<double>(seq.size() - 1);
    Var h = h0;
    for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
      h = gen_step(h, g_.row(embedding(), seq[t]));
      const Var logp = g_.log_softmax(logits(h));
      terms.emplace_back(w, g_.pick(logp, static_cast<std::size_t>(seq[t + 1])));
    }
    return g_.weighted_sum(terms);
  }

  std::vector<Var> soft_generate(Var h0, double tau, std::size_t steps) {
    std::vector<Var> probs;
    probs.reserve(steps);
    Var h = h0;
    Var x = g_.row(embedding(), kBos);
    for (std::size_t t = 0; t < steps; ++t) {
      h = gen_step(h, x);
      const Var p = g_.softmax(logits(h), tau);
      probs.push_back(p);
      x = g_.matvec_t(embedding(), p);
    }
    return probs;
  }

  // log q_D(. | soft sentence): mean-pooled soft embeddings -> dense -> 2-way.
  Var disc_log_probs(const std::vector<Var>& probs) {
    const Var emb = lazy(disc_emb_, "disc.embedding");
    std::vector<Var> pooled;
    pooled.reserve(probs.size());
    for (Var p : probs) pooled.push_back(g_.matvec_t(emb, p));
    const Var m = g_.mean(pooled);
    return g_.log_softmax(
        g_.affine(lazy(disc_w_, "disc.W"), m, lazy(disc_b_, "disc.b")));
  }

  Var disc_log_probs_ids(const std::vector<int>& ids) {
    const Var emb = lazy(disc_emb_, "disc.embedding");
    std::vector<Var> rows;
    for (int id : content_ids(ids)) rows.push_back(g_.row(emb, id));
    const Var m = g_.mean(rows);
    return g_.log_softmax(
        g_.affine(lazy(disc_w_, "disc.W"), m, lazy(disc_b_, "disc.b")));
  }

  Var dz_log_probs(Var z) {
    return g_.log_softmax(
        g_.affine(lazy(dz_w_, "dz.W"), z, lazy(dz_b_, "dz.b")));
  }

 private:
  Var lazy(std::optional<Var>& slot, const char* name) {
    if (!slot) slot = g_.param(name);
    return *slot;
  }

  Graph& g_;
  std::optional<Var> embedding_, gen_winit_, gen_binit_,
      gen_wout_, gen_bout_, disc_emb_, disc_w_, disc_b_, dz_w_, dz_b_;
  std::optional<EncoderVars> enc_, frozen_enc_;
  std::optional<GruCell> gen_;
};

std::vector<Var> constant_steps(Graph& g, const SoftSentence& soft) {
  std::vector<Var> out;
  out.reserve(soft.steps.size());
  for (const auto& p : soft.steps) out.push_back(g.constant(p));
  return out;
}

std::size_t soft_steps(std::size_t max_len) {
  if (max_len < 2) throw ConfigError("max_len must be >= 2");
  return max_len - 1;
}

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

bool all_finite(const LossParts& p, double objective) {
  for (const auto& part : {p.ae, p.c, p.z, p.dz, p.cos, p.cosneg}) {
    if (part && !std::isfinite(*part)) return false;
  }
  return std::isfinite(objective);
}

std::map<std::string, double> parts_map(const LossParts& p, double objective) {
  std::map<std::string, double> m;
  if (p.ae) m["loss_ae"] = *p.ae;
  if (p.c) m["loss_c"] = *p.c;
  if (p.z) m["loss_z"] = *p.z;
  if (p.dz) m["loss_dz"] = *p.dz;
  if (p.cos) m["loss_cos"] = *p.cos;
  if (p.cosneg) m["loss_cosneg"] = *p.cosneg;
  m["objective"] = objective;
  return m;
}

}  // namespace

// ------------------------------------------------------------ TrainConfig

std::string_view arch_name(Arch arch) {
  switch (arch) {
    case Arch::kBaseline: return "baseline";
    case Arch::kDisc: return "disc";
    case Arch::kSae: return "sae";
    case Arch::kCombo: return "combo";
  }
  return "baseline";
}

Arch parse_arch(std::string_view name) {
  if (name == "baseline") return Arch::kBaseline;
  if (name == "disc") return Arch::kDisc;
  if (name == "sae") return Arch::kSae;
  if (name == "combo") return Arch::kCombo;
  throw ConfigError("unknown architecture '" + std::string(name) +
                    "' (expected baseline, disc, sae or combo)");
}

bool uses_latent_discriminator(Arch arch) {
  return arch == Arch::kDisc || arch == Arch::kCombo;
}

bool uses_cosine_losses(Arch arch) {
  return arch == Arch::kSae || arch == Arch::kCombo;
}

TrainConfig TrainConfig::defaults_for(Arch arch) {
  TrainConfig cfg;
  cfg.arch = arch;
  cfg.lambda_dz = uses_latent_discriminator(arch) ? 1.0 : 0.0;
  cfg.lambda_cos = uses_cosine_losses(arch) ? 1.0 : 0.0;
  cfg.lambda_cosneg = uses_cosine_losses(arch) ? 1.0 : 0.0;
  return cfg;
}

double TrainConfig::tau_at(std::size_t epoch) const {
  return std::max(tau_min,
                  tau0 * std::exp(-tau_decay * static_cast<double>(epoch)));
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(lambda_c > 0 && lambda_z > 0, "lambda_c and lambda_z must be > 0");
  if (uses_latent_discriminator(arch)) {
    require(lambda_dz > 0, "lambda_dz must be > 0 for " +
                               std::string(arch_name(arch)));
  } else {
    require(lambda_dz == 0, "lambda_dz must be 0 for " +
                                std::string(arch_name(arch)));
  }
  if (uses_cosine_losses(arch)) {
    require(lambda_cos > 0 && lambda_cosneg > 0,
            "lambda_cos and lambda_cosneg must be > 0 for " +
                std::string(arch_name(arch)));
  } else {
    require(lambda_cos == 0 && lambda_cosneg == 0,
            "lambda_cos and lambda_cosneg must be 0 for " +
                std::string(arch_name(arch)));
  }
  require(tau_min > 0 && tau0 >= tau_min, "need tau0 >= tau_min > 0");
  require(tau_decay >= 0, "tau_decay must be >= 0");
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(embed >= 1 && hidden >= 1 && z_dim >= 1, "dims must be >= 1");
  require(max_len >= 2, "max_len must be >= 2");
  require(vocab_max >= 5, "vocab_max must be >= 5");
  require(lr > 0 && disc_lr > 0, "learning rates must be > 0");
  require(sigma_z >= 0, "sigma_z must be >= 0");
  require(grad_clip > 0, "grad_clip must be > 0");
  require(init_scale > 0, "init_scale must be > 0");
}

void TrainConfig::apply(const std::map<std::string, std::string>& overrides) {
  for (const auto& [key, value] : overrides) {
    auto as_double = [&] {
      std::size_t pos = 0;
      double v = 0;
      try {
        v = std::stod(value, &pos);
      } catch (const std::exception&) {
        pos = 0;
      }
      if (pos == 0 || pos != value.size() || !std::isfinite(v)) {
        throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
      }
      return v;
    };
    auto as_count = [&] {
      if (value.empty() ||
          value.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" +
                          value + "'");
      }
      return static_cast<std::size_t>(std::stoull(value));
    };
    if (key == "arch") arch = parse_arch(value);
    else if (key == "lambda_c") lambda_c = as_double();
    else if (key == "lambda_z") lambda_z = as_double();
    else if (key == "lambda_dz") lambda_dz = as_double();
    else if (key == "lambda_cos") lambda_cos = as_double();
    else if (key == "lambda_cosneg") lambda_cosneg = as_double();
    else if (key == "tau0") tau0 = as_double();
    else if (key == "tau_min") tau_min = as_double();
    else if (key == "tau_decay") tau_decay = as_double();
    else if (key == "epochs") epochs = as_count();
    else if (key == "batch_size") batch_size = as_count();
    else if (key == "seed") seed = as_count();
    else if (key == "embed") embed = as_count();
    else if (key == "hidden") hidden = as_count();
    else if (key == "z_dim") z_dim = as_count();
    else if (key == "max_len") max_len = as_count();
    else if (key == "vocab_max") vocab_max = as_count();
    else if (key == "lr") lr = as_double();
    else if (key == "disc_lr") disc_lr = as_double();
    else if (key == "sigma_z") sigma_z = as_double();
    else if (key == "grad_clip") grad_clip = as_double();
    else if (key == "init_scale") init_scale = as_double();
    else if (key == "disc_pretrain_epochs") disc_pretrain_epochs = as_count();
    else throw ConfigError("unknown config key '" + key + "'");
  }
}

nlohmann::ordered_json TrainConfig::to_json() const {
  nlohmann::ordered_json j;
  j["arch"] = arch_name(arch);
  j["lambda_c"] = lambda_c;
  j["lambda_z"] = lambda_z;
  j["lambda_dz"] = lambda_dz;
  j["lambda_cos"] = lambda_cos;
  j["lambda_cosneg"] = lambda_cosneg;
  j["tau0"] = tau0;
  j["tau_min"] = tau_min;
  j["tau_decay"] = tau_decay;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["embed"] = embed;
  j["hidden"] = hidden;
  j["z_dim"] = z_dim;
  j["max_len"] = max_len;
  j["vocab_max"] = vocab_max;
  j["lr"] = lr;
  j["disc_lr"] = disc_lr;
  j["sigma_z"] = sigma_z;
  j["grad_clip"] = grad_clip;
  j["init_scale"] = init_scale;
  j["disc_pretrain_epochs"] = disc_pretrain_epochs;
  return j;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  try {
    TrainConfig c;
    c.arch = parse_arch(j.at("arch").get<std::string>());
    c.lambda_c = j.at("lambda_c").get<double>();
    c.lambda_z = j.at("lambda_z").get<double>();
    c.lambda_dz = j.at("lambda_dz").get<double>();
    c.lambda_cos = j.at("lambda_cos").get<double>();
    c.lambda_cosneg = j.at("lambda_cosneg").get<double>();
    c.tau0 = j.at("tau0").get<double>();
    c.tau_min = j.at("tau_min").get<double>();
    c.tau_decay = j.at("tau_decay").get<double>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.embed = j.at("embed").get<std::size_t>();
    c.hidden = j.at("hidden").get<std::size_t>();
    c.z_dim = j.at("z_dim").get<std::size_t>();
    c.max_len = j.at("max_len").get<std::size_t>();
    c.vocab_max = j.at("vocab_max").get<std::size_t>();
    c.lr = j.at("lr").get<double>();
    c.disc_lr = j.at("disc_lr").get<double>();
    c.sigma_z = j.at("sigma_z").get<double>();
    c.grad_clip = j.at("grad_clip").get<double>();
    c.init_scale = j.at("init_scale").get<double>();
    c.disc_pretrain_epochs = j.at("disc_pretrain_epochs").get<std::size_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return std::string();
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError(line_no, "empty key");
    out[key] = value;
  }
  return out;
}

std::map<std::string, std::string> load_config_file(
    const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

// ------------------------------------------------------------- StyleModel

std::string StyleModel::to_json() const {
  nlohmann::ordered_json j;
  j["arch"] = arch_name(config.arch);
  j["config"] = config.to_json();
  j["seed"] = config.seed;
  j["vocab"] = vocab.tokens();
  const nlohmann::ordered_json tensors = params.to_json();
  for (const auto& [k, v] : tensors.items()) j[k] = v;
  return j.dump() + "\n";
}

StyleModel StyleModel::from_json(const std::string& text) {
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    StyleModel m;
    m.config = TrainConfig::from_json(j.at("config"));
    m.vocab = Vocab(j.at("vocab").get<std::vector<std::string>>());
    m.params = ParamSet::from_json(j);
    if (m.params.at("embedding").rows() != m.vocab.size()) {
      throw VocabMismatch("embedding rows differ from vocabulary size");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model checkpoint: ") +
                          e.what());
  }
}

void StyleModel::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << to_json();
}

StyleModel StyleModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open model " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

// ------------------------------------------------------------- operations

ParamSet init_params(const TrainConfig& cfg, std::size_t vocab_size,
                     std::uint64_t seed) {
  Rng rng(seed, "init");
  const double s = cfg.init_scale;
  ParamSet p;
  p.add("embedding", Tensor::uniform({vocab_size, cfg.embed}, rng, s));
  GruCell::init(p, "enc.", cfg.embed, cfg.hidden, rng, s);
  p.add("enc.W_z", Tensor::uniform({cfg.z_dim, cfg.hidden}, rng, s));
  p.add("enc.b_z", Tensor::uniform({cfg.z_dim}, rng, s));
  p.add("gen.W_init", Tensor::uniform({cfg.hidden, cfg.z_dim + 2}, rng, s));
  p.add("gen.b_init", Tensor::uniform({cfg.hidden}, rng, s));
  GruCell::init(p, "gen.", cfg.embed, cfg.hidden, rng, s);
  p.add("gen.W_out", Tensor::uniform({vocab_size, cfg.hidden}, rng, s));
  p.add("gen.b_out", Tensor::uniform({vocab_size}, rng, s));
  p.add("disc.embedding", Tensor::uniform({vocab_size, cfg.embed}, rng, s));
  p.add("disc.W", Tensor::uniform({2, cfg.embed}, rng, s));
  p.add("disc.b", Tensor::uniform({2}, rng, s));
  p.add("dz.W", Tensor::uniform({2, cfg.z_dim}, rng, s));
  p.add("dz.b", Tensor::uniform({2}, rng, s));
  return p;
}

LatentVector encode(const ParamSet& params, const std::vector<int>& ids,
                    const std::vector<double>* noise) {
  Graph g(&params);
  ModelGraph m(g);
  Var z = m.encode_ids(ids);
  if (noise) z = g.add(z, g.constant(*noise));
  return {g.value(z)};
}

std::vector<double> draw_latent_noise(Rng& rng, std::size_t z_dim,
                                      double sigma) {
  std::vector<double> out(z_dim);
  for (double& v : out) v = sigma * rng.normal();
  return out;
}

SoftSentence generate_soft(const ParamSet& params, std::size_t max_len,
                           const LatentVector& z, StyleCode c, double tau) {
  if (!(tau > 0)) throw ConfigError("tau must be > 0");
  Graph g(&params);
  ModelGraph m(g);
  const Var h0 = m.init_hidden(g.constant(z.z), c);
  SoftSentence out;
  for (Var p : m.soft_generate(h0, tau, soft_steps(max_len))) {
    out.steps.push_back(g.value(p));
  }
  return out;
}

std::vector<int> generate_greedy_ids(const ParamSet& params,
                                     std::size_t max_len,
                                     const LatentVector& z, StyleCode c) {
  Graph g(&params);
  ModelGraph m(g);
  Var h = m.init_hidden(g.constant(z.z), c);
  int prev = kBos;
  std::vector<int> out;
  for (std::size_t t = 0; t < soft_steps(max_len); ++t) {
    h = m.gen_step(h, g.row(m.embedding(), prev));
    const auto& logits = g.value(m.logits(h));
    const int next = static_cast<int>(
        std::max_element(logits.begin(), logits.end()) - logits.begin());
    if (next == kEos) break;
    out.push_back(next);
    prev = next;
  }
  return out;
}

Sentence generate_greedy(const ParamSet& params, const Vocab& vocab,
                         std::size_t max_len, const LatentVector& z,
                         StyleCode c) {
  Sentence s;
  for (int id : generate_greedy_ids(params, max_len, z, c)) {
    if (id == kPad || id == kBos || id == kEos) continue;
    s.tokens.push_back(vocab.token_of(id));
  }
  if (s.empty()) s.tokens.push_back(vocab.token_of(kUnk));
  return s;
}

double reconstruction_loss(const ParamSet& params, const std::vector<int>& ids,
                           const LatentVector& z, StyleCode c) {
  Graph g(&params);
  ModelGraph m(g);
  return g.scalar(m.teacher_forced_nll(m.init_hidden(g.constant(z.z), c), ids));
}

double attribute_loss(const ParamSet& params, const SoftSentence& soft,
                      StyleCode c) {
  Graph g(&params);
  ModelGraph m(g);
  const Var logp = m.disc_log_probs(constant_steps(g, soft));
  return -g.value(logp)[static_cast<std::size_t>(c.label())];
}

double independence_loss(const ParamSet& params, const SoftSentence& soft,
                         const LatentVector& z) {
  Graph g(&params);
  ModelGraph m(g);
  const Var e = m.encode_soft(constant_steps(g, soft));
  return g.scalar(g.half_sq_dist(e, g.constant(z.z)));
}

double latent_style_discriminator_loss(const ParamSet& params,
                                       const LatentVector& z, StyleCode c) {
  Graph g(&params);
  ModelGraph m(g);
  const Var logp = m.dz_log_probs(g.constant(z.z));
  return -g.value(logp)[static_cast<std::size_t>(c.label())];
}

double latent_discriminator_batch_loss(const ParamSet& params,
                                       const std::vector<LatentVector>& zs,
                                       const std::vector<StyleCode>& codes,
                                       ParamSet* grads) {
  if (zs.size() != codes.size() || zs.empty()) {
    throw AlignmentError(zs.size(), codes.size());
  }
  const double n = static_cast<double>(zs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < zs.size(); ++i) {
    Graph g(&params);
    ModelGraph m(g);
    const Var loss = g.scale(
        g.pick(m.dz_log_probs(g.constant(zs[i].z)),
               static_cast<std::size_t>(codes[i].label())),
        -1.0 / n);
    total += g.scalar(loss);
    if (grads) {
      g.backward(loss);
      g.accumulate_param_grads(*grads);
    }
  }
  return total;
}

double real_discriminator_loss(const ParamSet& params,
                               const std::vector<int>& ids, StyleCode c) {
  Graph g(&params);
  ModelGraph m(g);
  const Var logp = m.disc_log_probs_ids(ids);
  return -g.value(logp)[static_cast<std::size_t>(c.label())];
}

CosinePair cosine_pair_loss(const ParamSet& params, std::size_t max_len,
                            const std::vector<int>& ids, StyleCode c,
                            double tau) {
  Graph g(&params);
  ModelGraph m(g);
  const Var z = m.encode_ids(ids);
  const std::size_t steps = soft_steps(max_len);
  const Var same = m.encode_soft(m.soft_generate(m.init_hidden(z, c), tau, steps));
  const Var inv =
      m.encode_soft(m.soft_generate(m.init_hidden(z, c.inverse()), tau, steps));
  return {1.0 - g.scalar(g.cosine(same, z)), 1.0 - g.scalar(g.cosine(inv, z))};
}

ObjectiveWeights objective_weights(const TrainConfig& cfg) {
  ObjectiveWeights w;
  w.c = cfg.lambda_c;
  w.z = cfg.lambda_z;
  if (uses_latent_discriminator(cfg.arch)) w.dz = -cfg.lambda_dz;
  if (uses_cosine_losses(cfg.arch)) {
    w.cos = cfg.lambda_cos;
    w.cosneg = cfg.lambda_cosneg;
  }
  return w;
}

double objective(const TrainConfig& cfg, const LossParts& parts) {
  auto need = [](const std::optional<double>& p, const char* name) {
    if (!p) throw ConfigError(std::string("objective is missing part ") + name);
    return *p;
  };
  const ObjectiveWeights w = objective_weights(cfg);
  double total = need(parts.ae, "loss_ae") + w.c * need(parts.c, "loss_c") +
                 w.z * need(parts.z, "loss_z");
  if (uses_latent_discriminator(cfg.arch)) total += w.dz * need(parts.dz, "loss_dz");
  if (uses_cosine_losses(cfg.arch)) {
    total += w.cos * need(parts.cos, "loss_cos") +
             w.cosneg * need(parts.cosneg, "loss_cosneg");
  }
  return total;
}

SoftCritic make_soft_critic(const ParamSet& params, const std::vector<int>& ids,
                            const std::vector<double>* noise) {
  Graph g(&params);
  ModelGraph m(g);
  Var z = m.encode_ids(ids);
  if (noise) z = g.add(z, g.constant(*noise));
  return {&params, g.value(z)};
}

SentenceLoss sentence_objective(const ParamSet& params, const TrainConfig& cfg,
                                const std::vector<int>& ids, StyleCode source,
                                double tau, const std::vector<double>* noise,
                                ParamSet* grads, const SoftCritic* critic) {
  Graph g(&params);
  ModelGraph m(g);
  const ObjectiveWeights w = objective_weights(cfg);
  const std::size_t steps = soft_steps(cfg.max_len);
  const StyleCode target = source.inverse();

  Var z = m.encode_ids(ids);
  if (noise) z = g.add(z, g.constant(*noise));
  const Var target_z = g.constant(critic ? critic->latent_target : g.value(z));
  const EncoderVars& critic_enc =
      m.frozen_encoder(critic ? *critic->params : params);

  const Var h0 = m.init_hidden(z, source);
  const Var loss_ae = m.teacher_forced_nll(h0, ids);

  // Soft transfer to the inverse code drives L_c, L_z and L_cos-.
  const std::vector<Var> soft_inv =
      m.soft_generate(m.init_hidden(z, target), tau, steps);
  const Var loss_c = g.scale(
      g.pick(m.disc_log_probs(soft_inv), static_cast<std::size_t>(target.label())),
      -1.0);
  const Var reencoded_inv = m.encode_soft(critic_enc, soft_inv);
  const Var loss_z = g.half_sq_dist(reencoded_inv, target_z);

  std::vector<std::pair<double, Var>> terms = {
      {w.ae, loss_ae}, {w.c, loss_c}, {w.z, loss_z}};
  SentenceLoss out;
  out.parts.ae = g.scalar(loss_ae);
  out.parts.c = g.scalar(loss_c);
  out.parts.z = g.scalar(loss_z);

  if (uses_latent_discriminator(cfg.arch)) {
    const Var loss_dz = g.scale(
        g.pick(m.dz_log_probs(z), static_cast<std::size_t>(source.label())),
        -1.0);
    terms.emplace_back(w.dz, loss_dz);
    out.parts.dz = g.scalar(loss_dz);
  }
  if (uses_cosine_losses(cfg.arch)) {
    const Var reencoded_same =
        m.encode_soft(critic_enc, m.soft_generate(h0, tau, steps));
    const Var loss_cos = g.add_scalar(g.scale(g.cosine(reencoded_same, target_z), -1.0), 1.0);
    const Var loss_cosneg =
        g.add_scalar(g.scale(g.cosine(reencoded_inv, target_z), -1.0), 1.0);
    terms.emplace_back(w.cos, loss_cos);
    terms.emplace_back(w.cosneg, loss_cosneg);
    out.parts.cos = g.scalar(loss_cos);
    out.parts.cosneg = g.scalar(loss_cosneg);
  }
  const Var total = g.weighted_sum(terms);
  out.objective = g.scalar(total);
  if (grads) {
    g.backward(total);
    g.accumulate_param_grads(*grads);
  }
  return out;
}

std::string TrainingLog::to_csv() const {
  std::string out =
      "epoch,tau,loss_ae,loss_c,loss_z,loss_dz,loss_cos,loss_cosneg,objective\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string();
  };
  for (const auto& e : epochs) {
    out += std::to_string(e.epoch) + ',' + fmt_double(e.tau) + ',' +
           cell(e.means.ae) + ',' + cell(e.means.c) + ',' + cell(e.means.z) +
           ',' + cell(e.means.dz) + ',' + cell(e.means.cos) + ',' +
           cell(e.means.cosneg) + ',' + fmt_double(e.objective) + '\n';
  }
  return out;
}

namespace {

class Trainer {
 public:
  Trainer(const LabeledCorpus& corpus, const TrainConfig& cfg)
      : cfg_(cfg),
        shuffle_rng_(cfg.seed, "shuffle"),
        noise_rng_(cfg.seed, "noise") {
    cfg_.validate();
    if (corpus.empty()) throw EmptyCorpus("training corpus");
    if (corpus.count_label(0) == 0 || corpus.count_label(1) == 0) {
      throw DegenerateCorpus();
    }
    model_.config = cfg_;
    model_.vocab = build_vocab(corpus, cfg_.vocab_max);
    model_.params = init_params(cfg_, model_.vocab.size(), cfg_.seed);
    for (const auto& item : corpus.items) {
      ids_.push_back(encode_ids(model_.vocab, item.sentence, cfg_.max_len));
      labels_.push_back(item.label);
    }
    order_.resize(ids_.size());
    std::iota(order_.begin(), order_.end(), 0);
  }

  TrainResult run(TrainingLog* partial) {
    for (std::size_t e = 0; e < cfg_.disc_pretrain_epochs; ++e) disc_epoch();
    for (std::size_t t = 0; t < cfg_.epochs; ++t) {
      if (t > 0) disc_epoch();
      EpochLog entry = generator_epoch(t);
      if (!all_finite(entry.means, entry.objective)) {
        throw DivergenceError(entry.epoch, parts_map(entry.means, entry.objective));
      }
      log_.epochs.push_back(entry);
      if (partial) *partial = log_;
    }
    return {std::move(model_), std::move(log_)};
  }

 private:
  std::vector<std::vector<std::size_t>> minibatches() {
    shuffle_rng_.shuffle(std::span<std::size_t>(order_));
    std::vector<std::vector<std::size_t>> out;
    for (std::size_t i = 0; i < order_.size(); i += cfg_.batch_size) {
      const std::size_t end = std::min(order_.size(), i + cfg_.batch_size);
      out.emplace_back(order_.begin() + static_cast<long>(i),
                       order_.begin() + static_cast<long>(end));
    }
    return out;
  }

  // One pass of D over real sentences.
  void disc_epoch() {
    for (const auto& batch : minibatches()) {
      ParamSet grads;
      for (std::size_t idx : batch) {
        Graph g(&model_.params);
        ModelGraph m(g);
        const Var loss = g.scale(
            g.pick(m.disc_log_probs_ids(ids_[idx]),
                   static_cast<std::size_t>(labels_[idx])),
            -1.0 / static_cast<double>(batch.size()));
        g.backward(loss);
        g.accumulate_param_grads(grads);
      }
      dif::adam_step(model_.params, grads, disc_adam_, {.lr = cfg_.disc_lr});
    }
  }

  // One D_z minimization step on the (z, c) pairs of a minibatch.
  void latent_disc_step(const std::vector<std::size_t>& batch) {
    std::vector<LatentVector> zs;
    std::vector<StyleCode> codes;
    for (std::size_t idx : batch) {
      zs.push_back(encode(model_.params, ids_[idx]));
      codes.emplace_back(labels_[idx]);
    }
    ParamSet grads;
    latent_discriminator_batch_loss(model_.params, zs, codes, &grads);
    dif::adam_step(model_.params, grads, dz_adam_, {.lr = cfg_.disc_lr});
  }

  EpochLog generator_epoch(std::size_t t) {
    const double tau = cfg_.tau_at(t);
    LossParts sums;
    double objective_sum = 0.0;
    auto accumulate = [](std::optional<double>& sum,
                         const std::optional<double>& v) {
      if (v) sum = sum.value_or(0.0) + *v;
    };
    for (const auto& batch : minibatches()) {
      if (uses_latent_discriminator(cfg_.arch)) latent_disc_step(batch);
      ParamSet grads;
      for (std::size_t idx : batch) {
        const auto noise = draw_latent_noise(noise_rng_, cfg_.z_dim, cfg_.sigma_z);
        const SentenceLoss l =
            sentence_objective(model_.params, cfg_, ids_[idx],
                               StyleCode(labels_[idx]), tau, &noise, &grads);
        accumulate(sums.ae, l.parts.ae);
        accumulate(sums.c, l.parts.c);
        accumulate(sums.z, l.parts.z);
        accumulate(sums.dz, l.parts.dz);
        accumulate(sums.cos, l.parts.cos);
        accumulate(sums.cosneg, l.parts.cosneg);
        objective_sum += l.objective;
      }
      ParamSet gen_grads = grads.subset(kGeneratorGroup);
      gen_grads.scale(1.0 / static_cast<double>(batch.size()));
      dif::clip_grad_norm(gen_grads, cfg_.grad_clip);
      dif::adam_step(model_.params, gen_grads, gen_adam_, {.lr = cfg_.lr});
    }
    const double n = static_cast<double>(ids_.size());
    EpochLog entry;
    entry.epoch = t + 1;
    entry.tau = tau;
    for (auto* slot : {&sums.ae, &sums.c, &sums.z, &sums.dz, &sums.cos, &sums.cosneg}) {
      if (*slot) **slot /= n;
    }
    entry.means = sums;
    entry.objective = objective_sum / n;
    return entry;
  }

  TrainConfig cfg_;
  StyleModel model_;
  TrainingLog log_;
  std::vector<std::vector<int>> ids_;
  std::vector<int> labels_;
  std::vector<std::size_t> order_;
  Rng shuffle_rng_;
  Rng noise_rng_;
  dif::AdamState gen_adam_, disc_adam_, dz_adam_;
};

}  // namespace

TrainResult train(const LabeledCorpus& corpus, const TrainConfig& cfg,
                  TrainingLog* partial_log) {
  Trainer trainer(corpus, cfg);
  return trainer.run(partial_log);
}

TransferBatch transfer(const StyleModel& model, const LabeledCorpus& corpus) {
  TransferBatch batch;
  batch.records.reserve(corpus.size());
  for (const auto& item : corpus.items) {
    const auto ids = encode_ids(model.vocab, item.sentence, model.config.max_len);
    const LatentVector z = encode(model.params, ids);
    const StyleCode source(item.label);
    batch.records.push_back(
        {item.sentence, source, source.inverse(),
         generate_greedy(model.params, model.vocab, model.config.max_len, z,
                         source.inverse())});
  }
  return batch;
}

}  // namespace stylebench
