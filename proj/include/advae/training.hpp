#pragma once

// The alternating minimax loop for the adversarial variants, the plain ELBO
// loop for the all-Gaussian baseline, checkpointing with full resume state
// (parameters, optimizer moments, RNG), and the metrics CSV.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advae/common.hpp"
#include "advae/data.hpp"
#include "advae/distributions.hpp"
#include "advae/games.hpp"
#include "advae/models.hpp"
#include "advae/nn.hpp"
#include "advae/random.hpp"
#include "advae/tensor.hpp"

namespace advae {

struct TrainConfig {
  int schema_version = 1;
  VariantKind variant = VariantKind::gaussian;
  Dataset dataset;
  std::size_t latent_dim = 2;
  std::size_t enc_noise_dim = 0;  // 0 -> latent_dim
  std::size_t dec_noise_dim = 0;  // 0 -> data_dim
  std::vector<std::size_t> enc_hidden{64, 64};
  std::vector<std::size_t> dec_hidden{64, 64};
  std::vector<std::size_t> disc_hidden{128, 128};
  Activation activation = Activation::relu;
  std::size_t disc_steps_per_gen_step = 5;
  double lr_encoder = 1e-4;
  double lr_decoder = 1e-4;
  double lr_disc_inference = 1e-4;
  double lr_disc_generative = 1e-4;
  std::size_t batch_size = 128;
  std::size_t total_steps = 1000;
  std::uint64_t seed = 1;
  std::optional<double> clamp_bound = 30.0;
  double sigma2 = 1.0;
  // the one latent prior the closed forms are derived against
  std::string prior = "standard_normal";
  bool alternate_games = false;
  std::size_t metrics_every = 10;
  std::size_t checkpoint_every = 1000;
  std::size_t eval_samples = 2000;
  std::string out_dir = "out";
  std::optional<std::string> resume_from;

  std::size_t data_dim() const { return dataset.data_dim(); }

  void validate() const {
    auto positive = [](double v, const char* field) {
      if (!(v > 0.0)) {
        throw ConfigError(std::string("config: ") + field + " must be positive");
      }
    };
    if (schema_version != 1) {
      throw ConfigError("config: unsupported schema_version " +
                        std::to_string(schema_version));
    }
    if (batch_size == 0) throw ConfigError("config: batch_size must be positive");
    if (latent_dim == 0) throw ConfigError("config: latent_dim must be positive");
    if (disc_steps_per_gen_step == 0) {
      throw ConfigError("config: disc_steps_per_gen_step must be positive");
    }
    if (metrics_every == 0) throw ConfigError("config: metrics_every must be positive");
    if (eval_samples < 2) throw ConfigError("config: eval_samples must be >= 2");
    positive(lr_encoder, "lr_encoder");
    positive(lr_decoder, "lr_decoder");
    positive(lr_disc_inference, "lr_disc_inference");
    positive(lr_disc_generative, "lr_disc_generative");
    positive(sigma2, "sigma2");
    if (clamp_bound && *clamp_bound <= 0.0) {
      throw ConfigError("config: clamp_bound must be positive when set");
    }
    if (enc_hidden.empty() || dec_hidden.empty() || disc_hidden.empty()) {
      throw ConfigError("config: hidden layer lists must be non-empty");
    }
    if (dataset.id == DatasetId::mixture_of_gaussians_2d &&
        dataset.mixture_components == 0) {
      throw ConfigError("config: mixture_components must be positive");
    }
    if (prior != "standard_normal") {
      throw ConfigError("config: prior '" + prior +
                        "' unsupported (only standard_normal)");
    }
    if (out_dir.empty()) throw ConfigError("config: out_dir must be non-empty");
  }
};

inline json to_json(const TrainConfig& c) {
  json j;
  j["schema_version"] = c.schema_version;
  j["variant"] = to_string(c.variant);
  j["dataset"] = to_string(c.dataset.id);
  j["mixture_components"] = c.dataset.mixture_components;
  j["latent_dim"] = c.latent_dim;
  j["enc_noise_dim"] = c.enc_noise_dim;
  j["dec_noise_dim"] = c.dec_noise_dim;
  j["enc_hidden"] = c.enc_hidden;
  j["dec_hidden"] = c.dec_hidden;
  j["disc_hidden"] = c.disc_hidden;
  j["activation"] = to_string(c.activation);
  j["disc_steps_per_gen_step"] = c.disc_steps_per_gen_step;
  j["lr_encoder"] = c.lr_encoder;
  j["lr_decoder"] = c.lr_decoder;
  j["lr_disc_inference"] = c.lr_disc_inference;
  j["lr_disc_generative"] = c.lr_disc_generative;
  j["batch_size"] = c.batch_size;
  j["total_steps"] = c.total_steps;
  j["seed"] = c.seed;
  j["clamp_bound"] = c.clamp_bound ? json(*c.clamp_bound) : json();
  j["sigma2"] = c.sigma2;
  j["prior"] = c.prior;
  j["alternate_games"] = c.alternate_games;
  j["metrics_every"] = c.metrics_every;
  j["checkpoint_every"] = c.checkpoint_every;
  j["eval_samples"] = c.eval_samples;
  j["out_dir"] = c.out_dir;
  j["resume_from"] = c.resume_from ? json(*c.resume_from) : json();
  return j;
}

inline TrainConfig config_from_json(const json& j) {
  static const char* known[] = {
      "schema_version", "variant", "dataset", "mixture_components",
      "latent_dim", "enc_noise_dim", "dec_noise_dim", "enc_hidden",
      "dec_hidden", "disc_hidden", "activation", "disc_steps_per_gen_step",
      "lr_encoder", "lr_decoder", "lr_disc_inference", "lr_disc_generative",
      "batch_size", "total_steps", "seed", "clamp_bound", "sigma2", "prior",
      "alternate_games", "metrics_every", "checkpoint_every", "eval_samples",
      "out_dir", "resume_from"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("config: unknown field '" + it.key() + "'");
  }
  TrainConfig c;
  auto get = [&j](const char* key, auto& out) {
    if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  get("schema_version", c.schema_version);
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  if (j.contains("dataset")) c.dataset.id = dataset_from_string(j.at("dataset").get<std::string>());
  get("mixture_components", c.dataset.mixture_components);
  get("latent_dim", c.latent_dim);
  get("enc_noise_dim", c.enc_noise_dim);
  get("dec_noise_dim", c.dec_noise_dim);
  get("enc_hidden", c.enc_hidden);
  get("dec_hidden", c.dec_hidden);
  get("disc_hidden", c.disc_hidden);
  if (j.contains("activation")) {
    c.activation = activation_from_string(j.at("activation").get<std::string>());
  }
  get("disc_steps_per_gen_step", c.disc_steps_per_gen_step);
  get("lr_encoder", c.lr_encoder);
  get("lr_decoder", c.lr_decoder);
  get("lr_disc_inference", c.lr_disc_inference);
  get("lr_disc_generative", c.lr_disc_generative);
  get("batch_size", c.batch_size);
  get("total_steps", c.total_steps);
  get("seed", c.seed);
  if (j.contains("clamp_bound")) {
    c.clamp_bound = j.at("clamp_bound").is_null()
                        ? std::nullopt
                        : std::optional<double>(j.at("clamp_bound").get<double>());
  }
  get("sigma2", c.sigma2);
  get("prior", c.prior);
  get("alternate_games", c.alternate_games);
  get("metrics_every", c.metrics_every);
  get("checkpoint_every", c.checkpoint_every);
  get("eval_samples", c.eval_samples);
  get("out_dir", c.out_dir);
  if (j.contains("resume_from") && !j.at("resume_from").is_null()) {
    c.resume_from = j.at("resume_from").get<std::string>();
  }
  return c;
}

inline std::string config_hash(const TrainConfig& c) {
  return hex64(fnv1a64(to_json(c).dump()));
}

// ---------------------------------------------------------------------------
// Metrics

struct MetricsRecord {
  std::size_t step = 0;
  std::optional<double> inf_value, inf_stderr;
  std::optional<double> gen_value, gen_stderr;
  std::optional<double> elbo, recon_nll, kl;
  std::optional<double> grad_norm_enc, grad_norm_dec;
  std::optional<double> grad_norm_disc_inf, grad_norm_disc_gen;
};

inline constexpr const char* kMetricsHeader =
    "step,game,value_estimate,stderr,grad_norm_enc,grad_norm_dec,"
    "grad_norm_disc_inf,grad_norm_disc_gen,elbo_baseline";

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const std::string& cfg_hash,
                std::uint64_t seed)
      : f_(path) {
    if (!f_) throw IoError("metrics: cannot open '" + path + "' for writing");
    f_ << "# advae " << kVersion << " config_hash=" << cfg_hash
       << " seed=" << seed << "\n";
    f_ << kMetricsHeader << "\n";
  }

  void write(const MetricsRecord& r) {
    auto opt = [](const std::optional<double>& v) {
      return v ? fmt_g17(*v) : std::string();
    };
    auto row = [&](const char* game, const std::optional<double>& value,
                   const std::optional<double>& se,
                   const std::optional<double>& elbo) {
      f_ << r.step << ',' << game << ',' << opt(value) << ',' << opt(se) << ','
         << opt(r.grad_norm_enc) << ',' << opt(r.grad_norm_dec) << ','
         << opt(r.grad_norm_disc_inf) << ',' << opt(r.grad_norm_disc_gen) << ','
         << opt(elbo) << "\n";
    };
    if (r.inf_value) row("inference", r.inf_value, r.inf_stderr, std::nullopt);
    if (r.gen_value) row("generative", r.gen_value, r.gen_stderr, std::nullopt);
    if (r.elbo) row("baseline", std::nullopt, std::nullopt, r.elbo);
    f_.flush();
    if (!f_) throw IoError("metrics: write failed");
  }

 private:
  std::ofstream f_;
};

// ---------------------------------------------------------------------------
// Train state

class TrainAbort : public NumericError {
 public:
  TrainAbort(const std::string& msg, std::size_t at_step, MetricsRecord last)
      : NumericError(msg), at_step_(at_step), last_(std::move(last)) {}
  std::size_t at_step() const { return at_step_; }
  const MetricsRecord& last_metrics() const { return last_; }

 private:
  std::size_t at_step_;
  MetricsRecord last_;
};

struct TrainState {
  TrainConfig config;
  ModelVariant model;
  std::optional<AdamState> opt_enc, opt_dec, opt_disc_inf, opt_disc_gen;
  std::size_t step = 0;  // generator updates performed
  RngStream rng{0};
  MetricsRecord last_metrics;
};

inline TrainState init_train_state(const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.config = cfg;
  s.rng = RngStream(cfg.seed);
  VariantDims dims;
  dims.data_dim = cfg.data_dim();
  dims.latent_dim = cfg.latent_dim;
  dims.encoder_noise_dim = cfg.enc_noise_dim;
  dims.decoder_noise_dim = cfg.dec_noise_dim;
  dims.encoder_hidden = cfg.enc_hidden;
  dims.decoder_hidden = cfg.dec_hidden;
  dims.disc_hidden = cfg.disc_hidden;
  s.model = make_variant(cfg.variant, dims, cfg.activation, cfg.clamp_bound,
                         cfg.sigma2, s.rng);
  s.opt_enc.emplace(s.model.encoder_mlp().named_params("encoder."),
                    AdamConfig{cfg.lr_encoder});
  s.opt_dec.emplace(s.model.decoder_mlp().named_params("decoder."),
                    AdamConfig{cfg.lr_decoder});
  if (s.model.inference_disc) {
    s.opt_disc_inf.emplace(
        s.model.inference_disc->net.named_params("disc_inference."),
        AdamConfig{cfg.lr_disc_inference});
  }
  if (s.model.generative_disc) {
    s.opt_disc_gen.emplace(
        s.model.generative_disc->net.named_params("disc_generative."),
        AdamConfig{cfg.lr_disc_generative});
  }
  return s;
}

// ---------------------------------------------------------------------------
// Baseline ELBO pieces

struct ElboParts {
  Tensor neg_elbo;  // graph-connected loss = nll + kl
  double elbo = 0.0;
  double recon_nll = 0.0;
  double kl = 0.0;
};

inline ElboParts baseline_elbo(const ModelVariant& v, const Tensor& x,
                               RngStream& rng) {
  if (v.encoder_implicit() || v.decoder_implicit()) {
    throw ConfigError("baseline_elbo: both sides must be Gaussian");
  }
  const auto& enc = std::get<GaussianEncoder>(v.encoder);
  const auto& dec = std::get<GaussianDecoder>(v.decoder);
  DiagonalGaussian posterior = enc.posterior(x);
  Tensor eps = make_noise(x.extent(0), v.latent_dim, rng);
  Tensor z = sample_reparam(posterior, eps);
  Tensor mu = dec.trunk.forward(z);
  Tensor nll = gaussian_nll_l2(x, mu, dec.sigma2);
  Tensor kl = kl_gaussian_prior(posterior);
  ElboParts parts;
  parts.neg_elbo = nll + kl;
  parts.recon_nll = nll.item();
  parts.kl = kl.item();
  parts.elbo = -parts.neg_elbo.item();
  return parts;
}

// ---------------------------------------------------------------------------
// Steps

namespace detail {

inline void ensure_finite_loss(const Tensor& loss, const char* who) {
  if (!std::isfinite(loss.item())) {
    throw NumericError(std::string(who) + ": non-finite loss");
  }
}

inline Tensor prior_noise(std::size_t rows, std::size_t latent, RngStream& rng) {
  return make_noise(rows, latent, rng);
}

}  // namespace detail

// disc_steps_per_gen_step ascent steps on each active discriminator, then one
// descent step on the generator parameters. Gaussian sides contribute their
// closed-form ELBO terms; implicit sides contribute their game losses.
inline MetricsRecord train_step_adversarial(TrainState& s, const Tensor& x) {
  ModelVariant& v = s.model;
  if (v.kind == VariantKind::gaussian) {
    throw ConfigError("train_step_adversarial: variant has no adversarial side");
  }
  v.validate();
  const TrainConfig& cfg = s.config;
  MetricsRecord rec;
  rec.step = s.step + 1;

  const bool inf_active = v.encoder_implicit();
  const bool gen_active = v.decoder_implicit();
  // alternate_games: odd steps play the inference game, even steps the
  // generative game (both discriminators still track their own game).
  const bool joint = !cfg.alternate_games || !(inf_active && gen_active);
  const bool play_inf = inf_active && (joint || (s.step % 2 == 0));
  const bool play_gen = gen_active && (joint || (s.step % 2 == 1));

  try {
    // discriminator ascent
    for (std::size_t k = 0; k < cfg.disc_steps_per_gen_step; ++k) {
      if (inf_active) {
        Graph g;
        ParamFreeze fz_e(v.encoder_params());
        ParamFreeze fz_d(v.decoder_params());
        Tensor z_q = encode(v, x, s.rng);
        Tensor z_p = detail::prior_noise(x.extent(0), v.latent_dim, s.rng);
        GameValue gv = inference_value(*v.inference_disc, x, z_q, z_p);
        Tensor loss = neg(gv.value);
        detail::ensure_finite_loss(loss, "inference discriminator step");
        zero_grads(v.inference_disc->net.params());
        g.backward(loss);
        rec.grad_norm_disc_inf = grad_l2_norm(v.inference_disc->net.params());
        s.opt_disc_inf->step();
        zero_grads(v.inference_disc->net.params());
        rec.inf_value = gv.value.item();
        rec.inf_stderr = gv.stderr_;
      }
      if (gen_active) {
        Graph g;
        ParamFreeze fz_e(v.encoder_params());
        ParamFreeze fz_d(v.decoder_params());
        Tensor z_q = encode(v, x, s.rng);
        Tensor x_fake = decode(v, z_q, s.rng);
        GameValue gv = generative_value(*v.generative_disc, z_q, x, x_fake);
        Tensor loss = neg(gv.value);
        detail::ensure_finite_loss(loss, "generative discriminator step");
        zero_grads(v.generative_disc->net.params());
        g.backward(loss);
        rec.grad_norm_disc_gen = grad_l2_norm(v.generative_disc->net.params());
        s.opt_disc_gen->step();
        zero_grads(v.generative_disc->net.params());
        rec.gen_value = gv.value.item();
        rec.gen_stderr = gv.stderr_;
      }
    }

    // generator descent
    {
      Graph g;
      Tensor z_q = encode(v, x, s.rng);
      std::optional<Tensor> total;
      auto accumulate = [&total](const Tensor& t) {
        total = total ? add(*total, t) : t;
      };
      bool decoder_in_graph = false;
      if (play_inf) {
        accumulate(inference_generator_loss(*v.inference_disc, x, z_q));
      } else if (!inf_active) {
        // Gaussian encoder: closed-form KL term
        const auto& enc = std::get<GaussianEncoder>(v.encoder);
        accumulate(kl_gaussian_prior(enc.posterior(x)));
      }
      if (play_gen) {
        Tensor x_fake = decode(v, z_q, s.rng);
        accumulate(generative_generator_loss(*v.generative_disc, z_q, x_fake));
        decoder_in_graph = true;
      } else if (!gen_active) {
        // Gaussian decoder: exact reconstruction term
        const auto& dec = std::get<GaussianDecoder>(v.decoder);
        accumulate(gaussian_nll_l2(x, dec.trunk.forward(z_q), dec.sigma2));
        decoder_in_graph = true;
      }
      detail::ensure_finite_loss(*total, "generator step");
      zero_grads(v.encoder_params());
      zero_grads(v.decoder_params());
      g.backward(*total);
      rec.grad_norm_enc = grad_l2_norm(v.encoder_params());
      s.opt_enc->step();
      if (decoder_in_graph) {
        rec.grad_norm_dec = grad_l2_norm(v.decoder_params());
        s.opt_dec->step();
      }
      zero_grads(v.encoder_params());
      zero_grads(v.decoder_params());
    }
  } catch (const NumericError& e) {
    throw TrainAbort(e.what(), s.step + 1, s.last_metrics);
  }

  ++s.step;
  s.last_metrics = rec;
  return rec;
}

// One Adam step on -ELBO for the all-Gaussian baseline.
inline MetricsRecord train_step_baseline(TrainState& s, const Tensor& x) {
  ModelVariant& v = s.model;
  if (v.encoder_implicit() || v.decoder_implicit()) {
    throw ConfigError("train_step_baseline: both sides must be Gaussian");
  }
  MetricsRecord rec;
  rec.step = s.step + 1;
  try {
    Graph g;
    ElboParts parts = baseline_elbo(v, x, s.rng);
    detail::ensure_finite_loss(parts.neg_elbo, "baseline step");
    zero_grads(v.encoder_params());
    zero_grads(v.decoder_params());
    g.backward(parts.neg_elbo);
    rec.grad_norm_enc = grad_l2_norm(v.encoder_params());
    rec.grad_norm_dec = grad_l2_norm(v.decoder_params());
    s.opt_enc->step();
    s.opt_dec->step();
    zero_grads(v.encoder_params());
    zero_grads(v.decoder_params());
    rec.elbo = parts.elbo;
    rec.recon_nll = parts.recon_nll;
    rec.kl = parts.kl;
  } catch (const NumericError& e) {
    throw TrainAbort(e.what(), s.step + 1, s.last_metrics);
  }
  ++s.step;
  s.last_metrics = rec;
  return rec;
}

// Evaluation-only record (no updates); used for the step-0 metrics row.
inline MetricsRecord eval_metrics(TrainState& s, const Tensor& x) {
  NoGradGuard ng;
  ModelVariant& v = s.model;
  MetricsRecord rec;
  rec.step = s.step;
  if (v.kind == VariantKind::gaussian) {
    ElboParts parts = baseline_elbo(v, x, s.rng);
    rec.elbo = parts.elbo;
    rec.recon_nll = parts.recon_nll;
    rec.kl = parts.kl;
    return rec;
  }
  Tensor z_q = encode(v, x, s.rng);
  if (v.encoder_implicit()) {
    Tensor z_p = detail::prior_noise(x.extent(0), v.latent_dim, s.rng);
    GameValue gv = inference_value(*v.inference_disc, x, z_q, z_p);
    rec.inf_value = gv.value.item();
    rec.inf_stderr = gv.stderr_;
  }
  if (v.decoder_implicit()) {
    Tensor x_fake = decode(v, z_q, s.rng);
    GameValue gv = generative_value(*v.generative_disc, z_q, x, x_fake);
    rec.gen_value = gv.value.item();
    rec.gen_stderr = gv.stderr_;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// Checkpointing (nn_core container; arrays follow the manifest order)

namespace detail {

inline void append_adam_manifest(json& manifest, const char* name,
                                 const std::optional<AdamState>& opt) {
  if (!opt) return;
  manifest["adam"].push_back({{"name", name},
                              {"lr", opt->config().lr},
                              {"beta1", opt->config().beta1},
                              {"beta2", opt->config().beta2},
                              {"eps", opt->config().eps},
                              {"step_count", opt->step_count()}});
}

}  // namespace detail

inline void save_checkpoint(const TrainState& s, const std::string& path) {
  const ModelVariant& v = s.model;
  json manifest;
  manifest["schema_version"] = 1;
  manifest["version"] = kVersion;
  manifest["config_hash"] = config_hash(s.config);
  manifest["seed"] = s.config.seed;
  manifest["variant"] = to_string(v.kind);
  manifest["data_dim"] = v.data_dim;
  manifest["latent_dim"] = v.latent_dim;
  manifest["enc_noise_dim"] = v.encoder_noise_dim();
  manifest["dec_noise_dim"] = v.decoder_noise_dim();
  manifest["sigma2"] =
      v.decoder_implicit() ? json() : json(std::get<GaussianDecoder>(v.decoder).sigma2);
  manifest["clamp_bound"] = s.config.clamp_bound ? json(*s.config.clamp_bound) : json();
  manifest["step"] = s.step;
  manifest["rng"] = s.rng.save_state();
  manifest["dataset"] = to_string(s.config.dataset.id);
  manifest["mixture_components"] = s.config.dataset.mixture_components;

  std::vector<const std::vector<double>*> arrays;
  manifest["networks"] = json::array();
  auto add_network = [&](const char* name, const Mlp& m) {
    json nj = mlp_manifest(m);
    nj["name"] = name;
    manifest["networks"].push_back(nj);
    for (const auto& p : m.params()) arrays.push_back(&p.values());
  };
  add_network("encoder", v.encoder_mlp());
  add_network("decoder", v.decoder_mlp());
  if (v.inference_disc) add_network("disc_inference", v.inference_disc->net);
  if (v.generative_disc) add_network("disc_generative", v.generative_disc->net);

  manifest["adam"] = json::array();
  detail::append_adam_manifest(manifest, "encoder", s.opt_enc);
  detail::append_adam_manifest(manifest, "decoder", s.opt_dec);
  detail::append_adam_manifest(manifest, "disc_inference", s.opt_disc_inf);
  detail::append_adam_manifest(manifest, "disc_generative", s.opt_disc_gen);
  auto add_moments = [&arrays](const std::optional<AdamState>& opt) {
    if (!opt) return;
    for (const auto& m : opt->first_moments()) arrays.push_back(&m);
    for (const auto& m : opt->second_moments()) arrays.push_back(&m);
  };
  add_moments(s.opt_enc);
  add_moments(s.opt_dec);
  add_moments(s.opt_disc_inf);
  add_moments(s.opt_disc_gen);

  write_checkpoint(path, manifest, arrays);
}

// Rebuilds the model (and optionally the full training state) from a file.
inline ModelVariant load_model_from_checkpoint(CheckpointReader& reader) {
  const json& manifest = reader.manifest();
  ModelVariant v;
  v.kind = variant_from_string(manifest.at("variant").get<std::string>());
  v.data_dim = manifest.at("data_dim").get<std::size_t>();
  v.latent_dim = manifest.at("latent_dim").get<std::size_t>();
  std::optional<double> clamp;
  if (!manifest.at("clamp_bound").is_null()) {
    clamp = manifest.at("clamp_bound").get<double>();
  }
  for (const auto& nj : manifest.at("networks")) {
    Mlp m = mlp_from_manifest(nj);
    for (auto p : m.params()) {
      p.values() = reader.read_array(p.numel());
    }
    const std::string name = nj.at("name").get<std::string>();
    if (name == "encoder") {
      if (v.kind == VariantKind::implicit_encoder || v.kind == VariantKind::full) {
        ImplicitEncoder e;
        e.noise_dim = manifest.at("enc_noise_dim").get<std::size_t>();
        e.net = std::move(m);
        v.encoder = std::move(e);
      } else {
        GaussianEncoder e;
        e.latent_dim = v.latent_dim;
        e.trunk = std::move(m);
        v.encoder = std::move(e);
      }
    } else if (name == "decoder") {
      if (v.kind == VariantKind::implicit_decoder || v.kind == VariantKind::full) {
        ImplicitDecoder d;
        d.noise_dim = manifest.at("dec_noise_dim").get<std::size_t>();
        d.net = std::move(m);
        v.decoder = std::move(d);
      } else {
        GaussianDecoder d;
        d.sigma2 = manifest.at("sigma2").get<double>();
        d.trunk = std::move(m);
        v.decoder = std::move(d);
      }
    } else if (name == "disc_inference") {
      v.inference_disc = Discriminator{std::move(m), clamp};
    } else if (name == "disc_generative") {
      v.generative_disc = Discriminator{std::move(m), clamp};
    } else {
      throw IoError("checkpoint: unknown network section '" + name + "'");
    }
  }
  v.validate();
  return v;
}

inline ModelVariant load_model_from_checkpoint(const std::string& path) {
  CheckpointReader reader(path);
  return load_model_from_checkpoint(reader);
}

// Full resume: parameters, Adam moments, RNG stream, step counter. The
// current config must describe the same architecture.
inline TrainState resume_train_state(const TrainConfig& cfg,
                                     const std::string& path) {
  cfg.validate();
  TrainState s = init_train_state(cfg);
  CheckpointReader reader(path);
  const json& manifest = reader.manifest();
  if (manifest.at("variant").get<std::string>() != to_string(cfg.variant) ||
      manifest.at("data_dim").get<std::size_t>() != cfg.data_dim() ||
      manifest.at("latent_dim").get<std::size_t>() != cfg.latent_dim) {
    throw ConfigError("resume: checkpoint architecture does not match config");
  }
  ModelVariant loaded = load_model_from_checkpoint(reader);
  auto copy_params = [](const Mlp& from, const Mlp& to) {
    auto fp = from.params();
    auto tp = to.params();
    if (fp.size() != tp.size()) throw IoError("resume: parameter count mismatch");
    for (std::size_t i = 0; i < fp.size(); ++i) {
      if (fp[i].shape() != tp[i].shape()) {
        throw IoError("resume: parameter shape mismatch");
      }
      tp[i].values() = fp[i].values();
    }
  };
  copy_params(loaded.encoder_mlp(), s.model.encoder_mlp());
  copy_params(loaded.decoder_mlp(), s.model.decoder_mlp());
  if (loaded.inference_disc) {
    copy_params(loaded.inference_disc->net, s.model.inference_disc->net);
  }
  if (loaded.generative_disc) {
    copy_params(loaded.generative_disc->net, s.model.generative_disc->net);
  }
  // moments arrays follow network parameter arrays in the container
  auto load_moments = [&reader](std::optional<AdamState>& opt, const json& aj) {
    if (!opt) return;
    std::vector<std::vector<double>> m, v2;
    for (const auto& [nm, p] : opt->params()) m.push_back(reader.read_array(p.numel()));
    for (const auto& [nm, p] : opt->params()) v2.push_back(reader.read_array(p.numel()));
    opt->restore(aj.at("step_count").get<long>(), std::move(m), std::move(v2));
  };
  std::size_t ai = 0;
  const json& adam = manifest.at("adam");
  auto next_adam = [&adam, &ai](const char* name) -> const json& {
    if (ai >= adam.size() || adam[ai].at("name").get<std::string>() != name) {
      throw IoError(std::string("resume: adam section for '") + name +
                    "' missing or out of order");
    }
    return adam[ai++];
  };
  load_moments(s.opt_enc, next_adam("encoder"));
  load_moments(s.opt_dec, next_adam("decoder"));
  if (s.opt_disc_inf) load_moments(s.opt_disc_inf, next_adam("disc_inference"));
  if (s.opt_disc_gen) load_moments(s.opt_disc_gen, next_adam("disc_generative"));
  s.step = manifest.at("step").get<std::size_t>();
  s.rng.load_state(manifest.at("rng").get<std::string>());
  return s;
}

// ---------------------------------------------------------------------------
// Full run

struct RunResult {
  TrainState state;
  std::string metrics_path;
  std::string final_checkpoint_path;
};

// Deterministic end-to-end run: metrics CSV, cadenced checkpoints, final
// checkpoint. Two runs with identical configs produce byte-identical metrics.
inline RunResult run(const TrainConfig& cfg) {
  cfg.validate();
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  const std::string metrics_path = cfg.out_dir + "/metrics.csv";
  MetricsWriter writer(metrics_path, config_hash(cfg), cfg.seed);  // I/O first

  TrainState s = cfg.resume_from ? resume_train_state(cfg, *cfg.resume_from)
                                 : init_train_state(cfg);
  const bool baseline = cfg.variant == VariantKind::gaussian;

  if (cfg.total_steps > 0 && s.step == 0) {
    Tensor x0 = sample_dataset(cfg.dataset, cfg.batch_size, s.rng);
    writer.write(eval_metrics(s, x0));
  }
  while (s.step < cfg.total_steps) {
    Tensor x = sample_dataset(cfg.dataset, cfg.batch_size, s.rng);
    MetricsRecord rec;
    try {
      rec = baseline ? train_step_baseline(s, x) : train_step_adversarial(s, x);
    } catch (const TrainAbort&) {
      save_checkpoint(s, cfg.out_dir + "/abort.ckpt");
      throw;
    }
    if (s.step % cfg.metrics_every == 0 || s.step == cfg.total_steps) {
      writer.write(rec);
    }
    if (cfg.checkpoint_every > 0 && s.step % cfg.checkpoint_every == 0 &&
        s.step < cfg.total_steps) {
      save_checkpoint(s, cfg.out_dir + "/checkpoint_" + std::to_string(s.step) +
                             ".ckpt");
    }
  }
  const std::string final_path = cfg.out_dir + "/final.ckpt";
  save_checkpoint(s, final_path);
  return RunResult{std::move(s), metrics_path, final_path};
}

// ---------------------------------------------------------------------------
// Model evaluation (prior -> decode -> metrics against held-out data)

inline Tensor sample_model(const ModelVariant& v, std::size_t n,
                           std::uint64_t seed) {
  NoGradGuard ng;
  RngStream rng(seed);
  Tensor z = make_noise(n, v.latent_dim, rng);
  return decode(v, z, rng);
}

inline EvalReport evaluate_model(const ModelVariant& v, const Dataset& dataset,
                                 std::size_t n, std::uint64_t seed,
                                 const Tensor& model_samples) {
  if (dataset.data_dim() != v.data_dim) {
    throw ConfigError("evaluate_model: dataset dim " +
                      std::to_string(dataset.data_dim()) +
                      " does not match model data_dim " +
                      std::to_string(v.data_dim));
  }
  Tensor held_out = sample_dataset(dataset, n, seed ^ 0x9e3779b97f4a7c15ull);
  EvalReport r;
  r.dataset = to_string(dataset.id);
  r.n_samples = model_samples.extent(0);
  r.bandwidth = median_pairwise_distance(model_samples, held_out);
  r.mmd2_raw = mmd_rbf(model_samples, held_out, r.bandwidth);
  r.mmd2 = std::max(0.0, r.mmd2_raw);
  if (dataset.id == DatasetId::mixture_of_gaussians_2d) {
    r.coverage = mode_coverage(model_samples, dataset);
  }
  return r;
}

inline EvalReport evaluate_model(const ModelVariant& v, const Dataset& dataset,
                                 std::size_t n, std::uint64_t seed) {
  return evaluate_model(v, dataset, n, seed, sample_model(v, n, seed));
}

// ---------------------------------------------------------------------------
// Discriminator ascent sanity: with the generator sides frozen to the fixed
// analytic pair q = N(1,1), p = N(0,1), a trained inference discriminator
// must approach D*(z) = 0.5 - z.

struct DiscTrainReport {
  double mae = 0.0;              // vs D* on the grid z in [-2, 3]
  double value_estimate = 0.0;   // final value-function estimate (target: KL = 0.5)
  double value_stderr = 0.0;
  std::size_t steps = 0;
};

inline DiscTrainReport train_inference_disc_on_fixed_pair(
    std::size_t steps, std::size_t batch, double lr, std::size_t hidden,
    std::uint64_t seed) {
  RngStream rng(seed);
  Discriminator disc;
  disc.net = init_mlp({2, hidden, hidden, 1}, Activation::relu, rng);
  disc.clamp_bound = std::nullopt;  // verification mode
  AdamState opt(disc.net.named_params("disc."), AdamConfig{lr});

  auto make_z = [&](double mu) {
    std::vector<double> vals(batch);
    for (auto& v : vals) v = mu + rng.normal();
    return Tensor(Shape{batch, 1}, std::move(vals));
  };
  Tensor x0 = Tensor::zeros(Shape{batch, 1});
  for (std::size_t t = 0; t < steps; ++t) {
    Graph g;
    Tensor z_q = make_z(1.0);
    Tensor z_p = make_z(0.0);
    GameValue gv = inference_value(disc, x0, z_q, z_p);
    Tensor loss = neg(gv.value);
    zero_grads(disc.net.params());
    g.backward(loss);
    opt.step();
    zero_grads(disc.net.params());
  }

  DiscTrainReport rep;
  rep.steps = steps;
  {
    NoGradGuard ng;
    const std::size_t grid_n = 101;
    std::vector<double> zs(grid_n);
    for (std::size_t i = 0; i < grid_n; ++i) {
      zs[i] = -2.0 + 5.0 * static_cast<double>(i) / static_cast<double>(grid_n - 1);
    }
    Tensor zg(Shape{grid_n, 1}, zs);
    Tensor xg = Tensor::zeros(Shape{grid_n, 1});
    Tensor scores = disc.score(xg, zg);
    double mae = 0.0;
    for (std::size_t i = 0; i < grid_n; ++i) {
      mae += std::fabs(scores.at(i) - (0.5 - zs[i]));
    }
    rep.mae = mae / static_cast<double>(grid_n);

    const std::size_t n_eval = 100000;
    std::vector<double> zq(n_eval), zp(n_eval);
    for (auto& v : zq) v = 1.0 + rng.normal();
    for (auto& v : zp) v = rng.normal();
    Tensor xe = Tensor::zeros(Shape{n_eval, 1});
    GameValue gv = inference_value(
        disc, xe, Tensor(Shape{n_eval, 1}, std::move(zq)),
        Tensor(Shape{n_eval, 1}, std::move(zp)));
    rep.value_estimate = gv.value.item();
    rep.value_stderr = gv.stderr_;
  }
  return rep;
}

}  // namespace advae
