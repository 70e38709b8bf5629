#pragma once

// Named finite-difference gradient checks over the autodiff ops, the model
// sampling paths, and the game losses. Shared by the grad-check CLI
// subcommand, the unit tests, and the acceptance suite.

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "advae/common.hpp"
#include "advae/distributions.hpp"
#include "advae/games.hpp"
#include "advae/models.hpp"
#include "advae/nn.hpp"
#include "advae/random.hpp"
#include "advae/tensor.hpp"
#include "advae/training.hpp"

namespace advae {

struct NamedGradCheck {
  std::string name;
  GradCheckReport report;
};

namespace detail {

// Inputs in [-2, 2]; relu kinks and log/div domains are avoided by the
// callers via offset/abs transforms.
inline Tensor rand_tensor(Shape shape, RngStream& rng, double lo = -2.0,
                          double hi = 2.0, bool requires_grad = true,
                          double keep_away_from_zero = 0.0) {
  std::vector<double> vals(shape_numel(shape));
  for (auto& v : vals) {
    do {
      v = rng.uniform(lo, hi);
    } while (std::fabs(v) < keep_away_from_zero);
  }
  return Tensor(std::move(shape), std::move(vals), requires_grad);
}

inline NamedGradCheck check(const std::string& name,
                            const std::function<Tensor()>& f,
                            std::vector<std::pair<std::string, Tensor>> params,
                            double tol = 1e-4) {
  return NamedGradCheck{name, grad_check(f, params, 1e-5, tol)};
}

}  // namespace detail

inline std::vector<NamedGradCheck> grad_check_autodiff(std::uint64_t seed) {
  using detail::check;
  using detail::rand_tensor;
  RngStream rng(seed);
  std::vector<NamedGradCheck> out;

  const Shape s{3, 4};
  Tensor r = rand_tensor(s, rng, -2.0, 2.0, false);  // fixed mixing weights

  {
    Tensor a = rand_tensor(s, rng), b = rand_tensor(s, rng);
    out.push_back(check("add", [=] { return sum(mul(add(a, b), r)); },
                        {{"a", a}, {"b", b}}));
    out.push_back(check("sub", [=] { return sum(mul(sub(a, b), r)); },
                        {{"a", a}, {"b", b}}));
    out.push_back(check("mul", [=] { return sum(mul(mul(a, b), r)); },
                        {{"a", a}, {"b", b}}));
  }
  {
    Tensor a = rand_tensor(s, rng);
    Tensor b = rand_tensor(s, rng, 0.5, 2.5);
    out.push_back(check("div", [=] { return sum(mul(div(a, b), r)); },
                        {{"a", a}, {"b", b}}));
  }
  {
    Tensor a = rand_tensor(s, rng);
    out.push_back(check("exp", [=] { return sum(mul(exp(a), r)); }, {{"a", a}}));
    out.push_back(check("tanh", [=] { return sum(mul(tanh(a), r)); }, {{"a", a}}));
    out.push_back(
        check("softplus", [=] { return sum(mul(softplus(a), r)); }, {{"a", a}}));
    out.push_back(check("neg", [=] { return sum(mul(neg(a), r)); }, {{"a", a}}));
    out.push_back(check("smooth_clamp",
                        [=] { return sum(mul(smooth_clamp(a, 1.5), r)); },
                        {{"a", a}}));
  }
  {
    Tensor a = rand_tensor(s, rng, 0.1, 3.0);
    out.push_back(check("log", [=] { return sum(mul(log(a), r)); }, {{"a", a}}));
  }
  {
    // keep h=1e-5 perturbations clear of the relu kink
    Tensor a = rand_tensor(s, rng, -2.0, 2.0, true, 1e-3);
    out.push_back(check("relu", [=] { return sum(mul(relu(a), r)); }, {{"a", a}}));
  }
  {
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor b = rand_tensor({4, 2}, rng);
    Tensor rm = rand_tensor({3, 2}, rng, -2.0, 2.0, false);
    out.push_back(check("matmul", [=] { return sum(mul(matmul(a, b), rm)); },
                        {{"a", a}, {"b", b}}));
  }
  {
    Tensor x = rand_tensor({3, 4}, rng);
    Tensor w = rand_tensor({5, 4}, rng);
    Tensor b = rand_tensor({5}, rng);
    Tensor rl = rand_tensor({3, 5}, rng, -2.0, 2.0, false);
    out.push_back(check("linear", [=] { return sum(mul(linear(x, w, b), rl)); },
                        {{"x", x}, {"w", w}, {"b", b}}));
  }
  {
    Tensor a = rand_tensor({3, 4}, rng);
    Tensor bias = rand_tensor({4}, rng);
    out.push_back(check("broadcast_add",
                        [=] { return sum(mul(add(a, bias), r)); },
                        {{"a", a}, {"bias", bias}}));
  }
  {
    Tensor a = rand_tensor(s, rng);
    out.push_back(check("sum_all", [=] { return sum(a); }, {{"a", a}}));
    out.push_back(check("mean_all", [=] { return mean(a); }, {{"a", a}}));
    Tensor r0 = rand_tensor({4}, rng, -2.0, 2.0, false);
    out.push_back(check("sum_axis0", [=] { return sum(mul(sum(a, 0), r0)); },
                        {{"a", a}}));
    Tensor r1 = rand_tensor({3}, rng, -2.0, 2.0, false);
    out.push_back(check("mean_axis1", [=] { return sum(mul(mean(a, 1), r1)); },
                        {{"a", a}}));
  }
  {
    Tensor a = rand_tensor({3, 2}, rng);
    Tensor b = rand_tensor({3, 3}, rng);
    Tensor rc = rand_tensor({3, 2}, rng, -2.0, 2.0, false);
    out.push_back(check("concat_slice_reshape",
                        [=] {
                          Tensor c = concat_cols(a, b);
                          Tensor sl = slice_cols(c, 1, 3);
                          Tensor rs = reshape(sl, Shape{3, 2});
                          return sum(mul(rs, rc));
                        },
                        {{"a", a}, {"b", b}}));
  }
  {
    // composite from the contract: exp(log(x) * y)
    Tensor x = rand_tensor({2, 2}, rng, 0.2, 2.0);
    Tensor y = rand_tensor({2, 2}, rng, -1.5, 1.5);
    out.push_back(check("exp_log_composite",
                        [=] { return sum(exp(mul(log(x), y))); },
                        {{"x", x}, {"y", y}}));
  }
  return out;
}

inline std::vector<NamedGradCheck> grad_check_models(std::uint64_t seed) {
  using detail::check;
  using detail::rand_tensor;
  RngStream rng(seed);
  std::vector<NamedGradCheck> out;
  const std::size_t batch = 4;

  VariantDims dims;
  dims.data_dim = 2;
  dims.latent_dim = 2;
  dims.encoder_hidden = {4};
  dims.decoder_hidden = {4};
  dims.disc_hidden = {4};
  ModelVariant full = make_variant(VariantKind::full, dims, Activation::tanh,
                                   std::nullopt, 1.0, rng);
  ModelVariant gauss = make_variant(VariantKind::gaussian, dims, Activation::tanh,
                                    std::nullopt, 1.0, rng);

  Tensor x = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);
  Tensor enc_eps = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);
  Tensor dec_eps = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);
  Tensor rz = rand_tensor({batch, 2}, rng, -2.0, 2.0, false);

  out.push_back(check("encode_implicit",
                      [=] { return sum(mul(encode_with_noise(full, x, enc_eps), rz)); },
                      full.encoder_mlp().named_params("enc.")));
  out.push_back(check("encode_gaussian",
                      [=] { return sum(mul(encode_with_noise(gauss, x, enc_eps), rz)); },
                      gauss.encoder_mlp().named_params("enc.")));
  {
    Tensor z = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);
    Tensor rx = rand_tensor({batch, 2}, rng, -2.0, 2.0, false);
    out.push_back(check("decode_implicit",
                        [=] { return sum(mul(decode_with_noise(full, z, dec_eps), rx)); },
                        full.decoder_mlp().named_params("dec.")));
    out.push_back(check("decode_gaussian",
                        [=] { return sum(mul(decode_with_noise(gauss, z, Tensor()), rx)); },
                        gauss.decoder_mlp().named_params("dec.")));
    Discriminator clamped{init_mlp({4, 4, 1}, Activation::tanh, rng), 5.0};
    Tensor rs = rand_tensor({batch}, rng, -2.0, 2.0, false);
    out.push_back(check("discriminate_clamped",
                        [=] { return sum(mul(clamped.score(x, z), rs)); },
                        clamped.net.named_params("disc.")));
  }
  {
    // reparametrized sampling w.r.t. mean and log-variance
    Tensor mu = rand_tensor({3}, rng, -1.0, 1.0);
    Tensor lv = rand_tensor({3}, rng, -1.0, 1.0);
    Tensor eps = rand_tensor({batch, 3}, rng, -1.5, 1.5, false);
    Tensor rr = rand_tensor({batch, 3}, rng, -2.0, 2.0, false);
    out.push_back(check("sample_reparam",
                        [=] {
                          DiagonalGaussian gdist(mu, lv);
                          return sum(mul(sample_reparam(gdist, eps), rr));
                        },
                        {{"mean", mu}, {"log_variance", lv}}));
  }
  return out;
}

inline std::vector<NamedGradCheck> grad_check_games(std::uint64_t seed) {
  using detail::check;
  using detail::rand_tensor;
  RngStream rng(seed);
  std::vector<NamedGradCheck> out;
  const std::size_t batch = 3;

  VariantDims dims;
  dims.data_dim = 2;
  dims.latent_dim = 2;
  dims.encoder_hidden = {4};
  dims.decoder_hidden = {4};
  dims.disc_hidden = {4};
  ModelVariant v = make_variant(VariantKind::full, dims, Activation::tanh,
                                std::nullopt, 1.0, rng);
  ModelVariant gauss = make_variant(VariantKind::gaussian, dims, Activation::tanh,
                                    std::nullopt, 1.0, rng);

  Tensor x = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);
  NoiseBundle noise;
  noise.encoder_eps = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);
  noise.prior_z = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);
  noise.decoder_eps = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);

  out.push_back(check("inference_generator_loss_wrt_encoder",
                      [=] {
                        Tensor z_q = encode_with_noise(v, x, noise.encoder_eps);
                        return inference_generator_loss(*v.inference_disc, x, z_q);
                      },
                      v.encoder_mlp().named_params("enc.")));
  out.push_back(check("generative_generator_loss_wrt_enc_dec",
                      [=] {
                        Tensor z_q = encode_with_noise(v, x, noise.encoder_eps);
                        Tensor x_fake = decode_with_noise(v, z_q, noise.decoder_eps);
                        return generative_generator_loss(*v.generative_disc, z_q,
                                                         x_fake);
                      },
                      [&] {
                        auto ps = v.encoder_mlp().named_params("enc.");
                        auto dp = v.decoder_mlp().named_params("dec.");
                        ps.insert(ps.end(), dp.begin(), dp.end());
                        return ps;
                      }()));
  out.push_back(check("inference_value_wrt_disc",
                      [=] {
                        Tensor z_q = encode_with_noise(v, x, noise.encoder_eps);
                        return inference_value(*v.inference_disc, x, z_q,
                                               noise.prior_z)
                            .value;
                      },
                      v.inference_disc->net.named_params("disc_inf.")));
  out.push_back(check("generative_value_wrt_disc",
                      [=] {
                        Tensor z_q = encode_with_noise(v, x, noise.encoder_eps);
                        Tensor x_fake = decode_with_noise(v, z_q, noise.decoder_eps);
                        return generative_value(*v.generative_disc, z_q, x, x_fake)
                            .value;
                      },
                      v.generative_disc->net.named_params("disc_gen.")));
  out.push_back(check("combined_objective_generator_total",
                      [=] {
                        CombinedLosses cl = combined_objective_with_noise(v, x, noise);
                        return add(cl.inference_gen_loss, cl.generative_gen_loss);
                      },
                      [&] {
                        auto ps = v.encoder_mlp().named_params("enc.");
                        auto dp = v.decoder_mlp().named_params("dec.");
                        ps.insert(ps.end(), dp.begin(), dp.end());
                        return ps;
                      }()));
  out.push_back(check("combined_objective_disc_losses",
                      [=] {
                        CombinedLosses cl = combined_objective_with_noise(v, x, noise);
                        return add(cl.inference_disc_loss, cl.generative_disc_loss);
                      },
                      [&] {
                        auto ps = v.inference_disc->net.named_params("disc_inf.");
                        auto dp = v.generative_disc->net.named_params("disc_gen.");
                        ps.insert(ps.end(), dp.begin(), dp.end());
                        return ps;
                      }()));
  {
    Tensor eps = rand_tensor({batch, 2}, rng, -1.5, 1.5, false);
    out.push_back(check("baseline_neg_elbo",
                        [=] {
                          const auto& enc = std::get<GaussianEncoder>(gauss.encoder);
                          const auto& dec = std::get<GaussianDecoder>(gauss.decoder);
                          DiagonalGaussian post = enc.posterior(x);
                          Tensor z = sample_reparam(post, eps);
                          Tensor nll = gaussian_nll_l2(x, dec.trunk.forward(z),
                                                       dec.sigma2);
                          return add(nll, kl_gaussian_prior(post));
                        },
                        [&] {
                          auto ps = gauss.encoder_mlp().named_params("enc.");
                          auto dp = gauss.decoder_mlp().named_params("dec.");
                          ps.insert(ps.end(), dp.begin(), dp.end());
                          return ps;
                        }()));
  }
  return out;
}

inline std::vector<NamedGradCheck> grad_check_scope(const std::string& scope,
                                                    std::uint64_t seed) {
  if (scope == "autodiff") return grad_check_autodiff(seed);
  if (scope == "models") return grad_check_models(seed);
  if (scope == "games") return grad_check_games(seed);
  if (scope == "all") {
    auto out = grad_check_autodiff(seed);
    auto m = grad_check_models(seed + 1);
    auto g = grad_check_games(seed + 2);
    out.insert(out.end(), m.begin(), m.end());
    out.insert(out.end(), g.begin(), g.end());
    return out;
  }
  throw ConfigError("grad-check: unknown scope '" + scope + "'");
}

}  // namespace advae
