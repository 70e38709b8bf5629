#pragma once

// The four network roles (Gaussian/implicit encoder and decoder) plus the
// two discriminators, assembled into a ModelVariant. Implicit sides are
// pushforward samplers: a net applied to the input concatenated with fresh
// standard-normal noise.

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "advae/common.hpp"
#include "advae/distributions.hpp"
#include "advae/nn.hpp"
#include "advae/random.hpp"
#include "advae/tensor.hpp"

namespace advae {

struct GaussianEncoder {
  Mlp trunk;  // x -> [mu, log var], output width 2 * latent_dim
  std::size_t latent_dim = 0;

  DiagonalGaussian posterior(const Tensor& x) const {
    Tensor h = trunk.forward(x);
    return DiagonalGaussian(slice_cols(h, 0, latent_dim),
                            slice_cols(h, latent_dim, 2 * latent_dim));
  }
};

struct ImplicitEncoder {
  Mlp net;  // concat(x, eps) -> z
  std::size_t noise_dim = 0;
};

struct GaussianDecoder {
  Mlp trunk;  // z -> mu
  double sigma2 = 1.0;
};

struct ImplicitDecoder {
  Mlp net;  // concat(z, eps) -> x
  std::size_t noise_dim = 0;
};

// Scores pairs (x, z) with a single real number per row. When clamp_bound is
// set the raw score is passed through bound * tanh(raw / bound), which keeps
// exp(score) finite during early training.
struct Discriminator {
  Mlp net;  // concat(x, z) -> scalar
  std::optional<double> clamp_bound;

  Tensor score(const Tensor& x, const Tensor& z) const {
    if (x.rank() != 2 || z.rank() != 2 || x.extent(0) != z.extent(0)) {
      throw ShapeError("discriminate: row counts disagree: " +
                       shape_str(x.shape()) + " vs " + shape_str(z.shape()));
    }
    Tensor raw = net.forward(concat_cols(x, z));
    Tensor flat = reshape(raw, Shape{x.extent(0)});
    if (clamp_bound) return smooth_clamp(flat, *clamp_bound);
    return flat;
  }
};

inline Tensor discriminate(const Discriminator& d, const Tensor& x,
                           const Tensor& z) {
  return d.score(x, z);
}

enum class VariantKind { gaussian, implicit_encoder, implicit_decoder, full };

inline std::string to_string(VariantKind k) {
  switch (k) {
    case VariantKind::gaussian: return "gaussian";
    case VariantKind::implicit_encoder: return "implicit-encoder";
    case VariantKind::implicit_decoder: return "implicit-decoder";
    case VariantKind::full: return "full";
  }
  throw ConfigError("unknown variant kind");
}

inline VariantKind variant_from_string(const std::string& s) {
  if (s == "gaussian") return VariantKind::gaussian;
  if (s == "implicit-encoder") return VariantKind::implicit_encoder;
  if (s == "implicit-decoder") return VariantKind::implicit_decoder;
  if (s == "full") return VariantKind::full;
  throw ConfigError("unknown variant '" + s +
                    "' (expected gaussian | implicit-encoder | implicit-decoder | full)");
}

struct ModelVariant {
  VariantKind kind = VariantKind::gaussian;
  std::size_t data_dim = 0;
  std::size_t latent_dim = 0;
  std::variant<GaussianEncoder, ImplicitEncoder> encoder;
  std::variant<GaussianDecoder, ImplicitDecoder> decoder;
  std::optional<Discriminator> inference_disc;
  std::optional<Discriminator> generative_disc;

  bool encoder_implicit() const {
    return std::holds_alternative<ImplicitEncoder>(encoder);
  }
  bool decoder_implicit() const {
    return std::holds_alternative<ImplicitDecoder>(decoder);
  }

  void validate() const {
    if (data_dim == 0 || latent_dim == 0) {
      throw ConfigError("variant: data_dim and latent_dim must be positive");
    }
    if (encoder_implicit() && !inference_disc) {
      throw ConfigError("variant: implicit encoder requires an inference discriminator");
    }
    if (decoder_implicit() && !generative_disc) {
      throw ConfigError("variant: implicit decoder requires a generative discriminator");
    }
    if (encoder_implicit()) {
      const auto& e = std::get<ImplicitEncoder>(encoder);
      if (e.net.in_dim() != data_dim + e.noise_dim || e.net.out_dim() != latent_dim) {
        throw ShapeError("variant: implicit encoder dims do not chain");
      }
    } else {
      const auto& e = std::get<GaussianEncoder>(encoder);
      if (e.trunk.in_dim() != data_dim || e.trunk.out_dim() != 2 * latent_dim) {
        throw ShapeError("variant: gaussian encoder dims do not chain");
      }
    }
    if (decoder_implicit()) {
      const auto& d = std::get<ImplicitDecoder>(decoder);
      if (d.net.in_dim() != latent_dim + d.noise_dim || d.net.out_dim() != data_dim) {
        throw ShapeError("variant: implicit decoder dims do not chain");
      }
    } else {
      const auto& d = std::get<GaussianDecoder>(decoder);
      if (d.trunk.in_dim() != latent_dim || d.trunk.out_dim() != data_dim) {
        throw ShapeError("variant: gaussian decoder dims do not chain");
      }
      if (d.sigma2 <= 0.0) throw ConfigError("variant: sigma2 must be positive");
    }
    if (inference_disc &&
        inference_disc->net.in_dim() != data_dim + latent_dim) {
      throw ShapeError("variant: inference discriminator input width mismatch");
    }
    if (generative_disc &&
        generative_disc->net.in_dim() != data_dim + latent_dim) {
      throw ShapeError("variant: generative discriminator input width mismatch");
    }
  }

  const Mlp& encoder_mlp() const {
    return encoder_implicit() ? std::get<ImplicitEncoder>(encoder).net
                              : std::get<GaussianEncoder>(encoder).trunk;
  }
  const Mlp& decoder_mlp() const {
    return decoder_implicit() ? std::get<ImplicitDecoder>(decoder).net
                              : std::get<GaussianDecoder>(decoder).trunk;
  }

  std::vector<Tensor> encoder_params() const { return encoder_mlp().params(); }
  std::vector<Tensor> decoder_params() const { return decoder_mlp().params(); }

  std::size_t encoder_noise_dim() const {
    return encoder_implicit() ? std::get<ImplicitEncoder>(encoder).noise_dim
                              : latent_dim;  // reparametrization eps
  }
  std::size_t decoder_noise_dim() const {
    return decoder_implicit() ? std::get<ImplicitDecoder>(decoder).noise_dim : 0;
  }
};

// ---------------------------------------------------------------------------
// Sampling paths. The *_with_noise forms are deterministic given eps; the
// rng forms draw eps row-major from the stream.

inline Tensor encode_with_noise(const ModelVariant& v, const Tensor& x,
                                const Tensor& eps) {
  if (x.rank() != 2 || x.extent(1) != v.data_dim) {
    throw ShapeError("encode: x " + shape_str(x.shape()) +
                     " does not match data_dim " + std::to_string(v.data_dim));
  }
  if (v.encoder_implicit()) {
    const auto& e = std::get<ImplicitEncoder>(v.encoder);
    if (eps.rank() != 2 || eps.extent(0) != x.extent(0) ||
        eps.extent(1) != e.noise_dim) {
      throw ShapeError("encode: eps " + shape_str(eps.shape()) +
                       " does not match noise_dim " + std::to_string(e.noise_dim));
    }
    return e.net.forward(concat_cols(x, eps));
  }
  const auto& e = std::get<GaussianEncoder>(v.encoder);
  return sample_reparam(e.posterior(x), eps);
}

inline Tensor make_noise(std::size_t rows, std::size_t cols, RngStream& rng) {
  std::vector<double> vals(rows * cols);
  rng.fill_normal(vals);
  return Tensor(Shape{rows, cols}, std::move(vals));
}

inline Tensor encode(const ModelVariant& v, const Tensor& x, RngStream& rng) {
  return encode_with_noise(v, x, make_noise(x.extent(0), v.encoder_noise_dim(), rng));
}

inline Tensor decode_with_noise(const ModelVariant& v, const Tensor& z,
                                const Tensor& eps) {
  if (z.rank() != 2 || z.extent(1) != v.latent_dim) {
    throw ShapeError("decode: z " + shape_str(z.shape()) +
                     " does not match latent_dim " + std::to_string(v.latent_dim));
  }
  if (v.decoder_implicit()) {
    const auto& d = std::get<ImplicitDecoder>(v.decoder);
    if (eps.rank() != 2 || eps.extent(0) != z.extent(0) ||
        eps.extent(1) != d.noise_dim) {
      throw ShapeError("decode: eps " + shape_str(eps.shape()) +
                       " does not match noise_dim " + std::to_string(d.noise_dim));
    }
    return d.net.forward(concat_cols(z, eps));
  }
  // Gaussian path: the point output is the mean; the density lives in
  // distributions (gaussian_nll_l2 / log_density).
  return std::get<GaussianDecoder>(v.decoder).trunk.forward(z);
}

inline Tensor decode(const ModelVariant& v, const Tensor& z, RngStream& rng) {
  if (v.decoder_implicit()) {
    return decode_with_noise(v, z, make_noise(z.extent(0), v.decoder_noise_dim(), rng));
  }
  return decode_with_noise(v, z, Tensor());
}

// ---------------------------------------------------------------------------
// Construction

struct VariantDims {
  std::size_t data_dim = 2;
  std::size_t latent_dim = 2;
  // Noise widths for implicit sides; defaults give the pushforward at least
  // as many degrees of freedom as its output.
  std::size_t encoder_noise_dim = 0;  // 0 -> latent_dim
  std::size_t decoder_noise_dim = 0;  // 0 -> data_dim
  std::vector<std::size_t> encoder_hidden{64, 64};
  std::vector<std::size_t> decoder_hidden{64, 64};
  std::vector<std::size_t> disc_hidden{128, 128};
};

inline std::vector<std::size_t> chain_dims(std::size_t in,
                                           const std::vector<std::size_t>& hidden,
                                           std::size_t out) {
  std::vector<std::size_t> d{in};
  d.insert(d.end(), hidden.begin(), hidden.end());
  d.push_back(out);
  return d;
}

inline ModelVariant make_variant(VariantKind kind, const VariantDims& dims,
                                 Activation act, std::optional<double> clamp_bound,
                                 double sigma2, RngStream& rng) {
  ModelVariant v;
  v.kind = kind;
  v.data_dim = dims.data_dim;
  v.latent_dim = dims.latent_dim;
  const std::size_t enc_noise =
      dims.encoder_noise_dim ? dims.encoder_noise_dim : dims.latent_dim;
  const std::size_t dec_noise =
      dims.decoder_noise_dim ? dims.decoder_noise_dim : dims.data_dim;
  const bool enc_implicit =
      kind == VariantKind::implicit_encoder || kind == VariantKind::full;
  const bool dec_implicit =
      kind == VariantKind::implicit_decoder || kind == VariantKind::full;

  if (enc_implicit) {
    ImplicitEncoder e;
    e.noise_dim = enc_noise;
    e.net = init_mlp(chain_dims(dims.data_dim + enc_noise, dims.encoder_hidden,
                                dims.latent_dim),
                     act, rng);
    v.encoder = std::move(e);
  } else {
    GaussianEncoder e;
    e.latent_dim = dims.latent_dim;
    e.trunk = init_mlp(
        chain_dims(dims.data_dim, dims.encoder_hidden, 2 * dims.latent_dim), act,
        rng);
    v.encoder = std::move(e);
  }
  if (dec_implicit) {
    ImplicitDecoder d;
    d.noise_dim = dec_noise;
    d.net = init_mlp(chain_dims(dims.latent_dim + dec_noise, dims.decoder_hidden,
                                dims.data_dim),
                     act, rng);
    v.decoder = std::move(d);
  } else {
    GaussianDecoder d;
    d.sigma2 = sigma2;
    d.trunk = init_mlp(
        chain_dims(dims.latent_dim, dims.decoder_hidden, dims.data_dim), act, rng);
    v.decoder = std::move(d);
  }
  if (enc_implicit) {
    Discriminator d;
    d.clamp_bound = clamp_bound;
    d.net = init_mlp(
        chain_dims(dims.data_dim + dims.latent_dim, dims.disc_hidden, 1), act, rng);
    v.inference_disc = std::move(d);
  }
  if (dec_implicit) {
    Discriminator d;
    d.clamp_bound = clamp_bound;
    d.net = init_mlp(
        chain_dims(dims.data_dim + dims.latent_dim, dims.disc_hidden, 1), act, rng);
    v.generative_disc = std::move(d);
  }
  v.validate();
  return v;
}

}  // namespace advae
