#pragma once

// Diagonal Gaussians: exact densities, reparametrized sampling, closed-form
// KL against the standard normal prior, and Monte-Carlo KL estimation. The
// tensor paths are differentiable; the Analytic* types are plain-double
// verification counterparts.

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "advae/common.hpp"
#include "advae/random.hpp"
#include "advae/tensor.hpp"

namespace advae {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Mean/log-variance parametrization keeps the variance positive without
// constraints. Tensors may be [d] (one distribution) or [n x d] (one per row).
struct DiagonalGaussian {
  Tensor mean;
  Tensor log_variance;

  DiagonalGaussian(Tensor mean_, Tensor log_variance_)
      : mean(std::move(mean_)), log_variance(std::move(log_variance_)) {
    if (mean.shape() != log_variance.shape()) {
      throw ShapeError("diagonal gaussian: mean " + shape_str(mean.shape()) +
                       " and log_variance " + shape_str(log_variance.shape()) +
                       " must match");
    }
  }

  std::size_t dim() const { return mean.shape().back(); }
};

struct StandardNormalPrior {
  std::size_t dim;
  explicit StandardNormalPrior(std::size_t d) : dim(d) {
    if (d < 1) throw ConfigError("prior: dimension must be >= 1");
  }
};

// z = mean + exp(log_variance / 2) * eps, differentiable in both parameters.
inline Tensor sample_reparam(const DiagonalGaussian& g, const Tensor& eps) {
  if (eps.rank() != 2 || eps.extent(1) != g.dim()) {
    throw ShapeError("sample_reparam: eps " + shape_str(eps.shape()) +
                     " does not match distribution dim " +
                     std::to_string(g.dim()));
  }
  if (g.mean.rank() == 2 && g.mean.extent(0) != eps.extent(0)) {
    throw ShapeError("sample_reparam: eps rows " + shape_str(eps.shape()) +
                     " vs batched parameters " + shape_str(g.mean.shape()));
  }
  Tensor sigma = exp(g.log_variance * 0.5);
  return add(mul(sigma, eps), g.mean);
}

namespace detail {

// log N(x | mean, diag(var)) summed over coordinates, one value per row.
inline Tensor gaussian_log_density(const Tensor& mean, const Tensor& log_var,
                                   const Tensor& x) {
  if (x.rank() != 2 || x.extent(1) != mean.shape().back()) {
    throw ShapeError("log_density: x " + shape_str(x.shape()) +
                     " does not match distribution dim " +
                     std::to_string(mean.shape().back()));
  }
  Tensor diff = sub(x, mean);
  Tensor quad = mul(mul(diff, diff), exp(neg(log_var)));
  Tensor per_coord = (quad + log_var + kLog2Pi) * (-0.5);
  return sum(per_coord, 1);
}

}  // namespace detail

inline Tensor log_density(const DiagonalGaussian& g, const Tensor& x) {
  return detail::gaussian_log_density(g.mean, g.log_variance, x);
}

inline Tensor log_density(const StandardNormalPrior& p, const Tensor& x) {
  Tensor zeros = Tensor::zeros(Shape{p.dim});
  return detail::gaussian_log_density(zeros, zeros, x);
}

// KL(N(mean, var) || N(0, I)) = 0.5 * sum(var + mean^2 - 1 - log var).
// Batched parameters reduce to the mean KL over rows.
inline Tensor kl_gaussian_prior(const DiagonalGaussian& g) {
  Tensor var = exp(g.log_variance);
  Tensor per_coord = (var + mul(g.mean, g.mean) - g.log_variance - 1.0) * 0.5;
  if (per_coord.rank() == 1) return sum(per_coord);
  return mean(sum(per_coord, 1));
}

// -log N(x | mu, sigma2 I) in the affine-L2 form
//   log((2 pi)^{n/2} sigma) + ||x - mu||^2 / (2 sigma2),
// averaged over batch rows; n is the data dimension.
inline Tensor gaussian_nll_l2(const Tensor& x, const Tensor& mu, double sigma2) {
  if (sigma2 <= 0.0) {
    throw ConfigError("gaussian_nll_l2: sigma2 must be positive, got " +
                      std::to_string(sigma2));
  }
  if (x.rank() != 2 || mu.rank() != 2 || x.shape() != mu.shape()) {
    throw ShapeError("gaussian_nll_l2: x " + shape_str(x.shape()) + " and mu " +
                     shape_str(mu.shape()) + " must be equal rank-2 shapes");
  }
  const double n_dim = static_cast<double>(x.extent(1));
  const double log_norm = 0.5 * n_dim * kLog2Pi + 0.5 * std::log(sigma2);
  Tensor diff = sub(x, mu);
  Tensor sq_norm = sum(mul(diff, diff), 1);  // [rows]
  return mean(sq_norm) * (0.5 / sigma2) + log_norm;
}

// ---------------------------------------------------------------------------
// Analytic (plain double) counterparts for verification paths

struct AnalyticDiagGaussian {
  std::vector<double> mean;
  std::vector<double> var;

  AnalyticDiagGaussian(std::vector<double> mean_, std::vector<double> var_)
      : mean(std::move(mean_)), var(std::move(var_)) {
    if (mean.size() != var.size() || mean.empty()) {
      throw ConfigError("analytic gaussian: mean/var size mismatch");
    }
    for (double v : var) {
      if (v <= 0.0) throw ConfigError("analytic gaussian: nonpositive variance");
    }
  }

  static AnalyticDiagGaussian univariate(double mu, double variance) {
    return AnalyticDiagGaussian({mu}, {variance});
  }

  std::size_t dim() const { return mean.size(); }

  double log_pdf(std::span<const double> x) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < mean.size(); ++j) {
      const double d = x[j] - mean[j];
      acc += -0.5 * (kLog2Pi + std::log(var[j]) + d * d / var[j]);
    }
    return acc;
  }

  void sample(RngStream& rng, std::span<double> out) const {
    for (std::size_t j = 0; j < mean.size(); ++j) {
      out[j] = mean[j] + std::sqrt(var[j]) * rng.normal();
    }
  }
};

// KL(N(mu0, var0) || N(mu1, var1)), coordinatewise diagonal closed form.
inline double kl_diag_gaussians(const AnalyticDiagGaussian& a,
                                const AnalyticDiagGaussian& b) {
  if (a.dim() != b.dim()) throw ConfigError("kl: dimension mismatch");
  double acc = 0.0;
  for (std::size_t j = 0; j < a.dim(); ++j) {
    acc += 0.5 * (std::log(b.var[j] / a.var[j]) +
                  (a.var[j] + (a.mean[j] - b.mean[j]) * (a.mean[j] - b.mean[j])) /
                      b.var[j] -
                  1.0);
  }
  return acc;
}

// KL(N(mean, var) || N(0, I)) closed form on plain doubles.
inline double kl_gaussian_prior_scalar(const std::vector<double>& mean,
                                       const std::vector<double>& var) {
  double acc = 0.0;
  for (std::size_t j = 0; j < mean.size(); ++j) {
    acc += 0.5 * (var[j] + mean[j] * mean[j] - 1.0 - std::log(var[j]));
  }
  return acc;
}

// ---------------------------------------------------------------------------
// Monte-Carlo estimation

struct ValueEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::size_t n_samples = 0;
};

using LogDensityFn = std::function<double(std::span<const double>)>;

inline ValueEstimate mean_and_stderr(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) throw ConfigError("mean_and_stderr: need at least 2 samples");
  double m = 0.0;
  for (double v : xs) m += v;
  m /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : xs) ss += (v - m) * (v - m);
  const double sample_var = ss / static_cast<double>(n - 1);
  return ValueEstimate{m, std::sqrt(sample_var / static_cast<double>(n)), n};
}

// Estimates KL(q || p) = E_{z~q}[log q(z) - log p(z)] from q-samples.
inline ValueEstimate mc_kl_estimate(const LogDensityFn& log_p,
                                    const LogDensityFn& log_q,
                                    const std::vector<std::vector<double>>& samples_from_q) {
  if (samples_from_q.size() < 2) {
    throw ConfigError("mc_kl_estimate: need at least 2 samples");
  }
  std::vector<double> diffs;
  diffs.reserve(samples_from_q.size());
  for (const auto& z : samples_from_q) {
    diffs.push_back(log_q(z) - log_p(z));
  }
  return mean_and_stderr(diffs);
}

inline std::vector<std::vector<double>> draw_samples(
    const AnalyticDiagGaussian& g, std::size_t n, RngStream& rng) {
  std::vector<std::vector<double>> out(n, std::vector<double>(g.dim()));
  for (auto& row : out) g.sample(rng, row);
  return out;
}

}  // namespace advae
