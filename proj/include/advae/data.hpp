#pragma once

// Synthetic datasets with known structure, and two sample-quality metrics:
// unbiased MMD^2 with an RBF kernel, and per-mode coverage counts for the
// Gaussian-mixture dataset.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advae/common.hpp"
#include "advae/random.hpp"
#include "advae/tensor.hpp"

namespace advae {

enum class DatasetId { gaussian_1d, mixture_of_gaussians_2d, two_moons, ring };

inline std::string to_string(DatasetId id) {
  switch (id) {
    case DatasetId::gaussian_1d: return "gaussian_1d";
    case DatasetId::mixture_of_gaussians_2d: return "mixture_of_gaussians_2d";
    case DatasetId::two_moons: return "two_moons";
    case DatasetId::ring: return "ring";
  }
  throw ConfigError("unknown dataset id");
}

inline DatasetId dataset_from_string(const std::string& s) {
  if (s == "gaussian_1d") return DatasetId::gaussian_1d;
  if (s == "mixture_of_gaussians_2d") return DatasetId::mixture_of_gaussians_2d;
  if (s == "two_moons") return DatasetId::two_moons;
  if (s == "ring") return DatasetId::ring;
  throw ConfigError("unknown dataset '" + s +
                    "' (expected gaussian_1d | mixture_of_gaussians_2d | "
                    "two_moons | ring)");
}

struct Dataset {
  DatasetId id = DatasetId::ring;
  // mixture parameters: equal-weight Gaussians on a circle
  std::size_t mixture_components = 8;
  double mixture_radius = 2.0;
  double mixture_sigma = 0.1;

  std::size_t data_dim() const {
    return id == DatasetId::gaussian_1d ? 1 : 2;
  }

  std::vector<std::vector<double>> component_means() const {
    if (id != DatasetId::mixture_of_gaussians_2d) {
      throw ConfigError("component_means: dataset '" + to_string(id) +
                        "' is not a mixture");
    }
    std::vector<std::vector<double>> means;
    for (std::size_t i = 0; i < mixture_components; ++i) {
      const double a = 6.283185307179586 * static_cast<double>(i) /
                       static_cast<double>(mixture_components);
      means.push_back({mixture_radius * std::cos(a), mixture_radius * std::sin(a)});
    }
    return means;
  }
};

inline Tensor sample_dataset(const Dataset& d, std::size_t n, RngStream& rng) {
  if (n < 1) throw ConfigError("sample_dataset: n must be >= 1");
  const std::size_t dim = d.data_dim();
  std::vector<double> vals(n * dim);
  switch (d.id) {
    case DatasetId::gaussian_1d: {
      for (std::size_t i = 0; i < n; ++i) vals[i] = rng.normal();
      break;
    }
    case DatasetId::mixture_of_gaussians_2d: {
      if (d.mixture_components < 1) {
        throw ConfigError("sample_dataset: mixture needs >= 1 component");
      }
      const auto means = d.component_means();
      const std::vector<double> w(d.mixture_components,
                                  1.0 / static_cast<double>(d.mixture_components));
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t c = rng.categorical(w);
        vals[2 * i] = means[c][0] + d.mixture_sigma * rng.normal();
        vals[2 * i + 1] = means[c][1] + d.mixture_sigma * rng.normal();
      }
      break;
    }
    case DatasetId::two_moons: {
      const double noise = 0.05;
      for (std::size_t i = 0; i < n; ++i) {
        const double t = rng.uniform() * 3.141592653589793;
        const bool lower = rng.uniform() < 0.5;
        double px = lower ? 1.0 - std::cos(t) : std::cos(t);
        double py = lower ? 0.5 - std::sin(t) : std::sin(t);
        vals[2 * i] = px + noise * rng.normal();
        vals[2 * i + 1] = py + noise * rng.normal();
      }
      break;
    }
    case DatasetId::ring: {
      for (std::size_t i = 0; i < n; ++i) {
        const double theta = rng.uniform() * 6.283185307179586;
        const double r = 1.0 + 0.1 * rng.normal();
        vals[2 * i] = r * std::cos(theta);
        vals[2 * i + 1] = r * std::sin(theta);
      }
      break;
    }
  }
  return Tensor(Shape{n, dim}, std::move(vals));
}

inline Tensor sample_dataset(const Dataset& d, std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  return sample_dataset(d, n, rng);
}

// ---------------------------------------------------------------------------
// MMD

inline double median_pairwise_distance(const Tensor& x, const Tensor& y) {
  const std::size_t dim = x.extent(1);
  std::vector<const double*> rows;
  for (std::size_t i = 0; i < x.extent(0); ++i) rows.push_back(x.values().data() + i * dim);
  for (std::size_t i = 0; i < y.extent(0); ++i) rows.push_back(y.values().data() + i * dim);
  std::vector<double> dists;
  dists.reserve(rows.size() * (rows.size() - 1) / 2);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < dim; ++k) {
        const double df = rows[i][k] - rows[j][k];
        s += df * df;
      }
      dists.push_back(std::sqrt(s));
    }
  }
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2, dists.end());
  double m = dists[dists.size() / 2];
  if (m <= 0.0) m = 1.0;  // all points identical
  return m;
}

// Unbiased MMD^2 estimate with k(u, v) = exp(-||u-v||^2 / (2 bandwidth^2)).
// May be slightly negative by unbiasedness; callers clip at reporting time.
// Arguments are ordered canonically before accumulation so the estimate is
// exactly symmetric in its two sample sets.
inline double mmd_rbf(const Tensor& x_in, const Tensor& y_in, double bandwidth) {
  if (x_in.rank() != 2 || y_in.rank() != 2 || x_in.extent(1) != y_in.extent(1)) {
    throw ShapeError("mmd_rbf: need rank-2 samples with matching dim, got " +
                     shape_str(x_in.shape()) + " and " + shape_str(y_in.shape()));
  }
  const bool swap = y_in.extent(0) < x_in.extent(0) ||
                    (y_in.extent(0) == x_in.extent(0) &&
                     y_in.values() < x_in.values());
  const Tensor& x = swap ? y_in : x_in;
  const Tensor& y = swap ? x_in : y_in;
  const std::size_t n = x.extent(0), m = y.extent(0);
  if (n < 2 || m < 2) throw ConfigError("mmd_rbf: need at least 2 samples per set");
  if (bandwidth <= 0.0) throw ConfigError("mmd_rbf: bandwidth must be positive");
  const std::size_t dim = x.extent(1);
  const double gamma = 1.0 / (2.0 * bandwidth * bandwidth);
  auto kernel = [&](const double* a, const double* b) {
    double s = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double df = a[k] - b[k];
      s += df * df;
    }
    return std::exp(-gamma * s);
  };
  const double* xd = x.values().data();
  const double* yd = y.values().data();
  double t_xx = 0.0, t_yy = 0.0, t_xy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) t_xx += kernel(xd + i * dim, xd + j * dim);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) t_yy += kernel(yd + i * dim, yd + j * dim);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) t_xy += kernel(xd + i * dim, yd + j * dim);
  }
  const double nn = static_cast<double>(n), mm = static_cast<double>(m);
  return 2.0 * t_xx / (nn * (nn - 1.0)) + 2.0 * t_yy / (mm * (mm - 1.0)) -
         2.0 * t_xy / (nn * mm);
}

// ---------------------------------------------------------------------------
// Mode coverage

// Assigns each 2-D sample to the nearest mixture component mean. The flat
// overload accepts an empty sample list (all counts zero).
inline std::vector<std::size_t> mode_coverage(const std::vector<double>& samples_xy,
                                              const Dataset& mixture) {
  const auto means = mixture.component_means();  // throws if not a mixture
  if (samples_xy.size() % 2 != 0) {
    throw ShapeError("mode_coverage: flat sample list must hold 2-D points");
  }
  std::vector<std::size_t> counts(means.size(), 0);
  for (std::size_t i = 0; i + 2 <= samples_xy.size(); i += 2) {
    const double px = samples_xy[i], py = samples_xy[i + 1];
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < means.size(); ++c) {
      const double dx = px - means[c][0], dy = py - means[c][1];
      const double d2 = dx * dx + dy * dy;
      if (d2 < best_d) {
        best_d = d2;
        best = c;
      }
    }
    ++counts[best];
  }
  return counts;
}

inline std::vector<std::size_t> mode_coverage(const Tensor& samples,
                                              const Dataset& mixture) {
  if (samples.rank() != 2 || samples.extent(1) != 2) {
    throw ShapeError("mode_coverage: samples must be [n x 2], got " +
                     shape_str(samples.shape()));
  }
  return mode_coverage(samples.values(), mixture);
}

// ---------------------------------------------------------------------------
// Evaluation report and sample dumps

struct EvalReport {
  double mmd2 = 0.0;      // clipped at zero for reporting
  double mmd2_raw = 0.0;  // unbiased estimate, may be negative
  double bandwidth = 0.0;
  std::optional<std::vector<std::size_t>> coverage;
  std::size_t n_samples = 0;
  std::string dataset;
  std::string sample_file;
};

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json j{{"mmd2", r.mmd2},
                   {"mmd2_raw", r.mmd2_raw},
                   {"bandwidth", r.bandwidth},
                   {"n_samples", r.n_samples},
                   {"dataset", r.dataset},
                   {"sample_file", r.sample_file}};
  j["mode_coverage"] =
      r.coverage ? nlohmann::json(*r.coverage) : nlohmann::json();
  return j;
}

inline void write_samples_csv(const std::string& path, const Tensor& samples,
                              const std::string& dataset_id, std::uint64_t seed) {
  std::ofstream f(path);
  if (!f) throw IoError("samples: cannot open '" + path + "' for writing");
  f << "# dataset=" << dataset_id << " seed=" << seed << "\n";
  const std::size_t n = samples.extent(0), dim = samples.extent(1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      if (j) f << ',';
      f << fmt_g17(samples.at(i * dim + j));
    }
    f << '\n';
  }
  if (!f) throw IoError("samples: write failed for '" + path + "'");
}

}  // namespace advae
