#pragma once

// MLP layers, initialization, the Adam optimizer, and the checkpoint
// container format (JSON manifest + flat little-endian float64 arrays).

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "advae/common.hpp"
#include "advae/random.hpp"
#include "advae/tensor.hpp"

namespace advae {

using nlohmann::json;

enum class Activation { identity, relu, tanh, softplus };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
  }
  throw ConfigError("unknown activation");
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "relu") return Activation::relu;
  if (s == "tanh") return Activation::tanh;
  if (s == "softplus") return Activation::softplus;
  throw ConfigError("unknown activation '" + s + "'");
}

inline Tensor apply_activation(Activation a, const Tensor& x) {
  switch (a) {
    case Activation::identity: return x;
    case Activation::relu: return relu(x);
    case Activation::tanh: return tanh(x);
    case Activation::softplus: return softplus(x);
  }
  throw ConfigError("unknown activation");
}

struct LinearLayer {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out]
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<LinearLayer> layers, Activation hidden,
      Activation output = Activation::identity)
      : layers_(std::move(layers)), hidden_act_(hidden), output_act_(output) {
    if (layers_.empty()) throw ConfigError("mlp: needs at least one layer");
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
      if (layers_[i].weight.extent(0) != layers_[i + 1].weight.extent(1)) {
        throw ShapeError("mlp: layer " + std::to_string(i) + " output width " +
                         std::to_string(layers_[i].weight.extent(0)) +
                         " does not chain into layer " + std::to_string(i + 1));
      }
    }
  }

  Tensor forward(const Tensor& x) const {
    if (x.rank() != 2 || x.extent(1) != in_dim()) {
      throw ShapeError("mlp: input " +
                       (x.defined() ? shape_str(x.shape()) : "<empty>") +
                       " does not match expected width " +
                       std::to_string(in_dim()));
    }
    Tensor h = x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      h = linear(h, layers_[i].weight, layers_[i].bias);
      if (i + 1 < layers_.size()) {
        h = apply_activation(hidden_act_, h);
      } else {
        h = apply_activation(output_act_, h);
      }
    }
    return h;
  }

  std::size_t in_dim() const { return layers_.front().weight.extent(1); }
  std::size_t out_dim() const { return layers_.back().weight.extent(0); }
  std::size_t n_layers() const { return layers_.size(); }
  const std::vector<LinearLayer>& layers() const { return layers_; }
  Activation hidden_activation() const { return hidden_act_; }
  Activation output_activation() const { return output_act_; }

  std::vector<std::size_t> dims() const {
    std::vector<std::size_t> d{in_dim()};
    for (const auto& l : layers_) d.push_back(l.weight.extent(0));
    return d;
  }

  std::vector<Tensor> params() const {
    std::vector<Tensor> ps;
    for (const auto& l : layers_) {
      ps.push_back(l.weight);
      ps.push_back(l.bias);
    }
    return ps;
  }

  std::vector<std::pair<std::string, Tensor>> named_params(
      const std::string& prefix = "") const {
    std::vector<std::pair<std::string, Tensor>> ps;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      ps.emplace_back(prefix + "layer" + std::to_string(i) + ".weight",
                      layers_[i].weight);
      ps.emplace_back(prefix + "layer" + std::to_string(i) + ".bias",
                      layers_[i].bias);
    }
    return ps;
  }

 private:
  std::vector<LinearLayer> layers_;
  Activation hidden_act_ = Activation::relu;
  Activation output_act_ = Activation::identity;
};

// Weights ~ N(0, 1/fan_in), biases zero. Deterministic for a given stream.
inline Mlp init_mlp(const std::vector<std::size_t>& dims, Activation hidden,
                    RngStream& rng, Activation output = Activation::identity) {
  if (dims.size() < 2) {
    throw ConfigError("init_mlp: need at least [in, out] widths, got " +
                      std::to_string(dims.size()));
  }
  for (std::size_t d : dims) {
    if (d == 0) throw ConfigError("init_mlp: zero layer width");
  }
  std::vector<LinearLayer> layers;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    const std::size_t in = dims[i], out = dims[i + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(out * in);
    for (auto& v : w) v = rng.normal() * scale;
    layers.push_back(LinearLayer{Tensor(Shape{out, in}, std::move(w), true),
                                 Tensor::zeros(Shape{out}, true)});
  }
  return Mlp(std::move(layers), hidden, output);
}

inline Mlp init_mlp(const std::vector<std::size_t>& dims, Activation hidden,
                    std::uint64_t seed, Activation output = Activation::identity) {
  RngStream rng(seed);
  return init_mlp(dims, hidden, rng, output);
}

// ---------------------------------------------------------------------------
// Adam

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;  // lowered first moment for adversarial stability
  double beta2 = 0.999;
  double eps = 1e-8;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(std::vector<std::pair<std::string, Tensor>> params, AdamConfig cfg)
      : params_(std::move(params)), cfg_(cfg) {
    for (const auto& [nm, p] : params_) {
      m_.emplace_back(p.numel(), 0.0);
      v_.emplace_back(p.numel(), 0.0);
    }
  }

  // One Adam update with bias correction. Gradients are read, never reset;
  // the whole gradient set is validated before any parameter moves.
  void step() {
    for (const auto& [nm, p] : params_) {
      if (!p.has_grad()) {
        throw ConfigError("adam: missing gradient for parameter '" + nm + "'");
      }
      for (std::size_t i = 0; i < p.grad().size(); ++i) {
        if (!std::isfinite(p.grad()[i])) {
          throw NumericError("adam: non-finite gradient in '" + nm +
                             "' at index " + std::to_string(i));
        }
      }
    }
    ++step_count_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_count_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_count_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
      Tensor p = params_[pi].second;
      const auto& g = p.grad();
      auto& vals = p.values();
      auto& m = m_[pi];
      auto& v = v_[pi];
      for (std::size_t i = 0; i < vals.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        vals[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
      }
    }
  }

  long step_count() const { return step_count_; }
  const AdamConfig& config() const { return cfg_; }
  const std::vector<std::pair<std::string, Tensor>>& params() const {
    return params_;
  }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }

  void restore(long step_count, std::vector<std::vector<double>> m,
               std::vector<std::vector<double>> v) {
    if (m.size() != params_.size() || v.size() != params_.size()) {
      throw IoError("adam: moment count mismatch on restore");
    }
    for (std::size_t i = 0; i < params_.size(); ++i) {
      if (m[i].size() != params_[i].second.numel() ||
          v[i].size() != params_[i].second.numel()) {
        throw IoError("adam: moment shape mismatch on restore for '" +
                      params_[i].first + "'");
      }
    }
    step_count_ = step_count;
    m_ = std::move(m);
    v_ = std::move(v);
  }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> m_, v_;
  long step_count_ = 0;
  AdamConfig cfg_;
};

// ---------------------------------------------------------------------------
// Checkpoint container
//
// Layout: 8-byte magic, uint64 LE manifest length, manifest JSON (UTF-8),
// then the flat float64 arrays in exactly the order the manifest lists them.

inline constexpr char kCheckpointMagic[8] = {'A', 'D', 'V', 'A',
                                             'E', 'C', 'P', '1'};

inline json mlp_manifest(const Mlp& m) {
  json j;
  j["dims"] = m.dims();
  j["activation"] = to_string(m.hidden_activation());
  j["output_activation"] = to_string(m.output_activation());
  json params = json::array();
  for (const auto& [nm, p] : m.named_params()) {
    params.push_back({{"name", nm}, {"shape", p.shape()}});
  }
  j["params"] = params;
  return j;
}

inline Mlp mlp_from_manifest(const json& j) {
  std::vector<std::size_t> dims = j.at("dims").get<std::vector<std::size_t>>();
  Activation hidden = activation_from_string(j.at("activation").get<std::string>());
  Activation output =
      activation_from_string(j.at("output_activation").get<std::string>());
  return init_mlp(dims, hidden, /*seed=*/0, output);
}

inline void write_checkpoint(const std::string& path, const json& manifest,
                             const std::vector<const std::vector<double>*>& arrays) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("checkpoint: cannot open '" + path + "' for writing");
  f.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::string m = manifest.dump();
  const std::uint64_t len = m.size();
  f.write(reinterpret_cast<const char*>(&len), sizeof(len));
  f.write(m.data(), static_cast<std::streamsize>(m.size()));
  for (const auto* arr : arrays) {
    f.write(reinterpret_cast<const char*>(arr->data()),
            static_cast<std::streamsize>(arr->size() * sizeof(double)));
  }
  if (!f) throw IoError("checkpoint: write failed for '" + path + "'");
}

// Reads the manifest; the caller then pulls arrays in manifest order.
class CheckpointReader {
 public:
  explicit CheckpointReader(const std::string& path)
      : f_(path, std::ios::binary) {
    if (!f_) throw IoError("checkpoint: cannot open '" + path + "'");
    char magic[8];
    f_.read(magic, sizeof(magic));
    if (!f_ || !std::equal(magic, magic + 8, kCheckpointMagic)) {
      throw IoError("checkpoint: bad magic in '" + path + "'");
    }
    std::uint64_t len = 0;
    f_.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string m(len, '\0');
    f_.read(m.data(), static_cast<std::streamsize>(len));
    if (!f_) throw IoError("checkpoint: truncated manifest in '" + path + "'");
    manifest_ = json::parse(m);
  }

  const json& manifest() const { return manifest_; }

  std::vector<double> read_array(std::size_t count) {
    std::vector<double> out(count);
    f_.read(reinterpret_cast<char*>(out.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
    if (!f_) throw IoError("checkpoint: truncated array data");
    return out;
  }

 private:
  std::ifstream f_;
  json manifest_;
};

}  // namespace advae
