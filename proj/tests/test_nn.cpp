#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <vector>

#include <advae/nn.hpp>
#include <advae/random.hpp>
#include <advae/tensor.hpp>

using namespace advae;

TEST_CASE("init_mlp") {
  SUBCASE("deterministic given seed") {
    Mlp m1 = init_mlp({2, 8, 1}, Activation::relu, 7);
    Mlp m2 = init_mlp({2, 8, 1}, Activation::relu, 7);
    auto p1 = m1.params(), p2 = m2.params();
    REQUIRE(p1.size() == p2.size());
    for (std::size_t i = 0; i < p1.size(); ++i) {
      CHECK(p1[i].values() == p2[i].values());
    }
  }
  SUBCASE("degenerate dims rejected") {
    CHECK_THROWS_AS(init_mlp({3}, Activation::relu, 1), ConfigError);
    CHECK_THROWS_AS(init_mlp({}, Activation::relu, 1), ConfigError);
    CHECK_THROWS_AS(init_mlp({2, 0, 1}, Activation::relu, 1), ConfigError);
  }
  SUBCASE("weights are zero-mean at the 1/sqrt(fan_in) scale") {
    // 10^4 draws at fan_in 100: sd = 0.1, stderr of the mean = 1e-3
    Mlp m = init_mlp({100, 100}, Activation::relu, 19);
    const auto& w = m.layers()[0].weight.values();
    double mean_w = 0.0;
    for (double v : w) mean_w += v;
    mean_w /= static_cast<double>(w.size());
    CHECK(std::fabs(mean_w) < 3e-3);
    for (double v : m.layers()[0].bias.values()) CHECK(v == 0.0);
    for (const auto& p : m.params()) CHECK(p.requires_grad());
  }
}

TEST_CASE("mlp forward") {
  SUBCASE("all-zero parameters give zero output") {
    Mlp m({LinearLayer{Tensor::zeros({3, 2}, true), Tensor::zeros({3}, true)}},
          Activation::relu);
    Tensor x({2, 2}, {1.0, -2.0, 0.5, 4.0});
    Tensor y = m.forward(x);
    for (double v : y.values()) CHECK(v == 0.0);
  }
  SUBCASE("single linear layer equals matmul plus bias") {
    RngStream rng(5);
    Mlp m = init_mlp({3, 2}, Activation::relu, rng);
    std::vector<double> xv(4 * 3);
    RngStream rx(6);
    rx.fill_normal(xv);
    Tensor x({4, 3}, xv);
    Tensor out = m.forward(x);
    // manual route: x . w^T + b
    const Tensor& w = m.layers()[0].weight;
    std::vector<double> wt(3 * 2);
    for (std::size_t o = 0; o < 2; ++o) {
      for (std::size_t i = 0; i < 3; ++i) wt[i * 2 + o] = w.at(o * 3 + i);
    }
    Tensor manual = add(matmul(x, Tensor({3, 2}, wt)), m.layers()[0].bias);
    for (std::size_t i = 0; i < out.numel(); ++i) {
      CHECK(out.at(i) == doctest::Approx(manual.at(i)).epsilon(1e-15));
    }
  }
  SUBCASE("two-layer chain matches hand computation") {
    // weights chosen by hand; relu in between
    Mlp m({LinearLayer{Tensor({2, 2}, {1.0, -1.0, 0.5, 2.0}, true),
                       Tensor({2}, {0.1, -0.2}, true)},
           LinearLayer{Tensor({1, 2}, {2.0, 3.0}, true),
                       Tensor({1}, {0.05}, true)}},
          Activation::relu);
    Tensor x({1, 2}, {0.7, 0.4});
    // h = relu([0.7-0.4+0.1, 0.35+0.8-0.2]) = [0.4, 0.95]
    // y = 2*0.4 + 3*0.95 + 0.05 = 3.7
    CHECK(m.forward(x).item() == doctest::Approx(3.7).epsilon(1e-12));
  }
  SUBCASE("width mismatch is a shape error") {
    Mlp m = init_mlp({3, 2}, Activation::relu, 1);
    CHECK_THROWS_AS(m.forward(Tensor::zeros({2, 4})), ShapeError);
  }
  SUBCASE("forward is linear in batch: rows alone equal rows jointly") {
    Mlp m = init_mlp({3, 5, 2}, Activation::tanh, 21);
    std::vector<double> xv(6 * 3);
    RngStream rx(22);
    rx.fill_normal(xv);
    Tensor x({6, 3}, xv);
    Tensor joint = m.forward(x);
    for (std::size_t r = 0; r < 6; ++r) {
      std::vector<double> row(xv.begin() + r * 3, xv.begin() + (r + 1) * 3);
      Tensor single = m.forward(Tensor({1, 3}, row));
      for (std::size_t j = 0; j < 2; ++j) {
        CHECK(std::fabs(single.at(j) - joint.at(r * 2 + j)) < 1e-12);
      }
    }
  }
}

TEST_CASE("adam") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Tensor p({2}, {1.0, -2.0}, true);
    AdamState opt({{"p", p}}, AdamConfig{0.05});
    p.grad_buffer();  // zeros
    opt.step();
    CHECK(p.values() == std::vector<double>{1.0, -2.0});
  }
  SUBCASE("constant gradient moves opposite its sign") {
    Tensor p({1}, {0.0}, true);
    AdamState opt({{"p", p}}, AdamConfig{0.01});
    for (int t = 0; t < 20; ++t) {
      p.zero_grad();
      p.grad_buffer()[0] = 2.5;
      opt.step();
    }
    CHECK(p.at(0) < 0.0);
  }
  SUBCASE("minimizes (x-3)^2 from 0 with lr=0.1 in 500 steps") {
    // oracle: an independent scalar Adam recursion
    double ox = 0.0, om = 0.0, ov = 0.0;
    const AdamConfig cfg{0.1};
    Tensor x({1}, {0.0}, true);
    AdamState opt({{"x", x}}, cfg);
    for (int t = 1; t <= 500; ++t) {
      x.zero_grad();
      {
        Graph g;
        Tensor diff = x - 3.0;
        g.backward(mul(diff, diff));
      }
      opt.step();

      const double og = 2.0 * (ox - 3.0);
      om = cfg.beta1 * om + (1 - cfg.beta1) * og;
      ov = cfg.beta2 * ov + (1 - cfg.beta2) * og * og;
      const double mh = om / (1 - std::pow(cfg.beta1, t));
      const double vh = ov / (1 - std::pow(cfg.beta2, t));
      ox -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
      CHECK(x.at(0) == doctest::Approx(ox).epsilon(1e-12));
    }
    CHECK(std::fabs(x.at(0) - 3.0) < 1e-2);
  }
  SUBCASE("lr = 0 never changes parameters") {
    Tensor p({2}, {0.3, 0.7}, true);
    AdamState opt({{"p", p}}, AdamConfig{0.0});
    for (int t = 0; t < 5; ++t) {
      p.zero_grad();
      auto& g = p.grad_buffer();
      g[0] = 1.0;
      g[1] = -2.0;
      opt.step();
    }
    CHECK(p.values() == std::vector<double>{0.3, 0.7});
  }
  SUBCASE("missing gradient names the parameter") {
    Tensor a({1}, {0.0}, true);
    Tensor b({1}, {0.0}, true);
    AdamState opt({{"layer0.weight", a}, {"layer0.bias", b}}, AdamConfig{0.1});
    a.grad_buffer();
    try {
      opt.step();
      CHECK(false);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find("layer0.bias") != std::string::npos);
    }
  }
  SUBCASE("non-finite gradient aborts before any update") {
    Tensor a({1}, {1.0}, true);
    AdamState opt({{"a", a}}, AdamConfig{0.1});
    a.grad_buffer()[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(opt.step(), NumericError);
    CHECK(a.at(0) == 1.0);
    CHECK(opt.step_count() == 0);
  }
}

TEST_CASE("regression smoke: loss decreases monotonically early") {
  // 1-hidden-layer net regressing y = 2x on 64 points, lr = 1e-3
  RngStream rng(33);
  Mlp m = init_mlp({1, 16, 1}, Activation::tanh, rng);
  AdamState opt(m.named_params(), AdamConfig{1e-3});
  std::vector<double> xs(64);
  for (std::size_t i = 0; i < 64; ++i) xs[i] = -2.0 + 4.0 * static_cast<double>(i) / 63.0;
  std::vector<double> ys(64);
  for (std::size_t i = 0; i < 64; ++i) ys[i] = 2.0 * xs[i];
  Tensor x({64, 1}, xs), y({64, 1}, ys);
  double prev = 1e300;
  for (int t = 0; t < 10; ++t) {
    Graph g;
    Tensor diff = sub(m.forward(x), y);
    Tensor loss = mean(mul(diff, diff));
    zero_grads(m.params());
    g.backward(loss);
    opt.step();
    CHECK(loss.item() < prev);
    prev = loss.item();
  }
}

TEST_CASE("checkpoint container round trip") {
  namespace fs = std::filesystem;
  const std::string path = (fs::temp_directory_path() / "advae_nn_ckpt.bin").string();
  Mlp m = init_mlp({3, 4, 2}, Activation::softplus, 9, Activation::tanh);
  json manifest;
  manifest["networks"] = json::array({mlp_manifest(m)});
  manifest["networks"][0]["name"] = "net";
  std::vector<const std::vector<double>*> arrays;
  auto params = m.params();
  for (const auto& p : params) arrays.push_back(&p.values());
  write_checkpoint(path, manifest, arrays);

  CheckpointReader reader(path);
  CHECK(reader.manifest().at("networks")[0].at("dims") ==
        json(std::vector<std::size_t>{3, 4, 2}));
  Mlp restored = mlp_from_manifest(reader.manifest().at("networks")[0]);
  for (auto p : restored.params()) p.values() = reader.read_array(p.numel());
  auto orig = m.params(), rest = restored.params();
  for (std::size_t i = 0; i < orig.size(); ++i) {
    CHECK(orig[i].values() == rest[i].values());
  }
  CHECK(restored.hidden_activation() == Activation::softplus);
  CHECK(restored.output_activation() == Activation::tanh);
  fs::remove(path);

  CHECK_THROWS_AS(CheckpointReader("/nonexistent/advae.ckpt"), IoError);
}
