// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria run end to end with their tolerances pinned in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <advae/advae.hpp>

using namespace advae;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void report(int criterion, bool pass, const std::string& what, double secs) {
  std::printf("%s criterion %d: %s (%.1fs)\n", pass ? "PASS" : "FAIL", criterion,
              what.c_str(), secs);
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

std::string slurp(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

std::string scratch_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("advae_acceptance_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

// --------------------------------------------------------------------------
// 1. Scalar maximizer lemmas: closed forms log(b/a) and 1 + log(a/b) match
//    golden-section search within 1e-6 absolute on 200 random (a, b).

void criterion_1() {
  auto t0 = std::chrono::steady_clock::now();
  VerificationReport rep = run_maximizer_suite(200, 20260808, 1e-6);
  std::size_t matches = 0;
  bool ok = true;
  for (const auto& c : rep.cases) {
    if (c.id.find("/maximizer/") != std::string::npos) {
      ++matches;
      ok = ok && c.pass;
    }
  }
  ok = ok && matches == 400 && rep.pass();
  report(1, ok, "scalar maximizers vs golden-section search, 200 pairs per game",
         seconds_since(t0));
}

// --------------------------------------------------------------------------
// 2. Optimal-discriminator recovery: with q = N(1,1), p = N(0,1) frozen, a
//    trained inference discriminator reaches MAE < 0.1 against D*(z) = 0.5 - z
//    on z in [-2, 3].

void criterion_2() {
  auto t0 = std::chrono::steady_clock::now();
  DiscTrainReport rep = train_inference_disc_on_fixed_pair(
      /*steps=*/2500, /*batch=*/256, /*lr=*/1e-3, /*hidden=*/32, /*seed=*/1);
  std::ostringstream what;
  what << "trained inference discriminator MAE vs 0.5 - z: " << rep.mae
       << " (< 0.1), value estimate " << rep.value_estimate;
  report(2, rep.mae < 0.1, what.str(), seconds_since(t0));
}

// --------------------------------------------------------------------------
// 3. KL recovery, inference game: Monte-Carlo V(D*) with 1e6 samples equals
//    the analytic reverse KL within 4 standard errors; canonical pair plus 10
//    randomized pairs against 0.5 (sigma^2 + mu^2 - 1 - log sigma^2).

void criterion_3() {
  auto t0 = std::chrono::steady_clock::now();
  RngStream rng(303);
  bool ok = true;
  std::ostringstream what;
  {
    auto q = AnalyticDiagGaussian::univariate(1.0, 1.0);
    auto p = AnalyticDiagGaussian::univariate(0.0, 1.0);
    ValueEstimate v = inference_value_mc(q, p, 0.0, 1000000, rng);
    const double z = (v.value - 0.5) / v.stderr_;
    ok = ok && std::fabs(z) <= 4.0;
    what << "canonical z=" << std::abs(z);
  }
  double worst_z = 0.0;
  for (int i = 0; i < 10; ++i) {
    const double mu = rng.uniform(-1.0, 1.0);
    const double var = rng.uniform(0.7, 1.4);
    auto q = AnalyticDiagGaussian::univariate(mu, var);
    auto p = AnalyticDiagGaussian::univariate(0.0, 1.0);
    const double closed = 0.5 * (var + mu * mu - 1.0 - std::log(var));
    ValueEstimate v = inference_value_mc(q, p, 0.0, 1000000, rng);
    const double z = (v.value - closed) / v.stderr_;
    worst_z = std::max(worst_z, std::fabs(z));
    ok = ok && std::fabs(z) <= 4.0;
  }
  what << ", worst randomized z=" << worst_z << " (<= 4)";
  report(3, ok, "inference game recovers reverse KL: " + what.str(),
         seconds_since(t0));
}

// --------------------------------------------------------------------------
// 4. KL recovery, generative game: same protocol with analytic p_data /
//    p_model pairs; all z-scores <= 4.

void criterion_4() {
  auto t0 = std::chrono::steady_clock::now();
  RngStream rng(404);
  bool ok = true;
  double worst_z = 0.0;
  {
    auto pd = AnalyticDiagGaussian::univariate(0.0, 1.0);
    auto pm = AnalyticDiagGaussian::univariate(0.5, 1.0);
    ValueEstimate v = generative_value_mc(pd, pm, 0.0, 1000000, rng);
    const double z = (v.value - 0.125) / v.stderr_;
    worst_z = std::fabs(z);
    ok = ok && std::fabs(z) <= 4.0;
  }
  for (int i = 0; i < 10; ++i) {
    auto pd = AnalyticDiagGaussian::univariate(rng.uniform(-1.0, 1.0),
                                               rng.uniform(0.8, 1.3));
    auto pm = AnalyticDiagGaussian::univariate(rng.uniform(-1.0, 1.0),
                                               rng.uniform(0.8, 1.3));
    const double closed = kl_diag_gaussians(pd, pm);
    ValueEstimate v = generative_value_mc(pd, pm, 0.0, 1000000, rng);
    const double z = (v.value - closed) / v.stderr_;
    worst_z = std::max(worst_z, std::fabs(z));
    ok = ok && std::fabs(z) <= 4.0;
  }
  std::ostringstream what;
  what << "generative game recovers direct KL: worst z=" << worst_z << " (<= 4)";
  report(4, ok, what.str(), seconds_since(t0));
}

// --------------------------------------------------------------------------
// 5. Gradient integrity: the full grad-check suite (autodiff ops,
//    reparametrized sampling, generator losses, combined objective) passes at
//    relative tolerance 1e-4 against central differences.

void criterion_5() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& c : grad_check_scope("all", 505)) {
    if (c.report.max_rel_err > worst) {
      worst = c.report.max_rel_err;
      worst_name = c.name;
    }
    ok = ok && c.report.pass;
  }
  std::ostringstream what;
  what << "grad-check all scopes at tol 1e-4, worst " << worst_name << " = "
       << worst;
  report(5, ok, what.str(), seconds_since(t0));
}

// --------------------------------------------------------------------------
// 6. Baseline VAE smoke: on the 2-D ring dataset, ELBO after 2000 steps
//    exceeds ELBO at step 0 in at least 2 of 3 seeds.

void criterion_6() {
  auto t0 = std::chrono::steady_clock::now();
  int improved = 0;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    TrainConfig cfg;
    cfg.variant = VariantKind::gaussian;
    cfg.dataset.id = DatasetId::ring;
    cfg.latent_dim = 2;
    cfg.enc_hidden = {64, 64};
    cfg.dec_hidden = {64, 64};
    cfg.lr_encoder = 1e-3;
    cfg.lr_decoder = 1e-3;
    cfg.batch_size = 128;
    cfg.seed = seed;
    TrainState s = init_train_state(cfg);
    Tensor x0 = sample_dataset(cfg.dataset, 512, s.rng);
    MetricsRecord at0 = eval_metrics(s, x0);
    MetricsRecord last;
    for (int t = 0; t < 2000; ++t) {
      Tensor x = sample_dataset(cfg.dataset, cfg.batch_size, s.rng);
      last = train_step_baseline(s, x);
    }
    if (*last.elbo > *at0.elbo) ++improved;
  }
  std::ostringstream what;
  what << "baseline VAE ELBO improves on ring data in " << improved
       << "/3 seeds (need >= 2)";
  report(6, improved >= 2, what.str(), seconds_since(t0));
}

// --------------------------------------------------------------------------
// 7. Full adversarial smoke: on the 8-Gaussian mixture, after 10k steps the
//    trained model's MMD^2 to held-out data is below the untrained model's in
//    at least 2 of 3 seeds, with >= 6 of 8 modes covered in the passing runs.

struct AdversarialRunResult {
  double mmd_untrained = 0.0;
  double mmd_trained = 0.0;
  std::size_t modes_covered = 0;
  bool mmd_improved = false;
};

AdversarialRunResult adversarial_smoke_run(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.variant = VariantKind::full;
  cfg.dataset.id = DatasetId::mixture_of_gaussians_2d;
  cfg.latent_dim = 2;
  cfg.enc_hidden = {32, 32};
  cfg.dec_hidden = {32, 32};
  cfg.disc_hidden = {48, 48};
  cfg.disc_steps_per_gen_step = 2;
  cfg.lr_encoder = 3e-4;
  cfg.lr_decoder = 3e-4;
  cfg.lr_disc_inference = 1e-3;
  cfg.lr_disc_generative = 1e-3;
  cfg.batch_size = 64;
  cfg.clamp_bound = 10.0;
  cfg.seed = seed;
  TrainState s = init_train_state(cfg);

  const std::size_t n_eval = 1000;
  Tensor held_out = sample_dataset(cfg.dataset, n_eval, 999 + seed);
  const double bandwidth = median_pairwise_distance(held_out, held_out);

  AdversarialRunResult r;
  {
    Tensor samples = sample_model(s.model, n_eval, 7000 + seed);
    r.mmd_untrained = mmd_rbf(samples, held_out, bandwidth);
  }
  for (int t = 0; t < 10000; ++t) {
    Tensor x = sample_dataset(cfg.dataset, cfg.batch_size, s.rng);
    train_step_adversarial(s, x);
  }
  Tensor samples = sample_model(s.model, n_eval, 7000 + seed);
  r.mmd_trained = mmd_rbf(samples, held_out, bandwidth);
  auto counts = mode_coverage(samples, cfg.dataset);
  for (std::size_t c : counts) r.modes_covered += (c > 0) ? 1 : 0;
  r.mmd_improved = r.mmd_trained < r.mmd_untrained;
  return r;
}

void criterion_7() {
  auto t0 = std::chrono::steady_clock::now();
  int improved = 0;
  int passing_with_modes = 0;
  std::ostringstream what;
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    AdversarialRunResult r = adversarial_smoke_run(seed);
    if (r.mmd_improved) {
      ++improved;
      if (r.modes_covered >= 6) ++passing_with_modes;
    }
    what << " [seed " << seed << ": mmd " << r.mmd_untrained << " -> "
         << r.mmd_trained << ", modes " << r.modes_covered << "/8]";
  }
  const bool ok = improved >= 2 && passing_with_modes >= 2;
  report(7, ok, "full adversarial training on the 8-Gaussian mixture:" + what.str(),
         seconds_since(t0));
}

// --------------------------------------------------------------------------
// 8. Determinism: identical configs and seeds yield byte-identical output
//    files across two runs of every subcommand.

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ADVAE_CLI_PATH) + " " + args +
                          " >/dev/null 2>/dev/null";
  return WEXITSTATUS(std::system(cmd.c_str()));
}

void criterion_8() {
  auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::ostringstream what;
  const std::string dir = scratch_dir("determinism");

  TrainConfig cfg;
  cfg.variant = VariantKind::full;
  cfg.dataset.id = DatasetId::mixture_of_gaussians_2d;
  cfg.enc_hidden = {8};
  cfg.dec_hidden = {8};
  cfg.disc_hidden = {8};
  cfg.disc_steps_per_gen_step = 2;
  cfg.batch_size = 16;
  cfg.total_steps = 25;
  cfg.metrics_every = 5;
  cfg.checkpoint_every = 0;
  cfg.eval_samples = 64;
  cfg.seed = 88;
  cfg.out_dir = dir + "/train";
  {
    std::ofstream f(dir + "/config.json");
    f << to_json(cfg).dump(2);
  }

  auto twice_identical = [&](const std::string& args,
                             const std::vector<std::string>& files,
                             const std::string& label) {
    if (run_cli(args) != 0) {
      ok = false;
      what << " [" << label << ": nonzero exit]";
      return;
    }
    std::vector<std::string> first;
    for (const auto& f : files) first.push_back(slurp(f));
    if (run_cli(args) != 0) {
      ok = false;
      what << " [" << label << ": nonzero exit on rerun]";
      return;
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
      if (slurp(files[i]) != first[i] || first[i].empty()) {
        ok = false;
        what << " [" << label << ": " << files[i] << " differs]";
      }
    }
  };

  twice_identical("train --config " + dir + "/config.json",
                  {dir + "/train/metrics.csv", dir + "/train/samples.csv",
                   dir + "/train/eval_report.json"},
                  "train");
  twice_identical("verify --suite all --samples 20000 --seed 9 --out " + dir +
                      "/verify",
                  {dir + "/verify/verify_report.json"}, "verify");
  twice_identical("grad-check --scope all --seed 6 --out " + dir + "/gc",
                  {dir + "/gc/grad_check_report.json"}, "grad-check");
  twice_identical("eval --checkpoint " + dir + "/train/final.ckpt --dataset " +
                      "mixture_of_gaussians_2d --n 64 --seed 3 --out " + dir +
                      "/eval",
                  {dir + "/eval/samples.csv", dir + "/eval/eval_report.json"},
                  "eval");
  twice_identical("export --checkpoint " + dir + "/train/final.ckpt --out " +
                      dir + "/export.json",
                  {dir + "/export.json"}, "export");

  report(8, ok, "byte-identical outputs across reruns of every subcommand" +
                    what.str(),
         seconds_since(t0));
  fs::remove_all(dir);
}

}  // namespace

int main() {
  std::printf("advae acceptance suite (%s)\n", kVersion);
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
