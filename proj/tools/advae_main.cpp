// advae command-line interface: train | verify | grad-check | eval | export.
//
// Exit codes: 0 success, 1 verification/check failure, 2 usage or validation
// error, 3 numeric abort during training.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <advae/advae.hpp>

namespace {

using advae::json;

std::string default_out_dir(const std::string& flag_value, const std::string& fallback) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("ADVAE_OUT_DIR")) {
    if (*env) return std::string(env);
  }
  return fallback;
}

json provenance(std::uint64_t seed, const std::string& cfg_hash = "") {
  json j{{"version", advae::kVersion}, {"seed", seed}};
  if (!cfg_hash.empty()) j["config_hash"] = cfg_hash;
  return j;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw advae::IoError("cannot open '" + path + "' for writing");
  f << j.dump(2) << "\n";
  if (!f) throw advae::IoError("write failed for '" + path + "'");
}

struct TrainArgs {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string variant;
};

int cmd_train(const TrainArgs& args) {
  advae::TrainConfig cfg;
  if (!args.config_path.empty()) {
    std::ifstream f(args.config_path);
    if (!f) {
      throw advae::ConfigError("config file '" + args.config_path +
                               "' cannot be opened");
    }
    json j = json::parse(f, nullptr, true, true);
    cfg = advae::config_from_json(j);
  }
  if (args.seed) cfg.seed = *args.seed;
  if (!args.variant.empty()) cfg.variant = advae::variant_from_string(args.variant);
  cfg.out_dir = default_out_dir(args.out_dir, cfg.out_dir);
  cfg.validate();

  advae::RunResult result = advae::run(cfg);

  const std::string samples_path = cfg.out_dir + "/samples.csv";
  advae::Tensor samples =
      advae::sample_model(result.state.model, cfg.eval_samples, cfg.seed);
  advae::write_samples_csv(samples_path, samples, advae::to_string(cfg.dataset.id),
                           cfg.seed);
  advae::EvalReport report = advae::evaluate_model(
      result.state.model, cfg.dataset, cfg.eval_samples, cfg.seed, samples);
  report.sample_file = samples_path;
  json rj = advae::to_json(report);
  rj["provenance"] = provenance(cfg.seed, advae::config_hash(cfg));
  rj["final_step"] = result.state.step;
  write_json_file(cfg.out_dir + "/eval_report.json", rj);

  std::cout << "train: completed " << result.state.step << " steps, metrics at "
            << result.metrics_path << ", checkpoint at "
            << result.final_checkpoint_path << "\n";
  return 0;
}

int cmd_verify(const std::string& suite, std::size_t samples, std::uint64_t seed,
               const std::string& out_flag) {
  const std::string out_dir = default_out_dir(out_flag, "out");
  std::filesystem::create_directories(out_dir);
  std::vector<advae::VerificationReport> reports;
  if (suite == "maximizers" || suite == "all") {
    reports.push_back(advae::run_maximizer_suite(200, seed));
  }
  if (suite == "optimal-disc" || suite == "all") {
    reports.push_back(advae::run_optimal_disc_suite(seed, samples));
  }
  if (suite == "kl-recovery" || suite == "all") {
    reports.push_back(advae::run_kl_recovery_suite(seed, samples));
  }

  json suites = json::array();
  bool all_pass = true;
  std::size_t failures = 0;
  for (const auto& r : reports) {
    suites.push_back(advae::to_json(r));
    all_pass = all_pass && r.pass();
    failures += r.n_fail();
    std::cout << "verify: suite " << r.suite << " " << r.n_pass() << "/"
              << r.cases.size() << " pass\n";
  }
  json out{{"provenance", provenance(seed)},
           {"samples", samples},
           {"suites", suites},
           {"pass", all_pass}};
  write_json_file(out_dir + "/verify_report.json", out);
  if (!all_pass) {
    std::cerr << "verify: " << failures << " case(s) failed\n";
    return 1;
  }
  return 0;
}

int cmd_grad_check(const std::string& scope, std::uint64_t seed,
                   const std::string& out_flag) {
  const std::string out_dir = default_out_dir(out_flag, "out");
  std::filesystem::create_directories(out_dir);
  std::vector<advae::NamedGradCheck> checks = advae::grad_check_scope(scope, seed);
  json entries = json::array();
  bool all_pass = true;
  for (const auto& c : checks) {
    const advae::GradCheckEntry* worst = c.report.worst();
    json e{{"name", c.name},
           {"max_rel_err", c.report.max_rel_err},
           {"pass", c.report.pass}};
    if (worst) {
      e["worst_param"] = worst->param;
      e["worst_index"] = worst->worst_index;
      e["analytic"] = worst->analytic;
      e["numeric"] = worst->numeric;
    }
    entries.push_back(std::move(e));
    all_pass = all_pass && c.report.pass;
    std::cout << "grad-check: " << c.name << " max_rel_err="
              << c.report.max_rel_err << (c.report.pass ? " pass" : " FAIL");
    if (!c.report.pass && worst) {
      std::cout << " (worst: " << worst->param << "[" << worst->worst_index
                << "] analytic=" << worst->analytic
                << " numeric=" << worst->numeric << ")";
    }
    std::cout << "\n";
  }
  json out{{"provenance", provenance(seed)},
           {"scope", scope},
           {"checks", entries},
           {"pass", all_pass}};
  write_json_file(out_dir + "/grad_check_report.json", out);
  return all_pass ? 0 : 1;
}

int cmd_eval(const std::string& checkpoint, const std::string& dataset_id,
             std::size_t n, std::uint64_t seed, const std::string& out_flag) {
  const std::string out_dir = default_out_dir(out_flag, "out");
  std::filesystem::create_directories(out_dir);
  advae::ModelVariant model = advae::load_model_from_checkpoint(checkpoint);
  advae::Dataset dataset;
  dataset.id = advae::dataset_from_string(dataset_id);
  if (dataset.data_dim() != model.data_dim) {
    throw advae::ConfigError("eval: dataset dim " +
                             std::to_string(dataset.data_dim()) +
                             " does not match checkpoint data_dim " +
                             std::to_string(model.data_dim));
  }
  advae::Tensor samples = advae::sample_model(model, n, seed);
  const std::string samples_path = out_dir + "/samples.csv";
  advae::write_samples_csv(samples_path, samples, dataset_id, seed);
  advae::EvalReport report = advae::evaluate_model(model, dataset, n, seed, samples);
  report.sample_file = samples_path;
  json rj = advae::to_json(report);
  rj["provenance"] = provenance(seed);
  rj["checkpoint"] = checkpoint;
  write_json_file(out_dir + "/eval_report.json", rj);
  std::cout << "eval: mmd2=" << advae::fmt_g17(report.mmd2) << " (raw "
            << advae::fmt_g17(report.mmd2_raw) << "), report at " << out_dir
            << "/eval_report.json\n";
  return 0;
}

int cmd_export(const std::string& checkpoint, const std::string& out_path) {
  advae::CheckpointReader reader(checkpoint);
  json manifest = reader.manifest();
  json params = json::array();
  for (const auto& nj : manifest.at("networks")) {
    for (const auto& pj : nj.at("params")) {
      std::size_t count = 1;
      for (const auto& e : pj.at("shape")) count *= e.get<std::size_t>();
      params.push_back({{"network", nj.at("name")},
                        {"name", pj.at("name")},
                        {"shape", pj.at("shape")},
                        {"values", reader.read_array(count)}});
    }
  }
  json out{{"manifest", manifest}, {"parameters", params}};
  write_json_file(out_path, out);
  std::cout << "export: wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adversarial variational autoencoders: two minimax games in "
               "place of the two Gaussian assumptions"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "run a training loop");
  train->add_option("--config", train_args.config_path, "JSON config file");
  train->add_option("--out", train_args.out_dir, "output directory");
  std::uint64_t train_seed = 0;
  auto* seed_opt = train->add_option("--seed", train_seed, "RNG seed override");
  train->add_option("--variant", train_args.variant, "model variant")
      ->check(CLI::IsMember({"gaussian", "implicit-encoder", "implicit-decoder",
                             "full"}));

  std::string verify_suite = "all";
  std::size_t verify_samples = 1000000;
  std::uint64_t verify_seed = 42;
  std::string verify_out;
  auto* verify = app.add_subcommand("verify", "run closed-form identity checks");
  verify->add_option("--suite", verify_suite, "which suite")
      ->check(CLI::IsMember({"maximizers", "optimal-disc", "kl-recovery", "all"}));
  verify->add_option("--samples", verify_samples, "Monte-Carlo sample count");
  verify->add_option("--seed", verify_seed, "RNG seed");
  verify->add_option("--out", verify_out, "output directory");

  std::string gc_scope = "all";
  std::uint64_t gc_seed = 7;
  std::string gc_out;
  auto* gc = app.add_subcommand("grad-check", "finite-difference gradient checks");
  gc->add_option("--scope", gc_scope, "which checks")
      ->check(CLI::IsMember({"autodiff", "models", "games", "all"}));
  gc->add_option("--seed", gc_seed, "RNG seed");
  gc->add_option("--out", gc_out, "output directory");

  std::string eval_ckpt, eval_dataset, eval_out;
  std::size_t eval_n = 2000;
  std::uint64_t eval_seed = 1;
  auto* eval = app.add_subcommand("eval", "sample a checkpoint and score it");
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--dataset", eval_dataset, "dataset id")->required();
  eval->add_option("--n", eval_n, "number of samples");
  eval->add_option("--seed", eval_seed, "RNG seed");
  eval->add_option("--out", eval_out, "output directory");

  std::string export_ckpt, export_out = "checkpoint_export.json";
  auto* exp = app.add_subcommand("export", "dump a checkpoint as JSON");
  exp->add_option("--checkpoint", export_ckpt, "checkpoint file")->required();
  exp->add_option("--out", export_out, "output JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (*train) {
      if (seed_opt->count() > 0) train_args.seed = train_seed;
      return cmd_train(train_args);
    }
    if (*verify) return cmd_verify(verify_suite, verify_samples, verify_seed, verify_out);
    if (*gc) return cmd_grad_check(gc_scope, gc_seed, gc_out);
    if (*eval) return cmd_eval(eval_ckpt, eval_dataset, eval_n, eval_seed, eval_out);
    if (*exp) return cmd_export(export_ckpt, export_out);
  } catch (const advae::TrainAbort& e) {
    std::cerr << "numeric abort at step " << e.at_step() << ": " << e.what()
              << "\n";
    return 3;
  } catch (const advae::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const advae::ConfigError& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const advae::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 2;
  } catch (const advae::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
