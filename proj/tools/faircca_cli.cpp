// Command-line front end: dataset generation, fitting, method comparison,
// and the sweep experiments. Emits CSV tables and JSON reports.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "faircca/faircca.hpp"

namespace {

using namespace faircca;

struct CommonFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::string x_path, y_path;
  std::string method;
  std::string penalty;
  std::uint64_t seed = 0;
  bool seed_set = false;
  double lambda = -1;
  double eta0 = -1;
  long long r = -1;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config (or an emitted report) to start from");
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--x", f.x_path, "X-view CSV (group column + features)");
  cmd->add_option("--y", f.y_path, "Y-view CSV (features)");
  cmd->add_option("--seed", f.seed, "master RNG seed")->each([&](const std::string&) { f.seed_set = true; });
  cmd->add_option("--method", f.method, "cca | mf_cca | sf_cca");
  cmd->add_option("--lambda", f.lambda, "SF-CCA tradeoff parameter");
  cmd->add_option("--eta0", f.eta0, "initial step size");
  cmd->add_option("--r", f.r, "subspace dimension");
  cmd->add_option("--penalty", f.penalty, "abs | square | exp");
  cmd->add_option("--jobs", f.jobs, "max parallel sweep cells (default $FAIRCCA_JOBS or 1)");
}

ExperimentConfig resolve_config(const CommonFlags& f) {
  ExperimentConfig cfg;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw ConfigError("cannot open config " + f.config_path);
    json j;
    in >> j;
    cfg = config_from_json(j);
  }
  if (!f.x_path.empty() || !f.y_path.empty()) {
    if (f.x_path.empty() || f.y_path.empty())
      throw ConfigError("csv input needs both --x and --y");
    cfg.input.kind = InputSpec::Kind::csv;
    cfg.input.csv_x = f.x_path;
    cfg.input.csv_y = f.y_path;
  }
  if (f.seed_set) {
    cfg.seed = f.seed;
    cfg.input.synth.seed = f.seed;
  }
  if (!f.method.empty()) cfg.methods = {method_from_string(f.method)};
  if (f.lambda >= 0) cfg.lambda = f.lambda;
  if (f.eta0 > 0) cfg.eta0_mf = cfg.eta0_sf = f.eta0;
  if (f.r > 0) cfg.r = cfg.input.synth.r = static_cast<Index>(f.r);
  if (!f.penalty.empty()) cfg.penalty = penalty_from_string(f.penalty);
  if (f.jobs > 0) cfg.jobs = f.jobs;
  cfg.out_dir = f.out_dir;
  return cfg;
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::filesystem::path ensure_out(const ExperimentConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  return cfg.out_dir;
}

int cmd_synth(const CommonFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags);
  auto out = ensure_out(cfg);
  GroupedDataset ds = make_synthetic_grouped(cfg.input.synth);
  save_dataset_csv(ds, out / "synth_x.csv", out / "synth_y.csv");
  write_json(out / "synth_spec.json", to_json(cfg.input.synth));
  std::cout << "wrote " << (out / "synth_x.csv").string() << " and synth_y.csv (N=" << ds.n()
            << ", K=" << ds.num_groups << ")\n";
  return 0;
}

int cmd_fit(const CommonFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags);
  if (cfg.methods.size() != 1)
    throw ConfigError("fit: pick exactly one method with --method");
  auto out = ensure_out(cfg);
  GroupedDataset ds = load_input(cfg);
  RunRecord rec = detail::run_method(ds, cfg, cfg.methods[0]);
  if (!rec.error.empty()) throw Error(rec.error);
  json report;
  report["schema_version"] = 1;
  report["config"] = to_json(cfg);
  report["runs"] = json::array({to_json(rec)});
  write_json(out / "fit_report.json", report);
  std::cout << to_string(rec.method) << ": rho_1=" << rec.report.component.rho[0]
            << " delta_sum_1=" << rec.report.component.delta_sum[0]
            << " iters=" << rec.iterations << " (" << rec.seconds << " s)\n";
  return 0;
}

int cmd_compare(const CommonFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags);
  auto out = ensure_out(cfg);
  CompareResult res = run_compare(cfg);
  write_csv(out / "compare_metrics.csv", res.table);
  write_json(out / "compare_report.json", res.report);
  for (const auto& rec : res.records) {
    if (!rec.error.empty()) {
      std::cout << to_string(rec.method) << ": FAILED (" << rec.error << ")\n";
      continue;
    }
    std::cout << to_string(rec.method) << ": rho_1=" << rec.report.component.rho[0]
              << " delta_sum_1=" << rec.report.component.delta_sum[0] << " iters="
              << rec.iterations << " (" << rec.seconds << " s)\n";
  }
  return 0;
}

int cmd_sweep_lambda(const CommonFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags);
  auto out = ensure_out(cfg);
  write_csv(out / "lambda_sweep.csv", run_lambda_sweep(cfg));
  std::cout << "wrote " << (out / "lambda_sweep.csv").string() << '\n';
  return 0;
}

int cmd_sweep_k(const CommonFlags& flags) {
  ExperimentConfig cfg = resolve_config(flags);
  auto out = ensure_out(cfg);
  write_csv(out / "k_sweep.csv", run_k_sweep(cfg));
  std::cout << "wrote " << (out / "k_sweep.csv").string() << '\n';
  return 0;
}

int cmd_sweep_scale(const CommonFlags& flags, bool vary_features) {
  ExperimentConfig cfg = resolve_config(flags);
  auto out = ensure_out(cfg);
  const char* name = vary_features ? "scaling_features.csv" : "scaling_samples.csv";
  write_csv(out / name, run_scaling(cfg, vary_features));
  std::cout << "wrote " << (out / name).string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fair canonical correlation analysis toolkit"};
  app.require_subcommand(1);

  CommonFlags flags;
  bool scale_samples = false;
  auto* synth = app.add_subcommand("synth", "generate a synthetic grouped dataset");
  auto* fit = app.add_subcommand("fit", "fit one method and report metrics");
  auto* compare = app.add_subcommand("compare", "fit CCA, MF-CCA, SF-CCA and compare");
  auto* sweep_lambda = app.add_subcommand("sweep-lambda", "SF-CCA sensitivity to lambda");
  auto* sweep_k = app.add_subcommand("sweep-k", "disparity vs number of groups");
  auto* sweep_scale = app.add_subcommand("sweep-scale", "runtime scaling of MF/SF-CCA");
  for (auto* cmd : {synth, fit, compare, sweep_lambda, sweep_k, sweep_scale})
    add_common(cmd, flags);
  sweep_scale->add_flag("--samples", scale_samples, "vary sample count instead of features");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) return cmd_synth(flags);
    if (fit->parsed()) return cmd_fit(flags);
    if (compare->parsed()) return cmd_compare(flags);
    if (sweep_lambda->parsed()) return cmd_sweep_lambda(flags);
    if (sweep_k->parsed()) return cmd_sweep_k(flags);
    if (sweep_scale->parsed()) return cmd_sweep_scale(flags, !scale_samples);
  } catch (const faircca::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const faircca::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
