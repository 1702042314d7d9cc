#pragma once

// Experiment configuration, JSON reports, and the sweep drivers backing the
// CLI subcommands (method comparison, lambda sweep, K sweep, runtime scaling).

#include <cstdlib>
#include <functional>
#include <mutex>
#include <thread>

#include <json.hpp>

#include "faircca/io.hpp"
#include "faircca/optim.hpp"
#include "faircca/synth.hpp"

namespace faircca {

using nlohmann::json;

struct InputSpec {
  enum class Kind { synth, csv } kind = Kind::synth;
  SynthSpec synth = default_synth_spec();
  std::filesystem::path csv_x;
  std::filesystem::path csv_y;
};

struct ExperimentConfig {
  InputSpec input;
  std::vector<Method> methods{Method::cca, Method::mf_cca, Method::sf_cca};
  Index r = 2;
  double ridge = 0.0;
  PenaltyKind penalty = PenaltyKind::absolute;
  double stop_tol = 1e-4;
  int t_max = 1000;
  double eta0_mf = 0.4;    // synthetic-profile defaults
  double eta0_sf = 2e-2;
  double lambda = 10.0;
  std::uint64_t seed = 0;
  std::vector<double> lambda_grid{1e-2, 1e-1, 0.5, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::vector<int> k_grid{2, 3, 4, 5, 6};
  std::vector<Index> feature_grid{50, 100, 200, 300, 400};
  std::vector<Index> sample_grid{600, 1000, 1500, 2000};
  int repetitions = 1;
  std::filesystem::path out_dir = "out";
  int jobs = 0;  // 0 -> FAIRCCA_JOBS or 1

  void validate() const {
    if (methods.empty()) throw ConfigError("config: at least one method required");
    for (double l : lambda_grid)
      if (l < 0) throw ConfigError("config: lambda grid values must be >= 0");
    if (repetitions < 1) throw ConfigError("config: repetitions must be >= 1");
  }

  OptimizerConfig optimizer(Method m) const {
    OptimizerConfig cfg;
    cfg.method = m;
    cfg.r = r;
    cfg.ridge = ridge;
    cfg.penalty = penalty;
    cfg.stop_tol = stop_tol;
    cfg.t_max = t_max;
    cfg.eta0 = m == Method::sf_cca ? eta0_sf : eta0_mf;
    cfg.lambda = lambda;
    cfg.seed = seed;
    return cfg;
  }

  int resolved_jobs() const {
    if (jobs > 0) return jobs;
    if (const char* env = std::getenv("FAIRCCA_JOBS")) {
      const int j = std::atoi(env);
      if (j > 0) return j;
    }
    return 1;
  }
};

// ---- JSON bindings ----

inline json to_json(const SynthSpec& s) {
  json j;
  j["dx"] = s.dx;
  j["dy"] = s.dy;
  j["r"] = s.r;
  j["sigma_group"] = s.sigma_group;
  j["tau_x"] = s.tau_x;
  j["tau_y"] = s.tau_y;
  j["seed"] = s.seed;
  j["group_sizes"] = s.group_sizes;
  j["group_rho"] = json::array();
  for (const auto& rho : s.group_rho)
    j["group_rho"].push_back(std::vector<double>(rho.data(), rho.data() + rho.size()));
  return j;
}

inline SynthSpec synth_from_json(const json& j) {
  SynthSpec s = default_synth_spec();
  if (j.contains("dx")) s.dx = j["dx"].get<Index>();
  if (j.contains("dy")) s.dy = j["dy"].get<Index>();
  if (j.contains("r")) s.r = j["r"].get<Index>();
  if (j.contains("sigma_group")) s.sigma_group = j["sigma_group"].get<double>();
  if (j.contains("tau_x")) s.tau_x = j["tau_x"].get<double>();
  if (j.contains("tau_y")) s.tau_y = j["tau_y"].get<double>();
  if (j.contains("seed")) s.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("group_sizes")) s.group_sizes = j["group_sizes"].get<std::vector<Index>>();
  if (j.contains("group_rho")) {
    s.group_rho.clear();
    for (const auto& row : j["group_rho"]) {
      auto vals = row.get<std::vector<double>>();
      s.group_rho.push_back(Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size())));
    }
  }
  return s;
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["schema_version"] = 1;
  if (c.input.kind == InputSpec::Kind::synth) {
    j["input"] = {{"kind", "synth"}, {"synth", to_json(c.input.synth)}};
  } else {
    j["input"] = {{"kind", "csv"}, {"x", c.input.csv_x.string()}, {"y", c.input.csv_y.string()}};
  }
  j["methods"] = json::array();
  for (Method m : c.methods) j["methods"].push_back(to_string(m));
  j["r"] = c.r;
  j["ridge"] = c.ridge;
  j["penalty"] = to_string(c.penalty);
  j["stop_tol"] = c.stop_tol;
  j["t_max"] = c.t_max;
  j["eta0_mf"] = c.eta0_mf;
  j["eta0_sf"] = c.eta0_sf;
  j["lambda"] = c.lambda;
  j["seed"] = c.seed;
  j["lambda_grid"] = c.lambda_grid;
  j["k_grid"] = c.k_grid;
  j["feature_grid"] = c.feature_grid;
  j["sample_grid"] = c.sample_grid;
  j["repetitions"] = c.repetitions;
  j["out_dir"] = c.out_dir.string();
  j["jobs"] = c.jobs;
  return j;
}

inline ExperimentConfig config_from_json(const json& jin) {
  // a report embeds its config under "config"; accept both layouts
  const json& j = jin.contains("config") ? jin["config"] : jin;
  ExperimentConfig c;
  if (j.contains("input")) {
    const auto& in = j["input"];
    const std::string kind = in.value("kind", "synth");
    if (kind == "synth") {
      c.input.kind = InputSpec::Kind::synth;
      if (in.contains("synth")) c.input.synth = synth_from_json(in["synth"]);
    } else if (kind == "csv") {
      c.input.kind = InputSpec::Kind::csv;
      c.input.csv_x = in.value("x", "");
      c.input.csv_y = in.value("y", "");
    } else {
      throw ConfigError("config: unknown input kind '" + kind + "'");
    }
  }
  if (j.contains("methods")) {
    c.methods.clear();
    for (const auto& m : j["methods"]) c.methods.push_back(method_from_string(m.get<std::string>()));
  }
  if (j.contains("r")) c.r = j["r"].get<Index>();
  if (j.contains("ridge")) c.ridge = j["ridge"].get<double>();
  if (j.contains("penalty")) c.penalty = penalty_from_string(j["penalty"].get<std::string>());
  if (j.contains("stop_tol")) c.stop_tol = j["stop_tol"].get<double>();
  if (j.contains("t_max")) c.t_max = j["t_max"].get<int>();
  if (j.contains("eta0_mf")) c.eta0_mf = j["eta0_mf"].get<double>();
  if (j.contains("eta0_sf")) c.eta0_sf = j["eta0_sf"].get<double>();
  if (j.contains("lambda")) c.lambda = j["lambda"].get<double>();
  if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("lambda_grid")) c.lambda_grid = j["lambda_grid"].get<std::vector<double>>();
  if (j.contains("k_grid")) c.k_grid = j["k_grid"].get<std::vector<int>>();
  if (j.contains("feature_grid")) c.feature_grid = j["feature_grid"].get<std::vector<Index>>();
  if (j.contains("sample_grid")) c.sample_grid = j["sample_grid"].get<std::vector<Index>>();
  if (j.contains("repetitions")) c.repetitions = j["repetitions"].get<int>();
  if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("jobs")) c.jobs = j["jobs"].get<int>();
  c.validate();
  return c;
}

struct RunRecord {
  Method method = Method::cca;
  std::uint64_t seed = 0;
  double eta0 = 0;
  double lambda = 0;
  Index r = 0;
  PenaltyKind penalty = PenaltyKind::absolute;
  double ridge = 0;
  double seconds = 0;
  int iterations = 0;
  bool converged = false;
  double feasibility_max = 0;
  FairnessReport report;
  std::string error;  // non-empty when the fit failed
};

inline json to_json(const RunRecord& rec) {
  json j;
  j["method"] = to_string(rec.method);
  j["seed"] = rec.seed;
  j["eta0"] = rec.eta0;
  j["lambda"] = rec.lambda;
  j["r"] = rec.r;
  j["penalty"] = to_string(rec.penalty);
  j["ridge"] = rec.ridge;
  j["seconds"] = rec.seconds;
  j["iterations"] = rec.iterations;
  j["converged"] = rec.converged;
  j["feasibility_max"] = rec.feasibility_max;
  if (!rec.error.empty()) {
    j["error"] = rec.error;
    return j;
  }
  auto vec = [](const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  j["metrics"] = {{"rho", vec(rec.report.component.rho)},
                  {"delta_max", vec(rec.report.component.delta_max)},
                  {"delta_sum", vec(rec.report.component.delta_sum)},
                  {"matrix_rho", rec.report.matrix.rho},
                  {"matrix_delta_max", rec.report.matrix.delta_max},
                  {"matrix_delta_sum", rec.report.matrix.delta_sum},
                  {"group_errors", rec.report.matrix.group_errors}};
  return j;
}

inline RunRecord record_from_json(const json& j) {
  RunRecord rec;
  rec.method = method_from_string(j["method"].get<std::string>());
  rec.seed = j["seed"].get<std::uint64_t>();
  rec.eta0 = j["eta0"].get<double>();
  rec.lambda = j["lambda"].get<double>();
  rec.r = j["r"].get<Index>();
  rec.penalty = penalty_from_string(j["penalty"].get<std::string>());
  rec.ridge = j["ridge"].get<double>();
  rec.seconds = j["seconds"].get<double>();
  rec.iterations = j["iterations"].get<int>();
  rec.converged = j["converged"].get<bool>();
  rec.feasibility_max = j["feasibility_max"].get<double>();
  if (j.contains("error")) {
    rec.error = j["error"].get<std::string>();
    return rec;
  }
  auto vec = [](const json& a) {
    auto vals = a.get<std::vector<double>>();
    return Vector(Eigen::Map<const Vector>(vals.data(), static_cast<Index>(vals.size())));
  };
  const auto& m = j["metrics"];
  rec.report.component.rho = vec(m["rho"]);
  rec.report.component.delta_max = vec(m["delta_max"]);
  rec.report.component.delta_sum = vec(m["delta_sum"]);
  rec.report.matrix.rho = m["matrix_rho"].get<double>();
  rec.report.matrix.delta_max = m["matrix_delta_max"].get<double>();
  rec.report.matrix.delta_sum = m["matrix_delta_sum"].get<double>();
  rec.report.matrix.group_errors = m["group_errors"].get<std::vector<double>>();
  return rec;
}

// ---- experiment drivers ----

inline GroupedDataset load_input(const ExperimentConfig& cfg) {
  if (cfg.input.kind == InputSpec::Kind::csv) return load_csv(cfg.input.csv_x, cfg.input.csv_y);
  return make_synthetic_grouped(cfg.input.synth);
}

namespace detail {

inline double max_feasibility(const FairCcaResult& res) {
  double m = std::max(feasibility_residual(res.u, *res.gram_x),
                      feasibility_residual(res.v, *res.gram_y));
  for (const auto& rec : res.trace) m = std::max({m, rec.feas_u, rec.feas_v});
  return m;
}

inline RunRecord run_method(const GroupedDataset& ds, const ExperimentConfig& cfg, Method m) {
  const OptimizerConfig opt = cfg.optimizer(m);
  RunRecord rec;
  rec.method = m;
  rec.seed = opt.seed;
  rec.eta0 = opt.eta0;
  rec.lambda = m == Method::sf_cca ? opt.lambda : 0.0;
  rec.r = opt.r;
  rec.penalty = opt.penalty;
  rec.ridge = opt.ridge;
  try {
    FairCcaResult res = fit(ds, opt);
    rec.seconds = res.fit_seconds;
    rec.iterations = res.iterations;
    rec.converged = res.converged;
    rec.feasibility_max = max_feasibility(res);
    rec.report = evaluate_fairness(res.u, res.v, ds, res.group_optima);
  } catch (const std::exception& e) {
    rec.error = std::string(to_string(m)) + ": " + e.what();
  }
  return rec;
}

// run independent cells, at most `jobs` at a time; results keep cell order
inline void run_cells(std::vector<std::function<void()>> cells, int jobs) {
  if (jobs <= 1) {
    for (auto& c : cells) c();
    return;
  }
  std::mutex mtx;
  size_t next = 0;
  auto worker = [&] {
    for (;;) {
      size_t i;
      {
        std::lock_guard<std::mutex> lock(mtx);
        if (next >= cells.size()) return;
        i = next++;
      }
      cells[i]();
    }
  };
  std::vector<std::thread> pool;
  for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

}  // namespace detail

struct CompareResult {
  std::vector<RunRecord> records;  // one per requested method
  CsvTable table;                  // per-dimension metric table
  json report;                     // records + percentage changes + config
};

inline CompareResult run_compare(const ExperimentConfig& cfg) {
  cfg.validate();
  GroupedDataset ds = load_input(cfg);

  CompareResult out;
  for (Method m : cfg.methods) out.records.push_back(detail::run_method(ds, cfg, m));

  const RunRecord* baseline = nullptr;
  for (const auto& rec : out.records)
    if (rec.method == Method::cca && rec.error.empty()) baseline = &rec;

  std::vector<std::string> header{"r"};
  for (const auto& rec : out.records) {
    const std::string m = to_string(rec.method);
    header.push_back(m + "_rho");
    header.push_back(m + "_delta_max");
    header.push_back(m + "_delta_sum");
  }
  out.table.push_back(std::move(header));
  for (Index r = 0; r < cfg.r; ++r) {
    std::vector<std::string> row{std::to_string(r + 1)};
    for (const auto& rec : out.records) {
      if (!rec.error.empty()) {
        row.insert(row.end(), {"", "", ""});
        continue;
      }
      row.push_back(format_double(rec.report.component.rho[r]));
      row.push_back(format_double(rec.report.component.delta_max[r]));
      row.push_back(format_double(rec.report.component.delta_sum[r]));
    }
    out.table.push_back(std::move(row));
  }

  out.report["schema_version"] = 1;
  out.report["config"] = to_json(cfg);
  out.report["runs"] = json::array();
  for (const auto& rec : out.records) out.report["runs"].push_back(to_json(rec));
  if (baseline) {
    json pc = json::object();
    for (const auto& rec : out.records) {
      if (rec.method == Method::cca || !rec.error.empty()) continue;
      PercentageChange p = percentage_change(baseline->report.component, rec.report.component);
      auto opt_vec = [](const std::vector<std::optional<double>>& v) {
        json a = json::array();
        for (const auto& x : v) {
          if (x)
            a.push_back(*x);
          else
            a.push_back(nullptr);
        }
        return a;
      };
      pc[to_string(rec.method)] = {{"rho", opt_vec(p.rho)},
                                   {"delta_max", opt_vec(p.delta_max)},
                                   {"delta_sum", opt_vec(p.delta_sum)}};
    }
    out.report["percentage_change_vs_cca"] = pc;
  }
  return out;
}

inline CsvTable run_lambda_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  GroupedDataset ds = load_input(cfg);
  CsvTable table;
  table.push_back({"lambda", "rho_1", "delta_sum_1", "iterations", "seconds"});
  std::vector<std::vector<std::string>> rows(cfg.lambda_grid.size());

  std::vector<std::function<void()>> cells;
  for (size_t i = 0; i < cfg.lambda_grid.size(); ++i) {
    cells.push_back([&, i] {
      ExperimentConfig cell = cfg;
      cell.lambda = cfg.lambda_grid[i];
      RunRecord rec = detail::run_method(ds, cell, Method::sf_cca);
      if (!rec.error.empty()) {
        rows[i] = {format_double(cfg.lambda_grid[i]), "", "", "", ""};
        return;
      }
      rows[i] = {format_double(cfg.lambda_grid[i]), format_double(rec.report.component.rho[0]),
                 format_double(rec.report.component.delta_sum[0]), std::to_string(rec.iterations),
                 format_double(rec.seconds)};
    });
  }
  detail::run_cells(std::move(cells), cfg.resolved_jobs());
  for (auto& row : rows) table.push_back(std::move(row));
  return table;
}

inline CsvTable run_k_sweep(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.input.kind != InputSpec::Kind::synth)
    throw ConfigError("k sweep requires synthetic input");
  CsvTable table;
  std::vector<std::string> header{"k"};
  for (Method m : cfg.methods) header.push_back(std::string(to_string(m)) + "_delta_sum_1");
  table.push_back(std::move(header));

  std::vector<std::vector<std::string>> rows(cfg.k_grid.size());
  std::vector<std::function<void()>> cells;
  for (size_t i = 0; i < cfg.k_grid.size(); ++i) {
    cells.push_back([&, i] {
      const int k = cfg.k_grid[i];
      SynthSpec spec = cfg.input.synth;
      const Index per_group = spec.group_sizes.empty() ? 400 : spec.group_sizes[0];
      spec.group_sizes.assign(static_cast<size_t>(k), per_group);
      spec.group_rho.clear();
      for (int g = 0; g < k; ++g) {
        Vector rho(spec.r);
        const double lead = k == 1 ? 0.7 : 0.5 + 0.4 * g / (k - 1);
        for (Index j = 0; j < spec.r; ++j) rho[j] = lead * std::pow(0.8, static_cast<double>(j));
        spec.group_rho.push_back(rho);
      }
      spec.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(i));
      ExperimentConfig cell = cfg;
      cell.input.synth = spec;
      GroupedDataset ds = make_synthetic_grouped(spec);
      rows[i] = {std::to_string(k)};
      for (Method m : cfg.methods) {
        RunRecord rec = detail::run_method(ds, cell, m);
        rows[i].push_back(rec.error.empty() ? format_double(rec.report.component.delta_sum[0]) : "");
      }
    });
  }
  detail::run_cells(std::move(cells), cfg.resolved_jobs());
  for (auto& row : rows) table.push_back(std::move(row));
  return table;
}

// runtime scaling: features varied at fixed N, or samples varied at fixed d
inline CsvTable run_scaling(const ExperimentConfig& cfg, bool vary_features) {
  cfg.validate();
  CsvTable table;
  table.push_back({vary_features ? "features" : "samples", "mf_mean_s", "mf_std_s", "sf_mean_s",
                   "sf_std_s"});
  const auto& grid = vary_features ? cfg.feature_grid : cfg.sample_grid;
  std::vector<std::vector<std::string>> rows(grid.size());

  std::vector<std::function<void()>> cells;
  for (size_t i = 0; i < grid.size(); ++i) {
    cells.push_back([&, i] {
      SynthSpec spec = cfg.input.synth;
      const int k = static_cast<int>(spec.group_sizes.size());
      if (vary_features) {
        spec.dx = spec.dy = grid[i];
      } else {
        const Index per_group = std::max<Index>(spec.r, grid[i] / k);
        spec.group_sizes.assign(static_cast<size_t>(k), per_group);
      }
      std::vector<double> mf_times, sf_times;
      for (int rep = 0; rep < cfg.repetitions; ++rep) {
        spec.seed = mix_seed(cfg.seed, 7000 + i * 100 + static_cast<std::uint64_t>(rep));
        ExperimentConfig cell = cfg;
        cell.input.synth = spec;
        cell.seed = spec.seed;
        GroupedDataset ds = make_synthetic_grouped(spec);
        mf_times.push_back(detail::run_method(ds, cell, Method::mf_cca).seconds);
        sf_times.push_back(detail::run_method(ds, cell, Method::sf_cca).seconds);
      }
      auto mean_std = [](const std::vector<double>& v) {
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        double var = 0;
        for (double x : v) var += (x - mean) * (x - mean);
        var = v.size() > 1 ? var / static_cast<double>(v.size() - 1) : 0.0;
        return std::make_pair(mean, std::sqrt(var));
      };
      auto [mf_mean, mf_std] = mean_std(mf_times);
      auto [sf_mean, sf_std] = mean_std(sf_times);
      rows[i] = {std::to_string(grid[i]), format_double(mf_mean), format_double(mf_std),
                 format_double(sf_mean), format_double(sf_std)};
    });
  }
  detail::run_cells(std::move(cells), cfg.resolved_jobs());
  for (auto& row : rows) table.push_back(std::move(row));
  return table;
}

}  // namespace faircca
