// qns command-line front end.
//
//   qns simulate     --config cfg.json --out dir [--seed S] [--workers W]
//   qns analyze      --records dir [--config cfg.json] --out dir ...
//   qns oracle-check --config cfg.json --out dir ...
//   qns plotdata     --spectrum spectrum.csv --out dir
//
// Exit codes: 0 ok, 1 usage/config error, 2 fit failure, 3 oracle-check
// tolerance failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qns/correlations.hpp"
#include "qns/io.hpp"
#include "qns/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

qns::ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw qns::ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw qns::ConfigError(std::string("config parse error: ") + e.what());
  }
  return qns::config_from_json(j);
}

void apply_overrides(qns::ExperimentConfig& cfg, const CLI::Option* seed_opt,
                     std::uint64_t seed, const CLI::Option* workers_opt,
                     int workers) {
  if (seed_opt->count() > 0)
    cfg.seed = seed;
  if (workers_opt->count() > 0) {
    if (workers < 1)
      throw qns::ConfigError("--workers must be >= 1");
    cfg.workers = workers;
  }
}

int cmd_simulate(const qns::ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<std::string> files(std::size_t(cfg.trajectories));
  std::mutex m;
  qns::for_each_record(cfg, [&](long i, qns::MeasurementRecord&& rec) {
    char name[64];
    std::snprintf(name, sizeof(name), "record_%06ld.csv", i);
    qns::write_record_csv(out_dir / name, rec);
    std::lock_guard<std::mutex> lock(m);
    files[std::size_t(i)] = name;
  });
  qns::write_run_metadata(out_dir / "metadata.json", cfg, files);
  std::cout << "wrote " << cfg.trajectories << " record(s) to " << out_dir
            << "\n";
  return 0;
}

int cmd_analyze(const fs::path& records_dir, const fs::path& out_dir,
                const qns::ExperimentConfig* cfg_override) {
  qns::ExperimentConfig cfg =
      cfg_override ? *cfg_override
                   : qns::read_run_metadata(records_dir / "metadata.json");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(records_dir))
    if (entry.path().extension() == ".csv")
      files.push_back(entry.path());
  if (files.empty())
    throw qns::IoError("no record CSV files in " + records_dir.string());
  std::sort(files.begin(), files.end());

  qns::MomentEstimator est(cfg.analysis.max_p, cfg.analysis.max_q,
                           cfg.shot.t_c, cfg.analysis.cell_errors);
  for (const auto& f : files) {
    const qns::MeasurementRecord rec = qns::read_record_csv(f);
    if (cfg.analysis.from_photons) {
      if (!rec.photon_counts)
        throw qns::IoError(f.string() + ": photon analysis requested but "
                                        "record has no photon counts");
      est.add_record_photons(rec, *cfg.readout);
    } else {
      est.add_record(rec);
    }
  }

  const qns::AnalysisResult res = qns::analyze(est, cfg);
  fs::create_directories(out_dir);
  qns::write_moments_csv(out_dir / "moments.csv", res.table);
  qns::write_spectrum_csv(out_dir / "spectrum.csv", res.grid);

  json peaks = qns::peak_report_to_json(res.peaks);
  peaks["pattern"] = res.pattern.pattern;
  peaks["present"] = res.pattern.present;
  peaks["config_hash"] = qns::config_hash(cfg);
  peaks["seed"] = cfg.seed;
  std::ofstream(out_dir / "peaks.json") << peaks.dump(2) << '\n';

  json fitj = qns::fit_result_to_json(res.fit);
  fitj["converged"] = res.fit_ok;
  if (!res.fit_ok)
    fitj["error"] = res.fit_error;
  fitj["config_hash"] = qns::config_hash(cfg);
  fitj["seed"] = cfg.seed;
  std::ofstream(out_dir / "fit.json") << fitj.dump(2) << '\n';

  json meta = {{"config", qns::config_to_json(cfg)},
               {"config_hash", qns::config_hash(cfg)},
               {"seed", cfg.seed},
               {"records_analyzed", files.size()},
               {"total_shots", est.total_shots()}};
  std::ofstream(out_dir / "analyze_meta.json") << meta.dump(2) << '\n';

  std::cout << "pattern: " << res.pattern.pattern << "\n"
            << "eta: " << res.peaks.eta << " +- " << res.peaks.eta_err
            << "  n_inferred: "
            << (res.peaks.n_inferred ? std::to_string(*res.peaks.n_inferred)
                                     : std::string("indeterminate"))
            << "\n";
  if (res.fit_ok)
    std::cout << "fit: r = " << res.fit.r << " +- " << res.fit.r_std
              << ", nu0 = " << res.fit.nu0_fit
              << " rad/s, gamma = " << res.fit.gamma_fit << " /s\n";
  else
    std::cout << "fit failed: " << res.fit_error << "\n";
  return res.fit_ok ? 0 : 2;
}

int cmd_oracle_check(const qns::ExperimentConfig& cfg_in,
                     const fs::path& out_dir) {
  qns::ExperimentConfig cfg = cfg_in;
  if (cfg.target.kind != qns::TargetKind::quantum_spins)
    throw qns::ConfigError("oracle-check: target must be quantum_spins");
  if (cfg.shot.n_shots > 4)
    throw qns::ConfigError("oracle-check: shot.n_shots must be <= 4");
  if (cfg.target.n_spins > 2)
    throw qns::ConfigError("oracle-check: target.n_spins must be <= 2");

  const qns::ExactMoments exact =
      qns::enumerate_exact_moments(cfg.target, cfg.shot);
  const long n = cfg.shot.n_shots;

  // Monte Carlo over independent short trajectories
  struct Acc {
    std::vector<double> s1, s2, s3;
    long count = 0;
  };
  const long nmc = cfg.trajectories;
  std::vector<double> sum1(n, 0.0);
  std::vector<double> sum2(n * n, 0.0);
  double sum3 = 0.0;
  std::vector<std::vector<std::int8_t>> seqs(static_cast<std::size_t>(nmc));
  {
    std::mutex m;
    qns::for_each_record(cfg, [&](long i, qns::MeasurementRecord&& rec) {
      std::lock_guard<std::mutex> lock(m);
      seqs[std::size_t(i)] = rec.outcomes;
    });
  }
  std::vector<double> mean(n, 0.0);
  for (const auto& s : seqs)
    for (long j = 0; j < n; ++j)
      mean[j] += s[j];
  for (long j = 0; j < n; ++j)
    mean[j] /= double(nmc);
  std::vector<double> var2(n * n, 0.0);
  double var3 = 0.0;
  for (const auto& s : seqs) {
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        const double v = (s[i] - mean[i]) * (s[j] - mean[j]);
        sum2[i * n + j] += v;
        var2[i * n + j] += v * v;
      }
    if (n >= 3) {
      const double v =
          (s[0] - mean[0]) * (s[1] - mean[1]) * (s[2] - mean[2]);
      sum3 += v;
      var3 += v * v;
    }
  }

  json rows = json::array();
  bool pass = true;
  auto add_row = [&](const std::string& name, double got, double want,
                     double tol, const std::string& kind) {
    const bool ok = std::abs(got - want) <= tol;
    pass = pass && ok;
    rows.push_back({{"moment", name},
                    {"value", got},
                    {"reference", want},
                    {"tolerance", tol},
                    {"kind", kind},
                    {"pass", ok}});
  };

  for (long j = 0; j < n; ++j) {
    const double se = std::sqrt(
        (1.0 - mean[j] * mean[j]) / double(nmc)); // binomial std error
    add_row("S_" + std::to_string(j + 1), mean[j], exact.mean[j], 3.0 * se,
            "mc_vs_exact");
  }
  for (long i = 0; i < n; ++i)
    for (long j = i + 1; j < n; ++j) {
      const double m2 = sum2[i * n + j] / double(nmc);
      const double v2 = var2[i * n + j] / double(nmc) - m2 * m2;
      const double se = std::sqrt(v2 / double(nmc));
      add_row("S_" + std::to_string(i + 1) + std::to_string(j + 1), m2,
              exact.second[i][j], 3.0 * se, "mc_vs_exact");
    }
  if (n >= 3) {
    const double m3 = sum3 / double(nmc);
    const double v3 = var3 / double(nmc) - m3 * m3;
    add_row("S_123", m3, exact.third[0][1][2],
            3.0 * std::sqrt(v3 / double(nmc)), "mc_vs_exact");

    // perturbative check at the configured coupling
    const auto pred = qns::moment_predict(cfg.target, cfg.shot, {0, 1, 2});
    const double rel =
        std::abs(pred.value - exact.third[0][1][2]) /
        std::max(1e-300, std::abs(exact.third[0][1][2]));
    const bool ok = rel <= 0.05;
    pass = pass && ok;
    rows.push_back({{"moment", "S_123_perturbative"},
                    {"value", pred.value},
                    {"reference", exact.third[0][1][2]},
                    {"relative_deviation", rel},
                    {"tolerance", 0.05},
                    {"kind", "perturbative_vs_exact"},
                    {"pass", ok}});
  }

  json rep = {{"pass", pass},
              {"branch_probability_sum", exact.prob_sum},
              {"rows", rows},
              {"config_hash", qns::config_hash(cfg)},
              {"seed", cfg.seed}};
  fs::create_directories(out_dir);
  std::ofstream(out_dir / "report.json") << rep.dump(2) << '\n';
  std::cout << (pass ? "oracle-check: PASS" : "oracle-check: FAIL") << "\n";
  return pass ? 0 : 3;
}

int cmd_plotdata(const fs::path& spectrum_csv, const fs::path& out_dir) {
  const qns::SpectrumFile f = qns::read_spectrum_csv(spectrum_csv);
  fs::create_directories(out_dir);
  {
    std::ofstream out(out_dir / "spectrum_grid.tsv");
    out << "nu_ij\\nu_jk";
    for (int k2 = 0; k2 < f.n2; ++k2)
      out << '\t' << f.nu2[std::size_t(k2)];
    out << '\n';
    for (int k1 = 0; k1 < f.n1; ++k1) {
      out << f.nu1[std::size_t(k1)];
      for (int k2 = 0; k2 < f.n2; ++k2)
        out << '\t' << f.mag[std::size_t(k1) * f.n2 + k2];
      out << '\n';
    }
  }
  // diagonal and anti-diagonal slices through the grid
  {
    std::ofstream out(out_dir / "slices.tsv");
    out << "nu\tdiagonal_mag\tantidiagonal_mag\n";
    const int n = std::min(f.n1, f.n2);
    for (int k = 0; k < n; ++k) {
      const int ka = (f.n2 - k) % f.n2;
      out << f.nu1[std::size_t(k)] << '\t'
          << f.mag[std::size_t(k) * f.n2 + k] << '\t'
          << f.mag[std::size_t(k) * f.n2 + ka] << '\n';
    }
  }
  std::cout << "wrote plot data to " << out_dir << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential weak-measurement simulator and higher-order "
               "moment spectroscopy"};
  app.require_subcommand(1);

  std::string config_path, records_dir, out_dir = "out", spectrum_path;
  std::uint64_t seed = 0;
  int workers = 0;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* c = sub->add_option("--config", config_path, "config JSON file");
    if (needs_config)
      c->required();
    sub->add_option("--out", out_dir, "output directory");
    auto* s = sub->add_option("--seed", seed, "override config seed");
    auto* w = sub->add_option("--workers", workers, "override config workers");
    return std::pair{s, w};
  };

  auto* sim = app.add_subcommand("simulate", "generate measurement records");
  auto [sim_seed, sim_workers] = add_common(sim, true);

  auto* ana = app.add_subcommand("analyze", "moments, spectrum, peaks, fit");
  ana->add_option("--records", records_dir, "directory of record CSVs")
      ->required();
  auto [ana_seed, ana_workers] = add_common(ana, false);

  auto* orc = app.add_subcommand("oracle-check",
                                 "exact enumeration vs Monte Carlo and "
                                 "perturbative moments");
  auto [orc_seed, orc_workers] = add_common(orc, true);

  auto* plt = app.add_subcommand("plotdata", "gridded text export");
  plt->add_option("--spectrum", spectrum_path, "spectrum.csv from analyze")
      ->required();
  plt->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      qns::ExperimentConfig cfg = load_config(config_path);
      apply_overrides(cfg, sim_seed, seed, sim_workers, workers);
      return cmd_simulate(cfg, out_dir);
    }
    if (ana->parsed()) {
      std::optional<qns::ExperimentConfig> cfg;
      if (!config_path.empty()) {
        cfg = load_config(config_path);
        apply_overrides(*cfg, ana_seed, seed, ana_workers, workers);
      }
      return cmd_analyze(records_dir, out_dir, cfg ? &*cfg : nullptr);
    }
    if (orc->parsed()) {
      qns::ExperimentConfig cfg = load_config(config_path);
      apply_overrides(cfg, orc_seed, seed, orc_workers, workers);
      return cmd_oracle_check(cfg, out_dir);
    }
    if (plt->parsed())
      return cmd_plotdata(spectrum_path, out_dir);
  } catch (const qns::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const qns::FitError& e) {
    std::cerr << "fit failure: " << e.what() << "\n";
    return 2;
  } catch (const qns::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
