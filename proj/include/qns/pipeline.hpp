// Orchestration: deterministic parallel trajectory simulation (one RNG
// stream per trajectory, reduction in fixed order so results are
// independent of worker count) and the full analysis chain
// moments -> spectrum -> peaks -> fit, with record-level bootstraps for
// eta_err and r_std.
#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "qns/config.hpp"
#include "qns/correlations.hpp"
#include "qns/fitting.hpp"
#include "qns/io.hpp"
#include "qns/measurement.hpp"
#include "qns/moments.hpp"
#include "qns/spectrum.hpp"

namespace qns {

inline MeasurementRecord
simulate_one(const ExperimentConfig& cfg, long trajectory_index,
             Backaction mode = Backaction::full) {
  Rng rng = Rng::stream(cfg.seed, std::uint64_t(trajectory_index));
  MeasurementRecord rec =
      cfg.target.is_classical()
          ? run_classical(cfg.target, cfg.shot, rng)
          : run_quantum(cfg.target, cfg.shot, rng, mode);
  if (cfg.readout)
    rec = attach_photon_counts(rec, *cfg.readout, rng);
  return rec;
}

// Runs all trajectories, invoking sink(index, record) from worker threads.
// The sink must be thread-safe; records for a given index are always
// produced from the same RNG stream, so any reduction done in index order
// is bit-identical for every worker count.
inline void for_each_record(const ExperimentConfig& cfg,
                            const std::function<void(long, MeasurementRecord&&)>& sink,
                            Backaction mode = Backaction::full) {
  const int workers = std::max(1, cfg.workers);
  if (workers == 1) {
    for (long i = 0; i < cfg.trajectories; ++i)
      sink(i, simulate_one(cfg, i, mode));
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (;;) {
        const long i = next.fetch_add(1);
        if (i >= cfg.trajectories)
          return;
        sink(i, simulate_one(cfg, i, mode));
      }
    });
  for (auto& th : pool)
    th.join();
}

inline std::vector<MeasurementRecord>
simulate_records(const ExperimentConfig& cfg,
                 Backaction mode = Backaction::full) {
  std::vector<MeasurementRecord> out(cfg.trajectories);
  std::mutex m;
  for_each_record(
      cfg,
      [&](long i, MeasurementRecord&& rec) {
        std::lock_guard<std::mutex> lock(m);
        out[std::size_t(i)] = std::move(rec);
      },
      mode);
  return out;
}

// Accumulates per-record moment sums directly from freshly simulated
// trajectories; avoids retaining raw outcome arrays for very long runs.
inline MomentEstimator
simulate_into_estimator(const ExperimentConfig& cfg,
                        Backaction mode = Backaction::full,
                        bool keep_raw = true) {
  MomentEstimator est(cfg.analysis.max_p, cfg.analysis.max_q, cfg.shot.t_c,
                      keep_raw);
  // per-record sums must be added in index order for determinism
  std::vector<std::unique_ptr<MomentEstimator>> partial(
      std::size_t(cfg.trajectories));
  std::mutex m;
  for_each_record(
      cfg,
      [&](long i, MeasurementRecord&& rec) {
        auto e = std::make_unique<MomentEstimator>(cfg.analysis.max_p,
                                                   cfg.analysis.max_q,
                                                   cfg.shot.t_c, keep_raw);
        if (cfg.analysis.from_photons && rec.photon_counts)
          e->add_record_photons(rec, *cfg.readout);
        else
          e->add_record(rec);
        std::lock_guard<std::mutex> lock(m);
        partial[std::size_t(i)] = std::move(e);
      },
      mode);
  for (auto& e : partial)
    est.absorb(std::move(*e));
  return est;
}

struct PatternReport {
  std::string pattern; // gaussian_twelve_peak | ac_six_peak |
                       // quantum_four_peak | other
  std::vector<std::string> present;
};

// Presence threshold: 5% of the maximum lattice height.
inline PatternReport classify_pattern(const PeakReport& rep) {
  PatternReport out;
  double mx = 0.0;
  for (double h : rep.heights)
    mx = std::max(mx, h);
  std::array<bool, 12> present{};
  const auto& pts = lattice_points();
  for (std::size_t i = 0; i < 12; ++i) {
    present[i] = rep.heights[i] >= 0.05 * mx;
    if (present[i])
      out.present.push_back(pts[i].label);
  }
  const bool eight = present[0] && present[1] && present[2] && present[3] &&
                     present[4] && present[5] && present[6] && present[7];
  const bool outer4 = present[4] && present[5] && present[6] && present[7];
  const bool axes4 = present[0] && present[1] && present[2] && present[3];
  const bool diag = present[8] && present[9];
  const bool anti = present[10] && present[11];
  if (eight && diag && anti)
    out.pattern = "gaussian_twelve_peak";
  else if (outer4 && anti && !axes4 && !diag)
    out.pattern = "ac_six_peak";
  else if (diag && anti && !eight)
    out.pattern = "quantum_four_peak";
  else
    out.pattern = "other";
  return out;
}

struct AnalysisResult {
  MomentTable table;
  SpectrumGrid grid;
  PeakReport peaks;
  PatternReport pattern;
  bool fit_ok = false;
  FitResult fit;
  std::string fit_error;
};

// Full pipeline over an estimator. nu0_expected comes from the model
// config; eta_err and r_std come from record-level bootstrap resampling
// when more than one record is present.
inline AnalysisResult analyze(const MomentEstimator& est,
                              const ExperimentConfig& cfg) {
  AnalysisResult res;
  BootstrapConfig bc;
  bc.enabled = cfg.analysis.cell_errors;
  bc.block_len = cfg.analysis.bootstrap_block;
  bc.resamples = cfg.analysis.bootstrap_resamples;
  res.table = est.table(bc);
  res.grid = spectrum2d(res.table, cfg.analysis.zero_pad_factor);
  res.peaks = peak_report(res.grid, cfg.target.nu0);
  res.pattern = classify_pattern(res.peaks);
  try {
    res.fit = fit_moments(res.table, cfg.shot.theta);
    res.fit_ok = true;
  } catch (const FitError& e) {
    res.fit_error = e.what();
    res.fit = e.diagnostics;
  }

  if (est.n_records() > 1) {
    Rng rng(cfg.seed ^ 0xb00757a9ULL);
    const int B = cfg.analysis.bootstrap_resamples;
    std::vector<double> etas;
    std::vector<double> rs;
    etas.reserve(B);
    rs.reserve(B);
    for (int b = 0; b < B; ++b) {
      const MomentTable tb = est.resample_table(rng);
      const SpectrumGrid gb = spectrum2d(tb, cfg.analysis.zero_pad_factor);
      const PeakReport pb = peak_report(gb, cfg.target.nu0);
      if (pb.reference_above_floor)
        etas.push_back(pb.eta);
      if (res.fit_ok) {
        try {
          rs.push_back(fit_moments(tb, cfg.shot.theta).r);
        } catch (const FitError&) {
        }
      }
    }
    auto stddev = [](const std::vector<double>& v) {
      if (v.size() < 2)
        return 0.0;
      double m = 0.0;
      for (double x : v)
        m += x;
      m /= double(v.size());
      double s = 0.0;
      for (double x : v)
        s += (x - m) * (x - m);
      return std::sqrt(s / double(v.size() - 1));
    };
    res.peaks.eta_err = stddev(etas);
    if (res.fit_ok && rs.size() >= 2)
      res.fit.r_std = stddev(rs);
    // enforce the eta separation gate once eta_err is known
    if (res.peaks.n_inferred && !eta_err_gate(res.peaks))
      res.peaks.n_inferred.reset();
  }
  return res;
}

} // namespace qns
