// File formats. Records: one CSV per trajectory with header
// shot_index,t_seconds,sigma,photon_count (photon_count empty when absent)
// plus a metadata JSON sidecar carrying the full config, seed and config
// hash. Moment tables and spectra use long-format CSV; peak reports and
// fits serialize to JSON.
#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qns/config.hpp"
#include "qns/fitting.hpp"
#include "qns/moments.hpp"
#include "qns/spectrum.hpp"

namespace qns {

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}
} // namespace detail

inline void write_record_csv(const std::filesystem::path& path,
                             const MeasurementRecord& rec) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  out << "shot_index,t_seconds,sigma,photon_count\n";
  for (std::size_t j = 0; j < rec.outcomes.size(); ++j) {
    out << j << ',' << detail::fmt_double(rec.config.shot_time(long(j)))
        << ',' << int(rec.outcomes[j]) << ',';
    if (rec.photon_counts)
      out << (*rec.photon_counts)[j];
    out << '\n';
  }
  if (!out)
    throw IoError("write failed for " + path.string());
}

inline MeasurementRecord read_record_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) ||
      line != "shot_index,t_seconds,sigma,photon_count")
    throw IoError(path.string() + ": bad or missing header");
  MeasurementRecord rec;
  std::vector<std::int32_t> counts;
  bool any_counts = false;
  bool first = true;
  double t_first = 0.0, t_second = 0.0;
  long row = 0;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::istringstream ss(line);
    std::string f0, f1, f2, f3;
    if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') ||
        !std::getline(ss, f2, ','))
      throw IoError(path.string() + ": malformed row " + std::to_string(row));
    std::getline(ss, f3, ',');
    const double t = std::stod(f1);
    if (first) {
      t_first = t;
      first = false;
    } else if (row == 1) {
      t_second = t;
    }
    const int s = std::stoi(f2);
    if (s != 1 && s != -1)
      throw IoError(path.string() + ": sigma must be +-1 at row " +
                    std::to_string(row));
    rec.outcomes.push_back(std::int8_t(s));
    if (!f3.empty()) {
      counts.push_back(std::stoi(f3));
      any_counts = true;
    } else {
      counts.push_back(0);
    }
    ++row;
  }
  if (rec.outcomes.empty())
    throw IoError(path.string() + ": no rows");
  rec.t0 = t_first;
  rec.config.t0 = t_first;
  rec.config.n_shots = long(rec.outcomes.size());
  if (row > 1)
    rec.config.t_c = t_second - t_first;
  if (any_counts) {
    if (counts.size() != rec.outcomes.size())
      throw IoError(path.string() + ": photon column incomplete");
    rec.photon_counts = std::move(counts);
  }
  return rec;
}

inline void write_run_metadata(const std::filesystem::path& path,
                               const ExperimentConfig& cfg,
                               const std::vector<std::string>& record_files) {
  nlohmann::json j = {{"config", config_to_json(cfg)},
                      {"config_hash", config_hash(cfg)},
                      {"seed", cfg.seed},
                      {"records", record_files}};
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot open " + path.string());
  out << j.dump(2) << '\n';
}

inline ExperimentConfig read_run_metadata(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  if (!j.contains("config"))
    throw IoError(path.string() + ": missing 'config'");
  return config_from_json(j.at("config"));
}

// Long format; q = 0 rows carry S(p), the (0,0) row carries the mean.
inline void write_moments_csv(const std::filesystem::path& path,
                              const MomentTable& t) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot open " + path.string());
  out << "p,q,value,stderr\n";
  out << "0,0," << detail::fmt_double(t.mean_sigma) << ",\n";
  for (int p = 1; p <= t.max_p; ++p) {
    out << p << ",0," << detail::fmt_double(t.s2[p - 1]) << ',';
    if (!t.s2_stderr.empty())
      out << detail::fmt_double(t.s2_stderr[p - 1]);
    out << '\n';
  }
  for (int p = 1; p <= t.max_p; ++p)
    for (int q = 1; q <= t.max_q; ++q) {
      out << p << ',' << q << ',' << detail::fmt_double(t.s3_at(p, q)) << ',';
      if (!t.s3_stderr.empty())
        out << detail::fmt_double(t.s3_err_at(p, q));
      out << '\n';
    }
}

inline MomentTable read_moments_csv(const std::filesystem::path& path,
                                    double t_c) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "p,q,value,stderr")
    throw IoError(path.string() + ": bad header");
  struct Row {
    int p, q;
    double v;
    double e;
    bool has_e;
  };
  std::vector<Row> rows;
  int max_p = 0, max_q = 0;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::istringstream ss(line);
    std::string f0, f1, f2, f3;
    std::getline(ss, f0, ',');
    std::getline(ss, f1, ',');
    std::getline(ss, f2, ',');
    std::getline(ss, f3, ',');
    Row r{std::stoi(f0), std::stoi(f1), std::stod(f2), 0.0, !f3.empty()};
    if (r.has_e)
      r.e = std::stod(f3);
    max_p = std::max(max_p, r.p);
    max_q = std::max(max_q, r.q);
    rows.push_back(r);
  }
  MomentTable t;
  t.max_p = max_p;
  t.max_q = max_q;
  t.t_c = t_c;
  t.s2.assign(max_p, 0.0);
  t.s2_stderr.assign(max_p, 0.0);
  t.s2_count.assign(max_p, 1);
  t.s3.assign(std::size_t(max_p) * max_q, 0.0);
  t.s3_stderr.assign(std::size_t(max_p) * max_q, 0.0);
  t.s3_count.assign(std::size_t(max_p) * max_q, 1);
  for (const Row& r : rows) {
    if (r.p == 0 && r.q == 0)
      t.mean_sigma = r.v;
    else if (r.q == 0) {
      t.s2[r.p - 1] = r.v;
      t.s2_stderr[r.p - 1] = r.e;
    } else {
      t.s3[(r.p - 1) * max_q + (r.q - 1)] = r.v;
      t.s3_stderr[(r.p - 1) * max_q + (r.q - 1)] = r.e;
    }
  }
  return t;
}

inline void write_spectrum_csv(const std::filesystem::path& path,
                               const SpectrumGrid& g) {
  std::ofstream out(path);
  if (!out)
    throw IoError("cannot open " + path.string());
  out << "nu_ij,nu_jk,re,im,mag\n";
  for (int k1 = 0; k1 < g.f1; ++k1)
    for (int k2 = 0; k2 < g.f2; ++k2) {
      const cxd v = g.values[std::size_t(k1) * g.f2 + k2];
      out << detail::fmt_double(g.freq(k1, g.f1)) << ','
          << detail::fmt_double(g.freq(k2, g.f2)) << ','
          << detail::fmt_double(v.real()) << ',' << detail::fmt_double(v.imag())
          << ',' << detail::fmt_double(std::abs(v)) << '\n';
    }
}

struct SpectrumFile {
  std::vector<double> nu1, nu2; // sorted unique axes
  std::vector<double> re, im, mag;
  int n1 = 0, n2 = 0;
};

inline SpectrumFile read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "nu_ij,nu_jk,re,im,mag")
    throw IoError(path.string() + ": bad header");
  SpectrumFile f;
  std::vector<std::array<double, 5>> rows;
  while (std::getline(in, line)) {
    if (line.empty())
      continue;
    std::istringstream ss(line);
    std::array<double, 5> r{};
    std::string tok;
    for (int i = 0; i < 5; ++i) {
      if (!std::getline(ss, tok, ','))
        throw IoError(path.string() + ": malformed row");
      r[i] = std::stod(tok);
    }
    rows.push_back(r);
  }
  if (rows.empty())
    throw IoError(path.string() + ": no rows");
  auto uniq = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end(),
                        [](double a, double b) {
                          return std::abs(a - b) < 1e-12;
                        }),
            v.end());
    return v;
  };
  std::vector<double> a1, a2;
  for (const auto& r : rows) {
    a1.push_back(r[0]);
    a2.push_back(r[1]);
  }
  f.nu1 = uniq(a1);
  f.nu2 = uniq(a2);
  f.n1 = int(f.nu1.size());
  f.n2 = int(f.nu2.size());
  if (std::size_t(f.n1) * f.n2 != rows.size())
    throw IoError(path.string() + ": grid is not rectangular");
  f.re.assign(rows.size(), 0.0);
  f.im.assign(rows.size(), 0.0);
  f.mag.assign(rows.size(), 0.0);
  auto index_of = [](const std::vector<double>& ax, double v) {
    const auto it = std::lower_bound(ax.begin(), ax.end(), v - 1e-12);
    return std::size_t(it - ax.begin());
  };
  for (const auto& r : rows) {
    const std::size_t i = index_of(f.nu1, r[0]) * f.n2 + index_of(f.nu2, r[1]);
    f.re[i] = r[2];
    f.im[i] = r[3];
    f.mag[i] = r[4];
  }
  return f;
}

inline nlohmann::json peak_report_to_json(const PeakReport& rep) {
  nlohmann::json heights = nlohmann::json::object();
  nlohmann::json signed_vals = nlohmann::json::object();
  const auto& pts = lattice_points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    heights[pts[i].label] = rep.heights[i];
    signed_vals[pts[i].label] = rep.signed_values[i];
  }
  nlohmann::json j = {{"heights", heights},
                      {"signed_values", signed_vals},
                      {"eta", rep.eta},
                      {"eta_signed", rep.eta_signed},
                      {"eta_err", rep.eta_err},
                      {"noise_floor", rep.noise_floor},
                      {"nu0_folded_rad_s", rep.nu0_folded},
                      {"reference_above_floor", rep.reference_above_floor}};
  if (rep.n_inferred)
    j["n_inferred"] = *rep.n_inferred;
  else
    j["n_inferred"] = "indeterminate";
  return j;
}

inline nlohmann::json fit_result_to_json(const FitResult& f) {
  return {{"c0", f.c0},
          {"nu0_fit_rad_s", f.nu0_fit},
          {"gamma_fit_per_s", f.gamma_fit},
          {"r", f.r},
          {"r_std", f.r_std},
          {"iterations", f.iterations},
          {"grad_norm", f.grad_norm},
          {"chi2", f.chi2}};
}

} // namespace qns
