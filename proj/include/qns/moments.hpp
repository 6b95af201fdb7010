// Moment estimation from measurement records: lag-indexed second and third
// statistical moments with per-record centering, pooled across records.
// Standard errors come from a moving-block bootstrap over the per-lag
// product series (blocks confined to records); record-level resampling is
// exposed separately for pipeline-level bootstraps (eta_err, r_std).
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qns/measurement.hpp"
#include "qns/rng.hpp"

namespace qns {

struct MomentTable {
  double mean_sigma = 0.0;
  double mean_raw = 0.0; // photon path: <n>; outcome path: same as mean_sigma
  int max_p = 0, max_q = 0;
  double t_c = 0.0;
  std::vector<double> s2;        // index p-1
  std::vector<double> s2_stderr; // empty when bootstrap disabled
  std::vector<long> s2_count;
  std::vector<double> s3; // index (p-1)*max_q + (q-1)
  std::vector<double> s3_stderr;
  std::vector<long> s3_count;

  double s3_at(int p, int q) const { return s3[(p - 1) * max_q + (q - 1)]; }
  double s3_err_at(int p, int q) const {
    return s3_stderr[(p - 1) * max_q + (q - 1)];
  }
};

struct BootstrapConfig {
  bool enabled = true;
  long block_len = 0; // 0 -> 4 * (max_p + max_q)
  int resamples = 200;
  std::uint64_t seed = 0x9e3779b9ULL;
};

class MomentEstimator {
public:
  MomentEstimator(int max_p, int max_q, double t_c, bool keep_raw = true)
      : max_p_(max_p), max_q_(max_q), t_c_(t_c), keep_raw_(keep_raw) {
    if (max_p < 1 || max_q < 1)
      throw std::invalid_argument("MomentEstimator: max_p, max_q >= 1");
  }

  void add_record(std::span<const std::int8_t> outcomes) {
    std::vector<double> x(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i)
      x[i] = double(outcomes[i]);
    add_series(std::move(x), 1.0);
  }

  void add_record(const MeasurementRecord& rec) {
    add_record(std::span<const std::int8_t>(rec.outcomes));
  }

  // Photon path: moments of delta n divided by d^2 (second) and d^3
  // (third); the mean channel inverts <n> = n_bar + d <sigma>.
  void add_record_photons(std::span<const std::int32_t> counts,
                          const ReadoutModel& readout) {
    readout.validate();
    std::vector<double> x(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i)
      x[i] = double(counts[i]);
    add_series(std::move(x), readout.contrast(), readout.n_bar());
  }

  void add_record_photons(const MeasurementRecord& rec,
                          const ReadoutModel& readout) {
    if (!rec.photon_counts)
      throw std::invalid_argument("add_record_photons: record has no counts");
    add_record_photons(std::span<const std::int32_t>(*rec.photon_counts),
                       readout);
  }

  long n_records() const { return long(records_.size()); }
  long total_shots() const { return total_shots_; }

  // Merge another estimator's records (same lag grid required).
  void absorb(MomentEstimator&& other) {
    if (other.max_p_ != max_p_ || other.max_q_ != max_q_)
      throw std::invalid_argument("MomentEstimator::absorb: grid mismatch");
    total_shots_ += other.total_shots_;
    for (auto& r : other.records_)
      records_.push_back(std::move(r));
    other.records_.clear();
    other.total_shots_ = 0;
  }

  MomentTable table(const BootstrapConfig& bc = {}) const {
    MomentTable t = combine_all();
    if (bc.enabled) {
      if (!keep_raw_)
        throw std::logic_error(
            "MomentEstimator: bootstrap errors need keep_raw = true");
      block_bootstrap_errors(t, bc);
    }
    return t;
  }

  // Resample records with replacement and pool; no per-cell errors.
  MomentTable resample_table(Rng& rng) const {
    std::vector<std::size_t> idx(records_.size());
    for (auto& v : idx)
      v = std::size_t(rng.u64() % records_.size());
    return combine_subset(idx);
  }

private:
  struct RecordSums {
    double mean_raw = 0.0;   // record mean of the raw series
    double mean_sigma = 0.0; // translated to sigma units
    long n = 0;
    double scale = 1.0; // photon contrast d, or 1 for outcomes
    std::vector<double> s2_sum;
    std::vector<long> s2_n;
    std::vector<double> s3_sum;
    std::vector<long> s3_n;
    std::vector<float> centered; // kept only when keep_raw
  };

  void add_series(std::vector<double> x, double scale, double offset = 0.0) {
    const long n = long(x.size());
    if (n < max_p_ + max_q_ + 1)
      throw std::invalid_argument("MomentEstimator: record shorter than "
                                  "max_p + max_q + 1 shots");
    RecordSums r;
    r.n = n;
    r.scale = scale;
    double m = 0.0;
    for (double v : x)
      m += v;
    m /= double(n);
    r.mean_raw = m;
    r.mean_sigma = (m - offset) / scale;
    std::vector<double> d(n);
    for (long i = 0; i < n; ++i)
      d[i] = x[i] - m;

    r.s2_sum.assign(max_p_, 0.0);
    r.s2_n.assign(max_p_, 0);
    r.s3_sum.assign(std::size_t(max_p_) * max_q_, 0.0);
    r.s3_n.assign(std::size_t(max_p_) * max_q_, 0);
    std::vector<double> e(n);
    for (int p = 1; p <= max_p_; ++p) {
      double acc = 0.0;
      const long n2 = n - p;
      for (long i = 0; i < n2; ++i) {
        e[i] = d[i] * d[i + p];
        acc += e[i];
      }
      r.s2_sum[p - 1] = acc;
      r.s2_n[p - 1] = n2;
      for (int q = 1; q <= max_q_; ++q) {
        const long n3 = n - p - q;
        if (n3 <= 0)
          break;
        double a3 = 0.0;
        const double* dq = d.data() + p + q;
        for (long i = 0; i < n3; ++i)
          a3 += e[i] * dq[i];
        r.s3_sum[(p - 1) * max_q_ + (q - 1)] = a3;
        r.s3_n[(p - 1) * max_q_ + (q - 1)] = n3;
      }
    }
    if (keep_raw_) {
      r.centered.resize(n);
      for (long i = 0; i < n; ++i)
        r.centered[i] = float(d[i]);
    }
    total_shots_ += n;
    records_.push_back(std::move(r));
  }

  MomentTable combine_all() const {
    std::vector<std::size_t> idx(records_.size());
    for (std::size_t i = 0; i < idx.size(); ++i)
      idx[i] = i;
    return combine_subset(idx);
  }

  MomentTable combine_subset(const std::vector<std::size_t>& idx) const {
    if (records_.empty())
      throw std::logic_error("MomentEstimator: no records");
    MomentTable t;
    t.max_p = max_p_;
    t.max_q = max_q_;
    t.t_c = t_c_;
    t.s2.assign(max_p_, 0.0);
    t.s2_count.assign(max_p_, 0);
    t.s3.assign(std::size_t(max_p_) * max_q_, 0.0);
    t.s3_count.assign(std::size_t(max_p_) * max_q_, 0);
    double mean_num = 0.0;
    double raw_num = 0.0;
    long shots = 0;
    for (std::size_t k : idx) {
      const RecordSums& r = records_[k];
      const double s2scale = 1.0 / (r.scale * r.scale);
      const double s3scale = s2scale / r.scale;
      mean_num += r.mean_sigma * double(r.n);
      raw_num += r.mean_raw * double(r.n);
      shots += r.n;
      for (int c = 0; c < max_p_; ++c) {
        t.s2[c] += r.s2_sum[c] * s2scale;
        t.s2_count[c] += r.s2_n[c];
      }
      for (std::size_t c = 0; c < t.s3.size(); ++c) {
        t.s3[c] += r.s3_sum[c] * s3scale;
        t.s3_count[c] += r.s3_n[c];
      }
    }
    t.mean_sigma = mean_num / double(shots);
    t.mean_raw = raw_num / double(shots);
    for (int c = 0; c < max_p_; ++c)
      t.s2[c] /= double(t.s2_count[c]);
    for (std::size_t c = 0; c < t.s3.size(); ++c)
      if (t.s3_count[c] > 0)
        t.s3[c] /= double(t.s3_count[c]);
    return t;
  }

  // Moving-block bootstrap of the per-cell product-series mean. Blocks of
  // length L at uniform random starts within records; resample start
  // fractions are shared across cells so the pass over each record's
  // series is made once per cell.
  void block_bootstrap_errors(MomentTable& t, const BootstrapConfig& bc) const;

  int max_p_, max_q_;
  double t_c_;
  bool keep_raw_;
  long total_shots_ = 0;
  std::vector<RecordSums> records_;

public:
  const std::vector<float>& record_centered(std::size_t k) const {
    return records_[k].centered;
  }
  double record_scale(std::size_t k) const { return records_[k].scale; }
};

inline void MomentEstimator::block_bootstrap_errors(
    MomentTable& t, const BootstrapConfig& bc) const {
  const long L =
      bc.block_len > 0 ? bc.block_len : 4L * (max_p_ + max_q_);
  const int B = bc.resamples;
  // number of blocks in one resample ~ total terms / L, per cell
  // (use the p=1,q=1 term count as the reference)
  t.s2_stderr.assign(max_p_, 0.0);
  t.s3_stderr.assign(std::size_t(max_p_) * max_q_, 0.0);

  Rng rng(bc.seed);
  // Shared start fractions: draws[b][k] in [0,1). Block count per resample
  // is fixed from the shortest product series so all cells use the same
  // draw matrix.
  const long min_terms = total_shots_ - long(records_.size()) *
                                            long(max_p_ + max_q_);
  const long nb = std::max(1L, min_terms / L);
  std::vector<float> draws(std::size_t(B) * nb);
  for (auto& v : draws)
    v = float(rng.uniform());

  std::vector<double> prefix;
  std::vector<double> acc(B);
  std::vector<double> series;

  auto cell_stderr = [&](int lag_total, auto product_at) {
    std::fill(acc.begin(), acc.end(), 0.0);
    // total valid starts over all records for this cell
    std::vector<long> starts(records_.size() + 1, 0);
    for (std::size_t r = 0; r < records_.size(); ++r) {
      const long terms = records_[r].n - lag_total;
      const long valid = std::max(0L, terms - L + 1);
      starts[r + 1] = starts[r] + valid;
    }
    const long total_starts = starts.back();
    if (total_starts <= 0)
      return 0.0;
    // map each draw to (record, offset) lazily per record to keep one
    // prefix buffer alive at a time
    std::vector<std::vector<std::pair<int, long>>> per_record(
        records_.size());
    for (int b = 0; b < B; ++b)
      for (long k = 0; k < nb; ++k) {
        const long g = std::min<long>(total_starts - 1,
                                      long(double(draws[b * nb + k]) *
                                           double(total_starts)));
        const auto it =
            std::upper_bound(starts.begin(), starts.end(), g) - 1;
        const std::size_t rec = std::size_t(it - starts.begin());
        per_record[rec].push_back({b, g - *it});
      }
    for (std::size_t r = 0; r < records_.size(); ++r) {
      if (per_record[r].empty())
        continue;
      const long terms = records_[r].n - lag_total;
      prefix.assign(terms + 1, 0.0);
      for (long i = 0; i < terms; ++i)
        prefix[i + 1] = prefix[i] + product_at(r, i);
      for (const auto& [b, off] : per_record[r])
        acc[b] += prefix[off + L] - prefix[off];
    }
    const double denom = double(nb) * double(L);
    double m = 0.0;
    for (double v : acc)
      m += v / denom;
    m /= B;
    double var = 0.0;
    for (double v : acc)
      var += (v / denom - m) * (v / denom - m);
    return std::sqrt(var / double(B - 1));
  };

  for (int p = 1; p <= max_p_; ++p) {
    const int pp = p;
    t.s2_stderr[p - 1] = cell_stderr(pp, [&](std::size_t r, long i) {
      const auto& d = records_[r].centered;
      const double sc = records_[r].scale;
      return double(d[i]) * double(d[i + pp]) / (sc * sc);
    });
    for (int q = 1; q <= max_q_; ++q) {
      const int qq = q;
      t.s3_stderr[(p - 1) * max_q_ + (q - 1)] =
          cell_stderr(pp + qq, [&](std::size_t r, long i) {
            const auto& d = records_[r].centered;
            const double sc = records_[r].scale;
            return double(d[i]) * double(d[i + pp]) *
                   double(d[i + pp + qq]) / (sc * sc * sc);
          });
    }
  }
}

} // namespace qns
