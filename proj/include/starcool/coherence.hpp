#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "starcool/parallel.hpp"
#include "starcool/rng.hpp"

namespace starcool::coherence {

// Fully correlated Gaussian dephasing: one Ornstein-Uhlenbeck frequency
// trajectory integrates into a phase shared identically by every spin, so a
// coherence of order q picks up q times that phase.
struct NoiseModel {
  double rms_rad_per_s = 1.0;       // stationary RMS of the OU frequency process
  double correlation_time_s = 1.0;
  int trajectories = 10000;
  std::uint64_t seed = 1;
};

struct DecayCurve {
  std::vector<double> times_s;
  std::vector<double> amplitudes;  // ensemble-averaged coherence magnitude
  int order = 1;
};

// Spectral position of an order-q combination coherence relative to the
// central transition: (q - 1) J / 2.
inline double line_position(int q, double j_rc_hz) {
  if (q < 1) throw std::invalid_argument("line_position: order must be >= 1");
  return 0.5 * (q - 1) * j_rc_hz;
}

// Known Gaussian phase variance of the integrated OU process,
// v(t) = 2 rms^2 tau_c (t - tau_c (1 - e^{-t/tau_c})); the analytic envelope
// of an order-q coherence is exp(-q^2 v(t) / 2).
inline double phase_variance(const NoiseModel& noise, double t) {
  const double tc = noise.correlation_time_s;
  return 2.0 * noise.rms_rad_per_s * noise.rms_rad_per_s * tc * (t - tc * (1.0 - std::exp(-t / tc)));
}

inline double analytic_envelope(int q, const NoiseModel& noise, double t) {
  return std::exp(-0.5 * double(q) * double(q) * phase_variance(noise, t));
}

namespace detail {

inline void require_noise(const NoiseModel& noise) {
  if (!(noise.rms_rad_per_s >= 0.0)) throw std::invalid_argument("NoiseModel: rms must be >= 0");
  if (!(noise.correlation_time_s > 0.0))
    throw std::invalid_argument("NoiseModel: correlation time must be > 0");
  if (noise.trajectories < 1) throw std::invalid_argument("NoiseModel: trajectories must be >= 1");
}

// Draws the phase phi(t_i) of one trajectory along the time grid using the
// exact joint Gaussian update of the OU frequency and its integral, so the
// sampled phases carry no time-discretization bias.
inline void sample_phase(Rng& rng, const NoiseModel& noise, const std::vector<double>& times,
                         std::vector<double>& phases) {
  const double beta = 1.0 / noise.correlation_time_s;
  const double sigma = noise.rms_rad_per_s;
  double omega = sigma * rng.gauss();  // stationary initial frequency
  double phi = 0.0;
  double t_prev = 0.0;
  phases.resize(times.size());
  for (std::size_t i = 0; i < times.size(); ++i) {
    const double h = times[i] - t_prev;
    if (h > 0.0) {
      const double e = std::exp(-beta * h);
      const double var_w = sigma * sigma * (1.0 - e * e);
      const double var_p =
          sigma * sigma / (beta * beta) * (2.0 * beta * h - 3.0 + 4.0 * e - e * e);
      const double cov = sigma * sigma / beta * (1.0 - e) * (1.0 - e);
      const double z1 = rng.gauss();
      const double z2 = rng.gauss();
      const double sd_w = std::sqrt(std::max(0.0, var_w));
      const double mean_p = phi + omega * (1.0 - e) / beta;
      double c_term = 0.0, resid = std::max(0.0, var_p);
      if (sd_w > 0.0) {
        c_term = cov / sd_w;
        resid = std::max(0.0, var_p - c_term * c_term);
      }
      omega = omega * e + sd_w * z1;
      phi = mean_p + c_term * z1 + std::sqrt(resid) * z2;
      t_prev = times[i];
    }
    phases[i] = phi;
  }
}

}  // namespace detail

// Monte-Carlo average of cos(q phi(t)) over OU phase trajectories. The seed
// fully determines every trajectory, and trajectories are summed block by
// block in index order, so runs agree bit for bit for any thread count and
// curves for different q from the same seed share the identical phase
// ensemble.
inline DecayCurve simulate_decay(int q, const NoiseModel& noise, const std::vector<double>& times,
                                 int threads = 1) {
  if (q < 1) throw std::invalid_argument("simulate_decay: order must be >= 1");
  detail::require_noise(noise);
  if (times.empty()) throw std::invalid_argument("simulate_decay: empty time grid");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (times[i] < 0.0 || (i > 0 && times[i] <= times[i - 1]))
      throw std::invalid_argument("simulate_decay: times must be nonnegative and increasing");
  }

  constexpr int kBlock = 128;
  const int n_blocks = (noise.trajectories + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> block_sums(static_cast<std::size_t>(n_blocks));
  parallel_for(static_cast<std::size_t>(n_blocks), threads, [&](std::size_t b) {
    const int first = static_cast<int>(b) * kBlock;
    const int last = std::min(noise.trajectories, first + kBlock);
    std::vector<double> sums(times.size(), 0.0);
    std::vector<double> phases;
    for (int k = first; k < last; ++k) {
      Rng rng(derive_seed(noise.seed, static_cast<std::uint64_t>(k)));
      detail::sample_phase(rng, noise, times, phases);
      for (std::size_t i = 0; i < times.size(); ++i) sums[i] += std::cos(q * phases[i]);
    }
    block_sums[b] = std::move(sums);
  });

  DecayCurve curve;
  curve.order = q;
  curve.times_s = times;
  curve.amplitudes.assign(times.size(), 0.0);
  for (const auto& sums : block_sums) {
    for (std::size_t i = 0; i < times.size(); ++i) curve.amplitudes[i] += sums[i];
  }
  const double inv = 1.0 / static_cast<double>(noise.trajectories);
  for (double& a : curve.amplitudes) a *= inv;
  return curve;
}

struct RateEstimate {
  double gamma_per_s = 0.0;
  double stderr_per_s = 0.0;
  int points_used = 0;
};

// Log-linear fit of the exponential envelope: ordinary least squares of
// ln(amplitude) against t over the points whose amplitude exceeds the floor.
inline RateEstimate extract_rate(const DecayCurve& curve, double floor = 0.05) {
  std::vector<double> ts, ys;
  for (std::size_t i = 0; i < curve.amplitudes.size(); ++i) {
    if (curve.amplitudes[i] > floor) {
      ts.push_back(curve.times_s[i]);
      ys.push_back(std::log(curve.amplitudes[i]));
    }
  }
  const int n = static_cast<int>(ts.size());
  if (n < 3)
    throw std::invalid_argument("extract_rate: need at least 3 points above the amplitude floor");
  double t_mean = 0.0, y_mean = 0.0;
  for (int i = 0; i < n; ++i) {
    t_mean += ts[static_cast<std::size_t>(i)];
    y_mean += ys[static_cast<std::size_t>(i)];
  }
  t_mean /= n;
  y_mean /= n;
  double stt = 0.0, sty = 0.0;
  for (int i = 0; i < n; ++i) {
    const double dt = ts[static_cast<std::size_t>(i)] - t_mean;
    stt += dt * dt;
    sty += dt * (ys[static_cast<std::size_t>(i)] - y_mean);
  }
  if (stt == 0.0) throw std::invalid_argument("extract_rate: degenerate time grid");
  const double slope = sty / stt;
  double ss_res = 0.0;
  for (int i = 0; i < n; ++i) {
    const double fit = y_mean + slope * (ts[static_cast<std::size_t>(i)] - t_mean);
    const double r = ys[static_cast<std::size_t>(i)] - fit;
    ss_res += r * r;
  }
  RateEstimate est;
  est.gamma_per_s = -slope;
  est.stderr_per_s = (n > 2) ? std::sqrt(ss_res / (n - 2) / stt) : 0.0;
  est.points_used = n;
  return est;
}

struct RateFit {
  double slope = 0.0;      // d gamma / d q^2
  double intercept = 0.0;
  double r_squared = 1.0;
  std::vector<double> residuals;  // per input point, gamma - fit
  int outlier_index = -1;         // index of the largest |residual|
};

// Least-squares line of gamma against q^2.
inline RateFit fit_q2(const std::vector<std::pair<int, double>>& rates) {
  std::vector<int> orders;
  for (const auto& [q, gamma] : rates) {
    if (q < 1) throw std::invalid_argument("fit_q2: orders must be >= 1");
    if (std::find(orders.begin(), orders.end(), q) == orders.end()) orders.push_back(q);
  }
  if (orders.size() < 3) throw std::invalid_argument("fit_q2: need at least 3 distinct orders");

  const int n = static_cast<int>(rates.size());
  double x_mean = 0.0, y_mean = 0.0;
  for (const auto& [q, gamma] : rates) {
    x_mean += double(q) * double(q);
    y_mean += gamma;
  }
  x_mean /= n;
  y_mean /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [q, gamma] : rates) {
    const double dx = double(q) * double(q) - x_mean;
    const double dy = gamma - y_mean;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;
  double ss_res = 0.0;
  fit.residuals.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double x = double(rates[static_cast<std::size_t>(i)].first) *
                     double(rates[static_cast<std::size_t>(i)].first);
    const double r = rates[static_cast<std::size_t>(i)].second - (fit.intercept + fit.slope * x);
    fit.residuals[static_cast<std::size_t>(i)] = r;
    ss_res += r * r;
    if (fit.outlier_index < 0 ||
        std::abs(r) > std::abs(fit.residuals[static_cast<std::size_t>(fit.outlier_index)]))
      fit.outlier_index = i;
  }
  fit.r_squared = (syy > 0.0) ? std::max(0.0, 1.0 - ss_res / syy) : 1.0;
  return fit;
}

inline void write_decay_csv(std::ostream& out, const DecayCurve& curve) {
  out << "t_s,amplitude\n";
  char buf[80];
  for (std::size_t i = 0; i < curve.times_s.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", curve.times_s[i], curve.amplitudes[i]);
    out << buf;
  }
}

inline void write_rates_csv(std::ostream& out, const std::vector<std::pair<int, double>>& rates,
                            const std::vector<double>& stderrs) {
  out << "q,gamma_per_s,stderr\n";
  char buf[96];
  for (std::size_t i = 0; i < rates.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", rates[i].first, rates[i].second,
                  i < stderrs.size() ? stderrs[i] : 0.0);
    out << buf;
  }
}

}  // namespace starcool::coherence
