#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "starcool/parallel.hpp"
#include "starcool/rng.hpp"

namespace starcool::pulse {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

enum class BandTarget { invert, preserve };

struct Band {
  double lo_hz = 0.0;
  double hi_hz = 0.0;
  BandTarget target = BandTarget::invert;
};

// Frequency bands with the desired final longitudinal magnetization per band.
// Offsets within `transition_margin_hz` of any band edge are excluded from
// the objective; that is the transition region the pulse is free to shape.
struct BandSpec {
  std::vector<Band> bands;
  double transition_margin_hz = 0.0;
};

struct EnsembleSpec {
  std::vector<double> offsets_hz;
  std::vector<double> rf_scales;

  // 50 offsets uniform on [-50, 50] Hz, RF scales 0.8 / 1.0 / 1.2.
  static EnsembleSpec defaults() {
    EnsembleSpec e;
    e.offsets_hz.resize(50);
    for (int i = 0; i < 50; ++i) e.offsets_hz[static_cast<std::size_t>(i)] = -50.0 + 100.0 * i / 49.0;
    e.rf_scales = {0.8, 1.0, 1.2};
    return e;
  }
};

// Piecewise-constant control sequence with uniform segment duration.
struct Pulse {
  std::vector<double> amplitude_hz;  // >= 0
  std::vector<double> phase_rad;
  double segment_duration_s = 0.0;

  int segments() const { return static_cast<int>(amplitude_hz.size()); }
  double duration_s() const { return segment_duration_s * segments(); }
};

struct OptimizerConfig {
  int max_iterations = 600;
  double tolerance = 1e-8;        // stop once accepted improvements stay below this
  double shrink = 0.5;            // line-search backtracking factor
  double initial_scale_hz = 10.0; // random-init amplitude and first trial step size
  std::uint64_t seed = 42;
  double amplitude_cap_hz = 1000.0;
};

struct ProfilePoint {
  double offset_hz = 0.0;
  double rf_scale = 1.0;
  double mz = 1.0;
};

namespace detail {

// Rotation of x by the rotation vector v (angle |v|, axis v/|v|), Rodrigues form.
inline Eigen::Vector3d rotate(const Eigen::Vector3d& v, const Eigen::Vector3d& x) {
  const double theta2 = v.squaredNorm();
  if (theta2 == 0.0) return x;
  const double theta = std::sqrt(theta2);
  const Eigen::Vector3d axis = v / theta;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  return x * c + axis.cross(x) * s + axis * (axis.dot(x) * (1.0 - c));
}

// J_r(v)^T x, where J_r is the right Jacobian of SO(3):
// J_r(v) = I - c1 [v]x + c2 [v]x^2 with c1 = (1-cos t)/t^2, c2 = (t-sin t)/t^3.
inline Eigen::Vector3d right_jacobian_t(const Eigen::Vector3d& v, const Eigen::Vector3d& x) {
  const double theta2 = v.squaredNorm();
  double c1, c2;
  if (theta2 < 1e-8) {
    c1 = 0.5 - theta2 / 24.0;
    c2 = 1.0 / 6.0 - theta2 / 120.0;
  } else {
    const double theta = std::sqrt(theta2);
    c1 = (1.0 - std::cos(theta)) / theta2;
    c2 = (theta - std::sin(theta)) / (theta2 * theta);
  }
  // [v]x^T = -[v]x and ([v]x^2)^T = [v]x^2.
  return x + c1 * v.cross(x) + c2 * v.cross(v.cross(x));
}

struct CartesianControls {
  std::vector<double> ux_hz;
  std::vector<double> uy_hz;
  double dt_s = 0.0;
};

inline CartesianControls to_cartesian(const Pulse& p) {
  CartesianControls c;
  c.dt_s = p.segment_duration_s;
  c.ux_hz.resize(p.amplitude_hz.size());
  c.uy_hz.resize(p.amplitude_hz.size());
  for (std::size_t k = 0; k < p.amplitude_hz.size(); ++k) {
    c.ux_hz[k] = p.amplitude_hz[k] * std::cos(p.phase_rad[k]);
    c.uy_hz[k] = p.amplitude_hz[k] * std::sin(p.phase_rad[k]);
  }
  return c;
}

inline Pulse to_polar(const CartesianControls& c) {
  Pulse p;
  p.segment_duration_s = c.dt_s;
  p.amplitude_hz.resize(c.ux_hz.size());
  p.phase_rad.resize(c.ux_hz.size());
  for (std::size_t k = 0; k < c.ux_hz.size(); ++k) {
    p.amplitude_hz[k] = std::hypot(c.ux_hz[k], c.uy_hz[k]);
    p.phase_rad[k] = (p.amplitude_hz[k] > 0.0) ? std::atan2(c.uy_hz[k], c.ux_hz[k]) : 0.0;
  }
  return p;
}

// Rotation vector of one segment for a member with the given offset and scale.
inline Eigen::Vector3d segment_rotation(const CartesianControls& c, std::size_t k,
                                        double offset_hz, double rf_scale) {
  return kTwoPi * c.dt_s *
         Eigen::Vector3d(rf_scale * c.ux_hz[k], rf_scale * c.uy_hz[k], offset_hz);
}

inline double final_mz(const CartesianControls& c, double offset_hz, double rf_scale) {
  Eigen::Vector3d m(0.0, 0.0, 1.0);
  for (std::size_t k = 0; k < c.ux_hz.size(); ++k) {
    m = rotate(segment_rotation(c, k, offset_hz, rf_scale), m);
  }
  return m.z();
}

enum class Membership { in_band, margin, outside };

inline Membership classify(const BandSpec& bands, double offset_hz, const Band** which) {
  const double margin = bands.transition_margin_hz;
  bool in_margin = false;
  for (const Band& b : bands.bands) {
    if (offset_hz >= b.lo_hz + margin && offset_hz <= b.hi_hz - margin) {
      if (which) *which = &b;
      return Membership::in_band;
    }
    if (offset_hz >= b.lo_hz - margin && offset_hz <= b.hi_hz + margin) in_margin = true;
  }
  return in_margin ? Membership::margin : Membership::outside;
}

inline void require_bands(const BandSpec& spec) {
  if (spec.bands.empty()) throw std::invalid_argument("BandSpec: at least one band required");
  if (spec.transition_margin_hz < 0.0)
    throw std::invalid_argument("BandSpec: margin must be >= 0");
  std::vector<Band> sorted = spec.bands;
  std::sort(sorted.begin(), sorted.end(), [](const Band& a, const Band& b) { return a.lo_hz < b.lo_hz; });
  for (const Band& b : sorted) {
    if (!(b.hi_hz > b.lo_hz)) throw std::invalid_argument("BandSpec: band high edge must exceed low edge");
  }
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].lo_hz - sorted[i - 1].hi_hz < 2.0 * spec.transition_margin_hz - 1e-12)
      throw std::invalid_argument("BandSpec: bands overlap after margin expansion");
  }
}

inline void require_coverage(const BandSpec& bands, const EnsembleSpec& ensemble) {
  if (ensemble.offsets_hz.empty() || ensemble.rf_scales.empty())
    throw std::invalid_argument("EnsembleSpec: offsets and rf_scales must be nonempty");
  for (double off : ensemble.offsets_hz) {
    if (classify(bands, off, nullptr) == Membership::outside)
      throw std::invalid_argument("EnsembleSpec: offset outside every band and margin");
  }
}

}  // namespace detail

// Propagates each ensemble member from M_z = +1 through the exact
// piecewise-constant rotating-frame rotations and reports the final M_z.
// Rows are ordered offsets-outer, scales-inner.
inline std::vector<ProfilePoint> simulate_profile(const Pulse& pulse, const EnsembleSpec& ensemble,
                                                  int threads = 1) {
  if (pulse.segments() < 1) throw std::invalid_argument("Pulse: needs at least one segment");
  const detail::CartesianControls controls = detail::to_cartesian(pulse);
  std::vector<ProfilePoint> out(ensemble.offsets_hz.size() * ensemble.rf_scales.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    const std::size_t oi = i / ensemble.rf_scales.size();
    const std::size_t si = i % ensemble.rf_scales.size();
    const double offset = ensemble.offsets_hz[oi];
    const double scale = ensemble.rf_scales[si];
    out[i] = ProfilePoint{offset, scale, detail::final_mz(controls, offset, scale)};
  });
  return out;
}

// Mean over in-band members of (1 + t * M_z) / 2 with t = -1 for inversion
// bands and +1 for preservation bands; margin members are excluded.
inline double fidelity(const Pulse& pulse, const BandSpec& bands, const EnsembleSpec& ensemble,
                       int threads = 1) {
  detail::require_bands(bands);
  detail::require_coverage(bands, ensemble);
  const std::vector<ProfilePoint> profile = simulate_profile(pulse, ensemble, threads);
  double sum = 0.0;
  std::size_t count = 0;
  for (const ProfilePoint& p : profile) {
    const Band* band = nullptr;
    if (detail::classify(bands, p.offset_hz, &band) != detail::Membership::in_band) continue;
    const double t = (band->target == BandTarget::invert) ? -1.0 : 1.0;
    sum += 0.5 * (1.0 + t * p.mz);
    ++count;
  }
  if (count == 0) throw std::invalid_argument("fidelity: no in-band ensemble members");
  return sum / static_cast<double>(count);
}

struct ControlGradient {
  std::vector<double> d_ux;  // dF / d amplitude_x, per segment
  std::vector<double> d_uy;  // dF / d amplitude_y, per segment
};

// Exact gradient of the fidelity with respect to the per-segment Cartesian
// control amplitudes, by forward propagation of the state and backward
// propagation of the adjoint. For segment rotation vector v the derivative
// uses dR/dv_i = R [J_r(v) e_i]x. Per-member contributions are accumulated
// into fixed slots and reduced serially, so the result is independent of the
// thread count.
inline ControlGradient gradient(const Pulse& pulse, const BandSpec& bands,
                                const EnsembleSpec& ensemble, int threads = 1) {
  detail::require_bands(bands);
  detail::require_coverage(bands, ensemble);
  if (pulse.segments() < 1) throw std::invalid_argument("Pulse: needs at least one segment");
  const detail::CartesianControls controls = detail::to_cartesian(pulse);
  const std::size_t n_seg = controls.ux_hz.size();
  const std::size_t n_members = ensemble.offsets_hz.size() * ensemble.rf_scales.size();

  struct MemberTask {
    double offset = 0.0, scale = 0.0, t = 0.0;
  };
  std::vector<MemberTask> tasks;
  tasks.reserve(n_members);
  for (double off : ensemble.offsets_hz) {
    const Band* band = nullptr;
    if (detail::classify(bands, off, &band) != detail::Membership::in_band) continue;
    const double t = (band->target == BandTarget::invert) ? -1.0 : 1.0;
    for (double s : ensemble.rf_scales) tasks.push_back({off, s, t});
  }
  if (tasks.empty()) throw std::invalid_argument("gradient: no in-band ensemble members");

  std::vector<std::vector<double>> slot_x(tasks.size());
  std::vector<std::vector<double>> slot_y(tasks.size());
  parallel_for(tasks.size(), threads, [&](std::size_t i) {
    const MemberTask& task = tasks[i];
    std::vector<Eigen::Vector3d> states(n_seg + 1);
    states[0] = Eigen::Vector3d(0.0, 0.0, 1.0);
    for (std::size_t k = 0; k < n_seg; ++k) {
      states[k + 1] =
          detail::rotate(detail::segment_rotation(controls, k, task.offset, task.scale), states[k]);
    }
    std::vector<double> gx(n_seg), gy(n_seg);
    Eigen::Vector3d adjoint(0.0, 0.0, 1.0);
    const double weight = 0.5 * task.t;  // d/dMz of (1 + t Mz)/2
    for (std::size_t k = n_seg; k-- > 0;) {
      const Eigen::Vector3d v = detail::segment_rotation(controls, k, task.offset, task.scale);
      adjoint = detail::rotate(-v, adjoint);  // lambda_k^T = lambda_{k+1}^T R_k
      const Eigen::Vector3d grad_v =
          detail::right_jacobian_t(v, states[k].cross(adjoint));
      const double chain = kTwoPi * controls.dt_s * task.scale * weight;
      gx[k] = chain * grad_v.x();
      gy[k] = chain * grad_v.y();
    }
    slot_x[i] = std::move(gx);
    slot_y[i] = std::move(gy);
  });

  ControlGradient g;
  g.d_ux.assign(n_seg, 0.0);
  g.d_uy.assign(n_seg, 0.0);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    for (std::size_t k = 0; k < n_seg; ++k) {
      g.d_ux[k] += slot_x[i][k];
      g.d_uy[k] += slot_y[i][k];
    }
  }
  const double inv = 1.0 / static_cast<double>(tasks.size());
  for (std::size_t k = 0; k < n_seg; ++k) {
    g.d_ux[k] *= inv;
    g.d_uy[k] *= inv;
  }
  return g;
}

struct IterationLogEntry {
  int iteration = 0;
  double fidelity = 0.0;
  double step_hz = 0.0;
};

struct DesignResult {
  Pulse pulse;
  double fidelity = 0.0;
  std::vector<IterationLogEntry> log;
  std::vector<std::string> warnings;
};

namespace detail {

// Scales any (ux, uy) pair whose amplitude exceeds the cap back onto the cap.
inline void clip_amplitude(CartesianControls& c, double cap_hz) {
  for (std::size_t k = 0; k < c.ux_hz.size(); ++k) {
    const double amp = std::hypot(c.ux_hz[k], c.uy_hz[k]);
    if (amp > cap_hz) {
      const double s = cap_hz / amp;
      c.ux_hz[k] *= s;
      c.uy_hz[k] *= s;
    }
  }
}

inline double min_transition_width(const BandSpec& spec) {
  std::vector<Band> sorted = spec.bands;
  std::sort(sorted.begin(), sorted.end(), [](const Band& a, const Band& b) { return a.lo_hz < b.lo_hz; });
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].target == sorted[i - 1].target) continue;
    width = std::min(width, sorted[i].lo_hz - sorted[i - 1].hi_hz + 2.0 * spec.transition_margin_hz);
  }
  return width;
}

}  // namespace detail

// Gradient ascent with backtracking line search from a seeded random start.
// Accepted steps never decrease the fidelity; terminates on the improvement
// tolerance, a vanished step, or the iteration cap. Deterministic given the
// seed.
inline DesignResult design_pulse(const BandSpec& bands, const EnsembleSpec& ensemble, int segments,
                                 double duration_s, const OptimizerConfig& config,
                                 int threads = 1) {
  detail::require_bands(bands);
  detail::require_coverage(bands, ensemble);
  if (segments < 1) throw std::invalid_argument("design_pulse: segments must be >= 1");
  if (!(duration_s > 0.0)) throw std::invalid_argument("design_pulse: duration must be > 0");
  if (config.max_iterations < 1 || !(config.tolerance > 0.0) || !(config.shrink > 0.0) ||
      config.shrink >= 1.0 || !(config.initial_scale_hz > 0.0) || !(config.amplitude_cap_hz > 0.0))
    throw std::invalid_argument("design_pulse: invalid optimizer configuration");

  DesignResult result;
  const double transition = detail::min_transition_width(bands);
  if (std::isfinite(transition) && duration_s * transition < 2.0) {
    std::ostringstream msg;
    msg << "band separation of " << transition << " Hz may not be resolvable within "
        << duration_s << " s (duration * gap = " << duration_s * transition << " < 2)";
    result.warnings.push_back(msg.str());
  }

  detail::CartesianControls controls;
  controls.dt_s = duration_s / segments;
  controls.ux_hz.assign(static_cast<std::size_t>(segments), 0.0);
  controls.uy_hz.assign(static_cast<std::size_t>(segments), 0.0);

  auto eval = [&](const detail::CartesianControls& c) {
    return fidelity(detail::to_polar(c), bands, ensemble, threads);
  };

  // A zero pulse is already optimal when nothing needs inverting.
  const double zero_fidelity = eval(controls);
  result.log.push_back({0, zero_fidelity, 0.0});
  if (zero_fidelity >= 1.0 - 1e-12) {
    result.pulse = detail::to_polar(controls);
    result.fidelity = zero_fidelity;
    return result;
  }

  Rng rng(config.seed);
  for (std::size_t k = 0; k < controls.ux_hz.size(); ++k) {
    controls.ux_hz[k] = rng.uniform(-config.initial_scale_hz, config.initial_scale_hz);
    controls.uy_hz[k] = rng.uniform(-config.initial_scale_hz, config.initial_scale_hz);
  }
  detail::clip_amplitude(controls, config.amplitude_cap_hz);
  double current = eval(controls);

  double step = 0.0;  // Hz per unit gradient; sized on the first iteration
  int stalled = 0;
  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    const ControlGradient g = gradient(detail::to_polar(controls), bands, ensemble, threads);
    double g_inf = 0.0;
    for (std::size_t k = 0; k < g.d_ux.size(); ++k)
      g_inf = std::max({g_inf, std::abs(g.d_ux[k]), std::abs(g.d_uy[k])});
    if (g_inf == 0.0) break;
    if (step == 0.0) step = config.initial_scale_hz / g_inf;

    bool accepted = false;
    double trial_fidelity = current;
    while (step * g_inf > 1e-9) {
      detail::CartesianControls trial = controls;
      for (std::size_t k = 0; k < trial.ux_hz.size(); ++k) {
        trial.ux_hz[k] += step * g.d_ux[k];
        trial.uy_hz[k] += step * g.d_uy[k];
      }
      detail::clip_amplitude(trial, config.amplitude_cap_hz);
      trial_fidelity = eval(trial);
      if (trial_fidelity > current) {
        controls = std::move(trial);
        accepted = true;
        break;
      }
      step *= config.shrink;
    }
    if (!accepted) break;

    const double improvement = trial_fidelity - current;
    current = trial_fidelity;
    result.log.push_back({iter, current, step});
    step *= 1.6;  // regrow after a successful step
    if (improvement < config.tolerance) {
      if (++stalled >= 3) break;
    } else {
      stalled = 0;
    }
  }

  if (current < 0.9) {
    result.warnings.push_back("fidelity plateaued below 0.9; the band structure may be infeasible");
  }
  result.pulse = detail::to_polar(controls);
  result.fidelity = current;
  return result;
}

// --------------------------------------------------------------------------
// Tabular export / import.

inline void write_pulse_csv(std::ostream& out, const Pulse& pulse) {
  out << "segment,duration_s,amplitude_hz,phase_rad\n";
  char buf[160];
  for (int k = 0; k < pulse.segments(); ++k) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g,%.12g\n", k, pulse.segment_duration_s,
                  pulse.amplitude_hz[static_cast<std::size_t>(k)],
                  pulse.phase_rad[static_cast<std::size_t>(k)]);
    out << buf;
  }
}

inline Pulse read_pulse_csv(std::istream& in) {
  Pulse pulse;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "segment,duration_s,amplitude_hz,phase_rad")
        throw std::runtime_error("pulse file: bad header at line " + std::to_string(line_no));
      header_seen = true;
      continue;
    }
    std::istringstream ss(line);
    std::string f0, f1, f2, f3;
    if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2, ',') ||
        !std::getline(ss, f3))
      throw std::runtime_error("pulse file: bad row at line " + std::to_string(line_no));
    pulse.segment_duration_s = std::stod(f1);
    pulse.amplitude_hz.push_back(std::stod(f2));
    pulse.phase_rad.push_back(std::stod(f3));
  }
  if (pulse.segments() < 1) throw std::runtime_error("pulse file: no segments");
  return pulse;
}

inline void write_profile_csv(std::ostream& out, const std::vector<ProfilePoint>& profile) {
  out << "offset_hz,rf_scale,mz\n";
  char buf[120];
  for (const ProfilePoint& p : profile) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g\n", p.offset_hz, p.rf_scale, p.mz);
    out << buf;
  }
}

}  // namespace starcool::pulse
