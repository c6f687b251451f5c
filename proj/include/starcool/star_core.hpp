#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace starcool {

inline constexpr double kHbar = 1.054571817e-34;      // J s
inline constexpr double kBoltzmann = 1.380649e-23;    // J / K

// Static description of a star register: one computation qubit uniformly
// coupled to n_reset magnetically equivalent reset qubits.
struct StarSystem {
  int n_reset = 1;          // N
  double gamma = 1.0;       // gyromagnetic ratio quotient, dimensionless
  double t1_comp = 1.0;     // T1 of the computation qubit, seconds (+inf allowed)
  double t1_reset = 1.0;    // T1 of the reset qubits, seconds
  double j_rc = 0.0;        // coupling constant, Hz
  double temperature = 298.0;  // ambient sample temperature, Kelvin
};

// Hard validity checks. Throws std::invalid_argument on violation.
inline void require_valid(const StarSystem& sys) {
  if (sys.n_reset < 1) throw std::invalid_argument("StarSystem: n_reset must be >= 1");
  if (!(sys.gamma >= 1.0)) throw std::invalid_argument("StarSystem: gamma must be >= 1");
  if (!(sys.t1_comp > 0.0)) throw std::invalid_argument("StarSystem: t1_comp must be > 0");
  if (!(sys.t1_reset > 0.0) || std::isinf(sys.t1_reset))
    throw std::invalid_argument("StarSystem: t1_reset must be positive and finite");
  if (sys.j_rc < 0.0) throw std::invalid_argument("StarSystem: j_rc must be >= 0");
  if (!(sys.temperature > 0.0)) throw std::invalid_argument("StarSystem: temperature must be > 0");
}

// Soft model-validity checks. The population model assumes the reset qubits
// re-thermalize much faster than the computation qubit decays.
inline std::vector<std::string> model_warnings(const StarSystem& sys) {
  std::vector<std::string> out;
  if (!(sys.t1_reset < sys.t1_comp)) {
    out.push_back("t1_reset >= t1_comp: the time-scale separation the model relies on does not hold");
  }
  return out;
}

// Purity of the thermal state of a two-level system at temperature T.
struct ThermalConfig {
  double epsilon = 0.0;      // hbar * omega / (2 k T)
  double omega_comp = 0.0;   // rad/s

  static ThermalConfig from_frequency(double omega_comp, double temperature_k) {
    if (!(temperature_k > 0.0)) throw std::invalid_argument("ThermalConfig: temperature must be > 0");
    return ThermalConfig{kHbar * omega_comp / (2.0 * kBoltzmann * temperature_k), omega_comp};
  }
};

// Symmetry-reduced population state. p0[j] and p1[j] are the per-level
// populations of the subspaces with the computation qubit in |0> and |1>,
// where j counts reset qubits in |1>. Level j carries binomial degeneracy
// C(N,j); the vectors are degeneracy-unexpanded. `background` records the
// uniform offset baked into the populations; all observables are invariant
// under shifting every entry by a constant.
struct StarState {
  std::vector<double> p0;
  std::vector<double> p1;
  double background = 0.0;

  int n_reset() const { return static_cast<int>(p0.size()) - 1; }
};

// Swap factors eta_j in [0,1] for one AC step; entry j mixes the pair
// (p0[j], p1[N-j]).
struct SwapProfile {
  std::vector<double> eta;
};

struct HbacStep {
  SwapProfile swap;
  double tau_hb = 0.0;  // seconds
};

struct HbacSchedule {
  std::vector<HbacStep> steps;

  int iterations() const { return static_cast<int>(steps.size()); }

  static HbacSchedule uniform(int iterations, SwapProfile profile, double tau_hb) {
    if (iterations < 0) throw std::invalid_argument("HbacSchedule: iterations must be >= 0");
    HbacSchedule s;
    s.steps.assign(static_cast<std::size_t>(iterations), HbacStep{profile, tau_hb});
    return s;
  }
};

struct CoolingRow {
  int n = 0;
  double magnetization = 1.0;
  double spin_temperature_k = 0.0;
};

struct CoolingTrace {
  std::vector<CoolingRow> rows;
};

// Row of binomial coefficients C(n, 0..n) as doubles. Exact for n <= 56.
inline std::vector<double> binomial_row(int n) {
  if (n < 0) throw std::invalid_argument("binomial_row: n must be >= 0");
  std::vector<double> c(static_cast<std::size_t>(n) + 1);
  c[0] = 1.0;
  for (int j = 0; j < n; ++j) c[static_cast<std::size_t>(j) + 1] = c[j] * double(n - j) / double(j + 1);
  return c;
}

namespace detail {

inline void require_state(const StarState& s) {
  if (s.p0.size() != s.p1.size())
    throw std::invalid_argument("StarState: p0 and p1 differ in length");
  if (s.p0.empty()) throw std::invalid_argument("StarState: empty population vectors");
}

inline void require_profile(const StarState& s, const SwapProfile& profile) {
  if (profile.eta.size() != s.p0.size())
    throw std::invalid_argument("SwapProfile: length must be N+1");
  for (double e : profile.eta) {
    if (!(e >= 0.0 && e <= 1.0))
      throw std::invalid_argument("SwapProfile: eta entries must lie in [0,1]");
  }
}

}  // namespace detail

// Degeneracy-weighted population of one subspace, sum_j C(N,j) p[j].
inline double subspace_total(const std::vector<double>& p) {
  const int n = static_cast<int>(p.size()) - 1;
  const std::vector<double> c = binomial_row(n);
  double total = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) total += c[j] * p[j];
  return total;
}

// Relative magnetization of the computation qubit,
// sum_j C(N,j) (p0[j] - p1[j]) / 2^N. Equals 1 at thermal equilibrium.
inline double magnetization(const StarState& s) {
  detail::require_state(s);
  const int n = s.n_reset();
  const std::vector<double> c = binomial_row(n);
  double diff = 0.0;
  for (std::size_t j = 0; j < s.p0.size(); ++j) diff += c[j] * (s.p0[j] - s.p1[j]);
  return diff / std::ldexp(1.0, n);
}

// Thermal-equilibrium populations: p0[j] = b + 1 + gamma (N - j), p1[j] = p0[j] - 1.
// Intra-subspace adjacent differences are gamma, inter-subspace differences 1,
// so the magnetization of the result is exactly 1.
inline StarState equilibrium_state(const StarSystem& sys, double background = 0.0) {
  require_valid(sys);
  const int n = sys.n_reset;
  StarState s;
  s.background = background;
  s.p0.resize(static_cast<std::size_t>(n) + 1);
  s.p1.resize(static_cast<std::size_t>(n) + 1);
  for (int j = 0; j <= n; ++j) {
    const double bj = background + 1.0 + sys.gamma * double(n - j);
    s.p0[static_cast<std::size_t>(j)] = bj;
    s.p1[static_cast<std::size_t>(j)] = bj - 1.0;
  }
  return s;
}

// High-temperature spin temperature T / M. Requires positive magnetization.
inline double spin_temperature(double m_rel, double ambient_k) {
  if (!(m_rel > 0.0)) throw std::domain_error("spin_temperature: magnetization must be > 0");
  return ambient_k / m_rel;
}

// Boltzmann spin temperature from the level populations of a two-level system:
// rho11/rho00 = exp(-hbar omega0 / (k T)), so T = -hbar omega0 / (k ln(rho11/rho00)).
// With rho11 < rho00 and omega0 > 0 this is positive. Equal populations map to
// +infinity (infinite-temperature sentinel), not an exception.
inline double exact_spin_temperature(double rho00, double rho11, double omega0) {
  if (!(rho00 > 0.0) || !(rho11 > 0.0))
    throw std::domain_error("exact_spin_temperature: populations must be > 0");
  if (rho11 == rho00) return std::numeric_limits<double>::infinity();
  return -kHbar * omega0 / (kBoltzmann * std::log(rho11 / rho00));
}

// Ideal step profile: eta_j = 1 for j > N - m, 0 otherwise.
inline SwapProfile swap_profile_from_m(int n_reset, int m) {
  if (m < 0 || m > n_reset)
    throw std::invalid_argument("swap_profile_from_m: m must satisfy 0 <= m <= N");
  SwapProfile p;
  p.eta.assign(static_cast<std::size_t>(n_reset) + 1, 0.0);
  for (int j = n_reset - m + 1; j <= n_reset; ++j) p.eta[static_cast<std::size_t>(j)] = 1.0;
  return p;
}

// One AC step in the effective-map picture: each pair (p0[j], p1[N-j]) is
// convexly mixed with weight eta_j, all reads before any write. Pair sums are
// conserved exactly, and since C(N,j) = C(N,N-j) so is the total
// degeneracy-weighted population.
inline StarState apply_ac(const StarState& s, const SwapProfile& profile) {
  detail::require_state(s);
  detail::require_profile(s, profile);
  const int n = s.n_reset();
  StarState out = s;
  for (int j = 0; j <= n; ++j) {
    const double e = profile.eta[static_cast<std::size_t>(j)];
    const double a = s.p0[static_cast<std::size_t>(j)];
    const double b = s.p1[static_cast<std::size_t>(n - j)];
    out.p0[static_cast<std::size_t>(j)] = (1.0 - e) * a + e * b;
    out.p1[static_cast<std::size_t>(n - j)] = (1.0 - e) * b + e * a;
  }
  return out;
}

// Explicit two-step AC, for comparison with the effective map: first the full
// population reversal of S1 (assumed perfect), then the computation-qubit
// transition swap p0[j] <-> p1[j] with weight eta_j for j > the split the
// profile encodes. Non-swapped S1 levels stay reversed here, which is where
// this differs from apply_ac.
inline StarState apply_ac_two_step(const StarState& s, const SwapProfile& profile) {
  detail::require_state(s);
  detail::require_profile(s, profile);
  const int n = s.n_reset();
  StarState out = s;
  for (int j = 0; j <= n; ++j) out.p1[static_cast<std::size_t>(j)] = s.p1[static_cast<std::size_t>(n - j)];
  const std::vector<double> inverted = out.p1;
  for (int j = 0; j <= n; ++j) {
    const double e = profile.eta[static_cast<std::size_t>(j)];
    if (e == 0.0) continue;
    const double a = out.p0[static_cast<std::size_t>(j)];
    const double b = inverted[static_cast<std::size_t>(j)];
    out.p0[static_cast<std::size_t>(j)] = (1.0 - e) * a + e * b;
    out.p1[static_cast<std::size_t>(j)] = (1.0 - e) * b + e * a;
  }
  return out;
}

// Relaxation of the reset-qubit transitions within each subspace over time tau.
// Adjacent differences relax toward gamma with time constant t1_reset while the
// degeneracy-weighted subspace total is held fixed; closed form: relax the N
// differences, fix p[N] from conservation, reconstruct by cumulative sums.
// Conserves each subspace total exactly, hence the magnetization.
inline StarState relax_intra(const StarState& s, double tau, const StarSystem& sys) {
  detail::require_state(s);
  if (tau < 0.0) throw std::invalid_argument("relax_intra: tau must be >= 0");
  const int n = s.n_reset();
  const std::vector<double> c = binomial_row(n);
  const double f = std::exp(-tau / sys.t1_reset);
  const double two_n = std::ldexp(1.0, n);

  StarState out = s;
  auto relax_subspace = [&](const std::vector<double>& p, std::vector<double>& dst) {
    // d[j](tau) = gamma + (d[j](0) - gamma) e^{-tau/T1R}
    std::vector<double> d(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
      const double d0 = p[static_cast<std::size_t>(j)] - p[static_cast<std::size_t>(j) + 1];
      d[static_cast<std::size_t>(j)] = sys.gamma + (d0 - sys.gamma) * f;
    }
    double total = 0.0;
    for (int j = 0; j <= n; ++j) total += c[static_cast<std::size_t>(j)] * p[static_cast<std::size_t>(j)];
    // p[j] = p[N] + sum_{i>=j} d[i]; conservation pins p[N].
    std::vector<double> suffix(static_cast<std::size_t>(n) + 1, 0.0);
    for (int j = n - 1; j >= 0; --j)
      suffix[static_cast<std::size_t>(j)] = suffix[static_cast<std::size_t>(j) + 1] + d[static_cast<std::size_t>(j)];
    double weighted_suffix = 0.0;
    for (int j = 0; j <= n; ++j) weighted_suffix += c[static_cast<std::size_t>(j)] * suffix[static_cast<std::size_t>(j)];
    const double p_last = (total - weighted_suffix) / two_n;
    for (int j = 0; j <= n; ++j) dst[static_cast<std::size_t>(j)] = p_last + suffix[static_cast<std::size_t>(j)];
  };
  relax_subspace(s.p0, out.p0);
  relax_subspace(s.p1, out.p1);
  return out;
}

// Relaxation of the computation-qubit transitions over time tau: the per-level
// difference p0[j] - p1[j] relaxes toward 1 with time constant t1_comp while
// the per-level sum p0[j] + p1[j] is conserved.
inline StarState relax_inter(const StarState& s, double tau, const StarSystem& sys) {
  detail::require_state(s);
  if (tau < 0.0) throw std::invalid_argument("relax_inter: tau must be >= 0");
  const double f = std::exp(-tau / sys.t1_comp);
  StarState out = s;
  for (std::size_t j = 0; j < s.p0.size(); ++j) {
    const double sum = s.p0[j] + s.p1[j];
    const double diff = 1.0 + (s.p0[j] - s.p1[j] - 1.0) * f;
    out.p0[j] = 0.5 * (sum + diff);
    out.p1[j] = 0.5 * (sum - diff);
  }
  return out;
}

enum class AcModel { effective, two_step };

// One full HBAC iteration: AC swap, then the heat-bath delay applied as
// intra-subspace relaxation followed by inter-subspace relaxation over the
// same tau_hb.
inline StarState hbac_iterate(const StarState& s, const SwapProfile& profile, double tau_hb,
                              const StarSystem& sys, AcModel model = AcModel::effective) {
  StarState out = (model == AcModel::effective) ? apply_ac(s, profile) : apply_ac_two_step(s, profile);
  out = relax_intra(out, tau_hb, sys);
  out = relax_inter(out, tau_hb, sys);
  return out;
}

// Runs a schedule from thermal equilibrium. Row 0 is (0, 1, T); row n holds the
// magnetization and spin temperature after n full iterations. Rows store
// temperature / M_n directly, so a trace that drives the qubit through zero
// polarization (possible for strongly imperfect swap profiles) reports a
// negative spin temperature instead of failing.
inline CoolingTrace run_schedule(const StarSystem& sys, const HbacSchedule& schedule,
                                 double background = 0.0, AcModel model = AcModel::effective) {
  require_valid(sys);
  StarState state = equilibrium_state(sys, background);
  CoolingTrace trace;
  trace.rows.reserve(schedule.steps.size() + 1);
  trace.rows.push_back({0, 1.0, sys.temperature});
  int n = 0;
  for (const HbacStep& step : schedule.steps) {
    state = hbac_iterate(state, step.swap, step.tau_hb, sys, model);
    const double m = magnetization(state);
    trace.rows.push_back({++n, m, sys.temperature / m});
  }
  return trace;
}

struct SteadyState {
  StarState state;
  double m_inf = 0.0;
};

// Fixed point of one HBAC iteration. The iteration is affine on the stacked
// population vector, v -> A v + c; its fixed points solve (I - A) v = c. The
// uniform background shift always lies in the null space of I - A, so the
// system is solved in the minimum-norm sense and any further rank deficiency
// is reported as no-unique-fixed-point (the magnetization would not be
// determined). Applying hbac_iterate to the result moves the magnetization by
// less than 1e-10.
inline SteadyState steady_state(const StarSystem& sys, const SwapProfile& profile, double tau_hb) {
  require_valid(sys);
  const int n = sys.n_reset;
  const int dim = 2 * (n + 1);

  auto iterate_stacked = [&](const Eigen::VectorXd& v) {
    StarState s;
    s.p0.assign(v.data(), v.data() + n + 1);
    s.p1.assign(v.data() + n + 1, v.data() + dim);
    const StarState it = hbac_iterate(s, profile, tau_hb, sys);
    Eigen::VectorXd out(dim);
    for (int j = 0; j <= n; ++j) {
      out(j) = it.p0[static_cast<std::size_t>(j)];
      out(n + 1 + j) = it.p1[static_cast<std::size_t>(j)];
    }
    return out;
  };

  const Eigen::VectorXd c = iterate_stacked(Eigen::VectorXd::Zero(dim));
  Eigen::MatrixXd a(dim, dim);
  for (int i = 0; i < dim; ++i) {
    a.col(i) = iterate_stacked(Eigen::VectorXd::Unit(dim, i)) - c;
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(dim, dim) - a;
  // The threshold must be set before compute(): it participates in building
  // the rank-revealing factorization, not only in rank queries.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod;
  cod.setThreshold(1e-12);
  cod.compute(m);
  if (cod.rank() < dim - 1) {
    throw std::domain_error("steady_state: no unique fixed point (iteration map is degenerate)");
  }
  const Eigen::VectorXd v = cod.solve(c);

  SteadyState result;
  result.state.p0.assign(v.data(), v.data() + n + 1);
  result.state.p1.assign(v.data() + n + 1, v.data() + dim);
  result.state.background = 0.0;
  result.m_inf = magnetization(result.state);

  const double moved = magnetization(hbac_iterate(result.state, profile, tau_hb, sys));
  if (std::abs(moved - result.m_inf) > 1e-9) {
    throw std::domain_error("steady_state: fixed-point residual too large, no unique fixed point");
  }
  return result;
}

}  // namespace starcool
