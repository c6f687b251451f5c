#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "starcool/parallel.hpp"
#include "starcool/rng.hpp"
#include "starcool/star_core.hpp"

namespace starcool::sweeps {

// Parse failure in a user-supplied text file; carries a 1-based line number.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, int line) : std::runtime_error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// How swap factors are produced for a given (N, m) split.
struct EtaPolicy {
  enum class Kind { ideal, two_level, randomized };
  Kind kind = Kind::ideal;
  double eta_lo = 0.0;  // two_level value below the split
  double eta_hi = 1.0;  // two_level value above the split
  double lo_min = 0.0, lo_max = 0.2;  // randomized draw ranges
  double hi_min = 0.8, hi_max = 1.0;
  std::uint64_t seed = 1;
};

// m < 0 selects floor(N/2).
inline int resolve_m(int m, int n_reset) {
  const int value = (m < 0) ? n_reset / 2 : m;
  if (value > n_reset) throw std::invalid_argument("schedule: m must satisfy 0 <= m <= N");
  return value;
}

inline SwapProfile make_profile(const EtaPolicy& policy, int n_reset, int m,
                                std::uint64_t seed) {
  const int split = n_reset - resolve_m(m, n_reset);
  SwapProfile p;
  p.eta.assign(static_cast<std::size_t>(n_reset) + 1, 0.0);
  switch (policy.kind) {
    case EtaPolicy::Kind::ideal:
      for (int j = split + 1; j <= n_reset; ++j) p.eta[static_cast<std::size_t>(j)] = 1.0;
      break;
    case EtaPolicy::Kind::two_level:
      for (int j = 0; j <= n_reset; ++j)
        p.eta[static_cast<std::size_t>(j)] = (j > split) ? policy.eta_hi : policy.eta_lo;
      break;
    case EtaPolicy::Kind::randomized: {
      Rng rng(seed);
      for (int j = 0; j <= n_reset; ++j) {
        p.eta[static_cast<std::size_t>(j)] = (j > split)
                                                 ? rng.uniform(policy.hi_min, policy.hi_max)
                                                 : rng.uniform(policy.lo_min, policy.lo_max);
      }
      break;
    }
  }
  return p;
}

// Uniform schedule recipe; expands to per-iteration entries for a concrete N.
// Optional per-iteration m / tau lists override the uniform values.
struct ScheduleTemplate {
  int iterations = 15;
  int m = -1;          // -1 = floor(N/2)
  double tau_hb = 0.0;
  EtaPolicy eta;
  std::vector<int> m_per_iteration;
  std::vector<double> tau_per_iteration;
};

inline HbacSchedule expand(const ScheduleTemplate& tpl, int n_reset, std::uint64_t seed) {
  if (tpl.iterations < 0) throw std::invalid_argument("schedule: iterations must be >= 0");
  if (!tpl.m_per_iteration.empty() &&
      tpl.m_per_iteration.size() != static_cast<std::size_t>(tpl.iterations))
    throw std::invalid_argument("schedule: m_per_iteration length must equal iterations");
  if (!tpl.tau_per_iteration.empty() &&
      tpl.tau_per_iteration.size() != static_cast<std::size_t>(tpl.iterations))
    throw std::invalid_argument("schedule: tau_per_iteration length must equal iterations");
  HbacSchedule schedule;
  schedule.steps.reserve(static_cast<std::size_t>(tpl.iterations));
  for (int i = 0; i < tpl.iterations; ++i) {
    const int m = tpl.m_per_iteration.empty() ? tpl.m : tpl.m_per_iteration[static_cast<std::size_t>(i)];
    const double tau =
        tpl.tau_per_iteration.empty() ? tpl.tau_hb : tpl.tau_per_iteration[static_cast<std::size_t>(i)];
    if (tau < 0.0) throw std::invalid_argument("schedule: tau_hb must be >= 0");
    // Same seed for every iteration: a randomized profile models a static
    // pulse imperfection, so iterations with equal m share one draw.
    schedule.steps.push_back({make_profile(tpl.eta, n_reset, m, seed), tau});
  }
  return schedule;
}

// Desk-scale defaults for a 37-spin star register (36 proton reset qubits
// around a silicon computation qubit).
inline StarSystem ttss_like_system() {
  StarSystem sys;
  sys.n_reset = 36;
  sys.gamma = 5.03;
  sys.t1_comp = 150.0;
  sys.t1_reset = 4.0;
  sys.j_rc = 6.6;
  sys.temperature = 298.0;
  return sys;
}

inline ScheduleTemplate ttss_like_schedule() {
  ScheduleTemplate tpl;
  tpl.iterations = 15;
  tpl.m = 15;
  tpl.tau_hb = 9.5;
  return tpl;
}

enum class SweepAxis { n_reset, m, tau_hb, gamma };

inline const char* axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::n_reset: return "n_reset";
    case SweepAxis::m: return "m";
    case SweepAxis::tau_hb: return "tau_hb";
    case SweepAxis::gamma: return "gamma";
  }
  return "?";
}

inline SweepAxis axis_from_name(const std::string& name) {
  if (name == "n_reset") return SweepAxis::n_reset;
  if (name == "m") return SweepAxis::m;
  if (name == "tau_hb") return SweepAxis::tau_hb;
  if (name == "gamma") return SweepAxis::gamma;
  throw std::invalid_argument("sweep: unknown axis '" + name + "'");
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::m;
  std::vector<double> grid;     // strictly increasing
  StarSystem system;
  ScheduleTemplate schedule;
  int metric = 15;              // iteration index whose magnetization is reported
};

struct SweepRow {
  double value = 0.0;
  double m_metric = 0.0;
};

namespace detail {

inline int as_integer_grid_value(double v, const char* what) {
  const double r = std::round(v);
  if (std::abs(v - r) > 1e-9)
    throw std::invalid_argument(std::string("sweep: ") + what + " grid values must be integers");
  return static_cast<int>(r);
}

inline void require_spec(const SweepSpec& spec) {
  if (spec.grid.empty()) throw std::invalid_argument("sweep: grid must be nonempty");
  for (std::size_t i = 1; i < spec.grid.size(); ++i) {
    if (!(spec.grid[i] > spec.grid[i - 1]))
      throw std::invalid_argument("sweep: grid must be strictly increasing");
  }
  if (spec.metric < 0 || spec.metric > spec.schedule.iterations)
    throw std::invalid_argument("sweep: metric index must lie within the schedule");
}

}  // namespace detail

// Evaluates one grid point. Independent of every other point; randomized eta
// draws take a seed derived from the point index so parallel and serial runs
// agree bit for bit.
inline double evaluate_point(const SweepSpec& spec, std::size_t index) {
  const double value = spec.grid[index];
  StarSystem sys = spec.system;
  ScheduleTemplate tpl = spec.schedule;
  switch (spec.axis) {
    case SweepAxis::n_reset:
      sys.n_reset = detail::as_integer_grid_value(value, "n_reset");
      break;
    case SweepAxis::m:
      tpl.m = detail::as_integer_grid_value(value, "m");
      tpl.m_per_iteration.clear();
      break;
    case SweepAxis::tau_hb:
      tpl.tau_hb = value;
      tpl.tau_per_iteration.clear();
      break;
    case SweepAxis::gamma:
      sys.gamma = value;
      break;
  }
  const HbacSchedule schedule = expand(tpl, sys.n_reset, derive_seed(tpl.eta.seed, index));
  const CoolingTrace trace = run_schedule(sys, schedule);
  return trace.rows[static_cast<std::size_t>(spec.metric)].magnetization;
}

inline std::vector<SweepRow> grid_sweep(const SweepSpec& spec, int threads = 1) {
  detail::require_spec(spec);
  std::vector<SweepRow> rows(spec.grid.size());
  parallel_for(spec.grid.size(), threads, [&](std::size_t i) {
    rows[i] = SweepRow{spec.grid[i], evaluate_point(spec, i)};
  });
  return rows;
}

// Argmax over the grid; ties go to the smaller axis value.
inline std::pair<double, double> optimize_axis(const SweepSpec& spec, int threads = 1) {
  const std::vector<SweepRow> rows = grid_sweep(spec, threads);
  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].m_metric > rows[best].m_metric) best = i;
  }
  return {rows[best].value, rows[best].m_metric};
}

// ---------------------------------------------------------------------------
// Swap-factor estimation from measured magnetization curves.

struct EtaFitProblem {
  enum class Parametrization { two_level, per_j };

  std::vector<std::pair<int, double>> measured;  // (n, M_n), n >= 1
  ScheduleTemplate schedule;                     // tau_hb and the m split
  Parametrization parametrization = Parametrization::two_level;
  double smoothness = 0.0;       // per_j roughness penalty weight
  int max_evaluations = 40000;
  double step_tolerance = 1e-8;  // coordinate step below which a start is converged
  int random_starts = 6;
  std::uint64_t seed = 1;
};

struct EtaFitResult {
  SwapProfile profile;
  double residual = 0.0;   // sum of squared trace mismatches at the optimum
  bool converged = false;  // false when the evaluation cap cut the search short
  int evaluations = 0;
};

namespace detail {

struct FitObjective {
  const EtaFitProblem& problem;
  const StarSystem& sys;
  const std::vector<std::pair<int, double>>& sorted;  // measured, sorted by n
  int split;        // eta_j = hi for j > split
  int max_n;

  double operator()(const std::vector<double>& params) const {
    SwapProfile profile;
    profile.eta.assign(static_cast<std::size_t>(sys.n_reset) + 1, 0.0);
    if (problem.parametrization == EtaFitProblem::Parametrization::two_level) {
      for (int j = 0; j <= sys.n_reset; ++j)
        profile.eta[static_cast<std::size_t>(j)] = (j > split) ? params[1] : params[0];
    } else {
      profile.eta = params;
    }
    StarState state = equilibrium_state(sys);
    std::size_t next = 0;
    double residual = 0.0;
    for (int n = 1; n <= max_n; ++n) {
      state = hbac_iterate(state, profile, problem.schedule.tau_hb, sys);
      const double m = magnetization(state);
      while (next < sorted.size() && sorted[next].first == n) {
        const double r = m - sorted[next].second;
        residual += r * r;
        ++next;
      }
    }
    if (problem.smoothness > 0.0 &&
        problem.parametrization == EtaFitProblem::Parametrization::per_j) {
      for (std::size_t j = 1; j < profile.eta.size(); ++j) {
        const double d = profile.eta[j] - profile.eta[j - 1];
        residual += problem.smoothness * d * d;
      }
    }
    return residual;
  }
};

}  // namespace detail

// Bounded least-squares fit of swap factors by multi-start coordinate
// refinement. Derivative free: each coordinate is probed at +/- the current
// step and the best improvement is kept; the step halves when a full pass
// stalls. The ideal profile is always among the starts, so the returned
// residual never exceeds the ideal profile's residual on the same data.
inline EtaFitResult fit_eta(const EtaFitProblem& problem, const StarSystem& sys) {
  require_valid(sys);
  if (problem.measured.size() < 2)
    throw std::invalid_argument("fit_eta: need at least 2 measured points");
  int max_n = 0;
  for (const auto& [n, m] : problem.measured) {
    if (n < 1) throw std::invalid_argument("fit_eta: iteration indices must be >= 1");
    if (!(m > 0.0)) throw std::invalid_argument("fit_eta: magnetizations must be positive");
    max_n = std::max(max_n, n);
  }
  const int n_params = (problem.parametrization == EtaFitProblem::Parametrization::per_j)
                           ? sys.n_reset + 1
                           : 2;
  if (problem.parametrization == EtaFitProblem::Parametrization::per_j &&
      static_cast<int>(problem.measured.size()) < sys.n_reset)
    throw std::invalid_argument("fit_eta: per-j parametrization needs at least N data points");

  const int split = sys.n_reset - resolve_m(problem.schedule.m, sys.n_reset);
  std::vector<std::pair<int, double>> sorted = problem.measured;
  std::sort(sorted.begin(), sorted.end());
  detail::FitObjective objective{problem, sys, sorted, split, max_n};

  // Deterministic starts first (the ideal profile among them), then seeded
  // random ones.
  std::vector<std::vector<double>> starts;
  auto expand_start = [&](double lo, double hi) {
    std::vector<double> p(static_cast<std::size_t>(n_params), lo);
    if (n_params == 2) {
      p[1] = hi;
    } else {
      for (int j = 0; j <= sys.n_reset; ++j)
        p[static_cast<std::size_t>(j)] = (j > split) ? hi : lo;
    }
    return p;
  };
  starts.push_back(expand_start(0.0, 1.0));  // ideal
  starts.push_back(expand_start(0.0, 0.0));
  starts.push_back(expand_start(0.5, 0.5));
  Rng rng(problem.seed);
  for (int s = 0; s < problem.random_starts; ++s) {
    std::vector<double> p(static_cast<std::size_t>(n_params));
    for (auto& v : p) v = rng.uniform01();
    starts.push_back(std::move(p));
  }

  int evaluations = 0;
  bool converged = true;
  std::vector<double> best_params;
  double best_residual = std::numeric_limits<double>::infinity();

  for (const auto& start : starts) {
    std::vector<double> params = start;
    double residual = objective(params);
    ++evaluations;
    double step = 0.25;
    while (step > problem.step_tolerance) {
      if (evaluations >= problem.max_evaluations) {
        converged = false;
        break;
      }
      bool improved = false;
      for (int k = 0; k < n_params && evaluations < problem.max_evaluations; ++k) {
        const double original = params[static_cast<std::size_t>(k)];
        double best_value = original;
        for (const double trial :
             {std::clamp(original + step, 0.0, 1.0), std::clamp(original - step, 0.0, 1.0)}) {
          if (trial == original) continue;
          params[static_cast<std::size_t>(k)] = trial;
          const double r = objective(params);
          ++evaluations;
          if (r < residual) {
            residual = r;
            best_value = trial;
          }
        }
        if (best_value != original) improved = true;
        params[static_cast<std::size_t>(k)] = best_value;
      }
      if (!improved) step *= 0.5;
    }
    if (residual < best_residual) {
      best_residual = residual;
      best_params = params;
    }
  }

  EtaFitResult result;
  result.profile.eta.assign(static_cast<std::size_t>(sys.n_reset) + 1, 0.0);
  if (problem.parametrization == EtaFitProblem::Parametrization::two_level) {
    for (int j = 0; j <= sys.n_reset; ++j)
      result.profile.eta[static_cast<std::size_t>(j)] = (j > split) ? best_params[1] : best_params[0];
  } else {
    result.profile.eta = best_params;
  }
  // Report the pure trace mismatch, without the smoothness term.
  const double penalty = [&] {
    if (problem.smoothness <= 0.0 ||
        problem.parametrization != EtaFitProblem::Parametrization::per_j)
      return 0.0;
    double p = 0.0;
    for (std::size_t j = 1; j < result.profile.eta.size(); ++j) {
      const double d = result.profile.eta[j] - result.profile.eta[j - 1];
      p += problem.smoothness * d * d;
    }
    return p;
  }();
  result.residual = best_residual - penalty;
  result.converged = converged;
  result.evaluations = evaluations;
  return result;
}

// Reads measured (n, magnetization) pairs. Expected header `n,magnetization`;
// blank lines and lines starting with `#` are ignored.
inline std::vector<std::pair<int, double>> read_measured_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open data file: " + path);
  std::vector<std::pair<int, double>> rows;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string trimmed = line;
    const auto hash = trimmed.find('#');
    if (hash != std::string::npos) trimmed.erase(hash);
    while (!trimmed.empty() && (trimmed.back() == ' ' || trimmed.back() == '\t' || trimmed.back() == '\r'))
      trimmed.pop_back();
    std::size_t begin = trimmed.find_first_not_of(" \t");
    if (begin == std::string::npos) continue;
    trimmed = trimmed.substr(begin);
    if (!header_seen) {
      std::string compact;
      for (char ch : trimmed)
        if (ch != ' ' && ch != '\t') compact.push_back(ch);
      if (compact != "n,magnetization")
        throw ParseError("expected header 'n,magnetization'", line_no);
      header_seen = true;
      continue;
    }
    std::istringstream ss(trimmed);
    std::string n_field, m_field;
    if (!std::getline(ss, n_field, ',') || !std::getline(ss, m_field))
      throw ParseError("expected 'n,magnetization' row", line_no);
    try {
      rows.emplace_back(std::stoi(n_field), std::stod(m_field));
    } catch (const std::exception&) {
      throw ParseError("malformed numeric row", line_no);
    }
  }
  if (!header_seen) throw ParseError("missing header 'n,magnetization'", line_no);
  return rows;
}

}  // namespace starcool::sweeps
