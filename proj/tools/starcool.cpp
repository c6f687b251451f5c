// starcool command-line tool: HBAC cooling simulation, parameter landscapes,
// swap-factor fitting, band-selective pulse design, and coherence-decay
// benchmarks, driven by a shared key = value config format.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "starcool/coherence.hpp"
#include "starcool/config.hpp"
#include "starcool/oracle.hpp"
#include "starcool/pulse_design.hpp"
#include "starcool/star_core.hpp"
#include "starcool/sweeps.hpp"

namespace {

constexpr char kVersion[] = "1.0.0";

using starcool::config::ConfigError;
using starcool::config::RunConfig;

// Exit codes, fixed as part of the interface:
//   0 success, 2 config parse error, 3 model-domain error, 4 missing data file.
constexpr int kExitConfig = 2;
constexpr int kExitDomain = 3;
constexpr int kExitMissingData = 4;

struct MissingDataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::map<std::string, std::set<std::string>> kSchema = {
    {"system", {"n_reset", "gamma", "t1_comp", "t1_reset", "j_rc", "temperature", "background"}},
    {"schedule",
     {"iterations", "m", "tau_hb", "m_schedule", "tau_schedule", "eta_mode", "eta_lo", "eta_hi",
      "eta_lo_range", "eta_hi_range", "ac_model", "seed"}},
    {"sweep",
     {"axis", "grid", "grid_min", "grid_max", "grid_count", "grid_log", "metric",
      "fit_parametrization", "fit_smoothness", "fit_max_evaluations", "fit_step_tolerance",
      "fit_starts", "seed"}},
    {"pulse",
     {"bands", "margin", "segments", "duration", "offset_min", "offset_max", "offset_count",
      "rf_scales", "max_iterations", "tolerance", "shrink", "initial_scale", "amplitude_cap",
      "seed"}},
    {"coherence",
     {"q_list", "rms", "correlation_time", "trajectories", "t_max", "t_count", "efolds", "floor",
      "write_curves", "seed"}},
};

struct Options {
  std::string config_path;
  std::string output_path;
  std::string data_path;     // fit-eta
  std::string profile_path;  // design-pulse
  int threads = 1;
  bool seed_set = false;
  std::uint64_t seed = 0;
};

std::uint64_t effective_seed(const Options& opt, const RunConfig& cfg, const std::string& section,
                             std::uint64_t def) {
  if (opt.seed_set) return opt.seed;
  return cfg.get_seed(section, "seed", def);
}

std::ofstream open_output(const std::string& path, const RunConfig& cfg, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write output file: " + path);
  char head[128];
  std::snprintf(head, sizeof head, "# starcool %s config=%016llx seed=%llu\n", kVersion,
                static_cast<unsigned long long>(cfg.content_hash()),
                static_cast<unsigned long long>(seed));
  out << head;
  return out;
}

starcool::StarSystem build_system(const RunConfig& cfg) {
  starcool::StarSystem sys = starcool::sweeps::ttss_like_system();
  sys.n_reset = cfg.get_int("system", "n_reset", sys.n_reset);
  sys.gamma = cfg.get_real("system", "gamma", sys.gamma);
  sys.t1_comp = cfg.get_real("system", "t1_comp", sys.t1_comp);
  sys.t1_reset = cfg.get_real("system", "t1_reset", sys.t1_reset);
  sys.j_rc = cfg.get_real("system", "j_rc", sys.j_rc);
  sys.temperature = cfg.get_real("system", "temperature", sys.temperature);
  starcool::require_valid(sys);
  for (const std::string& w : starcool::model_warnings(sys)) std::cerr << "warning: " << w << "\n";
  return sys;
}

starcool::sweeps::ScheduleTemplate build_schedule(const RunConfig& cfg) {
  starcool::sweeps::ScheduleTemplate tpl = starcool::sweeps::ttss_like_schedule();
  tpl.iterations = cfg.get_int("schedule", "iterations", tpl.iterations);
  const std::string m_text = cfg.get_string("schedule", "m", "15");
  if (m_text == "auto") {
    tpl.m = -1;
  } else {
    tpl.m = cfg.get_int("schedule", "m", 15);
  }
  tpl.tau_hb = cfg.get_real("schedule", "tau_hb", tpl.tau_hb);
  tpl.m_per_iteration = cfg.get_int_list("schedule", "m_schedule", {});
  tpl.tau_per_iteration = cfg.get_real_list("schedule", "tau_schedule", {});

  const std::string mode = cfg.get_string("schedule", "eta_mode", "ideal");
  if (mode == "ideal") {
    tpl.eta.kind = starcool::sweeps::EtaPolicy::Kind::ideal;
  } else if (mode == "two_level") {
    tpl.eta.kind = starcool::sweeps::EtaPolicy::Kind::two_level;
  } else if (mode == "randomized") {
    tpl.eta.kind = starcool::sweeps::EtaPolicy::Kind::randomized;
  } else {
    throw ConfigError("eta_mode must be ideal, two_level, or randomized");
  }
  tpl.eta.eta_lo = cfg.get_real("schedule", "eta_lo", 0.0);
  tpl.eta.eta_hi = cfg.get_real("schedule", "eta_hi", 1.0);
  const auto lo_range = cfg.get_real_list("schedule", "eta_lo_range", {0.0, 0.2});
  const auto hi_range = cfg.get_real_list("schedule", "eta_hi_range", {0.8, 1.0});
  if (lo_range.size() != 2 || hi_range.size() != 2)
    throw ConfigError("eta_lo_range / eta_hi_range must each hold two values");
  tpl.eta.lo_min = lo_range[0];
  tpl.eta.lo_max = lo_range[1];
  tpl.eta.hi_min = hi_range[0];
  tpl.eta.hi_max = hi_range[1];
  return tpl;
}

std::vector<double> default_grid(starcool::sweeps::SweepAxis axis, const starcool::StarSystem& sys) {
  using starcool::sweeps::SweepAxis;
  std::vector<double> grid;
  switch (axis) {
    case SweepAxis::m:
      for (int m = 0; m <= sys.n_reset / 2; ++m) grid.push_back(m);
      break;
    case SweepAxis::n_reset:
      for (int n = 5; n <= 25; ++n) grid.push_back(n);
      break;
    case SweepAxis::tau_hb:
      for (double t = 0.25; t <= 256.0; t *= std::sqrt(2.0)) grid.push_back(t);
      break;
    case SweepAxis::gamma:
      for (double g = 1.0; g <= 6.001; g += 0.5) grid.push_back(g);
      break;
  }
  return grid;
}

starcool::sweeps::SweepSpec build_sweep(const RunConfig& cfg, const Options& opt) {
  starcool::sweeps::SweepSpec spec;
  spec.system = build_system(cfg);
  spec.schedule = build_schedule(cfg);
  spec.schedule.eta.seed = effective_seed(opt, cfg, "schedule", spec.schedule.eta.seed);
  spec.axis = starcool::sweeps::axis_from_name(cfg.get_string("sweep", "axis", "m"));
  spec.metric = cfg.get_int("sweep", "metric", spec.schedule.iterations);

  if (cfg.has("sweep", "grid")) {
    spec.grid = cfg.get_real_list("sweep", "grid", {});
  } else if (cfg.has("sweep", "grid_min") || cfg.has("sweep", "grid_max") ||
             cfg.has("sweep", "grid_count")) {
    const double lo = cfg.get_real("sweep", "grid_min", 0.0);
    const double hi = cfg.get_real("sweep", "grid_max", 1.0);
    const int count = cfg.get_int("sweep", "grid_count", 10);
    const bool log_spaced = cfg.get_bool("sweep", "grid_log", false);
    if (count < 1) throw ConfigError("grid_count must be >= 1");
    if (log_spaced && !(lo > 0.0)) throw ConfigError("grid_log needs grid_min > 0");
    for (int i = 0; i < count; ++i) {
      const double f = (count == 1) ? 0.0 : double(i) / double(count - 1);
      spec.grid.push_back(log_spaced ? lo * std::pow(hi / lo, f) : lo + (hi - lo) * f);
    }
  } else {
    spec.grid = default_grid(spec.axis, spec.system);
  }
  return spec;
}

starcool::pulse::BandSpec build_bands(const RunConfig& cfg) {
  starcool::pulse::BandSpec bands;
  const std::string text =
      cfg.get_string("pulse", "bands", "2.5:50:invert; -50:-2.5:preserve");
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    std::istringstream fs(item);
    std::string lo, hi, target;
    if (!std::getline(fs, lo, ':') || !std::getline(fs, hi, ':') || !std::getline(fs, target))
      throw ConfigError("bands must be `lo:hi:target` separated by `;`");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return (b == std::string::npos) ? std::string() : s.substr(b, e - b + 1);
    };
    starcool::pulse::Band band;
    try {
      band.lo_hz = std::stod(trim(lo));
      band.hi_hz = std::stod(trim(hi));
    } catch (const std::exception&) {
      throw ConfigError("band edges must be numbers: " + item);
    }
    const std::string t = trim(target);
    if (t == "invert") {
      band.target = starcool::pulse::BandTarget::invert;
    } else if (t == "preserve") {
      band.target = starcool::pulse::BandTarget::preserve;
    } else {
      throw ConfigError("band target must be invert or preserve: " + item);
    }
    bands.bands.push_back(band);
  }
  if (bands.bands.empty()) throw ConfigError("bands list is empty");
  double lo = bands.bands.front().lo_hz, hi = bands.bands.front().hi_hz;
  for (const auto& b : bands.bands) {
    lo = std::min(lo, b.lo_hz);
    hi = std::max(hi, b.hi_hz);
  }
  // Default margin: 5% of the total band span per edge.
  bands.transition_margin_hz = cfg.get_real("pulse", "margin", 0.05 * (hi - lo));
  return bands;
}

starcool::pulse::EnsembleSpec build_ensemble(const RunConfig& cfg) {
  starcool::pulse::EnsembleSpec ens;
  const double lo = cfg.get_real("pulse", "offset_min", -50.0);
  const double hi = cfg.get_real("pulse", "offset_max", 50.0);
  const int count = cfg.get_int("pulse", "offset_count", 50);
  if (count < 1) throw ConfigError("offset_count must be >= 1");
  ens.offsets_hz.resize(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double f = (count == 1) ? 0.0 : double(i) / double(count - 1);
    ens.offsets_hz[static_cast<std::size_t>(i)] = lo + (hi - lo) * f;
  }
  ens.rf_scales = cfg.get_real_list("pulse", "rf_scales", {0.8, 1.0, 1.2});
  return ens;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const Options& opt) {
  const RunConfig cfg = RunConfig::parse_file(opt.config_path);
  cfg.require_known(kSchema);
  const starcool::StarSystem sys = build_system(cfg);
  starcool::sweeps::ScheduleTemplate tpl = build_schedule(cfg);
  const std::uint64_t seed = effective_seed(opt, cfg, "schedule", tpl.eta.seed);
  tpl.eta.seed = seed;
  const double background = cfg.get_real("system", "background", 0.0);
  const std::string model_name = cfg.get_string("schedule", "ac_model", "effective");
  starcool::AcModel model = starcool::AcModel::effective;
  if (model_name == "two_step") {
    model = starcool::AcModel::two_step;
  } else if (model_name != "effective") {
    throw ConfigError("ac_model must be effective or two_step");
  }
  const starcool::HbacSchedule schedule = starcool::sweeps::expand(tpl, sys.n_reset, seed);
  const starcool::CoolingTrace trace = starcool::run_schedule(sys, schedule, background, model);

  std::ofstream out = open_output(opt.output_path, cfg, seed);
  out << "n,magnetization,spin_temperature_k\n";
  char buf[96];
  for (const auto& row : trace.rows) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", row.n, row.magnetization,
                  row.spin_temperature_k);
    out << buf;
  }
  const auto& last = trace.rows.back();
  std::printf("simulate: %d iterations, M=%.6g, T=%.6g K -> %s\n", last.n, last.magnetization,
              last.spin_temperature_k, opt.output_path.c_str());
  return 0;
}

int cmd_steady_state(const Options& opt) {
  const RunConfig cfg = RunConfig::parse_file(opt.config_path);
  cfg.require_known(kSchema);
  const starcool::StarSystem sys = build_system(cfg);
  starcool::sweeps::ScheduleTemplate tpl = build_schedule(cfg);
  const std::uint64_t seed = effective_seed(opt, cfg, "schedule", tpl.eta.seed);
  const starcool::SwapProfile profile =
      starcool::sweeps::make_profile(tpl.eta, sys.n_reset, tpl.m, seed);
  const starcool::SteadyState result = starcool::steady_state(sys, profile, tpl.tau_hb);

  std::ofstream out = open_output(opt.output_path, cfg, seed);
  out << "j,p0,p1\n";
  char buf[96];
  for (int j = 0; j <= sys.n_reset; ++j) {
    std::snprintf(buf, sizeof buf, "%d,%.12g,%.12g\n", j,
                  result.state.p0[static_cast<std::size_t>(j)],
                  result.state.p1[static_cast<std::size_t>(j)]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "# m_inf=%.12g\n", result.m_inf);
  out << buf;
  std::snprintf(buf, sizeof buf, "# spin_temperature_k=%.12g\n", sys.temperature / result.m_inf);
  out << buf;
  std::printf("steady-state: M_inf=%.6g -> %s\n", result.m_inf, opt.output_path.c_str());
  return 0;
}

int cmd_sweep(const Options& opt) {
  const RunConfig cfg = RunConfig::parse_file(opt.config_path);
  cfg.require_known(kSchema);
  const starcool::sweeps::SweepSpec spec = build_sweep(cfg, opt);
  const auto rows = starcool::sweeps::grid_sweep(spec, opt.threads);

  std::size_t best = 0;
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].m_metric > rows[best].m_metric) best = i;

  std::ofstream out = open_output(opt.output_path, cfg, spec.schedule.eta.seed);
  char buf[96];
  std::snprintf(buf, sizeof buf, "%s,m%d\n", starcool::sweeps::axis_name(spec.axis), spec.metric);
  out << buf;
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof buf, "%.12g,%.12g\n", row.value, row.m_metric);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "# best_%s=%.12g best_m=%.12g\n",
                starcool::sweeps::axis_name(spec.axis), rows[best].value, rows[best].m_metric);
  out << buf;
  std::printf("sweep: %zu points over %s, best %s=%.6g (M%d=%.6g) -> %s\n", rows.size(),
              starcool::sweeps::axis_name(spec.axis), starcool::sweeps::axis_name(spec.axis),
              rows[best].value, spec.metric, rows[best].m_metric, opt.output_path.c_str());
  return 0;
}

int cmd_fit_eta(const Options& opt) {
  const RunConfig cfg = RunConfig::parse_file(opt.config_path);
  cfg.require_known(kSchema);
  const starcool::StarSystem sys = build_system(cfg);

  {
    std::ifstream probe(opt.data_path);
    if (!probe) throw MissingDataError("cannot open data file: " + opt.data_path);
  }
  starcool::sweeps::EtaFitProblem problem;
  problem.measured = starcool::sweeps::read_measured_csv(opt.data_path);
  problem.schedule = build_schedule(cfg);
  const std::string param = cfg.get_string("sweep", "fit_parametrization", "two_level");
  if (param == "two_level") {
    problem.parametrization = starcool::sweeps::EtaFitProblem::Parametrization::two_level;
  } else if (param == "per_j") {
    problem.parametrization = starcool::sweeps::EtaFitProblem::Parametrization::per_j;
  } else {
    throw ConfigError("fit_parametrization must be two_level or per_j");
  }
  problem.smoothness = cfg.get_real("sweep", "fit_smoothness", 0.0);
  problem.max_evaluations = cfg.get_int("sweep", "fit_max_evaluations", 40000);
  problem.step_tolerance = cfg.get_real("sweep", "fit_step_tolerance", 1e-8);
  problem.random_starts = cfg.get_int("sweep", "fit_starts", 6);
  problem.seed = effective_seed(opt, cfg, "sweep", 1);

  const starcool::sweeps::EtaFitResult fit = starcool::sweeps::fit_eta(problem, sys);
  if (!fit.converged)
    std::cerr << "warning: fit stopped at the evaluation cap; returning best found\n";

  std::ofstream out = open_output(opt.output_path, cfg, problem.seed);
  out << "j,eta\n";
  char buf[96];
  for (std::size_t j = 0; j < fit.profile.eta.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%zu,%.12g\n", j, fit.profile.eta[j]);
    out << buf;
  }
  std::snprintf(buf, sizeof buf, "# residual=%.12g\n", fit.residual);
  out << buf;
  std::snprintf(buf, sizeof buf, "# converged=%s evaluations=%d\n", fit.converged ? "true" : "false",
                fit.evaluations);
  out << buf;
  std::printf("fit-eta: residual=%.6g over %zu points -> %s\n", fit.residual,
              problem.measured.size(), opt.output_path.c_str());
  return 0;
}

int cmd_design_pulse(const Options& opt) {
  const RunConfig cfg = RunConfig::parse_file(opt.config_path);
  cfg.require_known(kSchema);
  const starcool::pulse::BandSpec bands = build_bands(cfg);
  const starcool::pulse::EnsembleSpec ensemble = build_ensemble(cfg);
  const int segments = cfg.get_int("pulse", "segments", 300);
  const double duration = cfg.get_real("pulse", "duration", 0.2);
  starcool::pulse::OptimizerConfig oc;
  oc.max_iterations = cfg.get_int("pulse", "max_iterations", oc.max_iterations);
  oc.tolerance = cfg.get_real("pulse", "tolerance", oc.tolerance);
  oc.shrink = cfg.get_real("pulse", "shrink", oc.shrink);
  oc.initial_scale_hz = cfg.get_real("pulse", "initial_scale", oc.initial_scale_hz);
  oc.amplitude_cap_hz = cfg.get_real("pulse", "amplitude_cap", oc.amplitude_cap_hz);
  oc.seed = effective_seed(opt, cfg, "pulse", oc.seed);

  const starcool::pulse::DesignResult result =
      starcool::pulse::design_pulse(bands, ensemble, segments, duration, oc, opt.threads);
  for (const std::string& w : result.warnings) std::cerr << "warning: " << w << "\n";

  std::string profile_path = opt.profile_path;
  if (profile_path.empty()) {
    const std::filesystem::path p(opt.output_path);
    std::filesystem::path out = p.parent_path();
    out /= p.stem().string() + "_profile" + p.extension().string();
    profile_path = out.string();
  }

  {
    std::ofstream out = open_output(opt.output_path, cfg, oc.seed);
    starcool::pulse::write_pulse_csv(out, result.pulse);
    char buf[64];
    std::snprintf(buf, sizeof buf, "# fidelity=%.12g\n", result.fidelity);
    out << buf;
  }
  {
    std::ofstream out = open_output(profile_path, cfg, oc.seed);
    starcool::pulse::write_profile_csv(out,
                                       starcool::pulse::simulate_profile(result.pulse, ensemble));
  }
  std::printf("design-pulse: fidelity=%.6g after %zu accepted steps -> %s, %s\n", result.fidelity,
              result.log.size() - 1, opt.output_path.c_str(), profile_path.c_str());
  return 0;
}

int cmd_coherence(const Options& opt) {
  const RunConfig cfg = RunConfig::parse_file(opt.config_path);
  cfg.require_known(kSchema);
  starcool::coherence::NoiseModel noise;
  noise.rms_rad_per_s = cfg.get_real("coherence", "rms", 141.4213562373095);
  noise.correlation_time_s = cfg.get_real("coherence", "correlation_time", 1e-4);
  noise.trajectories = cfg.get_int("coherence", "trajectories", 10000);
  noise.seed = effective_seed(opt, cfg, "coherence", 7);
  const std::vector<int> q_list = cfg.get_int_list("coherence", "q_list", {1, 3, 5, 7, 9});
  const double t_max = cfg.get_real("coherence", "t_max", 0.0);
  const int t_count = cfg.get_int("coherence", "t_count", 60);
  const double efolds = cfg.get_real("coherence", "efolds", 3.0);
  const double floor_ = cfg.get_real("coherence", "floor", 0.05);
  const bool write_curves = cfg.get_bool("coherence", "write_curves", false);
  if (t_count < 2) throw ConfigError("t_count must be >= 2");

  auto grid_to = [&](double t_end) {
    std::vector<double> t(static_cast<std::size_t>(t_count) + 1);
    for (int i = 0; i <= t_count; ++i) t[static_cast<std::size_t>(i)] = t_end * i / t_count;
    return t;
  };
  // t_max = 0 selects per-order windows reaching `efolds` e-folds of the
  // analytic envelope.
  auto window_for = [&](int q) {
    if (t_max > 0.0) return t_max;
    if (!(noise.rms_rad_per_s > 0.0))
      throw std::invalid_argument("coherence: automatic windows need rms > 0");
    double hi = noise.correlation_time_s;
    while (starcool::coherence::analytic_envelope(q, noise, hi) > std::exp(-efolds)) hi *= 2.0;
    double lo = 0.0;
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (starcool::coherence::analytic_envelope(q, noise, mid) > std::exp(-efolds)) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return hi;
  };

  std::vector<std::pair<int, double>> rates;
  std::vector<double> stderrs;
  std::vector<starcool::coherence::DecayCurve> curves;
  for (int q : q_list) {
    const auto curve =
        starcool::coherence::simulate_decay(q, noise, grid_to(window_for(q)), opt.threads);
    const auto est = starcool::coherence::extract_rate(curve, floor_);
    rates.emplace_back(q, est.gamma_per_s);
    stderrs.push_back(est.stderr_per_s);
    curves.push_back(curve);
  }

  std::ofstream out = open_output(opt.output_path, cfg, noise.seed);
  starcool::coherence::write_rates_csv(out, rates, stderrs);
  std::set<int> distinct(q_list.begin(), q_list.end());
  if (distinct.size() >= 3) {
    const auto fit = starcool::coherence::fit_q2(rates);
    char buf[160];
    std::snprintf(buf, sizeof buf, "# fit_slope=%.12g fit_intercept=%.12g fit_r_squared=%.12g\n",
                  fit.slope, fit.intercept, fit.r_squared);
    out << buf;
    std::printf("coherence: %zu orders, slope=%.6g, R^2=%.6g -> %s\n", rates.size(), fit.slope,
                fit.r_squared, opt.output_path.c_str());
  } else {
    std::cerr << "warning: fewer than 3 distinct orders, no regression footer\n";
    std::printf("coherence: %zu orders -> %s\n", rates.size(), opt.output_path.c_str());
  }

  if (write_curves) {
    const std::filesystem::path p(opt.output_path);
    for (const auto& curve : curves) {
      std::filesystem::path cp = p.parent_path();
      cp /= p.stem().string() + "_q" + std::to_string(curve.order) + p.extension().string();
      std::ofstream cout_ = open_output(cp.string(), cfg, noise.seed);
      starcool::coherence::write_decay_csv(cout_, curve);
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heat-bath algorithmic cooling toolkit for star-topology registers"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  Options opt;
  auto add_common = [&](CLI::App* sub, bool with_data, bool with_profile) {
    sub->add_option("config", opt.config_path, "configuration file")->required();
    sub->add_option("output", opt.output_path, "output CSV path")->required();
    if (with_data)
      sub->add_option("--data", opt.data_path, "measured trace CSV (n,magnetization)")->required();
    if (with_profile)
      sub->add_option("--profile", opt.profile_path, "inversion-profile CSV path");
    sub->add_option("--threads", opt.threads, "worker thread cap (results are thread-count independent)");
    sub->add_option("--seed", opt.seed, "override every config seed")->each([&](const std::string&) {
      opt.seed_set = true;
    });
  };

  CLI::App* simulate = app.add_subcommand("simulate", "run an HBAC schedule and write the cooling trace");
  add_common(simulate, false, false);
  CLI::App* sweep = app.add_subcommand("sweep", "magnetization landscape over one parameter axis");
  add_common(sweep, false, false);
  CLI::App* fit = app.add_subcommand("fit-eta", "estimate swap factors from a measured trace");
  add_common(fit, true, false);
  CLI::App* steady = app.add_subcommand("steady-state", "fixed point of the HBAC iteration");
  add_common(steady, false, false);
  CLI::App* design = app.add_subcommand("design-pulse", "band-selective inversion pulse design");
  add_common(design, false, true);
  CLI::App* coher = app.add_subcommand("coherence", "coherence-decay rates and q^2 regression");
  add_common(coher, false, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(opt);
    if (sweep->parsed()) return cmd_sweep(opt);
    if (fit->parsed()) return cmd_fit_eta(opt);
    if (steady->parsed()) return cmd_steady_state(opt);
    if (design->parsed()) return cmd_design_pulse(opt);
    if (coher->parsed()) return cmd_coherence(opt);
  } catch (const ConfigError& e) {
    if (e.line() > 0) {
      std::cerr << "config error (line " << e.line() << "): " << e.what() << "\n";
    } else {
      std::cerr << "config error: " << e.what() << "\n";
    }
    return kExitConfig;
  } catch (const starcool::sweeps::ParseError& e) {
    std::cerr << "data error (line " << e.line() << "): " << e.what() << "\n";
    return kExitConfig;
  } catch (const MissingDataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitMissingData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::domain_error& e) {
    std::cerr << "model error: " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
