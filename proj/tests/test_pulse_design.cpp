#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "starcool/pulse_design.hpp"
#include "starcool/rng.hpp"

using namespace starcool;
using namespace starcool::pulse;
using Catch::Approx;

namespace {

BandSpec single_step_bands() {
  BandSpec b;
  b.bands = {{2.5, 50.0, BandTarget::invert}, {-50.0, -2.5, BandTarget::preserve}};
  b.transition_margin_hz = 2.5;
  return b;
}

BandSpec all_invert(double margin = 0.0) {
  BandSpec b;
  b.bands = {{-60.0, 60.0, BandTarget::invert}};
  b.transition_margin_hz = margin;
  return b;
}

Pulse random_pulse(int segments, double duration_s, std::uint64_t seed, double scale = 30.0) {
  Rng rng(seed);
  Pulse p;
  p.segment_duration_s = duration_s / segments;
  for (int k = 0; k < segments; ++k) {
    const double ux = rng.uniform(-scale, scale);
    const double uy = rng.uniform(-scale, scale);
    p.amplitude_hz.push_back(std::hypot(ux, uy));
    p.phase_rad.push_back(std::atan2(uy, ux));
  }
  return p;
}

}  // namespace

TEST_CASE("zero pulse leaves every member at Mz = +1") {
  Pulse zero;
  zero.segment_duration_s = 1e-3;
  zero.amplitude_hz.assign(20, 0.0);
  zero.phase_rad.assign(20, 0.0);
  const auto profile = simulate_profile(zero, EnsembleSpec::defaults());
  REQUIRE(profile.size() == 150);
  for (const auto& p : profile) REQUIRE(p.mz == Approx(1.0).margin(1e-12));
}

TEST_CASE("on-resonance pi rotation inverts exactly") {
  Pulse p;
  p.segment_duration_s = 0.5e-3;
  p.amplitude_hz = {1000.0};  // 2*pi*1000*0.0005 = pi
  p.phase_rad = {0.0};
  EnsembleSpec one;
  one.offsets_hz = {0.0};
  one.rf_scales = {1.0};
  const auto profile = simulate_profile(p, one);
  REQUIRE(profile[0].mz == Approx(-1.0).margin(1e-12));
}

TEST_CASE("propagation is norm preserving and split invariant") {
  const Pulse p = random_pulse(10000, 0.2, 5);
  EnsembleSpec one;
  one.offsets_hz = {17.0};
  one.rf_scales = {1.0};
  const double mz = simulate_profile(p, one)[0].mz;
  REQUIRE(std::abs(mz) <= 1.0 + 1e-12);

  // Splitting every segment in two leaves the profile unchanged.
  const Pulse coarse = random_pulse(200, 0.2, 6);
  Pulse fine;
  fine.segment_duration_s = coarse.segment_duration_s / 2.0;
  for (int k = 0; k < coarse.segments(); ++k) {
    for (int r = 0; r < 2; ++r) {
      fine.amplitude_hz.push_back(coarse.amplitude_hz[static_cast<std::size_t>(k)]);
      fine.phase_rad.push_back(coarse.phase_rad[static_cast<std::size_t>(k)]);
    }
  }
  const auto ens = EnsembleSpec::defaults();
  const auto a = simulate_profile(coarse, ens);
  const auto b = simulate_profile(fine, ens);
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].mz == Approx(b[i].mz).margin(1e-12));
}

TEST_CASE("profile rows are thread-count independent") {
  const Pulse p = random_pulse(300, 0.2, 7);
  const auto ens = EnsembleSpec::defaults();
  const auto serial = simulate_profile(p, ens, 1);
  const auto parallel = simulate_profile(p, ens, 4);
  for (std::size_t i = 0; i < serial.size(); ++i) REQUIRE(serial[i].mz == parallel[i].mz);
}

TEST_CASE("fidelity limits for trivial pulses") {
  Pulse zero;
  zero.segment_duration_s = 1e-3;
  zero.amplitude_hz.assign(10, 0.0);
  zero.phase_rad.assign(10, 0.0);
  const auto ens = EnsembleSpec::defaults();

  REQUIRE(fidelity(zero, all_invert(), ens) == Approx(0.0).margin(1e-12));

  BandSpec preserve = all_invert();
  preserve.bands[0].target = BandTarget::preserve;
  REQUIRE(fidelity(zero, preserve, ens) == Approx(1.0).margin(1e-12));

  // Hard pi pulse on a near-resonant ensemble inverts everything.
  Pulse hard;
  hard.segment_duration_s = 0.5e-3;
  hard.amplitude_hz = {1000.0};
  hard.phase_rad = {0.0};
  EnsembleSpec narrow;
  for (int i = 0; i < 11; ++i) narrow.offsets_hz.push_back(-5.0 + i);
  narrow.rf_scales = {1.0};
  BandSpec tight;
  tight.bands = {{-6.0, 6.0, BandTarget::invert}};
  tight.transition_margin_hz = 0.0;
  REQUIRE(fidelity(hard, tight, narrow) >= 0.99);
}

TEST_CASE("fidelity preconditions") {
  Pulse zero;
  zero.segment_duration_s = 1e-3;
  zero.amplitude_hz.assign(10, 0.0);
  zero.phase_rad.assign(10, 0.0);

  BandSpec bands = single_step_bands();
  EnsembleSpec ens;
  ens.offsets_hz = {70.0};  // outside every band and margin
  ens.rf_scales = {1.0};
  REQUIRE_THROWS_AS(fidelity(zero, bands, ens), std::invalid_argument);

  ens.offsets_hz = {0.0, 4.0, -3.0};  // all inside margins: nothing to average
  REQUIRE_THROWS_AS(fidelity(zero, bands, ens), std::invalid_argument);

  BandSpec overlapping;
  overlapping.bands = {{-10.0, 1.0, BandTarget::preserve}, {-1.0, 10.0, BandTarget::invert}};
  overlapping.transition_margin_hz = 0.0;
  REQUIRE_THROWS_AS(fidelity(zero, overlapping, EnsembleSpec::defaults()), std::invalid_argument);
}

TEST_CASE("gradient matches central finite differences") {
  const BandSpec bands = single_step_bands();
  const EnsembleSpec ens = EnsembleSpec::defaults();
  const Pulse p = random_pulse(40, 0.2, 42);
  const ControlGradient g = gradient(p, bands, ens);

  auto cart = detail::to_cartesian(p);
  const double h = 1e-6 * 30.0;  // 1e-6 of the control scale
  for (int k = 0; k < p.segments(); k += 5) {
    for (int comp = 0; comp < 2; ++comp) {
      auto shifted = cart;
      auto& channel = comp ? shifted.uy_hz : shifted.ux_hz;
      const double saved = channel[static_cast<std::size_t>(k)];
      channel[static_cast<std::size_t>(k)] = saved + h;
      const double up = fidelity(detail::to_polar(shifted), bands, ens);
      channel[static_cast<std::size_t>(k)] = saved - h;
      const double down = fidelity(detail::to_polar(shifted), bands, ens);
      const double fd = (up - down) / (2.0 * h);
      const double analytic = comp ? g.d_uy[static_cast<std::size_t>(k)]
                                   : g.d_ux[static_cast<std::size_t>(k)];
      REQUIRE(analytic == Approx(fd).epsilon(1e-5).margin(1e-12));
    }
  }

  // Zero pulse: the gradient is still exact there.
  Pulse zero;
  zero.segment_duration_s = 0.2 / 40;
  zero.amplitude_hz.assign(40, 0.0);
  zero.phase_rad.assign(40, 0.0);
  const ControlGradient gz = gradient(zero, bands, ens);
  auto zc = detail::to_cartesian(zero);
  for (int k = 0; k < 40; k += 13) {
    auto shifted = zc;
    shifted.ux_hz[static_cast<std::size_t>(k)] = h;
    const double up = fidelity(detail::to_polar(shifted), bands, ens);
    shifted.ux_hz[static_cast<std::size_t>(k)] = -h;
    const double down = fidelity(detail::to_polar(shifted), bands, ens);
    REQUIRE(gz.d_ux[static_cast<std::size_t>(k)] ==
            Approx((up - down) / (2.0 * h)).epsilon(1e-5).margin(1e-10));
  }
}

TEST_CASE("design: all-preserve problem is solved by the zero pulse at iteration 0") {
  BandSpec preserve;
  preserve.bands = {{-50.0, 50.0, BandTarget::preserve}};
  preserve.transition_margin_hz = 0.0;
  OptimizerConfig cfg;
  const DesignResult res = design_pulse(preserve, EnsembleSpec::defaults(), 50, 0.05, cfg);
  REQUIRE(res.fidelity == Approx(1.0).margin(1e-12));
  REQUIRE(res.log.size() == 1);
  for (double a : res.pulse.amplitude_hz) REQUIRE(a == 0.0);
}

TEST_CASE("design: single-step run converges with monotone accepted fidelity") {
  OptimizerConfig cfg;
  cfg.max_iterations = 300;
  const DesignResult res = design_pulse(single_step_bands(), EnsembleSpec::defaults(), 300, 0.2,
                                        cfg, 2);
  REQUIRE(res.fidelity >= 0.97);
  for (std::size_t i = 1; i < res.log.size(); ++i)
    REQUIRE(res.log[i].fidelity >= res.log[i - 1].fidelity);
  REQUIRE(res.warnings.empty());

  // Robustness: scaled profiles stay near the per-band targets.
  const BandSpec bands = single_step_bands();
  const auto profile = simulate_profile(res.pulse, EnsembleSpec::defaults());
  for (double scale : {0.8, 1.2}) {
    double dev = 0.0;
    int count = 0;
    for (const auto& pt : profile) {
      if (pt.rf_scale != scale) continue;
      const Band* band = nullptr;
      if (detail::classify(bands, pt.offset_hz, &band) != detail::Membership::in_band) continue;
      const double target = (band->target == BandTarget::invert) ? -1.0 : 1.0;
      dev += std::abs(pt.mz - target);
      ++count;
    }
    REQUIRE(count > 0);
    REQUIRE(dev / count <= 0.05);
  }

  // Amplitudes respect the cap.
  for (double a : res.pulse.amplitude_hz) REQUIRE(a <= cfg.amplitude_cap_hz + 1e-9);
}

TEST_CASE("design: double-step layout meets per-band targets at every scale") {
  BandSpec dbl;
  dbl.bands = {{-47.5, -27.5, BandTarget::invert},
               {-22.5, -2.5, BandTarget::preserve},
               {2.5, 22.5, BandTarget::invert},
               {27.5, 47.5, BandTarget::preserve}};
  dbl.transition_margin_hz = 2.5;
  const EnsembleSpec ens = EnsembleSpec::defaults();
  OptimizerConfig cfg;
  const DesignResult res = design_pulse(dbl, ens, 300, 0.2, cfg, 2);
  REQUIRE(res.fidelity >= 0.97);

  const auto profile = simulate_profile(res.pulse, ens);
  for (double scale : {0.8, 1.0, 1.2}) {
    for (const Band& band : dbl.bands) {
      double dev = 0.0;
      int count = 0;
      for (const auto& pt : profile) {
        if (pt.rf_scale != scale) continue;
        const Band* hit = nullptr;
        if (detail::classify(dbl, pt.offset_hz, &hit) != detail::Membership::in_band) continue;
        if (hit != &band) continue;
        dev += std::abs(pt.mz - (band.target == BandTarget::invert ? -1.0 : 1.0));
        ++count;
      }
      REQUIRE(count > 0);
      REQUIRE(dev / count <= 0.05);
    }
  }
}

TEST_CASE("gradient vanishes at the all-preserve optimum") {
  BandSpec preserve;
  preserve.bands = {{-50.0, 50.0, BandTarget::preserve}};
  preserve.transition_margin_hz = 0.0;
  Pulse zero;
  zero.segment_duration_s = 1e-3;
  zero.amplitude_hz.assign(30, 0.0);
  zero.phase_rad.assign(30, 0.0);
  const ControlGradient g = gradient(zero, preserve, EnsembleSpec::defaults());
  for (std::size_t k = 0; k < g.d_ux.size(); ++k) {
    REQUIRE(std::abs(g.d_ux[k]) <= 1e-12);
    REQUIRE(std::abs(g.d_uy[k]) <= 1e-12);
  }
}

TEST_CASE("gradient accumulation is thread-count independent") {
  const Pulse p = random_pulse(120, 0.2, 9);
  const BandSpec bands = single_step_bands();
  const EnsembleSpec ens = EnsembleSpec::defaults();
  const ControlGradient a = gradient(p, bands, ens, 1);
  const ControlGradient b = gradient(p, bands, ens, 4);
  REQUIRE(a.d_ux == b.d_ux);
  REQUIRE(a.d_uy == b.d_uy);
}

TEST_CASE("a hopeless problem raises the plateau warning") {
  // 3 segments over 3 ms cannot shape a 5 Hz transition.
  OptimizerConfig cfg;
  cfg.max_iterations = 15;
  const DesignResult res =
      design_pulse(single_step_bands(), EnsembleSpec::defaults(), 3, 0.003, cfg);
  REQUIRE(res.fidelity < 0.9);
  bool plateau = false;
  for (const auto& w : res.warnings)
    if (w.find("plateau") != std::string::npos) plateau = true;
  REQUIRE(plateau);
}

TEST_CASE("design warns when the duration cannot resolve the bands") {
  OptimizerConfig cfg;
  cfg.max_iterations = 5;
  const DesignResult res =
      design_pulse(single_step_bands(), EnsembleSpec::defaults(), 40, 0.02, cfg);
  REQUIRE_FALSE(res.warnings.empty());
}

TEST_CASE("pulse CSV round trip") {
  const Pulse p = random_pulse(25, 0.1, 3);
  std::ostringstream first;
  write_pulse_csv(first, p);
  std::istringstream in(first.str());
  const Pulse back = read_pulse_csv(in);
  std::ostringstream second;
  write_pulse_csv(second, back);
  REQUIRE(first.str() == second.str());

  std::istringstream bad("wrong,header\n");
  REQUIRE_THROWS_AS(read_pulse_csv(bad), std::runtime_error);
}
