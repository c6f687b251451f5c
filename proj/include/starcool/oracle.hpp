#pragma once

// Brute-force cross-checks for the star_core dynamics. Everything here builds
// explicit matrices and solves dense systems instead of reusing the closed
// forms, so agreement between the two routes is a real consistency check.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "starcool/star_core.hpp"

namespace starcool::oracle {

// One HBAC iteration as an affine map v -> A v + c on the stacked vector
// [p0; p1] of length 2N+2.
struct AffineIteration {
  Eigen::MatrixXd matrix;
  Eigen::VectorXd offset;
};

inline Eigen::VectorXd stack_state(const StarState& s) {
  const int n = s.n_reset();
  Eigen::VectorXd v(2 * (n + 1));
  for (int j = 0; j <= n; ++j) {
    v(j) = s.p0[static_cast<std::size_t>(j)];
    v(n + 1 + j) = s.p1[static_cast<std::size_t>(j)];
  }
  return v;
}

inline StarState unstack_state(const Eigen::VectorXd& v) {
  const int dim = static_cast<int>(v.size());
  if (dim < 2 || dim % 2 != 0) throw std::invalid_argument("unstack_state: length must be even");
  const int levels = dim / 2;
  StarState s;
  s.p0.assign(v.data(), v.data() + levels);
  s.p1.assign(v.data() + levels, v.data() + dim);
  return s;
}

// Explicit mixing matrix of one AC step. Each pair (p0[j], p1[N-j]) gets the
// 2x2 block [[1-eta, eta], [eta, 1-eta]]; rows of every pair block sum to 1.
inline Eigen::MatrixXd mixing_matrix_swap(const SwapProfile& profile) {
  const int levels = static_cast<int>(profile.eta.size());
  if (levels < 1) throw std::invalid_argument("mixing_matrix_swap: empty profile");
  const int n = levels - 1;
  for (double e : profile.eta) {
    if (!(e >= 0.0 && e <= 1.0))
      throw std::invalid_argument("mixing_matrix_swap: eta entries must lie in [0,1]");
  }
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2 * levels, 2 * levels);
  for (int j = 0; j <= n; ++j) {
    const double e = profile.eta[static_cast<std::size_t>(j)];
    const int row0 = j;                  // p0[j]
    const int row1 = levels + (n - j);   // p1[N-j]
    m(row0, row0) = 1.0 - e;
    m(row0, row1) = e;
    m(row1, row1) = 1.0 - e;
    m(row1, row0) = e;
  }
  return m;
}

// Intra-subspace relaxation as a dense (N+1)x(N+1) linear system: N rows fix
// the relaxed adjacent differences, the last row enforces the
// degeneracy-weighted conservation (scaled by 2^-N to keep the rows balanced).
inline std::vector<double> dense_intra_solve(const std::vector<double>& p, double tau,
                                             const StarSystem& sys) {
  if (tau < 0.0) throw std::invalid_argument("dense_intra_solve: tau must be >= 0");
  const int n = static_cast<int>(p.size()) - 1;
  if (n < 0) throw std::invalid_argument("dense_intra_solve: empty population vector");
  const std::vector<double> c = binomial_row(n);
  const double f = std::exp(-tau / sys.t1_reset);
  const double two_n = std::ldexp(1.0, n);

  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  Eigen::VectorXd rhs(n + 1);
  for (int j = 0; j < n; ++j) {
    a(j, j) = 1.0;
    a(j, j + 1) = -1.0;
    const double d0 = p[static_cast<std::size_t>(j)] - p[static_cast<std::size_t>(j) + 1];
    rhs(j) = sys.gamma + (d0 - sys.gamma) * f;
  }
  double total = 0.0;
  for (int j = 0; j <= n; ++j) {
    a(n, j) = c[static_cast<std::size_t>(j)] / two_n;
    total += c[static_cast<std::size_t>(j)] * p[static_cast<std::size_t>(j)];
  }
  rhs(n) = total / two_n;

  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw std::runtime_error("dense_intra_solve: singular system");
  const Eigen::VectorXd x = lu.solve(rhs);
  return std::vector<double>(x.data(), x.data() + n + 1);
}

// Affine map of one iteration obtained by probing hbac_iterate on the zero
// vector and the canonical basis.
inline AffineIteration build_affine(const StarSystem& sys, const SwapProfile& profile,
                                    double tau_hb, AcModel model = AcModel::effective) {
  const int dim = 2 * (sys.n_reset + 1);
  auto apply = [&](const Eigen::VectorXd& v) {
    return stack_state(hbac_iterate(unstack_state(v), profile, tau_hb, sys, model));
  };
  AffineIteration out;
  out.offset = apply(Eigen::VectorXd::Zero(dim));
  out.matrix.resize(dim, dim);
  for (int i = 0; i < dim; ++i) out.matrix.col(i) = apply(Eigen::VectorXd::Unit(dim, i)) - out.offset;
  return out;
}

// Same map assembled symbolically from the three component maps, without
// calling into the closed-form implementations.
inline AffineIteration build_affine_symbolic(const StarSystem& sys, const SwapProfile& profile,
                                             double tau_hb) {
  const int n = sys.n_reset;
  const int levels = n + 1;
  const int dim = 2 * levels;
  const std::vector<double> cvec = binomial_row(n);
  const double two_n = std::ldexp(1.0, n);

  // Intra relaxation on one subspace: p(tau) = M p(0) + o with
  //   d(tau) = f D p + gamma (1-f) 1,   p(tau) = (U - 1 w^T U / 2^N) d(tau) + 1 w^T p / 2^N,
  // where D takes adjacent differences, U is the suffix-sum operator and w the
  // binomial weights.
  const double f = std::exp(-tau_hb / sys.t1_reset);
  Eigen::MatrixXd diff = Eigen::MatrixXd::Zero(n, levels);
  for (int j = 0; j < n; ++j) {
    diff(j, j) = 1.0;
    diff(j, j + 1) = -1.0;
  }
  Eigen::MatrixXd suffix = Eigen::MatrixXd::Zero(levels, n);
  for (int j = 0; j < levels; ++j)
    for (int i = j; i < n; ++i) suffix(j, i) = 1.0;
  Eigen::RowVectorXd w(levels);
  for (int j = 0; j < levels; ++j) w(j) = cvec[static_cast<std::size_t>(j)];
  const Eigen::MatrixXd recon = suffix - Eigen::VectorXd::Ones(levels) * (w * suffix) / two_n;
  const Eigen::MatrixXd intra_m =
      recon * (f * diff) + Eigen::VectorXd::Ones(levels) * w / two_n;
  const Eigen::VectorXd intra_o = recon * Eigen::VectorXd::Constant(n, sys.gamma * (1.0 - f));

  Eigen::MatrixXd intra = Eigen::MatrixXd::Zero(dim, dim);
  intra.topLeftCorner(levels, levels) = intra_m;
  intra.bottomRightCorner(levels, levels) = intra_m;
  Eigen::VectorXd intra_off(dim);
  intra_off << intra_o, intra_o;

  // Inter relaxation: per level j the 2x2 block mixes (p0[j], p1[j]) keeping
  // the sum and relaxing the difference toward 1.
  const double g = std::exp(-tau_hb / sys.t1_comp);
  Eigen::MatrixXd inter = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd inter_off = Eigen::VectorXd::Zero(dim);
  for (int j = 0; j < levels; ++j) {
    inter(j, j) = 0.5 * (1.0 + g);
    inter(j, levels + j) = 0.5 * (1.0 - g);
    inter(levels + j, j) = 0.5 * (1.0 - g);
    inter(levels + j, levels + j) = 0.5 * (1.0 + g);
    inter_off(j) = 0.5 * (1.0 - g);
    inter_off(levels + j) = -0.5 * (1.0 - g);
  }

  const Eigen::MatrixXd swap = mixing_matrix_swap(profile);

  AffineIteration out;
  out.matrix = inter * intra * swap;
  out.offset = inter * intra_off + inter_off;
  return out;
}

inline Eigen::VectorXd apply_affine(const AffineIteration& it, const Eigen::VectorXd& v) {
  return it.matrix * v + it.offset;
}

}  // namespace starcool::oracle
