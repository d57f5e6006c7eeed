#ifndef ERPCA_TESTS_ORACLES_HPP
#define ERPCA_TESTS_ORACLES_HPP

// Reference computations written independently of the library: direct
// likelihood formulas, golden-section and bisection searches in long double,
// and brute-force proximal objectives.

#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "erpca/expfam.hpp"

namespace oracle {

using erpca::Family;
using real = long double;

/// Average negative log-likelihood with data-only terms dropped.
inline real mean_nll(Family f, real sigma2, real theta, real m) {
  switch (f) {
    case Family::Poisson: return theta - m * std::log(theta);
    case Family::Bernoulli: {
      real v = 0;
      if (m > 0) v -= m * std::log(theta);
      if (m < 1) v -= (1 - m) * std::log(1 - theta);
      return v;
    }
    case Family::Exponential: return -std::log(theta) + m * theta;
    case Family::Gaussian: return (theta * theta / 2 - theta * m) / sigma2;
  }
  return 0;
}

struct Entry {
  real mean, l, s, y, mu;
};

inline real zeta(Family f, real sigma2, real theta, const Entry& e) {
  const real r = theta - e.l - e.s + e.y / e.mu;
  return mean_nll(f, sigma2, theta, e.mean) + e.mu / 2 * r * r;
}

inline real golden_section(const std::function<real(real)>& f, real a, real b, int iters = 400) {
  const real inv_phi = (std::sqrt(5.0L) - 1) / 2;
  real c = b - inv_phi * (b - a);
  real d = a + inv_phi * (b - a);
  real fc = f(c), fd = f(d);
  for (int i = 0; i < iters && b - a > 1e-15L * (1 + std::abs(a) + std::abs(b)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  return (a + b) / 2;
}

/// Minimiser of zeta over the eps-clamped domain, with the sample mean
/// clamped the same way the solver clamps it.
inline real argmin_zeta(Family f, real sigma2, Entry e, real eps = 1e-6L) {
  if (f != Family::Gaussian) {
    real hi_mean = f == Family::Bernoulli ? 1 - eps : INFINITY;
    e.mean = std::min(std::max(e.mean, eps), hi_mean);
  }
  auto obj = [&](real t) { return zeta(f, sigma2, t, e); };
  real lo, hi;
  if (f == Family::Bernoulli) {
    lo = eps;
    hi = 1 - eps;
  } else {
    const real center = e.l + e.s - e.y / e.mu;
    real width = 1 + std::abs(center) + std::abs(e.mean) + 1 / e.mu;
    lo = f == Family::Gaussian ? center - width : eps;
    hi = std::max(center, lo) + width;
    if (f == Family::Gaussian) {
      while (obj(lo) < obj(lo + width / 4)) lo -= width, width *= 2;
    }
    while (obj(hi) < obj(hi - (hi - lo) / 4)) hi = lo + 2 * (hi - lo);
  }
  return golden_section(obj, lo, hi);
}

/// Root of sigma(eta) - mean + mu (eta - l - s) + y by plain bisection.
inline real canonical_root(const Entry& e) {
  auto g = [&](real eta) { return 1 / (1 + std::exp(-eta)) - e.mean + e.mu * (eta - e.l - e.s) + e.y; };
  real lo = -1, hi = 1;
  while (g(lo) > 0) lo *= 2;
  while (g(hi) < 0) hi *= 2;
  for (int i = 0; i < 300; ++i) {
    const real mid = (lo + hi) / 2;
    (g(mid) > 0 ? hi : lo) = mid;
  }
  return (lo + hi) / 2;
}

inline double l1(const Eigen::MatrixXd& x) { return x.cwiseAbs().sum(); }

inline double nuclear(const Eigen::MatrixXd& x) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(x);
  return svd.singularValues().sum();
}

/// tau ||Z||_1 + 1/2 ||X - Z||_F^2
inline double soft_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, double tau) {
  return tau * l1(z) + 0.5 * (x - z).squaredNorm();
}

/// tau ||Z||_* + 1/2 ||X - Z||_F^2
inline double svt_objective(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, double tau) {
  return tau * nuclear(z) + 0.5 * (x - z).squaredNorm();
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& gen, Eigen::Index p, Eigen::Index q, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Eigen::MatrixXd m(p, q);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(gen);
  return m;
}

/// Perturbations mixing dense noise, single-entry moves and low-rank moves.
inline Eigen::MatrixXd perturbation(std::mt19937_64& gen, Eigen::Index p, Eigen::Index q, int kind) {
  std::uniform_real_distribution<double> scale_dist(-6.0, 0.0);
  const double scale = std::pow(10.0, scale_dist(gen));
  switch (kind % 3) {
    case 0: return random_matrix(gen, p, q, scale);
    case 1: {
      Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p, q);
      std::uniform_int_distribution<Eigen::Index> r(0, p - 1), c(0, q - 1);
      std::normal_distribution<double> n(0.0, scale);
      m(r(gen), c(gen)) = n(gen);
      return m;
    }
    default: return random_matrix(gen, p, 1, scale) * random_matrix(gen, 1, q, 1.0);
  }
}

}  // namespace oracle

#endif  // ERPCA_TESTS_ORACLES_HPP
