#ifndef ERPCA_EXPFAM_HPP
#define ERPCA_EXPFAM_HPP

// One-parameter exponential families and the per-entry theta subproblem
//
//   zeta(theta) = mean_nll(theta; mbar) + (mu/2) (theta - l - s + y/mu)^2
//
// that the ADMM solvers minimise once per cell and iteration. The data-only
// term b(m) of every log density is dropped throughout, so reported
// likelihood values are comparable only within one family and data set.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>

#include "erpca/error.hpp"

namespace erpca {

enum class Family { Poisson, Bernoulli, Exponential, Gaussian };

/// Which scale the low-rank plus sparse split lives on. Canonical is the
/// logit scale and exists for Bernoulli only.
enum class Link { Mean, Canonical };

inline constexpr double kClampEps = 1e-6;

inline std::string to_string(Family family) {
  switch (family) {
    case Family::Poisson: return "poisson";
    case Family::Bernoulli: return "bernoulli";
    case Family::Exponential: return "exponential";
    case Family::Gaussian: return "gaussian";
  }
  return "unknown";
}

inline std::string to_string(Link link) {
  return link == Link::Mean ? "mean" : "canonical";
}

inline Family parse_family(std::string_view name) {
  if (name == "poisson") return Family::Poisson;
  if (name == "bernoulli") return Family::Bernoulli;
  if (name == "exponential") return Family::Exponential;
  if (name == "gaussian") return Family::Gaussian;
  fail(ErrorCode::InvalidConfig, "unknown distribution kind '" + std::string(name) + "'");
}

inline Link parse_link(std::string_view name) {
  if (name == "mean") return Link::Mean;
  if (name == "canonical") return Link::Canonical;
  fail(ErrorCode::InvalidConfig, "unknown link '" + std::string(name) + "'");
}

/// Noise distribution of every observed entry. The Gaussian variance is
/// treated as known.
class DistributionKind {
 public:
  DistributionKind() = default;

  static DistributionKind poisson() { return DistributionKind(Family::Poisson, std::nullopt); }
  static DistributionKind bernoulli() { return DistributionKind(Family::Bernoulli, std::nullopt); }
  static DistributionKind exponential() { return DistributionKind(Family::Exponential, std::nullopt); }
  static DistributionKind gaussian(double sigma2) {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2)) {
      fail(ErrorCode::InvalidConfig, "gaussian sigma2 must be positive and finite");
    }
    return DistributionKind(Family::Gaussian, sigma2);
  }
  static DistributionKind of(Family family, double sigma2 = 1.0) {
    return family == Family::Gaussian ? gaussian(sigma2) : DistributionKind(family, std::nullopt);
  }

  Family family() const { return family_; }
  bool is(Family f) const { return family_ == f; }
  double sigma2() const { return sigma2_.value_or(1.0); }
  const std::optional<double>& gaussian_sigma2() const { return sigma2_; }

  friend bool operator==(const DistributionKind&, const DistributionKind&) = default;

 private:
  DistributionKind(Family family, std::optional<double> sigma2) : family_(family), sigma2_(sigma2) {}

  Family family_ = Family::Gaussian;
  std::optional<double> sigma2_ = 1.0;
};

inline void check_link(const DistributionKind& kind, Link link) {
  if (link == Link::Canonical && !kind.is(Family::Bernoulli)) {
    fail(ErrorCode::InvalidConfig, "canonical link supported for bernoulli only");
  }
}

struct ParamDomain {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  double clamp_eps = kClampEps;

  bool finite_lower() const { return std::isfinite(lower); }
  bool finite_upper() const { return std::isfinite(upper); }
  double clamped_lower() const { return lower + clamp_eps; }
  double clamped_upper() const { return upper - clamp_eps; }

  template <typename Scalar>
  bool contains_open(Scalar value) const {
    return std::isfinite(static_cast<double>(value)) && value > lower && value < upper;
  }

  template <typename Scalar>
  Scalar clamp(Scalar value) const {
    if (finite_lower() && value < Scalar(clamped_lower())) return Scalar(clamped_lower());
    if (finite_upper() && value > Scalar(clamped_upper())) return Scalar(clamped_upper());
    return value;
  }
};

inline ParamDomain domain(const DistributionKind& kind, Link link = Link::Mean,
                          double clamp_eps = kClampEps) {
  ParamDomain d;
  d.clamp_eps = clamp_eps;
  if (link == Link::Canonical) return d;
  switch (kind.family()) {
    case Family::Poisson:
    case Family::Exponential:
      d.lower = 0.0;
      break;
    case Family::Bernoulli:
      d.lower = 0.0;
      d.upper = 1.0;
      break;
    case Family::Gaussian:
      break;
  }
  return d;
}

template <typename Scalar>
Scalar clamp_to_domain(const DistributionKind& kind, Link link, Scalar value,
                       double clamp_eps = kClampEps) {
  return domain(kind, link, clamp_eps).clamp(value);
}

/// Sample means on the boundary of the mean space (0 or 1 for Bernoulli, 0
/// for the positive families) are pulled inside so every likelihood term
/// stays finite.
template <typename Scalar>
Scalar clamp_sample_mean(const DistributionKind& kind, Scalar mean, double clamp_eps = kClampEps) {
  return kind.is(Family::Gaussian) ? mean : clamp_to_domain(kind, Link::Mean, mean, clamp_eps);
}

/// Entrywise maximum likelihood estimate of theta from a sample mean. The
/// exponential family here is rate-parameterised, so its MLE is 1/mean.
template <typename Scalar>
Scalar mle_from_mean(const DistributionKind& kind, Scalar mean, double clamp_eps = kClampEps) {
  const Scalar m = clamp_sample_mean(kind, mean, clamp_eps);
  if (kind.is(Family::Exponential)) return clamp_to_domain(kind, Link::Mean, Scalar(1) / m, clamp_eps);
  return m;
}

namespace detail {

template <typename Scalar>
std::string describe(const char* what, Scalar value) {
  std::ostringstream os;
  os.precision(17);
  os << what << '=' << value;
  return os.str();
}

template <typename Scalar>
void require_theta(const DistributionKind& kind, Scalar theta) {
  const ParamDomain d = domain(kind);
  if (!d.contains_open(theta)) {
    fail(ErrorCode::InvalidParameter, describe("theta", theta) + " outside the parameter domain of " +
                                          to_string(kind.family()));
  }
}

template <typename Scalar>
void require_observation(const DistributionKind& kind, Scalar m) {
  const double v = static_cast<double>(m);
  bool ok = std::isfinite(v);
  switch (kind.family()) {
    case Family::Bernoulli: ok = ok && (v == 0.0 || v == 1.0); break;
    case Family::Poisson: ok = ok && v >= 0.0 && v == std::floor(v); break;
    case Family::Exponential: ok = ok && v > 0.0; break;
    case Family::Gaussian: break;
  }
  if (!ok) {
    fail(ErrorCode::InvalidParameter,
         describe("observation", m) + " is not a valid " + to_string(kind.family()) + " value");
  }
}

template <typename Scalar>
void require_mean(const DistributionKind& kind, Scalar mean) {
  const double v = static_cast<double>(mean);
  bool ok = std::isfinite(v);
  switch (kind.family()) {
    case Family::Bernoulli: ok = ok && v >= 0.0 && v <= 1.0; break;
    case Family::Poisson:
    case Family::Exponential: ok = ok && v >= 0.0; break;
    case Family::Gaussian: break;
  }
  if (!ok) {
    fail(ErrorCode::InvalidParameter,
         describe("sample_mean", mean) + " is not a valid " + to_string(kind.family()) + " mean");
  }
}

// m * log(theta) with the 0 * log(0) = 0 convention.
template <typename Scalar>
Scalar xlogy(Scalar m, Scalar theta) {
  return m == Scalar(0) ? Scalar(0) : m * std::log(theta);
}

template <typename Scalar>
Scalar mean_nll_unchecked(const DistributionKind& kind, Scalar theta, Scalar mean) {
  switch (kind.family()) {
    case Family::Poisson: return theta - xlogy(mean, theta);
    case Family::Bernoulli: return -xlogy(mean, theta) - xlogy(Scalar(1) - mean, Scalar(1) - theta);
    case Family::Exponential: return theta * mean - std::log(theta);
    case Family::Gaussian: return (theta * theta / Scalar(2) - theta * mean) / Scalar(kind.sigma2());
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar mean_nll_derivative_unchecked(const DistributionKind& kind, Scalar theta, Scalar mean) {
  switch (kind.family()) {
    case Family::Poisson: return Scalar(1) - mean / theta;
    case Family::Bernoulli: return -mean / theta + (Scalar(1) - mean) / (Scalar(1) - theta);
    case Family::Exponential: return mean - Scalar(1) / theta;
    case Family::Gaussian: return (theta - mean) / Scalar(kind.sigma2());
  }
  return Scalar(0);
}

template <typename Scalar>
Scalar mean_nll_curvature_unchecked(const DistributionKind& kind, Scalar theta, Scalar mean) {
  switch (kind.family()) {
    case Family::Poisson: return mean / (theta * theta);
    case Family::Bernoulli:
      return mean / (theta * theta) + (Scalar(1) - mean) / ((Scalar(1) - theta) * (Scalar(1) - theta));
    case Family::Exponential: return Scalar(1) / (theta * theta);
    case Family::Gaussian: return Scalar(1) / Scalar(kind.sigma2());
  }
  return Scalar(0);
}

}  // namespace detail

/// Negative log-likelihood of a single observation, without b(m).
template <typename Scalar>
Scalar nll(const DistributionKind& kind, Scalar theta, Scalar m) {
  detail::require_theta(kind, theta);
  detail::require_observation(kind, m);
  return detail::mean_nll_unchecked(kind, theta, m);
}

/// Average negative log-likelihood of n observations with the given sample
/// mean. Every supported family has t(m) = m (up to the Gaussian scale), so
/// this equals the average of nll() exactly.
template <typename Scalar>
Scalar mean_nll(const DistributionKind& kind, Scalar theta, Scalar sample_mean) {
  detail::require_theta(kind, theta);
  detail::require_mean(kind, sample_mean);
  return detail::mean_nll_unchecked(kind, theta, sample_mean);
}

template <typename Scalar>
Scalar mean_nll_derivative(const DistributionKind& kind, Scalar theta, Scalar sample_mean) {
  detail::require_theta(kind, theta);
  detail::require_mean(kind, sample_mean);
  return detail::mean_nll_derivative_unchecked(kind, theta, sample_mean);
}

template <typename Scalar>
Scalar logistic(Scalar eta) {
  if (eta >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-eta));
  const Scalar e = std::exp(eta);
  return e / (Scalar(1) + e);
}

template <typename Scalar>
Scalar logit(Scalar p) {
  return std::log(p) - std::log1p(-p);
}

template <typename Scalar>
Scalar softplus(Scalar eta) {
  return std::max(eta, Scalar(0)) + std::log1p(std::exp(-std::abs(eta)));
}

/// Bernoulli average NLL on the logit scale: -mbar * eta + log(1 + e^eta).
template <typename Scalar>
Scalar canonical_mean_nll(Scalar eta, Scalar sample_mean) {
  return -sample_mean * eta + softplus(eta);
}

/// The data of one cell's theta subproblem. `anchor()` is where the
/// quadratic coupling term vanishes.
template <typename Scalar>
struct EntryProblem {
  Scalar sample_mean{};
  Scalar l{};
  Scalar s{};
  Scalar y{};
  Scalar mu{1};

  Scalar anchor() const { return l + s - y / mu; }
  Scalar coupling(Scalar theta) const {
    const Scalar r = theta - anchor();
    return mu / Scalar(2) * r * r;
  }
  Scalar coupling_derivative(Scalar theta) const { return mu * (theta - l - s) + y; }
};

template <typename Scalar>
Scalar zeta(const DistributionKind& kind, Scalar theta, const EntryProblem<Scalar>& prob) {
  return mean_nll(kind, theta, prob.sample_mean) + prob.coupling(theta);
}

template <typename Scalar>
Scalar zeta_derivative(const DistributionKind& kind, Scalar theta, const EntryProblem<Scalar>& prob) {
  return mean_nll_derivative(kind, theta, prob.sample_mean) + prob.coupling_derivative(theta);
}

template <typename Scalar>
Scalar canonical_zeta(Scalar eta, const EntryProblem<Scalar>& prob) {
  return canonical_mean_nll(eta, prob.sample_mean) + prob.coupling(eta);
}

template <typename Scalar>
Scalar canonical_zeta_derivative(Scalar eta, const EntryProblem<Scalar>& prob) {
  return logistic(eta) - prob.sample_mean + prob.coupling_derivative(eta);
}

namespace detail {

template <typename Scalar>
struct Roots {
  std::array<Scalar, 3> values{};
  int count = 0;
  void push(Scalar v) { values[static_cast<std::size_t>(count++)] = v; }
};

// Real roots of a x^2 + b x + c with a != 0, using the cancellation-free form.
template <typename Scalar>
Roots<Scalar> quadratic_roots(Scalar a, Scalar b, Scalar c) {
  Roots<Scalar> roots;
  const Scalar disc = b * b - Scalar(4) * a * c;
  if (disc < Scalar(0)) return roots;
  const Scalar sq = std::sqrt(disc);
  const Scalar q = b >= Scalar(0) ? -(b + sq) / Scalar(2) : -(b - sq) / Scalar(2);
  if (q == Scalar(0)) {
    roots.push(Scalar(0));
    return roots;
  }
  roots.push(q / a);
  roots.push(c / q);
  return roots;
}

template <typename Scalar>
Scalar cubic_value(const std::array<Scalar, 4>& k, Scalar x) {
  return ((k[0] * x + k[1]) * x + k[2]) * x + k[3];
}

// Real roots of k0 x^3 + k1 x^2 + k2 x + k3 with k0 != 0: trigonometric
// form for three real roots, Cardano otherwise, then Newton polishing.
template <typename Scalar>
Roots<Scalar> cubic_roots(const std::array<Scalar, 4>& k) {
  const Scalar B = k[1] / k[0];
  const Scalar C = k[2] / k[0];
  const Scalar D = k[3] / k[0];
  const Scalar shift = B / Scalar(3);
  const Scalar p = C - B * B / Scalar(3);
  const Scalar q = Scalar(2) * B * B * B / Scalar(27) - B * C / Scalar(3) + D;
  const Scalar disc = q * q / Scalar(4) + p * p * p / Scalar(27);

  Roots<Scalar> roots;
  if (p == Scalar(0)) {
    roots.push(std::cbrt(-q) - shift);
  } else if (disc > Scalar(0)) {
    const Scalar sq = std::sqrt(disc);
    // Pick the larger-magnitude cube root to avoid cancellation.
    const Scalar u = std::cbrt(-q / Scalar(2) + (q <= Scalar(0) ? sq : -sq));
    const Scalar t = u == Scalar(0) ? Scalar(0) : u - p / (Scalar(3) * u);
    roots.push(t - shift);
  } else {
    const Scalar r = Scalar(2) * std::sqrt(-p / Scalar(3));
    Scalar arg = Scalar(3) * q / (p * r);
    arg = std::clamp(arg, Scalar(-1), Scalar(1));
    const Scalar phi = std::acos(arg) / Scalar(3);
    const Scalar two_pi_3 = Scalar(2.0943951023931954923);
    for (int i = 0; i < 3; ++i) roots.push(r * std::cos(phi - two_pi_3 * Scalar(i)) - shift);
  }

  for (int i = 0; i < roots.count; ++i) {
    Scalar& x = roots.values[static_cast<std::size_t>(i)];
    for (int it = 0; it < 4; ++it) {
      const Scalar f = cubic_value(k, x);
      const Scalar df = (Scalar(3) * k[0] * x + Scalar(2) * k[1]) * x + k[2];
      if (df == Scalar(0)) break;
      const Scalar next = x - f / df;
      if (!std::isfinite(next) || std::abs(cubic_value(k, next)) >= std::abs(f)) break;
      x = next;
    }
  }
  return roots;
}

template <typename Scalar>
void require_problem(const EntryProblem<Scalar>& prob) {
  if (!(prob.mu > Scalar(0))) fail(ErrorCode::InvalidConfig, describe("mu", prob.mu) + " must be positive");
  if (!std::isfinite(prob.sample_mean) || !std::isfinite(prob.l) || !std::isfinite(prob.s) ||
      !std::isfinite(prob.y) || !std::isfinite(prob.mu)) {
    fail(ErrorCode::Numeric, "non-finite input to theta update");
  }
}

}  // namespace detail

/// argmin of zeta over the clamped parameter domain via the stationarity
/// polynomial (linear for Gaussian, quadratic for Poisson and Exponential,
/// cubic for Bernoulli). Every in-domain real root and every finite clamped
/// boundary is scored and the smallest zeta wins.
template <typename Scalar>
Scalar theta_update_closed_form(const DistributionKind& kind, EntryProblem<Scalar> prob,
                                double clamp_eps = kClampEps) {
  detail::require_problem(prob);
  detail::require_mean(kind, prob.sample_mean);
  prob.sample_mean = clamp_sample_mean(kind, prob.sample_mean, clamp_eps);

  const Scalar mu = prob.mu;
  const Scalar c = prob.l + prob.s;
  const Scalar y = prob.y;
  const Scalar m = prob.sample_mean;

  if (kind.is(Family::Gaussian)) {
    const Scalar w = Scalar(1) / Scalar(kind.sigma2());
    return (m * w + mu * c - y) / (w + mu);
  }

  detail::Roots<Scalar> roots;
  switch (kind.family()) {
    case Family::Poisson: roots = detail::quadratic_roots(mu, -mu * c + y + Scalar(1), -m); break;
    case Family::Exponential: roots = detail::quadratic_roots(mu, -mu * c + y + m, Scalar(-1)); break;
    case Family::Bernoulli:
      roots = detail::cubic_roots<Scalar>({-mu, mu * (Scalar(1) + c) - y, Scalar(1) - mu * c + y, -m});
      break;
    case Family::Gaussian: break;
  }

  const ParamDomain d = domain(kind, Link::Mean, clamp_eps);
  const Scalar lo = Scalar(d.clamped_lower());
  const Scalar hi = d.finite_upper() ? Scalar(d.clamped_upper()) : std::numeric_limits<Scalar>::infinity();

  Scalar best = lo;
  Scalar best_value = std::numeric_limits<Scalar>::infinity();
  auto consider = [&](Scalar theta) {
    if (!(theta >= lo && theta <= hi)) return;
    const Scalar value = detail::mean_nll_unchecked(kind, theta, m) + prob.coupling(theta);
    if (value < best_value) {
      best_value = value;
      best = theta;
    }
  };
  for (int i = 0; i < roots.count; ++i) consider(roots.values[static_cast<std::size_t>(i)]);
  consider(lo);
  if (d.finite_upper()) consider(hi);

  // Newton polish on zeta' itself for interior winners.
  if (best > lo && best < hi) {
    Scalar theta = best;
    for (int it = 0; it < 3; ++it) {
      const Scalar g = detail::mean_nll_derivative_unchecked(kind, theta, m) + prob.coupling_derivative(theta);
      const Scalar h = detail::mean_nll_curvature_unchecked(kind, theta, m) + mu;
      const Scalar next = theta - g / h;
      if (!(next > lo && next < hi)) break;
      const Scalar g_next =
          detail::mean_nll_derivative_unchecked(kind, next, m) + prob.coupling_derivative(next);
      if (!(std::abs(g_next) < std::abs(g))) break;
      theta = next;
    }
    best = theta;
  }
  return best;
}

/// argmin over eta in R of -mbar*eta + log(1+e^eta) + coupling, by Newton's
/// method safeguarded with bisection. The derivative is strictly increasing,
/// so the root is unique and bracketed by anchor +/- 1/mu.
template <typename Scalar>
Scalar theta_update_canonical(EntryProblem<Scalar> prob, Scalar tolerance = Scalar(1e-10)) {
  detail::require_problem(prob);
  if (!(prob.sample_mean >= Scalar(0) && prob.sample_mean <= Scalar(1))) {
    fail(ErrorCode::InvalidParameter, detail::describe("sample_mean", prob.sample_mean) +
                                          " is not a valid bernoulli mean");
  }
  const Scalar c = prob.l + prob.s;
  Scalar lo = c + (prob.sample_mean - Scalar(1) - prob.y) / prob.mu;
  Scalar hi = c + (prob.sample_mean - prob.y) / prob.mu;
  Scalar eta = std::clamp(c - prob.y / prob.mu, lo, hi);

  for (int it = 0; it < 200; ++it) {
    const Scalar sig = logistic(eta);
    const Scalar g = sig - prob.sample_mean + prob.coupling_derivative(eta);
    if (std::abs(g) <= tolerance) return eta;
    if (g > Scalar(0)) hi = eta;
    else lo = eta;
    const Scalar h = sig * (Scalar(1) - sig) + prob.mu;
    Scalar next = eta - g / h;
    if (!(next > lo && next < hi)) next = (lo + hi) / Scalar(2);
    if (next == eta) return eta;
    eta = next;
  }
  fail(ErrorCode::Numeric, "canonical theta update did not converge");
}

/// Dispatches to the update matching the link.
template <typename Scalar>
Scalar theta_update(const DistributionKind& kind, Link link, const EntryProblem<Scalar>& prob,
                    double clamp_eps = kClampEps) {
  if (link == Link::Canonical) return theta_update_canonical(prob);
  return theta_update_closed_form(kind, prob, clamp_eps);
}

}  // namespace erpca

#endif  // ERPCA_EXPFAM_HPP
