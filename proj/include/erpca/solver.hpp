#ifndef ERPCA_SOLVER_HPP
#define ERPCA_SOLVER_HPP

// Single-group decomposition Theta = L + S of a stack of n matrices whose
// entries follow one exponential family, by ADMM on
//
//   sum_jk mean_nll(theta_jk; Mbar_jk) + alpha ||L||_* + beta ||S||_1
//   s.t. Theta = L + S
//
// with fixed step mu. Each iteration runs an SVT step for L, a soft
// threshold step for S, pq independent theta updates and the multiplier step.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "erpca/error.hpp"
#include "erpca/expfam.hpp"
#include "erpca/parallel.hpp"
#include "erpca/prox.hpp"
#include "erpca/types.hpp"

namespace erpca {

namespace detail {

// Order-independent mean: values are sorted before a compensated sum, so
// the result is bitwise invariant under permutation of the input.
template <typename Scalar>
Scalar permutation_invariant_mean(std::vector<Scalar>& values) {
  std::sort(values.begin(), values.end());
  Scalar sum = 0;
  Scalar comp = 0;
  for (Scalar v : values) {
    const Scalar t = sum + v;
    if (std::abs(sum) >= std::abs(v)) comp += (sum - t) + v;
    else comp += (v - t) + sum;
    sum = t;
  }
  return (sum + comp) / Scalar(values.size());
}

inline std::string cell_name(std::size_t matrix, Index row, Index col) {
  return "matrix " + std::to_string(matrix) + ", row " + std::to_string(row) + ", col " + std::to_string(col);
}

}  // namespace detail

/// n observed p x q matrices drawn entrywise from one family, sharing a
/// single parameter matrix.
template <typename Scalar>
class MatrixStack {
 public:
  MatrixStack(DistributionKind kind, std::vector<Matrix<Scalar>> matrices, Link link = Link::Mean)
      : kind_(kind), link_(link), matrices_(std::move(matrices)) {
    check_link(kind_, link_);
    if (matrices_.empty()) fail(ErrorCode::Shape, "matrix stack is empty");
    const Index p = matrices_.front().rows();
    const Index q = matrices_.front().cols();
    if (p <= 0 || q <= 0) fail(ErrorCode::Shape, "matrices must have positive dimensions");
    for (std::size_t i = 0; i < matrices_.size(); ++i) {
      const auto& m = matrices_[i];
      if (m.rows() != p || m.cols() != q) {
        fail(ErrorCode::Shape, "matrix " + std::to_string(i) + " is " + std::to_string(m.rows()) + "x" +
                                   std::to_string(m.cols()) + ", expected " + std::to_string(p) + "x" +
                                   std::to_string(q));
      }
      for (Index k = 0; k < q; ++k) {
        for (Index j = 0; j < p; ++j) {
          try {
            detail::require_observation(kind_, m(j, k));
          } catch (const Error& e) {
            fail(e.code(), std::string(e.what()) + " at " + detail::cell_name(i, j, k));
          }
        }
      }
    }
    mean_ = Matrix<Scalar>(p, q);
    std::vector<Scalar> cell(matrices_.size());
    for (Index k = 0; k < q; ++k) {
      for (Index j = 0; j < p; ++j) {
        for (std::size_t i = 0; i < matrices_.size(); ++i) cell[i] = matrices_[i](j, k);
        mean_(j, k) = detail::permutation_invariant_mean(cell);
      }
    }
  }

  Index rows() const { return mean_.rows(); }
  Index cols() const { return mean_.cols(); }
  Index size() const { return static_cast<Index>(matrices_.size()); }
  const DistributionKind& kind() const { return kind_; }
  Link link() const { return link_; }
  const std::vector<Matrix<Scalar>>& matrices() const { return matrices_; }

  /// Entrywise mean of the observations, the only data summary the solver
  /// reads.
  const Matrix<Scalar>& sufficient_mean() const { return mean_; }

 private:
  DistributionKind kind_;
  Link link_;
  std::vector<Matrix<Scalar>> matrices_;
  Matrix<Scalar> mean_;
};

/// What the solver consumes: family, link and the sufficient-statistic mean.
template <typename Scalar>
struct SufficientStats {
  DistributionKind kind;
  Link link = Link::Mean;
  Matrix<Scalar> mean;

  static SufficientStats from(const MatrixStack<Scalar>& stack) {
    return {stack.kind(), stack.link(), stack.sufficient_mean()};
  }
  Index rows() const { return mean.rows(); }
  Index cols() const { return mean.cols(); }
};

template <typename Scalar>
struct SolverConfig {
  Scalar alpha = 1;
  Scalar beta = 1;
  Scalar mu = 1;
  Scalar tol = Scalar(1e-7);
  int max_iter = 1000;
  std::optional<Index> init_rank;  // default ceil(min(p, q) / 5)
  int threads = 1;
  double clamp_eps = kClampEps;

  void validate(Index p, Index q) const {
    auto positive = [](Scalar v, const char* name) {
      if (!(v > Scalar(0)) || !std::isfinite(static_cast<double>(v))) {
        fail(ErrorCode::InvalidConfig, std::string(name) + " must be positive and finite");
      }
    };
    positive(alpha, "alpha");
    positive(beta, "beta");
    positive(mu, "mu");
    positive(tol, "tol");
    if (max_iter <= 0) fail(ErrorCode::InvalidConfig, "max_iter must be positive");
    if (init_rank && (*init_rank <= 0 || *init_rank > std::min(p, q))) {
      fail(ErrorCode::InvalidConfig, "init_rank must lie in [1, min(p, q)]");
    }
    if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) fail(ErrorCode::InvalidConfig, "clamp_eps must lie in (0, 0.5)");
  }

  Index resolved_init_rank(Index p, Index q) const {
    return init_rank.value_or((std::min(p, q) + 4) / 5);
  }
};

template <typename Scalar>
struct AdmmState {
  Matrix<Scalar> L;
  Matrix<Scalar> S;
  Matrix<Scalar> Theta;
  Matrix<Scalar> Y;
};

template <typename Scalar>
struct Decomposition {
  Matrix<Scalar> L;
  Matrix<Scalar> S;
  /// Natural-parameter matrix H under the canonical link.
  Matrix<Scalar> Theta;
  Matrix<Scalar> Y;
  DistributionKind kind;
  Link link = Link::Mean;
  int iterations = 0;
  Scalar final_residual = 0;
  std::vector<Scalar> objective_trace;
  std::vector<Scalar> residual_trace;
  bool converged = false;
  std::vector<std::string> warnings;

  /// Theta on the observation (mean) scale: logistic(H) under the canonical
  /// link, Theta itself otherwise.
  Matrix<Scalar> mean_parameters() const {
    if (link == Link::Mean) return Theta;
    return Theta.unaryExpr([](Scalar v) { return logistic(v); });
  }
};

template <typename Scalar>
Scalar primal_residual(const Matrix<Scalar>& theta, const Matrix<Scalar>& l, const Matrix<Scalar>& s) {
  return (theta - l - s).norm() / std::max(Scalar(1), theta.norm());
}

/// Clamped entrywise MLE on the mean scale (reciprocal mean for the
/// exponential rate).
template <typename Scalar>
Matrix<Scalar> entrywise_mle(const DistributionKind& kind, const Matrix<Scalar>& mean,
                             double clamp_eps = kClampEps) {
  return mean.unaryExpr([&](Scalar m) { return mle_from_mean(kind, m, clamp_eps); });
}

/// mu = pq / (4 ||Theta0||_1), or 1 when Theta0 vanishes.
template <typename Scalar>
Scalar default_mu(const Matrix<Scalar>& theta0) {
  const Scalar l1 = l1_norm(theta0);
  if (!(l1 > Scalar(0))) return Scalar(1);
  return Scalar(theta0.rows() * theta0.cols()) / (Scalar(4) * l1);
}

template <typename Scalar>
SolverConfig<Scalar> default_config(const SufficientStats<Scalar>& stats) {
  SolverConfig<Scalar> config;
  config.alpha = 1;
  config.beta = Scalar(1) / std::sqrt(Scalar(std::max(stats.rows(), stats.cols())));
  config.mu = default_mu(entrywise_mle(stats.kind, stats.mean, config.clamp_eps));
  return config;
}

template <typename Scalar>
SolverConfig<Scalar> default_config(const MatrixStack<Scalar>& stack) {
  return default_config(SufficientStats<Scalar>::from(stack));
}

/// Theta0 from the clamped entrywise MLE (logit of it under the canonical
/// link), L0 its best rank-k approximation, S0 = Y0 = 0.
template <typename Scalar>
AdmmState<Scalar> init_state(const SufficientStats<Scalar>& stats, const SolverConfig<Scalar>& config) {
  const Index p = stats.rows();
  const Index q = stats.cols();
  AdmmState<Scalar> state;
  state.Theta = entrywise_mle(stats.kind, stats.mean, config.clamp_eps);
  if (stats.link == Link::Canonical) state.Theta = state.Theta.unaryExpr([](Scalar v) { return logit(v); });
  state.L = truncate_rank(state.Theta, config.resolved_init_rank(p, q));
  state.S = Matrix<Scalar>::Zero(p, q);
  state.Y = Matrix<Scalar>::Zero(p, q);
  return state;
}

template <typename Scalar>
AdmmState<Scalar> init_state(const MatrixStack<Scalar>& stack, const SolverConfig<Scalar>& config) {
  return init_state(SufficientStats<Scalar>::from(stack), config);
}

/// Sum over cells of the averaged NLL at Theta (sample means clamped as in
/// the theta updates).
template <typename Scalar>
Scalar likelihood_term(const SufficientStats<Scalar>& stats, const Matrix<Scalar>& theta,
                       double clamp_eps = kClampEps) {
  Scalar total = 0;
  for (Index k = 0; k < theta.cols(); ++k) {
    for (Index j = 0; j < theta.rows(); ++j) {
      if (stats.link == Link::Canonical) {
        total += canonical_mean_nll(theta(j, k), stats.mean(j, k));
      } else {
        const Scalar m = clamp_sample_mean(stats.kind, stats.mean(j, k), clamp_eps);
        total += detail::mean_nll_unchecked(stats.kind, theta(j, k), m);
      }
    }
  }
  return total;
}

/// Penalised objective: likelihood term + alpha ||L||_* + beta ||S||_1.
template <typename Scalar>
Scalar objective(const AdmmState<Scalar>& state, const SufficientStats<Scalar>& stats,
                 const SolverConfig<Scalar>& config) {
  return likelihood_term(stats, state.Theta, config.clamp_eps) + config.alpha * nuclear_norm(state.L) +
         config.beta * l1_norm(state.S);
}

/// Writes theta_update for every cell given the current L, S, Y.
template <typename Scalar>
void update_theta(const SufficientStats<Scalar>& stats, Scalar mu, const Matrix<Scalar>& l,
                  const Matrix<Scalar>& s, const Matrix<Scalar>& y, Matrix<Scalar>& theta, int threads,
                  double clamp_eps = kClampEps) {
  const Index p = theta.rows();
  parallel_for(theta.size(), threads, [&](Index idx) {
    const Index j = idx % p;
    const Index k = idx / p;
    const EntryProblem<Scalar> prob{stats.mean(j, k), l(j, k), s(j, k), y(j, k), mu};
    theta(j, k) = theta_update(stats.kind, stats.link, prob, clamp_eps);
  });
}

/// Snapshot handed to an observer after each iteration: the state the
/// iteration started from and the state it produced.
template <typename Scalar>
struct IterationEvent {
  int iteration = 0;
  const AdmmState<Scalar>& before;
  const AdmmState<Scalar>& after;
  Scalar residual = 0;
  Scalar objective = 0;
};

template <typename Scalar>
using IterationObserver = std::function<void(const IterationEvent<Scalar>&)>;

template <typename Scalar>
Decomposition<Scalar> fit_from(const SufficientStats<Scalar>& stats, const SolverConfig<Scalar>& config,
                               AdmmState<Scalar> state, const std::type_identity_t<IterationObserver<Scalar>>& observer = {}) {
  const Index p = stats.rows();
  const Index q = stats.cols();
  check_link(stats.kind, stats.link);
  config.validate(p, q);
  if (state.L.rows() != p || state.L.cols() != q || state.S.rows() != p || state.S.cols() != q ||
      state.Theta.rows() != p || state.Theta.cols() != q || state.Y.rows() != p || state.Y.cols() != q) {
    fail(ErrorCode::Shape, "initial state does not match the data dimensions");
  }

  const Scalar mu = config.mu;
  const Scalar inv_mu = Scalar(1) / mu;

  Decomposition<Scalar> out;
  out.kind = stats.kind;
  out.link = stats.link;

  AdmmState<Scalar> next = state;
  for (int t = 1; t <= config.max_iter; ++t) {
    const SvtResult<Scalar> low = svt_with_spectrum((state.Theta - state.S + inv_mu * state.Y).eval(),
                                                    config.alpha * inv_mu);
    next.L = low.value;
    next.S = soft_threshold((state.Theta - next.L + inv_mu * state.Y).eval(), config.beta * inv_mu);
    update_theta(stats, mu, next.L, next.S, state.Y, next.Theta, config.threads, config.clamp_eps);
    next.Y = state.Y + mu * (next.Theta - next.L - next.S);

    if (!next.L.allFinite() || !next.S.allFinite() || !next.Theta.allFinite() || !next.Y.allFinite()) {
      fail(ErrorCode::Numeric, "non-finite iterate at iteration " + std::to_string(t));
    }

    const Scalar residual = primal_residual(next.Theta, next.L, next.S);
    const Scalar step = std::sqrt((next.L - state.L).squaredNorm() + (next.S - state.S).squaredNorm());
    const Scalar scale = std::max(Scalar(1), std::sqrt(state.L.squaredNorm() + state.S.squaredNorm()));
    const Scalar obj = likelihood_term(stats, next.Theta, config.clamp_eps) +
                       config.alpha * low.singular_values.sum() + config.beta * l1_norm(next.S);

    out.objective_trace.push_back(obj);
    out.residual_trace.push_back(residual);
    out.iterations = t;
    out.final_residual = residual;
    if (observer) observer(IterationEvent<Scalar>{t, state, next, residual, obj});

    std::swap(state, next);
    if (residual < config.tol && step / scale < config.tol) {
      out.converged = true;
      break;
    }
  }

  out.L = std::move(state.L);
  out.S = std::move(state.S);
  out.Theta = std::move(state.Theta);
  out.Y = std::move(state.Y);
  return out;
}

template <typename Scalar>
Decomposition<Scalar> fit(const SufficientStats<Scalar>& stats, const SolverConfig<Scalar>& config,
                          const std::type_identity_t<IterationObserver<Scalar>>& observer = {}) {
  config.validate(stats.rows(), stats.cols());
  return fit_from(stats, config, init_state(stats, config), observer);
}

template <typename Scalar>
Decomposition<Scalar> fit(const MatrixStack<Scalar>& stack, const SolverConfig<Scalar>& config,
                          const std::type_identity_t<IterationObserver<Scalar>>& observer = {}) {
  return fit(SufficientStats<Scalar>::from(stack), config, observer);
}

/// Fraction of entries that are exactly nonzero.
template <typename Derived>
double fraction_nonzero(const Eigen::MatrixBase<Derived>& x) {
  if (x.size() == 0) return 0.0;
  return static_cast<double>((x.array() != typename Derived::Scalar(0)).count()) / static_cast<double>(x.size());
}

}  // namespace erpca

#endif  // ERPCA_SOLVER_HPP
