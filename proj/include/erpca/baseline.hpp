#ifndef ERPCA_BASELINE_HPP
#define ERPCA_BASELINE_HPP

// Gaussian-likelihood RPCA used as the comparison method:
//
//   sum_ijk (M_ijk - theta_jk)^2 / (2 n sigma_hat^2) + ||L||_* + lambda ||S||_1
//   s.t. Theta = L + S
//
// This is the Gaussian member of the single-group problem with alpha = 1,
// beta = lambda and sigma^2 = sigma_hat^2, so it runs through the same ADMM.

#include <cmath>
#include <optional>
#include <vector>

#include "erpca/solver.hpp"

namespace erpca {

enum class VarianceMode {
  PerEntry,  // mean over cells of the across-sample variance
  Global,    // variance of all entries around the global mean
};

inline constexpr double kSigmaFloor = 1e-8;

template <typename Scalar>
struct BaselineConfig {
  std::optional<Scalar> lambda;  // default 1 / sqrt(max(p, q))
  std::optional<Scalar> mu;      // default pq / (4 ||Theta_hat||_1)
  std::optional<Scalar> sigma;   // overrides the pooled estimate
  Scalar tol = Scalar(1e-7);
  int max_iter = 1000;
  bool inverse_transform = false;
  VarianceMode variance = VarianceMode::PerEntry;
  std::optional<Index> init_rank;
  int threads = 1;
};

template <typename Scalar>
Scalar pooled_stddev(const std::vector<Matrix<Scalar>>& data, VarianceMode mode = VarianceMode::PerEntry) {
  if (data.empty()) fail(ErrorCode::Shape, "no data");
  const Index p = data.front().rows();
  const Index q = data.front().cols();
  const auto n = static_cast<Scalar>(data.size());
  if (n * Scalar(p * q) < Scalar(2)) fail(ErrorCode::Shape, "need at least two entries for a standard deviation");

  if (mode == VarianceMode::Global || data.size() == 1) {
    Scalar sum = 0;
    for (const auto& m : data) sum += m.sum();
    const Scalar count = n * Scalar(p * q);
    const Scalar mean = sum / count;
    Scalar ss = 0;
    for (const auto& m : data) ss += (m.array() - mean).square().sum();
    return std::sqrt(ss / count);
  }

  Matrix<Scalar> mean = Matrix<Scalar>::Zero(p, q);
  for (const auto& m : data) mean += m;
  mean /= n;
  Matrix<Scalar> ss = Matrix<Scalar>::Zero(p, q);
  for (const auto& m : data) ss.array() += (m - mean).array().square();
  return std::sqrt(ss.sum() / (n - Scalar(1)) / Scalar(p * q));
}

template <typename Scalar>
Scalar pooled_stddev(const MatrixStack<Scalar>& stack, VarianceMode mode = VarianceMode::PerEntry) {
  return pooled_stddev(stack.matrices(), mode);
}

/// Entrywise reciprocal of every matrix; applying it twice restores the data.
template <typename Scalar>
std::vector<Matrix<Scalar>> reciprocal(const std::vector<Matrix<Scalar>>& data) {
  std::vector<Matrix<Scalar>> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    if ((data[i].array() == Scalar(0)).any()) {
      fail(ErrorCode::InvalidParameter, "matrix " + std::to_string(i) + " has a zero entry; cannot invert");
    }
    out.push_back(data[i].cwiseInverse());
  }
  return out;
}

template <typename Scalar>
struct BaselineSetup {
  MatrixStack<Scalar> gaussian_stack;
  SolverConfig<Scalar> config;
  Scalar sigma_hat = 0;
  bool sigma_floored = false;
};

/// Builds the Gaussian stack and solver configuration the baseline runs.
template <typename Scalar>
BaselineSetup<Scalar> baseline_setup(const MatrixStack<Scalar>& stack, const BaselineConfig<Scalar>& config) {
  if (config.inverse_transform && !stack.kind().is(Family::Exponential)) {
    fail(ErrorCode::InvalidConfig, "inverse_transform applies to exponential data only");
  }
  std::vector<Matrix<Scalar>> data = config.inverse_transform ? reciprocal(stack.matrices()) : stack.matrices();

  Scalar sigma = config.sigma ? *config.sigma : pooled_stddev(data, config.variance);
  bool floored = false;
  if (!(sigma >= Scalar(kSigmaFloor))) {
    sigma = Scalar(kSigmaFloor);
    floored = true;
  }

  const Index p = stack.rows();
  const Index q = stack.cols();
  SolverConfig<Scalar> solver;
  solver.alpha = 1;
  solver.beta = config.lambda.value_or(Scalar(1) / std::sqrt(Scalar(std::max(p, q))));
  solver.mu = config.mu ? *config.mu : default_mu(entrywise_mle(stack.kind(), stack.sufficient_mean()));
  solver.tol = config.tol;
  solver.max_iter = config.max_iter;
  solver.init_rank = config.init_rank;
  solver.threads = config.threads;

  return {MatrixStack<Scalar>(DistributionKind::gaussian(static_cast<double>(sigma * sigma)), std::move(data)),
          solver, sigma, floored};
}

template <typename Scalar>
Decomposition<Scalar> fit_rpca(const MatrixStack<Scalar>& stack, const BaselineConfig<Scalar>& config = {},
                               const std::type_identity_t<IterationObserver<Scalar>>& observer = {}) {
  BaselineSetup<Scalar> setup = baseline_setup(stack, config);
  Decomposition<Scalar> out = fit(setup.gaussian_stack, setup.config, observer);
  if (setup.sigma_floored) out.warnings.push_back("sample standard deviation is zero; floored at 1e-8");
  return out;
}

}  // namespace erpca

#endif  // ERPCA_BASELINE_HPP
