#include <doctest.h>

#include <algorithm>
#include <random>

#include "erpca/simgen.hpp"
#include "erpca/solver.hpp"
#include "oracles.hpp"

using namespace erpca;

namespace {

std::vector<MatrixStack<double>> bernoulli_instance(Index p, std::uint64_t seed, Index n = 200) {
  SimSpec spec = SimSpec::preset(DistributionKind::bernoulli(), p, n, 1, seed);
  return sample_stack(make_ground_truth(spec), spec);
}

}  // namespace

TEST_CASE("MatrixStack validation names the offending cell") {
  std::vector<MatrixXd> ms{MatrixXd::Zero(2, 2), MatrixXd::Zero(2, 2)};
  ms[1](0, 1) = 0.5;
  try {
    MatrixStack<double> s(DistributionKind::bernoulli(), ms);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidParameter);
    CHECK(std::string(e.what()).find("matrix 1, row 0, col 1") != std::string::npos);
  }
  CHECK_THROWS_AS(MatrixStack<double>(DistributionKind::bernoulli(), {}), Error);
  CHECK_THROWS_AS(MatrixStack<double>(DistributionKind::bernoulli(), {MatrixXd::Zero(2, 2), MatrixXd::Zero(3, 2)}), Error);
  CHECK_THROWS_AS(MatrixStack<double>(DistributionKind::poisson(), {MatrixXd::Zero(2, 2)}, Link::Canonical), Error);
}

TEST_CASE("default_config examples") {
  const MatrixStack<double> s10(DistributionKind::poisson(), {MatrixXd::Ones(10, 10)});
  const auto c = default_config(s10);
  CHECK(c.alpha == 1.0);
  CHECK(c.beta == doctest::Approx(0.31622776601683794).epsilon(1e-15));
  CHECK(c.mu == doctest::Approx(0.25));
  const MatrixStack<double> wide(DistributionKind::gaussian(1.0), {MatrixXd::Ones(10, 100)});
  CHECK(default_config(wide).beta == doctest::Approx(0.1));
  const MatrixStack<double> zero(DistributionKind::gaussian(1.0), {MatrixXd::Zero(3, 3)});
  CHECK(default_config(zero).mu == 1.0);
  // Exponential uses the reciprocal mean.
  const MatrixStack<double> ex(DistributionKind::exponential(), {MatrixXd::Constant(4, 4, 2.0)});
  CHECK(default_config(ex).mu == doctest::Approx(16.0 / (4.0 * 8.0)));
}

TEST_CASE("init_state examples") {
  std::mt19937_64 gen(1);
  MatrixXd x = oracle::random_matrix(gen, 6, 5).cwiseAbs();
  x(0, 0) = 0.0;
  const MatrixStack<double> st(DistributionKind::poisson(), {x.array().round().matrix(), x.array().round().matrix()});
  SolverConfig<double> cfg = default_config(st);
  const auto s0 = init_state(st, cfg);
  CHECK(s0.Theta(0, 0) == 1e-6);
  CHECK(s0.S.isZero(0));
  CHECK(s0.Y.isZero(0));
  CHECK(numeric_rank(s0.L) <= 1);
  cfg.init_rank = 5;
  CHECK((init_state(st, cfg).L - init_state(st, cfg).Theta).norm() <= 1e-12);

  MatrixXd b = MatrixXd::Ones(3, 3);
  b.col(1).setZero();
  const MatrixStack<double> bs(DistributionKind::bernoulli(), {b});
  const auto bstate = init_state(bs, default_config(bs));
  CHECK(bstate.Theta(0, 1) == 1e-6);
  CHECK(bstate.Theta(0, 0) == 1.0 - 1e-6);
  const MatrixStack<double> bc(DistributionKind::bernoulli(), {b}, Link::Canonical);
  CHECK(init_state(bc, default_config(bc)).Theta(0, 1) == doctest::Approx(logit(1e-6)));
}

TEST_CASE("objective examples") {
  const MatrixStack<double> g(DistributionKind::gaussian(1.0), {MatrixXd::Zero(3, 3)});
  AdmmState<double> st{MatrixXd::Zero(3, 3), MatrixXd::Zero(3, 3), MatrixXd::Zero(3, 3), MatrixXd::Zero(3, 3)};
  const auto stats = SufficientStats<double>::from(g);
  CHECK(objective(st, stats, default_config(g)) == 0.0);

  std::mt19937_64 gen(2);
  VectorXd u = oracle::random_matrix(gen, 3, 1).col(0).normalized();
  VectorXd v = oracle::random_matrix(gen, 3, 1).col(0).normalized();
  st.L = u * v.transpose();
  SolverConfig<double> cfg;
  cfg.alpha = 2.5;
  CHECK(objective(st, stats, cfg) == doctest::Approx(2.5).epsilon(1e-12));

  // The likelihood term is minimised at the entrywise MLE.
  const MatrixStack<double> p(DistributionKind::poisson(), {MatrixXd::Constant(2, 2, 3.0), MatrixXd::Constant(2, 2, 5.0)});
  const auto ps = SufficientStats<double>::from(p);
  const double at_mle = likelihood_term(ps, entrywise_mle(ps.kind, ps.mean));
  std::uniform_real_distribution<double> u01(0.1, 10.0);
  for (int i = 0; i < 100; ++i) {
    MatrixXd t(2, 2);
    for (Index k = 0; k < 4; ++k) t.data()[k] = u01(gen);
    CHECK(likelihood_term(ps, t) >= at_mle);
  }
}

TEST_CASE("fit runs the ADMM updates in order and keeps prox optimality") {
  const auto stacks = bernoulli_instance(8, 3);
  const auto stats = SufficientStats<double>::from(stacks.front());
  const auto cfg = default_config(stacks.front());
  std::mt19937_64 gen(4);
  int events = 0;
  const auto d = fit(stats, cfg, [&](const IterationEvent<double>& ev) {
    ++events;
    if (ev.iteration > 5 && ev.iteration % 10 != 0) return;
    const double mu = cfg.mu;
    const MatrixXd xl = ev.before.Theta - ev.before.S + ev.before.Y / mu;
    const MatrixXd xs = ev.before.Theta - ev.after.L + ev.before.Y / mu;
    const double tl = cfg.alpha / mu, ts = cfg.beta / mu;
    CHECK((ev.after.L - svt(xl, tl)).norm() <= 1e-12);
    CHECK((ev.after.S - soft_threshold(xs, ts)).norm() <= 1e-14);
    const double fl = oracle::svt_objective(xl, ev.after.L, tl);
    const double fs = oracle::soft_objective(xs, ev.after.S, ts);
    for (int k = 0; k < 100; ++k) {
      const MatrixXd dlt = oracle::perturbation(gen, 8, 8, k);
      CHECK(oracle::svt_objective(xl, ev.after.L + dlt, tl) >= fl - 1e-9);
      CHECK(oracle::soft_objective(xs, ev.after.S + dlt, ts) >= fs - 1e-9);
    }
    const ParamDomain dom = domain(stats.kind);
    for (Index j = 0; j < 8; ++j) {
      for (Index k = 0; k < 8; ++k) {
        const double th = ev.after.Theta(j, k);
        CHECK(th >= dom.clamped_lower());
        CHECK(th <= dom.clamped_upper());
        if (th > dom.clamped_lower() && th < dom.clamped_upper()) {
          const EntryProblem<double> pr{clamp_sample_mean(stats.kind, stats.mean(j, k)), ev.after.L(j, k),
                                        ev.after.S(j, k), ev.before.Y(j, k), mu};
          CHECK(std::abs(zeta_derivative(stats.kind, th, pr)) <= 1e-6 * (1 + std::abs(th)));
        }
      }
    }
    CHECK((ev.after.Y - (ev.before.Y + mu * (ev.after.Theta - ev.after.L - ev.after.S))).norm() <= 1e-12);
  });
  CHECK(events == d.iterations);
  CHECK(d.converged);
  CHECK(d.final_residual < cfg.tol);
  CHECK(d.final_residual == doctest::Approx(primal_residual(d.Theta, d.L, d.S)).epsilon(1e-9));
  CHECK(static_cast<int>(d.objective_trace.size()) == d.iterations);
}

TEST_CASE("residual trend over the trace") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto stacks = bernoulli_instance(10, seed);
    const auto d = fit(stacks.front(), default_config(stacks.front()));
    int violations = 0;
    for (std::size_t t = 0; t + 5 < d.residual_trace.size(); ++t) {
      if (d.residual_trace[t + 5] > d.residual_trace[t] + 1e-9) ++violations;
    }
    // Soft check: flagged in output rather than asserted.
    if (violations) MESSAGE("seed " << seed << ": residual rose over a 5-step window " << violations << " times");
    CHECK(d.converged);
  }
}

TEST_CASE("fit is deterministic and invariant to stack order and thread count") {
  const auto stacks = bernoulli_instance(10, 5);
  const auto& st = stacks.front();
  auto cfg = default_config(st);
  const auto a = fit(st, cfg);
  const auto b = fit(st, cfg);
  CHECK(a.objective_trace == b.objective_trace);
  auto ms = st.matrices();
  std::reverse(ms.begin(), ms.end());
  std::mt19937_64 gen(1);
  std::shuffle(ms.begin(), ms.end(), gen);
  const MatrixStack<double> shuffled(st.kind(), ms);
  const auto c = fit(shuffled, cfg);
  CHECK(c.objective_trace == a.objective_trace);
  CHECK(c.L == a.L);
  cfg.threads = 4;
  const auto d = fit(st, cfg);
  CHECK(d.objective_trace == a.objective_trace);
  CHECK(d.S == a.S);
}

TEST_CASE("fit recovers a Gaussian low-rank plus sparse instance") {
  SimSpec spec = SimSpec::preset(DistributionKind::gaussian(1e-4), 10, 200, 1, 9);
  spec.target_rank = 2;
  spec.spike_count = 5;
  spec.spike_lo = spec.spike_hi = 0.3;
  const auto truth = make_ground_truth(spec);
  const auto stacks = sample_stack(truth, spec);
  auto cfg = default_config(stacks.front());
  cfg.max_iter = 20000;
  const auto d = fit(stacks.front(), cfg);
  CHECK(d.converged);
  CHECK((d.L - truth.L_true).norm() / truth.L_true.norm() <= 0.05);
}

TEST_CASE("degenerate fits") {
  std::mt19937_64 gen(3);
  const MatrixXd r1 = (oracle::random_matrix(gen, 6, 1) * oracle::random_matrix(gen, 1, 6));
  const MatrixStack<double> st(DistributionKind::gaussian(1.0), {r1});
  SolverConfig<double> cfg = default_config(st);
  cfg.alpha = 1e3;
  cfg.beta = 1e3;
  const auto d = fit(st, cfg);
  CHECK(d.S.isZero(0));
  CHECK(d.converged);
  CHECK(d.final_residual < cfg.tol);

  SolverConfig<double> big = default_config(st);
  big.beta = 1e6;
  big.max_iter = 1;
  CHECK(fit(st, big).S.isZero(0));
}

TEST_CASE("canonical fit reports natural parameters and their mean view") {
  const auto stacks = bernoulli_instance(8, 2);
  const MatrixStack<double> canon(stacks.front().kind(), stacks.front().matrices(), Link::Canonical);
  const auto d = fit(canon, default_config(canon));
  CHECK(d.converged);
  const MatrixXd probs = d.mean_parameters();
  for (Index i = 0; i < probs.size(); ++i) {
    CHECK(probs.data()[i] > 0.0);
    CHECK(probs.data()[i] < 1.0);
    CHECK(probs.data()[i] == doctest::Approx(logistic(d.Theta.data()[i])));
  }
}

TEST_CASE("config validation") {
  SolverConfig<double> c;
  c.alpha = 0;
  CHECK_THROWS_AS(c.validate(3, 3), Error);
  c = {};
  c.init_rank = 4;
  CHECK_THROWS_AS(c.validate(3, 3), Error);
  c = {};
  c.max_iter = 0;
  CHECK_THROWS_AS(c.validate(3, 3), Error);
  CHECK(SolverConfig<double>{}.resolved_init_rank(10, 12) == 2);
  CHECK(SolverConfig<double>{}.resolved_init_rank(11, 12) == 3);
}

TEST_CASE("fraction_nonzero") {
  MatrixXd m = MatrixXd::Zero(2, 5);
  m(1, 3) = -1e-300;
  CHECK(fraction_nonzero(m) == doctest::Approx(0.1));
}
