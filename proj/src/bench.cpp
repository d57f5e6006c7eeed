#include "erpca/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "erpca/baseline.hpp"
#include "erpca/io.hpp"
#include "erpca/multi.hpp"
#include "erpca/parallel.hpp"
#include "erpca/rng.hpp"

namespace erpca {

using nlohmann::json;

const char* to_string(Method m) { return m == Method::Erpca ? "erpca" : "rpca_baseline"; }

double frobenius_error(const MatrixXd& est, const MatrixXd& truth) {
  if (est.rows() != truth.rows() || est.cols() != truth.cols()) {
    fail(ErrorCode::Shape, "frobenius_error: " + std::to_string(est.rows()) + "x" + std::to_string(est.cols()) +
                               " vs " + std::to_string(truth.rows()) + "x" + std::to_string(truth.cols()));
  }
  return (est - truth).norm();
}

void BenchSuite::validate() const {
  if (p_list.empty()) fail(ErrorCode::InvalidConfig, "suite p list is empty");
  for (Index p : p_list) {
    if (p < 2) fail(ErrorCode::InvalidConfig, "suite p values must be at least 2");
  }
  if (trials < 1) fail(ErrorCode::InvalidConfig, "trials must be positive");
  if (n < group_count()) fail(ErrorCode::InvalidConfig, "n must be at least the number of groups");
  if (multi && groups < 2) fail(ErrorCode::InvalidConfig, "multi mode needs at least 2 groups");
  if (max_iter < 1) fail(ErrorCode::InvalidConfig, "max_iter must be positive");
  if (!(tol > 0.0)) fail(ErrorCode::InvalidConfig, "tol must be positive");
}

std::uint64_t trial_seed(std::uint64_t suite_seed, Index p, int trial) {
  return mix64(mix64(suite_seed) ^ mix64((static_cast<std::uint64_t>(p) << 32) | static_cast<std::uint32_t>(trial)));
}

BenchSuite parse_suite(const json& doc) {
  if (!doc.is_object()) fail(ErrorCode::InvalidConfig, "suite must be a JSON object");
  static const std::set<std::string> allowed{"p",   "kind", "n",      "trials", "mode",    "G",
                                             "seed", "sigma2", "max_iter", "tol", "record_wall_time", "baseline_variance"};
  for (const auto& [key, _] : doc.items()) {
    if (!allowed.count(key)) fail(ErrorCode::InvalidConfig, "unknown key '" + key + "' in suite");
  }
  BenchSuite s;
  try {
    if (!doc.contains("p") || !doc.contains("kind")) fail(ErrorCode::InvalidConfig, "suite requires p and kind");
    const json& p = doc.at("p");
    s.p_list = p.is_array() ? p.get<std::vector<Index>>() : std::vector<Index>{p.get<Index>()};
    const Family family = parse_family(doc.at("kind").get<std::string>());
    if (doc.contains("sigma2") && family != Family::Gaussian) {
      fail(ErrorCode::InvalidConfig, "sigma2 is only valid for gaussian");
    }
    s.kind = DistributionKind::of(family, doc.value("sigma2", 1.0));
    s.n = doc.value("n", s.n);
    s.trials = doc.value("trials", s.trials);
    const std::string mode = doc.value("mode", std::string("single"));
    if (mode == "multi") s.multi = true;
    else if (mode != "single") fail(ErrorCode::InvalidConfig, "mode must be 'single' or 'multi'");
    s.groups = doc.value("G", s.groups);
    s.seed = doc.value("seed", s.seed);
    s.max_iter = doc.value("max_iter", s.max_iter);
    s.tol = doc.value("tol", s.tol);
    s.record_wall_time = doc.value("record_wall_time", s.record_wall_time);
    const std::string variance = doc.value("baseline_variance", std::string("per_entry"));
    if (variance == "global") s.baseline_variance = VarianceMode::Global;
    else if (variance != "per_entry") fail(ErrorCode::InvalidConfig, "baseline_variance must be 'per_entry' or 'global'");
  } catch (const json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("suite: ") + e.what());
  }
  s.validate();
  return s;
}

json to_json(const BenchSuite& s) {
  json doc = {{"p", s.p_list},
              {"kind", to_string(s.kind.family())},
              {"n", s.n},
              {"trials", s.trials},
              {"mode", s.multi ? "multi" : "single"},
              {"seed", s.seed},
              {"max_iter", s.max_iter},
              {"tol", s.tol},
              {"record_wall_time", s.record_wall_time},
              {"baseline_variance", s.baseline_variance == VarianceMode::Global ? "global" : "per_entry"}};
  if (s.multi) doc["G"] = s.groups;
  if (s.kind.is(Family::Gaussian)) doc["sigma2"] = s.kind.sigma2();
  return doc;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string sanitize(std::string msg) {
  std::replace_if(msg.begin(), msg.end(), [](char c) { return c == ',' || c == '\n' || c == '"'; }, ';');
  return "error: " + msg;
}

double group_error(const std::vector<MatrixXd>& est, const std::vector<MatrixXd>& truth) {
  double sq = 0;
  for (std::size_t g = 0; g < truth.size(); ++g) {
    const double e = frobenius_error(est[std::min(g, est.size() - 1)], truth[g]);
    sq += e * e;
  }
  return std::sqrt(sq);
}

}  // namespace

std::vector<TrialResult> run_trial(const BenchSuite& suite, Index p, int trial) {
  const std::uint64_t seed = trial_seed(suite.seed, p, trial);
  const SimSpec spec = SimSpec::preset(suite.kind, p, suite.n, suite.group_count(), seed);
  const GroundTruth truth = make_ground_truth(spec);
  const std::vector<MatrixStack<double>> stacks = sample_stack(truth, spec);

  TrialResult base;
  base.p = p;
  base.kind = suite.kind.family();
  base.seed = seed;
  base.trial = trial;
  TrialResult ours = base;
  ours.method = Method::Erpca;
  TrialResult theirs = base;
  theirs.method = Method::RpcaBaseline;

  try {
    const auto start = std::chrono::steady_clock::now();
    if (suite.multi) {
      MultiConfig<double> config = default_multi_config(stacks);
      config.max_iter = suite.max_iter;
      config.tol = suite.tol;
      const MultiDecomposition<double> d = fit_multi(stacks, config);
      ours.wall_time_s = seconds_since(start);
      ours.err_L = frobenius_error(d.L, truth.L_true);
      ours.err_S = group_error(d.S, truth.S_true);
      ours.rank_L = numeric_rank(d.L);
      for (const auto& s : d.S) ours.pct_nz_S += fraction_nonzero(s) / static_cast<double>(d.S.size());
      ours.iterations = d.stage1.iterations;
      for (const auto& g : d.groups) ours.iterations = std::max(ours.iterations, g.iterations);
      if (!d.converged()) ours.status = "not_converged";
    } else {
      SolverConfig<double> config = default_config(stacks.front());
      config.max_iter = suite.max_iter;
      config.tol = suite.tol;
      const Decomposition<double> d = fit(stacks.front(), config);
      ours.wall_time_s = seconds_since(start);
      ours.err_L = frobenius_error(d.L, truth.L_true);
      ours.err_S = frobenius_error(d.S, truth.S_true.front());
      ours.rank_L = numeric_rank(d.L);
      ours.pct_nz_S = fraction_nonzero(d.S);
      ours.iterations = d.iterations;
      if (!d.converged) ours.status = "not_converged";
    }
  } catch (const std::exception& e) {
    ours.status = sanitize(e.what());
  }

  try {
    std::vector<MatrixXd> pooled;
    for (const auto& s : stacks) pooled.insert(pooled.end(), s.matrices().begin(), s.matrices().end());
    const MatrixStack<double> all(suite.kind, std::move(pooled));
    BaselineConfig<double> config;
    config.max_iter = suite.max_iter;
    config.tol = suite.tol;
    config.inverse_transform = suite.kind.is(Family::Exponential);
    config.variance = suite.baseline_variance;
    const auto start = std::chrono::steady_clock::now();
    const Decomposition<double> d = fit_rpca(all, config);
    theirs.wall_time_s = seconds_since(start);
    theirs.err_L = frobenius_error(d.L, truth.L_true);
    theirs.err_S = group_error({d.S}, truth.S_true);
    theirs.rank_L = numeric_rank(d.L);
    theirs.pct_nz_S = fraction_nonzero(d.S);
    theirs.iterations = d.iterations;
    if (!d.converged) theirs.status = "not_converged";
  } catch (const std::exception& e) {
    theirs.status = sanitize(e.what());
  }
  return {ours, theirs};
}

std::vector<TrialResult> run_experiment(const BenchSuite& suite, int threads) {
  suite.validate();
  std::vector<std::pair<Index, int>> jobs;
  for (Index p : suite.p_list) {
    for (int t = 0; t < suite.trials; ++t) jobs.emplace_back(p, t);
  }
  std::vector<std::vector<TrialResult>> results(jobs.size());
  parallel_for(static_cast<Index>(jobs.size()), threads, [&](Index i) {
    const auto j = static_cast<std::size_t>(i);
    results[j] = run_trial(suite, jobs[j].first, jobs[j].second);
  });
  std::vector<TrialResult> rows;
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  std::stable_sort(rows.begin(), rows.end(), [](const TrialResult& a, const TrialResult& b) {
    return std::tie(a.p, a.trial, a.method) < std::tie(b.p, b.trial, b.method);
  });
  return rows;
}

std::string results_csv(const std::vector<TrialResult>& rows, bool with_wall_time) {
  std::string out = "method,p,kind,seed,trial,err_L,err_S,rank_L,pct_nz_S,iterations,wall_time_s,status\n";
  for (const auto& r : rows) {
    out += to_string(r.method);
    out += ',' + std::to_string(r.p);
    out += ',' + to_string(r.kind);
    out += ',' + std::to_string(r.seed);
    out += ',' + std::to_string(r.trial);
    out += ',' + io::format_double(r.err_L);
    out += ',' + io::format_double(r.err_S);
    out += ',' + std::to_string(r.rank_L);
    out += ',' + io::format_double(r.pct_nz_S);
    out += ',' + std::to_string(r.iterations);
    out += ',' + (with_wall_time ? io::format_double(r.wall_time_s) : std::string("NA"));
    out += ',' + r.status + '\n';
  }
  return out;
}

json manifest_json(const BenchSuite& suite) {
  json seeds = json::array();
  for (Index p : suite.p_list) {
    for (int t = 0; t < suite.trials; ++t) seeds.push_back({{"p", p}, {"trial", t}, {"seed", trial_seed(suite.seed, p, t)}});
  }
  json configs = {{"erpca", {{"alpha", "1"},
                             {"beta", "1/sqrt(max(p,q))"},
                             {"mu", "pq/(4*||Theta_mle||_1)"},
                             {"tol", suite.tol},
                             {"max_iter", suite.max_iter}}},
                  {"rpca_baseline", {{"lambda", "1/sqrt(max(p,q))"},
                                     {"sigma", suite.baseline_variance == VarianceMode::Global ? "global sample sd" : "pooled per-entry sample sd"},
                                     {"inverse_transform", suite.kind.is(Family::Exponential)},
                                     {"tol", suite.tol},
                                     {"max_iter", suite.max_iter}}}};
  return {{"artifact_version", kVersion}, {"rng", kRngAlgorithm}, {"suite", to_json(suite)},
          {"configs", configs},           {"seeds", seeds}};
}

std::filesystem::path manifest_path(const std::filesystem::path& csv_path) {
  std::filesystem::path out = csv_path;
  out.replace_extension(".manifest.json");
  return out;
}

std::vector<TrialResult> run_experiment(const BenchSuite& suite, const std::filesystem::path& out_path, int threads) {
  std::vector<TrialResult> rows = run_experiment(suite, threads);
  io::write_text(out_path, results_csv(rows, suite.record_wall_time));
  io::write_text(manifest_path(out_path), manifest_json(suite).dump(2) + "\n");
  return rows;
}

double median(std::vector<double> values) {
  if (values.empty()) fail(ErrorCode::InvalidParameter, "median of an empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

}  // namespace erpca
