#include <doctest.h>

#include <filesystem>
#include <random>

#include "erpca/bench.hpp"
#include "erpca/io.hpp"

using namespace erpca;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("erpca_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("shortest round-trip formatting") {
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_double(1.0) == "1");
  CHECK(io::format_double(-2.5e-10) == "-2.5e-10");
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen) * std::pow(10.0, static_cast<int>(gen() % 40) - 20);
    CHECK(std::stod(io::format_double(v)) == v);
  }
}

TEST_CASE("stack files round-trip exactly") {
  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<MatrixXd> ms;
  for (int i = 0; i < 3; ++i) {
    MatrixXd m(4, 5);
    for (Index k = 0; k < m.size(); ++k) m.data()[k] = n(gen);
    ms.push_back(m);
  }
  const MatrixStack<double> st(DistributionKind::gaussian(0.7), ms);
  const fs::path dir = temp_dir("roundtrip");
  io::write_stack_file(dir / "s.csv", st);
  const auto back = io::read_stack_file(dir / "s.csv");
  CHECK(back.kind() == st.kind());
  for (int i = 0; i < 3; ++i) CHECK(back.matrices()[i] == ms[i]);
  const std::string text = io::read_text(dir / "s.csv");
  CHECK(text.rfind("# p=4 q=5 n=3 kind=gaussian sigma2=0.7\n", 0) == 0);
  CHECK(io::format_stack(back.matrices(), back.kind()) == text);
}

TEST_CASE("stack parse errors") {
  auto message = [](const std::string& text) {
    try {
      io::parse_stack(text);
    } catch (const Error& e) {
      CHECK(e.code() != ErrorCode::Io);
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(message("# p=1 q=2 n=3 kind=bernoulli\n0,1\n\n1,1\n").find("n=3") != std::string::npos);
  CHECK(message("# p=1 q=2 n=3 kind=bernoulli\n0,1\n\n1,1\n").find("contains 2 blocks") != std::string::npos);
  CHECK(message("# p=2 q=2 n=1 kind=bernoulli\n0,1\n1,x\n").find("line 3") != std::string::npos);
  CHECK(message("# p=2 q=2 n=1 kind=bernoulli\n0,1\n1\n").find("line 3") != std::string::npos);
  CHECK(message("# p=1 q=1 n=2 kind=bernoulli\n1\n\n\n1\n").find("line 4") != std::string::npos);
  CHECK(message("# p=1 q=1 n=1 kind=gamma\n1\n").find("line 1") != std::string::npos);
  CHECK(message("# p=1 q=1 n=1 kind=poisson sigma2=1\n1\n").find("line 1") != std::string::npos);
  CHECK(message("# p=1 q=2 n=1 kind=bernoulli\n0,0.5\n").find("row 0, col 1") != std::string::npos);
  CHECK(message("p=1 q=1 n=1 kind=poisson\n1\n").find("line 1") != std::string::npos);
  CHECK(message("# p=1 q=1 n=1 kind=poisson\n").find("contains 0 blocks") != std::string::npos);
}

TEST_CASE("matrix csv round trip") {
  MatrixXd m(2, 3);
  m << 1, 2.5, -3, 1e-300, 0, 7;
  const fs::path dir = temp_dir("matrix");
  io::write_matrix_csv(dir / "m.csv", m);
  CHECK(io::read_matrix_csv(dir / "m.csv") == m);
}

TEST_CASE("run configuration parsing") {
  const auto rc = io::parse_run_config(nlohmann::json::parse(R"({"alpha":2,"tol":1e-6,"link":"canonical"})"));
  SolverConfig<double> c;
  rc.apply(c);
  CHECK(c.alpha == 2.0);
  CHECK(c.tol == 1e-6);
  CHECK(c.beta == 1.0);
  CHECK(rc.link == Link::Canonical);
  CHECK_THROWS_AS(io::parse_run_config(nlohmann::json::parse(R"({"alpah":2})")), Error);
  CHECK_THROWS_AS(io::parse_run_config(nlohmann::json::parse(R"({"alpha":"x"})")), Error);
  const auto spec = io::parse_sim_spec(nlohmann::json::parse(R"({"p":3,"kind":"poisson","seed":9})"));
  CHECK(spec.spike_count == 1);
  CHECK(spec.bg_mean == 50.0);
  CHECK(spec.seed == 9u);
  CHECK_THROWS_AS(io::parse_sim_spec(nlohmann::json::parse(R"({"p":3,"kind":"poisson","zeta":1})")), Error);
  CHECK(io::parse_sim_spec(io::to_json(spec)).spike_hi == spec.spike_hi);
}

TEST_CASE("frobenius_error examples") {
  MatrixXd a = MatrixXd::Zero(2, 2);
  CHECK(frobenius_error(a, a) == 0.0);
  MatrixXd b = a;
  b(1, 0) = 3.0;
  CHECK(frobenius_error(b, a) == 3.0);
  CHECK(frobenius_error(MatrixXd::Ones(2, 2), a) == 2.0);
  CHECK_THROWS_AS(frobenius_error(MatrixXd::Ones(2, 3), a), Error);
}

TEST_CASE("bench rows, ordering and replay") {
  const auto suite = parse_suite(nlohmann::json::parse(R"({"p":[10],"kind":"bernoulli","n":500,"trials":2})"));
  const auto rows = run_experiment(suite, 1);
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].method == Method::Erpca);
  CHECK(rows[1].method == Method::RpcaBaseline);
  CHECK(rows[0].trial == 0);
  CHECK(rows[2].trial == 1);
  CHECK(rows[0].seed == rows[1].seed);
  for (const auto& r : rows) {
    CHECK(std::isfinite(r.err_L));
    CHECK(r.err_L >= 0);
    CHECK(r.err_S >= 0);
    CHECK(r.status == "ok");
  }
  const auto again = run_experiment(suite, 2);
  CHECK(results_csv(rows, false) == results_csv(again, false));
  const std::string csv = results_csv(rows, false);
  CHECK(csv.rfind("method,p,kind,seed,trial,err_L,err_S,rank_L,pct_nz_S,iterations,wall_time_s,status\n", 0) == 0);

  const fs::path dir = temp_dir("bench");
  run_experiment(suite, dir / "r.csv", 1);
  const auto manifest = io::read_json(manifest_path(dir / "r.csv"));
  CHECK(manifest.at("rng") == "philox4x32-10");
  CHECK(manifest.at("artifact_version") == kVersion);
  CHECK(parse_suite(manifest.at("suite")).trials == 2);
  CHECK(manifest.at("seeds").size() == 2);
}

TEST_CASE("multi bench mode and suite validation") {
  const auto suite = parse_suite(nlohmann::json::parse(R"({"p":[8],"kind":"bernoulli","n":200,"trials":1,"mode":"multi"})"));
  CHECK(suite.groups == 2);
  const auto rows = run_experiment(suite, 1);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].status == "ok");
  CHECK_THROWS_AS(parse_suite(nlohmann::json::parse(R"({"p":[8],"kind":"gamma"})")), Error);
  CHECK_THROWS_AS(parse_suite(nlohmann::json::parse(R"({"p":[8],"kind":"poisson","extra":1})")), Error);
  CHECK_THROWS_AS(parse_suite(nlohmann::json::parse(R"({"p":[8],"kind":"poisson","trials":0})")), Error);
}

TEST_CASE("median") {
  CHECK(median({3, 1, 2}) == 2.0);
  CHECK(median({4, 1, 2, 3}) == 2.5);
  CHECK_THROWS_AS(median({}), Error);
}
