#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "coarse/errors.hpp"
#include "coarse/io.hpp"

using namespace coarse;
namespace fs = std::filesystem;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "coarse_test_io" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Kernel metric(const BallPtr& b) {
  return Kernel::from_distance(b, [](int d) { return double(d); });
}

}  // namespace

TEST_CASE("number formatting round trips") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    const double x = g(rng) * std::pow(10.0, i % 30 - 15);
    CHECK(io::parse_double(io::format_double(x)) == x);
    const std::complex<double> z(g(rng), g(rng));
    CHECK(io::parse_complex(io::format_complex(z)) == z);
  }
  CHECK(io::format_double(0.1) == "0.1");
  CHECK(io::format_complex({1, -2}) == "1-2j");
  CHECK(io::parse_complex("3") == std::complex<double>(3, 0));
  CHECK_THROWS_AS(io::parse_double("abc"), IoError);
}

TEST_CASE("matrix and kernel csv round trips") {
  const fs::path dir = scratch("csv");
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  MatrixXcd c(3, 4);
  for (int i = 0; i < c.size(); ++i) c(i) = {g(rng), g(rng)};
  io::write_matrix_csv(dir / "c.csv", c, false);
  bool real = true;
  CHECK(io::read_matrix_csv(dir / "c.csv", &real) == c);
  CHECK_FALSE(real);

  const auto f = build_ball(GroupSpec::free(2), 2);
  const Kernel k = Kernel::from_distance(f, [](int d) { return std::exp(-d / 3.0); });
  io::write_kernel(dir / "k.csv", k);
  CHECK(fs::exists(dir / "k.csv.json"));
  const Kernel back = io::read_kernel(dir / "k.csv", f);
  CHECK(back.is_real());
  CHECK(back.real_values() == k.real_values());

  CHECK_THROWS_AS(io::read_kernel(dir / "k.csv", build_ball(GroupSpec::free(2), 1)), IoError);
  CHECK_THROWS_AS(io::read_kernel(dir / "missing.csv"), IoError);
  io::write_text(dir / "ragged.csv", "1,2\n3\n");
  CHECK_THROWS_AS(io::read_matrix_csv(dir / "ragged.csv"), IoError);
}

TEST_CASE("certificate round trip") {
  const fs::path dir = scratch("cert");
  MatrixXd a(2, 2);
  a << 1, 1, 1, -1;
  const SchurCertificate cert = schur_norm(Kernel::real(a)).cert;
  io::write_certificate(dir, "cert", cert);
  const SchurCertificate back = io::read_certificate(dir / "cert.json");
  CHECK(back.B == cert.B);
  CHECK(back.C == cert.C);
  CHECK(back.P == cert.P);
  CHECK(back.Q == cert.Q);
  CHECK(back.bound == cert.bound);
  CHECK(verify_certificate(back, a.cast<std::complex<double>>(), 1e-6).valid);
}

TEST_CASE("embedding, profile and split round trips") {
  const fs::path dir = scratch("artifacts");
  const auto z = build_ball(GroupSpec::lattice(1), 3);
  const Embedding u = gns_embed(metric(z));
  io::write_embedding(dir / "u.csv", u);
  const Embedding ub = io::read_embedding(dir / "u.csv", z);
  CHECK(ub.coords == u.coords);

  const CompressionProfile p = compression_profile(u);
  io::write_profile(dir / "p.csv", p);
  const CompressionProfile pb = io::read_profile(dir / "p.csv");
  REQUIRE(pb.rows.size() == p.rows.size());
  for (std::size_t i = 0; i < p.rows.size(); ++i) {
    CHECK(pb.rows[i].r == p.rows[i].r);
    CHECK(pb.rows[i].rho_minus == p.rows[i].rho_minus);
    CHECK(pb.rows[i].rho_plus == p.rows[i].rho_plus);
    CHECK(pb.rows[i].minus_empty == p.rows[i].minus_empty);
  }

  const SplitPair s = split_embed(metric(z), 16);
  io::write_split(dir, "split", s);
  const SplitPair sb = io::read_split(dir / "split.json", z);
  CHECK(sb.R == s.R);
  CHECK(sb.S == s.S);
  CHECK(sb.n == 16);
  CHECK(sb.stage_error == s.stage_error);
}

TEST_CASE("json rendering") {
  nlohmann::json j = {{"b", 1.0}, {"a", {1, 2}}, {"c", 0.1}, {"d", std::nan("")}};
  const std::string s = io::render_json(j);
  CHECK(s.find("\"a\"") < s.find("\"b\""));
  CHECK(s.find("1.0") != std::string::npos);
  CHECK(s.find("0.10000000000000001") != std::string::npos);
  const auto parsed = nlohmann::json::parse(s);
  CHECK(parsed.at("d").is_null());
  CHECK(parsed.at("c").get<double>() == 0.1);
  CHECK(io::render_json(parsed) == s);
}

TEST_CASE("report rendering") {
  PipelineReport empty;
  const auto ej = nlohmann::json::parse(io::render_report(empty, io::Format::kJson));
  CHECK(ej.at("stages").is_array());
  CHECK(ej.at("stages").empty());

  PipelineReport partial;
  StageRecord ok;
  ok.name = "normalize";
  StageRecord bad;
  bad.name = "psi";
  bad.status = Verdict::kFail;
  bad.error = "boom";
  bad.checks.push_back({"tube_bound", false, 2.0, 1.0});
  partial.stages = {ok, bad};
  partial.overall = Verdict::kFail;
  partial.reasons = {"psi: boom"};
  const std::string text = io::render_report(partial, io::Format::kText);
  CHECK(text.find("normalize") != std::string::npos);
  CHECK(text.find("tube_bound") != std::string::npos);
  std::string last = text.substr(0, text.find_last_not_of('\n') + 1);
  last = last.substr(last.find_last_of('\n') + 1);
  CHECK(last == "FAIL psi");

  const std::string js = io::render_report(partial, io::Format::kJson);
  const auto pj = nlohmann::json::parse(js);
  CHECK(pj.at("overall") == "FAIL");
  CHECK(pj.at("stages").size() == 2);
  CHECK(io::render_json(pj) + "\n" == js);
}
