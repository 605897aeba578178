#include <doctest.h>

#include <cmath>
#include <random>

#include "coarse/embed.hpp"
#include "coarse/errors.hpp"

using namespace coarse;
using Eigen::MatrixXd;

namespace {

MatrixXd sq_dist(const MatrixXd& x) {
  MatrixXd d(x.rows(), x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.rows(); ++j) d(i, j) = (x.row(i) - x.row(j)).squaredNorm();
  return d;
}

Kernel metric(const BallPtr& b) {
  return Kernel::from_distance(b, [](int d) { return double(d); });
}

Embedding from_coords(const BallPtr& b, const std::function<double(const Element&)>& f) {
  Embedding u;
  u.ball = b;
  u.coords = MatrixXd(b->size(), 1);
  for (std::size_t i = 0; i < b->size(); ++i) u.coords(i, 0) = f(b->points[i]);
  return u;
}

}  // namespace

TEST_CASE("gns on a line") {
  MatrixXd a(3, 1);
  a << 0, 1, 4;
  const Embedding u = gns_embed(Kernel::real(sq_dist(a)));
  CHECK(u.dimension() == 1);
  CHECK(reconstruction_error(u, sq_dist(a)) < 1e-12);
  CHECK(std::abs(std::abs(u.coords(2, 0) - u.coords(0, 0)) - 4.0) < 1e-12);
}

TEST_CASE("gns of the integer word metric") {
  const auto z = build_ball(GroupSpec::lattice(1), 4);
  const Kernel h = metric(z);
  const Embedding u = gns_embed(h);
  CHECK(u.dimension() <= static_cast<Eigen::Index>(z->size()));
  CHECK(reconstruction_error(u, h.real_values()) <= 1e-9 * 8);
  const auto prof = compression_profile(u);
  for (const auto& row : prof.rows) {
    CHECK(std::abs(row.rho_plus - std::sqrt(row.r)) <= 1e-7);
    CHECK(std::abs(row.rho_minus - std::sqrt(row.r)) <= 1e-7);
  }
}

TEST_CASE("gns of zero kernel and non-CND input") {
  const Embedding u = gns_embed(Kernel::real(MatrixXd::Zero(4, 4)));
  CHECK(u.dimension() == 0);
  CHECK(reconstruction_error(u, MatrixXd::Zero(4, 4)) == 0.0);

  MatrixXd bad(3, 3);
  bad << 0, 1, 1, 1, 0, 5, 1, 5, 0;
  CHECK_THROWS_AS(gns_embed(Kernel::real(bad)), NotCND);
  CHECK_THROWS_AS(gns_embed(Kernel::real(MatrixXd::Identity(2, 2))), NotCND);
}

TEST_CASE("gns round trip on random coordinates") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    MatrixXd x(5 + trial, 1 + trial % 4);
    for (int i = 0; i < x.size(); ++i) x(i) = g(rng);
    const MatrixXd h = sq_dist(x);
    const Embedding u = gns_embed(Kernel::real(h));
    CHECK(u.dimension() <= x.cols());
    CHECK(reconstruction_error(u, h) <= 1e-9 * (1 + h.maxCoeff()));
    CHECK(u.coords.allFinite());
  }
}

TEST_CASE("split of the zero kernel") {
  const auto z = build_ball(GroupSpec::lattice(1), 2);
  const Kernel k = Kernel::from_distance(z, [](int) { return 0.0; });
  const SplitPair p = split_embed(k, 4);
  CHECK(p.S.norm() <= 1e-9);
  CHECK(split_reconstruction(p).cwiseAbs().maxCoeff() <= 1e-9);
  const DropResult d = drop_s_part(p, k.real_values());
  CHECK(d.h.real_values().cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("split stage identity on word metrics") {
  for (const auto& ball : {build_ball(GroupSpec::lattice(1), 3), build_ball(GroupSpec::free(2), 2)}) {
    const Kernel k = metric(ball);
    const MatrixXd& kv = k.real_values();
    double prev = 1e300;
    for (int n : {8, 64, 512}) {
      const SplitPair p = split_embed(k, n);
      CHECK(p.stage_error <= 1e-6);
      CHECK(p.approx_error_bound == doctest::Approx(kv.maxCoeff() * kv.maxCoeff() / (2.0 * n)));
      const double dev = (split_reconstruction(p) - kv).cwiseAbs().maxCoeff();
      CHECK(dev <= p.approx_error_bound + 1e-6);
      CHECK(dev < prev);
      prev = dev;
      const DropResult d = drop_s_part(p, kv);
      CHECK(d.cnd.cnd);
      CHECK(d.max_deviation <= d.s_bound + 1e-9);
    }
  }
}

TEST_CASE("split of the integer metric at n = 64") {
  const auto z = build_ball(GroupSpec::lattice(1), 3);
  const Kernel k = metric(z);
  const SplitPair p = split_embed(k, 64);
  CHECK((split_reconstruction(p) - stage_kernel(k.real_values(), 64)).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK((split_reconstruction(p) - k.real_values()).cwiseAbs().maxCoeff() <= 36.0 / 128 + 1e-6);
  // k is CND, so h reproduces k_n.
  const DropResult d = drop_s_part(p, k.real_values());
  CHECK(d.max_deviation <= 1e-6);
}

TEST_CASE("split refuses a non-contractive exponential") {
  MatrixXd k(3, 3);
  k << 0, 0.01, 0.01, 0.01, 0, 5, 0.01, 5, 0;
  CHECK_THROWS_AS(split_embed(Kernel::real(k), 1), CertificateUnavailable);
  CHECK_THROWS_AS(split_embed(Kernel::real(k), 0), InvalidArgument);
  MatrixXd neg = -k;
  CHECK_THROWS_AS(split_embed(Kernel::real(neg), 1), InvalidArgument);
}

TEST_CASE("parallelogram identity") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> g;
  MatrixXd P(6, 3), Q(6, 3);
  for (int i = 0; i < P.size(); ++i) {
    P(i) = g(rng);
    Q(i) = g(rng);
  }
  SplitPair pair;
  pair.R = 0.5 * (P + Q);
  pair.S = 0.5 * (P - Q);
  const MatrixXd rs = split_reconstruction(pair);
  for (int x = 0; x < 6; ++x) {
    for (int y = 0; y < 6; ++y) {
      const double lhs = 0.5 * ((P.row(x) - Q.row(y)).squaredNorm() + (P.row(y) - Q.row(x)).squaredNorm());
      CHECK(std::abs(lhs - rs(x, y)) <= 1e-12 * (1 + lhs));
    }
  }
}

TEST_CASE("default split stage") {
  const auto z = build_ball(GroupSpec::lattice(1), 2);
  CHECK(default_split_stage(metric(z)) == 40);
  CHECK(default_split_stage(Kernel::from_distance(z, [](int) { return 0.0; })) == 1);
}

TEST_CASE("compression profile examples") {
  const auto z = build_ball(GroupSpec::lattice(1), 3);
  const auto id = compression_profile(from_coords(z, [](const Element& g) { return g[0]; }));
  for (const auto& row : id.rows) {
    CHECK(row.rho_minus == doctest::Approx(row.r));
    CHECK(row.rho_plus == doctest::Approx(row.r));
  }
  const auto c = compression_profile(from_coords(z, [](const Element&) { return 5.0; }));
  for (const auto& row : c.rows) {
    CHECK(row.rho_minus == 0.0);
    CHECK(row.rho_plus == 0.0);
  }
  const auto f = build_ball(GroupSpec::free(2), 2);
  const auto gp = compression_profile(gns_embed(metric(f)));
  for (std::size_t r = 1; r < gp.rows.size(); ++r) {
    CHECK(gp.rows[r].rho_minus >= gp.rows[r - 1].rho_minus);
    CHECK(gp.rows[r].rho_plus >= gp.rows[r - 1].rho_plus);
    CHECK(gp.rows[r].rho_minus <= gp.rows[r].rho_plus + 1e-12);
  }
}

TEST_CASE("coarse check across radii") {
  std::vector<CompressionProfile> gns, constant, parity;
  for (int r = 3; r <= 6; ++r) {
    const auto z = build_ball(GroupSpec::lattice(1), r);
    gns.push_back(compression_profile(gns_embed(metric(z))));
    constant.push_back(compression_profile(from_coords(z, [](const Element&) { return 0.0; })));
    parity.push_back(compression_profile(
        from_coords(z, [](const Element& g) { return double(((g[0] % 2) + 2) % 2); })));
  }
  const CoarseReport a = coarse_check(gns);
  CHECK(a.overall == Verdict::kPass);
  CHECK(a.max_upper_drift <= 1e-9);

  CoarseCheckOptions thresholds;
  thresholds.thresholds = {0.0, 0.5, 1.0};
  const CoarseReport b = coarse_check(constant, thresholds);
  CHECK(b.lower == Verdict::kFail);
  for (const auto& row : b.lower_rows) CHECK(row.verdict == Verdict::kFail);

  CoarseCheckOptions high;
  high.thresholds = {2.0};
  const CoarseReport c = coarse_check(parity, high);
  CHECK(c.upper == Verdict::kPass);
  CHECK(c.lower == Verdict::kFail);

  CHECK_THROWS_AS(coarse_check({gns.front()}), InsufficientData);
}

TEST_CASE("kernel from embedding") {
  const auto z = build_ball(GroupSpec::lattice(1), 2);
  const Kernel h = kernel_from_embedding(from_coords(z, [](const Element& g) { return g[0]; }));
  for (std::size_t i = 0; i < z->size(); ++i)
    for (std::size_t j = 0; j < z->size(); ++j)
      CHECK(h.real_values()(i, j) == doctest::Approx(std::pow(z->points[i][0] - z->points[j][0], 2)));
}
