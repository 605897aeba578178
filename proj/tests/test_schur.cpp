#include <doctest.h>

#include <cmath>
#include <random>

#include "coarse/errors.hpp"
#include "coarse/schur.hpp"
#include "oracles/schur_oracle.hpp"

using namespace coarse;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using cplx = std::complex<double>;

namespace {

MatrixXcd random_complex(std::mt19937_64& rng, int m) {
  std::normal_distribution<double> g;
  MatrixXcd a(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) a(i, j) = cplx(g(rng), g(rng));
  return a;
}

MatrixXd random_real(std::mt19937_64& rng, int m) {
  std::normal_distribution<double> g;
  MatrixXd a(m, m);
  for (int i = 0; i < a.size(); ++i) a(i) = g(rng);
  return a;
}

MatrixXd unit_gram(std::mt19937_64& rng, int m, int dim) {
  MatrixXd v = random_real(rng, std::max(m, dim)).topLeftCorner(m, dim);
  for (int i = 0; i < m; ++i) v.row(i).normalize();
  return v * v.transpose();
}

void check_certificate(const SchurCertificate& c, const MatrixXcd& phi, double tol) {
  const CertificateCheck v = verify_certificate(c, phi, tol);
  CHECK(v.valid);
  CHECK(v.residual <= tol);
  CHECK(v.product_bound <= c.bound + tol);
  CHECK(is_psd(Kernel::complex(c.block()), 1e-8).psd);
}

}  // namespace

TEST_CASE("all-ones matrix has norm 1") {
  for (int m : {1, 2, 5}) {
    const auto r = schur_norm(Kernel::real(MatrixXd::Ones(m, m)));
    CHECK(std::abs(r.estimate - 1.0) <= 1e-6);
    check_certificate(r.cert, MatrixXcd::Ones(m, m), 1e-6);
  }
}

TEST_CASE("2x2 sign matrix against the oracle") {
  MatrixXd a(2, 2);
  a << 1, 1, 1, -1;
  const auto r = schur_norm(Kernel::real(a));
  const auto o = oracle::factorization_upper(a.cast<cplx>(), 50, 1);
  const double lo = oracle::dual_lower(a.cast<cplx>(), 20, 1);
  CHECK(std::abs(r.estimate - o.value) <= 1e-5);
  CHECK(lo <= o.value + 1e-9);
  CHECK(r.estimate >= lo - 1e-6);
  check_certificate(r.cert, a.cast<cplx>(), 1e-6);
}

TEST_CASE("unit-diagonal PSD matrices have norm 1") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd g = unit_gram(rng, 3 + trial, 2 + trial % 3);
    const auto r = schur_norm(Kernel::real(g));
    CHECK(std::abs(r.estimate - 1.0) <= 1e-6);
    const auto c = check_norm_leq_one(Kernel::real(g));
    CHECK(c.certified);
  }
}

TEST_CASE("check_norm_leq_one examples") {
  const auto z = build_ball(GroupSpec::lattice(1), 4);
  for (int n : {1, 2, 5}) {
    const Kernel phi = Kernel::from_distance(z, [n](int d) { return std::exp(-double(d) / n); });
    const NormCheck c = check_norm_leq_one(phi);
    REQUIRE(c.certified);
    CHECK(c.cert->bound <= 1.0 + 1e-6);
    check_certificate(*c.cert, phi.values(), 1e-6);
  }

  const Kernel two = Kernel::real(2.0 * MatrixXd::Identity(3, 3));
  const NormCheck c = check_norm_leq_one(two);
  CHECK_FALSE(c.certified);
  REQUIRE(c.refutation);
  CHECK(c.refutation->lower_bound >= 2.0 - 1e-6);
  CHECK(c.refutation->gap > 0.0);
  CHECK(dual_lower_bound(two.values(), c.refutation->alpha, c.refutation->beta) ==
        doctest::Approx(c.refutation->lower_bound));
}

TEST_CASE("check_norm_leq_one near the threshold") {
  // Hadamard-type matrices scaled just above and below their norm.
  MatrixXd a(2, 2);
  a << 1, 1, 1, -1;
  const double nrm = schur_norm(Kernel::real(a)).estimate;
  CHECK(check_norm_leq_one(Kernel::real(a / (nrm * (1 + 1e-4)))).certified);
  CHECK_FALSE(check_norm_leq_one(Kernel::real(a / (nrm * (1 - 1e-4)))).certified);
}

TEST_CASE("extract_factorization examples") {
  const auto ones = schur_norm(Kernel::real(MatrixXd::Ones(2, 2))).cert;
  CHECK(ones.residual <= 1e-12);
  CHECK((ones.P * ones.Q.adjoint() - MatrixXcd::Ones(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);

  const auto f = build_ball(GroupSpec::free(2), 2);
  const Kernel phi = Kernel::from_distance(f, [](int d) { return std::exp(-d / 3.0); });
  const NormCheck c = check_norm_leq_one(phi);
  REQUIRE(c.certified);
  CHECK(c.cert->residual <= 1e-6);

  const auto id = schur_norm(Kernel::real(MatrixXd::Identity(3, 3))).cert;
  const MatrixXcd g = id.P * id.Q.adjoint();
  CHECK((g - MatrixXcd::Identity(3, 3)).cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(id.P.rowwise().norm().maxCoeff() <= 1.0 + 1e-6);
}

TEST_CASE("transpose invariance") {
  MatrixXd s(2, 2);
  s << 1, 1, 1, -1;
  CHECK(transpose_norm_invariance_check(Kernel::real(s)).pass);
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    const auto t = transpose_norm_invariance_check(Kernel::complex(random_complex(rng, 3)));
    CHECK(t.pass);
    CHECK(std::abs(t.norm - t.transpose_norm) <= 3e-6);
  }
}

TEST_CASE("random complex matrices match the oracle; certificates are sound") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 12; ++trial) {
    const int m = 2 + trial % 3;
    const MatrixXcd a = random_complex(rng, m);
    const auto r = schur_norm(Kernel::complex(a));
    const auto o = oracle::factorization_upper(a, 50, trial);
    CHECK(std::abs(r.estimate - o.value) <= 1e-4);
    CHECK(r.lower <= r.upper);
    CHECK(r.upper - r.lower <= 1e-6 * (1.0 + r.upper));
    check_certificate(r.cert, a, 1e-6 * (1.0 + a.cwiseAbs().maxCoeff()));
    // Sup-norm lower bound.
    CHECK(r.estimate >= a.cwiseAbs().maxCoeff() - 1e-6);
  }
}

TEST_CASE("scaling equivariance and submultiplicativity") {
  std::mt19937_64 rng(33);
  for (int trial = 0; trial < 4; ++trial) {
    const MatrixXcd a = random_complex(rng, 3);
    const MatrixXcd b = random_complex(rng, 3);
    const double na = schur_norm(Kernel::complex(a)).estimate;
    const double nb = schur_norm(Kernel::complex(b)).estimate;
    for (cplx c : {cplx(0.5, 0), cplx(-3, 0), cplx(0, 2), cplx(1, 1)}) {
      const double nc = schur_norm(Kernel::complex(c * a)).estimate;
      CHECK(std::abs(nc - std::abs(c) * na) <= 3e-6 * (1 + std::abs(c) * na));
    }
    const double nab = schur_norm(Kernel::complex(a.cwiseProduct(b))).estimate;
    CHECK(nab <= na * nb + 1e-5 * (1 + na * nb));
  }
}

TEST_CASE("zero and real inputs") {
  const auto z = schur_norm(Kernel::real(MatrixXd::Zero(3, 3)));
  CHECK(z.estimate == 0.0);
  std::mt19937_64 rng(4);
  const MatrixXd a = random_real(rng, 4);
  const auto r = schur_norm(Kernel::real(a));
  CHECK(r.cert.real);
  CHECK(r.cert.B.imag().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("projection-only mode reports the bracket on failure") {
  std::mt19937_64 rng(8);
  const MatrixXcd a = random_complex(rng, 4);
  SchurOptions o;
  o.refine = false;
  o.max_inner_iterations = 3;
  try {
    schur_norm(Kernel::complex(a), o);
    FAIL("expected NoConvergence");
  } catch (const NoConvergence& e) {
    CHECK(e.lower() <= e.upper());
    CHECK(e.lower() > 0.0);
  }
}

TEST_CASE("dykstra variant agrees") {
  std::mt19937_64 rng(12);
  const MatrixXcd a = random_complex(rng, 3);
  SchurOptions o;
  o.dykstra = true;
  const double x = schur_norm(Kernel::complex(a), o).estimate;
  const double y = schur_norm(Kernel::complex(a)).estimate;
  CHECK(std::abs(x - y) <= 2e-6);
}
