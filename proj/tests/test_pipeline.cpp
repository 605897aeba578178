#include <doctest.h>

#include <cmath>
#include <numbers>

#include "coarse/errors.hpp"
#include "coarse/pipeline.hpp"

using namespace coarse;
using Eigen::MatrixXd;

namespace {

Kernel metric(const BallPtr& b) {
  return Kernel::from_distance(b, [](int d) { return double(d); });
}

ScheduleParams schedule(int N) {
  ScheduleParams s;
  s.N = N;
  return s;
}

// Hand-built family with members phi_n given directly (no squaring).
NormalizedFamily hand_family(const BallPtr& ball, const std::vector<Kernel>& phis,
                             ScheduleParams s) {
  NormalizedFamily f;
  s.N = static_cast<int>(phis.size());
  f.schedule = s;
  f.ball = ball;
  for (std::size_t i = 0; i < phis.size(); ++i) {
    NormalizedMember m;
    m.n = static_cast<int>(i) + 1;
    m.index = m.n;
    m.phi = phis[i];
    f.members.push_back(m);
  }
  return f;
}

}  // namespace

TEST_CASE("schedule values and tails") {
  ScheduleParams s = schedule(10);
  CHECK(s.alpha_at(3) == 3.0);
  CHECK(s.epsilon_at(2) == doctest::Approx(0.125));
  double partial = 0.0;
  for (int n = 1; n <= 10; ++n) partial += 1.0 / (double(n) * n);
  CHECK(s.tail_bound() == doctest::Approx(std::numbers::pi * std::numbers::pi / 6 - partial));

  s.epsilon = ScheduleParams::Epsilon::kPow4;
  long double tail = 0.0L;
  for (int n = 11; n < 200; ++n) tail += n * std::pow(0.25L, n);
  CHECK(s.tail_bound() == doctest::Approx(double(tail)).epsilon(1e-12));

  s.alpha = ScheduleParams::Alpha::kPow2;
  CHECK(s.tail_bound() == doctest::Approx(std::pow(2.0, -10)));

  s.epsilon = ScheduleParams::Epsilon::kInverseCube;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  CHECK_THROWS_AS(schedule(0).validate(), InvalidArgument);
  CHECK_NOTHROW(schedule(16).validate());

  CHECK(s.width_at(3, 8) == 3);
  CHECK(s.width_at(12, 8) == 8);
  CHECK(ScheduleParams::parse_alpha("2^n") == ScheduleParams::Alpha::kPow2);
  CHECK(ScheduleParams::parse_epsilon("n^-3") == ScheduleParams::Epsilon::kInverseCube);
  CHECK_THROWS_AS(ScheduleParams::parse_alpha("n^2"), InvalidArgument);
}

TEST_CASE("normalize selects the first member within eps/2") {
  const auto z = build_ball(GroupSpec::lattice(1), 4);
  const auto fam = MultiplierFamily::exponential(metric(z));
  const ScheduleParams s = schedule(6);
  const NormalizedFamily nf = normalize_family(fam, s);
  REQUIRE(nf.members.size() == 6);
  for (const auto& m : nf.members) {
    const double r = std::min(m.n, 8);
    const double target = s.epsilon_at(m.n) / 2;
    CHECK(m.width == r);
    CHECK(1.0 - std::exp(-r / m.index) <= target);
    if (m.index > 1) CHECK(1.0 - std::exp(-r / (m.index - 1)) > target);
    CHECK(m.cert_bound <= 1.0 + 1e-6);
    CHECK(m.deviation_after <= s.epsilon_at(m.n) + 1e-12);
    for (Eigen::Index i = 0; i < m.phi.real_values().size(); ++i) {
      const double p = std::exp(-z->dist(i % z->size(), i / z->size()) / double(m.index));
      CHECK(m.phi.real_values()(i) == doctest::Approx(p * p));
    }
  }
}

TEST_CASE("normalize edge cases") {
  const auto z = build_ball(GroupSpec::lattice(1), 2);
  const Kernel one = Kernel::from_distance(z, [](int) { return 1.0; });
  const NormalizedFamily nf = normalize_family(MultiplierFamily::custom({one}), schedule(3));
  for (const auto& m : nf.members) {
    CHECK(m.index == 1);
    CHECK(m.phi.real_values() == MatrixXd::Ones(5, 5));
  }

  const Kernel zero = Kernel::from_distance(z, [](int d) { return d == 0 ? 1.0 : 0.0; });
  try {
    normalize_family(MultiplierFamily::custom({zero, zero}), schedule(3));
    FAIL("expected ScheduleInfeasible");
  } catch (const ScheduleInfeasible& e) {
    CHECK(e.stage() == 1);
  }
}

TEST_CASE("psi examples") {
  const auto z = build_ball(GroupSpec::lattice(1), 3);
  const Kernel one = Kernel::from_distance(z, [](int) { return 1.0; });
  const PsiResult p0 = build_psi(hand_family(z, {one, one, one}, {}));
  CHECK(p0.psi.real_values().cwiseAbs().maxCoeff() == 0.0);

  const Kernel e = Kernel::from_distance(z, [](int d) { return std::exp(-double(d)); });
  const PsiResult p1 = build_psi(hand_family(z, {e}, {}));
  const MatrixXd expect = MatrixXd::Ones(7, 7) - e.real_values();
  CHECK((p1.psi.real_values() - expect).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("psi matches an extended precision sum and keeps its invariants") {
  const auto f = build_ball(GroupSpec::free(2), 2);
  const NormalizedFamily nf =
      normalize_family(MultiplierFamily::exponential(metric(f)), schedule(8));
  const PsiResult p = build_psi(nf);
  const MatrixXd& psi = p.psi.real_values();
  for (Eigen::Index i = 0; i < psi.rows(); ++i) {
    CHECK(psi(i, i) == 0.0);
    for (Eigen::Index j = 0; j < psi.cols(); ++j) {
      long double s = 0.0L;
      for (const auto& m : nf.members)
        s += static_cast<long double>(m.n) * (1.0L - m.phi.real_values()(i, j));
      CHECK(std::abs(double(s) - psi(i, j)) <= 1e-12 * (1 + double(s)));
      CHECK(psi(i, j) >= 0.0);
    }
  }
  REQUIRE(p.partial_sums.size() == 8);
  CHECK((p.partial_sums.back().real_values() - psi).cwiseAbs().maxCoeff() == 0.0);
  for (const auto& row : p.tube_bounds) CHECK(row.holds);
  const Kernel k = symmetrize(p.psi);
  CHECK((k.real_values() - (psi + psi.transpose())).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("properness witness") {
  const auto z = build_ball(GroupSpec::lattice(1), 4);
  const NormalizedFamily nf =
      normalize_family(MultiplierFamily::exponential(metric(z)), schedule(8));
  const Kernel psi = build_psi(nf).psi;
  const auto w0 = verify_properness_argument(psi, nf, 0.0);
  CHECK(w0.n == 1);
  const auto w1 = verify_properness_argument(psi, nf, 1.0);
  CHECK(w1.n == 2);
  CHECK(w1.max_sublevel_dist <= w1.width);
  CHECK(w1.sublevel_pairs <= w1.middle_pairs);
  CHECK_THROWS_AS(verify_properness_argument(psi, nf, 100.0), InvalidArgument);

  // psi = 0 everywhere while phi_1 is tiny off the diagonal.
  const auto small = build_ball(GroupSpec::lattice(1), 2);
  const Kernel delta = Kernel::from_distance(small, [](int d) { return d == 0 ? 1.0 : 0.0; });
  const Kernel zero = Kernel::from_distance(small, [](int) { return 0.0; });
  CHECK_THROWS_AS(verify_properness_argument(zero, hand_family(small, {delta}, {}), 0.5),
                  ArgumentFails);
}

TEST_CASE("contractivity") {
  const auto z = build_ball(GroupSpec::lattice(1), 2);
  const Kernel one = Kernel::from_distance(z, [](int) { return 1.0; });
  const NormalizedFamily trivial = hand_family(z, {one, one}, {});
  const auto r0 = verify_contractive_exponentials(build_psi(trivial), trivial, {0.1, 1.0}, 0);
  CHECK(r0.all_certified);
  CHECK(r0.partial_sums.size() == 4);
  CHECK(r0.factors.size() == 4);

  // 1 - phi has a large negative entry, so exp(-t alpha (1 - phi)) blows up.
  MatrixXd bad = MatrixXd::Ones(5, 5);
  bad(0, 4) = bad(4, 0) = 4.0;
  const NormalizedFamily nf = hand_family(z, {Kernel::real(bad, z)}, {});
  const auto r1 = verify_contractive_exponentials(build_psi(nf), nf, {1.0}, 0);
  CHECK_FALSE(r1.all_certified);
  CHECK_FALSE(r1.factors.front().certified);
  CHECK(r1.factors.front().bound > 1.0);
  CHECK_THROWS_AS(verify_contractive_exponentials(build_psi(nf), nf, {0.0}, 0), InvalidArgument);
}

TEST_CASE("chain passes on small balls") {
  for (const auto& ball : {build_ball(GroupSpec::lattice(1), 4), build_ball(GroupSpec::free(2), 2)}) {
    ChainParams params;
    const PipelineReport rep = run_chain(metric(ball), params);
    CHECK(rep.overall == Verdict::kPass);
    for (const auto& st : rep.stages) {
      INFO(st.name, " ", st.error);
      CHECK(st.status != Verdict::kFail);
    }
    REQUIRE(rep.artifacts.k);
    const MatrixXd& k = rep.artifacts.k->real_values();
    const MatrixXd& psi = rep.artifacts.psi->psi.real_values();
    CHECK((k - (psi + psi.transpose())).cwiseAbs().maxCoeff() == 0.0);
    CHECK(is_cnd(*rep.artifacts.h).cnd);
    REQUIRE(rep.artifacts.profile);
    REQUIRE(rep.artifacts.direct_profile);
  }
}

TEST_CASE("chain halts at the first failing stage") {
  const auto z = build_ball(GroupSpec::lattice(1), 2);
  const Kernel delta = Kernel::from_distance(z, [](int d) { return d == 0 ? 1.0 : 0.0; });
  ChainParams params;
  params.schedule.N = 4;
  const PipelineReport rep = run_chain(MultiplierFamily::custom({delta}), params);
  CHECK(rep.overall == Verdict::kFail);
  REQUIRE(rep.stages.size() == 1);
  CHECK(rep.stages[0].name == "normalize");
  CHECK(rep.stages[0].status == Verdict::kFail);
  CHECK(rep.stages[0].details.at("infeasible_stage") == 1);
  CHECK_FALSE(rep.artifacts.psi);
}

TEST_CASE("chain is deterministic") {
  const auto z = build_ball(GroupSpec::lattice(1), 3);
  ChainParams params;
  params.schedule.N = 8;
  const PipelineReport a = run_chain(metric(z), params);
  const PipelineReport b = run_chain(metric(z), params);
  REQUIRE(a.artifacts.h);
  REQUIRE(b.artifacts.h);
  CHECK(a.artifacts.h->real_values() == b.artifacts.h->real_values());
  CHECK(a.meta == b.meta);
}
