#include "coarse/schur.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "coarse/errors.hpp"

namespace coarse {

namespace {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

MatrixXcd make_block(const MatrixXcd& phi, const MatrixXcd& B,
                     const MatrixXcd& C) {
  const Index m = phi.rows();
  const Index n = phi.cols();
  MatrixXcd M(m + n, m + n);
  M.topLeftCorner(m, m) = B;
  M.topRightCorner(m, n) = phi;
  M.bottomLeftCorner(n, m) = phi.adjoint();
  M.bottomRightCorner(n, n) = C;
  return M;
}

MatrixXcd hermitian_part(const MatrixXcd& a) { return 0.5 * (a + a.adjoint()); }

// Positive square root of a Hermitian PSD matrix, negative eigenvalues clipped.
MatrixXcd psd_sqrt(const MatrixXcd& a) {
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(hermitian_part(a));
  const VectorXd w = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
}

double max_real_diag(const MatrixXcd& a) {
  return a.rows() ? a.diagonal().real().maxCoeff() : 0.0;
}

// Best of three explicit factorizations: polar (|phi*|, |phi|), and the two
// trivial ones with one side the identity.
SchurCertificate trivial_certificate(const MatrixXcd& phi, bool real) {
  const Index m = phi.rows();
  const MatrixXcd I = MatrixXcd::Identity(m, m);
  SchurCertificate best = detail::repair(phi, psd_sqrt(phi * phi.adjoint()),
                                         psd_sqrt(phi.adjoint() * phi), real);
  for (auto cand : {detail::repair(phi, I, phi.adjoint() * phi, real),
                    detail::repair(phi, phi * phi.adjoint(), I, real)}) {
    if (cand.bound < best.bound) best = std::move(cand);
  }
  return best;
}

struct QueryOutcome {
  enum Status { kFeasible, kInfeasible, kUndecided } status = kUndecided;
  SchurCertificate cert;
  detail::DualPoint dual;
  VectorXcd direction;
  int steps = 0;
};

// Projection onto {off-diagonal blocks = phi, real diagonal <= t}.
void project_affine_box(MatrixXcd& M, const MatrixXcd& phi, double t) {
  const Index m = phi.rows();
  M.topRightCorner(m, m) = phi;
  M.bottomLeftCorner(m, m) = phi.adjoint();
  for (Index i = 0; i < M.rows(); ++i) {
    M(i, i) = std::min(M(i, i).real(), t);
  }
}

// Dual weights read off the negative part of an iterate.
std::optional<detail::DualPoint> negative_part_dual(const MatrixXcd& phi,
                                                    const VectorXd& evals,
                                                    const MatrixXcd& evecs) {
  const Index m = phi.rows();
  VectorXd w = VectorXd::Zero(2 * m);
  for (Index k = 0; k < evals.size() && evals(k) < 0.0; ++k) {
    w += -evals(k) * evecs.col(k).cwiseAbs2();
  }
  VectorXd alpha = w.head(m).cwiseSqrt();
  VectorXd beta = w.tail(m).cwiseSqrt();
  if (alpha.norm() == 0.0 || beta.norm() == 0.0) return std::nullopt;
  return detail::dual_ascent(phi, alpha / alpha.norm(), beta / beta.norm(), 40);
}

QueryOutcome feasibility_query(const MatrixXcd& phi, double t, MatrixXcd start,
                               int budget, const SchurOptions& options,
                               bool real) {
  const Index m = phi.rows();
  QueryOutcome out;
  MatrixXcd x = std::move(start);
  project_affine_box(x, phi, t);
  MatrixXcd p = MatrixXcd::Zero(2 * m, 2 * m);
  MatrixXcd q = MatrixXcd::Zero(2 * m, 2 * m);
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es;

  for (int k = 0; k <= budget; ++k) {
    out.steps = k;
    es.compute(hermitian_part(x));
    const VectorXd& lam = es.eigenvalues();
    const double slack =
        options.inner_tol * (1.0 + lam.cwiseAbs().maxCoeff());
    const double repaired = max_real_diag(x) + std::max(0.0, -lam(0));
    if (repaired <= t + slack) {
      out.status = QueryOutcome::kFeasible;
      out.cert = detail::repair(phi, x.topLeftCorner(m, m),
                                x.bottomRightCorner(m, m), real);
      return out;
    }
    if (k % 20 == 0 || k == budget) {
      if (auto dual = negative_part_dual(phi, lam, es.eigenvectors())) {
        if (dual->value > out.dual.value) out.dual = *dual;
        out.direction = es.eigenvectors().col(0);
        if (dual->value > t + slack) {
          out.status = QueryOutcome::kInfeasible;
          return out;
        }
      }
    }
    if (k == budget) break;

    MatrixXcd y;
    if (options.dykstra) {
      es.compute(hermitian_part(x + p));
      y = es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).asDiagonal() *
          es.eigenvectors().adjoint();
      p = x + p - y;
      MatrixXcd next = y + q;
      project_affine_box(next, phi, t);
      q = y + q - next;
      x = std::move(next);
    } else {
      y = es.eigenvectors() * lam.cwiseMax(0.0).asDiagonal() *
          es.eigenvectors().adjoint();
      project_affine_box(y, phi, t);
      x = std::move(y);
    }
  }
  return out;
}

SchurCertificate scaled(SchurCertificate cert, double s,
                        const MatrixXcd& original) {
  cert.bound *= s;
  cert.B *= s;
  cert.C *= s;
  cert.delta *= s;
  cert.phi = original;
  return cert;
}

struct Bracket {
  double lower = 0.0;
  double upper = 0.0;
  SchurCertificate cert;
  detail::DualPoint dual;
  int queries = 0;
  int projection_steps = 0;
  int newton_steps = 0;
};

detail::DualPoint seeded_dual(const MatrixXcd& phi, const SchurOptions& options) {
  const Index m = phi.rows();
  const Index n = phi.cols();
  detail::DualPoint best = detail::dual_ascent(
      phi, VectorXd::Constant(m, 1.0 / std::sqrt(double(m))),
      VectorXd::Constant(n, 1.0 / std::sqrt(double(n))), 400);
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unif(0.05, 1.0);
  for (int s = 0; s < options.dual_starts; ++s) {
    VectorXd a(m), b(n);
    for (Index i = 0; i < m; ++i) a(i) = unif(rng);
    for (Index j = 0; j < n; ++j) b(j) = unif(rng);
    auto d = detail::dual_ascent(phi, a / a.norm(), b / b.norm(), 400);
    if (d.value > best.value) best = std::move(d);
  }
  return best;
}

// Bisection on the normalised kernel (max |phi| = 1).
Bracket bisect(const MatrixXcd& phi, double tol, const SchurOptions& options,
               bool real) {
  Bracket br;
  br.cert = trivial_certificate(phi, real);
  br.upper = br.cert.bound;
  Index bi = 0, bj = 0;
  br.dual.value = phi.cwiseAbs().maxCoeff(&bi, &bj);
  br.dual.alpha = VectorXd::Unit(phi.rows(), bi);
  br.dual.beta = VectorXd::Unit(phi.cols(), bj);
  if (br.upper - br.dual.value > tol) {
    auto d = seeded_dual(phi, options);
    if (d.value > br.dual.value) br.dual = std::move(d);
  }
  br.lower = std::max(1.0, br.dual.value);
  const int budget =
      options.refine ? options.projection_budget : options.max_inner_iterations;

  while (br.upper - br.lower > tol) {
    const double t = 0.5 * (br.lower + br.upper);
    auto q = feasibility_query(phi, t, br.cert.block(), budget, options, real);
    ++br.queries;
    br.projection_steps += q.steps;
    if (q.status == QueryOutcome::kFeasible && q.cert.bound < br.upper) {
      br.upper = q.cert.bound;
      br.cert = std::move(q.cert);
    } else if (q.status == QueryOutcome::kInfeasible) {
      br.lower = std::max(br.lower, q.dual.value);
      if (q.dual.value > br.dual.value) br.dual = q.dual;
    } else {
      break;
    }
  }

  if (br.upper - br.lower > tol) {
    if (!options.refine) {
      throw NoConvergence("alternating projections did not resolve the bracket",
                          br.lower, br.upper);
    }
    auto r = detail::refine_bracket(phi, br.lower, br.cert, 0.5 * tol, real);
    br.newton_steps = r.newton_steps;
    if (r.cert.bound < br.upper) {
      br.upper = r.cert.bound;
      br.cert = std::move(r.cert);
    }
    if (r.dual.value > br.lower) {
      br.lower = r.dual.value;
      br.dual = r.dual;
    }
    if (br.upper - br.lower > tol) {
      throw NoConvergence("Schur norm bracket did not close", br.lower,
                          br.upper);
    }
  }
  return br;
}

}  // namespace

MatrixXcd SchurCertificate::block() const { return make_block(phi, B, C); }

double dual_lower_bound(const MatrixXcd& phi, const VectorXd& alpha,
                        const VectorXd& beta) {
  const double na = alpha.norm();
  const double nb = beta.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  const MatrixXcd w = (alpha / na).asDiagonal() * phi * (beta / nb).asDiagonal();
  Eigen::JacobiSVD<MatrixXcd> svd(w);
  return svd.singularValues().sum();
}

namespace detail {

DualPoint dual_ascent(const MatrixXcd& phi, VectorXd alpha, VectorXd beta,
                      int iterations) {
  DualPoint best{dual_lower_bound(phi, alpha, beta), alpha, beta};
  for (int it = 0; it < iterations; ++it) {
    const MatrixXcd w = alpha.asDiagonal() * phi * beta.asDiagonal();
    Eigen::JacobiSVD<MatrixXcd> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const MatrixXcd polar = svd.matrixU() * svd.matrixV().adjoint();
    const MatrixXd g = phi.cwiseProduct(polar.conjugate()).real();
    VectorXd a = (g * beta).cwiseMax(0.0);
    if (a.norm() == 0.0) break;
    a /= a.norm();
    VectorXd b = (g.transpose() * a).cwiseMax(0.0);
    if (b.norm() == 0.0) break;
    b /= b.norm();
    alpha = a;
    beta = b;
    const double v = dual_lower_bound(phi, alpha, beta);
    const double gain = v - best.value;
    if (v > best.value) best = {v, alpha, beta};
    if (gain <= 1e-15 * (1.0 + std::abs(v))) break;
  }
  return best;
}

SchurCertificate repair(const MatrixXcd& phi, MatrixXcd B, MatrixXcd C,
                        bool real) {
  const Index m = phi.rows();
  B = hermitian_part(B);
  C = hermitian_part(C);
  if (real) {
    B = B.real().cast<std::complex<double>>();
    C = C.real().cast<std::complex<double>>();
  }
  SchurCertificate cert;
  cert.phi = phi;
  cert.real = real;
  Eigen::SelfAdjointEigenSolver<MatrixXcd> es(make_block(phi, B, C),
                                              Eigen::EigenvaluesOnly);
  const double delta = std::max(0.0, -es.eigenvalues()(0));
  B.diagonal().array() += delta;
  C.diagonal().array() += delta;
  cert.delta = delta;
  // Balance the two sides: (cB, C/c) is still a valid completion.
  const double mb = max_real_diag(B);
  const double mc = max_real_diag(C);
  if (mb > 0.0 && mc > 0.0) {
    const double c = std::sqrt(mc / mb);
    B *= c;
    C /= c;
  }
  cert.B = std::move(B);
  cert.C = std::move(C);
  cert.bound = std::max(max_real_diag(cert.B), max_real_diag(cert.C));
  (void)m;
  return cert;
}

}  // namespace detail

SchurNormResult schur_norm(const Kernel& kernel, const SchurOptions& options) {
  const MatrixXcd& phi = kernel.values();
  const Index m = phi.rows();
  SchurNormResult result;
  const double s = m ? phi.cwiseAbs().maxCoeff() : 0.0;
  if (s == 0.0) {
    result.cert.phi = phi;
    result.cert.B = result.cert.C = MatrixXcd::Zero(m, m);
    result.cert.real = kernel.is_real();
    extract_factorization(result.cert);
    return result;
  }
  const MatrixXcd unit = phi / s;
  Bracket br = bisect(unit, options.tol / s, options, kernel.is_real());
  result.lower = br.lower * s;
  result.upper = br.upper * s;
  result.estimate = 0.5 * (result.lower + result.upper);
  result.cert = scaled(std::move(br.cert), s, phi);
  extract_factorization(result.cert);
  result.queries = br.queries;
  result.projection_steps = br.projection_steps;
  result.newton_steps = br.newton_steps;
  return result;
}

NormCheck check_norm_leq_one(const Kernel& kernel, const SchurOptions& options,
                             double level) {
  const MatrixXcd& phi = kernel.values();
  const bool real = kernel.is_real();
  const double tol = options.tol;
  NormCheck out;
  const Index m = phi.rows();
  const double sup = m ? phi.cwiseAbs().maxCoeff() : 0.0;
  if (sup == 0.0) {
    SchurCertificate cert;
    cert.phi = phi;
    cert.B = cert.C = MatrixXcd::Zero(m, m);
    cert.real = real;
    extract_factorization(cert);
    out.certified = true;
    out.cert = std::move(cert);
    return out;
  }

  auto refute = [&](const detail::DualPoint& d, VectorXcd direction) {
    Refutation r;
    r.lower_bound = d.value;
    r.gap = d.value - level;
    r.alpha = d.alpha;
    r.beta = d.beta;
    r.direction = std::move(direction);
    out.certified = false;
    out.refutation = std::move(r);
  };
  auto certify = [&](SchurCertificate cert) {
    cert.phi = phi;
    extract_factorization(cert);
    out.certified = true;
    out.cert = std::move(cert);
  };

  SchurCertificate start = trivial_certificate(phi, real);
  if (start.bound <= level + tol) {
    certify(std::move(start));
    return out;
  }
  detail::DualPoint dual = seeded_dual(phi, options);
  if (sup > dual.value) {
    // A single entry is a dual point too.
    Index bi = 0, bj = 0;
    phi.cwiseAbs().maxCoeff(&bi, &bj);
    dual.value = sup;
    dual.alpha = VectorXd::Unit(m, bi);
    dual.beta = VectorXd::Unit(m, bj);
  }
  if (dual.value > level + tol) {
    refute(dual, VectorXcd());
    return out;
  }

  const int budget =
      options.refine ? options.projection_budget : options.max_inner_iterations;
  auto q = feasibility_query(phi, level, start.block(), budget, options, real);
  if (q.status == QueryOutcome::kFeasible && q.cert.bound <= level + tol) {
    certify(std::move(q.cert));
    return out;
  }
  if (q.status == QueryOutcome::kInfeasible && q.dual.value > level + tol) {
    refute(q.dual, q.direction);
    return out;
  }
  if (q.dual.value > dual.value) dual = q.dual;
  if (!options.refine) {
    throw NoConvergence("feasibility at the requested level is unresolved",
                        dual.value, start.bound);
  }
  if (q.status == QueryOutcome::kFeasible && q.cert.bound < start.bound) {
    start = std::move(q.cert);
  }
  auto r = detail::refine_bracket(phi, std::max(dual.value, sup), start,
                                  0.5 * tol, real);
  if (r.cert.bound <= level + tol) {
    certify(std::move(r.cert));
  } else if (r.dual.value > level) {
    refute(r.dual, q.direction);
  } else {
    throw NoConvergence("feasibility at the requested level is unresolved",
                        r.dual.value, r.cert.bound);
  }
  return out;
}

void extract_factorization(SchurCertificate& cert) {
  const Index m = cert.phi.rows();
  const MatrixXcd M = hermitian_part(cert.block());
  MatrixXcd F;
  if (cert.real) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(M.real());
    const VectorXd& w = es.eigenvalues();
    Index keep = 0;
    for (Index k = 0; k < w.size(); ++k) keep += w(k) > 0.0;
    const Index first = w.size() - keep;
    const MatrixXd f = es.eigenvectors().rightCols(keep) *
                       w.tail(keep).cwiseSqrt().asDiagonal();
    F = f.cast<std::complex<double>>();
    (void)first;
  } else {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(M);
    const VectorXd& w = es.eigenvalues();
    Index keep = 0;
    for (Index k = 0; k < w.size(); ++k) keep += w(k) > 0.0;
    F = es.eigenvectors().rightCols(keep) * w.tail(keep).cwiseSqrt().asDiagonal();
  }
  cert.P = F.topRows(m);
  cert.Q = F.bottomRows(m);
  cert.residual =
      m ? (cert.P * cert.Q.adjoint() - cert.phi).cwiseAbs().maxCoeff() : 0.0;
}

CertificateCheck verify_certificate(const SchurCertificate& cert,
                                    const MatrixXcd& phi, double tol) {
  CertificateCheck c;
  if (phi.rows() == 0) {
    c.valid = true;
    return c;
  }
  if (cert.P.rows() != phi.rows() || cert.Q.rows() != phi.cols()) return c;
  c.residual = (cert.P * cert.Q.adjoint() - phi).cwiseAbs().maxCoeff();
  const double pmax = cert.P.rowwise().norm().maxCoeff();
  const double qmax = cert.Q.rowwise().norm().maxCoeff();
  c.product_bound = pmax * qmax;
  c.valid = c.residual <= tol && c.product_bound <= cert.bound + tol;
  return c;
}

TransposeCheck transpose_norm_invariance_check(const Kernel& phi,
                                               const SchurOptions& options) {
  TransposeCheck c;
  c.norm = schur_norm(phi, options).estimate;
  c.transpose_norm = schur_norm(phi.transpose(), options).estimate;
  c.pass = std::abs(c.norm - c.transpose_norm) <= 3.0 * options.tol;
  return c;
}

}  // namespace coarse
