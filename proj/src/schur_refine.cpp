// Barrier path-following for the Schur norm in Schur-complement form:
//
//   minimize t  subject to  B > 0,  B_ii <= t,  (phi* B^{-1} phi)_jj <= t.
//
// Any B > 0 gives the PSD completion [[B, phi], [phi*, phi* B^{-1} phi]], so
// every iterate yields an upper bound. Barrier multipliers give dual weights
// for the matching lower bound.

#include <cmath>
#include <limits>
#include <vector>

#include "coarse/schur.hpp"

namespace coarse::detail {

namespace {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

struct Entry {
  Index row;
  Index col;
  cplx value;
};

// Hermitian basis: diagonal units, then real and (for complex problems)
// imaginary off-diagonal pairs.
struct Basis {
  std::vector<std::vector<Entry>> elems;
  std::vector<Index> diag_of;  // basis index of E_ii, by i

  Basis(Index m, bool real) : diag_of(m) {
    for (Index i = 0; i < m; ++i) {
      diag_of[i] = static_cast<Index>(elems.size());
      elems.push_back({{i, i, 1.0}});
    }
    for (Index k = 0; k < m; ++k) {
      for (Index l = k + 1; l < m; ++l) {
        elems.push_back({{k, l, 1.0}, {l, k, 1.0}});
        if (!real) elems.push_back({{k, l, cplx(0, 1)}, {l, k, cplx(0, -1)}});
      }
    }
  }
  Index size() const { return static_cast<Index>(elems.size()); }

  MatrixXcd assemble(const VectorXd& x, Index m) const {
    MatrixXcd B = MatrixXcd::Zero(m, m);
    for (Index a = 0; a < size(); ++a) {
      for (const auto& e : elems[a]) B(e.row, e.col) += x(a) * e.value;
    }
    return B;
  }

  VectorXd coordinates(const MatrixXcd& B) const {
    VectorXd x(size());
    for (Index a = 0; a < size(); ++a) {
      const auto& e = elems[a].front();
      x(a) = e.value.imag() != 0.0 ? B(e.row, e.col).imag() : B(e.row, e.col).real();
    }
    return x;
  }
};

struct Point {
  VectorXd x;
  double t = 0.0;
  MatrixXcd B;
  MatrixXcd Y;  // B^{-1}
  MatrixXcd Z;  // B^{-1} phi
  VectorXd g;   // t - B_ii
  VectorXd h;   // t - (phi* B^{-1} phi)_jj
  double logdet = 0.0;
  bool feasible = false;
};

Point evaluate(const Basis& basis, const MatrixXcd& phi, const VectorXd& x,
               double t) {
  const Index m = phi.rows();
  Point p;
  p.x = x;
  p.t = t;
  p.B = basis.assemble(x, m);
  Eigen::LLT<MatrixXcd> llt(p.B);
  if (llt.info() != Eigen::Success) return p;
  const MatrixXcd& L = llt.matrixL();
  p.logdet = 0.0;
  for (Index i = 0; i < m; ++i) {
    const double d = L(i, i).real();
    if (!(d > 0.0)) return p;
    p.logdet += 2.0 * std::log(d);
  }
  p.Y = llt.solve(MatrixXcd::Identity(m, m));
  p.Z = llt.solve(phi);
  p.g = VectorXd::Constant(m, t) - p.B.diagonal().real();
  p.h.resize(phi.cols());
  for (Index j = 0; j < phi.cols(); ++j) {
    p.h(j) = t - phi.col(j).dot(p.Z.col(j)).real();
  }
  p.feasible = p.g.minCoeff() > 0.0 && p.h.minCoeff() > 0.0;
  return p;
}

double barrier_value(const Point& p, double tau) {
  return tau * p.t - p.g.array().log().sum() - p.h.array().log().sum() -
         p.logdet;
}

// Gradient and Hessian in (x, t); t is the last coordinate.
void derivatives(const Basis& basis, const Point& p, double tau, VectorXd& grad,
                 MatrixXd& hess) {
  const Index nb = basis.size();
  const Index m = p.B.rows();
  const Index n = p.Z.cols();
  grad = VectorXd::Zero(nb + 1);
  hess = MatrixXd::Zero(nb + 1, nb + 1);

  // Diagonal constraints t - B_ii.
  for (Index i = 0; i < m; ++i) {
    const Index a = basis.diag_of[i];
    const double gi = p.g(i);
    grad(a) += 1.0 / gi;
    grad(nb) -= 1.0 / gi;
    const double w = 1.0 / (gi * gi);
    hess(a, a) += w;
    hess(nb, nb) += w;
    hess(a, nb) -= w;
    hess(nb, a) -= w;
  }

  // Column constraints t - z_j* phi_j, with dc/dx_a = -z* E_a z.
  MatrixXcd W(m, nb);
  VectorXd dc(nb);
  for (Index j = 0; j < n; ++j) {
    const auto z = p.Z.col(j);
    W.setZero();
    for (Index a = 0; a < nb; ++a) {
      cplx acc = 0.0;
      for (const auto& e : basis.elems[a]) {
        W(e.row, a) += e.value * z(e.col);
        acc += std::conj(z(e.row)) * e.value * z(e.col);
      }
      dc(a) = -acc.real();
    }
    const double hj = p.h(j);
    const MatrixXd second = 2.0 * (W.adjoint() * (p.Y * W)).real();
    grad.head(nb) += dc / hj;
    grad(nb) -= 1.0 / hj;
    const double w = 1.0 / (hj * hj);
    hess.topLeftCorner(nb, nb) += w * dc * dc.transpose() + second / hj;
    hess.col(nb).head(nb) -= w * dc;
    hess.row(nb).head(nb) -= w * dc.transpose();
    hess(nb, nb) += w;
  }

  // -log det B.
  for (Index a = 0; a < nb; ++a) {
    cplx tr = 0.0;
    for (const auto& e : basis.elems[a]) tr += p.Y(e.col, e.row) * e.value;
    grad(a) -= tr.real();
    for (Index b = a; b < nb; ++b) {
      cplx acc = 0.0;
      for (const auto& eb : basis.elems[b]) {
        for (const auto& ea : basis.elems[a]) {
          acc += eb.value * ea.value * p.Y(eb.col, ea.row) * p.Y(ea.col, eb.row);
        }
      }
      hess(a, b) += acc.real();
      if (b != a) hess(b, a) += acc.real();
    }
  }
  grad(nb) += tau;
}

// One centering step sequence at fixed tau. Returns Newton steps taken.
int center(const Basis& basis, const MatrixXcd& phi, Point& p, double tau) {
  const Index nb = basis.size();
  VectorXd grad;
  MatrixXd hess;
  int steps = 0;
  for (; steps < 80; ++steps) {
    derivatives(basis, p, tau, grad, hess);
    Eigen::LDLT<MatrixXd> ldlt(hess);
    VectorXd dir = ldlt.solve(-grad);
    if (ldlt.info() != Eigen::Success || !dir.allFinite()) {
      MatrixXd reg = hess;
      reg.diagonal().array() += 1e-12 * (1.0 + hess.diagonal().cwiseAbs().maxCoeff());
      dir = reg.ldlt().solve(-grad);
    }
    const double decrement = -grad.dot(dir);
    if (!(decrement > 0.0) || decrement < 1e-11) break;
    const double f0 = barrier_value(p, tau);
    double step = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls, step *= 0.5) {
      Point q = evaluate(basis, phi, p.x + step * dir.head(nb), p.t + step * dir(nb));
      if (!q.feasible) continue;
      if (barrier_value(q, tau) <= f0 - 0.25 * step * decrement) {
        p = std::move(q);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return steps;
}

Point initial_point(const Basis& basis, const MatrixXcd& phi,
                    const SchurCertificate& start) {
  const Index m = phi.rows();
  auto with_level = [&](const MatrixXcd& B) {
    Point p = evaluate(basis, phi, basis.coordinates(B), 0.0);
    if (p.Y.size() == 0) return p;
    double level = p.B.diagonal().real().maxCoeff();
    for (Index j = 0; j < phi.cols(); ++j) {
      level = std::max(level, phi.col(j).dot(p.Z.col(j)).real());
    }
    return evaluate(basis, phi, p.x, level * (1.0 + 1e-3) + 1e-9);
  };
  const double col = phi.colwise().norm().maxCoeff();
  Point best = with_level(MatrixXcd::Identity(m, m) * col);
  MatrixXcd warm = 0.5 * (start.B + start.B.adjoint());
  warm.diagonal().array() += 1e-2 * std::max(start.bound, 1e-12);
  Point cand = with_level(warm);
  if (cand.feasible && (!best.feasible || cand.t < best.t)) best = std::move(cand);
  return best;
}

}  // namespace

RefineResult refine_bracket(const MatrixXcd& phi, double lower,
                            const SchurCertificate& start, double target_gap,
                            bool real) {
  const Index m = phi.rows();
  const Basis basis(m, real);
  RefineResult out;
  out.cert = start;
  out.dual.value = 0.0;

  Point p = initial_point(basis, phi, start);
  if (!p.feasible) return out;
  const double nu = 3.0 * static_cast<double>(m);
  double tau = nu / std::max(p.t - lower, 1e-12);

  for (int outer = 0; outer < 60; ++outer) {
    out.newton_steps += center(basis, phi, p, tau);

    // Upper bound from the exact Schur complement.
    SchurCertificate cert =
        repair(phi, p.B, phi.adjoint() * p.Z, real);
    if (cert.bound < out.cert.bound) out.cert = std::move(cert);

    // Lower bound from the barrier multipliers.
    VectorXd alpha = (1.0 / p.g.array()).sqrt().matrix();
    VectorXd beta = (1.0 / p.h.array()).sqrt().matrix();
    DualPoint d = dual_ascent(phi, alpha / alpha.norm(), beta / beta.norm(), 30);
    if (d.value > out.dual.value) out.dual = std::move(d);

    if (out.cert.bound - std::max(out.dual.value, lower) <= target_gap) {
      out.converged = true;
      break;
    }
    if (nu / tau < 1e-14) break;
    tau *= 10.0;
  }
  return out;
}

}  // namespace coarse::detail
