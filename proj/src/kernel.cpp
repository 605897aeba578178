#include "coarse/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "coarse/errors.hpp"

namespace coarse {

namespace {

const GroupBall& require_ball(const Kernel& k, const char* op) {
  if (!k.ball()) {
    throw InvalidArgument(std::string(op) + " needs a kernel over a ball");
  }
  return *k.ball();
}

}  // namespace

Kernel Kernel::real(Eigen::MatrixXd values, BallPtr ball) {
  if (values.rows() != values.cols()) {
    throw InvalidArgument("kernel matrix must be square");
  }
  if (ball && static_cast<Eigen::Index>(ball->size()) != values.rows()) {
    throw InvalidArgument("kernel dimension does not match the ball");
  }
  Kernel k;
  k.values_ = values.cast<std::complex<double>>();
  k.symmetric_ = (values.array() == values.transpose().array()).all();
  k.real_ = std::move(values);
  k.ball_ = std::move(ball);
  k.real_flag_ = true;
  return k;
}

Kernel Kernel::complex(Eigen::MatrixXcd values, BallPtr ball) {
  if (values.rows() != values.cols()) {
    throw InvalidArgument("kernel matrix must be square");
  }
  if (ball && static_cast<Eigen::Index>(ball->size()) != values.rows()) {
    throw InvalidArgument("kernel dimension does not match the ball");
  }
  if ((values.imag().array() == 0.0).all()) {
    return real(values.real(), std::move(ball));
  }
  Kernel k;
  k.symmetric_ = (values.array() == values.transpose().array()).all();
  k.values_ = std::move(values);
  k.ball_ = std::move(ball);
  k.real_flag_ = false;
  return k;
}

Kernel Kernel::from_distance(const BallPtr& ball,
                             const std::function<double(int)>& f) {
  const auto m = static_cast<Eigen::Index>(ball->size());
  Eigen::MatrixXd v(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) v(i, j) = f(ball->dist(i, j));
  }
  return real(std::move(v), ball);
}

Kernel Kernel::from_group_function(
    const BallPtr& ball, const std::function<double(const Element&)>& f) {
  const auto m = static_cast<Eigen::Index>(ball->size());
  Eigen::MatrixXd v(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Element inv = inverse(ball->spec, ball->points[i]);
    for (Eigen::Index j = 0; j < m; ++j) {
      v(i, j) = f(multiply(ball->spec, inv, ball->points[j]));
    }
  }
  return real(std::move(v), ball);
}

const Eigen::MatrixXd& Kernel::real_values() const {
  if (!real_flag_) throw InvalidArgument("kernel is complex-valued");
  return real_;
}

Kernel Kernel::transpose() const {
  if (real_flag_) return real(real_.transpose(), ball_);
  return complex(values_.transpose(), ball_);
}

Kernel Kernel::with_ball(BallPtr ball) const {
  if (real_flag_) return real(real_, std::move(ball));
  return complex(values_, std::move(ball));
}

PsdResult is_psd(const Kernel& k, double tol) {
  const auto& v = k.values();
  const double scale = 1.0 + (v.size() ? v.cwiseAbs().maxCoeff() : 0.0);
  const double asym = v.size() ? (v - v.adjoint()).cwiseAbs().maxCoeff() : 0.0;
  if (asym > tol * scale) {
    throw NotHermitian("kernel is not Hermitian (max asymmetry " +
                       std::to_string(asym) + ")");
  }
  PsdResult r;
  if (k.size() == 0) {
    r.psd = true;
    return r;
  }
  if (k.is_real()) {
    const Eigen::MatrixXd h = 0.5 * (k.real_values() + k.real_values().transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    r.min_eigenvalue = es.eigenvalues()(0);
    r.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
    r.min_eigenvector = es.eigenvectors().col(0).cast<std::complex<double>>();
  } else {
    const Eigen::MatrixXcd h = 0.5 * (v + v.adjoint());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
    r.min_eigenvalue = es.eigenvalues()(0);
    r.spectral_radius = es.eigenvalues().cwiseAbs().maxCoeff();
    r.min_eigenvector = es.eigenvectors().col(0);
  }
  r.psd = r.min_eigenvalue >= -tol * (1.0 + r.spectral_radius);
  return r;
}

PsdResult is_psd(const Eigen::MatrixXd& m, double tol) {
  return is_psd(Kernel::real(m), tol);
}

Eigen::MatrixXd centered_gram(const Eigen::MatrixXd& k) {
  const Eigen::Index m = k.rows();
  if (m == 0) return k;
  const Eigen::VectorXd row_mean = k.rowwise().mean();
  const Eigen::RowVectorXd col_mean = k.colwise().mean();
  const double mean = k.mean();
  Eigen::MatrixXd g = k;
  g.colwise() -= row_mean;
  g.rowwise() -= col_mean;
  g.array() += mean;
  return -0.5 * g;
}

CndResult is_cnd(const Kernel& k, double tol) {
  if (!k.is_real()) throw InvalidArgument("is_cnd requires a real kernel");
  const auto& v = k.real_values();
  CndResult r;
  if (v.size() == 0) {
    r.cnd = r.symmetric = r.zero_diagonal = r.centered_psd = true;
    return r;
  }
  const double scale = 1.0 + v.cwiseAbs().maxCoeff();
  r.max_asymmetry = (v - v.transpose()).cwiseAbs().maxCoeff();
  r.max_abs_diagonal = v.diagonal().cwiseAbs().maxCoeff();
  r.symmetric = r.max_asymmetry <= tol * scale;
  r.zero_diagonal = r.max_abs_diagonal <= tol * scale;
  const Eigen::MatrixXd g = centered_gram(0.5 * (v + v.transpose()));
  const PsdResult p = is_psd(g, tol);
  r.min_eigenvalue = p.min_eigenvalue;
  r.centered_psd = p.psd;
  if (!r.symmetric) {
    r.failed_clause = "symmetry";
  } else if (!r.zero_diagonal) {
    r.failed_clause = "zero diagonal";
  } else if (!r.centered_psd) {
    r.failed_clause = "centered form not PSD";
  }
  r.cnd = r.symmetric && r.zero_diagonal && r.centered_psd;
  return r;
}

Kernel schoenberg_transform(const Kernel& k, double t) {
  if (!(t > 0.0)) throw InvalidArgument("Schoenberg parameter t must be > 0");
  return Kernel::real((-t * k.real_values().array()).exp().matrix(), k.ball());
}

Kernel symmetrize(const Kernel& psi) {
  const auto& v = psi.real_values();
  // Floating-point addition is commutative, so the result is bit-symmetric.
  return Kernel::real(v + v.transpose(), psi.ball());
}

int DecayProfile::first_width_below(double eps) const {
  for (const auto& row : rows) {
    if (row.sup_off < eps) return row.r;
  }
  return rows.empty() ? 0 : rows.back().r;
}

DecayProfile decay_profile(const Kernel& k) {
  const auto& ball = require_ball(k, "decay_profile");
  const int max_r = 2 * ball.radius;
  // Per-distance maxima first, then prefix / suffix maxima.
  std::vector<double> at(max_r + 1, 0.0);
  std::vector<bool> present(max_r + 1, false);
  const Eigen::MatrixXd a = k.values().cwiseAbs();
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      const int d = ball.dist(i, j);
      at[d] = std::max(at[d], a(i, j));
      present[d] = true;
    }
  }
  DecayProfile profile;
  profile.rows.resize(max_r + 1);
  double on = 0.0;
  for (int r = 0; r <= max_r; ++r) {
    on = std::max(on, at[r]);
    profile.rows[r].r = r;
    profile.rows[r].sup_on = on;
  }
  double off = 0.0;
  bool any = false;
  for (int r = max_r; r >= 0; --r) {
    profile.rows[r].sup_off = off;
    profile.rows[r].off_empty = !any;
    off = std::max(off, at[r]);
    any = any || present[r];
  }
  return profile;
}

std::vector<PropernessRow> properness_profile(const Kernel& k,
                                              const std::vector<double>& levels) {
  const auto& ball = require_ball(k, "properness_profile");
  const auto& v = k.real_values();
  if (v.size() && v.minCoeff() < 0.0) {
    throw NegativeEntries("properness_profile needs non-negative entries");
  }
  std::vector<PropernessRow> out;
  out.reserve(levels.size());
  for (double level : levels) {
    int width = 0;
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      for (Eigen::Index j = 0; j < v.cols(); ++j) {
        if (v(i, j) <= level) width = std::max(width, ball.dist(i, j));
      }
    }
    out.push_back({level, width});
  }
  return out;
}

}  // namespace coarse
