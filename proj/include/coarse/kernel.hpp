#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coarse/group.hpp"

namespace coarse {

/// Default tolerances: exact constructions vs. solver-produced inputs.
inline constexpr double kExactTol = 1e-9;
inline constexpr double kSolverTol = 1e-6;

/// Square kernel over the points of a ball (the ball may be absent for
/// matrix-only use). Real kernels keep a real copy of their values.
class Kernel {
 public:
  Kernel() = default;

  static Kernel real(Eigen::MatrixXd values, BallPtr ball = nullptr);
  static Kernel complex(Eigen::MatrixXcd values, BallPtr ball = nullptr);

  /// k(i, j) = f(dist(i, j)).
  static Kernel from_distance(const BallPtr& ball,
                              const std::function<double(int)>& f);
  /// The kernel (x, y) -> f(x^{-1} y) of a function on the group.
  static Kernel from_group_function(
      const BallPtr& ball, const std::function<double(const Element&)>& f);

  Eigen::Index size() const { return values_.rows(); }
  bool is_real() const { return real_flag_; }
  /// Exact entrywise symmetry k(i, j) == k(j, i).
  bool is_symmetric() const { return symmetric_; }
  const BallPtr& ball() const { return ball_; }

  const Eigen::MatrixXcd& values() const { return values_; }
  /// Throws InvalidArgument for complex kernels.
  const Eigen::MatrixXd& real_values() const;

  Kernel transpose() const;
  Kernel with_ball(BallPtr ball) const;

 private:
  Eigen::MatrixXcd values_;
  Eigen::MatrixXd real_;
  BallPtr ball_;
  bool real_flag_ = true;
  bool symmetric_ = true;
};

struct PsdResult {
  bool psd = false;
  double min_eigenvalue = 0.0;
  double spectral_radius = 0.0;
  Eigen::VectorXcd min_eigenvector;
};

/// Smallest eigenvalue of the Hermitian part, compared against
/// -tol * (1 + spectral radius). Throws NotHermitian when the matrix is
/// further than tol * (1 + max |k|) from Hermitian.
PsdResult is_psd(const Kernel& k, double tol = kExactTol);
PsdResult is_psd(const Eigen::MatrixXd& m, double tol = kExactTol);

struct CndResult {
  bool cnd = false;
  bool symmetric = false;
  bool zero_diagonal = false;
  bool centered_psd = false;
  double max_asymmetry = 0.0;
  double max_abs_diagonal = 0.0;
  /// Smallest eigenvalue of -1/2 J k J.
  double min_eigenvalue = 0.0;
  std::string failed_clause;
};

/// -1/2 J k J with J = I - ones/m.
Eigen::MatrixXd centered_gram(const Eigen::MatrixXd& k);

/// Conditional negative definiteness by double centering. Requires a real
/// kernel; failures name the clause that failed.
CndResult is_cnd(const Kernel& k, double tol = kExactTol);

/// Entrywise exp(-t k).
Kernel schoenberg_transform(const Kernel& k, double t);

/// k(i, j) = psi(i, j) + psi(j, i).
Kernel symmetrize(const Kernel& psi);

struct DecayRow {
  int r = 0;
  double sup_off = 0.0;  // max |k| over dist > r
  bool off_empty = false;
  double sup_on = 0.0;   // max |k| over dist <= r
};

struct DecayProfile {
  std::vector<DecayRow> rows;  // r = 0 .. 2 * radius

  /// Smallest r whose off-tube supremum is strictly below eps.
  int first_width_below(double eps) const;
};

DecayProfile decay_profile(const Kernel& k);

struct PropernessRow {
  double level = 0.0;
  int width = 0;  // smallest r with {k <= level} inside Tube(r)
};

/// Throws NegativeEntries when some k(i, j) < 0.
std::vector<PropernessRow> properness_profile(const Kernel& k,
                                              const std::vector<double>& levels);

}  // namespace coarse
