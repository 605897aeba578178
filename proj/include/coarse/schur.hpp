#pragma once

#include <cstdint>
#include <optional>

#include <Eigen/Dense>

#include "coarse/kernel.hpp"

namespace coarse {

struct SchurOptions {
  /// Width of the final bracket on the norm.
  double tol = 1e-6;
  /// Projection residual / PSD violation accepted inside a feasibility query,
  /// relative to 1 + spectral radius.
  double inner_tol = 1e-8;
  /// Hard cap on projection steps in one feasibility query.
  int max_inner_iterations = 50000;
  /// Projection steps spent in a bisection query before handing the bracket
  /// to the Newton refinement. Ignored when refine is false.
  int projection_budget = 300;
  /// Dykstra correction in the projection loop.
  bool dykstra = false;
  /// Close brackets the projections cannot resolve with a barrier solve.
  bool refine = true;
  /// Random starts for the dual ascent that seeds lower bounds.
  int dual_starts = 4;
  std::uint64_t seed = 0;
};

/// Witness for ||phi||_S <= bound: the block matrix [[B, phi], [phi*, C]] is
/// PSD with diagonals at most bound. P and Q are rows of a square-root
/// factorization, so <p_i, q_j> = phi(i, j).
struct SchurCertificate {
  double bound = 0.0;
  Eigen::MatrixXcd phi;
  Eigen::MatrixXcd B;
  Eigen::MatrixXcd C;
  Eigen::MatrixXcd P;
  Eigen::MatrixXcd Q;
  /// max |<p_i, q_j> - phi(i, j)|.
  double residual = 0.0;
  /// Diagonal shift added to repair a marginally indefinite block matrix.
  double delta = 0.0;
  bool real = true;

  Eigen::MatrixXcd block() const;
};

struct SchurNormResult {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  SchurCertificate cert;
  int queries = 0;
  int projection_steps = 0;
  int newton_steps = 0;
};

/// Schur multiplier norm by bisection on the level t. Each query asks whether
/// [[B, phi], [phi*, C]] >= 0 with diag(B), diag(C) <= t is feasible and is
/// answered by alternating projections. Upper bounds are always backed by a
/// repaired block matrix; lower bounds by dual weights (alpha, beta) with
/// ||diag(alpha) phi diag(beta)||_1 > t.
SchurNormResult schur_norm(const Kernel& phi, const SchurOptions& options = {});

struct Refutation {
  double lower_bound = 0.0;
  double gap = 0.0;  // lower_bound - level
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
  /// Most negative eigen-direction of the last projection iterate.
  Eigen::VectorXcd direction;
};

struct NormCheck {
  bool certified = false;
  std::optional<SchurCertificate> cert;
  std::optional<Refutation> refutation;
};

/// Decides ||phi||_S <= level (up to options.tol).
NormCheck check_norm_leq_one(const Kernel& phi, const SchurOptions& options = {},
                             double level = 1.0);

/// Square root of the clipped block matrix; fills P, Q and the residual.
void extract_factorization(SchurCertificate& cert);

struct CertificateCheck {
  bool valid = false;
  double residual = 0.0;
  double product_bound = 0.0;  // max ||p_i|| * max ||q_j||
};

/// Re-checks a certificate from P and Q alone.
CertificateCheck verify_certificate(const SchurCertificate& cert,
                                    const Eigen::MatrixXcd& phi, double tol);

struct TransposeCheck {
  bool pass = false;
  double norm = 0.0;
  double transpose_norm = 0.0;
};

TransposeCheck transpose_norm_invariance_check(const Kernel& phi,
                                               const SchurOptions& options = {});

/// ||diag(alpha) phi diag(beta)||_1 for unit non-negative alpha, beta: a lower
/// bound on the Schur norm.
double dual_lower_bound(const Eigen::MatrixXcd& phi, const Eigen::VectorXd& alpha,
                        const Eigen::VectorXd& beta);

namespace detail {

struct DualPoint {
  double value = 0.0;
  Eigen::VectorXd alpha;
  Eigen::VectorXd beta;
};

/// Monotone alternating ascent on the dual weights.
DualPoint dual_ascent(const Eigen::MatrixXcd& phi, Eigen::VectorXd alpha,
                      Eigen::VectorXd beta, int iterations);

/// Shifts the diagonals until the block matrix is PSD and records the bound.
SchurCertificate repair(const Eigen::MatrixXcd& phi, Eigen::MatrixXcd B,
                        Eigen::MatrixXcd C, bool real);

struct RefineResult {
  SchurCertificate cert;
  DualPoint dual;
  int newton_steps = 0;
  bool converged = false;
};

/// Barrier path-following on min t s.t. diag(B) <= t, diag(phi* B^-1 phi) <= t.
RefineResult refine_bracket(const Eigen::MatrixXcd& phi, double lower,
                            const SchurCertificate& start, double target_gap,
                            bool real);

}  // namespace detail

}  // namespace coarse
