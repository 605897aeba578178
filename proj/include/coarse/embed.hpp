#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coarse/kernel.hpp"
#include "coarse/schur.hpp"

namespace coarse {

enum class Provenance { kGNS, kSplit, kExternal };

std::string to_string(Provenance p);

/// Row i holds u(point i).
struct Embedding {
  Eigen::MatrixXd coords;
  BallPtr ball;
  Provenance provenance = Provenance::kExternal;

  Eigen::Index size() const { return coords.rows(); }
  Eigen::Index dimension() const { return coords.cols(); }
};

/// h(x, y) = ||u(x) - u(y)||^2.
Kernel kernel_from_embedding(const Embedding& u);

struct GnsOptions {
  double tol = kExactTol;
  /// Keep every positive eigenpair instead of dropping those below
  /// 1e-12 of the total variance.
  bool full_dimension = false;
};

/// Classical scaling of a CND kernel: G = -1/2 J h J = V L V*, u = V L^{1/2}.
/// Throws NotCND when an eigenvalue lies below -tol * trace(G) / m.
Embedding gns_embed(const Kernel& h, const GnsOptions& options = {});

/// Max |‖u(x)-u(y)‖^2 - h(x, y)|.
double reconstruction_error(const Embedding& u, const Eigen::MatrixXd& h);

struct SplitPair {
  Eigen::MatrixXd R;
  Eigen::MatrixXd S;
  int n = 1;
  /// max(k)^2 / (2n): bound on k - n(1 - exp(-k/n)).
  double approx_error_bound = 0.0;
  double max_s_row_norm = 0.0;
  /// Max change to the off-diagonal block made while forcing unit diagonals.
  double normalization_perturbation = 0.0;
  /// Max |‖R(x)-R(y)‖^2 + ‖S(x)+S(y)‖^2 - n(1 - exp(-k/n))|.
  double stage_error = 0.0;
  BallPtr ball;
};

/// n(1 - exp(-k/n)).
Eigen::MatrixXd stage_kernel(const Eigen::MatrixXd& k, int n);

/// ‖R(x)-R(y)‖^2 + ‖S(x)+S(y)‖^2.
Eigen::MatrixXd split_reconstruction(const SplitPair& pair);

struct SplitOptions {
  double tol = kSolverTol;
  SchurOptions schur;
};

/// Finite-stage splitting: certify ||exp(-k/n)||_S <= 1, complete it to a PSD
/// block kernel on the doubled point set, embed n(1 - block) and read off
/// R = (P + Q)/2, S = (P - Q)/2. Throws CertificateUnavailable when the
/// exponential is not contractive.
SplitPair split_embed(const Kernel& k, int n, const SplitOptions& options = {});

/// Default stage n = ceil(10 max k), at least 1.
int default_split_stage(const Kernel& k);

struct DropResult {
  Kernel h;
  /// max ‖S(x)+S(y)‖^2, which bounds |h - k_n|.
  double s_bound = 0.0;
  double max_deviation = 0.0;  // observed max |h - k_n|
  CndResult cnd;
};

/// h(x, y) = ‖R(x) - R(y)‖^2.
DropResult drop_s_part(const SplitPair& pair, const Eigen::MatrixXd& k);

struct CompressionRow {
  int r = 0;
  double rho_minus = 0.0;  // min ‖u(x)-u(y)‖ over dist >= r
  double rho_plus = 0.0;   // max ‖u(x)-u(y)‖ over dist <= r
  bool minus_empty = false;
  bool plus_empty = false;
};

struct CompressionProfile {
  std::vector<CompressionRow> rows;  // r = 0 .. diameter
  int radius = 0;
};

CompressionProfile compression_profile(const Embedding& u);

enum class Verdict { kPass, kWarn, kFail };
std::string to_string(Verdict v);

struct CoarseCheckOptions {
  double drift_tol = 1e-6;
  /// Thresholds for the lower condition; empty means a default grid below
  /// the largest rho_minus of the smallest ball.
  std::vector<double> thresholds;
};

struct LowerRow {
  double threshold = 0.0;
  std::vector<int> width;  // per ball; -1 when no r has rho_minus(r) > threshold
  Verdict verdict = Verdict::kPass;
};

struct CoarseReport {
  Verdict upper = Verdict::kPass;
  Verdict lower = Verdict::kPass;
  Verdict overall = Verdict::kPass;
  double max_upper_drift = 0.0;
  std::vector<int> radii;
  std::vector<LowerRow> lower_rows;
};

/// Stability of both profile envelopes across a nested family of balls.
/// Throws InsufficientData for fewer than two profiles.
CoarseReport coarse_check(const std::vector<CompressionProfile>& profiles,
                          const CoarseCheckOptions& options = {});

}  // namespace coarse
