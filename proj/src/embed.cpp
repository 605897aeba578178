#include "coarse/embed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "coarse/errors.hpp"

namespace coarse {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd pairwise_sq_dist(const MatrixXd& x) {
  const Index m = x.rows();
  MatrixXd d = MatrixXd::Zero(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = i + 1; j < m; ++j) {
      d(i, j) = d(j, i) = (x.row(i) - x.row(j)).squaredNorm();
    }
  }
  return d;
}

const GroupBall& require_ball(const BallPtr& ball, const char* op) {
  if (!ball) throw InvalidArgument(std::string(op) + " needs an embedding over a ball");
  return *ball;
}

}  // namespace

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::kGNS:
      return "gns";
    case Provenance::kSplit:
      return "split";
    case Provenance::kExternal:
      return "external";
  }
  return "?";
}

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass:
      return "PASS";
    case Verdict::kWarn:
      return "WARN";
    case Verdict::kFail:
      return "FAIL";
  }
  return "?";
}

Kernel kernel_from_embedding(const Embedding& u) {
  return Kernel::real(pairwise_sq_dist(u.coords), u.ball);
}

Embedding gns_embed(const Kernel& h, const GnsOptions& options) {
  const CndResult cnd = is_cnd(h, options.tol);
  if (!cnd.symmetric || !cnd.zero_diagonal) {
    throw NotCND("gns_embed: kernel fails the " + cnd.failed_clause + " clause",
                 cnd.min_eigenvalue);
  }
  const auto& v = h.real_values();
  const Index m = v.rows();
  Embedding u;
  u.ball = h.ball();
  u.provenance = Provenance::kGNS;
  if (m == 0) {
    u.coords = MatrixXd(0, 0);
    return u;
  }
  const MatrixXd g = centered_gram(0.5 * (v + v.transpose()));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
  const VectorXd& w = es.eigenvalues();
  const double trace = g.trace();
  const double scale = trace > 0.0 ? trace / double(m) : 1.0;
  if (w(0) < -options.tol * scale) {
    throw NotCND("gns_embed: centered Gram matrix has eigenvalue " +
                     std::to_string(w(0)),
                 w(0));
  }
  const double total = w.cwiseMax(0.0).sum();
  std::vector<Index> keep;
  for (Index k = m - 1; k >= 0; --k) {
    if (w(k) <= 0.0) break;
    if (!options.full_dimension && w(k) < 1e-12 * total) break;
    keep.push_back(k);
  }
  u.coords = MatrixXd(m, static_cast<Index>(keep.size()));
  for (Index c = 0; c < static_cast<Index>(keep.size()); ++c) {
    u.coords.col(c) = es.eigenvectors().col(keep[c]) * std::sqrt(w(keep[c]));
  }
  return u;
}

double reconstruction_error(const Embedding& u, const MatrixXd& h) {
  if (h.size() == 0) return 0.0;
  return (pairwise_sq_dist(u.coords) - h).cwiseAbs().maxCoeff();
}

MatrixXd stage_kernel(const MatrixXd& k, int n) {
  const double dn = n;
  return (dn * (1.0 - (-k.array() / dn).exp())).matrix();
}

int default_split_stage(const Kernel& k) {
  const auto& v = k.real_values();
  const double mx = v.size() ? v.maxCoeff() : 0.0;
  return std::max(1, static_cast<int>(std::ceil(10.0 * mx)));
}

MatrixXd split_reconstruction(const SplitPair& pair) {
  const Index m = pair.R.rows();
  MatrixXd out(m, m);
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      out(i, j) = (pair.R.row(i) - pair.R.row(j)).squaredNorm() +
                  (pair.S.row(i) + pair.S.row(j)).squaredNorm();
    }
  }
  return out;
}

SplitPair split_embed(const Kernel& k, int n, const SplitOptions& options) {
  if (n < 1) throw InvalidArgument("split stage n must be >= 1");
  const MatrixXd& kv = k.real_values();
  const Index m = kv.rows();
  const double scale = 1.0 + (m ? kv.cwiseAbs().maxCoeff() : 0.0);
  if (m && (kv - kv.transpose()).cwiseAbs().maxCoeff() > options.tol * scale) {
    throw InvalidArgument("split_embed needs a symmetric kernel");
  }
  if (m && kv.minCoeff() < 0.0) {
    throw InvalidArgument("split_embed needs a non-negative kernel");
  }
  if (m && kv.diagonal().cwiseAbs().maxCoeff() > options.tol * scale) {
    throw InvalidArgument("split_embed needs a kernel vanishing on the diagonal");
  }

  const MatrixXd a = (-kv.array() / double(n)).exp().matrix();
  SchurOptions schur = options.schur;
  schur.tol = std::min(schur.tol, options.tol);
  const NormCheck check = check_norm_leq_one(Kernel::real(a), schur);
  if (!check.certified) {
    throw CertificateUnavailable(
        "exp(-k/n) is not a contractive Schur multiplier (lower bound " +
        std::to_string(check.refutation ? check.refutation->lower_bound : 0.0) +
        ")");
  }

  // Unit diagonals: rescale entries above 1, then pad entries below 1.
  MatrixXd M = check.cert->block().real();
  M = 0.5 * (M + M.transpose());
  VectorXd s(2 * m);
  for (Index i = 0; i < 2 * m; ++i) s(i) = 1.0 / std::sqrt(std::max(M(i, i), 1.0));
  M = s.asDiagonal() * M * s.asDiagonal();
  for (Index i = 0; i < 2 * m; ++i) M(i, i) = 1.0;

  SplitPair pair;
  pair.n = n;
  pair.ball = k.ball();
  pair.normalization_perturbation =
      m ? (M.topRightCorner(m, m) - a).cwiseAbs().maxCoeff() : 0.0;

  // n(1 - kappa) is CND on the doubled point set.
  const MatrixXd doubled = (double(n) * (1.0 - M.array())).matrix();
  GnsOptions gns;
  gns.tol = options.tol;
  gns.full_dimension = true;
  const Embedding t = gns_embed(Kernel::real(doubled), gns);
  MatrixXd P = t.coords.topRows(m);
  MatrixXd Q = t.coords.bottomRows(m);
  if (m) {
    // Pin the copy of the identity at the origin.
    const Eigen::RowVectorXd origin = Q.row(0);
    P.rowwise() -= origin;
    Q.rowwise() -= origin;
  }
  pair.R = 0.5 * (P + Q);
  pair.S = 0.5 * (P - Q);
  pair.max_s_row_norm = m ? pair.S.rowwise().norm().maxCoeff() : 0.0;
  const double kmax = m ? kv.maxCoeff() : 0.0;
  pair.approx_error_bound = kmax * kmax / (2.0 * n);
  pair.stage_error =
      m ? (split_reconstruction(pair) - stage_kernel(kv, n)).cwiseAbs().maxCoeff()
        : 0.0;
  return pair;
}

DropResult drop_s_part(const SplitPair& pair, const MatrixXd& k) {
  const Index m = pair.R.rows();
  DropResult out;
  out.h = Kernel::real(pairwise_sq_dist(pair.R), pair.ball);
  double sb = 0.0;
  for (Index i = 0; i < m; ++i) {
    for (Index j = 0; j < m; ++j) {
      sb = std::max(sb, (pair.S.row(i) + pair.S.row(j)).squaredNorm());
    }
  }
  out.s_bound = sb;
  if (k.size()) {
    out.max_deviation =
        (out.h.real_values() - stage_kernel(k, pair.n)).cwiseAbs().maxCoeff();
  }
  out.cnd = is_cnd(out.h);
  return out;
}

CompressionProfile compression_profile(const Embedding& u) {
  const auto& ball = require_ball(u.ball, "compression_profile");
  const int diam = ball.diameter();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> lo(diam + 1, inf), hi(diam + 1, -inf);
  const Index m = u.coords.rows();
  for (Index i = 0; i < m; ++i) {
    for (Index j = i; j < m; ++j) {
      const int d = ball.dist(i, j);
      const double e = (u.coords.row(i) - u.coords.row(j)).norm();
      lo[d] = std::min(lo[d], e);
      hi[d] = std::max(hi[d], e);
    }
  }
  CompressionProfile p;
  p.radius = ball.radius;
  p.rows.resize(diam + 1);
  double run = -inf;
  for (int r = 0; r <= diam; ++r) {
    run = std::max(run, hi[r]);
    p.rows[r].r = r;
    p.rows[r].plus_empty = run == -inf;
    p.rows[r].rho_plus = p.rows[r].plus_empty ? 0.0 : run;
  }
  run = inf;
  for (int r = diam; r >= 0; --r) {
    run = std::min(run, lo[r]);
    p.rows[r].minus_empty = run == inf;
    p.rows[r].rho_minus = p.rows[r].minus_empty ? 0.0 : run;
  }
  return p;
}

CoarseReport coarse_check(const std::vector<CompressionProfile>& profiles,
                          const CoarseCheckOptions& options) {
  if (profiles.size() < 2) {
    throw InsufficientData("coarse_check needs profiles on at least two radii");
  }
  CoarseReport rep;
  for (const auto& p : profiles) rep.radii.push_back(p.radius);

  std::size_t common = profiles.front().rows.size();
  double top = 0.0;
  for (const auto& p : profiles) {
    common = std::min(common, p.rows.size());
    for (const auto& row : p.rows) top = std::max(top, row.rho_plus);
  }
  for (std::size_t r = 0; r < common; ++r) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& p : profiles) {
      lo = std::min(lo, p.rows[r].rho_plus);
      hi = std::max(hi, p.rows[r].rho_plus);
    }
    rep.max_upper_drift = std::max(rep.max_upper_drift, hi - lo);
  }
  rep.upper = rep.max_upper_drift <= options.drift_tol * (1.0 + top)
                  ? Verdict::kPass
                  : Verdict::kWarn;

  std::vector<double> thresholds = options.thresholds;
  if (thresholds.empty()) {
    const auto& first = profiles.front().rows;
    const double reach = first.empty() ? 0.0 : first.back().rho_minus;
    for (int q = 0; q < 4; ++q) thresholds.push_back(reach * q / 4.0);
  }
  rep.lower = Verdict::kPass;
  for (double thr : thresholds) {
    LowerRow row;
    row.threshold = thr;
    for (const auto& p : profiles) {
      int w = -1;
      for (const auto& pr : p.rows) {
        if (!pr.minus_empty && pr.rho_minus > thr) {
          w = pr.r;
          break;
        }
      }
      row.width.push_back(w);
    }
    if (row.width.back() < 0) {
      row.verdict = Verdict::kFail;
    } else {
      const bool stable = std::all_of(row.width.begin(), row.width.end(),
                                      [&](int w) { return w == row.width.back(); });
      row.verdict = stable ? Verdict::kPass : Verdict::kWarn;
    }
    if (row.verdict == Verdict::kFail) {
      rep.lower = Verdict::kFail;
    } else if (row.verdict == Verdict::kWarn && rep.lower == Verdict::kPass) {
      rep.lower = Verdict::kWarn;
    }
    rep.lower_rows.push_back(std::move(row));
  }
  if (rep.upper == Verdict::kFail || rep.lower == Verdict::kFail) {
    rep.overall = Verdict::kFail;
  } else if (rep.upper == Verdict::kWarn || rep.lower == Verdict::kWarn) {
    rep.overall = Verdict::kWarn;
  } else {
    rep.overall = Verdict::kPass;
  }
  return rep;
}

}  // namespace coarse
