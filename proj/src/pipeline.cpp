#include "coarse/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "coarse/errors.hpp"

namespace coarse {

namespace {

using Eigen::Index;
using Eigen::MatrixXd;
using nlohmann::json;

const GroupBall& need_ball(const BallPtr& ball, const char* op) {
  if (!ball) throw InvalidArgument(std::string(op) + " needs kernels over a ball");
  return *ball;
}

// sup over Tube(r) of |phi - 1|.
double tube_deviation(const Kernel& phi, const GroupBall& ball, int r) {
  const auto& v = phi.values();
  double dev = 0.0;
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < v.cols(); ++j) {
      if (ball.dist(i, j) <= r) dev = std::max(dev, std::abs(v(i, j) - 1.0));
    }
  }
  return dev;
}

Kernel scaled_complement_exp(const Kernel& phi, double c) {
  // exp(-c (1 - phi)) for real phi.
  const MatrixXd& v = phi.real_values();
  return Kernel::real((-c * (1.0 - v.array())).exp().matrix(), phi.ball());
}

}  // namespace

// ---------------------------------------------------------------- schedule

double ScheduleParams::alpha_at(int n) const {
  return alpha == Alpha::kLinear ? double(n) : std::ldexp(1.0, n);
}

double ScheduleParams::epsilon_at(int n) const {
  return epsilon == Epsilon::kInverseCube ? 1.0 / (double(n) * n * n)
                                          : std::ldexp(1.0, -2 * n);
}

int ScheduleParams::width_at(int n, int diameter) const {
  return std::min(n, diameter);
}

double ScheduleParams::tail_bound() const {
  validate();
  if (alpha == Alpha::kLinear && epsilon == Epsilon::kInverseCube) {
    double partial = 0.0;
    for (int n = N; n >= 1; --n) partial += 1.0 / (double(n) * n);
    return std::numbers::pi * std::numbers::pi / 6.0 - partial;
  }
  if (alpha == Alpha::kLinear) {
    // sum_{n > N} n x^n with x = 1/4.
    const double x = 0.25;
    return std::pow(x, N + 1) * ((N + 1) - N * x) / ((1 - x) * (1 - x));
  }
  return std::ldexp(1.0, -N);
}

void ScheduleParams::validate() const {
  if (N < 1) throw InvalidArgument("schedule truncation N must be >= 1");
  if (N > 60) throw InvalidArgument("schedule truncation N must be <= 60");
  if (alpha == Alpha::kPow2 && epsilon == Epsilon::kInverseCube) {
    throw InvalidArgument("schedule alpha = 2^n with epsilon = n^-3 has a divergent sum");
  }
}

ScheduleParams::Alpha ScheduleParams::parse_alpha(const std::string& s) {
  if (s == "n") return Alpha::kLinear;
  if (s == "2^n") return Alpha::kPow2;
  throw InvalidArgument("unknown alpha schedule '" + s + "'");
}

ScheduleParams::Epsilon ScheduleParams::parse_epsilon(const std::string& s) {
  if (s == "n^-3") return Epsilon::kInverseCube;
  if (s == "4^-n") return Epsilon::kPow4;
  throw InvalidArgument("unknown epsilon schedule '" + s + "'");
}

std::string ScheduleParams::alpha_name() const {
  return alpha == Alpha::kLinear ? "n" : "2^n";
}

std::string ScheduleParams::epsilon_name() const {
  return epsilon == Epsilon::kInverseCube ? "n^-3" : "4^-n";
}

// ---------------------------------------------------------------- family

MultiplierFamily MultiplierFamily::exponential(Kernel base, int size) {
  if (!base.is_real()) throw InvalidArgument("exponential family needs a real base kernel");
  if (size < 1) throw InvalidArgument("family size must be >= 1");
  MultiplierFamily f;
  f.kind_ = Kind::kExponentialOfKernel;
  f.size_ = size;
  f.ball_ = base.ball();
  f.base_ = std::move(base);
  return f;
}

MultiplierFamily MultiplierFamily::gaussian(BallPtr ball, int size) {
  if (!ball) throw InvalidArgument("gaussian family needs a ball");
  if (size < 1) throw InvalidArgument("family size must be >= 1");
  MultiplierFamily f;
  f.kind_ = Kind::kGaussianOfMetric;
  f.size_ = size;
  f.base_ = Kernel::from_distance(ball, [](int d) { return double(d) * d; });
  f.ball_ = std::move(ball);
  return f;
}

MultiplierFamily MultiplierFamily::custom(std::vector<Kernel> members) {
  if (members.empty()) throw InvalidArgument("custom family is empty");
  MultiplierFamily f;
  f.kind_ = Kind::kCustom;
  f.size_ = static_cast<int>(members.size());
  f.ball_ = members.front().ball();
  for (const auto& m : members) {
    if (m.size() != members.front().size()) {
      throw InvalidArgument("custom family members differ in size");
    }
  }
  f.members_ = std::move(members);
  return f;
}

Kernel MultiplierFamily::member(int index) const {
  if (index < 1 || index > size_) {
    throw InvalidArgument("family index " + std::to_string(index) + " out of range");
  }
  if (kind_ == Kind::kCustom) return members_[index - 1];
  const MatrixXd& b = base_.real_values();
  return Kernel::real((-b.array() / double(index)).exp().matrix(), ball_);
}

std::string to_string(MultiplierFamily::Kind kind) {
  switch (kind) {
    case MultiplierFamily::Kind::kExponentialOfKernel:
      return "exponential";
    case MultiplierFamily::Kind::kGaussianOfMetric:
      return "gaussian";
    case MultiplierFamily::Kind::kCustom:
      return "custom";
  }
  return "?";
}

// ---------------------------------------------------------------- normalize

NormalizedFamily normalize_family(const MultiplierFamily& family,
                                  const ScheduleParams& schedule,
                                  const SchurOptions& options) {
  schedule.validate();
  const GroupBall& ball = need_ball(family.ball(), "normalize_family");
  const int diam = ball.diameter();

  NormalizedFamily out;
  out.schedule = schedule;
  out.ball = family.ball();

  auto deviation = [&](int index, int r) {
    return tube_deviation(family.member(index), ball, r);
  };
  std::vector<std::pair<int, double>> certified;  // index -> bound

  int floor_index = 1;  // selections are non-decreasing for monotone families
  for (int n = 1; n <= schedule.N; ++n) {
    const double eps = schedule.epsilon_at(n);
    const int r = schedule.width_at(n, diam);
    const double target = eps / 2.0;
    int chosen = -1;
    if (family.monotone_on_tubes()) {
      int lo = floor_index - 1;  // known to fail (or 0)
      int hi = floor_index;
      while (hi < family.size() && deviation(hi, r) > target) {
        lo = hi;
        hi = hi > (family.size() - hi) ? family.size() : 2 * hi;
      }
      if (deviation(hi, r) <= target) {
        while (hi - lo > 1) {
          const int mid = lo + (hi - lo) / 2;
          if (deviation(mid, r) <= target) {
            hi = mid;
          } else {
            lo = mid;
          }
        }
        chosen = hi;
      }
    } else {
      for (int m = 1; m <= family.size(); ++m) {
        if (deviation(m, r) <= target) {
          chosen = m;
          break;
        }
      }
    }
    if (chosen < 0) {
      throw ScheduleInfeasible("no family member within eps_" + std::to_string(n) +
                                   "/2 of 1 on Tube(" + std::to_string(r) + ")",
                               n);
    }
    if (family.monotone_on_tubes()) floor_index = chosen;

    const Kernel phi = family.member(chosen);
    double bound = 0.0;
    auto hit = std::find_if(certified.begin(), certified.end(),
                            [&](const auto& e) { return e.first == chosen; });
    if (hit != certified.end()) {
      bound = hit->second;
    } else {
      const NormCheck check = check_norm_leq_one(phi, options);
      if (!check.certified) {
        throw CertificateUnavailable(
            "family member " + std::to_string(chosen) +
            " is not a contractive Schur multiplier");
      }
      bound = check.cert->bound;
      certified.emplace_back(chosen, bound);
    }

    NormalizedMember mem;
    mem.n = n;
    mem.index = chosen;
    mem.width = r;
    mem.epsilon = eps;
    mem.deviation_before = tube_deviation(phi, ball, r);
    mem.cert_bound = bound;
    mem.phi = Kernel::real(phi.values().cwiseAbs2(), family.ball());
    mem.deviation_after = tube_deviation(mem.phi, ball, r);
    out.members.push_back(std::move(mem));
  }
  return out;
}

// ---------------------------------------------------------------- psi

PsiResult build_psi(const NormalizedFamily& family) {
  const auto& sched = family.schedule;
  if (family.members.empty()) throw InvalidArgument("build_psi on an empty family");
  const GroupBall& ball = need_ball(family.ball, "build_psi");
  const Index m = family.members.front().phi.size();

  PsiResult out;
  MatrixXd acc = MatrixXd::Zero(m, m);
  for (const auto& mem : family.members) {
    acc += sched.alpha_at(mem.n) * (1.0 - mem.phi.real_values().array()).matrix();
    out.partial_sums.push_back(Kernel::real(acc, family.ball));
  }
  out.psi = out.partial_sums.back();
  out.tail_bound = sched.tail_bound();

  const int count = static_cast<int>(family.members.size());
  for (int n = 1; n <= count; ++n) {
    const int r = family.members[n - 1].width;
    TubeBoundRow row;
    row.n = n;
    row.width = r;
    row.sup_on_tube = tube_deviation(
        Kernel::real(MatrixXd::Ones(m, m) - out.psi.real_values(), nullptr), ball, r);
    double bound = 0.0;
    for (int k = 1; k <= count; ++k) {
      const auto& mem = family.members[k - 1];
      if (k <= n) {
        bound += sched.alpha_at(k) * tube_deviation(mem.phi, ball, r);
      } else {
        bound += sched.alpha_at(k) * mem.epsilon;
      }
    }
    row.bound = bound;
    row.holds = row.sup_on_tube <= bound * (1.0 + 1e-12) + 1e-12;
    out.tube_bounds.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------- properness

PropernessWitness verify_properness_argument(const Kernel& psi,
                                             const NormalizedFamily& family,
                                             double level) {
  if (!(level >= 0.0)) throw InvalidArgument("properness level must be >= 0");
  const GroupBall& ball = need_ball(family.ball, "verify_properness_argument");
  const auto& sched = family.schedule;
  PropernessWitness w;
  w.level = level;
  for (const auto& mem : family.members) {
    if (sched.alpha_at(mem.n) >= 2.0 * level) {
      w.n = mem.n;
      break;
    }
  }
  if (w.n == 0) {
    throw InvalidArgument("no n <= N with alpha_n >= 2R; raise N");
  }
  w.alpha_n = sched.alpha_at(w.n);
  const Kernel& phi = family.members[w.n - 1].phi;
  w.width = decay_profile(phi).first_width_below(0.5);

  const MatrixXd& p = psi.real_values();
  const MatrixXd& f = phi.real_values();
  if (p.rows() != f.rows()) throw InvalidArgument("psi and family differ in size");
  for (Index i = 0; i < p.rows(); ++i) {
    for (Index j = 0; j < p.cols(); ++j) {
      const int d = ball.dist(i, j);
      const bool middle = 1.0 - f(i, j) <= 0.5;
      if (p(i, j) <= level) {
        ++w.sublevel_pairs;
        w.max_sublevel_dist = std::max(w.max_sublevel_dist, d);
        if (!middle) {
          throw ArgumentFails("psi(" + std::to_string(i) + "," + std::to_string(j) +
                              ") <= R but 1 - phi_n > 1/2");
        }
      }
      if (middle) {
        ++w.middle_pairs;
        w.max_middle_dist = std::max(w.max_middle_dist, d);
        if (d > w.width) {
          throw ArgumentFails("pair (" + std::to_string(i) + "," + std::to_string(j) +
                              ") with 1 - phi_n <= 1/2 lies outside Tube(" +
                              std::to_string(w.width) + ")");
        }
      }
    }
  }
  return w;
}

// ---------------------------------------------------------------- contractivity

ContractivityReport verify_contractive_exponentials(
    const PsiResult& psi, const NormalizedFamily& family,
    const std::vector<double>& t_grid, int max_partial,
    const SchurOptions& options) {
  ContractivityReport rep;
  const int count = static_cast<int>(psi.partial_sums.size());
  const int upto = max_partial <= 0 ? count : std::min(max_partial, count);

  auto run = [&](double t, int index, const Kernel& k) {
    ContractivityCell cell;
    cell.t = t;
    cell.index = index;
    try {
      const NormCheck c = check_norm_leq_one(k, options);
      cell.certified = c.certified;
      if (c.certified) {
        cell.bound = c.cert->bound;
      } else if (c.refutation) {
        cell.bound = c.refutation->lower_bound;
      }
    } catch (const NoConvergence& e) {
      cell.error = e.what();
      cell.bound = e.upper();
    }
    if (!cell.certified) rep.all_certified = false;
    return cell;
  };

  for (double t : t_grid) {
    if (!(t > 0.0)) throw InvalidArgument("t must be positive");
    for (int i = 1; i <= upto; ++i) {
      rep.partial_sums.push_back(run(t, i, schoenberg_transform(psi.partial_sums[i - 1], t)));
    }
    for (const auto& mem : family.members) {
      const double c = t * family.schedule.alpha_at(mem.n);
      rep.factors.push_back(run(t, mem.n, scaled_complement_exp(mem.phi, c)));
    }
  }
  return rep;
}

// ---------------------------------------------------------------- chain

namespace {

struct StageBuilder {
  StageRecord rec;
  bool any_fail = false;
  bool any_warn = false;

  explicit StageBuilder(std::string name) { rec.name = std::move(name); }

  void check(const std::string& name, bool passed, double value, double threshold,
             bool warn_only = false) {
    rec.checks.push_back({name, passed, value, threshold});
    if (!passed) (warn_only ? any_warn : any_fail) = true;
  }

  StageRecord finish() {
    rec.status = any_fail ? Verdict::kFail : any_warn ? Verdict::kWarn : Verdict::kPass;
    return std::move(rec);
  }
};

json profile_json(const CompressionProfile& p) {
  json rows = json::array();
  for (const auto& r : p.rows) {
    rows.push_back({{"r", r.r},
                    {"rho_minus", r.rho_minus},
                    {"rho_plus", r.rho_plus},
                    {"minus_empty", r.minus_empty},
                    {"plus_empty", r.plus_empty}});
  }
  return rows;
}

json cells_json(const std::vector<ContractivityCell>& cells, const char* key) {
  json out = json::array();
  for (const auto& c : cells) {
    json j = {{"t", c.t}, {key, c.index}, {"certified", c.certified}, {"bound", c.bound}};
    if (!c.error.empty()) j["error"] = c.error;
    out.push_back(std::move(j));
  }
  return out;
}

double max_abs(const MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

class Chain {
 public:
  Chain(const ChainParams& params, PipelineReport& report)
      : p_(params), rep_(report) {}

  void run(const MultiplierFamily& family) {
    if (!stage("normalize", [&](StageBuilder& s) { normalize(s, family); })) return;
    if (!stage("psi", [&](StageBuilder& s) { psi(s); })) return;
    if (!stage("properness", [&](StageBuilder& s) { properness(s); })) return;
    if (!stage("contractivity", [&](StageBuilder& s) { contractivity(s); })) return;
    if (!stage("symmetrize", [&](StageBuilder& s) { symmetrize_stage(s); })) return;
    if (!stage("split", [&](StageBuilder& s) { split(s); })) return;
    if (!stage("cnd", [&](StageBuilder& s) { cnd(s); })) return;
    if (!stage("embed", [&](StageBuilder& s) { embed(s); })) return;
    stage("profile", [&](StageBuilder& s) { profile(s); });
  }

 private:
  const ChainParams& p_;
  PipelineReport& rep_;
  ChainArtifacts& art() { return rep_.artifacts; }
  double corridor_h_ = 0.0;

  bool stage(const std::string& name, const std::function<void(StageBuilder&)>& body) {
    StageBuilder s(name);
    try {
      body(s);
    } catch (const Error& e) {
      s.rec.error = e.what();
      s.any_fail = true;
      if (const auto* si = dynamic_cast<const ScheduleInfeasible*>(&e)) {
        s.rec.details["infeasible_stage"] = si->stage();
      }
    }
    StageRecord rec = s.finish();
    if (rec.status == Verdict::kFail) {
      rep_.overall = Verdict::kFail;
      if (!rec.error.empty()) {
        rep_.reasons.push_back(name + ": " + rec.error);
      }
      for (const auto& c : rec.checks) {
        if (!c.passed) rep_.reasons.push_back(name + ": " + c.name + " failed");
      }
    } else if (rec.status == Verdict::kWarn) {
      if (rep_.overall == Verdict::kPass) rep_.overall = Verdict::kWarn;
      for (const auto& c : rec.checks) {
        if (!c.passed) rep_.reasons.push_back(name + ": " + c.name + " warns");
      }
    }
    const bool ok = rec.status != Verdict::kFail;
    rep_.stages.push_back(std::move(rec));
    return ok;
  }

  void normalize(StageBuilder& s, const MultiplierFamily& family) {
    s.rec.details["family"] = to_string(family.kind());
    NormalizedFamily nf = normalize_family(family, p_.schedule, p_.schur);
    const GroupBall& ball = *nf.ball;
    json members = json::array();
    bool tube_ok = true;
    bool range_ok = true;
    double worst_bound = 0.0;
    for (const auto& m : nf.members) {
      members.push_back({{"n", m.n},
                         {"index", m.index},
                         {"width", m.width},
                         {"epsilon", m.epsilon},
                         {"deviation_before", m.deviation_before},
                         {"deviation_after", m.deviation_after},
                         {"cert_bound", m.cert_bound},
                         {"off_tube_width_half",
                          decay_profile(m.phi).first_width_below(0.5)}});
      tube_ok = tube_ok && m.deviation_after <= m.epsilon;
      const auto& v = m.phi.real_values();
      range_ok = range_ok && v.minCoeff() >= 0.0 && v.maxCoeff() <= 1.0 + p_.tol;
      worst_bound = std::max(worst_bound, m.cert_bound);
    }
    s.rec.details["members"] = std::move(members);

    // Uniform convergence on tubes: sup over Tube(r) of |phi_n - 1| per r.
    json table = json::array();
    for (int r = 0; r <= ball.diameter(); ++r) {
      json row = json::array();
      for (const auto& m : nf.members) row.push_back(tube_deviation(m.phi, ball, r));
      table.push_back({{"r", r}, {"sup_deviation", std::move(row)}});
    }
    s.rec.details["tube_convergence"] = std::move(table);

    s.check("tube_bound", tube_ok, 0.0, 0.0);
    s.check("entries_in_unit_interval", range_ok, 0.0, 0.0);
    s.check("members_contractive", worst_bound <= 1.0 + p_.schur.tol, worst_bound,
            1.0 + p_.schur.tol);
    art().family = std::move(nf);
  }

  void psi(StageBuilder& s) {
    PsiResult pr = build_psi(*art().family);
    const auto& v = pr.psi.real_values();
    const double diag = max_abs(v.diagonal());
    s.check("non_negative", v.minCoeff() >= 0.0, v.minCoeff(), 0.0);
    s.check("zero_diagonal", diag == 0.0, diag, 0.0);
    bool tubes = true;
    json rows = json::array();
    for (const auto& r : pr.tube_bounds) {
      tubes = tubes && r.holds;
      rows.push_back({{"n", r.n},
                      {"width", r.width},
                      {"sup_on_tube", r.sup_on_tube},
                      {"bound", r.bound},
                      {"holds", r.holds}});
    }
    s.check("bounded_on_tubes", tubes, 0.0, 0.0);
    s.rec.details["tube_bounds"] = std::move(rows);
    s.rec.details["tail_bound"] = pr.tail_bound;
    s.rec.details["max_psi"] = v.maxCoeff();
    s.rec.details["truncated"] = true;
    s.rec.details["truncation_note"] =
        "off Tube(r_N) the truncated psi is a lower bound for the full series";
    art().psi = std::move(pr);
  }

  void properness(StageBuilder& s) {
    json rows = json::array();
    for (double R : p_.properness_levels) {
      const PropernessWitness w =
          verify_properness_argument(art().psi->psi, *art().family, R);
      rows.push_back({{"level", w.level},
                      {"n", w.n},
                      {"alpha_n", w.alpha_n},
                      {"width", w.width},
                      {"sublevel_pairs", w.sublevel_pairs},
                      {"middle_pairs", w.middle_pairs},
                      {"max_sublevel_dist", w.max_sublevel_dist},
                      {"max_middle_dist", w.max_middle_dist}});
      s.check("inclusion_R=" + json(R).dump(), true, R, w.width);
    }
    s.rec.details["witnesses"] = std::move(rows);
  }

  void contractivity(StageBuilder& s) {
    const ContractivityReport c = verify_contractive_exponentials(
        *art().psi, *art().family, p_.t_grid, p_.max_partial, p_.schur);
    int failed = 0;
    for (const auto& cell : c.partial_sums) failed += !cell.certified;
    for (const auto& cell : c.factors) failed += !cell.certified;
    s.check("all_certified", c.all_certified, failed, 0.0);
    s.rec.details["partial_sums"] = cells_json(c.partial_sums, "i");
    s.rec.details["factors"] = cells_json(c.factors, "n");
  }

  void symmetrize_stage(StageBuilder& s) {
    const Kernel& psi = art().psi->psi;
    Kernel k = symmetrize(psi);
    const MatrixXd& pv = psi.real_values();
    const MatrixXd expect = pv + pv.transpose();
    const bool exact = (k.real_values().array() == expect.array()).all();
    s.check("symmetric", k.is_symmetric(), 0.0, 0.0);
    s.check("equals_psi_plus_transpose", exact, 0.0, 0.0);

    const Kernel psi_t = psi.transpose();
    json rows = json::array();
    for (double t : p_.t_grid) {
      const SchurNormResult a = schur_norm(schoenberg_transform(psi, t), p_.schur);
      const SchurNormResult b = schur_norm(schoenberg_transform(psi_t, t), p_.schur);
      const Kernel ek = schoenberg_transform(k, t);
      const SchurNormResult c = schur_norm(ek, p_.schur);
      const NormCheck cert = check_norm_leq_one(ek, p_.schur);
      const double product = a.upper * b.upper;
      const std::string tag = "t=" + json(t).dump();
      s.check("submultiplicative_" + tag, c.lower <= product + p_.schur.tol, c.lower,
              product + p_.schur.tol);
      s.check("product_leq_one_" + tag, product <= 1.0 + 3.0 * p_.schur.tol, product,
              1.0 + 3.0 * p_.schur.tol);
      s.check("exp_k_certified_" + tag, cert.certified,
              cert.certified ? cert.cert->bound : 0.0, 1.0);
      rows.push_back({{"t", t},
                      {"norm_exp_psi", a.upper},
                      {"norm_exp_psi_transpose", b.upper},
                      {"norm_exp_k", c.upper},
                      {"norm_exp_k_lower", c.lower},
                      {"certified", cert.certified}});
    }
    s.rec.details["exponentials"] = std::move(rows);
    s.rec.details["max_k"] = k.real_values().maxCoeff();
    art().k = std::move(k);
  }

  void split(StageBuilder& s) {
    const Kernel& k = *art().k;
    const int n = p_.n_split > 0 ? p_.n_split : default_split_stage(k);
    SplitOptions opt;
    opt.tol = p_.tol;
    opt.schur = p_.schur;
    SplitPair pair = split_embed(k, n, opt);
    const MatrixXd& kv = k.real_values();
    const double scale = 1.0 + max_abs(kv);
    const double deviation = max_abs(split_reconstruction(pair) - kv);
    s.check("stage_identity", pair.stage_error <= p_.tol * scale, pair.stage_error,
            p_.tol * scale);
    s.check("approximation_bound",
            deviation <= pair.approx_error_bound + pair.stage_error + p_.tol, deviation,
            pair.approx_error_bound + pair.stage_error + p_.tol);
    s.rec.details["n"] = n;
    s.rec.details["approx_error_bound"] = pair.approx_error_bound;
    s.rec.details["stage_error"] = pair.stage_error;
    s.rec.details["max_S_row_norm"] = pair.max_s_row_norm;
    s.rec.details["normalization_perturbation"] = pair.normalization_perturbation;
    s.rec.details["deviation_from_k"] = deviation;
    art().split = std::move(pair);
  }

  void cnd(StageBuilder& s) {
    const SplitPair& pair = *art().split;
    const MatrixXd& kv = art().k->real_values();
    DropResult d = drop_s_part(pair, kv);
    const MatrixXd& hv = d.h.real_values();
    corridor_h_ = d.s_bound + pair.stage_error + pair.approx_error_bound + p_.tol;
    const double dev = max_abs(hv - kv);
    const CndResult cr = is_cnd(d.h, p_.tol);
    s.check("h_cnd", cr.cnd, cr.min_eigenvalue, -p_.tol);
    s.check("h_within_corridor_of_k", dev <= corridor_h_, dev, corridor_h_);

    // {h <= R} lies in {k <= R + c} in {psi <= R + c}, inside the witness tube.
    json rows = json::array();
    for (double R : p_.properness_levels) {
      const int width_h = properness_profile(d.h, {R}).front().width;
      json row = {{"level", R}, {"h_width", width_h}, {"shifted_level", R + corridor_h_}};
      try {
        const PropernessWitness w =
            verify_properness_argument(art().psi->psi, *art().family, R + corridor_h_);
        row["witness_width"] = w.width;
        s.check("properness_R=" + json(R).dump(), width_h <= w.width, width_h, w.width);
      } catch (const InvalidArgument&) {
        row["witness_width"] = nullptr;
        s.check("properness_R=" + json(R).dump(), false, width_h, 0.0, true);
      }
      rows.push_back(std::move(row));
    }
    s.rec.details["properness"] = std::move(rows);
    s.rec.details["s_bound"] = d.s_bound;
    s.rec.details["max_deviation_from_stage_kernel"] = d.max_deviation;
    s.rec.details["corridor"] = corridor_h_;
    s.rec.details["deviation_from_k"] = dev;
    s.rec.details["min_centered_eigenvalue"] = cr.min_eigenvalue;
    art().h = std::move(d.h);
  }

  void embed(StageBuilder& s) {
    const Kernel& h = *art().h;
    Embedding u = gns_embed(h, GnsOptions{p_.tol, false});
    const double err = reconstruction_error(u, h.real_values());
    const double thr = 1e-8 * (1.0 + max_abs(h.real_values()));
    s.check("reconstruction", err <= thr, err, thr);
    s.rec.details["dimension"] = u.dimension();
    s.rec.details["reconstruction_error"] = err;
    u.provenance = Provenance::kGNS;
    art().embedding = std::move(u);
  }

  void profile(StageBuilder& s) {
    CompressionProfile prof = compression_profile(*art().embedding);
    s.rec.details["profile"] = profile_json(prof);
    const double corridor = std::sqrt(corridor_h_);
    s.rec.details["corridor"] = corridor;
    const Kernel& k = *art().k;
    const CndResult kc = is_cnd(k, p_.tol);
    if (!kc.cnd) {
      s.check("direct_profile_available", false, kc.min_eigenvalue, -p_.tol, true);
    } else {
      const Embedding direct = gns_embed(k, GnsOptions{p_.tol, false});
      CompressionProfile dp = compression_profile(direct);
      double gap = 0.0;
      for (std::size_t r = 0; r < prof.rows.size() && r < dp.rows.size(); ++r) {
        gap = std::max({gap, std::abs(prof.rows[r].rho_plus - dp.rows[r].rho_plus),
                        std::abs(prof.rows[r].rho_minus - dp.rows[r].rho_minus)});
      }
      s.check("within_corridor_of_direct", gap <= corridor, gap, corridor);
      s.rec.details["direct_profile"] = profile_json(dp);
      s.rec.details["max_profile_gap"] = gap;
      art().direct_profile = std::move(dp);
    }
    const bool grows = prof.rows.back().rho_minus > 0.0 || prof.rows.size() == 1;
    s.check("rho_minus_positive_at_diameter", grows, prof.rows.back().rho_minus, 0.0,
            true);
    art().profile = std::move(prof);
  }
};

json schedule_json(const ScheduleParams& s) {
  return {{"alpha", s.alpha_name()}, {"epsilon", s.epsilon_name()}, {"N", s.N}};
}

void fill_meta(PipelineReport& rep, const ChainParams& p, const BallPtr& ball) {
  rep.meta["schedule"] = schedule_json(p.schedule);
  rep.meta["t_grid"] = p.t_grid;
  rep.meta["properness_levels"] = p.properness_levels;
  rep.meta["n_split"] = p.n_split;
  rep.meta["tol"] = p.tol;
  rep.meta["schur_tol"] = p.schur.tol;
  rep.meta["seed"] = p.schur.seed;
  if (ball) {
    rep.meta["group"] = ball->spec.name();
    rep.meta["radius"] = ball->radius;
    rep.meta["ball_size"] = ball->size();
    rep.meta["ball_hash"] = ball_hash(*ball);
  }
}

}  // namespace

PipelineReport run_chain(const MultiplierFamily& family, const ChainParams& params) {
  PipelineReport rep;
  fill_meta(rep, params, family.ball());
  rep.meta["entry"] = "family";
  Chain(params, rep).run(family);
  return rep;
}

PipelineReport run_chain(const Kernel& input, const ChainParams& params) {
  PipelineReport rep;
  fill_meta(rep, params, input.ball());
  rep.meta["entry"] = "kernel";
  try {
    if (input.is_real()) {
      const CndResult c = is_cnd(input, params.tol);
      rep.meta["input_cnd"] = c.cnd;
    }
    const MultiplierFamily family =
        MultiplierFamily::exponential(input, params.family_size);
    Chain(params, rep).run(family);
  } catch (const Error& e) {
    StageRecord rec;
    rec.name = "input";
    rec.status = Verdict::kFail;
    rec.error = e.what();
    rep.stages.push_back(std::move(rec));
    rep.overall = Verdict::kFail;
    rep.reasons.push_back(std::string("input: ") + e.what());
  }
  return rep;
}

}  // namespace coarse
