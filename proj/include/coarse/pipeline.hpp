#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "coarse/embed.hpp"
#include "coarse/kernel.hpp"
#include "coarse/schur.hpp"

namespace coarse {

/// Weights alpha_n (increasing, unbounded), accuracies eps_n (decreasing to
/// zero, with sum alpha_n eps_n finite), truncation N and tube widths
/// r_n = min(n, diameter) standing for the exhaustion K_n.
struct ScheduleParams {
  enum class Alpha { kLinear, kPow2 };         // n, 2^n
  enum class Epsilon { kInverseCube, kPow4 };  // n^-3, 4^-n

  Alpha alpha = Alpha::kLinear;
  Epsilon epsilon = Epsilon::kInverseCube;
  int N = 16;

  double alpha_at(int n) const;
  double epsilon_at(int n) const;
  int width_at(int n, int diameter) const;
  /// sum_{n > N} alpha_n eps_n in closed form.
  double tail_bound() const;
  /// Throws InvalidArgument for N < 1 or a divergent sum alpha_n eps_n.
  void validate() const;

  static Alpha parse_alpha(const std::string& s);
  static Epsilon parse_epsilon(const std::string& s);
  std::string alpha_name() const;
  std::string epsilon_name() const;
};

/// A sequence phi_1, phi_2, ... of kernels over one ball.
class MultiplierFamily {
 public:
  enum class Kind { kExponentialOfKernel, kGaussianOfMetric, kCustom };

  /// phi_m = exp(-base / m).
  static MultiplierFamily exponential(Kernel base, int size = 1 << 24);
  /// phi_m = exp(-dist^2 / m).
  static MultiplierFamily gaussian(BallPtr ball, int size = 1 << 24);
  static MultiplierFamily custom(std::vector<Kernel> members);

  Kind kind() const { return kind_; }
  int size() const { return size_; }
  const BallPtr& ball() const { return ball_; }
  /// 1-based.
  Kernel member(int index) const;
  /// sup over Tube(r) of |phi_m - 1| decreases in m.
  bool monotone_on_tubes() const { return kind_ != Kind::kCustom; }

 private:
  Kind kind_ = Kind::kCustom;
  int size_ = 0;
  BallPtr ball_;
  Kernel base_;
  std::vector<Kernel> members_;
};

std::string to_string(MultiplierFamily::Kind kind);

struct NormalizedMember {
  int n = 0;
  int index = 0;  // selected member of the input family
  int width = 0;  // r_n
  double epsilon = 0.0;
  double deviation_before = 0.0;  // sup over Tube(r_n) of |phi - 1|
  double deviation_after = 0.0;   // same, after squaring
  double cert_bound = 0.0;
  Kernel phi;  // |phi_index|^2
};

struct NormalizedFamily {
  ScheduleParams schedule;
  std::vector<NormalizedMember> members;  // n = 1 .. N
  BallPtr ball;
};

/// Picks, for each n <= N, the first member within eps_n / 2 of 1 on
/// Tube(r_n), certifies it contractive and replaces it by |phi|^2.
/// Throws ScheduleInfeasible naming the first n without a valid member and
/// CertificateUnavailable for a selected member of Schur norm above 1.
NormalizedFamily normalize_family(const MultiplierFamily& family,
                                  const ScheduleParams& schedule,
                                  const SchurOptions& options = {});

struct TubeBoundRow {
  int n = 0;
  int width = 0;
  double sup_on_tube = 0.0;
  double bound = 0.0;
  bool holds = false;
};

struct PsiResult {
  Kernel psi;
  std::vector<Kernel> partial_sums;  // psi_1 .. psi_N
  /// sum_{n > N} alpha_n eps_n, valid on Tube(r_N). Off that tube the
  /// truncated psi only bounds the full series from below.
  double tail_bound = 0.0;
  std::vector<TubeBoundRow> tube_bounds;
};

/// psi = sum_{n <= N} alpha_n (1 - phi_n).
PsiResult build_psi(const NormalizedFamily& family);

struct PropernessWitness {
  double level = 0.0;
  int n = 0;
  double alpha_n = 0.0;
  int width = 0;                // tube off which phi_n < 1/2
  std::size_t sublevel_pairs = 0;  // |{psi <= R}|
  std::size_t middle_pairs = 0;    // |{1 - phi_n <= 1/2}|
  int max_sublevel_dist = 0;
  int max_middle_dist = 0;
};

/// Exhaustively checks {psi <= R} in {1 - phi_n <= 1/2} in Tube(r) for the
/// first n with alpha_n >= 2R. Throws ArgumentFails if an inclusion breaks.
PropernessWitness verify_properness_argument(const Kernel& psi,
                                             const NormalizedFamily& family,
                                             double level);

struct ContractivityCell {
  double t = 0.0;
  int index = 0;  // partial sum i, or factor n
  bool certified = false;
  double bound = 0.0;  // certificate bound, or refutation lower bound
  std::string error;
};

struct ContractivityReport {
  std::vector<ContractivityCell> partial_sums;
  std::vector<ContractivityCell> factors;
  bool all_certified = true;
};

/// check_norm_leq_one on exp(-t psi_i) for i <= max_partial and on every
/// factor exp(-t alpha_n (1 - phi_n)).
ContractivityReport verify_contractive_exponentials(
    const PsiResult& psi, const NormalizedFamily& family,
    const std::vector<double>& t_grid, int max_partial,
    const SchurOptions& options = {});

struct ChainParams {
  ScheduleParams schedule;
  std::vector<double> t_grid{0.1, 0.5, 1.0, 2.0, 10.0};
  std::vector<double> properness_levels{0.5, 1.0, 2.0, 4.0};
  /// Partial sums checked for contractivity; 0 means all N.
  int max_partial = 0;
  /// Split stage; 0 means ceil(10 max k).
  int n_split = 0;
  double tol = 1e-6;
  SchurOptions schur;
  int family_size = 1 << 24;
};

struct CheckRecord {
  std::string name;
  bool passed = false;
  double value = 0.0;
  double threshold = 0.0;
};

struct StageRecord {
  std::string name;
  Verdict status = Verdict::kPass;
  std::vector<CheckRecord> checks;
  nlohmann::json details = nlohmann::json::object();
  std::string error;
};

struct ChainArtifacts {
  std::optional<NormalizedFamily> family;
  std::optional<PsiResult> psi;
  std::optional<Kernel> k;
  std::optional<SplitPair> split;
  std::optional<Kernel> h;
  std::optional<Embedding> embedding;
  std::optional<CompressionProfile> profile;
  std::optional<CompressionProfile> direct_profile;
};

struct PipelineReport {
  std::vector<StageRecord> stages;
  Verdict overall = Verdict::kPass;
  std::vector<std::string> reasons;
  nlohmann::json meta = nlohmann::json::object();
  ChainArtifacts artifacts;
};

/// Kernel entry: phi_n = exp(-k/n), then the family chain.
PipelineReport run_chain(const Kernel& input, const ChainParams& params);
/// Family entry.
PipelineReport run_chain(const MultiplierFamily& family,
                         const ChainParams& params);

}  // namespace coarse
