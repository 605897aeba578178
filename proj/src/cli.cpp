#include "coarse/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <set>

#include <CLI11.hpp>

#include "coarse/embed.hpp"
#include "coarse/errors.hpp"
#include "coarse/io.hpp"
#include "coarse/kernel.hpp"
#include "coarse/schur.hpp"

namespace coarse::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const std::set<std::string> kSubcommands{"ball",     "norm",    "check",
                                          "embed",    "pipeline", "profile"};

const std::map<std::string, std::string> kDescriptions{
    {"ball", "enumerate a ball and write its word metric"},
    {"norm", "Schur multiplier norm of a kernel with a certificate"},
    {"check", "psd, cnd, decay and properness checks on a kernel"},
    {"embed", "GNS or split embedding of a kernel"},
    {"pipeline", "run the full verification chain"},
    {"profile", "compression profiles and the coarse check across radii"},
};

json group_json(const GroupSpec& g) {
  switch (g.family) {
    case Family::kIntegerLattice:
      return {{"family", "lattice"}, {"d", g.rank}};
    case Family::kFreeGroup:
      return {{"family", "free"}, {"k", g.rank}};
    case Family::kHeisenberg3:
      return {{"family", "heisenberg"}};
  }
  return {};
}

GroupSpec make_group(const std::string& family, int rank) {
  if (family == "lattice" || family == "Z") return GroupSpec::lattice(rank);
  if (family == "free" || family == "F") return GroupSpec::free(rank);
  if (family == "heisenberg" || family == "H3") return GroupSpec::heisenberg();
  throw UsageError("unknown group family '" + family + "'");
}

GroupSpec group_from_json(const json& j) {
  if (!j.is_object()) throw UsageError("group must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "family" && it.key() != "d" && it.key() != "k") {
      throw UsageError("unknown key 'group." + it.key() + "'");
    }
  }
  const std::string fam = j.value("family", std::string("lattice"));
  int rank = 1;
  if (j.contains("d")) rank = j["d"].get<int>();
  if (j.contains("k")) rank = j["k"].get<int>();
  return make_group(fam, rank);
}

template <class T>
T get(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw UsageError("config key '" + key + "' has the wrong type");
  }
}

BallPtr ball_for(const RunConfig& c, int radius) {
  return build_ball(c.group, radius);
}

Kernel load_or_metric(const RunConfig& c, const BallPtr& ball) {
  if (!c.kernel.empty()) return io::read_kernel(c.kernel, ball);
  return Kernel::from_distance(ball, [](int d) { return double(d); });
}

SchurOptions schur_options(const RunConfig& c) {
  SchurOptions o;
  o.tol = c.schur_tol;
  o.inner_tol = c.inner_tol;
  o.seed = c.seed;
  return o;
}

void emit(const RunConfig& c, const json& j) {
  if (c.format == "text") {
    for (auto it = j.begin(); it != j.end(); ++it) {
      std::cout << it.key() << ": " << io::render_json(it.value()) << "\n";
    }
  } else {
    std::cout << io::render_json(j) << "\n";
  }
}

int run_ball(const RunConfig& c) {
  const BallPtr ball = ball_for(c, c.radius);
  const fs::path out = c.out;
  io::write_text(out / "ball.csv", ball_to_csv(*ball));
  io::write_kernel(out / "word_metric.csv",
                   Kernel::from_distance(ball, [](int d) { return double(d); }));
  const json j = {{"group", c.group.name()},
                  {"radius", ball->radius},
                  {"size", ball->size()},
                  {"diameter", ball->diameter()},
                  {"ball_hash", ball_hash(*ball)}};
  io::write_text(out / "ball.json", io::render_json(j) + "\n");
  emit(c, j);
  return kOk;
}

int run_norm(const RunConfig& c) {
  BallPtr ball;
  Kernel phi;
  if (c.kernel.empty()) {
    throw UsageError("norm needs --kernel");
  }
  phi = io::read_kernel(c.kernel);
  const SchurNormResult r = schur_norm(phi, schur_options(c));
  const fs::path out = c.out;
  io::write_certificate(out, "certificate", r.cert);
  const CertificateCheck v = verify_certificate(r.cert, phi.values(), 1e-6);
  const json j = {{"estimate", r.estimate},
                  {"lower", r.lower},
                  {"upper", r.upper},
                  {"queries", r.queries},
                  {"projection_steps", r.projection_steps},
                  {"newton_steps", r.newton_steps},
                  {"certificate_valid", v.valid},
                  {"certificate_residual", v.residual}};
  io::write_text(out / "norm.json", io::render_json(j) + "\n");
  emit(c, j);
  return v.valid ? kOk : kVerificationFail;
}

int run_check(const RunConfig& c) {
  const BallPtr ball = ball_for(c, c.radius);
  const Kernel k = load_or_metric(c, ball);
  json j = json::object();
  bool ok = true;
  for (const auto& what : c.checks) {
    if (what == "psd") {
      const PsdResult p = is_psd(k, c.tol);
      j["psd"] = {{"psd", p.psd}, {"min_eigenvalue", p.min_eigenvalue}};
      ok = ok && p.psd;
    } else if (what == "cnd") {
      const CndResult r = is_cnd(k, c.tol);
      j["cnd"] = {{"cnd", r.cnd},
                  {"min_eigenvalue", r.min_eigenvalue},
                  {"failed_clause", r.failed_clause}};
      ok = ok && r.cnd;
    } else if (what == "decay") {
      json rows = json::array();
      for (const auto& row : decay_profile(k).rows) {
        rows.push_back({{"r", row.r},
                        {"sup_off", row.sup_off},
                        {"sup_on", row.sup_on},
                        {"off_empty", row.off_empty}});
      }
      j["decay"] = std::move(rows);
    } else if (what == "properness") {
      json rows = json::array();
      try {
        for (const auto& row : properness_profile(k, c.levels)) {
          rows.push_back({{"level", row.level}, {"width", row.width}});
        }
        j["properness"] = std::move(rows);
      } catch (const NegativeEntries& e) {
        j["properness"] = {{"error", e.what()}};
        ok = false;
      }
    } else {
      throw UsageError("unknown check '" + what + "'");
    }
  }
  io::write_text(fs::path(c.out) / "check.json", io::render_json(j) + "\n");
  emit(c, j);
  return (c.strict && !ok) ? kVerificationFail : kOk;
}

int run_embed(const RunConfig& c) {
  const BallPtr ball = ball_for(c, c.radius);
  const Kernel k = load_or_metric(c, ball);
  const fs::path out = c.out;
  json j;
  Embedding u;
  if (c.method == "gns") {
    u = gns_embed(k);
    j = {{"method", "gns"},
         {"dimension", u.dimension()},
         {"reconstruction_error", reconstruction_error(u, k.real_values())}};
  } else if (c.method == "split") {
    const int n = c.n > 0 ? c.n : default_split_stage(k);
    SplitOptions opt;
    opt.tol = c.tol;
    opt.schur = schur_options(c);
    const SplitPair pair = split_embed(k, n, opt);
    io::write_split(out, "split", pair);
    const DropResult d = drop_s_part(pair, k.real_values());
    io::write_kernel(out / "h.csv", d.h);
    u.coords = pair.R;
    u.ball = ball;
    u.provenance = Provenance::kSplit;
    j = {{"method", "split"},
         {"n", n},
         {"stage_error", pair.stage_error},
         {"approx_error_bound", pair.approx_error_bound},
         {"max_S_row_norm", pair.max_s_row_norm},
         {"s_bound", d.s_bound},
         {"h_cnd", d.cnd.cnd}};
  } else {
    throw UsageError("unknown embed method '" + c.method + "'");
  }
  io::write_embedding(out / "embedding.csv", u);
  io::write_text(out / "embed.json", io::render_json(j) + "\n");
  emit(c, j);
  return kOk;
}

int run_pipeline(const RunConfig& c) {
  const BallPtr ball = ball_for(c, c.radius);
  ChainParams p;
  p.schedule = c.schedule;
  p.t_grid = c.t_grid;
  p.properness_levels = c.levels;
  p.n_split = c.n_split;
  p.max_partial = c.max_partial;
  p.tol = c.tol;
  p.schur = schur_options(c);

  PipelineReport rep;
  if (c.entry == "kernel") {
    rep = run_chain(load_or_metric(c, ball), p);
  } else if (c.family == "exponential") {
    rep = run_chain(MultiplierFamily::exponential(load_or_metric(c, ball)), p);
  } else if (c.family == "gaussian") {
    rep = run_chain(MultiplierFamily::gaussian(ball), p);
  } else {
    throw UsageError("unknown family '" + c.family + "'");
  }

  const fs::path out = c.out;
  const auto& a = rep.artifacts;
  if (a.psi) io::write_kernel(out / "psi.csv", a.psi->psi);
  if (a.k) io::write_kernel(out / "k.csv", *a.k);
  if (a.split) io::write_split(out, "split", *a.split);
  if (a.h) io::write_kernel(out / "h.csv", *a.h);
  if (a.embedding) io::write_embedding(out / "embedding.csv", *a.embedding);
  if (a.profile) io::write_profile(out / "profile.csv", *a.profile);
  if (a.direct_profile) io::write_profile(out / "direct_profile.csv", *a.direct_profile);
  io::write_text(out / "report.json", io::render_report(rep, io::Format::kJson));
  io::write_text(out / "report.txt", io::render_report(rep, io::Format::kText));
  std::cout << io::render_report(rep, c.format == "text" ? io::Format::kText
                                                         : io::Format::kJson);
  return rep.overall == Verdict::kFail ? kVerificationFail : kOk;
}

int run_profile(const RunConfig& c) {
  const fs::path out = c.out;
  json j = json::object();
  if (!c.embedding.empty()) {
    const BallPtr ball = ball_for(c, c.radius);
    const CompressionProfile p = compression_profile(io::read_embedding(c.embedding, ball));
    io::write_profile(out / "profile.csv", p);
    j["radius"] = c.radius;
    j["rows"] = p.rows.size();
    emit(c, j);
    return kOk;
  }
  std::vector<int> radii = c.radii.empty() ? std::vector<int>{c.radius} : c.radii;
  std::vector<CompressionProfile> profiles;
  for (int r : radii) {
    const BallPtr ball = ball_for(c, r);
    const Kernel k = load_or_metric(c, ball);
    profiles.push_back(compression_profile(gns_embed(k)));
    io::write_profile(out / ("profile_r" + std::to_string(r) + ".csv"), profiles.back());
  }
  j["radii"] = radii;
  int code = kOk;
  if (profiles.size() >= 2) {
    const CoarseReport rep = coarse_check(profiles);
    json lower = json::array();
    for (const auto& row : rep.lower_rows) {
      lower.push_back({{"threshold", row.threshold},
                       {"width", row.width},
                       {"verdict", to_string(row.verdict)}});
    }
    j["upper"] = to_string(rep.upper);
    j["lower"] = std::move(lower);
    j["overall"] = to_string(rep.overall);
    j["max_upper_drift"] = rep.max_upper_drift;
    if (rep.overall == Verdict::kFail) code = kVerificationFail;
  }
  io::write_text(out / "profile.json", io::render_json(j) + "\n");
  emit(c, j);
  return code;
}

void check_threads_env() {
  const char* env = std::getenv("COARSE_KERNEL_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) {
    throw UsageError("COARSE_KERNEL_THREADS must be a positive integer");
  }
  Eigen::setNbThreads(static_cast<int>(n));
}

}  // namespace

void RunConfig::validate() const {
  if (!kSubcommands.count(subcommand)) throw UsageError("unknown subcommand '" + subcommand + "'");
  group.validate();
  if (radius < 0) throw UsageError("radius must be >= 0");
  if (!(tol > 0.0) || !(schur_tol > 0.0) || !(inner_tol > 0.0)) {
    throw UsageError("tolerances must be positive");
  }
  if (format != "json" && format != "text") throw UsageError("format must be json or text");
  if (entry != "kernel" && entry != "family") throw UsageError("entry must be kernel or family");
  if (n < 0 || n_split < 0 || max_partial < 0) throw UsageError("stage counts must be >= 0");
  for (double t : t_grid) {
    if (!(t > 0.0)) throw UsageError("t_grid values must be positive");
  }
  for (int r : radii) {
    if (r < 0) throw UsageError("radii must be >= 0");
  }
  try {
    schedule.validate();
  } catch (const InvalidArgument& e) {
    throw UsageError(e.what());
  }
}

json config_to_json(const RunConfig& c) {
  return {{"subcommand", c.subcommand},
          {"group", group_json(c.group)},
          {"radius", c.radius},
          {"out", c.out},
          {"kernel", c.kernel},
          {"embedding", c.embedding},
          {"checks", c.checks},
          {"levels", c.levels},
          {"strict", c.strict},
          {"method", c.method},
          {"n", c.n},
          {"entry", c.entry},
          {"family", c.family},
          {"schedule",
           {{"alpha", c.schedule.alpha_name()},
            {"epsilon", c.schedule.epsilon_name()},
            {"N", c.schedule.N}}},
          {"t_grid", c.t_grid},
          {"n_split", c.n_split},
          {"max_partial", c.max_partial},
          {"radii", c.radii},
          {"tolerances",
           {{"tol", c.tol}, {"schur_tol", c.schur_tol}, {"inner_tol", c.inner_tol}}},
          {"seed", c.seed},
          {"format", c.format}};
}

void apply_config_json(RunConfig& c, const json& j) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    if (key == "subcommand") {
      c.subcommand = get<std::string>(v, key);
    } else if (key == "group") {
      c.group = group_from_json(v);
    } else if (key == "radius") {
      c.radius = get<int>(v, key);
    } else if (key == "out") {
      c.out = get<std::string>(v, key);
    } else if (key == "kernel") {
      c.kernel = get<std::string>(v, key);
    } else if (key == "embedding") {
      c.embedding = get<std::string>(v, key);
    } else if (key == "checks") {
      c.checks = get<std::vector<std::string>>(v, key);
    } else if (key == "levels") {
      c.levels = get<std::vector<double>>(v, key);
    } else if (key == "strict") {
      c.strict = get<bool>(v, key);
    } else if (key == "method") {
      c.method = get<std::string>(v, key);
    } else if (key == "n") {
      c.n = get<int>(v, key);
    } else if (key == "entry") {
      c.entry = get<std::string>(v, key);
    } else if (key == "family") {
      c.family = get<std::string>(v, key);
    } else if (key == "schedule") {
      if (!v.is_object()) throw UsageError("schedule must be an object");
      for (auto s = v.begin(); s != v.end(); ++s) {
        try {
          if (s.key() == "alpha") {
            c.schedule.alpha = ScheduleParams::parse_alpha(get<std::string>(s.value(), "alpha"));
          } else if (s.key() == "epsilon") {
            c.schedule.epsilon =
                ScheduleParams::parse_epsilon(get<std::string>(s.value(), "epsilon"));
          } else if (s.key() == "N") {
            c.schedule.N = get<int>(s.value(), "N");
          } else {
            throw UsageError("unknown key 'schedule." + s.key() + "'");
          }
        } catch (const InvalidArgument& e) {
          throw UsageError(e.what());
        }
      }
    } else if (key == "t_grid") {
      c.t_grid = get<std::vector<double>>(v, key);
    } else if (key == "n_split") {
      c.n_split = get<int>(v, key);
    } else if (key == "max_partial") {
      c.max_partial = get<int>(v, key);
    } else if (key == "radii") {
      c.radii = get<std::vector<int>>(v, key);
    } else if (key == "tolerances") {
      if (!v.is_object()) throw UsageError("tolerances must be an object");
      for (auto s = v.begin(); s != v.end(); ++s) {
        if (s.key() == "tol") {
          c.tol = get<double>(s.value(), "tol");
        } else if (s.key() == "schur_tol") {
          c.schur_tol = get<double>(s.value(), "schur_tol");
        } else if (s.key() == "inner_tol") {
          c.inner_tol = get<double>(s.value(), "inner_tol");
        } else {
          throw UsageError("unknown key 'tolerances." + s.key() + "'");
        }
      }
    } else if (key == "seed") {
      c.seed = get<std::uint64_t>(v, key);
    } else if (key == "format") {
      c.format = get<std::string>(v, key);
    } else {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
}

RunConfig parse_config(int argc, const char* const* argv, bool* help_requested,
                       std::string* help_text) {
  CLI::App app{"coarse: Schur multipliers, kernels and coarse embeddings on group balls"};
  app.require_subcommand(1);

  std::string config_path;
  std::string family = "lattice";
  int d = 1, k = 2;
  RunConfig flags;
  std::string alpha, epsilon;
  int N = 0;

  struct Opts {
    CLI::Option *config, *family, *d, *k, *radius, *out, *kernel, *embedding, *checks,
        *levels, *strict, *method, *n, *entry, *fam, *alpha, *epsilon, *N, *t_grid,
        *n_split, *max_partial, *radii, *tol, *schur_tol, *inner_tol, *seed, *format,
        *dump;
  };
  std::vector<std::pair<CLI::App*, Opts>> subs;
  std::string pipeline_family = "exponential";
  for (const auto& name : kSubcommands) {
    CLI::App* sub = app.add_subcommand(name, kDescriptions.at(name));
    Opts o{};
    o.config = sub->add_option("--config", config_path, "JSON config file");
    o.family = sub->add_option("--family", family, "lattice | free | heisenberg");
    o.d = sub->add_option("--d", d, "lattice rank");
    o.k = sub->add_option("--k", k, "free group rank");
    o.radius = sub->add_option("--radius", flags.radius);
    o.out = sub->add_option("--out", flags.out, "output directory");
    o.kernel = sub->add_option("--kernel", flags.kernel, "kernel CSV");
    o.embedding = sub->add_option("--embedding", flags.embedding, "embedding CSV");
    o.checks = sub->add_option("--checks", flags.checks)->delimiter(',');
    o.levels = sub->add_option("--levels", flags.levels)->delimiter(',');
    o.strict = sub->add_flag("--strict", flags.strict, "exit 4 when a check fails");
    o.method = sub->add_option("--method", flags.method, "gns | split");
    o.n = sub->add_option("--n", flags.n, "split stage");
    o.entry = sub->add_option("--entry", flags.entry, "kernel | family");
    o.fam = sub->add_option("--multipliers", pipeline_family, "exponential | gaussian");
    o.alpha = sub->add_option("--alpha", alpha, "n | 2^n");
    o.epsilon = sub->add_option("--epsilon", epsilon, "n^-3 | 4^-n");
    o.N = sub->add_option("--N", N, "truncation");
    o.t_grid = sub->add_option("--t-grid", flags.t_grid)->delimiter(',');
    o.n_split = sub->add_option("--n-split", flags.n_split);
    o.max_partial = sub->add_option("--max-partial", flags.max_partial);
    o.radii = sub->add_option("--radii", flags.radii)->delimiter(',');
    o.tol = sub->add_option("--tol", flags.tol);
    o.schur_tol = sub->add_option("--schur-tol", flags.schur_tol);
    o.inner_tol = sub->add_option("--inner-tol", flags.inner_tol);
    o.seed = sub->add_option("--seed", flags.seed);
    o.format = sub->add_option("--format", flags.format, "json | text");
    o.dump = sub->add_flag("--dump-config", flags.dump_config, "print the resolved config");
    subs.emplace_back(sub, o);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    if (help_requested) *help_requested = true;
    if (help_text) *help_text = app.help();
    throw UsageError("help");
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }

  RunConfig c;
  for (auto& [sub, o] : subs) {
    if (!sub->parsed()) continue;
    c.subcommand = sub->get_name();
    if (o.config->count()) {
      json j;
      try {
        j = json::parse(io::read_text(config_path));
      } catch (const json::exception& e) {
        throw UsageError(config_path + ": " + e.what());
      }
      apply_config_json(c, j);
      c.subcommand = sub->get_name();
    }
    if (o.family->count() || o.d->count() || o.k->count()) {
      const bool free_group = family == "free" || family == "F";
      int rank = free_group ? k : d;
      if (!o.family->count()) {
        // rank override only
        family = c.group.family == Family::kFreeGroup ? "free"
                 : c.group.family == Family::kHeisenberg3 ? "heisenberg"
                                                          : "lattice";
        rank = c.group.family == Family::kFreeGroup ? (o.k->count() ? k : c.group.rank)
                                                    : (o.d->count() ? d : c.group.rank);
      }
      c.group = make_group(family, rank);
    }
    if (o.radius->count()) c.radius = flags.radius;
    if (o.out->count()) c.out = flags.out;
    if (o.kernel->count()) c.kernel = flags.kernel;
    if (o.embedding->count()) c.embedding = flags.embedding;
    if (o.checks->count()) c.checks = flags.checks;
    if (o.levels->count()) c.levels = flags.levels;
    if (o.strict->count()) c.strict = flags.strict;
    if (o.method->count()) c.method = flags.method;
    if (o.n->count()) c.n = flags.n;
    if (o.entry->count()) c.entry = flags.entry;
    if (o.fam->count()) c.family = pipeline_family;
    try {
      if (o.alpha->count()) c.schedule.alpha = ScheduleParams::parse_alpha(alpha);
      if (o.epsilon->count()) c.schedule.epsilon = ScheduleParams::parse_epsilon(epsilon);
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    if (o.N->count()) c.schedule.N = N;
    if (o.t_grid->count()) c.t_grid = flags.t_grid;
    if (o.n_split->count()) c.n_split = flags.n_split;
    if (o.max_partial->count()) c.max_partial = flags.max_partial;
    if (o.radii->count()) c.radii = flags.radii;
    if (o.tol->count()) c.tol = flags.tol;
    if (o.schur_tol->count()) c.schur_tol = flags.schur_tol;
    if (o.inner_tol->count()) c.inner_tol = flags.inner_tol;
    if (o.seed->count()) c.seed = flags.seed;
    if (o.format->count()) c.format = flags.format;
    c.dump_config = flags.dump_config;
  }
  try {
    c.validate();
  } catch (const InvalidSpec& e) {
    throw UsageError(e.what());
  }
  return c;
}

int execute(const RunConfig& c) {
  if (c.dump_config) {
    std::cout << io::render_json(config_to_json(c)) << "\n";
    return kOk;
  }
  check_threads_env();
  if (c.subcommand == "ball") return run_ball(c);
  if (c.subcommand == "norm") return run_norm(c);
  if (c.subcommand == "check") return run_check(c);
  if (c.subcommand == "embed") return run_embed(c);
  if (c.subcommand == "pipeline") return run_pipeline(c);
  return run_profile(c);
}

int main(int argc, const char* const* argv) {
  bool help = false;
  std::string help_text;
  try {
    const RunConfig c = parse_config(argc, argv, &help, &help_text);
    return execute(c);
  } catch (const UsageError& e) {
    if (help) {
      std::cout << help_text;
      return kOk;
    }
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const CapExceeded& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kIo;
  } catch (const NoConvergence& e) {
    std::cerr << "no convergence: " << e.what() << " [" << e.lower() << ", " << e.upper()
              << "]\n";
    return kNoConvergence;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kVerificationFail;
  }
}

}  // namespace coarse::cli
