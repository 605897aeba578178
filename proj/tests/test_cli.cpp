#include <doctest.h>

#include <filesystem>
#include <string>
#include <vector>

#include "coarse/cli.hpp"
#include "coarse/errors.hpp"
#include "coarse/io.hpp"

using namespace coarse;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "coarse_test_cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "coarse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::main(static_cast<int>(argv.size()), argv.data());
}

cli::RunConfig parse(std::vector<std::string> args) {
  args.insert(args.begin(), "coarse");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::parse_config(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("ball subcommand writes the ball and word metric") {
  const fs::path dir = scratch("ball");
  CHECK(run({"ball", "--family", "free", "--k", "2", "--radius", "2", "--out", dir.string()}) == 0);
  CHECK(fs::exists(dir / "ball.csv"));
  const auto j = nlohmann::json::parse(io::read_text(dir / "ball.json"));
  CHECK(j.at("size") == 17);
  const Kernel k = io::read_kernel(dir / "word_metric.csv", build_ball(GroupSpec::free(2), 2));
  CHECK(k.real_values().maxCoeff() == 4.0);
}

TEST_CASE("config file resolves and flags override it") {
  const fs::path dir = scratch("config");
  const nlohmann::json file = {{"group", {{"family", "free"}, {"k", 2}}},
                               {"radius", 2},
                               {"schedule", {{"alpha", "n"}, {"epsilon", "4^-n"}, {"N", 12}}},
                               {"tolerances", {{"tol", 1e-7}}}};
  io::write_text(dir / "run.json", file.dump());
  const cli::RunConfig c = parse({"pipeline", "--config", (dir / "run.json").string()});
  CHECK(c.subcommand == "pipeline");
  CHECK(c.group.family == Family::kFreeGroup);
  CHECK(c.group.rank == 2);
  CHECK(c.radius == 2);
  CHECK(c.schedule.N == 12);
  CHECK(c.schedule.epsilon == ScheduleParams::Epsilon::kPow4);
  CHECK(c.tol == 1e-7);

  const cli::RunConfig o =
      parse({"pipeline", "--config", (dir / "run.json").string(), "--radius", "3", "--N", "20"});
  CHECK(o.radius == 3);
  CHECK(o.schedule.N == 20);
  CHECK(o.group.family == Family::kFreeGroup);

  // The dumped config reads back to the same config.
  io::write_text(dir / "dump.json", cli::config_to_json(o).dump());
  const cli::RunConfig d = parse({"pipeline", "--config", (dir / "dump.json").string()});
  CHECK(cli::config_to_json(d) == cli::config_to_json(o));
  CHECK(run({"pipeline", "--config", (dir / "run.json").string(), "--dump-config"}) == 0);
}

TEST_CASE("usage errors") {
  const fs::path dir = scratch("usage");
  io::write_text(dir / "bad.json", R"({"radius": 2, "colour": "red"})");
  CHECK(run({"ball", "--config", (dir / "bad.json").string()}) == cli::kUsage);
  CHECK(run({"ball", "--radius", "x"}) == cli::kUsage);
  CHECK(run({"frobnicate"}) == cli::kUsage);
  CHECK(run({"pipeline", "--tol", "-1"}) == cli::kUsage);
  CHECK(run({"pipeline", "--alpha", "2^n", "--epsilon", "n^-3", "--out", dir.string()}) ==
        cli::kUsage);
  CHECK_THROWS_AS(parse({"ball", "--config", (dir / "bad.json").string()}), UsageError);
}

TEST_CASE("io errors") {
  CHECK(run({"norm", "--kernel", "missing.csv"}) == cli::kIo);
}

TEST_CASE("norm and embed subcommands") {
  const fs::path dir = scratch("norm");
  CHECK(run({"ball", "--family", "lattice", "--d", "1", "--radius", "3", "--out", dir.string()}) ==
        0);
  CHECK(run({"norm", "--kernel", (dir / "word_metric.csv").string(), "--out", dir.string()}) == 0);
  CHECK(run({"embed", "--family", "lattice", "--d", "1", "--radius", "3", "--out",
             dir.string()}) == 0);
  CHECK(fs::exists(dir / "embedding.csv"));
}

TEST_CASE("pipeline exit codes") {
  const fs::path ok = scratch("pipeline_ok");
  CHECK(run({"pipeline", "--family", "lattice", "--d", "1", "--radius", "2", "--out",
             ok.string()}) == 0);
  const auto rep = nlohmann::json::parse(io::read_text(ok / "report.json"));
  CHECK(rep.at("overall") == "PASS");
  CHECK(fs::exists(ok / "h.csv"));

  // Level 4 needs alpha_n >= 8, beyond N = 2.
  const fs::path bad = scratch("pipeline_fail");
  CHECK(run({"pipeline", "--family", "lattice", "--d", "1", "--radius", "2", "--N", "2", "--out",
             bad.string()}) == cli::kVerificationFail);
  const std::string text = io::read_text(bad / "report.txt");
  CHECK(text.find("FAIL properness") != std::string::npos);
}
