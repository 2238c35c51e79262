#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qstab/cli.hpp"
#include "qstab/errors.hpp"

using namespace qstab;
namespace fs = std::filesystem;

namespace {

// Fresh scratch directory per test case, removed on scope exit.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("qstab_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string str() const { return path.string(); }
};

int run(std::vector<std::string> args) {
  std::vector<char*> argv;
  args.insert(args.begin(), "qstab");
  argv.reserve(args.size());
  for (auto& a : args) argv.push_back(a.data());
  return cli::run_cli(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

double parse_field(const std::string& field) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto res = std::from_chars(begin, end, value);
  REQUIRE(res.ec == std::errc());
  REQUIRE(res.ptr == end);
  return value;
}

// Strict CSV shape check: header must match, every row must have exactly
// the given arity of fully numeric fields.
std::vector<std::vector<double>> read_csv(const fs::path& p,
                                          const std::string& header) {
  std::istringstream in(slurp(p));
  std::string line;
  REQUIRE(std::getline(in, line));
  REQUIRE(line == header);
  std::vector<std::vector<double>> rows;
  const std::size_t arity = 1 + std::count(header.begin(), header.end(), ',');
  while (std::getline(in, line)) {
    REQUIRE(!line.empty());
    std::vector<double> row;
    std::istringstream ls(line);
    std::string field;
    while (std::getline(ls, field, ',')) row.push_back(parse_field(field));
    REQUIRE(row.size() == arity);
    rows.push_back(std::move(row));
  }
  return rows;
}

const char* kMatrixConfig = R"({
  "plant": {
    "M1": [[0]],
    "M2": [[0]],
    "N1": [[[1.4142135623730951, 0]]],
    "N2": [[0]],
    "E1": [[0]],
    "E2": [[1]]
  },
  "bounds": {"gamma": 0.1}
})";

}  // namespace

TEST_CASE("init emits a config that round-trips to the kerr plant") {
  TempDir tmp("init");
  const std::string cfg_path = (tmp.path / "config.json").string();
  CHECK(run({"init", "--config", cfg_path}) == 0);
  REQUIRE(fs::exists(cfg_path));

  const auto cfg = cli::load_config(cfg_path);
  REQUIRE(cfg.kappa.has_value());
  CHECK(*cfg.kappa == doctest::Approx(2.0));
  const auto reference = model::kerr_plant(2.0);
  CHECK(numerics::max_abs(cfg.plant.N1 - reference.N1) < 1e-15);
  CHECK(numerics::max_abs(cfg.plant.E2 - reference.E2) < 1e-15);
  CHECK(cfg.bounds.gamma == doctest::Approx(0.1));
  CHECK(cfg.output_dir == "out");
}

TEST_CASE("matrix-form plant parses to the same realization as the shorthand") {
  const auto matrix_cfg = cli::parse_config_text(kMatrixConfig);
  CHECK_FALSE(matrix_cfg.kappa.has_value());
  const auto shorthand =
      cli::parse_config_text(R"({"plant": {"kappa": 2.0}})");
  REQUIRE(shorthand.kappa.has_value());

  const auto ss_a = model::build_realization(matrix_cfg.plant);
  const auto ss_b = model::build_realization(shorthand.plant);
  CHECK(numerics::max_abs(ss_a.F - ss_b.F) < 1e-15);
  CHECK(numerics::max_abs(ss_a.B - ss_b.B) < 1e-15);
  CHECK(numerics::max_abs(ss_a.C - ss_b.C) < 1e-15);
}

TEST_CASE("config errors carry the offending field path") {
  try {
    cli::parse_config_text(R"({"plant": {"M1": [[0]], "M2": [[0]],
      "N1": [[0]], "N2": [[0]], "E1": [[0]]}})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("plant.E2") != std::string::npos);
  }

  try {
    cli::parse_config_text(R"({"plant": {"kappa": 2.0},
                               "bounds": {"gamma": "big"}})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bounds.gamma") != std::string::npos);
  }

  try {
    cli::parse_config_text(R"({"plant": {"M1": [[0, 1]], "M2": [[0]],
      "N1": [[0]], "N2": [[0]], "E1": [[0]], "E2": [[1]]}})");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("plant.M1") != std::string::npos);
  }

  CHECK_THROWS_AS(cli::parse_config_text("not json"), ValidationError);
  CHECK_THROWS_AS(cli::load_config("/nonexistent/qstab.json"),
                  ValidationError);
}

TEST_CASE("complex entries accept scalar and pair forms") {
  const auto cfg = cli::parse_config_text(R"({
    "plant": {"M1": [[0]], "M2": [[0]], "N1": [[1.5]],
               "N2": [[[0, -0.5]]], "E1": [[0]], "E2": [[1]]}})");
  CHECK(cfg.plant.N1(0, 0) == numerics::Complex{1.5, 0.0});
  CHECK(cfg.plant.N2(0, 0) == numerics::Complex{0.0, -0.5});
}

TEST_CASE("format_double round-trips and normalizes negative zero") {
  for (double v : {0.05, 1.0 / 3.0, 1e-17, 1.0000000000000002, -123.456,
                   4.0 / 3.0, 2e300}) {
    const std::string s = cli::format_double(v);
    CHECK(std::stod(s) == v);
  }
  CHECK(cli::format_double(-0.0) == "0");
  CHECK(cli::format_double(1.0) == "1");
}

TEST_CASE("atomic writes leave no temp files behind") {
  TempDir tmp("atomic");
  const fs::path target = tmp.path / "x.txt";
  cli::write_text_atomic(target, "payload");
  CHECK(slurp(target) == "payload");
  int entries = 0;
  for (const auto& e : fs::directory_iterator(tmp.path)) {
    (void)e;
    ++entries;
  }
  CHECK(entries == 1);
}

TEST_CASE("smallgain command reports the gain and signals NotConcluded") {
  TempDir tmp("sg");
  auto cfg = cli::parse_config_text(R"({"plant": {"kappa": 2.0},
                                        "bounds": {"gamma": 0.1}})");
  cfg.output_dir = tmp.str();
  CHECK(cli::cmd_smallgain(cfg) == 2);

  const auto j = nlohmann::json::parse(slurp(tmp.path / "smallgain.json"));
  CHECK(j.at("analysis") == "smallgain");
  CHECK(j.at("hurwitz").get<bool>());
  CHECK(j.at("verdict") == "NotConcluded");
  CHECK(std::abs(j.at("hinf").get<double>() - 2.0) < 1e-5);
  CHECK(j.at("gamma").get<double>() == doctest::Approx(0.1));

  // A heavily damped cavity passes.
  auto fast = cli::parse_config_text(R"({"plant": {"kappa": 100.0},
                                         "bounds": {"gamma": 0.1}})");
  fast.output_dir = tmp.str();
  CHECK(cli::cmd_smallgain(fast) == 0);
}

TEST_CASE("popov command emits the plot and the verdict") {
  TempDir tmp("pv");
  auto cfg = cli::parse_config_text(R"({"plant": {"kappa": 2.0},
                                        "bounds": {"gamma": 0.1}})");
  cfg.output_dir = tmp.str();
  CHECK(cli::cmd_popov(cfg, {}) == 0);

  const auto j = nlohmann::json::parse(slurp(tmp.path / "popov.json"));
  CHECK(j.at("verdict") == "RobustlyMeanSquareStable");
  CHECK(std::abs(j.at("theta").get<double>() - 1.0) < 1e-6);
  CHECK(std::abs(j.at("margin").get<double>() - 0.05) < 1e-9);

  const auto rows =
      read_csv(tmp.path / "popov_plot.csv", "omega,re_G,omega_im_G");
  const popov::FrequencyGrid grid;
  CHECK(static_cast<int>(rows.size()) == 2 * grid.points_per_sign + 5);
  double prev = -1e300;
  for (const auto& row : rows) {
    CHECK(row[0] > prev);
    prev = row[0];
    CHECK(std::abs(row[2] - row[1]) < 1e-9);
  }
}

TEST_CASE("popov outputs are byte-identical across reruns") {
  TempDir a("det_a");
  TempDir b("det_b");
  auto cfg = cli::parse_config_text(R"({"plant": {"kappa": 2.0},
                                        "bounds": {"gamma": 0.1}})");
  cfg.output_dir = a.str();
  REQUIRE(cli::cmd_popov(cfg, {}) == 0);
  cfg.output_dir = b.str();
  REQUIRE(cli::cmd_popov(cfg, {}) == 0);
  CHECK(slurp(a.path / "popov.json") == slurp(b.path / "popov.json"));
  CHECK(slurp(a.path / "popov_plot.csv") == slurp(b.path / "popov_plot.csv"));
}

TEST_CASE("kappa sweep writes one report per rate") {
  TempDir tmp("sweep");
  const std::string cfg_path = (tmp.path / "config.json").string();
  REQUIRE(run({"init", "--config", cfg_path}) == 0);
  CHECK(run({"popov", "--config", cfg_path, "--out", tmp.str(),
             "--sweep-kappa", "1,2"}) == 0);
  CHECK(fs::exists(tmp.path / "popov_kappa_1.json"));
  CHECK(fs::exists(tmp.path / "popov_kappa_2.json"));
  CHECK(fs::exists(tmp.path / "popov_plot_kappa_2.csv"));

  const auto j1 = nlohmann::json::parse(slurp(tmp.path / "popov_kappa_1.json"));
  CHECK(std::abs(j1.at("theta").get<double>() - 2.0) < 0.02);
}

TEST_CASE("certify command writes the certificate or the failure reason") {
  TempDir tmp("ct");
  auto cfg = cli::parse_config_text(R"({"plant": {"kappa": 2.0},
                                        "bounds": {"gamma": 0.1}})");
  cfg.output_dir = tmp.str();
  CHECK(cli::cmd_certify(cfg) == 0);
  const auto j = nlohmann::json::parse(slurp(tmp.path / "certificate.json"));
  CHECK(j.at("feasible").get<bool>());
  CHECK(j.at("lmi_max_eig").get<double>() < -0.049);
  CHECK(std::abs(j.at("c1").get<double>() -
                 (j.at("P").at("b1")[0][0][0].get<double>() + 1.0) /
                     j.at("P").at("b1")[0][0][0].get<double>()) < 1e-6);

  cfg.certify.theta = 0.0;
  CHECK(cli::cmd_certify(cfg) == 2);
  const auto j2 = nlohmann::json::parse(slurp(tmp.path / "certificate.json"));
  CHECK_FALSE(j2.at("feasible").get<bool>());
  CHECK(!j2.at("reason").get<std::string>().empty());
}

TEST_CASE("verify command checks identities and membership at once") {
  TempDir tmp("vf");
  auto cfg = cli::parse_config_text(R"({"plant": {"kappa": 2.0},
                                        "bounds": {"gamma": 0.1},
                                        "verify": {"dim": 24}})");
  cfg.output_dir = tmp.str();
  CHECK(cli::cmd_verify(cfg) == 0);

  const auto lemmas = nlohmann::json::parse(slurp(tmp.path / "lemmas.json"));
  CHECK(lemmas.at("pass").get<bool>());
  CHECK(lemmas.at("max_residual").get<double>() <= 1e-8);

  const auto mem = nlohmann::json::parse(slurp(tmp.path / "membership.json"));
  CHECK(mem.contains("tables"));
  CHECK(mem.at("tables").contains("pure"));
  CHECK(mem.at("tables").contains("saturated"));
  // The pure Kerr table cannot satisfy the sector bound at this gamma.
  CHECK_FALSE(
      mem.at("tables").at("pure").at("in_class_w1").get<bool>());
}

TEST_CASE("simulate command records the trajectory and the envelope") {
  TempDir tmp("sm");
  auto cfg = cli::parse_config_text(R"({"plant": {"kappa": 2.0},
    "bounds": {"gamma": 0.1},
    "simulate": {"dim": 14, "t_end": 4.0, "record_stride": 10,
                  "nonlinearity": {"kind": "none"}}})");
  cfg.output_dir = tmp.str();
  CHECK(cli::cmd_simulate(cfg) == 0);

  const auto rows = read_csv(tmp.path / "trajectory.csv",
                             "t,n_expect,vquad_expect,trace,purity");
  REQUIRE(rows.size() > 10);
  CHECK(rows.front()[0] == 0.0);
  // Fock level 1 initial state decaying at rate kappa.
  for (const auto& row : rows) {
    CHECK(std::abs(row[1] - std::exp(-2.0 * row[0])) < 1e-6);
  }

  const auto env = nlohmann::json::parse(slurp(tmp.path / "envelope.json"));
  CHECK(env.at("witnessed").get<bool>());
  CHECK(env.at("c2").get<double>() > 0.0);
}

TEST_CASE("cli maps errors and unknown flags to exit code 1") {
  CHECK(run({"smallgain", "--config", "/nonexistent/x.json"}) == 1);
  CHECK(run({"definitely-not-a-command"}) == 1);
  CHECK(run({"popov", "--frobnicate"}) == 1);
  TempDir tmp("badsweep");
  const std::string cfg_path = (tmp.path / "config.json").string();
  REQUIRE(run({"init", "--config", cfg_path}) == 0);
  CHECK(run({"popov", "--config", cfg_path, "--out", tmp.str(),
             "--sweep-kappa", "1,zap"}) == 1);
}

TEST_CASE("help exits cleanly") {
  CHECK(run({"--help"}) == 0);
}
