#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "qstab/certificates.hpp"
#include "qstab/focklab.hpp"
#include "qstab/popov.hpp"
#include "qstab/smallgain.hpp"

namespace qstab::cli {

struct NonlinearitySpec {
  std::string kind = "saturated";  // none | pure | saturated
  double saturation = 4.0;
  int order = 4;
};

struct InitialStateSpec {
  std::string kind = "fock";  // fock | coherent | thermal
  int level = 1;
  numerics::Complex alpha{1.0, 0.0};
  double mean_occupation = 0.5;
};

struct SimulateSpec {
  int dim = 30;
  double t_end = 10.0;
  double dt = 0.0;  // nonpositive picks 0.01/kappa, or 0.005 without a kappa
  int record_stride = 1;
  NonlinearitySpec nonlinearity;
  InitialStateSpec initial;
};

struct VerifySpec {
  int dim = 24;
  double p = 0.1;  // isotropic Lyapunov block used in the identity checks
  double theta = 1.0;
  NonlinearitySpec nonlinearity;
};

struct CertifySpec {
  double theta = 1.0;
  certificates::PGridSpec grid;
};

struct AnalysisConfig {
  model::PlantModel plant;
  std::optional<double> kappa;  // present when the plant came from the shorthand
  model::PerturbationBounds bounds;
  popov::PopovOptions popov;
  CertifySpec certify;
  VerifySpec verify;
  SimulateSpec simulate;
  std::string output_dir = "out";
  unsigned seed = 0;
};

// Parses the JSON analysis config. Errors carry the offending field path,
// e.g. "plant.E2: missing".
AnalysisConfig load_config(const std::string& path);
AnalysisConfig parse_config_text(const std::string& text);

// Shortest locale-free round-trip decimal; negative zero comes out as "0".
std::string format_double(double v);

// Writes through a sibling temp file and renames into place.
void write_text_atomic(const std::filesystem::path& target,
                       const std::string& content);

int cmd_smallgain(const AnalysisConfig& cfg);
int cmd_popov(const AnalysisConfig& cfg, const std::vector<double>& kappa_sweep);
int cmd_certify(const AnalysisConfig& cfg);
int cmd_verify(const AnalysisConfig& cfg);
int cmd_simulate(const AnalysisConfig& cfg);
int cmd_init(const std::string& example, const std::string& config_path,
             const std::string& out_dir);

int run_cli(int argc, char** argv);

}  // namespace qstab::cli
