#include "qstab/cli.hpp"

#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "qstab/errors.hpp"

namespace qstab::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;
using model::DoubledMatrix;
using numerics::CMatrix;
using numerics::Complex;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ValidationError(path + ": " + what);
}

std::string joined(const std::string& parent, const char* key) {
  return parent.empty() ? std::string(key) : parent + "." + key;
}

const json& require_member(const json& obj, const std::string& parent,
                           const char* key) {
  if (!obj.is_object()) fail(parent.empty() ? "config" : parent, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) fail(joined(parent, key), "missing");
  return *it;
}

double read_double(const json& obj, const std::string& parent, const char* key,
                   std::optional<double> fallback = std::nullopt) {
  if (!obj.is_object()) fail(parent, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    fail(joined(parent, key), "missing");
  }
  if (!it->is_number()) fail(joined(parent, key), "expected a number");
  return it->get<double>();
}

int read_int(const json& obj, const std::string& parent, const char* key,
             std::optional<int> fallback = std::nullopt) {
  if (!obj.is_object()) fail(parent, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    fail(joined(parent, key), "missing");
  }
  if (!it->is_number_integer()) fail(joined(parent, key), "expected an integer");
  return it->get<int>();
}

std::string read_string(const json& obj, const std::string& parent, const char* key,
                        std::optional<std::string> fallback = std::nullopt) {
  if (!obj.is_object()) fail(parent, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    if (fallback) return *fallback;
    fail(joined(parent, key), "missing");
  }
  if (!it->is_string()) fail(joined(parent, key), "expected a string");
  return it->get<std::string>();
}

Complex parse_complex(const json& node, const std::string& path) {
  if (node.is_number()) return Complex(node.get<double>(), 0.0);
  if (!node.is_array() || node.size() != 2 || !node[0].is_number() ||
      !node[1].is_number()) {
    fail(path, "expected a number or [re, im]");
  }
  return Complex(node[0].get<double>(), node[1].get<double>());
}

CMatrix parse_matrix(const json& node, const std::string& path) {
  if (!node.is_array() || node.empty() || !node[0].is_array() || node[0].empty()) {
    fail(path, "expected a nonempty array of rows");
  }
  auto rows = static_cast<Eigen::Index>(node.size());
  auto cols = static_cast<Eigen::Index>(node[0].size());
  CMatrix out(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = node[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      std::ostringstream cell;
      cell << path << "[" << i << "]";
      fail(cell.str(), "ragged row");
    }
    for (Eigen::Index j = 0; j < cols; ++j) {
      std::ostringstream cell;
      cell << path << "[" << i << "][" << j << "]";
      out(i, j) = parse_complex(row[static_cast<std::size_t>(j)], cell.str());
    }
  }
  return out;
}

json complex_json(Complex c) { return json::array({c.real(), c.imag()}); }

json matrix_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(complex_json(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

NonlinearitySpec parse_nonlinearity(const json& obj, const std::string& parent) {
  NonlinearitySpec spec;
  spec.kind = read_string(obj, parent, "kind", spec.kind);
  if (spec.kind != "none" && spec.kind != "pure" && spec.kind != "saturated") {
    fail(joined(parent, "kind"), "expected none, pure or saturated");
  }
  spec.saturation = read_double(obj, parent, "saturation", spec.saturation);
  spec.order = read_int(obj, parent, "order", spec.order);
  return spec;
}

InitialStateSpec parse_initial(const json& obj, const std::string& parent) {
  InitialStateSpec spec;
  spec.kind = read_string(obj, parent, "kind", spec.kind);
  if (spec.kind == "fock") {
    spec.level = read_int(obj, parent, "level", spec.level);
  } else if (spec.kind == "coherent") {
    if (obj.contains("alpha")) {
      spec.alpha = parse_complex(obj["alpha"], joined(parent, "alpha"));
    }
  } else if (spec.kind == "thermal") {
    spec.mean_occupation =
        read_double(obj, parent, "mean_occupation", spec.mean_occupation);
  } else {
    fail(joined(parent, "kind"), "expected fock, coherent or thermal");
  }
  return spec;
}

focklab::CoeffTable build_table(const NonlinearitySpec& spec) {
  if (spec.kind == "pure") return focklab::pure_kerr();
  if (spec.kind == "saturated") {
    return focklab::saturated_kerr(spec.saturation, spec.order);
  }
  return {};
}

fs::path prepare_output_dir(const AnalysisConfig& cfg) {
  fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  return dir;
}

void write_json_atomic(const fs::path& target, const json& doc) {
  write_text_atomic(target, doc.dump(2) + "\n");
}

json bounds_json(const model::PerturbationBounds& b) {
  return json{{"gamma", b.gamma},
              {"beta", b.beta},
              {"delta1", b.delta1},
              {"delta2", b.delta2},
              {"delta3", b.delta3}};
}

json condition_json(const focklab::ConditionCheck& c) {
  return json{{"holds", c.holds},
              {"min_eigenvalue", c.min_eigenvalue},
              {"interior_dim", c.interior_dim}};
}

json membership_json(const focklab::MembershipReport& rep) {
  return json{{"dim", rep.dim},
              {"degree", rep.degree},
              {"sector1", condition_json(rep.sector1)},
              {"sector2", condition_json(rep.sector2)},
              {"smooth1", condition_json(rep.smooth1)},
              {"smooth2", condition_json(rep.smooth2)},
              {"bounded_below", condition_json(rep.bounded_below)},
              {"bounded_above", condition_json(rep.bounded_above)},
              {"in_class_w1", rep.in_class_w1},
              {"in_class_w2", rep.in_class_w2}};
}

json expansion_json(const focklab::ExpansionResiduals& r) {
  return json{{"commutator_expansion", r.commutator_expansion},
              {"dissipation_expansion", r.dissipation_expansion},
              {"quad_commutator", r.quad_commutator},
              {"quad_dissipation", r.quad_dissipation},
              {"max", r.max_residual()}};
}

int run_popov_single(const model::PlantModel& plant, const AnalysisConfig& cfg,
                     const fs::path& dir, const std::string& suffix) {
  popov::PopovReport report = popov::check_popov(plant, cfg.bounds, cfg.popov);
  json j{{"analysis", "popov"},
         {"gamma", report.gamma},
         {"hurwitz", report.hurwitz},
         {"spectral_abscissa", report.spectral_abscissa},
         {"theta", report.theta},
         {"margin", report.margin},
         {"omega_at_min", report.omega_at_min},
         {"verdict", smallgain::verdict_name(report.verdict)},
         {"seed", cfg.seed}};
  write_json_atomic(dir / ("popov" + suffix + ".json"), j);

  if (report.hurwitz) {
    model::SisoRealization ss = model::build_realization(plant);
    popov::PopovPlotData plot =
        popov::popov_plot(ss, report.theta, report.gamma, cfg.popov.grid);
    std::ostringstream csv;
    csv << "omega,re_G,omega_im_G\n";
    for (const popov::PopovPlotPoint& pt : plot.points) {
      csv << format_double(pt.omega) << ',' << format_double(pt.re_G) << ','
          << format_double(pt.omega_im_G) << '\n';
    }
    write_text_atomic(dir / ("popov_plot" + suffix + ".csv"), csv.str());
  }
  return report.verdict == smallgain::Verdict::RobustlyMeanSquareStable ? 0 : 2;
}

}  // namespace

std::string format_double(double v) {
  double normalized = v + 0.0;
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof(buf), normalized);
  return std::string(buf, res.ptr);
}

void write_text_atomic(const fs::path& target, const std::string& content) {
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, target);
}

AnalysisConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }

  AnalysisConfig cfg;
  const json& plant = require_member(doc, "", "plant");
  if (plant.is_object() && plant.contains("kappa")) {
    double kappa = read_double(plant, "plant", "kappa");
    cfg.plant = model::kerr_plant(kappa);
    cfg.kappa = kappa;
  } else {
    CMatrix m1 = parse_matrix(require_member(plant, "plant", "M1"), "plant.M1");
    CMatrix m2 = parse_matrix(require_member(plant, "plant", "M2"), "plant.M2");
    CMatrix n1 = parse_matrix(require_member(plant, "plant", "N1"), "plant.N1");
    CMatrix n2 = parse_matrix(require_member(plant, "plant", "N2"), "plant.N2");
    CMatrix e1 = parse_matrix(require_member(plant, "plant", "E1"), "plant.E1");
    CMatrix e2 = parse_matrix(require_member(plant, "plant", "E2"), "plant.E2");
    try {
      cfg.plant = model::build_plant(m1, m2, n1, n2, e1, e2);
    } catch (const Error& e) {
      std::string reason = e.what();
      const std::string stage = "build_plant: ";
      if (reason.rfind(stage, 0) == 0) reason.erase(0, stage.size());
      // Point at the first block the reason names so the message stays a
      // field path like the parse-stage errors.
      std::string path = "plant";
      std::size_t best = std::string::npos;
      for (const char* block : {"M1", "M2", "N1", "N2", "E1", "E2"}) {
        const std::size_t at = reason.find(block);
        if (at < best) {
          best = at;
          path = std::string("plant.") + block;
        }
      }
      throw ValidationError(path + ": " + reason);
    }
  }

  if (doc.contains("bounds")) {
    const json& b = doc["bounds"];
    cfg.bounds.gamma = read_double(b, "bounds", "gamma", cfg.bounds.gamma);
    cfg.bounds.beta = read_double(b, "bounds", "beta", cfg.bounds.beta);
    cfg.bounds.delta1 = read_double(b, "bounds", "delta1", cfg.bounds.delta1);
    cfg.bounds.delta2 = read_double(b, "bounds", "delta2", cfg.bounds.delta2);
    cfg.bounds.delta3 = read_double(b, "bounds", "delta3", cfg.bounds.delta3);
  }
  try {
    cfg.bounds.validate();
  } catch (const Error& e) {
    throw ValidationError(std::string("bounds: ") + e.what());
  }

  if (doc.contains("popov")) {
    const json& p = doc["popov"];
    cfg.popov.theta_max = read_double(p, "popov", "theta_max", cfg.popov.theta_max);
    cfg.popov.theta_steps = read_int(p, "popov", "theta_steps", cfg.popov.theta_steps);
    cfg.popov.grid.points_per_sign =
        read_int(p, "popov", "points_per_sign", cfg.popov.grid.points_per_sign);
    cfg.popov.grid.min_factor =
        read_double(p, "popov", "min_factor", cfg.popov.grid.min_factor);
    cfg.popov.grid.max_factor =
        read_double(p, "popov", "max_factor", cfg.popov.grid.max_factor);
  }

  if (doc.contains("certify")) {
    const json& c = doc["certify"];
    cfg.certify.theta = read_double(c, "certify", "theta", cfg.certify.theta);
    cfg.certify.grid.p1_min = read_double(c, "certify", "p1_min", cfg.certify.grid.p1_min);
    cfg.certify.grid.p1_max = read_double(c, "certify", "p1_max", cfg.certify.grid.p1_max);
    cfg.certify.grid.p1_steps = read_int(c, "certify", "p1_steps", cfg.certify.grid.p1_steps);
    cfg.certify.grid.p2_max = read_double(c, "certify", "p2_max", cfg.certify.grid.p2_max);
    cfg.certify.grid.p2_steps = read_int(c, "certify", "p2_steps", cfg.certify.grid.p2_steps);
  }

  if (doc.contains("verify")) {
    const json& v = doc["verify"];
    cfg.verify.dim = read_int(v, "verify", "dim", cfg.verify.dim);
    cfg.verify.p = read_double(v, "verify", "p", cfg.verify.p);
    cfg.verify.theta = read_double(v, "verify", "theta", cfg.verify.theta);
    if (v.contains("nonlinearity")) {
      cfg.verify.nonlinearity =
          parse_nonlinearity(v["nonlinearity"], "verify.nonlinearity");
    }
  }

  if (doc.contains("simulate")) {
    const json& s = doc["simulate"];
    cfg.simulate.dim = read_int(s, "simulate", "dim", cfg.simulate.dim);
    cfg.simulate.t_end = read_double(s, "simulate", "t_end", cfg.simulate.t_end);
    cfg.simulate.dt = read_double(s, "simulate", "dt", cfg.simulate.dt);
    cfg.simulate.record_stride =
        read_int(s, "simulate", "record_stride", cfg.simulate.record_stride);
    if (s.contains("nonlinearity")) {
      cfg.simulate.nonlinearity =
          parse_nonlinearity(s["nonlinearity"], "simulate.nonlinearity");
    }
    if (s.contains("initial")) {
      cfg.simulate.initial = parse_initial(s["initial"], "simulate.initial");
    }
  }

  cfg.output_dir = read_string(doc, "", "output_dir", cfg.output_dir);
  return cfg;
}

AnalysisConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config_text(text.str());
}

int cmd_smallgain(const AnalysisConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  smallgain::SmallGainReport report = smallgain::check_small_gain(cfg.plant, cfg.bounds);
  json j{{"analysis", "smallgain"},
         {"gamma", report.gamma},
         {"hurwitz", report.hurwitz},
         {"spectral_abscissa", report.spectral_abscissa},
         {"hinf", report.hinf},
         {"verdict", smallgain::verdict_name(report.verdict)},
         {"seed", cfg.seed}};
  write_json_atomic(dir / "smallgain.json", j);
  return report.verdict == smallgain::Verdict::RobustlyMeanSquareStable ? 0 : 2;
}

int cmd_popov(const AnalysisConfig& cfg, const std::vector<double>& kappa_sweep) {
  fs::path dir = prepare_output_dir(cfg);
  if (kappa_sweep.empty()) {
    return run_popov_single(cfg.plant, cfg, dir, "");
  }
  if (!cfg.kappa) {
    throw ValidationError(
        "--sweep-kappa needs a config whose plant is given by kappa");
  }
  int exit_code = 0;
  for (double kappa : kappa_sweep) {
    model::PlantModel plant = model::kerr_plant(kappa);
    int one = run_popov_single(plant, cfg, dir, "_kappa_" + format_double(kappa));
    exit_code = std::max(exit_code, one);
  }
  return exit_code;
}

int cmd_certify(const AnalysisConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  std::optional<certificates::LyapunovCertificate> cert =
      certificates::find_P(cfg.plant, cfg.certify.theta, cfg.bounds, cfg.certify.grid);
  if (!cert) {
    json j{{"analysis", "certify"},
           {"feasible", false},
           {"reason", "no feasible P on grid"},
           {"theta", cfg.certify.theta},
           {"gamma", cfg.bounds.gamma},
           {"seed", cfg.seed}};
    write_json_atomic(dir / "certificate.json", j);
    return 2;
  }
  json j{{"analysis", "certify"},
         {"feasible", true},
         {"theta", cert->theta},
         {"gamma", cert->gamma},
         {"P", json{{"b1", matrix_json(cert->P.b1)}, {"b2", matrix_json(cert->P.b2)}}},
         {"lmi_max_eig", cert->lmi_max_eig},
         {"lambda", cert->lambda},
         {"c", cert->c},
         {"c1", cert->c1},
         {"c2", cert->c2},
         {"c3", cert->c3},
         {"seed", cfg.seed}};
  write_json_atomic(dir / "certificate.json", j);
  return 0;
}

int cmd_verify(const AnalysisConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  const VerifySpec& v = cfg.verify;
  DoubledMatrix p = DoubledMatrix::scaled_identity(1, v.p);

  focklab::LemmaResiduals lemmas =
      focklab::verify_lemma_constants(cfg.plant, p, v.dim);
  focklab::CoeffTable pure = focklab::pure_kerr();
  focklab::CoeffTable saturated =
      v.nonlinearity.kind == "saturated"
          ? focklab::saturated_kerr(v.nonlinearity.saturation, v.nonlinearity.order)
          : focklab::saturated_kerr(4.0, 4);
  focklab::ExpansionResiduals exp_pure =
      focklab::verify_expansion_identities(pure, cfg.plant, p, v.theta, v.dim);
  focklab::ExpansionResiduals exp_sat = focklab::verify_expansion_identities(
      saturated, cfg.plant, p, v.theta, v.dim);

  double worst = std::max({lemmas.max_residual(), exp_pure.max_residual(),
                           exp_sat.max_residual()});
  const double tolerance = 1e-8;
  json lj{{"analysis", "verify"},
          {"dim", v.dim},
          {"theta", v.theta},
          {"p", v.p},
          {"lemma_residuals",
           json{{"double_comm", lemmas.double_comm},
                {"z_with_l", lemmas.z_with_l},
                {"zstar_with_l", lemmas.zstar_with_l},
                {"rho_with_z", lemmas.rho_with_z},
                {"zstar_with_rho", lemmas.zstar_with_rho},
                {"drift_row", lemmas.drift_row},
                {"gradient_row", lemmas.gradient_row},
                {"row_flip", lemmas.row_flip},
                {"max", lemmas.max_residual()}}},
          {"expansion_residuals",
           json{{"pure", expansion_json(exp_pure)},
                {"saturated", expansion_json(exp_sat)}}},
          {"max_residual", worst},
          {"tolerance", tolerance},
          {"pass", worst <= tolerance},
          {"seed", cfg.seed}};
  write_json_atomic(dir / "lemmas.json", lj);

  focklab::FockOperator z =
      focklab::build_z(cfg.plant.E1(0, 0), cfg.plant.E2(0, 0), v.dim);
  focklab::MembershipReport mem_pure = focklab::check_membership(pure, z, cfg.bounds);
  focklab::MembershipReport mem_sat =
      focklab::check_membership(saturated, z, cfg.bounds);
  json mj{{"analysis", "verify"},
          {"dim", v.dim},
          {"bounds", bounds_json(cfg.bounds)},
          {"tables",
           json{{"pure", membership_json(mem_pure)},
                {"saturated", membership_json(mem_sat)}}},
          {"seed", cfg.seed}};
  write_json_atomic(dir / "membership.json", mj);

  return worst <= tolerance ? 0 : 2;
}

int cmd_simulate(const AnalysisConfig& cfg) {
  fs::path dir = prepare_output_dir(cfg);
  const SimulateSpec& s = cfg.simulate;
  int dim = s.dim;

  focklab::FockOperator h = focklab::quad_hamiltonian(cfg.plant.M, dim);
  focklab::CoeffTable table = build_table(s.nonlinearity);
  if (!table.empty()) {
    focklab::FockOperator z =
        focklab::build_z(cfg.plant.E1(0, 0), cfg.plant.E2(0, 0), dim);
    h.matrix += focklab::build_poly_op(table, z).matrix;
  }
  std::vector<focklab::FockOperator> collapse;
  collapse.reserve(cfg.plant.m);
  for (int i = 0; i < cfg.plant.m; ++i) {
    collapse.push_back(
        focklab::coupling_op(cfg.plant.N1(i, 0), cfg.plant.N2(i, 0), dim));
  }

  CMatrix rho0;
  if (s.initial.kind == "fock") {
    rho0 = focklab::fock_state(s.initial.level, dim);
  } else if (s.initial.kind == "coherent") {
    rho0 = focklab::coherent_state(s.initial.alpha, dim);
  } else {
    rho0 = focklab::thermal_state(s.initial.mean_occupation, dim);
  }

  focklab::SimulationOptions opts;
  opts.t_end = s.t_end;
  opts.dt = s.dt > 0 ? s.dt : (cfg.kappa ? 0.01 / *cfg.kappa : 0.005);
  opts.record_stride = s.record_stride;

  focklab::Trajectory traj = focklab::lindblad_simulate(h, collapse, rho0, opts);

  std::ostringstream csv;
  csv << "t,n_expect,vquad_expect,trace,purity\n";
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    csv << format_double(traj.times[i]) << ',' << format_double(traj.n_expect[i])
        << ',' << format_double(traj.vquad_expect[i]) << ','
        << format_double(traj.trace_values[i]) << ','
        << format_double(traj.purity[i]) << '\n';
  }
  write_text_atomic(dir / "trajectory.csv", csv.str());

  focklab::EnvelopeFit fit = focklab::fit_envelope(traj);
  json j{{"analysis", "simulate"},
         {"dim", dim},
         {"dt", opts.dt},
         {"t_end", opts.t_end},
         {"c1", fit.c1},
         {"c2", fit.c2},
         {"c3", fit.c3},
         {"residual", fit.residual},
         {"witnessed", fit.witnessed},
         {"reason", fit.reason},
         {"seed", cfg.seed}};
  write_json_atomic(dir / "envelope.json", j);
  return fit.witnessed ? 0 : 2;
}

int cmd_init(const std::string& example, const std::string& config_path,
             const std::string& out_dir) {
  if (example != "kerr") {
    throw ValidationError("unknown template '" + example + "' (available: kerr)");
  }
  json doc{
      {"plant", {{"kappa", 2.0}}},
      {"bounds",
       {{"gamma", 0.1}, {"beta", 1.0}, {"delta1", 0.0}, {"delta2", 0.0}, {"delta3", 0.0}}},
      {"popov",
       {{"theta_max", 100.0},
        {"theta_steps", 60},
        {"points_per_sign", 4000},
        {"min_factor", 1e-4},
        {"max_factor", 1e6}}},
      {"certify",
       {{"theta", 1.0},
        {"p1_min", 0.001},
        {"p1_max", 10.0},
        {"p1_steps", 40},
        {"p2_max", 1.0},
        {"p2_steps", 9}}},
      {"verify",
       {{"dim", 24},
        {"p", 0.1},
        {"theta", 1.0},
        {"nonlinearity", {{"kind", "saturated"}, {"saturation", 4.0}, {"order", 4}}}}},
      {"simulate",
       {{"dim", 30},
        {"t_end", 10.0},
        {"dt", 0.0},
        {"record_stride", 1},
        {"nonlinearity", {{"kind", "saturated"}, {"saturation", 4.0}, {"order", 4}}},
        {"initial", {{"kind", "fock"}, {"level", 1}}}}},
      {"output_dir", "out"},
  };
  fs::path target;
  if (!config_path.empty()) {
    target = config_path;
  } else if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    target = fs::path(out_dir) / "config.json";
  } else {
    target = "config.json";
  }
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  write_text_atomic(target, doc.dump(2) + "\n");
  std::cout << target.string() << "\n";
  return 0;
}

int run_cli(int argc, char** argv) {
  CLI::App app{"robust mean-square stability analysis of an uncertain single-mode "
               "open quantum system"};
  app.require_subcommand(1);
  std::string config_path, out_dir, example = "kerr", sweep;
  unsigned seed = 0;
  app.add_option("--config", config_path, "path to the JSON analysis config");
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  app.add_option("--seed", seed, "seed recorded in every report");

  CLI::App* sg = app.add_subcommand("smallgain", "gain-based stability test");
  CLI::App* pv = app.add_subcommand("popov", "frequency-domain stability test with plot data");
  pv->add_option("--sweep-kappa", sweep,
                 "comma-separated decay rates; one report per value");
  CLI::App* ct = app.add_subcommand("certify", "search for a Lyapunov matrix certificate");
  CLI::App* vf = app.add_subcommand("verify", "operator identity and membership checks");
  CLI::App* sm = app.add_subcommand("simulate", "Lindblad trajectory plus decay envelope");
  CLI::App* in = app.add_subcommand("init", "write a template config");
  in->add_option("--example", example, "template name");
  for (CLI::App* sub : {sg, pv, ct, vf, sm, in}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (in->parsed()) return cmd_init(example, config_path, out_dir);
    if (config_path.empty()) {
      throw ValidationError("--config is required for analysis commands");
    }
    AnalysisConfig cfg = load_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    cfg.seed = seed;
    if (sg->parsed()) return cmd_smallgain(cfg);
    if (pv->parsed()) {
      std::vector<double> kappas;
      if (!sweep.empty()) {
        std::stringstream ss(sweep);
        std::string item;
        while (std::getline(ss, item, ',')) {
          double value = 0;
          auto res = std::from_chars(item.data(), item.data() + item.size(), value);
          if (res.ec != std::errc{} || res.ptr != item.data() + item.size()) {
            throw ValidationError("--sweep-kappa: cannot parse '" + item + "'");
          }
          kappas.push_back(value);
        }
        if (kappas.empty()) throw ValidationError("--sweep-kappa: empty list");
      }
      return cmd_popov(cfg, kappas);
    }
    if (ct->parsed()) return cmd_certify(cfg);
    if (vf->parsed()) return cmd_verify(cfg);
    if (sm->parsed()) return cmd_simulate(cfg);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace qstab::cli
