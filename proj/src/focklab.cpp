#include "qstab/focklab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qstab/errors.hpp"

namespace qstab::focklab {
namespace {

using model::DoubledMatrix;
using model::PlantModel;
using numerics::hermitian_part;
using numerics::max_abs;

constexpr Complex kImag{0.0, 1.0};

CMatrix comm(const CMatrix& x, const CMatrix& y) { return x * y - y * x; }

// A product of at most `product_degree` ladder factors is exact on levels
// 0 .. dim-product_degree-1; one further level of margin is dropped.
int interior_levels(int dim, int product_degree) {
  return dim - product_degree - 1;
}

int checked_interior(int dim, int product_degree, const char* what) {
  int keep = interior_levels(dim, product_degree);
  if (keep < 1) {
    std::ostringstream msg;
    msg << what << ": product degree " << product_degree
        << " leaves no exact interior at dim " << dim;
    throw TruncationError(msg.str());
  }
  return keep;
}

CMatrix interior(const CMatrix& x, int keep) {
  return x.topLeftCorner(keep, keep);
}

double interior_residual(const CMatrix& x, int product_degree, const char* what) {
  int keep = checked_interior(static_cast<int>(x.rows()), product_degree, what);
  return max_abs(interior(x, keep));
}

void require_square(const FockOperator& op, const char* what) {
  if (op.dim < 1 || op.matrix.rows() != op.dim || op.matrix.cols() != op.dim) {
    std::ostringstream msg;
    msg << what << ": matrix shape does not match dim " << op.dim;
    throw DimensionError(msg.str());
  }
}

void require_single_mode(const PlantModel& plant, const DoubledMatrix& p) {
  if (plant.n != 1) {
    throw DimensionError("truncated-space verification supports one mode only");
  }
  if (p.n() != 1) {
    throw DimensionError("P block size does not match the single mode");
  }
  if (!p.hermitian_form()) {
    throw ShapeError("P is not a Hermitian doubled form");
  }
}

// Channel row block [N1 N2], one row per coupling channel.
CMatrix channel_rows(const PlantModel& plant) {
  CMatrix rows(plant.m, 2 * plant.n);
  rows << plant.N1, plant.N2;
  return rows;
}

struct TruncatedPlant {
  CMatrix a, ad, z, zd;
  std::vector<CMatrix> ell, elld;
  CMatrix id;
};

TruncatedPlant realize_on_fock(const PlantModel& plant, int dim) {
  TruncatedPlant t;
  t.a = fock_annihilation(dim).matrix;
  t.ad = t.a.adjoint();
  t.z = plant.E1(0, 0) * t.a + plant.E2(0, 0) * t.ad;
  t.zd = t.z.adjoint();
  t.ell.reserve(plant.m);
  t.elld.reserve(plant.m);
  for (int i = 0; i < plant.m; ++i) {
    t.ell.push_back(plant.N1(i, 0) * t.a + plant.N2(i, 0) * t.ad);
    t.elld.push_back(t.ell.back().adjoint());
  }
  t.id = CMatrix::Identity(dim, dim);
  return t;
}

}  // namespace

FockOperator fock_annihilation(int dim) {
  if (dim < 2) throw DimensionError("ladder operators need dim >= 2");
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) {
    a(n - 1, n) = std::sqrt(static_cast<double>(n));
  }
  return {dim, std::move(a)};
}

FockOperator fock_creation(int dim) {
  FockOperator a = fock_annihilation(dim);
  return {dim, a.matrix.adjoint()};
}

FockOperator fock_number(int dim) {
  if (dim < 1) throw DimensionError("number operator needs dim >= 1");
  CMatrix n = CMatrix::Zero(dim, dim);
  for (int k = 0; k < dim; ++k) n(k, k) = static_cast<double>(k);
  return {dim, std::move(n)};
}

FockOperator build_z(Complex e1, Complex e2, int dim) {
  FockOperator a = fock_annihilation(dim);
  return {dim, e1 * a.matrix + e2 * a.matrix.adjoint()};
}

FockOperator coupling_op(Complex n1, Complex n2, int dim) {
  return build_z(n1, n2, dim);
}

FockOperator quad_form_op(const CMatrix& q, int dim) {
  if (q.rows() != 2 || q.cols() != 2) {
    throw DimensionError("quadratic form coefficient matrix must be 2x2");
  }
  FockOperator a = fock_annihilation(dim);
  const CMatrix& am = a.matrix;
  CMatrix ad = am.adjoint();
  CMatrix out = q(0, 0) * ad * am + q(0, 1) * ad * ad + q(1, 0) * am * am +
                q(1, 1) * am * ad;
  return {dim, std::move(out)};
}

FockOperator quad_hamiltonian(const DoubledMatrix& m, int dim) {
  if (m.n() != 1) throw DimensionError("quadratic Hamiltonian needs 1x1 blocks");
  if (!m.hermitian_form()) throw ShapeError("Hamiltonian blocks lack Hermitian form");
  FockOperator op = quad_form_op(m.assemble(), dim);
  op.matrix *= 0.5;
  return op;
}

void CoeffTable::set(int k, int l, Complex value) {
  if (k < 0 || l < 0) throw ValidationError("coefficient indices must be nonnegative");
  if (value == Complex{}) {
    entries_.erase({k, l});
  } else {
    entries_[{k, l}] = value;
  }
}

void CoeffTable::add(int k, int l, Complex value) { set(k, l, get(k, l) + value); }

Complex CoeffTable::get(int k, int l) const {
  auto it = entries_.find({k, l});
  return it == entries_.end() ? Complex{} : it->second;
}

int CoeffTable::degree() const {
  int d = 0;
  for (const auto& [kl, value] : entries_) {
    d = std::max(d, kl.first + kl.second);
  }
  return d;
}

bool CoeffTable::hermitian_pattern(double tol) const {
  for (const auto& [kl, value] : entries_) {
    Complex twin = get(kl.second, kl.first);
    if (std::abs(value - std::conj(twin)) > tol * (1.0 + std::abs(value))) {
      return false;
    }
  }
  return true;
}

CoeffTable pure_kerr() {
  CoeffTable t;
  t.set(2, 2, 1.0);
  return t;
}

CoeffTable saturated_kerr(double s, int order) {
  if (s <= 0) throw ValidationError("saturation scale must be positive");
  if (order < 4 || order % 2 != 0) {
    throw ValidationError("saturation cutoff must be an even integer >= 4");
  }
  CoeffTable t;
  double coeff = 1.0;
  for (int k = 2; k <= order; ++k) {
    t.set(k, k, coeff);
    coeff *= -1.0 / s;
  }
  return t;
}

FockOperator build_poly_op(const CoeffTable& table, const FockOperator& z) {
  require_square(z, "build_poly_op");
  int dim = z.dim;
  int d = table.degree();
  if (!table.empty() && dim - d < 2) {
    std::ostringstream msg;
    msg << "polynomial degree " << d << " leaves no interior at dim " << dim;
    throw TruncationError(msg.str());
  }
  int kmax = 0;
  int lmax = 0;
  for (const auto& [kl, value] : table.entries()) {
    kmax = std::max(kmax, kl.first);
    lmax = std::max(lmax, kl.second);
  }
  std::vector<CMatrix> zp(kmax + 1), zdp(lmax + 1);
  zp[0] = CMatrix::Identity(dim, dim);
  for (int k = 1; k <= kmax; ++k) zp[k] = zp[k - 1] * z.matrix;
  zdp[0] = CMatrix::Identity(dim, dim);
  CMatrix zd = z.matrix.adjoint();
  for (int l = 1; l <= lmax; ++l) zdp[l] = zdp[l - 1] * zd;

  CMatrix out = CMatrix::Zero(dim, dim);
  for (const auto& [kl, value] : table.entries()) {
    out.noalias() += value * (zp[kl.first] * zdp[kl.second]);
  }
  return {dim, std::move(out)};
}

DerivativeTables derivative_tables(const CoeffTable& table) {
  DerivativeTables out;
  for (const auto& [kl, value] : table.entries()) {
    const auto [k, l] = kl;
    if (k >= 1) out.dz.add(k - 1, l, static_cast<double>(k) * value);
    if (k >= 2) {
      out.dzz.add(k - 2, l, static_cast<double>(k) * static_cast<double>(k - 1) * value);
    }
    if (k >= 1 && l >= 1) {
      out.dz_dzstar.add(k - 1, l - 1, static_cast<double>(k) * static_cast<double>(l) * value);
    }
  }
  return out;
}

MembershipReport check_membership(const CoeffTable& table, const FockOperator& z,
                                  const model::PerturbationBounds& bounds) {
  bounds.validate();
  require_square(z, "check_membership");
  if (!table.hermitian_pattern()) {
    throw ShapeError("coefficient table is not Hermitian-symmetric");
  }
  int dim = z.dim;
  int d = table.degree();
  if (dim - 2 * d < 2) {
    std::ostringstream msg;
    msg << "membership checks at degree " << d << " need dim >= " << (2 * d + 2)
        << ", got " << dim;
    throw TruncationError(msg.str());
  }

  DerivativeTables tabs = derivative_tables(table);
  CMatrix f = build_poly_op(table, z).matrix;
  CMatrix w1 = build_poly_op(tabs.dz, z).matrix;
  CMatrix w2 = build_poly_op(tabs.dzz, z).matrix;
  CMatrix w3 = build_poly_op(tabs.dz_dzstar, z).matrix;
  CMatrix id = CMatrix::Identity(dim, dim);
  CMatrix zz = z.matrix * z.matrix.adjoint();

  double inv_g2 = 1.0 / (bounds.gamma * bounds.gamma);
  CMatrix sector_rhs = inv_g2 * zz + bounds.delta1 * id;

  auto evaluate = [&](const CMatrix& gap, int product_degree, const char* what) {
    int keep = checked_interior(dim, product_degree, what);
    auto eigs = numerics::eig_hermitian(hermitian_part(interior(gap, keep)));
    ConditionCheck check;
    check.interior_dim = keep;
    check.min_eigenvalue = eigs.front();
    check.holds = check.min_eigenvalue >= -1e-9;
    return check;
  };

  int dw1 = tabs.dz.degree();
  int dw2 = tabs.dzz.degree();
  int dw3 = tabs.dz_dzstar.degree();

  MembershipReport rep;
  rep.dim = dim;
  rep.degree = d;
  rep.sector1 = evaluate(sector_rhs - w1.adjoint() * w1, std::max(2, 2 * dw1), "sector1");
  CMatrix shifted = w1 - z.matrix.adjoint() / bounds.gamma;
  rep.sector2 = evaluate(sector_rhs - shifted.adjoint() * shifted,
                         std::max(2, 2 * std::max(dw1, 1)), "sector2");
  rep.smooth1 = evaluate(bounds.delta2 * id - w2.adjoint() * w2, 2 * dw2, "smooth1");
  rep.smooth2 = evaluate(bounds.delta3 * id - w3.adjoint() * w3, 2 * dw3, "smooth2");
  rep.bounded_below = evaluate(f, d, "lower bound");
  rep.bounded_above = evaluate(bounds.beta * zz - f, std::max(2, d), "upper bound");
  rep.in_class_w1 = rep.sector1.holds && rep.smooth1.holds;
  rep.in_class_w2 = rep.sector2.holds && rep.smooth1.holds && rep.smooth2.holds &&
                    rep.bounded_below.holds && rep.bounded_above.holds;
  return rep;
}

double LemmaResiduals::max_residual() const {
  return std::max({double_comm, z_with_l, zstar_with_l, rho_with_z, zstar_with_rho,
                   drift_row, gradient_row, row_flip});
}

double ExpansionResiduals::max_residual() const {
  return std::max({commutator_expansion, dissipation_expansion, quad_commutator,
                   quad_dissipation});
}

LemmaResiduals verify_lemma_constants(const PlantModel& plant, const DoubledMatrix& p,
                                      int dim) {
  require_single_mode(plant, p);
  TruncatedPlant t = realize_on_fock(plant, dim);

  CMatrix pm = p.assemble();
  CMatrix j = model::J_matrix(1);
  CMatrix sig = model::Sigma_matrix(1);
  CMatrix e = plant.E_tilde();
  CMatrix nrows = channel_rows(plant);
  CMatrix v2 = quad_form_op(pm, dim).matrix;
  CMatrix h2 = quad_hamiltonian(plant.M, dim).matrix;

  LemmaResiduals r;
  r.dim = dim;

  Complex mu = -2.0 * (e * j * pm * j * sig * e.transpose())(0, 0);
  r.double_comm = std::max(
      interior_residual(comm(t.z, comm(t.z, v2)) - mu * t.id, 4, "double commutator"),
      interior_residual(comm(t.zd, comm(t.zd, v2)) - std::conj(mu) * t.id, 4,
                        "conjugate double commutator"));

  CMatrix zl = nrows * sig * j * e.transpose();
  CMatrix zsl = -(nrows * j * e.adjoint());
  for (int i = 0; i < plant.m; ++i) {
    r.z_with_l = std::max(
        r.z_with_l,
        interior_residual(comm(t.z, t.ell[i]) - zl(i, 0) * t.id, 2, "[z, L]"));
    r.zstar_with_l = std::max(
        r.zstar_with_l,
        interior_residual(comm(t.zd, t.ell[i]) - zsl(i, 0) * t.id, 2, "[z*, L]"));
  }

  CMatrix rho = CMatrix::Zero(dim, dim);
  for (int i = 0; i < plant.m; ++i) {
    rho.noalias() += comm(t.elld[i], t.z) * t.ell[i];
  }
  Complex rz =
      -(e * sig * j * nrows.transpose() * nrows.conjugate() * j * e.transpose())(0, 0);
  r.rho_with_z = interior_residual(comm(rho, t.z) - rz * t.id, 4, "[[L',z]L, z]");
  Complex zsr = (e * j * nrows.adjoint() * nrows * j * e.adjoint())(0, 0);
  r.zstar_with_rho =
      interior_residual(comm(t.zd, rho) - zsr * t.id, 4, "[z*, [L',z]L]");

  CMatrix drift_coeff = e * model::build_F(plant);
  CMatrix lhs_drift = -kImag * comm(t.z, h2);
  for (int i = 0; i < plant.m; ++i) {
    lhs_drift.noalias() +=
        0.5 * (t.elld[i] * comm(t.z, t.ell[i]) + comm(t.elld[i], t.z) * t.ell[i]);
  }
  CMatrix rhs_drift = drift_coeff(0, 0) * t.a + drift_coeff(0, 1) * t.ad;
  r.drift_row = interior_residual(lhs_drift - rhs_drift, 3, "drift row");

  CMatrix grad_coeff = 2.0 * kImag * (e * j * pm);
  CMatrix rhs_grad = grad_coeff(0, 0) * t.a + grad_coeff(0, 1) * t.ad;
  r.gradient_row = interior_residual(kImag * comm(t.z, v2) - rhs_grad, 3, "gradient row");

  CMatrix flip = sig * e.transpose();
  CMatrix as_column_form = t.ad * flip(0, 0) + t.a * flip(1, 0);
  r.row_flip = interior_residual(t.z - as_column_form, 1, "row flip");
  return r;
}

ExpansionResiduals verify_expansion_identities(const CoeffTable& table,
                                               const PlantModel& plant,
                                               const DoubledMatrix& p, double theta,
                                               int dim) {
  require_single_mode(plant, p);
  if (theta < 0) throw ValidationError("theta must be nonnegative");
  if (!table.hermitian_pattern()) {
    throw ShapeError("coefficient table is not Hermitian-symmetric");
  }
  TruncatedPlant t = realize_on_fock(plant, dim);
  FockOperator zop{dim, t.z};

  CMatrix pm = p.assemble();
  CMatrix mm = plant.M.assemble();
  CMatrix j = model::J_matrix(1);

  DerivativeTables tabs = derivative_tables(table);
  CMatrix f = build_poly_op(table, zop).matrix;
  CMatrix w1 = build_poly_op(tabs.dz, zop).matrix;
  CMatrix w2 = build_poly_op(tabs.dzz, zop).matrix;
  CMatrix w3 = build_poly_op(tabs.dz_dzstar, zop).matrix;
  int d = table.degree();

  ExpansionResiduals r;
  r.dim = dim;

  CMatrix vtil = quad_form_op(pm - 0.5 * theta * mm, dim).matrix;
  CMatrix cvz = comm(vtil, t.z);
  CMatrix dvz = comm(t.z, cvz);
  CMatrix rhs1 = cvz * w1 - w1.adjoint() * comm(t.zd, vtil) + 0.5 * dvz * w2 -
                 0.5 * dvz.adjoint() * w2.adjoint();
  r.commutator_expansion =
      interior_residual(comm(vtil, f) - rhs1, d + 2, "commutator expansion");

  CMatrix cz = CMatrix::Zero(dim, dim);
  CMatrix czs = CMatrix::Zero(dim, dim);
  CMatrix rho = CMatrix::Zero(dim, dim);
  CMatrix lhs2 = CMatrix::Zero(dim, dim);
  for (int i = 0; i < plant.m; ++i) {
    cz.noalias() += t.elld[i] * comm(t.z, t.ell[i]) + comm(t.elld[i], t.z) * t.ell[i];
    czs.noalias() += t.elld[i] * comm(t.zd, t.ell[i]) + comm(t.elld[i], t.zd) * t.ell[i];
    rho.noalias() += comm(t.elld[i], t.z) * t.ell[i];
    lhs2.noalias() += 0.5 * (t.elld[i] * comm(f, t.ell[i]) + comm(t.elld[i], f) * t.ell[i]);
  }
  CMatrix dcz = comm(rho, t.z);
  CMatrix dczs = comm(t.zd, rho);
  CMatrix rhs2 = 0.5 * cz * w1 + 0.5 * w1.adjoint() * czs - 0.5 * dcz * w2 -
                 0.5 * w2.adjoint() * dcz.adjoint() + 0.5 * dczs * w3 +
                 0.5 * w3.adjoint() * dczs.adjoint();
  r.dissipation_expansion =
      interior_residual(lhs2 - rhs2, d + 2, "dissipation expansion");

  CMatrix v2 = quad_form_op(pm, dim).matrix;
  CMatrix h2 = quad_hamiltonian(plant.M, dim).matrix;
  CMatrix qc_rhs = quad_form_op(pm * j * mm - mm * j * pm, dim).matrix;
  r.quad_commutator =
      interior_residual(comm(v2, h2) - qc_rhs, 4, "quadratic commutator");

  CMatrix nfull = plant.N_doubled();
  CMatrix jc = model::J_matrix(plant.m);
  CMatrix proj = CMatrix::Zero(2 * plant.m, 2 * plant.m);
  proj.topLeftCorner(plant.m, plant.m) = CMatrix::Identity(plant.m, plant.m);
  Complex trace_const = (pm * j * nfull.adjoint() * proj * nfull * j).trace();
  CMatrix qd = nfull.adjoint() * jc * nfull * j * pm + pm * j * nfull.adjoint() * jc * nfull;
  CMatrix lhsq = CMatrix::Zero(dim, dim);
  for (int i = 0; i < plant.m; ++i) {
    lhsq.noalias() +=
        0.5 * (t.elld[i] * comm(v2, t.ell[i]) + comm(t.elld[i], v2) * t.ell[i]);
  }
  CMatrix rhsq = trace_const * t.id - 0.5 * quad_form_op(qd, dim).matrix;
  r.quad_dissipation = interior_residual(lhsq - rhsq, 4, "quadratic dissipation");
  return r;
}

CMatrix fock_state(int level, int dim) {
  if (dim < 1) throw DimensionError("state space needs dim >= 1");
  if (level < 0 || level >= dim) {
    std::ostringstream msg;
    msg << "Fock level " << level << " outside 0.." << (dim - 1);
    throw ValidationError(msg.str());
  }
  CMatrix rho = CMatrix::Zero(dim, dim);
  rho(level, level) = 1.0;
  return rho;
}

CMatrix coherent_state(Complex alpha, int dim) {
  if (dim < 2) throw DimensionError("coherent state needs dim >= 2");
  CVector psi(dim);
  psi(0) = 1.0;
  for (int n = 1; n < dim; ++n) {
    psi(n) = psi(n - 1) * alpha / std::sqrt(static_cast<double>(n));
  }
  psi /= psi.norm();
  double tail = std::norm(psi(dim - 1));
  if (tail > 1e-6) {
    std::ostringstream msg;
    msg << "coherent amplitude " << std::abs(alpha) << " carries tail weight "
        << tail << " at dim " << dim;
    throw TruncationError(msg.str());
  }
  return psi * psi.adjoint();
}

CMatrix thermal_state(double mean_occupation, int dim) {
  if (dim < 1) throw DimensionError("state space needs dim >= 1");
  if (mean_occupation < 0) throw ValidationError("mean occupation must be nonnegative");
  if (mean_occupation == 0.0) return fock_state(0, dim);
  double ratio = mean_occupation / (1.0 + mean_occupation);
  CMatrix rho = CMatrix::Zero(dim, dim);
  double weight = 1.0;
  double total = 0.0;
  for (int n = 0; n < dim; ++n) {
    rho(n, n) = weight;
    total += weight;
    weight *= ratio;
  }
  rho /= total;
  return rho;
}

Trajectory lindblad_simulate(const FockOperator& hamiltonian,
                             const std::vector<FockOperator>& collapse_ops,
                             const CMatrix& rho0, const SimulationOptions& opts) {
  require_square(hamiltonian, "lindblad_simulate");
  int dim = hamiltonian.dim;
  for (const FockOperator& c : collapse_ops) {
    require_square(c, "lindblad_simulate");
    if (c.dim != dim) throw DimensionError("collapse operator dim mismatch");
  }
  if (rho0.rows() != dim || rho0.cols() != dim) {
    throw DimensionError("initial state dim mismatch");
  }
  if (opts.dt <= 0 || opts.t_end <= 0) {
    throw ValidationError("dt and t_end must be positive");
  }
  if (opts.record_stride < 1 || opts.positivity_stride < 1) {
    throw ValidationError("strides must be >= 1");
  }
  if (!numerics::is_hermitian(hamiltonian.matrix, 1e-9)) {
    throw ValidationError(
        "Hamiltonian is not Hermitian within tolerance; increase dim so the "
        "truncated polynomial stays self-adjoint");
  }
  if (!numerics::is_hermitian(rho0, 1e-10)) {
    throw ValidationError("initial state is not Hermitian");
  }
  if (std::abs(rho0.trace().real() - 1.0) > 1e-8 ||
      std::abs(rho0.trace().imag()) > 1e-8) {
    throw ValidationError("initial state must have unit trace");
  }
  {
    auto eigs = numerics::eig_hermitian(hermitian_part(rho0), 1e-8);
    if (eigs.front() < -1e-10) {
      throw ValidationError("initial state has a negative eigenvalue");
    }
  }

  const CMatrix h = hamiltonian.matrix;
  std::vector<CMatrix> ell, elld;
  ell.reserve(collapse_ops.size());
  elld.reserve(collapse_ops.size());
  CMatrix damping = CMatrix::Zero(dim, dim);  // sum of L'L
  for (const FockOperator& c : collapse_ops) {
    ell.push_back(c.matrix);
    elld.push_back(c.matrix.adjoint());
    damping.noalias() += elld.back() * ell.back();
  }

  auto deriv = [&](const CMatrix& rho) {
    CMatrix out = -kImag * (h * rho - rho * h);
    out.noalias() -= 0.5 * (damping * rho + rho * damping);
    for (std::size_t i = 0; i < ell.size(); ++i) {
      out.noalias() += ell[i] * (rho * elld[i]);
    }
    return out;
  };

  CMatrix num = fock_number(dim).matrix;
  FockOperator a = fock_annihilation(dim);
  CMatrix vquad_op = a.matrix.adjoint() * a.matrix + a.matrix * a.matrix.adjoint();

  int steps = std::max(1, static_cast<int>(std::ceil(opts.t_end / opts.dt - 1e-12)));
  Trajectory traj;
  int samples = steps / opts.record_stride + 2;
  traj.times.reserve(samples);
  traj.n_expect.reserve(samples);
  traj.vquad_expect.reserve(samples);
  traj.trace_values.reserve(samples);
  traj.purity.reserve(samples);

  CMatrix rho = rho0;
  auto record = [&](double time) {
    double trace = rho.trace().real();
    if (std::abs(trace - 1.0) > 1e-6) {
      std::ostringstream msg;
      msg << "trace drifted to " << trace << " at t = " << time
          << "; reduce dt or increase dim";
      throw NumericalError(msg.str());
    }
    traj.times.push_back(time);
    traj.n_expect.push_back((num * rho).trace().real());
    traj.vquad_expect.push_back((vquad_op * rho).trace().real());
    traj.trace_values.push_back(trace);
    traj.purity.push_back((rho * rho).trace().real());
  };
  auto check_positivity = [&](double time) {
    auto eigs = numerics::eig_hermitian(hermitian_part(rho), 1e-2);
    if (eigs.front() < -1e-8) {
      std::ostringstream msg;
      msg << "density matrix lost positivity (min eig " << eigs.front()
          << ") at t = " << time << "; reduce dt";
      throw NumericalError(msg.str());
    }
  };

  record(0.0);
  double dt = opts.dt;
  for (int step = 1; step <= steps; ++step) {
    CMatrix k1 = deriv(rho);
    CMatrix k2 = deriv(rho + 0.5 * dt * k1);
    CMatrix k3 = deriv(rho + 0.5 * dt * k2);
    CMatrix k4 = deriv(rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    double time = step * dt;
    if (step % opts.record_stride == 0 || step == steps) record(time);
    if (step % opts.positivity_stride == 0 || step == steps) check_positivity(time);
  }
  return traj;
}

EnvelopeFit fit_envelope(const Trajectory& traj) {
  std::size_t k = traj.times.size();
  if (k < 8 || traj.vquad_expect.size() != k) {
    throw ValidationError("trajectory too short or inconsistent for envelope fit");
  }
  for (std::size_t i = 1; i < k; ++i) {
    if (traj.times[i] <= traj.times[i - 1]) {
      throw ValidationError("trajectory times must be strictly increasing");
    }
  }
  const std::vector<double>& v = traj.vquad_expect;
  const std::vector<double>& times = traj.times;
  double v0 = v.front();
  if (v0 <= 0) throw ValidationError("initial quadratic moment must be positive");

  EnvelopeFit fit;
  double drop = (v.front() - v.back()) / std::max(1.0, std::abs(v.front()));
  if (drop < 1e-3) {
    fit.c1 = 0.0;
    fit.c2 = 0.0;
    fit.c3 = *std::max_element(v.begin(), v.end());
    fit.residual = 0.0;
    fit.witnessed = false;
    fit.reason = "trajectory shows no decay to fit";
    return fit;
  }

  // Linear least squares in (amplitude, offset) at fixed rate; negative
  // solutions are clamped and refitted on the boundary.
  auto fit_at_rate = [&](double rate, double& amplitude, double& offset) {
    double see = 0, se1 = 0, be = 0, b1 = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double e = std::exp(-rate * times[i]);
      see += e * e;
      se1 += e;
      be += e * v[i];
      b1 += v[i];
    }
    double n = static_cast<double>(k);
    double det = see * n - se1 * se1;
    if (det > 1e-12 * (see * n + 1.0)) {
      amplitude = (be * n - b1 * se1) / det;
      offset = (see * b1 - se1 * be) / det;
    } else {
      amplitude = 0.0;
      offset = b1 / n;
    }
    if (offset < 0) {
      offset = 0.0;
      amplitude = see > 0 ? be / see : 0.0;
    }
    if (amplitude < 0) {
      amplitude = 0.0;
      offset = b1 / n;
    }
    double sse = 0;
    for (std::size_t i = 0; i < k; ++i) {
      double r = v[i] - amplitude * std::exp(-rate * times[i]) - offset;
      sse += r * r;
    }
    return sse;
  };

  double best_rate = 0, best_sse = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 180; ++i) {
    double rate = std::pow(10.0, -3.0 + 6.0 * i / 180.0);
    double amplitude, offset;
    double sse = fit_at_rate(rate, amplitude, offset);
    if (sse < best_sse) {
      best_sse = sse;
      best_rate = rate;
    }
  }
  {
    // Golden-section polish on log10(rate) around the grid winner.
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = std::log10(best_rate) - 0.6, hi = std::log10(best_rate) + 0.6;
    double amplitude, offset;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = fit_at_rate(std::pow(10.0, x1), amplitude, offset);
    double f2 = fit_at_rate(std::pow(10.0, x2), amplitude, offset);
    for (int it = 0; it < 80; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - gr * (hi - lo);
        f1 = fit_at_rate(std::pow(10.0, x1), amplitude, offset);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + gr * (hi - lo);
        f2 = fit_at_rate(std::pow(10.0, x2), amplitude, offset);
      }
    }
    double candidate = std::pow(10.0, 0.5 * (lo + hi));
    if (fit_at_rate(candidate, amplitude, offset) < best_sse) best_rate = candidate;
  }

  double amplitude, offset;
  double sse = fit_at_rate(best_rate, amplitude, offset);
  fit.c2 = best_rate;
  fit.c3 = offset;
  fit.c1 = amplitude / v0;
  bool majorizes = true;
  for (std::size_t i = 0; i < k; ++i) {
    double slack = v[i] - offset - 1e-6;
    if (slack <= 0) continue;
    double needed = slack / (v0 * std::exp(-best_rate * times[i]));
    if (!std::isfinite(needed)) {
      majorizes = false;
      break;
    }
    fit.c1 = std::max(fit.c1, needed);
  }
  fit.residual = std::sqrt(sse / static_cast<double>(k));
  fit.witnessed =
      majorizes && fit.c2 > 1e-6 && fit.c1 > 0 && std::isfinite(fit.c1);
  fit.reason = fit.witnessed ? "decaying envelope fitted"
                             : "no decaying envelope majorizes the trajectory";
  return fit;
}

}  // namespace qstab::focklab
