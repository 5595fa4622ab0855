#include "vsg/stability.hpp"

#include <cmath>
#include <complex>

#include "vsg/error.hpp"

namespace vsg {

AdmittanceMatrix build_admittance(const PowerSystemCase& c) {
  const auto n = static_cast<Eigen::Index>(c.num_buses());
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  using cd = std::complex<double>;
  for (const Branch& br : c.branches()) {
    const auto f = static_cast<Eigen::Index>(*c.index_of(br.from_bus));
    const auto t = static_cast<Eigen::Index>(*c.index_of(br.to_bus));
    const cd series = 1.0 / cd(br.r, br.x);
    const cd charging(0.0, br.b_charging / 2.0);
    const double tap = br.tap_ratio;
    y(f, f) += (series + charging) / (tap * tap);
    y(t, t) += series + charging;
    y(f, t) -= series / tap;
    y(t, f) -= series / tap;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const Bus& b = c.buses()[static_cast<std::size_t>(i)];
    y(i, i) += cd(b.shunt_g, b.shunt_b);
  }
  return {std::move(y)};
}

SusceptancePartition partition_susceptance(const AdmittanceMatrix& y, const PowerSystemCase& c) {
  const Matrix b = y.susceptance();
  const auto k = static_cast<Eigen::Index>(c.num_loads());
  const auto m = static_cast<Eigen::Index>(c.num_generators());
  if (b.rows() != k + m) throw NumericalError("admittance matrix does not match the case dimension");

  SusceptancePartition p;
  p.b_ll = b.topLeftCorner(k, k);
  p.b_lg = b.topRightCorner(k, m);
  p.b_gl = b.bottomLeftCorner(m, k);
  p.b_gg = b.bottomRightCorner(m, m);

  if ((p.b_gl - p.b_lg.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw NumericalError("susceptance matrix is not symmetric: B_GL != B_LG^T");
  }
  const Eigen::FullPivLU<Matrix> lu(p.b_ll);
  const double rcond = lu.isInvertible() ? lu.rcond() : 0.0;
  if (!(rcond > 1e-13)) {
    throw NumericalError("B_LL is singular (reciprocal condition estimate " + std::to_string(rcond) + ")");
  }
  return p;
}

Vector open_circuit_voltages(const SusceptancePartition& p, const Vector& v_gen) {
  if (v_gen.size() != p.b_lg.cols()) throw NumericalError("generator voltage vector has the wrong length");
  const Vector v_open = -p.b_ll.partialPivLu().solve(p.b_lg * v_gen);
  for (Eigen::Index k = 0; k < v_open.size(); ++k) {
    if (!(v_open(k) > 0.0)) {
      throw NumericalError("open-circuit voltage of load " + std::to_string(k) + " is non-positive (" +
                           std::to_string(v_open(k)) + ")");
    }
  }
  return v_open;
}

Matrix stiffness_matrix(const Vector& v_open, const Matrix& b_ll) {
  return 0.25 * v_open.asDiagonal() * b_ll * v_open.asDiagonal();
}

std::string_view to_string(IndexNorm norm) {
  return norm == IndexNorm::kMaxStress ? "max-stress" : "abs";
}

std::optional<IndexNorm> parse_index_norm(std::string_view text) {
  if (text == "max-stress" || text == "stress") return IndexNorm::kMaxStress;
  if (text == "abs" || text == "absolute") return IndexNorm::kAbsolute;
  return std::nullopt;
}

IndexValue instability_index(const Matrix& q_crit_inv, const Vector& q_load, IndexNorm norm) {
  if (q_load.size() != q_crit_inv.cols()) throw NumericalError("load vector has the wrong length");
  if (q_load.size() == 0) return {};
  const Vector stress = -(q_crit_inv * q_load);
  IndexValue out;
  Eigen::Index arg = 0;
  out.delta = norm == IndexNorm::kMaxStress ? stress.maxCoeff(&arg) : stress.cwiseAbs().maxCoeff(&arg);
  out.stressed_load = static_cast<std::size_t>(arg);
  return out;
}

bool StabilityModel::sign_structure_ok(double tol) const { return q_crit_inv.maxCoeff() <= tol; }

StabilityModel build_stability_model(const PowerSystemCase& c, IndexNorm norm) {
  StabilityModel model;
  model.norm = norm;
  model.partition = partition_susceptance(build_admittance(c), c);

  const std::size_t k = c.num_loads();
  model.v_gen.resize(static_cast<Eigen::Index>(c.num_generators()));
  for (std::size_t g = 0; g < c.num_generators(); ++g) {
    model.v_gen(static_cast<Eigen::Index>(g)) = c.buses()[k + g].v_setpoint;
  }
  model.v_open = open_circuit_voltages(model.partition, model.v_gen);
  model.q_crit = stiffness_matrix(model.v_open, model.partition.b_ll);

  const Eigen::PartialPivLU<Matrix> lu(model.q_crit);
  model.q_crit_rcond = lu.rcond();
  model.q_crit_inv = lu.inverse();

  model.q_nominal.resize(static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) model.q_nominal(static_cast<Eigen::Index>(i)) = c.buses()[i].q_demand;
  model.load_ids = c.load_ids();
  model.case_name = c.name();

  const IndexValue nominal = model.index(model.q_nominal);
  model.delta0 = nominal.delta;
  model.stressed_load = nominal.stressed_load;
  return model;
}

}  // namespace vsg
