#include <cmath>
#include <complex>
#include <vector>

#include "vsg/error.hpp"
#include "vsg/parallel.hpp"
#include "vsg/stability.hpp"

namespace vsg {
namespace {

using cd = std::complex<double>;
using Index = Eigen::Index;

struct BusSets {
  std::vector<Index> non_slack;
  std::vector<Index> pq;
  Index slack = 0;
};

BusSets classify(const PowerSystemCase& c) {
  BusSets sets;
  for (std::size_t i = 0; i < c.num_buses(); ++i) {
    const auto idx = static_cast<Index>(i);
    const BusKind kind = c.buses()[i].kind;
    if (kind == BusKind::kSlack) {
      sets.slack = idx;
      continue;
    }
    sets.non_slack.push_back(idx);
    if (kind == BusKind::kLoad) sets.pq.push_back(idx);
  }
  return sets;
}

struct Attempt {
  Vector v_mag;
  Vector v_ang;
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;
  std::string diagnostic;
};

Attempt newton_raphson(const Eigen::MatrixXcd& y, const BusSets& sets, const Vector& p_spec, const Vector& q_spec,
                       Vector v_mag, Vector v_ang, const PowerFlowOptions& opts) {
  const Index n_ns = static_cast<Index>(sets.non_slack.size());
  const Index n_pq = static_cast<Index>(sets.pq.size());
  const Index dim = n_ns + n_pq;

  Attempt out;
  Vector mismatch(dim);
  for (int iter = 0;; ++iter) {
    const Eigen::VectorXcd v = (v_mag.array().cast<cd>() * (cd(0.0, 1.0) * v_ang.array().cast<cd>()).exp()).matrix();
    const Eigen::VectorXcd current = y * v;
    const Eigen::VectorXcd s = v.cwiseProduct(current.conjugate());
    for (Index a = 0; a < n_ns; ++a) mismatch(a) = p_spec(sets.non_slack[a]) - s(sets.non_slack[a]).real();
    for (Index a = 0; a < n_pq; ++a) mismatch(n_ns + a) = q_spec(sets.pq[a]) - s(sets.pq[a]).imag();

    out.max_mismatch = dim > 0 ? mismatch.cwiseAbs().maxCoeff() : 0.0;
    out.iterations = iter;
    if (!std::isfinite(out.max_mismatch) || out.max_mismatch > 1e10) {
      out.diagnostic = "diverged at iteration " + std::to_string(iter);
      break;
    }
    if (out.max_mismatch <= opts.tolerance) {
      out.converged = true;
      break;
    }
    if (iter >= opts.max_iterations) {
      out.diagnostic = "no convergence in " + std::to_string(opts.max_iterations) + " iterations";
      break;
    }

    const Eigen::VectorXcd v_unit = (cd(0.0, 1.0) * v_ang.array().cast<cd>()).exp().matrix();
    const Eigen::MatrixXcd ds_dang =
        cd(0.0, 1.0) * v.asDiagonal() * (Eigen::MatrixXcd(current.asDiagonal()) - y * v.asDiagonal()).conjugate();
    const Eigen::MatrixXcd ds_dmag = v.asDiagonal() * (y * v_unit.asDiagonal()).conjugate() +
                                     Eigen::MatrixXcd(v_unit.asDiagonal()) * current.conjugate().asDiagonal();

    Matrix jac(dim, dim);
    for (Index r = 0; r < n_ns; ++r) {
      const Index i = sets.non_slack[r];
      for (Index col = 0; col < n_ns; ++col) jac(r, col) = ds_dang(i, sets.non_slack[col]).real();
      for (Index col = 0; col < n_pq; ++col) jac(r, n_ns + col) = ds_dmag(i, sets.pq[col]).real();
    }
    for (Index r = 0; r < n_pq; ++r) {
      const Index i = sets.pq[r];
      for (Index col = 0; col < n_ns; ++col) jac(n_ns + r, col) = ds_dang(i, sets.non_slack[col]).imag();
      for (Index col = 0; col < n_pq; ++col) jac(n_ns + r, n_ns + col) = ds_dmag(i, sets.pq[col]).imag();
    }

    const Eigen::FullPivLU<Matrix> lu(jac);
    if (!lu.isInvertible()) {
      out.diagnostic = "singular Jacobian at iteration " + std::to_string(iter);
      break;
    }
    const Vector step = lu.solve(mismatch);
    for (Index a = 0; a < n_ns; ++a) v_ang(sets.non_slack[a]) += step(a);
    for (Index a = 0; a < n_pq; ++a) v_mag(sets.pq[a]) += step(n_ns + a);
    if (!v_mag.allFinite() || v_mag.minCoeff() <= 0.0) {
      out.diagnostic = "non-physical voltage magnitude at iteration " + std::to_string(iter + 1);
      out.iterations = iter + 1;
      break;
    }
  }
  out.v_mag = std::move(v_mag);
  out.v_ang = std::move(v_ang);
  return out;
}

}  // namespace

PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const Vector& q_injection_delta,
                                   const PowerFlowOptions& opts) {
  const auto n = static_cast<Index>(c.num_buses());
  if (q_injection_delta.size() != static_cast<Index>(c.num_loads())) {
    throw NumericalError("reactive demand delta has the wrong length");
  }
  const AdmittanceMatrix y = build_admittance(c);
  const BusSets sets = classify(c);

  Vector p_spec(n), q_spec(n);
  Vector v_flat = Vector::Ones(n);
  Vector v_setpoints(n);
  for (Index i = 0; i < n; ++i) {
    const Bus& b = c.buses()[static_cast<std::size_t>(i)];
    p_spec(i) = b.p_gen - b.p_demand;
    q_spec(i) = -b.q_demand;
    if (b.kind == BusKind::kLoad) q_spec(i) -= q_injection_delta(i);
    if (b.kind != BusKind::kLoad) v_flat(i) = b.v_setpoint;
    v_setpoints(i) = b.v_setpoint;
  }

  Attempt result = newton_raphson(y.y, sets, p_spec, q_spec, v_flat, Vector::Zero(n), opts);
  if (!result.converged && opts.restart_from_setpoints) {
    Attempt retry = newton_raphson(y.y, sets, p_spec, q_spec, v_setpoints, Vector::Zero(n), opts);
    if (retry.converged) {
      result = std::move(retry);
    } else {
      result.diagnostic += "; restart from setpoints: " + retry.diagnostic;
    }
  }

  PowerFlowSolution sol;
  sol.v_mag = std::move(result.v_mag);
  sol.v_ang = std::move(result.v_ang);
  sol.converged = result.converged;
  sol.iterations = result.iterations;
  sol.max_mismatch = result.max_mismatch;
  sol.diagnostic = std::move(result.diagnostic);
  return sol;
}

Eigen::VectorXcd bus_injections(const AdmittanceMatrix& y, const Vector& v_mag, const Vector& v_ang) {
  const Eigen::VectorXcd v = (v_mag.array().cast<cd>() * (cd(0.0, 1.0) * v_ang.array().cast<cd>()).exp()).matrix();
  return v.cwiseProduct((y.y * v).conjugate());
}

VoltageCheck check_load_voltages(const PowerSystemCase& c, const Vector& q_delta, const BandCheckOptions& opts) {
  const PowerFlowSolution pf = solve_power_flow(c, q_delta, opts.power_flow);
  VoltageCheck check;
  check.converged = pf.converged;
  if (!pf.converged) {
    check.worst_violation = std::numeric_limits<double>::infinity();
    return check;
  }
  check.worst_violation = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < c.num_loads(); ++k) {
    const Bus& b = c.buses()[k];
    const double lo = opts.band ? opts.band->v_min : b.v_min;
    const double hi = opts.band ? opts.band->v_max : b.v_max;
    const double v = pf.v_mag(static_cast<Index>(k));
    const double violation = std::max(lo - v, v - hi);
    if (violation > check.worst_violation) {
      check.worst_violation = violation;
      check.worst_bus_id = b.id;
      check.worst_voltage = v;
    }
  }
  check.in_band = check.worst_violation <= 0.0;
  return check;
}

VoltageCheck verify_voltage_range(const PowerSystemCase& c, const Vector& q_comp, const BandCheckOptions& opts) {
  return check_load_voltages(c, -q_comp, opts);
}

double covert_limit(const PowerSystemCase& c, std::size_t load_k, const CovertOptions& opts) {
  const std::size_t k_loads = c.num_loads();
  if (load_k >= k_loads) throw NumericalError("load index " + std::to_string(load_k) + " out of range");
  auto in_band = [&](double dq) {
    Vector delta = Vector::Zero(static_cast<Index>(k_loads));
    delta(static_cast<Index>(load_k)) = dq;
    return check_load_voltages(c, delta, opts.check).in_band;
  };
  {
    const VoltageCheck nominal = check_load_voltages(c, Vector::Zero(static_cast<Index>(k_loads)), opts.check);
    if (!nominal.in_band) {
      throw NumericalError(nominal.converged ? "nominal operating point out of band at bus " +
                                                   std::to_string(nominal.worst_bus_id) + " (" +
                                                   std::to_string(nominal.worst_voltage) + " pu)"
                                             : "nominal power flow does not converge");
    }
  }
  if (in_band(opts.ceiling)) return opts.ceiling;
  double lo = 0.0;
  double hi = opts.ceiling;
  while (hi - lo > opts.tolerance) {
    const double mid = 0.5 * (lo + hi);
    (in_band(mid) ? lo : hi) = mid;
  }
  return lo;
}

Vector covert_limits(const PowerSystemCase& c, const CovertOptions& opts, unsigned jobs) {
  Vector limits(static_cast<Index>(c.num_loads()));
  parallel_for(c.num_loads(), jobs, [&](std::size_t k) { limits(static_cast<Index>(k)) = covert_limit(c, k, opts); });
  return limits;
}

}  // namespace vsg
