#pragma once

// Network matrices, the voltage instability index, Newton-Raphson power flow
// and the voltage-band (covertness) limits derived from it.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vsg/case_model.hpp"

namespace vsg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Bus admittance matrix Y = G + jB in the case's canonical (load-first) order.
struct AdmittanceMatrix {
  Eigen::MatrixXcd y;

  Matrix conductance() const { return y.real(); }
  Matrix susceptance() const { return y.imag(); }
};

AdmittanceMatrix build_admittance(const PowerSystemCase& c);

struct SusceptancePartition {
  Matrix b_ll;  // K x K
  Matrix b_lg;  // K x M
  Matrix b_gl;  // M x K
  Matrix b_gg;  // M x M
};

/// Slices B into load/generator blocks. Throws NumericalError if B_LL is
/// singular or B_GL differs from B_LG^T.
SusceptancePartition partition_susceptance(const AdmittanceMatrix& y, const PowerSystemCase& c);

/// V_L* = -B_LL^{-1} B_LG V_G. Throws NumericalError on a non-positive entry.
Vector open_circuit_voltages(const SusceptancePartition& p, const Vector& v_gen);

/// Q_crit = 1/4 diag(V_L*) B_LL diag(V_L*).
Matrix stiffness_matrix(const Vector& v_open, const Matrix& b_ll);

/// How the stress vector s = -Q_crit^{-1} Q_L is reduced to a scalar.
///
/// kMaxStress takes max_k s_k; kAbsolute takes max_k |s_k|. The two agree
/// whenever Q_L >= 0, because Q_crit^{-1} is entrywise non-positive. They
/// differ once compensation drives net demand negative: kAbsolute then
/// counts over-compensation as stress.
enum class IndexNorm { kMaxStress, kAbsolute };

std::string_view to_string(IndexNorm norm);
std::optional<IndexNorm> parse_index_norm(std::string_view text);

struct IndexValue {
  double delta = 0.0;
  std::size_t stressed_load = 0;  // argmax, internal load index
};

IndexValue instability_index(const Matrix& q_crit_inv, const Vector& q_load,
                             IndexNorm norm = IndexNorm::kMaxStress);

/// Everything needed to evaluate the instability index of one network.
struct StabilityModel {
  SusceptancePartition partition;
  Vector v_gen;
  Vector v_open;
  Matrix q_crit;
  Matrix q_crit_inv;
  Vector q_nominal;
  double delta0 = 0.0;
  std::size_t stressed_load = 0;
  double q_crit_rcond = 0.0;
  IndexNorm norm = IndexNorm::kMaxStress;
  std::vector<int> load_ids;
  std::string case_name;

  std::size_t num_loads() const { return static_cast<std::size_t>(q_nominal.size()); }

  IndexValue index(const Vector& q_load) const { return instability_index(q_crit_inv, q_load, norm); }

  /// True when every entry of Q_crit^{-1} is <= tol.
  bool sign_structure_ok(double tol = 1e-12) const;
};

/// V_G is taken from the generator/slack voltage setpoints.
StabilityModel build_stability_model(const PowerSystemCase& c, IndexNorm norm = IndexNorm::kMaxStress);

// ---------------------------------------------------------------------------
// Power flow

struct PowerFlowOptions {
  double tolerance = 1e-8;
  int max_iterations = 50;
  bool restart_from_setpoints = true;
};

struct PowerFlowSolution {
  Vector v_mag;
  Vector v_ang;  // rad
  bool converged = false;
  int iterations = 0;
  double max_mismatch = 0.0;
  std::string diagnostic;
};

/// Polar Newton-Raphson from a flat start. q_injection_delta (length K) is
/// added to the load reactive demands. Non-convergence is reported in the
/// result, never thrown.
PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const Vector& q_injection_delta,
                                   const PowerFlowOptions& opts = {});

inline PowerFlowSolution solve_power_flow(const PowerSystemCase& c, const PowerFlowOptions& opts = {}) {
  return solve_power_flow(c, Vector::Zero(static_cast<Eigen::Index>(c.num_loads())), opts);
}

/// Complex bus power injections S = V conj(Y V) for a given state.
Eigen::VectorXcd bus_injections(const AdmittanceMatrix& y, const Vector& v_mag, const Vector& v_ang);

struct VoltageBand {
  double v_min = 0.9;
  double v_max = 1.1;
};

struct BandCheckOptions {
  std::optional<VoltageBand> band;  // overrides per-bus limits when set
  PowerFlowOptions power_flow;
};

struct VoltageCheck {
  bool in_band = false;
  bool converged = false;
  int worst_bus_id = 0;
  double worst_voltage = 0.0;
  double worst_violation = 0.0;  // pu outside the band; <= 0 when in band
};

/// Runs power flow with load demands changed by q_delta and checks every load
/// voltage against its band.
VoltageCheck check_load_voltages(const PowerSystemCase& c, const Vector& q_delta, const BandCheckOptions& opts = {});

/// Power flow with load reactive demands reduced by q_comp.
VoltageCheck verify_voltage_range(const PowerSystemCase& c, const Vector& q_comp, const BandCheckOptions& opts = {});

struct CovertOptions {
  BandCheckOptions check;
  double tolerance = 1e-4;
  double ceiling = 10.0;
};

/// Largest reactive-demand increment at load k that keeps power flow
/// convergent and every load voltage in band, by bisection.
double covert_limit(const PowerSystemCase& c, std::size_t load_k, const CovertOptions& opts = {});

/// covert_limit for every load; loads are evaluated on up to `jobs` threads.
Vector covert_limits(const PowerSystemCase& c, const CovertOptions& opts = {}, unsigned jobs = 0);

}  // namespace vsg
