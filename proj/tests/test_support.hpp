#pragma once

#include <memory>
#include <random>
#include <string>

#include "vsg/case_model.hpp"
#include "vsg/game.hpp"
#include "vsg/stability.hpp"

namespace vsg::testing {

inline std::string data_path(const std::string& name) { return std::string(VSG_TEST_DATA_DIR) + "/" + name; }

inline const PowerSystemCase& case9() {
  static const PowerSystemCase c = load_case(data_path("case9.m"));
  return c;
}

inline const PowerSystemCase& case39() {
  static const PowerSystemCase c = load_case(data_path("case39.m"));
  return c;
}

/// Slack bus 1 feeding load bus 2 through r + jx, with optional tap on the
/// slack side.
inline PowerSystemCase two_bus(double r, double x, double q_load = 0.0, double tap = 1.0, double b = 0.0) {
  Bus slack;
  slack.id = 1;
  slack.kind = BusKind::kSlack;
  slack.v_setpoint = 1.0;
  Bus load;
  load.id = 2;
  load.kind = BusKind::kLoad;
  load.q_demand = q_load;
  Branch br;
  br.from_bus = 1;
  br.to_bus = 2;
  br.r = r;
  br.x = x;
  br.b_charging = b;
  br.tap_ratio = tap;
  return PowerSystemCase("two_bus", 100.0, {slack, load}, {br});
}

/// A synthetic index model: Q_crit^{-1} entrywise negative, positive nominal
/// demand, nominal index in (0, 1).
inline std::shared_ptr<StabilityModel> toy_model(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> diag(0.5, 1.5);
  std::uniform_real_distribution<double> off(0.0, 0.4);
  std::uniform_real_distribution<double> demand(0.05, 0.4);
  auto m = std::make_shared<StabilityModel>();
  m->q_crit_inv = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < m->q_crit_inv.rows(); ++i) {
    m->q_crit_inv(i, i) = -diag(rng);
    for (Eigen::Index j = 0; j < i; ++j) m->q_crit_inv(i, j) = m->q_crit_inv(j, i) = -off(rng);
  }
  m->q_crit = m->q_crit_inv.inverse();
  m->q_nominal.resize(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < m->q_nominal.size(); ++i) m->q_nominal(i) = demand(rng);
  for (std::size_t i = 0; i < k; ++i) m->load_ids.push_back(static_cast<int>(i + 1));
  m->case_name = "toy";
  const IndexValue v = m->index(m->q_nominal);
  m->delta0 = v.delta;
  m->stressed_load = v.stressed_load;
  return m;
}

}  // namespace vsg::testing
