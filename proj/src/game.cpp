#include "vsg/game.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "vsg/error.hpp"

namespace vsg {
namespace {

constexpr double kBudgetSlack = 1e-12;
constexpr std::size_t kMaxTargetedLoads = 22;

}  // namespace

std::string_view to_string(Player p) { return p == Player::kAttacker ? "attacker" : "defender"; }

int ActionVector::l1_numerator() const { return std::accumulate(numerators.begin(), numerators.end(), 0); }

std::string ActionVector::to_string() const {
  std::string out;
  for (std::size_t k = 0; k < numerators.size(); ++k) {
    if (k > 0) out.push_back('/');
    out += std::to_string(numerators[k]);
  }
  return out;
}

ActionVector zero_action(Player owner, int levels, std::size_t k) {
  return ActionVector{owner, levels, std::vector<int>(k, 0)};
}

int budget_numerator(double gamma, int levels) {
  const int steps = levels - 1;
  const double raw = (1.0 + kBudgetSlack) * steps / gamma;
  if (!(raw < static_cast<double>(std::numeric_limits<int>::max()))) return std::numeric_limits<int>::max();
  int n = static_cast<int>(std::floor(raw));
  while (n > 0 && gamma * n / steps > 1.0 + kBudgetSlack) --n;
  while (gamma * (n + 1) / steps <= 1.0 + kBudgetSlack) ++n;
  return n;
}

void validate_game_spec(const GameSpec& spec) {
  if (!spec.model) throw ValidationError("game spec has no stability model");
  const auto k_model = static_cast<Eigen::Index>(spec.model->num_loads());
  if (!(spec.gamma_a > 0.0) || !std::isfinite(spec.gamma_a)) throw ValidationError("gamma_a must be positive");
  if (!(spec.gamma_d > 0.0) || !std::isfinite(spec.gamma_d)) throw ValidationError("gamma_d must be positive");
  if (spec.levels_a < 2) throw ValidationError("levels_a must be at least 2");
  if (spec.levels_d < 2) throw ValidationError("levels_d must be at least 2");
  if (spec.qa_max.size() != k_model) throw ValidationError("qa_max length differs from the number of loads");
  if (spec.qd_max.size() != k_model) throw ValidationError("qd_max length differs from the number of loads");
  if ((spec.qa_max.array() < 0.0).any()) throw ValidationError("qa_max has a negative entry");
  if ((spec.qd_max.array() < 0.0).any()) throw ValidationError("qd_max has a negative entry");
  std::set<std::size_t> seen;
  for (std::size_t idx : spec.load_subset) {
    if (idx >= spec.model->num_loads()) {
      throw ValidationError("load subset index " + std::to_string(idx) + " out of range");
    }
    if (!seen.insert(idx).second) throw ValidationError("load subset repeats index " + std::to_string(idx));
  }
  if (spec.k_loads() > kMaxTargetedLoads) {
    throw CapacityError("outcome table for " + std::to_string(spec.k_loads()) + " targeted loads",
                        std::uint64_t{1} << std::min<std::size_t>(spec.k_loads(), 63),
                        std::uint64_t{1} << kMaxTargetedLoads);
  }
}

GameSpec make_full_spec(std::shared_ptr<const StabilityModel> model, Vector qa_max, Vector qd_max) {
  GameSpec spec;
  spec.load_subset.resize(model->num_loads());
  std::iota(spec.load_subset.begin(), spec.load_subset.end(), std::size_t{0});
  spec.model = std::move(model);
  spec.qa_max = std::move(qa_max);
  spec.qd_max = std::move(qd_max);
  return spec;
}

std::uint64_t count_feasible_actions(std::size_t k, int levels, double gamma) {
  const int budget = std::min(budget_numerator(gamma, levels), static_cast<int>(k) * (levels - 1));
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  // ways[s] = number of prefixes with numerator sum s
  std::vector<std::uint64_t> ways(static_cast<std::size_t>(budget) + 1, 0);
  ways[0] = 1;
  for (std::size_t pos = 0; pos < k; ++pos) {
    std::vector<std::uint64_t> next(ways.size(), 0);
    for (int s = 0; s <= budget; ++s) {
      if (ways[s] == 0) continue;
      for (int v = 0; v < levels && s + v <= budget; ++v) {
        next[s + v] = next[s + v] > kMax - ways[s] ? kMax : next[s + v] + ways[s];
      }
    }
    ways = std::move(next);
  }
  std::uint64_t total = 0;
  for (std::uint64_t w : ways) total = total > kMax - w ? kMax : total + w;
  return total;
}

std::vector<ActionVector> enumerate_feasible_actions(const GameSpec& spec, Player owner, std::uint64_t cap) {
  const std::size_t k = spec.k_loads();
  const int levels = spec.levels(owner);
  const double gamma = spec.gamma(owner);
  const std::uint64_t count = count_feasible_actions(k, levels, gamma);
  if (count > cap) throw CapacityError(std::string(to_string(owner)) + " action space", count, cap);

  const int budget = budget_numerator(gamma, levels);
  std::vector<ActionVector> out;
  out.reserve(static_cast<std::size_t>(count));
  std::vector<int> current(k, 0);
  // Odometer over the last position first gives lexicographic order; a
  // position that overflows the budget resets and carries left.
  int sum = 0;
  while (true) {
    out.push_back(ActionVector{owner, levels, current});
    std::size_t pos = k;
    while (pos > 0) {
      --pos;
      if (current[pos] + 1 < levels && sum + 1 <= budget) {
        ++current[pos];
        ++sum;
        break;
      }
      sum -= current[pos];
      current[pos] = 0;
      if (pos == 0) return out;
    }
    if (k == 0) return out;
  }
}

double outcome_probability(const ActionVector& a, Outcome o) {
  double p = 1.0;
  for (std::size_t k = 0; k < a.size(); ++k) p *= o.success(k) ? a.level(k) : 1.0 - a.level(k);
  return p;
}

Vector outcome_demand(Outcome o, const Vector& qa) {
  Vector out = Vector::Zero(qa.size());
  for (Eigen::Index k = 0; k < qa.size(); ++k) {
    if (o.success(static_cast<std::size_t>(k))) out(k) = qa(k);
  }
  return out;
}

Vector defender_compensation(const ActionVector& d, const Vector& qd_max) {
  if (static_cast<Eigen::Index>(d.size()) != qd_max.size()) {
    throw ValidationError("defender action length differs from qd_max");
  }
  Vector out(qd_max.size());
  for (Eigen::Index k = 0; k < qd_max.size(); ++k) out(k) = d.level(static_cast<std::size_t>(k)) * qd_max(k);
  return out;
}

double clipped_utility(double delta, double delta0) { return std::clamp(delta, delta0, 1.0) - delta0; }

UtilityTable per_outcome_utility(const GameSpec& spec, const ActionVector& d) {
  const StabilityModel& m = *spec.model;
  const std::size_t k = spec.k_loads();
  if (d.size() != k) throw ValidationError("defender action length differs from the load subset");

  Vector q = m.q_nominal;
  for (std::size_t j = 0; j < k; ++j) {
    const auto idx = static_cast<Eigen::Index>(spec.load_subset[j]);
    q(idx) -= d.level(j) * spec.qd_max(idx);
  }
  const auto n = static_cast<Eigen::Index>(m.num_loads());
  const std::size_t outcomes = std::size_t{1} << k;

  // Stress is linear in demand: s(mask) = s(mask without its lowest bit) + column.
  Matrix stress(n, static_cast<Eigen::Index>(outcomes));
  stress.col(0) = -(m.q_crit_inv * q);
  std::vector<Vector> columns(k);
  for (std::size_t j = 0; j < k; ++j) {
    const auto idx = static_cast<Eigen::Index>(spec.load_subset[j]);
    columns[j] = -m.q_crit_inv.col(idx) * spec.qa_max(idx);
  }

  UtilityTable table;
  table.defender_action = d;
  table.per_outcome.resize(outcomes);
  table.raw_delta.resize(outcomes);
  for (std::size_t mask = 0; mask < outcomes; ++mask) {
    const auto col = static_cast<Eigen::Index>(mask);
    if (mask != 0) {
      const auto low = static_cast<std::size_t>(std::countr_zero(mask));
      stress.col(col) = stress.col(static_cast<Eigen::Index>(mask & (mask - 1))) + columns[low];
    }
    const double delta = m.norm == IndexNorm::kMaxStress ? stress.col(col).maxCoeff()
                                                         : stress.col(col).cwiseAbs().maxCoeff();
    table.raw_delta[mask] = delta;
    table.per_outcome[mask] = clipped_utility(delta, m.delta0);
  }
  return table;
}

double expected_attacker_utility(const ActionVector& a, const UtilityTable& table) {
  const std::size_t k = a.size();
  if ((std::size_t{1} << k) != table.num_outcomes()) {
    throw ValidationError("attacker action length does not match the utility table");
  }
  std::vector<double> u = table.per_outcome;
  // Fold the highest load first; after step j only masks below 2^j remain live.
  for (std::size_t j = k; j-- > 0;) {
    const double p = a.level(j);
    const std::size_t bit = std::size_t{1} << j;
    for (std::size_t mask = 0; mask < bit; ++mask) u[mask] = (1.0 - p) * u[mask] + p * u[mask | bit];
  }
  return u[0];
}

}  // namespace vsg
