#pragma once

// Attacker/defender action spaces, the outcome model and the clipped
// instability utilities of the zero-sum investment game.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vsg/stability.hpp"

namespace vsg {

enum class Player { kAttacker, kDefender };

std::string_view to_string(Player p);

/// Investment levels on the grid {0, 1/(L-1), ..., 1}, stored as integer
/// numerators so budget checks are exact.
struct ActionVector {
  Player owner = Player::kAttacker;
  int levels = 2;                // L
  std::vector<int> numerators;   // each in [0, L-1]

  std::size_t size() const { return numerators.size(); }
  double level(std::size_t k) const { return static_cast<double>(numerators[k]) / (levels - 1); }
  int l1_numerator() const;
  double l1() const { return static_cast<double>(l1_numerator()) / (levels - 1); }
  double cost(double gamma) const { return gamma * l1(); }

  /// Numerators joined by '/', e.g. "2/0/1".
  std::string to_string() const;

  bool operator==(const ActionVector&) const = default;
};

ActionVector zero_action(Player owner, int levels, std::size_t k);

/// Bit k set iff the attack on the k-th targeted load succeeds.
struct Outcome {
  std::uint32_t mask = 0;

  bool success(std::size_t k) const { return (mask >> k) & 1u; }
};

/// Largest numerator sum n with gamma * n / (L-1) <= 1 + 1e-12.
int budget_numerator(double gamma, int levels);

struct GameSpec {
  std::shared_ptr<const StabilityModel> model;
  std::vector<std::size_t> load_subset;  // internal load indices targeted by both players
  double gamma_a = 1.0;
  double gamma_d = 1.0;
  int levels_a = 3;
  int levels_d = 3;
  Vector qa_max;  // per model load, pu
  Vector qd_max;  // per model load, pu

  std::size_t k_loads() const { return load_subset.size(); }
  double gamma(Player p) const { return p == Player::kAttacker ? gamma_a : gamma_d; }
  int levels(Player p) const { return p == Player::kAttacker ? levels_a : levels_d; }
};

/// Throws ValidationError on a violated invariant.
void validate_game_spec(const GameSpec& spec);

/// Spec over every load of the model.
GameSpec make_full_spec(std::shared_ptr<const StabilityModel> model, Vector qa_max, Vector qd_max);

/// Number of grid vectors of length k with gamma * l1 <= 1, without
/// enumerating them. Saturates at UINT64_MAX.
std::uint64_t count_feasible_actions(std::size_t k, int levels, double gamma);

/// All budget-feasible actions in ascending lexicographic order of the
/// numerators. Throws CapacityError when the count exceeds `cap`.
std::vector<ActionVector> enumerate_feasible_actions(const GameSpec& spec, Player owner,
                                                     std::uint64_t cap = 10'000'000);

double outcome_probability(const ActionVector& a, Outcome o);

/// Entrywise mask * qa (both of subset length).
Vector outcome_demand(Outcome o, const Vector& qa);

/// Entrywise d_k * qd_max_k.
Vector defender_compensation(const ActionVector& d, const Vector& qd_max);

/// Clip(delta; delta0, 1) - delta0.
double clipped_utility(double delta, double delta0);

/// Attacker utility of every outcome for one defender action.
struct UtilityTable {
  ActionVector defender_action;
  std::vector<double> per_outcome;  // indexed by mask
  std::vector<double> raw_delta;    // unclipped index per mask

  std::size_t num_outcomes() const { return per_outcome.size(); }
};

/// Net demand of every outcome is Q0 + q_a(mask) - q_d(d); loads outside the
/// subset keep their nominal demand.
UtilityTable per_outcome_utility(const GameSpec& spec, const ActionVector& d);

/// Expected attacker utility, folding one load at a time.
double expected_attacker_utility(const ActionVector& a, const UtilityTable& table);

inline double expected_defender_utility(const ActionVector& a, const UtilityTable& table) {
  return -expected_attacker_utility(a, table);
}

}  // namespace vsg
