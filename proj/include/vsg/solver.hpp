#pragma once

// Cost-based backward induction for the attacker/defender game, a
// brute-force Stackelberg-equilibrium oracle, load importance ranking and
// cost sweeps.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vsg/game.hpp"

namespace vsg {

struct SolverOptions {
  double value_tol = 1e-9;
  unsigned jobs = 0;  // 0 = hardware concurrency
  std::uint64_t action_cap = 10'000'000;
  std::uint64_t oracle_pair_cap = 100'000;
  std::uint64_t payoff_matrix_cap = std::uint64_t{1} << 25;  // entries reused across a sweep
};

struct BestResponseSet {
  ActionVector defender_action;
  std::vector<ActionVector> responses;  // lexicographic order
  double best_value = 0.0;
};

/// Every feasible attacker action within value_tol of the best reply to d.
BestResponseSet best_response_set(const GameSpec& spec, const ActionVector& d, const SolverOptions& opts = {});

/// Smallest l1 norm, then lexicographically smallest numerators.
ActionVector min_cost_best_response(const BestResponseSet& brs);

/// Strict order used for every cost tie-break: l1 numerator, then lexicographic.
bool cheaper(const ActionVector& x, const ActionVector& y);

struct Equilibrium {
  ActionVector attacker_action;
  ActionVector defender_action;
  double attacker_utility = 0.0;
  double post_attack_delta_max = 0.0;  // raw index when every attack succeeds, under d*
  double attacker_cost = 0.0;
  double defender_cost = 0.0;
  std::size_t defender_candidates = 0;  // defender actions tied at the optimum
};

/// Defender leads, attacker follows with its cheapest best response; among
/// payoff-optimal defender actions the cheapest is chosen, then the one whose
/// induced attack is cheapest, then lexicographic.
Equilibrium solve_cbse(const GameSpec& spec, const SolverOptions& opts = {});

struct StackelbergPoint {
  ActionVector attacker_action;
  ActionVector defender_action;
  double attacker_utility = 0.0;
};

/// All (g, d) with d payoff-optimal for the defender and g any attacker best
/// response to d, with no cost filtering. Evaluates outcomes directly (no
/// utility table reuse) so it can serve as an independent check on
/// solve_cbse. Refuses instances above oracle_pair_cap strategy pairs.
std::vector<StackelbergPoint> enumerate_all_ses(const GameSpec& spec, const SolverOptions& opts = {});

struct ImportanceRanking {
  std::vector<int> load_ids;
  std::vector<double> attacker_scores;  // delta increase when load k is attacked alone
  std::vector<double> defender_scores;  // delta decrease when load k is compensated alone
  std::vector<std::size_t> attacker_order;  // internal indices, most important first
  std::vector<std::size_t> defender_order;
};

ImportanceRanking importance_ranking(const StabilityModel& model, const Vector& qa_max, double qd_probe);

/// Union of both players' top-n loads, ascending internal index.
std::vector<std::size_t> select_subset(const ImportanceRanking& ranking, std::size_t n_per_player);

struct IndividualOptimum {
  ActionVector attacker_action;  // best reply to zero defense
  ActionVector defender_action;  // best protection against a certain full attack
  double attacker_utility = 0.0; // realized when the two are played together
};

IndividualOptimum individual_optimization_baseline(const GameSpec& spec, const SolverOptions& opts = {});

/// Inclusive grid lo, lo+step, ... <= hi (+1e-9).
std::vector<double> make_grid(double lo, double hi, double step);

struct SweepCell {
  double gamma_a = 0.0;
  double gamma_d = 0.0;
  int levels_a = 0;
  int levels_d = 0;
  std::optional<Equilibrium> equilibrium;
  std::optional<IndividualOptimum> individual;
  std::string status = "ok";  // or the error message that stopped the cell
};

struct SweepResult {
  std::string case_name;
  std::vector<int> subset_ids;
  std::vector<SweepCell> cells;  // row-major: gamma_a outer, gamma_d inner
  std::size_t rows = 0;          // |gamma_a grid|
  std::size_t cols = 0;          // |gamma_d grid|
  std::string started_at;
  std::string finished_at;

  const SweepCell& at(std::size_t row, std::size_t col) const { return cells.at(row * cols + col); }
};

/// CBSE (and optionally the individual-optimization pair) at every grid cell.
/// A cell that fails records its error in `status`; the sweep continues.
SweepResult cost_sweep(const GameSpec& tmpl, const std::vector<double>& gamma_a_grid,
                       const std::vector<double>& gamma_d_grid, const SolverOptions& opts = {},
                       bool with_individual = true);

struct MonotonicityAudit {
  std::size_t checked = 0;
  std::vector<std::string> violations;

  bool ok() const { return violations.empty(); }
};

/// Attacker utility must not increase along gamma_a and must not decrease
/// along gamma_d.
MonotonicityAudit audit_monotonicity(const SweepResult& sweep, double tol = 1e-8);

/// Columns: gamma_a, gamma_d, L_a, L_d, u_attacker, delta_max, attacker_cost,
/// defender_cost, a_levels, d_levels, u_io, status.
std::string sweep_to_csv(const SweepResult& sweep);
std::string sweep_to_json(const SweepResult& sweep, int indent = 2);

}  // namespace vsg
