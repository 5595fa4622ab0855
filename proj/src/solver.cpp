#include "vsg/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "vsg/error.hpp"
#include "vsg/parallel.hpp"

namespace vsg {
namespace {

// Feasible actions sorted cheapest first, so the feasible set at any larger
// cost per load is a prefix.
struct RankedActions {
  std::vector<ActionVector> actions;

  std::size_t prefix(double gamma, int levels) const {
    const int budget = budget_numerator(gamma, levels);
    return static_cast<std::size_t>(
        std::partition_point(actions.begin(), actions.end(),
                             [&](const ActionVector& a) { return a.l1_numerator() <= budget; }) -
        actions.begin());
  }
};

RankedActions rank_actions(const GameSpec& spec, Player owner, std::uint64_t cap) {
  RankedActions ranked{enumerate_feasible_actions(spec, owner, cap)};
  std::stable_sort(ranked.actions.begin(), ranked.actions.end(), cheaper);
  return ranked;
}

struct RowBest {
  double value = 0.0;         // best attacker utility against this defense
  std::size_t response = 0;   // cheapest attacker action within tolerance
};

RowBest best_in_row(const double* row, std::size_t na, double tol) {
  RowBest best;
  best.value = *std::max_element(row, row + na);
  for (std::size_t j = 0; j < na; ++j) {
    if (row[j] >= best.value - tol) {
      best.response = j;
      break;
    }
  }
  return best;
}

struct DefenderChoice {
  std::size_t index = 0;
  std::size_t candidates = 0;
};

// Defender maximizes -U^a at the induced response; ties go to the cheaper
// defense, then the cheaper induced attack, then scan order.
DefenderChoice select_defender(const std::vector<RowBest>& rows, std::size_t nd, const RankedActions& defenders,
                               const RankedActions& attackers, std::size_t row_stride, const double* payoff,
                               double tol) {
  auto realized = [&](std::size_t d) {
    return payoff ? payoff[d * row_stride + rows[d].response] : rows[d].value;
  };
  double best_ud = -realized(0);
  for (std::size_t d = 1; d < nd; ++d) best_ud = std::max(best_ud, -realized(d));

  DefenderChoice choice;
  bool found = false;
  for (std::size_t d = 0; d < nd; ++d) {
    if (-realized(d) < best_ud - tol) continue;
    ++choice.candidates;
    if (!found) {
      choice.index = d;
      found = true;
      continue;
    }
    const int dl1 = defenders.actions[d].l1_numerator();
    const int cl1 = defenders.actions[choice.index].l1_numerator();
    const int al1 = attackers.actions[rows[d].response].l1_numerator();
    const int cal1 = attackers.actions[rows[choice.index].response].l1_numerator();
    if (dl1 < cl1 || (dl1 == cl1 && al1 < cal1)) choice.index = d;
  }
  return choice;
}

std::size_t all_ones_mask(std::size_t k) { return (std::size_t{1} << k) - 1; }

Equilibrium make_equilibrium(const GameSpec& spec, const ActionVector& a, const ActionVector& d, double utility,
                             double delta_full, std::size_t candidates) {
  Equilibrium eq;
  eq.attacker_action = a;
  eq.defender_action = d;
  eq.attacker_utility = utility;
  eq.post_attack_delta_max = delta_full;
  eq.attacker_cost = a.cost(spec.gamma_a);
  eq.defender_cost = d.cost(spec.gamma_d);
  eq.defender_candidates = candidates;
  return eq;
}

// Cheapest defense minimizing the utility of the all-success outcome.
std::size_t individual_defender(const std::vector<double>& full_attack_utility, std::size_t nd, double tol) {
  const double best = *std::min_element(full_attack_utility.begin(), full_attack_utility.begin() + nd);
  for (std::size_t d = 0; d < nd; ++d) {
    if (full_attack_utility[d] <= best + tol) return d;
  }
  return 0;
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string fmt(double v, const char* spec = "%.10g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

}  // namespace

bool cheaper(const ActionVector& x, const ActionVector& y) {
  const int lx = x.l1_numerator();
  const int ly = y.l1_numerator();
  if (lx != ly) return lx < ly;
  return x.numerators < y.numerators;
}

BestResponseSet best_response_set(const GameSpec& spec, const ActionVector& d, const SolverOptions& opts) {
  validate_game_spec(spec);
  const auto attackers = enumerate_feasible_actions(spec, Player::kAttacker, opts.action_cap);
  const UtilityTable table = per_outcome_utility(spec, d);
  std::vector<double> values(attackers.size());
  for (std::size_t j = 0; j < attackers.size(); ++j) values[j] = expected_attacker_utility(attackers[j], table);

  BestResponseSet brs;
  brs.defender_action = d;
  brs.best_value = *std::max_element(values.begin(), values.end());
  for (std::size_t j = 0; j < attackers.size(); ++j) {
    if (values[j] >= brs.best_value - opts.value_tol) brs.responses.push_back(attackers[j]);
  }
  return brs;
}

ActionVector min_cost_best_response(const BestResponseSet& brs) {
  if (brs.responses.empty()) throw ValidationError("best-response set is empty");
  return *std::min_element(brs.responses.begin(), brs.responses.end(), cheaper);
}

Equilibrium solve_cbse(const GameSpec& spec, const SolverOptions& opts) {
  validate_game_spec(spec);
  const RankedActions defenders = rank_actions(spec, Player::kDefender, opts.action_cap);
  const RankedActions attackers = rank_actions(spec, Player::kAttacker, opts.action_cap);
  const std::size_t nd = defenders.actions.size();
  const std::size_t na = attackers.actions.size();
  const std::size_t full = all_ones_mask(spec.k_loads());

  std::vector<RowBest> rows(nd);
  std::vector<double> delta_full(nd);
  parallel_for(nd, opts.jobs, [&](std::size_t d) {
    const UtilityTable table = per_outcome_utility(spec, defenders.actions[d]);
    std::vector<double> values(na);
    for (std::size_t j = 0; j < na; ++j) values[j] = expected_attacker_utility(attackers.actions[j], table);
    rows[d] = best_in_row(values.data(), na, opts.value_tol);
    rows[d].value = values[rows[d].response];
    delta_full[d] = table.raw_delta[full];
  });

  const DefenderChoice choice = select_defender(rows, nd, defenders, attackers, 0, nullptr, opts.value_tol);
  const std::size_t d = choice.index;
  return make_equilibrium(spec, attackers.actions[rows[d].response], defenders.actions[d], rows[d].value,
                          delta_full[d], choice.candidates);
}

std::vector<StackelbergPoint> enumerate_all_ses(const GameSpec& spec, const SolverOptions& opts) {
  validate_game_spec(spec);
  const std::size_t k = spec.k_loads();
  const std::uint64_t nd_count = count_feasible_actions(k, spec.levels_d, spec.gamma_d);
  const std::uint64_t na_count = count_feasible_actions(k, spec.levels_a, spec.gamma_a);
  const std::uint64_t pairs = na_count != 0 && nd_count > std::numeric_limits<std::uint64_t>::max() / na_count
                                  ? std::numeric_limits<std::uint64_t>::max()
                                  : nd_count * na_count;
  if (pairs > opts.oracle_pair_cap) throw CapacityError("strategy pairs for SE enumeration", pairs, opts.oracle_pair_cap);

  const auto defenders = enumerate_feasible_actions(spec, Player::kDefender, opts.action_cap);
  const auto attackers = enumerate_feasible_actions(spec, Player::kAttacker, opts.action_cap);
  const StabilityModel& m = *spec.model;
  const std::size_t outcomes = std::size_t{1} << k;

  // payoff[d][a], every outcome evaluated from scratch
  std::vector<std::vector<double>> payoff(defenders.size(), std::vector<double>(attackers.size(), 0.0));
  for (std::size_t di = 0; di < defenders.size(); ++di) {
    std::vector<double> u(outcomes);
    for (std::size_t mask = 0; mask < outcomes; ++mask) {
      Vector q = m.q_nominal;
      for (std::size_t j = 0; j < k; ++j) {
        const auto idx = static_cast<Eigen::Index>(spec.load_subset[j]);
        if ((mask >> j) & 1u) q(idx) += spec.qa_max(idx);
        q(idx) -= defenders[di].level(j) * spec.qd_max(idx);
      }
      u[mask] = clipped_utility(instability_index(m.q_crit_inv, q, m.norm).delta, m.delta0);
    }
    for (std::size_t ai = 0; ai < attackers.size(); ++ai) {
      double total = 0.0;
      for (std::size_t mask = 0; mask < outcomes; ++mask) {
        total += outcome_probability(attackers[ai], Outcome{static_cast<std::uint32_t>(mask)}) * u[mask];
      }
      payoff[di][ai] = total;
    }
  }

  std::vector<double> follower_best(defenders.size());
  for (std::size_t di = 0; di < defenders.size(); ++di) {
    follower_best[di] = *std::max_element(payoff[di].begin(), payoff[di].end());
  }
  const double leader_best = -*std::min_element(follower_best.begin(), follower_best.end());

  std::vector<StackelbergPoint> out;
  for (std::size_t di = 0; di < defenders.size(); ++di) {
    if (-follower_best[di] < leader_best - opts.value_tol) continue;
    for (std::size_t ai = 0; ai < attackers.size(); ++ai) {
      if (payoff[di][ai] >= follower_best[di] - opts.value_tol) {
        out.push_back({attackers[ai], defenders[di], payoff[di][ai]});
      }
    }
  }
  return out;
}

ImportanceRanking importance_ranking(const StabilityModel& model, const Vector& qa_max, double qd_probe) {
  if (!(qd_probe > 0.0)) throw ValidationError("defender probe must be positive");
  const std::size_t k = model.num_loads();
  if (qa_max.size() != static_cast<Eigen::Index>(k)) throw ValidationError("qa_max length differs from the number of loads");

  ImportanceRanking r;
  r.load_ids = model.load_ids;
  r.attacker_scores.resize(k);
  r.defender_scores.resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto idx = static_cast<Eigen::Index>(i);
    Vector up = model.q_nominal;
    up(idx) += qa_max(idx);
    r.attacker_scores[i] = model.index(up).delta - model.delta0;
    Vector down = model.q_nominal;
    down(idx) -= qd_probe;
    r.defender_scores[i] = model.delta0 - model.index(down).delta;
  }
  auto order_by = [&](const std::vector<double>& score) {
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      if (score[x] != score[y]) return score[x] > score[y];
      return r.load_ids[x] < r.load_ids[y];
    });
    return order;
  };
  r.attacker_order = order_by(r.attacker_scores);
  r.defender_order = order_by(r.defender_scores);
  return r;
}

std::vector<std::size_t> select_subset(const ImportanceRanking& ranking, std::size_t n_per_player) {
  if (n_per_player > ranking.attacker_order.size()) {
    throw ValidationError("subset size " + std::to_string(n_per_player) + " exceeds the number of loads " +
                          std::to_string(ranking.attacker_order.size()));
  }
  std::vector<std::size_t> out(ranking.attacker_order.begin(), ranking.attacker_order.begin() + n_per_player);
  out.insert(out.end(), ranking.defender_order.begin(), ranking.defender_order.begin() + n_per_player);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

IndividualOptimum individual_optimization_baseline(const GameSpec& spec, const SolverOptions& opts) {
  validate_game_spec(spec);
  const RankedActions defenders = rank_actions(spec, Player::kDefender, opts.action_cap);
  const RankedActions attackers = rank_actions(spec, Player::kAttacker, opts.action_cap);
  const std::size_t full = all_ones_mask(spec.k_loads());

  const UtilityTable undefended = per_outcome_utility(spec, defenders.actions.front());
  std::vector<double> values(attackers.actions.size());
  for (std::size_t j = 0; j < values.size(); ++j) {
    values[j] = expected_attacker_utility(attackers.actions[j], undefended);
  }
  const RowBest attack = best_in_row(values.data(), values.size(), opts.value_tol);

  std::vector<double> full_attack(defenders.actions.size());
  parallel_for(full_attack.size(), opts.jobs, [&](std::size_t d) {
    full_attack[d] = per_outcome_utility(spec, defenders.actions[d]).per_outcome[full];
  });
  const std::size_t d = individual_defender(full_attack, full_attack.size(), opts.value_tol);

  IndividualOptimum io;
  io.attacker_action = attackers.actions[attack.response];
  io.defender_action = defenders.actions[d];
  io.attacker_utility =
      expected_attacker_utility(io.attacker_action, per_outcome_utility(spec, io.defender_action));
  return io;
}

std::vector<double> make_grid(double lo, double hi, double step) {
  if (!(step > 0.0) || !(lo > 0.0) || hi < lo) {
    throw ValidationError("grid needs 0 < lo <= hi and step > 0 (got " + fmt(lo) + ":" + fmt(hi) + ":" + fmt(step) +
                          ")");
  }
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) grid[i] = std::round((lo + static_cast<double>(i) * step) * 1e12) / 1e12;
  return grid;
}

SweepResult cost_sweep(const GameSpec& tmpl, const std::vector<double>& gamma_a_grid,
                       const std::vector<double>& gamma_d_grid, const SolverOptions& opts, bool with_individual) {
  if (gamma_a_grid.empty() || gamma_d_grid.empty()) throw ValidationError("sweep grids must be nonempty");
  for (double g : gamma_a_grid) {
    if (!(g > 0.0)) throw ValidationError("gamma_a grid entries must be positive");
  }
  for (double g : gamma_d_grid) {
    if (!(g > 0.0)) throw ValidationError("gamma_d grid entries must be positive");
  }

  SweepResult result;
  result.started_at = utc_now();
  result.case_name = tmpl.model ? tmpl.model->case_name : std::string{};
  for (std::size_t idx : tmpl.load_subset) result.subset_ids.push_back(tmpl.model->load_ids.at(idx));
  result.rows = gamma_a_grid.size();
  result.cols = gamma_d_grid.size();
  result.cells.resize(result.rows * result.cols);
  for (std::size_t r = 0; r < result.rows; ++r) {
    for (std::size_t c = 0; c < result.cols; ++c) {
      SweepCell& cell = result.cells[r * result.cols + c];
      cell.gamma_a = gamma_a_grid[r];
      cell.gamma_d = gamma_d_grid[c];
      cell.levels_a = tmpl.levels_a;
      cell.levels_d = tmpl.levels_d;
    }
  }

  // One payoff matrix at the cheapest costs serves every cell: each cell's
  // feasible sets are prefixes of the cheapest-first action lists.
  GameSpec widest = tmpl;
  widest.gamma_a = *std::min_element(gamma_a_grid.begin(), gamma_a_grid.end());
  widest.gamma_d = *std::min_element(gamma_d_grid.begin(), gamma_d_grid.end());
  validate_game_spec(widest);
  const std::uint64_t na_max = count_feasible_actions(widest.k_loads(), widest.levels_a, widest.gamma_a);
  const std::uint64_t nd_max = count_feasible_actions(widest.k_loads(), widest.levels_d, widest.gamma_d);
  const bool reuse = na_max <= opts.action_cap && nd_max <= opts.action_cap &&
                     nd_max <= opts.payoff_matrix_cap / std::max<std::uint64_t>(na_max, 1);

  if (!reuse) {
    for (SweepCell& cell : result.cells) {
      GameSpec spec = tmpl;
      spec.gamma_a = cell.gamma_a;
      spec.gamma_d = cell.gamma_d;
      try {
        cell.equilibrium = solve_cbse(spec, opts);
        if (with_individual) cell.individual = individual_optimization_baseline(spec, opts);
      } catch (const Error& e) {
        cell.status = e.what();
      }
    }
    result.finished_at = utc_now();
    return result;
  }

  const RankedActions defenders = rank_actions(widest, Player::kDefender, opts.action_cap);
  const RankedActions attackers = rank_actions(widest, Player::kAttacker, opts.action_cap);
  const std::size_t nd = defenders.actions.size();
  const std::size_t na = attackers.actions.size();
  const std::size_t full = all_ones_mask(widest.k_loads());

  std::vector<double> payoff(nd * na);
  std::vector<double> delta_full(nd);
  std::vector<double> full_attack(nd);
  parallel_for(nd, opts.jobs, [&](std::size_t d) {
    const UtilityTable table = per_outcome_utility(widest, defenders.actions[d]);
    for (std::size_t j = 0; j < na; ++j) payoff[d * na + j] = expected_attacker_utility(attackers.actions[j], table);
    delta_full[d] = table.raw_delta[full];
    full_attack[d] = table.per_outcome[full];
  });

  parallel_for(result.cells.size(), opts.jobs, [&](std::size_t i) {
    SweepCell& cell = result.cells[i];
    GameSpec spec = tmpl;
    spec.gamma_a = cell.gamma_a;
    spec.gamma_d = cell.gamma_d;
    const std::size_t na_cell = attackers.prefix(cell.gamma_a, tmpl.levels_a);
    const std::size_t nd_cell = defenders.prefix(cell.gamma_d, tmpl.levels_d);

    std::vector<RowBest> rows(nd_cell);
    for (std::size_t d = 0; d < nd_cell; ++d) rows[d] = best_in_row(&payoff[d * na], na_cell, opts.value_tol);
    const DefenderChoice choice =
        select_defender(rows, nd_cell, defenders, attackers, na, payoff.data(), opts.value_tol);
    const std::size_t d = choice.index;
    const std::size_t a = rows[d].response;
    cell.equilibrium = make_equilibrium(spec, attackers.actions[a], defenders.actions[d], payoff[d * na + a],
                                        delta_full[d], choice.candidates);

    if (with_individual) {
      const std::size_t a_io = best_in_row(&payoff[0], na_cell, opts.value_tol).response;
      const std::size_t d_io = individual_defender(full_attack, nd_cell, opts.value_tol);
      cell.individual = IndividualOptimum{attackers.actions[a_io], defenders.actions[d_io], payoff[d_io * na + a_io]};
    }
  });
  result.finished_at = utc_now();
  return result;
}

MonotonicityAudit audit_monotonicity(const SweepResult& sweep, double tol) {
  MonotonicityAudit audit;
  auto utility = [&](std::size_t r, std::size_t c) -> std::optional<double> {
    const SweepCell& cell = sweep.at(r, c);
    if (!cell.equilibrium) return std::nullopt;
    return cell.equilibrium->attacker_utility;
  };
  auto describe = [&](std::size_t r, std::size_t c) {
    const SweepCell& cell = sweep.at(r, c);
    return "(gamma_a=" + fmt(cell.gamma_a) + ", gamma_d=" + fmt(cell.gamma_d) + ", U=" +
           fmt(cell.equilibrium->attacker_utility) + ")";
  };
  auto sorted_indices = [](std::size_t n, auto gamma_of) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return gamma_of(x) < gamma_of(y); });
    return idx;
  };

  // Non-decreasing in gamma_d along each row.
  for (std::size_t r = 0; r < sweep.rows; ++r) {
    const auto order = sorted_indices(sweep.cols, [&](std::size_t c) { return sweep.at(r, c).gamma_d; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      const auto lo = utility(r, order[i - 1]);
      const auto hi = utility(r, order[i]);
      if (!lo || !hi) continue;
      ++audit.checked;
      if (*hi < *lo - tol) {
        audit.violations.push_back("utility decreases in gamma_d: " + describe(r, order[i - 1]) + " -> " +
                                   describe(r, order[i]));
      }
    }
  }
  // Non-increasing in gamma_a along each column.
  for (std::size_t c = 0; c < sweep.cols; ++c) {
    const auto order = sorted_indices(sweep.rows, [&](std::size_t r) { return sweep.at(r, c).gamma_a; });
    for (std::size_t i = 1; i < order.size(); ++i) {
      const auto lo = utility(order[i - 1], c);
      const auto hi = utility(order[i], c);
      if (!lo || !hi) continue;
      ++audit.checked;
      if (*hi > *lo + tol) {
        audit.violations.push_back("utility increases in gamma_a: " + describe(order[i - 1], c) + " -> " +
                                   describe(order[i], c));
      }
    }
  }
  return audit;
}

std::string sweep_to_csv(const SweepResult& sweep) {
  std::string out =
      "gamma_a,gamma_d,L_a,L_d,u_attacker,delta_max,attacker_cost,defender_cost,a_levels,d_levels,u_io,status\n";
  for (const SweepCell& cell : sweep.cells) {
    out += fmt(cell.gamma_a) + "," + fmt(cell.gamma_d) + "," + std::to_string(cell.levels_a) + "," +
           std::to_string(cell.levels_d) + ",";
    if (cell.equilibrium) {
      const Equilibrium& eq = *cell.equilibrium;
      out += fmt(eq.attacker_utility, "%.12f") + "," + fmt(eq.post_attack_delta_max, "%.12f") + "," +
             fmt(eq.attacker_cost, "%.12f") + "," + fmt(eq.defender_cost, "%.12f") + "," +
             eq.attacker_action.to_string() + "," + eq.defender_action.to_string() + ",";
    } else {
      out += ",,,,,,";
    }
    out += cell.individual ? fmt(cell.individual->attacker_utility, "%.12f") : std::string{};
    std::string status = cell.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out += "," + status + "\n";
  }
  return out;
}

std::string sweep_to_json(const SweepResult& sweep, int indent) {
  using nlohmann::json;
  json cells = json::array();
  for (const SweepCell& cell : sweep.cells) {
    json j = {{"gamma_a", cell.gamma_a}, {"gamma_d", cell.gamma_d}, {"L_a", cell.levels_a},
              {"L_d", cell.levels_d},    {"status", cell.status}};
    if (cell.equilibrium) {
      const Equilibrium& eq = *cell.equilibrium;
      j["u_attacker"] = eq.attacker_utility;
      j["delta_max"] = eq.post_attack_delta_max;
      j["attacker_cost"] = eq.attacker_cost;
      j["defender_cost"] = eq.defender_cost;
      j["a_levels"] = eq.attacker_action.to_string();
      j["d_levels"] = eq.defender_action.to_string();
      j["defender_candidates"] = eq.defender_candidates;
    }
    if (cell.individual) {
      j["io"] = {{"a_levels", cell.individual->attacker_action.to_string()},
                 {"d_levels", cell.individual->defender_action.to_string()},
                 {"u_attacker", cell.individual->attacker_utility}};
    }
    cells.push_back(std::move(j));
  }
  json doc = {{"case", sweep.case_name},     {"subset", sweep.subset_ids}, {"rows", sweep.rows},
              {"cols", sweep.cols},          {"started_at", sweep.started_at},
              {"finished_at", sweep.finished_at}, {"cells", std::move(cells)}};
  return doc.dump(indent);
}

}  // namespace vsg
