#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"
#include "vsg/error.hpp"

namespace vsg {
namespace {

using testing::toy_model;

GameSpec toy_spec(std::mt19937_64& rng, std::size_t k, int la, int ld, double ga, double gd) {
  std::uniform_real_distribution<double> qa(0.1, 1.5);
  std::uniform_real_distribution<double> qd(0.1, 1.0);
  auto model = toy_model(rng, k);
  Vector a(static_cast<Eigen::Index>(k)), d(static_cast<Eigen::Index>(k));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    a(i) = qa(rng);
    d(i) = qd(rng);
  }
  GameSpec spec = make_full_spec(model, a, d);
  spec.levels_a = la;
  spec.levels_d = ld;
  spec.gamma_a = ga;
  spec.gamma_d = gd;
  return spec;
}

std::vector<std::vector<int>> numerators_of(const std::vector<ActionVector>& actions) {
  std::vector<std::vector<int>> out;
  for (const ActionVector& a : actions) out.push_back(a.numerators);
  return out;
}

TEST(Actions, BudgetExcludesExpensivePair) {
  std::mt19937_64 rng(1);
  const GameSpec spec = toy_spec(rng, 2, 2, 2, 0.6, 0.6);
  const auto actions = enumerate_feasible_actions(spec, Player::kAttacker);
  EXPECT_EQ(numerators_of(actions), (std::vector<std::vector<int>>{{0, 0}, {0, 1}, {1, 0}}));
}

TEST(Actions, TinyCostAllowsFullGrid) {
  std::mt19937_64 rng(2);
  const GameSpec spec = toy_spec(rng, 6, 3, 3, 1e-6, 1e-6);
  EXPECT_EQ(enumerate_feasible_actions(spec, Player::kDefender).size(), 729u);
  EXPECT_EQ(count_feasible_actions(6, 3, 1e-6), 729u);
}

TEST(Actions, HalfLevelUnaffordable) {
  std::mt19937_64 rng(3);
  const GameSpec spec = toy_spec(rng, 2, 3, 3, 2.1, 2.1);
  const auto actions = enumerate_feasible_actions(spec, Player::kAttacker);
  ASSERT_EQ(actions.size(), 1u);
  EXPECT_EQ(actions[0], zero_action(Player::kAttacker, 3, 2));
}

TEST(Actions, BoundaryCostsStayFeasible) {
  // Six half-levels at gamma 0.2 cost exactly 0.6; one third per load at 1/3.
  EXPECT_EQ(budget_numerator(0.2, 3), 10);
  EXPECT_EQ(budget_numerator(1.0 / 3.0, 2), 3);
  EXPECT_EQ(budget_numerator(0.1, 2), 10);
  EXPECT_EQ(budget_numerator(2.1, 3), 0);
}

TEST(Actions, LexicographicAndUnique) {
  std::mt19937_64 rng(4);
  const GameSpec spec = toy_spec(rng, 4, 3, 3, 0.4, 0.4);
  const auto actions = enumerate_feasible_actions(spec, Player::kAttacker);
  EXPECT_EQ(actions.size(), count_feasible_actions(4, 3, 0.4));
  for (std::size_t i = 1; i < actions.size(); ++i) EXPECT_LT(actions[i - 1].numerators, actions[i].numerators);
  for (const ActionVector& a : actions) EXPECT_LE(a.cost(0.4), 1.0 + 1e-12);
}

TEST(Actions, CountMatchesBruteForce) {
  for (std::size_t k = 1; k <= 5; ++k) {
    for (int levels = 2; levels <= 4; ++levels) {
      for (double gamma : {0.05, 0.2, 0.3, 0.5, 1.0, 1.7}) {
        std::uint64_t brute = 0;
        std::vector<int> v(k, 0);
        while (true) {
          int sum = 0;
          for (int x : v) sum += x;
          if (gamma * sum / (levels - 1) <= 1.0 + 1e-12) ++brute;
          std::size_t pos = 0;
          while (pos < k && ++v[pos] == levels) v[pos++] = 0;
          if (pos == k) break;
        }
        EXPECT_EQ(count_feasible_actions(k, levels, gamma), brute) << k << " " << levels << " " << gamma;
      }
    }
  }
}

TEST(Actions, CapRefusesWithCount) {
  std::mt19937_64 rng(5);
  const GameSpec spec = toy_spec(rng, 6, 3, 3, 1e-6, 1e-6);
  try {
    enumerate_feasible_actions(spec, Player::kAttacker, 100);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_EQ(e.required(), 729u);
    EXPECT_EQ(e.cap(), 100u);
  }
}

TEST(Actions, ToStringJoinsNumerators) {
  EXPECT_EQ((ActionVector{Player::kDefender, 3, {2, 0, 1}}).to_string(), "2/0/1");
  EXPECT_DOUBLE_EQ((ActionVector{Player::kDefender, 3, {2, 0, 1}}).l1(), 1.5);
}

TEST(Spec, ValidationRejectsBadInput) {
  std::mt19937_64 rng(6);
  GameSpec spec = toy_spec(rng, 3, 3, 3, 0.5, 0.5);
  EXPECT_NO_THROW(validate_game_spec(spec));
  GameSpec bad = spec;
  bad.gamma_a = 0.0;
  EXPECT_THROW(validate_game_spec(bad), ValidationError);
  bad = spec;
  bad.levels_d = 1;
  EXPECT_THROW(validate_game_spec(bad), ValidationError);
  bad = spec;
  bad.load_subset = {0, 0};
  EXPECT_THROW(validate_game_spec(bad), ValidationError);
  bad = spec;
  bad.load_subset = {7};
  EXPECT_THROW(validate_game_spec(bad), ValidationError);
  bad = spec;
  bad.qd_max(1) = -1.0;
  EXPECT_THROW(validate_game_spec(bad), ValidationError);
}

TEST(Probability, DegenerateAndFairCoins) {
  const ActionVector zeros{Player::kAttacker, 3, {0, 0, 0}};
  const ActionVector ones{Player::kAttacker, 3, {2, 2, 2}};
  for (std::uint32_t m = 0; m < 8; ++m) {
    EXPECT_EQ(outcome_probability(zeros, Outcome{m}), m == 0 ? 1.0 : 0.0);
    EXPECT_EQ(outcome_probability(ones, Outcome{m}), m == 7 ? 1.0 : 0.0);
  }
  const ActionVector half{Player::kAttacker, 3, {1, 1}};
  for (std::uint32_t m = 0; m < 4; ++m) EXPECT_DOUBLE_EQ(outcome_probability(half, Outcome{m}), 0.25);
}

TEST(Demand, MaskSelectsEntries) {
  const Vector qa = (Vector(3) << 0.2, 0.3, 0.4).finished();
  EXPECT_EQ(outcome_demand(Outcome{0}, qa), Vector::Zero(3));
  EXPECT_EQ(outcome_demand(Outcome{7}, qa), qa);
  EXPECT_EQ(outcome_demand(Outcome{0b101}, qa), (Vector(3) << 0.2, 0.0, 0.4).finished());
}

TEST(Demand, CompensationScalesCaps) {
  const Vector cap = Vector::Constant(4, 2.0);
  EXPECT_EQ(defender_compensation(zero_action(Player::kDefender, 3, 4), cap), Vector::Zero(4));
  EXPECT_EQ(defender_compensation(ActionVector{Player::kDefender, 3, {2, 2, 2, 2}}, cap), cap);
  EXPECT_EQ(defender_compensation(ActionVector{Player::kDefender, 3, {1, 1, 1, 1}}, cap), Vector::Constant(4, 1.0));
  EXPECT_THROW(defender_compensation(zero_action(Player::kDefender, 3, 2), cap), ValidationError);
}

TEST(Clip, Branches) {
  EXPECT_EQ(clipped_utility(0.1, 0.2), 0.0);
  EXPECT_DOUBLE_EQ(clipped_utility(0.5, 0.2), 0.3);
  EXPECT_DOUBLE_EQ(clipped_utility(3.0, 0.2), 0.8);
  EXPECT_DOUBLE_EQ(clipped_utility(1.0, 0.2), 0.8);
}

TEST(UtilityTable, ZeroMaskZeroDefenseIsFloor) {
  std::mt19937_64 rng(7);
  const GameSpec spec = toy_spec(rng, 3, 3, 3, 0.5, 0.5);
  const UtilityTable t = per_outcome_utility(spec, zero_action(Player::kDefender, 3, 3));
  ASSERT_EQ(t.num_outcomes(), 8u);
  EXPECT_NEAR(t.raw_delta[0], spec.model->delta0, 1e-12);
  EXPECT_NEAR(t.per_outcome[0], 0.0, 1e-12);
}

TEST(UtilityTable, CollapseHitsCeilingExactly) {
  std::mt19937_64 rng(8);
  GameSpec spec = toy_spec(rng, 3, 2, 2, 0.5, 0.5);
  spec.qa_max.setConstant(20.0);
  const UtilityTable t = per_outcome_utility(spec, zero_action(Player::kDefender, 2, 3));
  for (std::size_t m = 1; m < t.num_outcomes(); ++m) {
    ASSERT_GE(t.raw_delta[m], 1.0);
    EXPECT_EQ(t.per_outcome[m], 1.0 - spec.model->delta0);
  }
}

TEST(UtilityTable, OutOfSubsetLoadsStayNominal) {
  std::mt19937_64 rng(9);
  GameSpec spec = toy_spec(rng, 4, 2, 2, 0.5, 0.5);
  spec.load_subset = {1, 3};
  const ActionVector d{Player::kDefender, 2, {1, 0}};
  const UtilityTable t = per_outcome_utility(spec, d);
  const StabilityModel& m = *spec.model;
  for (std::uint32_t mask = 0; mask < 4; ++mask) {
    Vector q = m.q_nominal;
    if (mask & 1u) q(1) += spec.qa_max(1);
    if (mask & 2u) q(3) += spec.qa_max(3);
    q(1) -= spec.qd_max(1);
    // Route through Q_crit rather than its stored inverse.
    const double delta = (-m.q_crit.partialPivLu().solve(q)).maxCoeff();
    EXPECT_NEAR(t.raw_delta[mask], delta, 1e-12);
  }
}

TEST(Expected, DegenerateActions) {
  std::mt19937_64 rng(10);
  const GameSpec spec = toy_spec(rng, 3, 3, 3, 0.3, 0.3);
  const ActionVector d{Player::kDefender, 3, {1, 0, 2}};
  const UtilityTable t = per_outcome_utility(spec, d);
  EXPECT_EQ(expected_attacker_utility(zero_action(Player::kAttacker, 3, 3), t), t.per_outcome[0]);
  EXPECT_EQ(expected_attacker_utility(ActionVector{Player::kAttacker, 3, {2, 2, 2}}, t), t.per_outcome[7]);
}

TEST(Expected, HalfLevelsAverageTable) {
  std::mt19937_64 rng(11);
  GameSpec spec = toy_spec(rng, 2, 3, 3, 0.3, 0.3);
  spec.qa_max.setConstant(1.2);
  const UtilityTable t = per_outcome_utility(spec, zero_action(Player::kDefender, 3, 2));
  const double mean = (t.per_outcome[0] + t.per_outcome[1] + t.per_outcome[2] + t.per_outcome[3]) / 4.0;
  const ActionVector half{Player::kAttacker, 3, {1, 1}};
  EXPECT_NEAR(expected_attacker_utility(half, t), mean, 1e-15);
  EXPECT_EQ(expected_defender_utility(half, t), -expected_attacker_utility(half, t));
}

TEST(Expected, LengthMismatchThrows) {
  std::mt19937_64 rng(12);
  const GameSpec spec = toy_spec(rng, 3, 2, 2, 0.3, 0.3);
  const UtilityTable t = per_outcome_utility(spec, zero_action(Player::kDefender, 2, 3));
  EXPECT_THROW(expected_attacker_utility(zero_action(Player::kAttacker, 2, 2), t), ValidationError);
}

// Naive triple loop: for every outcome, build the demand vector, solve with
// Q_crit directly, clip, weight by the product probability.
double naive_utility(const GameSpec& spec, const ActionVector& a, const ActionVector& d) {
  const StabilityModel& m = *spec.model;
  const std::size_t k = spec.k_loads();
  double total = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    double p = 1.0;
    Vector q = m.q_nominal;
    for (std::size_t j = 0; j < k; ++j) {
      const auto idx = static_cast<Eigen::Index>(spec.load_subset[j]);
      const bool hit = (mask >> j) & 1u;
      const double level = static_cast<double>(a.numerators[j]) / (a.levels - 1);
      p *= hit ? level : 1.0 - level;
      if (hit) q(idx) += spec.qa_max(idx);
      q(idx) -= static_cast<double>(d.numerators[j]) / (d.levels - 1) * spec.qd_max(idx);
    }
    const double delta = (-m.q_crit.fullPivLu().solve(q)).maxCoeff();
    total += p * (std::min(std::max(delta, m.delta0), 1.0) - m.delta0);
  }
  return total;
}

TEST(Expected, FactorizationMatchesNaiveLoop) {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<std::size_t> kdist(1, 4);
  std::uniform_int_distribution<int> ldist(2, 4);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t k = kdist(rng);
    const GameSpec spec = toy_spec(rng, k, ldist(rng), ldist(rng), 0.01, 0.01);
    const auto attackers = enumerate_feasible_actions(spec, Player::kAttacker);
    const auto defenders = enumerate_feasible_actions(spec, Player::kDefender);
    std::uniform_int_distribution<std::size_t> ai(0, attackers.size() - 1), di(0, defenders.size() - 1);
    const ActionVector& d = defenders[di(rng)];
    const UtilityTable t = per_outcome_utility(spec, d);
    for (int rep = 0; rep < 5; ++rep) {
      const ActionVector& a = attackers[ai(rng)];
      EXPECT_NEAR(expected_attacker_utility(a, t), naive_utility(spec, a, d), 1e-12);
    }
  }
}

TEST(NineBus, FullAttackReachesCollapse) {
  const auto model = std::make_shared<StabilityModel>(build_stability_model(testing::case9()));
  const GameSpec spec = make_full_spec(model, covert_limits(testing::case9()), Vector::Constant(6, 2.0));
  const UtilityTable t = per_outcome_utility(spec, zero_action(Player::kDefender, 3, 6));
  EXPECT_GE(t.raw_delta[63], 1.0);
  EXPECT_NEAR(t.per_outcome[63], 1.0 - 0.1935, 0.01);
  EXPECT_EQ(t.per_outcome[63], 1.0 - model->delta0);
}

}  // namespace
}  // namespace vsg
