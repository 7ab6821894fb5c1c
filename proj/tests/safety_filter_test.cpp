#include "fwcbf/safety_filter.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "gtest/gtest.h"
#include "test_support.hpp"

namespace fwcbf {
namespace {

using testing::turn_config;

constexpr double kPi = std::numbers::pi;

FilterConfig shaped_config(double range = 350.0) {
  FilterConfig c;
  c.barrier = turn_config();
  c.sensor = {range};
  c.shaping = make_quadratic_psi(xi_from_range(range, c.barrier.turn, c.barrier.safety), 0.9);
  c.alpha = {1.0};
  c.limits = scenarios::fixed_wing_base().limits;
  return c;
}

std::vector<VehicleState> random_world(std::mt19937_64& rng, int count, double extent) {
  std::uniform_real_distribution<double> pos(-extent, extent);
  std::uniform_real_distribution<double> ang(-kPi, kPi);
  std::vector<VehicleState> w;
  while (static_cast<int>(w.size()) < count) {
    const VehicleState s{pos(rng), pos(rng), ang(rng), 0};
    bool clear = true;
    for (const auto& o : w) clear = clear && std::hypot(o.px - s.px, o.py - s.py) > 60;
    if (clear) w.push_back(s);
  }
  return w;
}

std::vector<ControlInput> random_controls(std::mt19937_64& rng, int count) {
  std::uniform_real_distribution<double> v(10, 30);
  std::uniform_real_distribution<double> w(-0.4, 0.4);
  std::uniform_real_distribution<double> z(-8, 8);
  std::vector<ControlInput> u;
  for (int k = 0; k < count; ++k) u.push_back({v(rng), w(rng), z(rng)});
  return u;
}

TEST(AssemblePairConstraint, NoneOutsideSensedSet) {
  const FilterConfig c = shaped_config();
  const PairState p{{0, 0, 0, 0}, {350.5, 0, kPi, 0}};
  EXPECT_FALSE(assemble_pair_constraint(p, c).has_value());
  FilterConfig raw = c;
  raw.shaping.reset();
  EXPECT_FALSE(assemble_pair_constraint(p, raw).has_value());
}

TEST(AssemblePairConstraint, PlateauRowIsVacuous) {
  const FilterConfig c = shaped_config();
  // diverging pair well inside the sensing range
  const PairState p{{0, 0, kPi, 0}, {300, 0, 0, 0}};
  const auto row = assemble_pair_constraint(p, c);
  ASSERT_TRUE(row.has_value());
  EXPECT_GT(row->h, c.shaping->xi);
  EXPECT_TRUE(row->vacuous());
  EXPECT_GT(row->offset, 0.0);
  EXPECT_DOUBLE_EQ(row->h_tilde, c.shaping->plateau());
}

TEST(AssemblePairConstraint, ChainRuleRow) {
  const FilterConfig c = shaped_config();
  std::mt19937_64 rng(41);
  int checked = 0;
  while (checked < 200) {
    const PairState p = testing::random_pair(rng, 150);
    std::optional<PairConstraint> row;
    LieDerivatives raw;
    try {
      row = assemble_pair_constraint(p, c);
      raw = lie_derivatives(p, c.barrier);
    } catch (const DomainError&) {
      continue;
    }
    if (!row || raw.h.value >= c.shaping->xi) continue;
    const double slope = psi_deriv(raw.h.value, *c.shaping);
    EXPECT_LT((row->lg - slope * raw.lg).lpNorm<Eigen::Infinity>(), 1e-9);
    EXPECT_DOUBLE_EQ(row->offset, c.alpha(psi_eval(raw.h.value, *c.shaping)));
    ++checked;
  }
}

TEST(AssemblePairConstraint, DomainErrorPropagates) {
  const FilterConfig c = shaped_config();
  EXPECT_THROW(assemble_pair_constraint({{0, 0, 0, 0}, {0, 0, 0, 0}}, c), DomainError);
}

TEST(FilterControls, NothingSensedKeepsNominal) {
  const FilterConfig c = shaped_config();
  const std::vector<VehicleState> w{{0, 0, 0, 0}, {1000, 0, kPi, 0}, {0, 1000, 1, 0}};
  const std::vector<ControlInput> u{{20, 0.1, 1}, {16, -0.2, 0}, {24, 0, -2}};
  const FilterResult r = filter_controls(w, u, c);
  EXPECT_EQ(r.controls, u);
  EXPECT_TRUE(r.sensed_pairs.empty());
  EXPECT_TRUE(r.events.empty());
}

TEST(FilterControls, NominalClampedIntoBox) {
  const FilterConfig c = shaped_config();
  const std::vector<VehicleState> w{{0, 0, 0, 0}};
  const FilterResult r = filter_controls(w, {{40, 1.0, -9}}, c);
  EXPECT_EQ(r.controls[0], clamp_input({40, 1.0, -9}, c.limits));
}

TEST(FilterControls, SymmetricHeadOnGivesSymmetricTurns) {
  for (const bool shaped : {true, false}) {
    FilterConfig c = shaped_config();
    if (!shaped) c.shaping.reset();
    // the delta terms of the turn safety function use vehicle a's heading
    // only and break the swap symmetry at order delta
    c.barrier.safety.delta = 1e-12;
    int corrected = 0;
    for (double half = 150; half > 10; half -= 5) {
      const std::vector<VehicleState> w{{-half, 0, 0, 0}, {half, 0, kPi, 0}};
      const std::vector<ControlInput> u{{25, 0, 0}, {25, 0, 0}};
      const FilterResult r = filter_controls(w, u, c);
      if (!r.events.empty()) continue;
      ASSERT_EQ(r.sensed_pairs.size(), 1u);
      // swapping the vehicles is a rotation by pi that maps the pair
      // problem to itself, so both body-frame commands coincide
      EXPECT_NEAR(r.controls[0].turn_rate, r.controls[1].turn_rate, 1e-9);
      EXPECT_NEAR(r.controls[0].speed, r.controls[1].speed, 1e-9);
      EXPECT_GE(r.controls[0].turn_rate, 0.0);
      EXPECT_GE(r.sensed_pairs[0].margin, -1e-8);
      if (r.controls[0].turn_rate > 1e-6) ++corrected;
    }
    EXPECT_GT(corrected, 0);
  }
}

TEST(FilterControls, MonotoneOverride) {
  const FilterConfig c = shaped_config();
  std::mt19937_64 rng(42);
  int checked = 0;
  for (int k = 0; k < 2000 && checked < 100; ++k) {
    const auto w = random_world(rng, 4, 250);
    auto u = random_controls(rng, 4);
    for (auto& x : u) x = clamp_input(x, c.limits);
    bool all_ok = true;
    try {
      for (std::size_t i = 0; i < w.size(); ++i) {
        for (std::size_t j = i + 1; j < w.size(); ++j) {
          if (auto row = assemble_pair_constraint({w[i], w[j]}, c)) {
            all_ok = all_ok && row->margin(stack_controls(u[i], u[j])) >= 0.0;
          }
        }
      }
    } catch (const DomainError&) {
      continue;
    }
    if (!all_ok) continue;
    EXPECT_EQ(filter_controls(w, u, c).controls, u);
    ++checked;
  }
  EXPECT_EQ(checked, 100);
}

TEST(FilterControls, CentralizedSatisfiesEveryRowInsideBox) {
  const FilterConfig c = shaped_config();
  std::mt19937_64 rng(43);
  int solved = 0;
  for (int k = 0; k < 300; ++k) {
    const auto w = random_world(rng, 5, 200);
    const auto u = random_controls(rng, 5);
    const FilterResult r = filter_controls(w, u, c);
    for (const auto& x : r.controls) EXPECT_TRUE(c.limits.contains(x));
    if (!r.events.empty()) continue;
    for (const auto& p : r.sensed_pairs) EXPECT_GE(p.margin, -1e-8);
    ++solved;
  }
  EXPECT_GT(solved, 250);
}

TEST(FilterControls, SplitModeSatisfiesPairRows) {
  FilterConfig c = shaped_config();
  c.mode = FilterMode::split;
  std::mt19937_64 rng(44);
  int solved = 0;
  for (int k = 0; k < 300; ++k) {
    const auto w = random_world(rng, 4, 200);
    const auto u = random_controls(rng, 4);
    const FilterResult r = filter_controls(w, u, c);
    for (const auto& x : r.controls) EXPECT_TRUE(c.limits.contains(x));
    if (!r.events.empty()) continue;
    // the two halves add up to the full pair row
    for (const auto& p : r.sensed_pairs) EXPECT_GE(p.margin, -1e-8);
    ++solved;
  }
  EXPECT_GT(solved, 200);
}

TEST(FilterControls, SplitHalvesAreFeasibleAtEvadingManeuver) {
  FilterConfig c = shaped_config();
  c.shaping.reset();
  c.mode = FilterMode::split;
  const auto g = evading_controls(c.barrier);
  // nominal equal to the evading maneuver needs no correction when h >= 0
  const std::vector<VehicleState> w{{-80, 0, 0, 0}, {80, 10, kPi, 0}};
  const auto pair = lie_derivatives({w[0], w[1]}, c.barrier);
  ASSERT_GE(pair.h.value, 0.0);
  const FilterResult r = filter_controls(w, {g[0], g[1]}, c);
  EXPECT_TRUE(r.events.empty());
  EXPECT_NEAR(r.controls[0].speed, g[0].speed, 1e-12);
  EXPECT_NEAR(r.controls[0].turn_rate, g[0].turn_rate, 1e-12);
  EXPECT_NEAR(r.controls[1].turn_rate, g[1].turn_rate, 1e-12);
}

TEST(FilterControls, DomainErrorFallsBackToEvadingManeuver) {
  const FilterConfig c = shaped_config();
  const std::vector<VehicleState> w{{0, 0, 0, 0}, {0, 0, 0, 0}, {900, 0, 0, 0}};
  const std::vector<ControlInput> u{{20, 0, 0}, {20, 0, 0}, {20, 0, 0}};
  const FilterResult r = filter_controls(w, u, c);
  const auto g = evading_controls(c.barrier);
  EXPECT_EQ(r.controls[0], clamp_input(g[0], c.limits));
  EXPECT_EQ(r.controls[1], clamp_input(g[1], c.limits));
  EXPECT_EQ(r.controls[2], u[2]);
  ASSERT_EQ(r.events.size(), 1u);
  EXPECT_EQ(r.events[0].kind, FilterEvent::Kind::domain_error);
}

TEST(FilterControls, InfeasibleFallsBackAndLogs) {
  // straight barrier, collision already under way: no admissible control
  FilterConfig c = shaped_config();
  c.barrier.kind = BarrierKind::straight;
  c.shaping.reset();
  c.alpha = {1000.0};
  const std::vector<VehicleState> w{{0, 0, 0, 0}, {2, 0, kPi, 0}};
  const FilterResult r = filter_controls(w, {{20, 0, 0}, {20, 0, 0}}, c);
  ASSERT_FALSE(r.events.empty());
  EXPECT_EQ(r.events[0].kind, FilterEvent::Kind::fallback);
  const auto g = evading_controls(c.barrier);
  EXPECT_EQ(r.controls[0], clamp_input(g[0], c.limits));
  EXPECT_EQ(r.controls[1], clamp_input(g[1], c.limits));
}

TEST(FilterControls, Deterministic) {
  const FilterConfig c = shaped_config();
  std::mt19937_64 rng(45);
  for (int k = 0; k < 20; ++k) {
    const auto w = random_world(rng, 8, 300);
    const auto u = random_controls(rng, 8);
    EXPECT_EQ(filter_controls(w, u, c).controls, filter_controls(w, u, c).controls);
  }
}

TEST(FilterControls, SizeMismatchRejected) {
  EXPECT_THROW(filter_controls({{}, {}}, {{20, 0, 0}}, shaped_config()),
               std::invalid_argument);
}

TEST(FilterMode, StringRoundTrip) {
  EXPECT_EQ(filter_mode_from_string(to_string(FilterMode::split)), FilterMode::split);
  EXPECT_EQ(filter_mode_from_string("centralized"), FilterMode::centralized);
  EXPECT_THROW(filter_mode_from_string("both"), std::invalid_argument);
}

}  // namespace
}  // namespace fwcbf
