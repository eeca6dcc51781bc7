#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "stdd/wsm.hpp"

using namespace stdd;

namespace {

nlohmann::json golden(const std::string& file) {
  std::ifstream is(std::string(STDD_GOLDEN_DIR) + "/" + file);
  return nlohmann::json::parse(is);
}

std::set<std::size_t> visible_set(const MaskSchedule& s, std::size_t t) {
  return {s.visible(t).begin(), s.visible(t).end()};
}

}  // namespace

TEST(MaskSchedule, TwoByTwoGridCyclesThroughCells) {
  const MaskSchedule s = build_mask_schedule({2, 2}, {2, 2, 0.5}, 4);
  EXPECT_EQ(s.period(), 4u);
  EXPECT_EQ(visible_set(s, 0), (std::set<std::size_t>{0, 1}));
  EXPECT_EQ(visible_set(s, 1), (std::set<std::size_t>{1, 2}));
  EXPECT_EQ(visible_set(s, 2), (std::set<std::size_t>{2, 3}));
  EXPECT_EQ(visible_set(s, 3), (std::set<std::size_t>{3, 0}));
}

TEST(MaskSchedule, MatchesFrozenGoldens) {
  const nlohmann::json g = golden("mask_schedules.json");
  struct Case {
    std::string key;
    TokenGrid grid;
    WindowSpec win;
    std::size_t frames;
  };
  const std::vector<Case> cases{{"grid=2x2 window=2x2 k=2 T=8", {2, 2}, {2, 2, 0.5}, 8},
                                {"grid=2x4 window=2x2 k=2 T=4", {2, 4}, {2, 2, 0.5}, 4},
                                {"grid=4x4 window=2x2 k=1 T=4", {4, 4}, {2, 2, 0.25}, 4},
                                {"grid=2x6 window=1x3 k=2 T=3", {2, 6}, {1, 3, 2.0 / 3.0}, 3}};
  for (const auto& c : cases) {
    ASSERT_TRUE(g.contains(c.key)) << c.key;
    EXPECT_EQ(to_json(build_mask_schedule(c.grid, c.win, c.frames)).dump(), g.at(c.key).dump()) << c.key;
  }
}

TEST(MaskSchedule, FullRetentionKeepsEverythingWithPeriodOne) {
  const MaskSchedule s = build_mask_schedule({4, 4}, {2, 2, 1.0}, 5);
  EXPECT_EQ(s.period(), 1u);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_EQ(s.visible(t).size(), 16u);
}

TEST(MaskSchedule, FourByFourBalanceOverTwoPeriods) {
  const MaskSchedule s = build_mask_schedule({4, 4}, {2, 2, 0.5}, 8);
  for (std::size_t t = 0; t < 8; ++t) EXPECT_EQ(s.visible(t).size(), 8u);
  for (std::size_t c = 0; c < 16; ++c) {
    std::size_t n = 0;
    for (std::size_t t = 0; t < 8; ++t) n += s.map(t)[c];
    EXPECT_EQ(n, 4u);
  }
}

TEST(MaskSchedule, SameMapForEveryLayer) {
  const MaskSchedule s = build_mask_schedule({4, 4}, {2, 2, 0.5}, 6, 3);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t l = 1; l < 3; ++l) EXPECT_EQ(s.map(t, l), s.map(t, 0));
  EXPECT_THROW(s.map(0, 3), DimensionError);
  EXPECT_THROW(s.map(6, 0), DimensionError);
}

// Periodicity, N' and per-cell balance over the whole parameter sweep.
TEST(MaskScheduleProperty, PeriodicAndBalancedAcrossWindows) {
  std::size_t checked = 0;
  for (std::size_t w1 : {1, 2, 4})
    for (std::size_t w2 : {1, 2, 4})
      for (double r : {0.25, 0.5, 0.75}) {
        const double k = r * static_cast<double>(w1 * w2);
        if (k != std::floor(k) || k < 1) continue;
        const TokenGrid grid{8, 8};
        const WindowSpec win{w1, w2, r};
        const std::size_t period = w1 * w2;
        const std::size_t frames = 3 * period;
        const MaskSchedule s = build_mask_schedule(grid, win, frames);
        const std::size_t keep = static_cast<std::size_t>(r * 64);
        ASSERT_EQ(s.period(), period);
        ASSERT_EQ(visible_count(grid, win), keep);
        for (std::size_t t = 0; t < frames; ++t) {
          EXPECT_EQ(s.visible(t).size(), keep);
          if (t + period < frames) EXPECT_EQ(s.map(t), s.map(t + period));
        }
        for (std::size_t start = 0; start + period <= frames; ++start)
          for (std::size_t c = 0; c < 64; ++c) {
            std::size_t n = 0;
            for (std::size_t t = start; t < start + period; ++t) n += s.map(t)[c];
            EXPECT_EQ(n, static_cast<std::size_t>(k)) << "w=" << w1 << "x" << w2 << " r=" << r;
          }
        ++checked;
      }
  EXPECT_GE(checked, 10u);
}

TEST(MaskScheduleProperty, EveryWindowSharesOnePattern) {
  const TokenGrid grid{4, 6};
  const WindowSpec win{2, 3, 0.5};
  const MaskSchedule s = build_mask_schedule(grid, win, 6);
  for (std::size_t t = 0; t < 6; ++t)
    for (std::size_t wr = 0; wr < 2; ++wr)
      for (std::size_t wc = 0; wc < 2; ++wc)
        for (std::size_t a = 0; a < 2; ++a)
          for (std::size_t b = 0; b < 3; ++b)
            EXPECT_EQ(s.map(t)[(wr * 2 + a) * 6 + wc * 3 + b], s.map(t)[a * 6 + b]);
}

TEST(MaskScheduleProperty, ConsecutiveFramesOverlapInKMinusOneCells) {
  for (double r : {0.25, 0.5, 0.75, 1.0}) {
    const WindowSpec win{2, 2, r};
    const std::size_t k = win.keep_per_window();
    const MaskSchedule s = build_mask_schedule({2, 2}, win, 8);
    for (std::size_t t = 0; t + 1 < 8; ++t) {
      std::size_t both = 0;
      for (std::size_t c = 0; c < 4; ++c) both += s.map(t)[c] && s.map(t + 1)[c];
      EXPECT_EQ(both, k == 4 ? 4 : k - 1) << "r=" << r;
    }
  }
}

TEST(VisibleCount, Formula) {
  EXPECT_EQ(visible_count({2, 2}, {2, 2, 0.5}), 2u);
  EXPECT_EQ(visible_count({14, 14}, {2, 2, 0.5}), 98u);
  EXPECT_EQ(visible_count({4, 4}, {2, 2, 1.0}), 16u);
}

TEST(WindowSpec, RejectsNonIntegralKeepCount) {
  try {
    visible_count({4, 4}, {2, 2, 0.3});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "r");
  }
  EXPECT_THROW(visible_count({4, 4}, {2, 2, 0.0}), ConfigError);
  EXPECT_THROW(visible_count({4, 4}, {2, 2, 1.5}), ConfigError);
  try {
    visible_count({3, 4}, {2, 2, 0.5});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "w1");
  }
  EXPECT_THROW(TokenGrid::from_pixels(30, 32, 8), ConfigError);
}

TEST(MaskStrategies, AllKeepExactlyNPrime) {
  const TokenGrid grid{4, 4};
  const WindowSpec win{2, 2, 0.5};
  for (auto strat : {MaskStrategy::repeat_window_shift, MaskStrategy::random, MaskStrategy::random_shift,
                     MaskStrategy::uniform_shift, MaskStrategy::random_window_shift}) {
    const MaskSchedule s = build_mask_schedule(grid, win, 8, 1, strat, 11);
    for (std::size_t t = 0; t < 8; ++t) EXPECT_EQ(s.visible(t).size(), 8u) << to_string(strat);
    EXPECT_EQ(mask_strategy_from_string(to_string(strat)), strat);
  }
  EXPECT_EQ(build_mask_schedule(grid, win, 4, 1, MaskStrategy::random, 1).period(), 0u);
  EXPECT_THROW(mask_strategy_from_string("checkerboard"), ConfigError);
}

TEST(MaskStrategies, WindowedStrategiesStayBalancedPerWindow) {
  const TokenGrid grid{4, 4};
  const WindowSpec win{2, 2, 0.5};
  for (auto strat : {MaskStrategy::random_window_shift, MaskStrategy::repeat_window_shift}) {
    const MaskSchedule s = build_mask_schedule(grid, win, 4, 1, strat, 5);
    for (std::size_t c = 0; c < 16; ++c) {
      std::size_t n = 0;
      for (std::size_t t = 0; t < 4; ++t) n += s.map(t)[c];
      EXPECT_EQ(n, 2u) << to_string(strat);
    }
  }
}

TEST(MaskStrategies, SeededStrategiesAreReproducible) {
  const auto a = build_mask_schedule({4, 4}, {2, 2, 0.5}, 6, 1, MaskStrategy::random_shift, 99);
  const auto b = build_mask_schedule({4, 4}, {2, 2, 0.5}, 6, 1, MaskStrategy::random_shift, 99);
  EXPECT_EQ(a.maps(), b.maps());
}

TEST(ApplyMask, SelectsRowsAfterClsInOrder) {
  std::mt19937_64 rng(1);
  Tape tape(false);
  const Tensor z = Tensor::normal({5, 3}, 1, rng);
  const MaskedTokens m = apply_mask(tape.constant(z), {1, 1, 0, 0});
  EXPECT_EQ(m.kept_idx, (std::vector<std::size_t>{0, 1}));
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(m.tokens.value().at(r, c), z.at(r + 1, c));
  const MaskedTokens all = apply_mask(tape.constant(z), {1, 1, 1, 1});
  EXPECT_EQ(all.tokens.shape(), (Shape{4, 3}));
  EXPECT_EQ(max_abs_diff(all.tokens.value(), slice_rows(tape.constant(z), 1, 5).value()), 0);
  EXPECT_THROW(apply_mask(tape.constant(z), {1, 0, 1}), DimensionError);
}

TEST(ApplyMaskProperty, RowsAreBitwiseCopies) {
  std::mt19937_64 rng(2);
  const MaskSchedule s = build_mask_schedule({4, 4}, {2, 2, 0.5}, 4, 1, MaskStrategy::random, 3);
  Tape tape(false);
  for (std::size_t t = 0; t < 4; ++t) {
    const Tensor z = Tensor::normal({17, 4}, 1, rng);
    const MaskedTokens m = apply_mask(tape.constant(z), s.map(t));
    for (std::size_t r = 0; r < m.kept_idx.size(); ++r)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(m.tokens.value().at(r, c), z.at(m.kept_idx[r] + 1, c));
  }
}
