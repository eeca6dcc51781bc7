#include <gtest/gtest.h>

#include <random>

#include "oracle.hpp"

using namespace stdd;

TEST(Attention, MatchesLoopOracle) {
  std::mt19937_64 rng(3);
  for (std::size_t heads : {1, 2, 4}) {
    const auto ref = oracle::NaiveAttention::random(8, heads, rng);
    const Tensor x = Tensor::normal({5, 8}, 1, rng);
    Tape tape(false);
    const Tensor y = mhsa(tape.constant(x), ref.bind(tape)).value();
    EXPECT_LT(max_abs_diff(y, ref(x)), 1e-12) << heads << " heads";
  }
}

TEST(Attention, CountsOnePairPerQueryKeyPerCall) {
  std::mt19937_64 rng(4);
  for (std::size_t heads : {1, 2, 4})
    for (std::size_t n : {1, 3, 17}) {
      const auto ref = oracle::NaiveAttention::random(8, heads, rng);
      Tape tape(false);
      mhsa(tape.constant(Tensor::normal({n, 8}, 1, rng)), ref.bind(tape));
      EXPECT_EQ(tape.pair_interactions(), n * n);
      mhsa(tape.constant(Tensor::normal({n, 8}, 1, rng)), ref.bind(tape));
      EXPECT_EQ(tape.pair_interactions(), 2 * n * n);
      tape.reset_pair_counter();
      EXPECT_EQ(tape.pair_interactions(), 0u);
    }
}

TEST(Attention, PermutingRowsPermutesOutput) {
  std::mt19937_64 rng(5);
  const auto ref = oracle::NaiveAttention::random(6, 2, rng);
  const Tensor x = Tensor::normal({4, 6}, 1, rng);
  Tape tape(false);
  const AttentionWeights w = ref.bind(tape);
  const Var xv = tape.constant(x);
  const std::vector<std::size_t> perm{2, 0, 3, 1};
  const Tensor a = gather_rows(mhsa(xv, w), perm).value();
  const Tensor b = mhsa(gather_rows(xv, perm), w).value();
  EXPECT_LT(max_abs_diff(a, b), 1e-13);
}

TEST(Attention, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  const auto ref = oracle::NaiveAttention::random(4, 2, rng);
  const double err = oracle::op_grad_error(
      [](Tape&, const std::vector<Var>& v) {
        return mhsa(v[0], AttentionWeights{v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8], 2});
      },
      {Tensor::normal({3, 4}, 1, rng), ref.wq, ref.bq, ref.wk, ref.bk, ref.wv, ref.bv, ref.wo, ref.bo});
  EXPECT_LT(err, 1e-5);
}

TEST(Attention, RejectsIndivisibleHeads) {
  std::mt19937_64 rng(7);
  const auto ref = oracle::NaiveAttention::random(6, 4, rng);
  Tape tape(false);
  try {
    mhsa(tape.constant(Tensor({2, 6})), ref.bind(tape));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.key(), "heads");
  }
  EXPECT_THROW(mhsa(tape.constant(Tensor({6})), ref.bind(tape)), DimensionError);
}
