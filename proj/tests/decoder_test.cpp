#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "helpers.hpp"
#include "qidn/decoder.hpp"
#include "qidn/error.hpp"

namespace qidn::decoder {
namespace {

constexpr MaskMode kModes[] = {MaskMode::full, MaskMode::no_ent_to_rel, MaskMode::no_rel_to_ent, MaskMode::no_cross};

TEST(Attention, SingleKeyReturnsItsValue) {
  std::mt19937_64 rng(1);
  Tensor q = num::normal_init({3, 4}, 0.0, 1.0, rng);
  Tensor k = num::normal_init({1, 4}, 0.0, 1.0, rng);
  Tensor v = num::normal_init({1, 5}, 0.0, 1.0, rng);
  const Tensor out = attention(q, k, v, nullptr);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 5; ++c) EXPECT_DOUBLE_EQ(out(r, c), v(0, c));
  }
}

TEST(Attention, MaskedColumnGetsExactlyZero) {
  std::mt19937_64 rng(2);
  Tensor q = num::normal_init({3, 4}, 0.0, 1.0, rng);
  Tensor k = num::normal_init({4, 4}, 0.0, 1.0, rng);
  Tensor v = num::normal_init({4, 2}, 0.0, 1.0, rng);
  num::Mask mask(3, 4);
  for (std::size_t r = 0; r < 3; ++r) mask.set(r, 2, false);
  Tensor w;
  attention(q, k, v, &mask, &w);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(w(r, 2), 0.0);
}

TEST(Attention, EqualLogitsAverageTheValues) {
  Tensor q = Tensor::matrix(1, 2, {1.0, 0.0});
  Tensor k = Tensor::matrix(3, 2, {0.0, 1.0, 0.0, -2.0, 0.0, 5.0});
  Tensor v = Tensor::matrix(3, 2, {1.0, 2.0, 3.0, 4.0, 8.0, -3.0});
  const Tensor out = attention(q, k, v, nullptr);
  EXPECT_NEAR(out(0, 0), 4.0, 1e-12);
  EXPECT_NEAR(out(0, 1), 1.0, 1e-12);
}

TEST(QueryBank, ProjectionExamples) {
  num::ParamStore store;
  std::mt19937_64 rng(3);
  QueryBank bank = make_query_bank(store, 4, 3, rng);
  auto set_identity = [](Tensor t) {
    auto v = t.mutable_values();
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = 0; i < 3; ++i) v[i * 3 + i] = 1.0;
  };
  set_identity(bank.w_rel);
  set_identity(bank.w_ent);
  auto [rel, ent] = project_queries(bank);
  EXPECT_EQ(test::values(rel), test::values(bank.queries));
  EXPECT_EQ(test::values(ent), test::values(bank.queries));
  auto w = bank.w_ent.mutable_values();
  std::fill(w.begin(), w.end(), 0.0);
  const Tensor zeroed = project_queries(bank).second;
  for (double v : zeroed.values()) EXPECT_EQ(v, 0.0);
}

TEST(QueryBank, SeededInitIsReproducible) {
  num::ParamStore s1, s2;
  std::mt19937_64 r1(9), r2(9);
  EXPECT_EQ(test::values(project_queries(make_query_bank(s1, 5, 4, r1)).first),
            test::values(project_queries(make_query_bank(s2, 5, 4, r2)).first));
}

TEST(QueryBank, NormalInitWithSmallSpread) {
  num::ParamStore store;
  std::mt19937_64 rng(10);
  QueryBank bank = make_query_bank(store, 100, 50, rng);
  double sq = 0.0;
  for (double v : bank.queries.values()) sq += v * v;
  EXPECT_NEAR(std::sqrt(sq / 5000.0), 0.02, 0.002);
}

struct Stack {
  num::ParamStore store;
  std::mt19937_64 rng;
  Decoder decoder;
  Tensor rel0, ent0, spans;
  Stack(std::size_t layers, MaskMode mode, std::size_t m = 3, std::uint64_t seed = 5)
      : rng(seed), decoder({8, layers, 2, 16, mode}, store, rng) {
    rel0 = num::normal_init({m, 8}, 0.0, 1.0, rng);
    ent0 = num::normal_init({m, 8}, 0.0, 1.0, rng);
    spans = num::normal_init({6, 8}, 0.0, 1.0, rng);
  }
};

TEST(BranchMask, BlocksMatchModes) {
  const std::size_t m = 3;
  for (MaskMode mode : kModes) {
    const num::Mask mask = branch_mask(m, mode);
    for (std::size_t i = 0; i < 2 * m; ++i) {
      for (std::size_t j = 0; j < 2 * m; ++j) {
        const bool rel_row = i < m, rel_col = j < m;
        bool expected = true;
        if (rel_row && !rel_col) expected = mode == MaskMode::full || mode == MaskMode::no_rel_to_ent;
        if (!rel_row && rel_col) expected = mode == MaskMode::full || mode == MaskMode::no_ent_to_rel;
        EXPECT_EQ(mask.allowed(i, j), expected);
      }
    }
  }
  EXPECT_EQ(mask_mode_from_string("no_cross"), MaskMode::no_cross);
  EXPECT_THROW(mask_mode_from_string("none"), ConfigError);
}

TEST(Decoder, MaskedWeightsAreExactlyZeroEverywhere) {
  for (MaskMode mode : kModes) {
    Stack s(3, mode);
    AttentionTrace trace;
    s.decoder(s.rel0, s.ent0, s.spans, {}, &trace);
    const num::Mask mask = branch_mask(3, mode);
    ASSERT_EQ(trace.self_attention.size(), 3u);
    for (const auto& layer : trace.self_attention) {
      ASSERT_EQ(layer.size(), 2u);
      for (const auto& w : layer) {
        for (std::size_t i = 0; i < 6; ++i) {
          for (std::size_t j = 0; j < 6; ++j) {
            if (!mask.allowed(i, j)) EXPECT_EQ(w(i, j), 0.0);
            else EXPECT_GT(w(i, j), 0.0);
          }
        }
      }
    }
    EXPECT_EQ(trace.to_json(3)["layers"].size(), 3u);
  }
}

// Gradient of a random linear read-out of Q_r with respect to Q_e0.
std::vector<double> rel_wrt_ent(MaskMode mode) {
  Stack s(1, mode);
  Tensor ent0 = s.ent0.clone();
  ent0.set_requires_grad(true);
  std::mt19937_64 rng(99);
  Tensor probe = num::normal_init({3, 8}, 0.0, 1.0, rng);
  num::Tape tape;
  {
    num::Tape::Scope scope(&tape);
    auto [rel, ent] = s.decoder(s.rel0, ent0, s.spans, {});
    tape.backward(num::sum(num::mul(rel, probe)));
  }
  return ent0.grad();
}

TEST(Decoder, NoCrossIsolatesRelationBranch) {
  for (double g : rel_wrt_ent(MaskMode::no_cross)) EXPECT_LE(std::abs(g), 1e-12);
  for (double g : rel_wrt_ent(MaskMode::no_ent_to_rel)) EXPECT_LE(std::abs(g), 1e-12);
  double full = 0.0;
  for (double g : rel_wrt_ent(MaskMode::full)) full += std::abs(g);
  EXPECT_GT(full, 1e-6);
}

TEST(Decoder, ShapesPreservedForEveryDepth) {
  for (std::size_t layers : {1u, 2u, 5u}) {
    Stack s(layers, MaskMode::full, 1);
    auto [rel, ent] = s.decoder(s.rel0, s.ent0, s.spans, {});
    EXPECT_EQ(rel.rows(), 1u);
    EXPECT_EQ(rel.cols(), 8u);
    EXPECT_EQ(ent.rows(), 1u);
    EXPECT_EQ(ent.cols(), 8u);
  }
}

TEST(Decoder, PermutingQueriesPermutesOutputs) {
  for (MaskMode mode : kModes) {
    Stack s(2, mode, 4);
    const std::vector<std::size_t> perm{2, 0, 3, 1};
    auto [rel, ent] = s.decoder(s.rel0, s.ent0, s.spans, {});
    auto [prel, pent] = s.decoder(num::gather_rows(s.rel0, perm), num::gather_rows(s.ent0, perm), s.spans, {});
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t c = 0; c < 8; ++c) {
        EXPECT_NEAR(prel(i, c), rel(perm[i], c), 1e-12);
        EXPECT_NEAR(pent(i, c), ent(perm[i], c), 1e-12);
      }
    }
  }
}

TEST(Decoder, RejectsBadOptions) {
  num::ParamStore store;
  std::mt19937_64 rng(1);
  EXPECT_THROW(Decoder({8, 0, 2, 16, MaskMode::full}, store, rng), ConfigError);
  EXPECT_THROW(Decoder({8, 1, 3, 16, MaskMode::full}, store, rng), ConfigError);
}

}  // namespace
}  // namespace qidn::decoder
