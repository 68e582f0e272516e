#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <random>

#include "helpers.hpp"
#include "qidn/encoder.hpp"
#include "qidn/error.hpp"
#include "qidn/numerics/ops.hpp"

namespace qidn::encoder {
namespace {

struct Fixture {
  num::ParamStore store;
  std::mt19937_64 rng{17};
  BiLstmEncoder lstm{{10, 8, 2}, store, rng};
};

TEST(Spans, CountsMatchDirectEnumeration) {
  EXPECT_EQ(enumerate_spans(3, 8).size(), 6u);
  EXPECT_EQ(enumerate_spans(5, 2).size(), 9u);
  EXPECT_EQ(enumerate_spans(1, 1), (std::vector<SpanBounds>{{0, 0}}));
  for (std::size_t n = 1; n <= 50; ++n) {
    for (std::size_t len = 1; len <= 10; ++len) {
      std::size_t expected = 0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i; j < n; ++j) expected += (j - i + 1 <= len) ? 1 : 0;
      }
      const auto spans = enumerate_spans(n, len);
      ASSERT_EQ(spans.size(), expected);
      for (std::size_t k = 1; k < spans.size(); ++k) {
        EXPECT_TRUE(spans[k - 1].start < spans[k].start ||
                    (spans[k - 1].start == spans[k].start && spans[k - 1].end < spans[k].end));
      }
    }
  }
}

TEST(BiLstm, ShapeAndDeterminism) {
  Fixture f;
  const Tensor one = f.lstm.encode({3}, {});
  EXPECT_EQ(one.rows(), 1u);
  EXPECT_EQ(one.cols(), 8u);
  EXPECT_EQ(test::values(f.lstm.encode({1, 4, 5}, {})), test::values(f.lstm.encode({1, 4, 5}, {})));
}

TEST(BiLstm, OrderSensitive) {
  Fixture f;
  const Tensor ab = f.lstm.encode({2, 3}, {});
  const Tensor ba = f.lstm.encode({3, 2}, {});
  // Row of token 2 in each order.
  double diff = 0.0;
  for (std::size_t c = 0; c < 8; ++c) diff += std::abs(ab(0, c) - ba(1, c));
  EXPECT_GT(diff, 1e-6);
}

TEST(BiLstm, RejectsOutOfVocabularyIds) {
  Fixture f;
  EXPECT_THROW(f.lstm.encode({10}, {}), DataError);
  EXPECT_THROW(f.lstm.encode({}, {}), DataError);
}

TEST(SpanRepresenter, SingleTokenSpanUsesTheTokenTwice) {
  num::ParamStore store;
  std::mt19937_64 rng(4);
  SpanRepresenter spans({4, 3, 2}, store, rng);
  Tensor h = num::normal_init({3, 4}, 0.0, 1.0, rng);
  const Tensor out = spans(h, {{1, 1}});
  // Reconstruct [H_1; H_1; phi(1)] W + b by hand.
  const auto* w = store.find("encoder.span.projection.weight");
  const auto* b = store.find("encoder.span.projection.bias");
  ASSERT_NE(w, nullptr);
  ASSERT_NE(b, nullptr);
  std::vector<double> joined;
  for (int twice = 0; twice < 2; ++twice) {
    for (std::size_t c = 0; c < 4; ++c) joined.push_back(h(1, c));
  }
  for (std::size_t c = 0; c < 2; ++c) joined.push_back(spans.length_embedding()(0, c));
  for (std::size_t o = 0; o < 4; ++o) {
    double acc = b->tensor.values()[o];
    for (std::size_t i = 0; i < joined.size(); ++i) acc += joined[i] * w->tensor(i, o);
    EXPECT_NEAR(out(0, o), acc, 1e-12);
  }
}

TEST(SpanRepresenter, DependsOnTokenVectors) {
  num::ParamStore store;
  std::mt19937_64 rng(4);
  SpanRepresenter spans({4, 3, 2}, store, rng);
  Tensor h1 = num::normal_init({3, 4}, 0.0, 1.0, rng);
  Tensor h2 = num::normal_init({3, 4}, 0.0, 1.0, rng);
  EXPECT_NE(test::values(spans(h1, {{0, 2}})), test::values(spans(h2, {{0, 2}})));
}

TEST(SpanRepresenter, LengthOnlyDifferenceComesFromLengthEmbedding) {
  num::ParamStore store;
  std::mt19937_64 rng(4);
  SpanRepresenter spans({4, 3, 2}, store, rng);
  // Tokens 0 and 1 identical: spans (1,1) and (0,1) share boundary vectors.
  Tensor h = Tensor::matrix(2, 4, {0.5, -1, 2, 0.1, 0.5, -1, 2, 0.1});
  const Tensor out = spans(h, {{1, 1}, {0, 1}});
  bool differs = false;
  for (std::size_t c = 0; c < 4; ++c) differs |= out(0, c) != out(1, c);
  EXPECT_TRUE(differs);
  // Equalizing the two length rows removes the difference.
  Tensor table = spans.length_embedding();
  auto v = table.mutable_values();
  v[2] = v[0];
  v[3] = v[1];
  const Tensor ablated = spans(h, {{1, 1}, {0, 1}});
  for (std::size_t c = 0; c < 4; ++c) EXPECT_EQ(ablated(0, c), ablated(1, c));
}

TEST(SpanRepresenter, RejectsBadSpans) {
  num::ParamStore store;
  std::mt19937_64 rng(4);
  SpanRepresenter spans({4, 2, 2}, store, rng);
  Tensor h = num::normal_init({3, 4}, 0.0, 1.0, rng);
  EXPECT_THROW(spans(h, {{0, 2}}), ConfigError);
  EXPECT_THROW(spans(h, {{2, 3}}), ConfigError);
}

TEST(SentenceEncoder, ShapeContract) {
  num::ParamStore store;
  std::mt19937_64 rng(6);
  SentenceEncoder enc(std::make_unique<BiLstmEncoder>(BiLstmOptions{12, 8, 1}, store, rng),
                      SpanRepresenter({8, 3, 4}, store, rng));
  const auto out = enc({2, 3, 4, 5, 6}, {});
  EXPECT_EQ(out.tokens.rows(), 5u);
  EXPECT_EQ(out.spans.rows(), enumerate_spans(5, 3).size());
  EXPECT_EQ(out.spans.cols(), 8u);
  EXPECT_EQ(out.bounds, enumerate_spans(5, 3));
}

}  // namespace
}  // namespace qidn::encoder
