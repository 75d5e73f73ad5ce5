#include "nmtadv/numerics/grad_check.hpp"
#include "nmtadv/numerics/graph.hpp"
#include "nmtadv/random.hpp"

#include <gtest/gtest.h>

#include <functional>

namespace nmtadv {
namespace {

using Fn = std::function<Var<double>(BasicGraph<double>&, Var<double>)>;

MatrixD random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double scale = 1.0) {
  MatrixD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-scale, scale);
  return m;
}

TEST(Backward, ProductRuleExample) {
  Graph g;
  MatrixF x(1, 2), y(1, 2);
  x << 1, 2;
  y << 3, 4;
  auto vx = g.input(x, true);
  auto vy = g.input(y);
  auto f = sum(vx * vy);
  g.backward(f);
  EXPECT_FLOAT_EQ(g.grad(vx)(0, 0), 3.0f);
  EXPECT_FLOAT_EQ(g.grad(vx)(0, 1), 4.0f);
  EXPECT_FLOAT_EQ(f.value()(0, 0), 11.0f);
}

TEST(Backward, SumOfSoftmaxHasZeroGradient) {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    Graph g;
    auto z = g.input(random_matrix(rng, 2, 5, 3.0).cast<float>(), true);
    g.backward(sum(softmax(z)));
    EXPECT_LT(g.grad(z).cwiseAbs().maxCoeff(), 1e-6f);
  }
}

TEST(Backward, RejectsNonScalarOutput) {
  Graph g;
  auto x = g.input(MatrixF::Ones(2, 2), true);
  EXPECT_THROW(g.backward(tanh(x)), ContractViolation);
}

TEST(Backward, RepeatedCallsAreIdentical) {
  Rng rng(11);
  Graph g;
  auto x = g.input(random_matrix(rng, 3, 4).cast<float>(), true);
  auto w = g.input(random_matrix(rng, 4, 2).cast<float>(), true);
  auto f = sum(tanh(matmul(x, w)) * tanh(matmul(x, w)));
  g.backward(f);
  const MatrixF gx = g.grad(x);
  const MatrixF gw = g.grad(w);
  g.backward(f);
  EXPECT_EQ(gx, g.grad(x));
  EXPECT_EQ(gw, g.grad(w));
}

TEST(Backward, NonDifferentiableInputsUntouched) {
  Graph g;
  auto x = g.input(MatrixF::Ones(1, 3), true);
  auto c = g.input(MatrixF::Ones(1, 3));
  g.backward(sum(x * c));
  EXPECT_FALSE(g.requires_grad(c));
  EXPECT_THROW((void)g.grad(c), ContractViolation);
}

TEST(Backward, MultipleUsesAccumulate) {
  Graph g;
  auto x = g.input(MatrixF::Constant(1, 1, 3.0f), true);
  g.backward(sum(x * x + x));  // d/dx (x^2 + x) = 2x + 1
  EXPECT_FLOAT_EQ(g.grad(x)(0, 0), 7.0f);
}

TEST(Softmax, RowsAreDistributions) {
  Rng rng(5);
  Graph g;
  auto p = softmax(g.input(random_matrix(rng, 6, 9, 20.0).cast<float>()));
  for (Eigen::Index r = 0; r < 6; ++r) {
    EXPECT_GE(p.value().row(r).minCoeff(), 0.0f);
    EXPECT_NEAR(p.value().row(r).sum(), 1.0f, 1e-6f);
  }
}

TEST(GradCheck, LinearFunctionIsExact) {
  Rng rng(1);
  const MatrixD w = random_matrix(rng, 3, 4);
  const Fn f = [&](BasicGraph<double>& g, Var<double> x) { return sum(x * g.input(w)); };
  EXPECT_LE(grad_check<double>(f, random_matrix(rng, 3, 4), 1e-3), 1e-6);
}

TEST(GradCheck, ConstantFunctionHasZeroError) {
  const Fn f = [](BasicGraph<double>& g, Var<double>) { return g.scalar(4.0); };
  EXPECT_EQ(grad_check<double>(f, MatrixD::Ones(2, 2), 1e-3), 0.0);
}

TEST(GradCheck, TwoLayerTanhNetwork) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(100 + seed);
    const MatrixD w1 = random_matrix(rng, 4, 6);
    const MatrixD w2 = random_matrix(rng, 6, 3);
    const MatrixD b1 = random_matrix(rng, 1, 6);
    const Fn f = [&](BasicGraph<double>& g, Var<double> x) {
      auto h = tanh(matmul(x, g.input(w1)) + g.input(b1));
      return mean(tanh(matmul(h, g.input(w2))));
    };
    EXPECT_LT(grad_check<double>(f, random_matrix(rng, 5, 4), 1e-3), 1e-3) << "seed " << seed;
  }
}

// Every primitive, five seeds each, checked against central differences.
struct PrimitiveCase {
  const char* name;
  Eigen::Index rows, cols;
  std::function<Var<double>(BasicGraph<double>&, Var<double>, Rng&)> build;
};

class PrimitiveGradients : public ::testing::TestWithParam<PrimitiveCase> {};

TEST_P(PrimitiveGradients, MatchFiniteDifferences) {
  const auto& pc = GetParam();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng data_rng(seed * 7 + 1);
    // Keep coordinates clear of the relu kink at 0.
    MatrixD x = random_matrix(data_rng, pc.rows, pc.cols);
    x = x.unaryExpr([](double v) { return v + (v < 0 ? -0.05 : 0.05); });
    const Fn f = [&](BasicGraph<double>& g, Var<double> in) {
      Rng rng(seed * 13 + 5);  // same constants on every evaluation
      auto out = pc.build(g, in, rng);
      // A random weighting turns any output shape into a non-degenerate scalar.
      return sum(out * g.input(random_matrix(rng, out.rows(), out.cols())));
    };
    EXPECT_LT(grad_check<double>(f, x, 1e-3), 1e-3) << pc.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(
    AllPrimitives, PrimitiveGradients,
    ::testing::Values(
        PrimitiveCase{"matmul", 3, 4, [](auto& g, auto x, Rng& r) { return matmul(x, g.input(random_matrix(r, 4, 5))); }},
        PrimitiveCase{"matmul_rhs", 4, 5, [](auto& g, auto x, Rng& r) { return matmul(g.input(random_matrix(r, 3, 4)), x); }},
        PrimitiveCase{"matmul_transposed", 3, 4,
                      [](auto& g, auto x, Rng& r) { return matmul_transposed(x, g.input(random_matrix(r, 2, 4))); }},
        PrimitiveCase{"transpose", 3, 4, [](auto&, auto x, Rng&) { return transpose(x); }},
        PrimitiveCase{"add", 3, 4, [](auto& g, auto x, Rng& r) { return x + g.input(random_matrix(r, 3, 4)); }},
        PrimitiveCase{"add_broadcast", 1, 4, [](auto& g, auto x, Rng& r) { return g.input(random_matrix(r, 3, 4)) + x; }},
        PrimitiveCase{"sub", 3, 4, [](auto& g, auto x, Rng& r) { return g.input(random_matrix(r, 3, 4)) - x; }},
        PrimitiveCase{"mul", 3, 4, [](auto&, auto x, Rng&) { return x * x; }},
        PrimitiveCase{"mul_broadcast", 1, 4, [](auto& g, auto x, Rng& r) { return g.input(random_matrix(r, 3, 4)) * x; }},
        PrimitiveCase{"scale", 3, 4, [](auto&, auto x, Rng&) { return x * 2.5; }},
        PrimitiveCase{"tanh", 3, 4, [](auto&, auto x, Rng&) { return tanh(x); }},
        PrimitiveCase{"sigmoid", 3, 4, [](auto&, auto x, Rng&) { return sigmoid(x); }},
        PrimitiveCase{"relu", 3, 4, [](auto&, auto x, Rng&) { return relu(x); }},
        PrimitiveCase{"exp", 3, 4, [](auto&, auto x, Rng&) { return exp(x); }},
        PrimitiveCase{"log", 3, 4, [](auto&, auto x, Rng&) { return log(exp(x) + x.graph->input(MatrixD::Ones(3, 4))); }},
        PrimitiveCase{"softmax", 3, 5, [](auto&, auto x, Rng&) { return softmax(x); }},
        PrimitiveCase{"log_softmax", 3, 5, [](auto&, auto x, Rng&) { return log_softmax(x); }},
        PrimitiveCase{"layer_norm", 3, 6, [](auto&, auto x, Rng&) { return layer_norm(x); }},
        PrimitiveCase{"concat_cols", 3, 4,
                      [](auto& g, auto x, Rng& r) { return g.concat_cols({x, g.input(random_matrix(r, 3, 2)), x}); }},
        PrimitiveCase{"concat_rows", 3, 4,
                      [](auto& g, auto x, Rng& r) { return g.concat_rows(std::vector{x, g.input(random_matrix(r, 1, 4))}); }},
        PrimitiveCase{"slice_rows", 4, 3, [](auto&, auto x, Rng&) { return slice_rows(x, 1, 2); }},
        PrimitiveCase{"slice_cols", 3, 5, [](auto&, auto x, Rng&) { return slice_cols(x, 2, 3); }},
        PrimitiveCase{"sum", 3, 4, [](auto&, auto x, Rng&) { return sum(x * x); }},
        PrimitiveCase{"mean", 3, 4, [](auto&, auto x, Rng&) { return mean(x * x); }},
        PrimitiveCase{"gather", 3, 4,
                      [](auto&, auto x, Rng&) {
                        static const int idx[] = {2, 0, 3};
                        return gather(x, std::span<const int>(idx));
                      }},
        PrimitiveCase{"embed", 3, 6, [](auto& g, auto x, Rng& r) { return embed(x, g.input(random_matrix(r, 6, 4))); }},
        PrimitiveCase{"attention", 4, 6,
                      [](auto& g, auto x, Rng& r) {
                        auto q = matmul(x, g.input(random_matrix(r, 6, 6)));
                        auto k = matmul(x, g.input(random_matrix(r, 6, 6)));
                        auto v = matmul(x, g.input(random_matrix(r, 6, 6)));
                        return matmul(softmax(matmul_transposed(q, k) * (1.0 / std::sqrt(6.0))), v);
                      }}),
    [](const auto& info) { return std::string(info.param.name); });

TEST(Graph, TruncateDropsLaterNodes) {
  Graph g;
  auto a = g.input(MatrixF::Ones(2, 2));
  const auto mark = g.size();
  (void)tanh(a);
  (void)sigmoid(a);
  g.truncate(mark);
  EXPECT_EQ(g.size(), mark);
}

TEST(Graph, ShapeMismatchIsContractViolation) {
  Graph g;
  auto a = g.input(MatrixF::Ones(2, 3));
  auto b = g.input(MatrixF::Ones(2, 3));
  EXPECT_THROW((void)matmul(a, b), ContractViolation);
}

}  // namespace
}  // namespace nmtadv
