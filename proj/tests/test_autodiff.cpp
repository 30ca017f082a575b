/*
 * Copyright 2026 The TSCAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "support/oracles.hpp"
#include "tscan/autodiff.hpp"
#include "tscan/param_store.hpp"

namespace tscan {
namespace {

using testing::check_input_gradients;
using testing::random_tensor;

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_EQ(Tensor({2, 3}).size(), 6u);
}

TEST(Matmul, IdentityAndDot) {
  const Tensor id = Tensor::matrix({{1, 0}, {0, 1}});
  const Tensor b = Tensor::matrix({{3, 4}, {5, 6}});
  EXPECT_EQ(kernels::matmul(id, b), b);
  EXPECT_EQ(kernels::matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})).item(), 11.0);
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    kernels::matmul(Tensor({2, 3}), Tensor({4, 2}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2, 3]"), std::string::npos);
    EXPECT_NE(msg.find("[4, 2]"), std::string::npos);
  }
}

TEST(Matmul, GradientOfSumIsOnesTimesBTranspose) {
  std::mt19937_64 rng(11);
  const Tensor a = random_tensor({3, 4}, rng);
  const Tensor b = random_tensor({4, 2}, rng);
  Tape tape;
  Var av = tape.leaf(a), bv = tape.leaf(b);
  tape.backward(ad::sum(ad::matmul(av, bv)));
  const Tensor expected = kernels::matmul(Tensor({3, 2}, 1.0), kernels::transpose(b));
  const Tensor got = tape.grad(av);
  for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], expected[i], 1e-12);

  auto check = check_input_gradients(
      [](Tape&, const std::vector<Var>& v) { return ad::sum(ad::matmul(v[0], v[1])); }, {a, b});
  EXPECT_LT(check.max_rel_error, 1e-4) << check.worst;
}

TEST(Softmax, ExamplesAndStability) {
  const Tensor u = kernels::softmax(Tensor::vector({0, 0, 0}), 0);
  for (double v : u.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);

  const Tensor big = kernels::softmax(Tensor::vector({1000, 0}), 0);
  EXPECT_TRUE(std::isfinite(big[0]) && std::isfinite(big[1]));
  EXPECT_NEAR(big[0], 1.0, 1e-15);
  EXPECT_NEAR(big[1], 0.0, 1e-15);

  // Extended-precision exp/sum oracle.
  const Tensor s = kernels::softmax(Tensor::vector({1, 2, 3}), 0);
  long double total = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
  for (int i = 0; i < 3; ++i)
    EXPECT_NEAR(s[static_cast<std::size_t>(i)], static_cast<double>(std::exp(1.0L + i) / total), 1e-15);
}

TEST(Softmax, RowsSumToOneOverWideRange) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const Tensor x = random_tensor({7, 13}, rng, -1e3, 1e3);
    const Tensor y = kernels::softmax(x, -1);
    for (std::size_t r = 0; r < 7; ++r) {
      double sum = 0;
      for (std::size_t c = 0; c < 13; ++c) {
        EXPECT_GE(y.at(r, c), 0.0);
        sum += y.at(r, c);
      }
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(Softmax, NonLastAxis) {
  const Tensor x = Tensor::matrix({{1, 5}, {3, 2}});
  const Tensor y = kernels::softmax(x, 0);
  EXPECT_NEAR(y.at(0, 0) + y.at(1, 0), 1.0, 1e-15);
  EXPECT_NEAR(y.at(0, 1) + y.at(1, 1), 1.0, 1e-15);
  EXPECT_THROW(kernels::softmax(x, 2), ShapeError);
}

TEST(ElementwiseOps, Shapes) {
  EXPECT_EQ(kernels::transpose(Tensor({12, 49})).shape(), (Shape{49, 12}));
  const Tensor c = kernels::concat(std::vector<Tensor>{Tensor({2, 3}), Tensor({2, 5})}, 1);
  EXPECT_EQ(c.shape(), (Shape{2, 8}));
  EXPECT_THROW(kernels::concat(std::vector<Tensor>{Tensor({2, 3}), Tensor({3, 5})}, 1), ShapeError);
  EXPECT_THROW(kernels::add(Tensor({2, 3}), Tensor({3, 2})), ShapeError);
}

TEST(ElementwiseOps, TransposeIsAnInvolution) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<std::size_t> ext(1, 9);
  for (int trial = 0; trial < 100; ++trial) {
    const Tensor x = random_tensor({ext(rng), ext(rng), ext(rng)}, rng, -1e6, 1e6);
    EXPECT_EQ(kernels::transpose(kernels::transpose(x)), x);
  }
}

TEST(LayerNorm, RowsAreStandardized) {
  std::mt19937_64 rng(8);
  const Tensor x = random_tensor({6, 32}, rng, -1000, 1000);
  Tape tape;
  const Tensor y = ad::layer_norm(tape.constant(x)).value();
  for (std::size_t r = 0; r < 6; ++r) {
    double mu = 0, raw_mu = 0;
    for (std::size_t c = 0; c < 32; ++c) {
      mu += y.at(r, c);
      raw_mu += x.at(r, c);
    }
    mu /= 32;
    raw_mu /= 32;
    double var = 0, raw_var = 0;
    for (std::size_t c = 0; c < 32; ++c) {
      var += (y.at(r, c) - mu) * (y.at(r, c) - mu);
      raw_var += (x.at(r, c) - raw_mu) * (x.at(r, c) - raw_mu);
    }
    var /= 32;
    raw_var /= 32;
    EXPECT_NEAR(mu, 0.0, 1e-9);
    // Exact identity with the 1e-5 epsilon; ~1 for these high-variance rows.
    EXPECT_NEAR(var, raw_var / (raw_var + 1e-5), 1e-9);
    EXPECT_NEAR(var, 1.0, 1e-9);
  }
}

TEST(Backward, SimpleAnalyticGradients) {
  std::mt19937_64 rng(1);
  const Tensor w = random_tensor({3, 4}, rng);
  {
    Tape tape;
    Var v = tape.leaf(w);
    tape.backward(ad::sum(v));
    EXPECT_EQ(tape.grad(v), Tensor({3, 4}, 1.0));
  }
  {
    Tape tape;
    Var v = tape.leaf(w);
    tape.backward(ad::sum(ad::mul(v, v)));
    const Tensor g = tape.grad(v);
    for (std::size_t i = 0; i < w.size(); ++i) EXPECT_DOUBLE_EQ(g[i], 2 * w[i]);
  }
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape tape;
  Var v = tape.leaf(Tensor({2, 2}, 1.0));
  EXPECT_THROW(tape.backward(v), ShapeError);
}

TEST(Backward, SharedNodeAccumulatesBothPaths) {
  std::mt19937_64 rng(2);
  const Tensor x = random_tensor({4, 3}, rng);
  const Tensor w1 = random_tensor({3, 2}, rng);
  const Tensor w2 = random_tensor({3, 2}, rng);
  auto path_grad = [&](bool first, bool second) {
    Tape tape;
    Var xv = tape.leaf(x);
    Var h = ad::relu(xv);
    Var loss = tape.constant(Tensor::scalar(0.0));
    if (first) loss = ad::add(loss, ad::sum(ad::matmul(h, tape.constant(w1))));
    if (second) loss = ad::add(loss, ad::sum(ad::sigmoid(ad::matmul(h, tape.constant(w2)))));
    tape.backward(loss);
    return tape.grad(xv);
  };
  const Tensor both = path_grad(true, true);
  const Tensor sum = kernels::add(path_grad(true, false), path_grad(false, true));
  for (std::size_t i = 0; i < both.size(); ++i) EXPECT_NEAR(both[i], sum[i], 1e-14);
}

// Finite-difference sweep over every differentiable op on several random shapes.
class OpGradient : public ::testing::TestWithParam<int> {};

TEST_P(OpGradient, MatchesCentralDifferences) {
  std::mt19937_64 rng(100 + static_cast<unsigned>(GetParam()));
  std::uniform_int_distribution<std::size_t> ext(2, 5);
  const std::size_t b = ext(rng), m = ext(rng), k = ext(rng), p = ext(rng);
  const Tensor weights2 = random_tensor({m, k}, rng);
  auto weighted = [](Tape& t, Var y, const Tensor& w) { return ad::sum(ad::mul(y, t.constant(w))); };

  struct Case {
    const char* name;
    testing::InputLoss loss;
    std::vector<Tensor> inputs;
  };
  const Tensor wp = random_tensor({m, p}, rng);
  const Tensor wkm = random_tensor({k, m}, rng);
  const Tensor w3 = random_tensor({b, m, p}, rng);
  const Tensor wmean = random_tensor({m}, rng);
  const Tensor wcat = random_tensor({m, k + p}, rng);
  const Tensor wslice = random_tensor({m, 2}, rng);
  Tensor targets({m, k}, 0.0);
  for (std::size_t i = 0; i < m; ++i) targets.at(i, i % k) = 1.0;
  Tensor bin_targets({m, k});
  for (std::size_t i = 0; i < bin_targets.size(); ++i) bin_targets[i] = static_cast<double>(i % 2);

  std::vector<Case> cases{
      {"matmul", [&](Tape& t, const std::vector<Var>& v) { return weighted(t, ad::matmul(v[0], v[1]), wp); },
       {random_tensor({m, k}, rng), random_tensor({k, p}, rng)}},
      {"batched_matmul",
       [&](Tape& t, const std::vector<Var>& v) { return weighted(t, ad::matmul(v[0], v[1]), w3); },
       {random_tensor({b, m, k}, rng), random_tensor({b, k, p}, rng)}},
      {"add_sub_mul",
       [&](Tape& t, const std::vector<Var>& v) {
         return weighted(t, ad::mul(ad::sub(ad::add(v[0], v[1]), v[1]), ad::scale(v[1], 1.7)), weights2);
       },
       {random_tensor({m, k}, rng), random_tensor({m, k}, rng)}},
      {"relu_sigmoid",
       [&](Tape& t, const std::vector<Var>& v) { return weighted(t, ad::sigmoid(ad::relu(v[0])), weights2); },
       {random_tensor({m, k}, rng, 0.05, 1.0)}},
      {"transpose", [&](Tape& t, const std::vector<Var>& v) { return weighted(t, ad::transpose(v[0]), wkm); },
       {random_tensor({m, k}, rng)}},
      {"concat",
       [&](Tape& t, const std::vector<Var>& v) { return weighted(t, ad::concat({v[0], v[1]}, 1), wcat); },
       {random_tensor({m, k}, rng), random_tensor({m, p}, rng)}},
      {"slice_reshape",
       [&](Tape& t, const std::vector<Var>& v) {
         Var s = ad::slice(v[0], 1, 0, 2);
         return weighted(t, ad::reshape(ad::reshape(s, {2 * m}), {m, 2}), wslice);
       },
       {random_tensor({m, k}, rng)}},
      {"mean", [&](Tape& t, const std::vector<Var>& v) { return weighted(t, ad::mean(v[0], 1), wmean); },
       {random_tensor({m, k}, rng)}},
      {"softmax",
       [&](Tape& t, const std::vector<Var>& v) { return weighted(t, ad::softmax(v[0], -1), weights2); },
       {random_tensor({m, k}, rng, -3, 3)}},
      {"softmax_axis0",
       [&](Tape& t, const std::vector<Var>& v) { return weighted(t, ad::softmax(v[0], 0), weights2); },
       {random_tensor({m, k}, rng, -3, 3)}},
      {"layer_norm_affine",
       [&](Tape& t, const std::vector<Var>& v) {
         return weighted(t, ad::add_row(ad::mul_row(ad::layer_norm(v[0]), v[1]), v[2]), weights2);
       },
       {random_tensor({m, k}, rng), random_tensor({k}, rng), random_tensor({k}, rng)}},
      {"maximum_renormalize",
       [&](Tape& t, const std::vector<Var>& v) {
         return weighted(t, ad::renormalize(ad::maximum(v[0], v[1])), weights2);
       },
       {random_tensor({m, k}, rng, 0.1, 1.0), random_tensor({m, k}, rng, 0.1, 1.0)}},
      {"categorical_cross_entropy",
       [&](Tape&, const std::vector<Var>& v) {
         return ad::categorical_cross_entropy(ad::softmax(v[0], -1), targets);
       },
       {random_tensor({m, k}, rng, -2, 2)}},
      {"binary_cross_entropy",
       [&](Tape&, const std::vector<Var>& v) {
         return ad::binary_cross_entropy(ad::sigmoid(v[0]), bin_targets, 2.5);
       },
       {random_tensor({m, k}, rng, -2, 2)}},
  };
  for (auto& c : cases) {
    auto r = check_input_gradients(c.loss, c.inputs);
    EXPECT_LT(r.max_rel_error, 1e-4) << c.name << " worst at " << r.worst;
    EXPECT_GT(r.checked, 0u);
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, OpGradient, ::testing::Range(0, 6));

TEST(Dropout, InactiveAtZeroRateAndScalesKeptEntries) {
  std::mt19937_64 rng(4);
  Tape tape;
  Var x = tape.leaf(Tensor({50, 20}, 1.0));
  EXPECT_EQ(ad::dropout(x, 0.0, rng).id(), x.id());
  const Tensor y = ad::dropout(x, 0.5, rng).value();
  for (double v : y.data()) EXPECT_TRUE(v == 0.0 || v == 2.0);
}

TEST(Losses, ClampAndDomain) {
  Tape tape;
  Var p = tape.leaf(Tensor::vector({1.0, 0.0}));
  const double l = ad::binary_cross_entropy(p, Tensor::vector({1.0, 0.0})).value().item();
  EXPECT_LE(l, 1e-6);
  Var half = tape.leaf(Tensor::vector({0.5}));
  EXPECT_NEAR(ad::binary_cross_entropy(half, Tensor::vector({1.0})).value().item(), std::log(2.0), 1e-15);
  Var bad = tape.leaf(Tensor::vector({1.2}));
  EXPECT_THROW(ad::binary_cross_entropy(bad, Tensor::vector({1.0})), std::domain_error);
}

TEST(Graph, DependsOnFollowsParents) {
  Tape tape;
  Var a = tape.leaf(Tensor({2, 2}, 1.0));
  Var b = tape.leaf(Tensor({2, 2}, 2.0));
  Var c = ad::relu(a);
  Var d = ad::add(c, c);
  EXPECT_TRUE(tape.depends_on(d, a));
  EXPECT_FALSE(tape.depends_on(d, b));
}

TEST(ParamStore, SaveLoadRoundTripIsBitExact) {
  std::mt19937_64 rng(9);
  ParamStore store;
  store.add("a.w", random_tensor({3, 4}, rng, -1e300, 1e300));
  store.add("a.b", Tensor::vector({-0.0, 1e-320, 3.5}));
  store.add("z", Tensor::scalar(std::nextafter(1.0, 2.0)));
  EXPECT_THROW(store.add("z", Tensor::scalar(1)), std::invalid_argument);
  const auto path = std::filesystem::temp_directory_path() / "tscan_params_roundtrip.params";
  store.save(path.string());
  const ParamStore loaded = ParamStore::load(path.string());
  EXPECT_TRUE(loaded == store);
  std::filesystem::remove(path);
}

TEST(ParamStore, BindsEachParameterOncePerTape) {
  ParamStore store;
  store.add("w", Tensor::vector({1.0, 2.0}));
  Tape tape;
  Var a = tape.param(store, "w");
  Var b = tape.param(store, "w");
  EXPECT_EQ(a.id(), b.id());
  tape.backward(ad::sum(ad::add(ad::mul(a, a), b)));
  const Gradients g = tape.gradients();
  EXPECT_DOUBLE_EQ(g.at("w")[0], 3.0);
  EXPECT_DOUBLE_EQ(g.at("w")[1], 5.0);
}

}  // namespace
}  // namespace tscan
