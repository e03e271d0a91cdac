#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dp3/tape.hpp"
#include "support/grad_check.hpp"

using dp3::Tape;
using dp3::Tensor;
using dp3::Var;
using dp3::testing::fd_check;
using dp3::testing::random_tensor;

TEST_CASE("linear identity case") {
  Tape t;
  Var x = t.constant(Tensor::row({1, 2}));
  Var w = t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Var b = t.constant(Tensor::vec({0, 0}));
  Var y = t.linear(x, w, b);
  CHECK(t.value(y).at(0, 0) == 1.0);
  CHECK(t.value(y).at(0, 1) == 2.0);
}

TEST_CASE("linear zero input passes bias through") {
  Tape t;
  Var x = t.constant(Tensor::row({0, 0}));
  Var w = t.constant(Tensor::matrix(2, 2, {9, 8, 7, 6}));
  Var b = t.constant(Tensor::vec({3, 4}));
  Var y = t.linear(x, w, b);
  CHECK(t.value(y).at(0, 0) == 3.0);
  CHECK(t.value(y).at(0, 1) == 4.0);
}

TEST_CASE("linear shape mismatch throws") {
  Tape t;
  Var x = t.constant(Tensor::row({1, 2, 3}));
  Var w = t.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  Var b = t.constant(Tensor::vec({0, 0}));
  CHECK_THROWS_AS(t.linear(x, w, b), std::invalid_argument);
}

TEST_CASE("linear gradient wrt all inputs matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dp3::Rng rng(dp3::derive_seed(seed, "lin-fd"));
    std::vector<Tensor> leaves = {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng),
                                  random_tensor({2}, rng)};
    double worst = fd_check(leaves, [](Tape& t, const std::vector<Var>& v) {
      return t.sum(t.linear(v[0], v[1], v[2]));
    });
    CHECK(worst < 1e-6);  // linear in every input, so central differences are near-exact
  }
}

TEST_CASE("relu forward cases") {
  Tape t;
  Var x = t.constant(Tensor::row({-1, 0, 2}));
  const Tensor& y = t.value(t.relu(x));
  CHECK(y[0] == 0.0);
  CHECK(y[1] == 0.0);
  CHECK(y[2] == 2.0);

  Var p = t.constant(Tensor::row({0.5, 1.5, 7.0}));
  CHECK(dp3::exact_equal(t.value(t.relu(p)), t.value(p)));
}

TEST_CASE("relu gradient away from the kink") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dp3::Rng rng(dp3::derive_seed(seed, "relu-fd"));
    Tensor x({2, 5});
    for (std::size_t i = 0; i < x.numel(); ++i) {
      double v = rng.normal();
      while (std::abs(v) < 0.1) v = rng.normal();  // keep clear of 0
      x[i] = v;
    }
    double worst = fd_check({x}, [](Tape& t, const std::vector<Var>& v) {
      return t.sum(t.relu(v[0]));
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("relu subgradient at zero is zero") {
  Tape t;
  Var x = t.constant(Tensor::row({0.0, 2.0}));
  Var y = t.sum(t.relu(x));
  t.backward(y);
  CHECK(t.grad(x)[0] == 0.0);
  CHECK(t.grad(x)[1] == 1.0);
}

TEST_CASE("layer_norm constant row collapses to bias") {
  Tape t;
  Var x = t.constant(Tensor::row({5, 5, 5}));
  Var g = t.constant(Tensor::full({3}, 1.0));
  Var b = t.constant(Tensor::zeros({3}));
  const Tensor& y = t.value(t.layer_norm(x, g, b));
  for (std::size_t j = 0; j < 3; ++j) CHECK(y[j] == 0.0);
}

TEST_CASE("layer_norm leaves unit-variance rows alone as eps vanishes") {
  Tape t;
  Var x = t.constant(Tensor::row({-1, 1}));
  Var g = t.constant(Tensor::full({2}, 1.0));
  Var b = t.constant(Tensor::zeros({2}));
  const Tensor& y = t.value(t.layer_norm(x, g, b, 1e-12));
  CHECK(y[0] == doctest::Approx(-1.0).epsilon(1e-9));
  CHECK(y[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("layer_norm gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dp3::Rng rng(dp3::derive_seed(seed, "ln-fd"));
    std::vector<Tensor> leaves = {random_tensor({2, 5}, rng), random_tensor({5}, rng),
                                  random_tensor({5}, rng)};
    double worst = fd_check(leaves, [](Tape& t, const std::vector<Var>& v) {
      return t.sum(t.layer_norm(v[0], v[1], v[2], 1e-5));
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("max pool columnwise") {
  Tape t;
  Var x = t.constant(Tensor::matrix(2, 2, {1, 4, 3, 2}));
  const Tensor& y = t.value(t.max_pool_rows(x));
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 4.0);

  Var single = t.constant(Tensor::row({7, 8, 9}));
  CHECK(dp3::exact_equal(t.value(t.max_pool_rows(single)), t.value(single)));

  Var empty = t.constant(Tensor({0, 3}));
  CHECK_THROWS_AS(t.max_pool_rows(empty), std::invalid_argument);
}

TEST_CASE("max pool is bitwise permutation invariant") {
  dp3::Rng rng(101);
  Tensor x = random_tensor({6, 4}, rng);
  Tape t;
  Tensor base = t.value(t.max_pool_rows(t.constant(x)));
  std::vector<std::size_t> perm = {5, 2, 0, 3, 1, 4};
  Tensor shuffled({6, 4});
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 4; ++j) shuffled.at(i, j) = x.at(perm[i], j);
  Tensor permuted = t.value(t.max_pool_rows(t.constant(shuffled)));
  CHECK(dp3::exact_equal(base, permuted));
}

TEST_CASE("max pool ties route gradient to the lowest row") {
  Tape t;
  Var x = t.constant(Tensor::matrix(2, 2, {2, 1, 2, 3}));
  Var y = t.sum(t.max_pool_rows(x));
  t.backward(y);
  const Tensor& g = t.grad(x);
  CHECK(g.at(0, 0) == 1.0);  // column 0 tie between rows 0 and 1
  CHECK(g.at(1, 0) == 0.0);
  CHECK(g.at(0, 1) == 0.0);
  CHECK(g.at(1, 1) == 1.0);
}

TEST_CASE("max pool gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dp3::Rng rng(dp3::derive_seed(seed, "pool-fd"));
    Tensor x = random_tensor({5, 3}, rng);  // continuous draws, ties have measure zero
    double worst = fd_check({x}, [](Tape& t, const std::vector<Var>& v) {
      return t.sum(t.max_pool_rows(v[0]));
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("mse basics") {
  Tape t;
  Var a = t.constant(Tensor::row({1, 2, 3}));
  Var b = t.constant(Tensor::row({1, 2, 3}));
  CHECK(t.value(t.mse(a, b))[0] == 0.0);

  Var p = t.constant(Tensor::row({0, 0}));
  Var q = t.constant(Tensor::row({1, 1}));
  CHECK(t.value(t.mse(p, q))[0] == 1.0);

  Var r = t.constant(Tensor::row({1, 2}));
  Var s = t.constant(Tensor::row({1, 2, 3}));
  CHECK_THROWS_AS(t.mse(r, s), std::invalid_argument);
}

TEST_CASE("mse gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dp3::Rng rng(dp3::derive_seed(seed, "mse-fd"));
    std::vector<Tensor> leaves = {random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)};
    double worst = fd_check(leaves, [](Tape& t, const std::vector<Var>& v) {
      return t.mse(v[0], v[1]);
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("concat_cols forward and gradient") {
  Tape t;
  Var a = t.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  Var b = t.constant(Tensor::matrix(2, 1, {5, 6}));
  const Tensor& y = t.value(t.concat_cols(a, b));
  CHECK(y.cols() == 3);
  CHECK(y.at(0, 2) == 5.0);
  CHECK(y.at(1, 0) == 3.0);

  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dp3::Rng rng(dp3::derive_seed(seed, "cat-fd"));
    std::vector<Tensor> leaves = {random_tensor({2, 3}, rng), random_tensor({2, 4}, rng),
                                  random_tensor({2, 7}, rng)};
    double worst = fd_check(leaves, [](Tape& t, const std::vector<Var>& v) {
      return t.mse(t.concat_cols(v[0], v[1]), v[2]);
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("add, sub, scale gradients") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dp3::Rng rng(dp3::derive_seed(seed, "arith-fd"));
    std::vector<Tensor> leaves = {random_tensor({3, 2}, rng), random_tensor({3, 2}, rng)};
    double worst = fd_check(leaves, [](Tape& t, const std::vector<Var>& v) {
      return t.sum(t.scale(t.sub(t.add(v[0], v[1]), t.scale(v[1], 0.5)), -1.7));
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("composite network gradient matches finite differences") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    dp3::Rng rng(dp3::derive_seed(seed, "composite-fd"));
    std::vector<Tensor> leaves = {
        random_tensor({3, 4}, rng),  // x
        random_tensor({4, 5}, rng),  // W
        random_tensor({5}, rng),     // b
        random_tensor({5}, rng),     // gain
        random_tensor({5}, rng),     // bias
        random_tensor({3, 5}, rng),  // target
    };
    double worst = fd_check(leaves, [](Tape& t, const std::vector<Var>& v) {
      Var h = t.relu(t.linear(v[0], v[1], v[2]));
      Var n = t.layer_norm(h, v[3], v[4], 1e-5);
      return t.mse(n, v[5]);
    });
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("disconnected input gets zero gradient") {
  Tape t;
  Var used = t.constant(Tensor::row({1, 2}));
  Var unused = t.constant(Tensor::row({3, 4}));
  Var y = t.sum(used);
  t.backward(y);
  CHECK(t.grad(unused)[0] == 0.0);
  CHECK(t.grad(unused)[1] == 0.0);
}

TEST_CASE("backward is deterministic across fresh graphs") {
  auto run = [] {
    Tape t;
    dp3::Rng rng(55);
    Var x = t.constant(random_tensor({2, 3}, rng));
    Var w = t.constant(random_tensor({3, 3}, rng));
    Var b = t.constant(random_tensor({3}, rng));
    Var y = t.sum(t.relu(t.linear(x, w, b)));
    t.backward(y);
    return std::vector<Tensor>{t.grad(x), t.grad(w), t.grad(b)};
  };
  auto a = run();
  auto b = run();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(dp3::exact_equal(a[i], b[i]));
}

TEST_CASE("backward rejects non-scalar roots") {
  Tape t;
  Var x = t.constant(Tensor::row({1, 2}));
  CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
}

TEST_CASE("grad before backward throws") {
  Tape t;
  Var x = t.constant(Tensor::row({1, 2}));
  CHECK_THROWS_AS(t.grad(x), std::logic_error);
}

TEST_CASE("foreign var is rejected") {
  Tape t1, t2;
  Var x = t1.constant(Tensor::scalar(1));
  (void)x;
  Var y{5};
  CHECK_THROWS_AS(t2.value(y), std::invalid_argument);
}

TEST_CASE("clear resets the tape") {
  Tape t;
  Var x = t.constant(Tensor::scalar(1));
  t.backward(t.sum(x));
  CHECK(t.size() == 2);
  t.clear();
  CHECK(t.size() == 0);
  Var y = t.constant(Tensor::scalar(3));
  CHECK_THROWS_AS(t.grad(y), std::logic_error);
}
