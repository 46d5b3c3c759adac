#include "fzsl/embedder.hpp"

#include <cmath>

#include <doctest.h>

#include "fzsl/rng.hpp"

using namespace fzsl;

TEST_CASE("identity head passes vectors through") {
  EmbedderParams p = init_params(4, 4, 3, 1);
  Tensor x = Tensor::from_data({4}, {1, 2, 3, 4});
  Tensor e = embed(p, x);
  for (std::size_t i = 0; i < 4; ++i) CHECK(e.at(i) == x.at(i));
}

TEST_CASE("grid inputs are mean pooled") {
  EmbedderParams p = init_params(3, 3, 2, 1);
  Tensor grid = Tensor::from_data({1, 1, 3}, {7, 8, 9});
  Tensor e = embed(p, grid);
  CHECK(e.at(0) == 7);
  CHECK(e.at(2) == 9);

  EmbedderParams p1 = init_params(1, 1, 2, 1);
  Tensor g2 = Tensor::from_data({2, 2, 1}, {1, 3, 5, 7});
  CHECK(embed(p1, g2).at(0) == doctest::Approx(4.0));
}

TEST_CASE("project applies V transposed") {
  Tensor eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  Tensor x = Tensor::from_data({2}, {3, 4});
  Tensor r = project(x, eye);
  CHECK(r.at(0) == 3);
  CHECK(r.at(1) == 4);

  Tensor zero = Tensor::zeros({2, 3});
  Tensor rz = project(x, zero);
  for (std::size_t i = 0; i < 3; ++i) CHECK(rz.at(i) == 0.0);

  Tensor ones = Tensor::from_data({2, 1}, {1, 1});
  CHECK(project(x, ones).at(0) == doctest::Approx(7.0));
}

TEST_CASE("init_params determinism and scale") {
  EmbedderParams a = init_params(8, 8, 5, 42);
  EmbedderParams b = init_params(8, 8, 5, 42);
  for (std::size_t i = 0; i < a.V.size(); ++i) {
    CHECK(a.V.at(i) == b.V.at(i));
  }
  EmbedderParams c = init_params(8, 8, 5, 43);
  bool any_differ = false;
  for (std::size_t i = 0; i < a.V.size(); ++i) {
    if (a.V.at(i) != c.V.at(i)) any_differ = true;
  }
  CHECK(any_differ);

  // std of V entries ~ 1/sqrt(B) within 20% for B = 64
  EmbedderParams big = init_params(64, 64, 64, 7);
  double mean = 0.0;
  for (double v : big.V.data()) mean += v;
  mean /= big.V.size();
  double var = 0.0;
  for (double v : big.V.data()) var += (v - mean) * (v - mean);
  var /= big.V.size();
  double target = 1.0 / std::sqrt(64.0);
  CHECK(std::sqrt(var) == doctest::Approx(target).epsilon(0.2));
}

TEST_CASE("dimension mismatches are rejected") {
  EmbedderParams p = init_params(4, 4, 3, 1);
  CHECK_THROWS_AS(embed(p, Tensor::zeros({5})), DimensionError);
  CHECK_THROWS_AS(init_params(4, 5, 3, 1, /*hidden=*/false), ParameterError);
  CHECK_THROWS_AS(project(Tensor::zeros({3}), Tensor::zeros({2, 4})),
                  DimensionError);
}

TEST_CASE("embed then project is linear without the hidden transform") {
  Rng rng(9);
  EmbedderParams p = init_params(6, 6, 4, 5);
  auto randv = [&rng] {
    std::vector<double> v(6);
    for (double& x : v) x = rng.normal();
    return v;
  };
  std::vector<double> xv = randv(), yv = randv();
  double a = 1.7, b = -0.6;
  std::vector<double> combo(6);
  for (std::size_t i = 0; i < 6; ++i) combo[i] = a * xv[i] + b * yv[i];

  auto run = [&](std::vector<double> v) {
    Tensor t = Tensor::from_data({6}, std::move(v));
    return project(embed(p, t), p.V);
  };
  Tensor fx = run(xv), fy = run(yv), fc = run(combo);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(fc.at(i) ==
          doctest::Approx(a * fx.at(i) + b * fy.at(i)).epsilon(1e-9));
  }
}

TEST_CASE("gradients reach every trainable group") {
  Rng rng(10);
  EmbedderParams p = init_params(5, 3, 4, 6, /*hidden=*/true);
  std::vector<double> xv(2 * 5);
  for (double& v : xv) v = rng.normal();
  Tensor rows = Tensor::from_data({2, 5}, std::move(xv));

  Tensor loss = sum(mul(matmul(embed_batch(p, rows), p.V),
                        matmul(embed_batch(p, rows), p.V)));
  backward(loss);
  auto nonzero = [](std::span<const double> g) {
    for (double v : g) {
      if (v != 0.0) return true;
    }
    return false;
  };
  CHECK(nonzero(p.V.grad()));
  CHECK(nonzero(p.hidden_w.grad()));
  CHECK(p.hidden_b.grad().size() == 3);
}

TEST_CASE("hidden transform differentiates cleanly") {
  Rng rng(11);
  EmbedderParams p = init_params(4, 3, 2, 8, /*hidden=*/true);
  std::vector<double> xv(3 * 4);
  for (double& v : xv) v = rng.normal();
  Tensor rows = Tensor::from_data({3, 4}, xv);
  auto f = [&] {
    Tensor e = matmul(embed_batch(p, rows), p.V);
    return mean(mul(e, e));
  };
  CHECK(grad_check(f, {p.V, p.hidden_w, p.hidden_b}, 1e-5) <= 1e-4);
}
