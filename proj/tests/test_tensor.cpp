#include "fzsl/tensor.hpp"

#include <cmath>
#include <set>

#include <doctest.h>

#include "fzsl/rng.hpp"

using namespace fzsl;

namespace {

Tensor vec(std::vector<double> v, bool grad = false) {
  Shape s{v.size()};
  return Tensor::from_data(s, std::move(v), grad);
}

Tensor mat(std::size_t r, std::size_t c, std::vector<double> v,
           bool grad = false) {
  return Tensor::from_data({r, c}, std::move(v), grad);
}

}  // namespace

TEST_CASE("matmul products") {
  Tensor a = mat(2, 2, {1, 2, 3, 4});
  Tensor eye = mat(2, 2, {1, 0, 0, 1});
  Tensor r = matmul(a, eye);
  CHECK(r.at(0) == 1);
  CHECK(r.at(1) == 2);
  CHECK(r.at(2) == 3);
  CHECK(r.at(3) == 4);

  Tensor z = matmul(mat(2, 2, {1, 0, 0, 0}), mat(2, 2, {0, 0, 0, 1}));
  for (std::size_t i = 0; i < 4; ++i) CHECK(z.at(i) == 0);

  Tensor rowsum = matmul(a, mat(2, 1, {1, 1}));
  CHECK(rowsum.at(0) == 3);
  CHECK(rowsum.at(1) == 7);
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Tensor a = mat(2, 3, {1, 2, 3, 4, 5, 6});
  Tensor b = mat(2, 2, {1, 2, 3, 4});
  CHECK_THROWS_WITH_AS(matmul(a, b),
                       doctest::Contains("[2x3]"), DimensionError);
  try {
    matmul(a, b);
  } catch (const DimensionError& e) {
    CHECK(std::string(e.what()).find("[2x2]") != std::string::npos);
  }
}

TEST_CASE("softmax rows") {
  Tensor s = softmax_rows(mat(1, 3, {1, 1, 1}));
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(s.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  }

  Tensor t = softmax_rows(mat(1, 2, {0.0, std::log(2.0)}));
  CHECK(t.at(0) == doctest::Approx(1.0 / 3).epsilon(1e-12));
  CHECK(t.at(1) == doctest::Approx(2.0 / 3).epsilon(1e-12));

  Tensor big = softmax_rows(mat(1, 2, {1000.0, 0.0}));
  CHECK(std::isfinite(big.at(0)));
  CHECK(big.at(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(big.at(1) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("softmax rows sum to one for magnitudes up to 1e3") {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    std::size_t n = 1 + rng.index(4), c = 1 + rng.index(6);
    std::vector<double> v(n * c);
    for (double& x : v) x = 1e3 * (2.0 * rng.uniform() - 1.0);
    Tensor s = softmax_rows(Tensor::from_data({n, c}, std::move(v)));
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        double e = s.at(i * c + j);
        CHECK(std::isfinite(e));
        CHECK(e >= 0.0);
        row += e;
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("sigmoid values and gradient at zero") {
  Tensor x = vec({0.0}, true);
  Tensor s = sigmoid(x);
  CHECK(s.at(0) == 0.5);
  backward(sum(s));
  CHECK(x.grad()[0] == doctest::Approx(0.25).epsilon(1e-12));

  CHECK(sigmoid(vec({40.0})).at(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sigmoid(vec({-40.0})).at(0) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cosine similarity") {
  CHECK(std::abs(cosine_similarity(vec({1, 0}), vec({0, 1})).value()) < 1e-8);
  Tensor u = vec({0.3, -1.2, 2.0});
  CHECK(cosine_similarity(u, u).value() == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cosine_similarity(vec({1, 1}), vec({1, 0})).value() ==
        doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-6));
  // zero-vector fallback
  CHECK(cosine_similarity(vec({0, 0}), vec({1, 2})).value() == 0.0);
}

TEST_CASE("mean_pool") {
  Tensor single = Tensor::from_data({1, 1, 3}, {4, 5, 6});
  Tensor p = mean_pool(single);
  CHECK(p.at(0) == 4);
  CHECK(p.at(1) == 5);
  CHECK(p.at(2) == 6);

  Tensor grid = Tensor::from_data({2, 2, 1}, {1, 3, 5, 7});
  CHECK(mean_pool(grid).at(0) == doctest::Approx(4.0));

  Tensor constant = Tensor::full({3, 2, 2}, 2.5);
  Tensor pc = mean_pool(constant);
  CHECK(pc.at(0) == 2.5);
  CHECK(pc.at(1) == 2.5);

  CHECK_THROWS_AS(mean_pool(Tensor::zeros({0, 2, 3})), DimensionError);
}

TEST_CASE("pow_clamped") {
  CHECK(pow_clamped(vec({1.0}), 7.0).at(0) == 1.0);
  CHECK(pow_clamped(vec({0.25}), 2.0).at(0) == doctest::Approx(0.0625));
  // clamped base below 1e-4
  CHECK(pow_clamped(vec({0.0}), 2.0).at(0) == doctest::Approx(1e-8));
  CHECK_THROWS_AS(pow_clamped(vec({1.0}), 0.5), ParameterError);
}

TEST_CASE("root_clamped keeps the gradient finite at zero") {
  Tensor x = vec({0.0}, true);
  Tensor r = root_clamped(x, 2.0);
  CHECK(r.at(0) >= 0.0);
  CHECK(r.at(0) < 1e-9);
  backward(r);
  CHECK(std::isfinite(x.grad()[0]));
  CHECK_THROWS_AS(root_clamped(x, 0.25), ParameterError);
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives ones") {
    Tensor w = Tensor::from_data({2, 2}, {1, 2, 3, 4}, true);
    backward(sum(w));
    for (double g : w.grad()) CHECK(g == 1.0);
  }
  SUBCASE("square gives 2w") {
    Tensor w = Tensor::scalar(3.0, true);
    backward(mul(w, w));
    CHECK(w.grad()[0] == doctest::Approx(6.0));
  }
  SUBCASE("disconnected leaf keeps zero gradient") {
    Tensor w = Tensor::scalar(3.0, true);
    Tensor other = Tensor::scalar(2.0, true);
    backward(mul(other, other));
    CHECK(w.grad()[0] == 0.0);
  }
  SUBCASE("repeated backward accumulates on leaves") {
    Tensor w = vec({1, 2}, true);
    Tensor loss = sum(w);
    backward(loss);
    backward(loss);
    CHECK(w.grad()[0] == 2.0);
    CHECK(w.grad()[1] == 2.0);
  }
  SUBCASE("non-scalar loss is a usage error") {
    Tensor w = vec({1, 2}, true);
    CHECK_THROWS_AS(backward(w), UsageError);
  }
}

TEST_CASE("fan-out sums both contributions") {
  Tensor w = Tensor::scalar(0.7, true);
  auto f = [&] {
    Tensor s = sigmoid(w);
    return add(mul(s, s), scale(s, 0.5));  // s used twice
  };
  CHECK(grad_check(f, {w}, 1e-5) <= 1e-7);
}

TEST_CASE("graph is topologically ordered and visits nodes once") {
  Tensor a = Tensor::scalar(1.5, true);
  Tensor b = Tensor::scalar(-0.5, true);
  Tensor c = mul(a, b);
  Tensor d = add(c, a);  // diamond: a feeds c and d
  Tensor loss = mul(d, c);
  Graph g = build_graph(loss);
  std::set<const void*> seen_nodes;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    CHECK(seen_nodes.insert(g.nodes[i]).second);  // exactly once
    for (const auto& in : g.nodes[i]->inputs) {
      CHECK(seen_nodes.count(in.get()));  // inputs precede consumers
    }
  }
  CHECK(g.nodes.back() == loss.node());
}

TEST_CASE("grad_check oracle behaviour") {
  SUBCASE("quadratic is exact up to round-off") {
    Tensor w = vec({0.3, -1.1, 0.9}, true);
    auto f = [&] { return sum(mul(w, w)); };
    CHECK(grad_check(f, {w}, 1e-4) <= 1e-7);
  }
  SUBCASE("sigmoid composition stays under 1e-4") {
    Tensor w = vec({0.2, -0.4}, true);
    auto f = [&] { return sum(sigmoid(mul(w, w))); };
    CHECK(grad_check(f, {w}, 1e-5) <= 1e-4);
  }
  SUBCASE("constant function has zero error") {
    Tensor w = vec({1.0, 2.0}, true);
    auto f = [&] { return Tensor::scalar(5.0); };
    CHECK(grad_check(f, {w}, 1e-5) == 0.0);
  }
  SUBCASE("eps outside range is rejected") {
    Tensor w = vec({1.0}, true);
    auto f = [&] { return sum(w); };
    CHECK_THROWS_AS(grad_check(f, {w}, 1e-7), ParameterError);
    CHECK_THROWS_AS(grad_check(f, {w}, 1e-2), ParameterError);
  }
}

TEST_CASE("grad_check over every primitive") {
  Rng rng(3);
  auto randv = [&rng](std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
  };
  double eps = 1e-5;

  Tensor a = Tensor::from_data({2, 3}, randv(6), true);
  Tensor b = Tensor::from_data({3, 4}, randv(12), true);
  CHECK(grad_check([&] { return sum(matmul(a, b)); }, {a, b}, eps) <= 1e-4);
  CHECK(grad_check(
            [&] {
              Tensor s = softmax_rows(matmul(a, b));
              return sum(mul(s, s));
            },
            {a, b}, eps) <= 1e-4);

  Tensor x = Tensor::from_data({5}, randv(5), true);
  Tensor y = Tensor::from_data({5}, randv(5), true);
  CHECK(grad_check([&] { return sum(sigmoid(x)); }, {x}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(tanh(x)); }, {x}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(add(x, y)); }, {x, y}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(sub(x, y)); }, {x, y}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(mul(x, y)); }, {x, y}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(scale(x, -1.7)); }, {x}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(add_const(x, 2.0)); }, {x}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(const_minus(1.0, x)); }, {x}, eps) <= 1e-4);
  CHECK(grad_check([&] { return cosine_similarity(x, y); }, {x, y}, eps) <=
        1e-4);
  CHECK(grad_check([&] { return mean(x); }, {x}, eps) <= 1e-4);

  Tensor grid = Tensor::from_data({2, 3, 2}, randv(12), true);
  CHECK(grad_check([&] { return sum(mean_pool(grid)); }, {grid}, eps) <= 1e-4);

  std::vector<double> pos(6);
  for (double& t : pos) t = 0.1 + 0.8 * rng.uniform();
  Tensor tpos = Tensor::from_data({6}, pos, true);
  CHECK(grad_check([&] { return sum(pow_clamped(tpos, 2.5)); }, {tpos}, eps) <=
        1e-4);
  CHECK(grad_check([&] { return sum(root_clamped(tpos, 3.0)); }, {tpos}, eps) <=
        1e-4);
  CHECK(grad_check([&] { return mean_pow(tpos, 3.0); }, {tpos}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(clamp(tpos, 0.2, 0.8)); }, {tpos}, eps) <=
        1e-4);

  Tensor m = Tensor::from_data({3, 4}, randv(12), true);
  CHECK(grad_check([&] { return select(m, 1, 2); }, {m}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(row(m, 2)); }, {m}, eps) <= 1e-4);
  CHECK(grad_check([&] { return sum(reshape(m, {4, 3})); }, {m}, eps) <= 1e-4);

  Tensor rv = Tensor::from_data({4}, randv(4), true);
  CHECK(grad_check([&] { return sum(add_rowvec(m, rv)); }, {m, rv}, eps) <=
        1e-4);

  Tensor s1 = Tensor::scalar(0.4, true);
  Tensor s2 = Tensor::scalar(-0.9, true);
  CHECK(grad_check([&] { return sum(stack({s1, s2, mul(s1, s2)})); }, {s1, s2},
                   eps) <= 1e-4);
}

TEST_CASE("forward outputs stay finite on random op chains") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(8);
    for (double& x : v) x = 3.0 * rng.normal();
    Tensor t = Tensor::from_data({2, 4}, std::move(v));
    Tensor u = softmax_rows(t);
    Tensor w = sigmoid(scale(u, 5.0));
    Tensor s = mean(mul(w, w));
    CHECK(std::isfinite(s.value()));
  }
}

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor::from_data({2, 2}, {1, 2, 3}), DimensionError);
  Tensor t = Tensor::from_data({2}, {1, 2}, true);
  CHECK(t.requires_grad());
  CHECK(t.grad().size() == 2);  // zero-filled on demand
  CHECK(t.grad()[0] == 0.0);
}
