#include "fzsl/grounding.hpp"

#include <cmath>

#include <doctest.h>

#include "fzsl/embedder.hpp"
#include "fzsl/rng.hpp"
#include "oracle.hpp"

using namespace fzsl;

namespace {

struct Fixture {
  Tensor pooled;
  std::vector<int> labels;
  std::vector<int> macros;
  Tensor v;
  AttributeTable table;
  std::vector<int> seen;
  double alpha = 1.0;

  GroundingEnv env() {
    return GroundingEnv(pooled, labels, macros, v, table, seen, alpha);
  }
};

/// n samples over b features, m attributes, classes 0..c-1 all seen.
Fixture random_fixture(Rng& rng, std::size_t n, std::size_t b, std::size_t m,
                       std::size_t c, std::size_t q = 0) {
  Fixture f;
  std::vector<double> pooled(n * b), v(b * m), attrs(m * c);
  for (double& x : pooled) x = rng.normal();
  for (double& x : v) x = rng.normal(0.0, 1.0 / std::sqrt(double(b)));
  for (double& x : attrs) x = rng.bernoulli(0.5) ? 1.0 : 0.0;
  f.pooled = Tensor::from_data({n, b}, std::move(pooled));
  f.v = Tensor::from_data({b, m}, std::move(v), true);
  f.table.attrs = Tensor::from_data({m, c}, std::move(attrs));
  f.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    f.labels[i] = static_cast<int>(rng.index(c));
  }
  for (std::size_t cl = 0; cl < c; ++cl) f.seen.push_back(static_cast<int>(cl));
  if (q > 0) {
    std::vector<double> macro(m * q);
    for (double& x : macro) x = 0.01 * rng.normal();
    f.table.macro = Tensor::from_data({m, q}, std::move(macro), true);
    f.macros.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      f.macros[i] = f.labels[i] % static_cast<int>(q);
    }
  }
  return f;
}

oracle::Env to_oracle(const Fixture& f) {
  oracle::Env env;
  std::size_t n = f.pooled.shape()[0], b = f.pooled.shape()[1];
  std::size_t m = f.table.attr_dim(), c = f.table.n_classes();
  env.pooled.assign(n, std::vector<double>(b));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < b; ++j) env.pooled[i][j] = f.pooled.at(i * b + j);
  }
  env.v.assign(b, std::vector<double>(m));
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < m; ++j) env.v[i][j] = f.v.at(i * m + j);
  }
  env.attrs.assign(m, std::vector<double>(c));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < c; ++j) env.attrs[i][j] = f.table.attrs.at(i * c + j);
  }
  if (f.table.has_macro()) {
    std::size_t q = f.table.macro.shape()[1];
    env.macro_attrs.assign(m, std::vector<double>(q));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < q; ++j) {
        env.macro_attrs[i][j] = f.table.macro.at(i * q + j);
      }
    }
  }
  env.labels = f.labels;
  env.macros = f.macros;
  env.mask = f.table.mask;
  env.seen_order = f.seen;
  env.alpha = f.alpha;
  return env;
}

std::vector<ValidatedAxiom> builtin_validated() {
  return validate_all(parse_axioms(builtin_axioms_text()), builtin_signature());
}

ValidatedAxiom validated(const std::string& text) {
  ValidatedAxiom va;
  Axiom a = parse_axiom(text);
  auto diags = validate(a, builtin_signature(), &va);
  REQUIRE(diags.empty());
  return va;
}

}  // namespace

TEST_CASE("make_mask") {
  Rng rng(1);
  auto all_ones = make_mask(10, 0, rng);
  for (double v : all_ones) CHECK(v == 1.0);
  auto all_zero = make_mask(10, 10, rng);
  for (double v : all_zero) CHECK(v == 0.0);

  Rng r1(5), r2(5);
  CHECK(make_mask(10, 3, r1) == make_mask(10, 3, r2));

  Rng r3(6);
  for (int trial = 0; trial < 50; ++trial) {
    auto mask = make_mask(17, 4, r3);
    int zeros = 0;
    for (double v : mask) zeros += v == 0.0;
    CHECK(zeros == 4);
  }
  CHECK_THROWS_AS(make_mask(4, 5, r3), ParameterError);
}

TEST_CASE("class_scores") {
  SUBCASE("identical attribute columns give uniform rows") {
    Tensor x = Tensor::from_data({2, 3}, {1, 0, 2, -1, 0.5, 0});
    Tensor v = Tensor::from_data({3, 2}, {1, 0, 0, 1, 0.5, 0.5});
    Tensor attrs = Tensor::from_data({2, 4}, {1, 1, 1, 1, 2, 2, 2, 2});
    Tensor s = class_scores(x, v, attrs);
    for (std::size_t i = 0; i < 8; ++i) {
      CHECK(s.at(i) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  SUBCASE("identity everything concentrates on the matching class") {
    std::size_t k = 3;
    std::vector<double> eye(k * k, 0.0);
    for (std::size_t i = 0; i < k; ++i) eye[i * k + i] = 1.0;
    Tensor x = Tensor::from_data({1, k}, {1, 0, 0});
    Tensor v = Tensor::from_data({k, k}, eye);
    Tensor attrs = Tensor::from_data({k, k}, eye);
    Tensor s = class_scores(x, v, attrs);
    double e = std::exp(1.0);
    CHECK(s.at(0) == doctest::Approx(e / (e + 2.0)).epsilon(1e-12));
    CHECK(s.at(1) == doctest::Approx(1.0 / (e + 2.0)).epsilon(1e-12));
  }
  SUBCASE("single class normalizes to one") {
    Tensor x = Tensor::from_data({1, 2}, {0.3, -0.7});
    Tensor v = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor attrs = Tensor::from_data({2, 1}, {0.2, 0.4});
    Tensor s = class_scores(x, v, attrs);
    CHECK(s.shape() == Shape{1, 1});
    CHECK(s.at(0) == 1.0);
  }
}

TEST_CASE("diagonal predicate groundings") {
  Rng rng(2);
  Fixture f = random_fixture(rng, 6, 4, 5, 4);

  SUBCASE("uniform scores give 1/C truths") {
    // zero projection -> equal logits -> uniform softmax
    Fixture u = f;
    u.v = Tensor::zeros({4, 5});
    auto env = u.env();
    Tensor t = ground_is_of_class(env);
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(t.at(i) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  SUBCASE("values lie strictly inside (0,1)") {
    auto env = f.env();
    Tensor t = ground_is_of_class(env);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t.at(i) > 0.0);
      CHECK(t.at(i) < 1.0);
    }
  }
  SUBCASE("k=0 mask reproduces the plain predicate bitwise") {
    Fixture masked = f;
    Rng mr(3);
    masked.table.mask = make_mask(5, 0, mr);
    auto env = masked.env();
    Tensor plain = ground_is_of_class(env);
    Tensor with_mask = ground_is_of_class_masked(env);
    for (std::size_t i = 0; i < plain.size(); ++i) {
      CHECK(plain.at(i) == with_mask.at(i));
    }
  }
  SUBCASE("full mask gives uniform truths over seen classes") {
    Fixture masked = f;
    Rng mr(3);
    masked.table.mask = make_mask(5, 5, mr);
    auto env = masked.env();
    Tensor t = ground_is_of_class_masked(env);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t.at(i) == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
  SUBCASE("masking a one-hot table drops the own-class truth") {
    // 3 classes, attributes = identity: class c is recognized only by
    // attribute c. Masking attribute 0 removes class 0's evidence.
    Fixture one_hot;
    one_hot.pooled = Tensor::from_data({3, 3}, {5, 0, 0, 0, 5, 0, 0, 0, 5});
    one_hot.labels = {0, 1, 2};
    std::vector<double> eye(9, 0.0);
    for (int i = 0; i < 3; ++i) eye[static_cast<std::size_t>(i * 3 + i)] = 1.0;
    one_hot.v = Tensor::from_data({3, 3}, eye);
    one_hot.table.attrs = Tensor::from_data({3, 3}, eye);
    one_hot.seen = {0, 1, 2};
    one_hot.table.mask = {0.0, 1.0, 1.0};
    auto env = one_hot.env();
    Tensor unmasked = ground_is_of_class(env);
    Tensor masked_t = ground_is_of_class_masked(env);
    CHECK(masked_t.at(0) < unmasked.at(0));
  }
}

TEST_CASE("macro grounding") {
  Rng rng(4);
  SUBCASE("single macro class is always true") {
    Fixture f = random_fixture(rng, 4, 3, 4, 3, 1);
    auto env = f.env();
    Tensor t = ground_is_of_macro(env);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t.at(i) == 1.0);
  }
  SUBCASE("near-zero macro matrix gives near-uniform truths") {
    Fixture f = random_fixture(rng, 5, 3, 4, 3, 4);
    auto env = f.env();
    Tensor t = ground_is_of_macro(env);
    for (std::size_t i = 0; i < t.size(); ++i) {
      CHECK(t.at(i) == doctest::Approx(0.25).epsilon(0.05));
    }
  }
  SUBCASE("missing hierarchy is a configuration error") {
    Fixture f = random_fixture(rng, 4, 3, 4, 3);
    auto env = f.env();
    CHECK_THROWS_AS(ground_is_of_macro(env), ConfigError);
  }
}

TEST_CASE("hasSameAttribute grounding") {
  Tensor e1 = Tensor::from_data({3}, {1, 0, 0});
  Tensor e2 = Tensor::from_data({3}, {0, 1, 0});
  CHECK(ground_has_same_attribute(e1, e2, 1.0).value() ==
        doctest::Approx(0.5).epsilon(1e-6));
  Tensor e = Tensor::from_data({3}, {0.5, -1, 2});
  double sig1 = 1.0 / (1.0 + std::exp(-1.0));
  CHECK(ground_has_same_attribute(e, e, 1.0).value() ==
        doctest::Approx(sig1).epsilon(1e-5));
  Tensor ne = Tensor::from_data({3}, {-0.5, 1, -2});
  CHECK(ground_has_same_attribute(e, ne, 1.0).value() ==
        doctest::Approx(1.0 - sig1).epsilon(1e-5));
  CHECK_THROWS_AS(ground_has_same_attribute(e, ne, 0.0), ParameterError);
}

TEST_CASE("eval_formula basics") {
  Rng rng(6);
  FuzzyConfig cfg;

  SUBCASE("constant-true predicate makes phi1 evaluate to one") {
    Fixture f = random_fixture(rng, 5, 3, 4, 3);
    auto env = f.env();
    env.predicates["isOfClass"] = [](GroundingEnv&,
                                     const std::vector<ResolvedArg>&) {
      return Tensor::scalar(1.0);
    };
    auto va = validated("axiom t: forall diag(x, l) . isOfClass(x, l)");
    EvalResult r = eval_formula(va, env, cfg);
    CHECK(!r.vacuous);
    CHECK(r.truth.value() == doctest::Approx(1.0).epsilon(1e-3));
  }

  SUBCASE("forall over fixed truths matches agg_forall") {
    Fixture f = random_fixture(rng, 2, 3, 4, 2);
    auto env = f.env();
    int call = 0;
    env.predicates["isOfClass"] = [&call](GroundingEnv&,
                                          const std::vector<ResolvedArg>&) {
      return Tensor::scalar(call++ == 0 ? 0.0 : 1.0);
    };
    auto va = validated("axiom t: forall diag(x, l) . isOfClass(x, l)");
    EvalResult r = eval_formula(va, env, cfg);
    Tensor direct = agg_forall(
        clamp_truth(Tensor::from_data({2}, {0.0, 1.0}), cfg.clamp_eps), 2.0);
    CHECK(r.truth.value() == doctest::Approx(direct.value()).epsilon(1e-12));
    CHECK(direct.value() ==
          doctest::Approx(1.0 - std::sqrt(0.5)).epsilon(1e-3));
  }

  SUBCASE("false antecedent saturates the implication") {
    Fixture f = random_fixture(rng, 4, 3, 4, 3, 2);
    auto env = f.env();
    env.predicates["isOfClass"] = [](GroundingEnv&,
                                     const std::vector<ResolvedArg>&) {
      return Tensor::scalar(0.0);
    };
    auto va = validated(
        "axiom t: forall diag(x, l, q) . isOfClass(x, l) -> isOfMacro(x, q)");
    EvalResult r = eval_formula(va, env, cfg);
    CHECK(r.truth.value() == doctest::Approx(1.0).epsilon(1e-3));
  }

  SUBCASE("diagonal quantification touches each sample exactly once") {
    Fixture f = random_fixture(rng, 7, 3, 4, 3);
    auto env = f.env();
    int calls = 0;
    env.predicates["isOfClass"] = [&calls](GroundingEnv&,
                                           const std::vector<ResolvedArg>&) {
      ++calls;
      return Tensor::scalar(0.5);
    };
    auto va = validated("axiom t: forall diag(x, l) . isOfClass(x, l)");
    eval_formula(va, env, cfg);
    CHECK(calls == 7);  // n, never n^2
  }

  SUBCASE("pair quantification skips the diagonal") {
    Fixture f = random_fixture(rng, 5, 3, 4, 1);  // single class
    auto env = f.env();
    int calls = 0;
    env.predicates["hasSameAttribute"] =
        [&calls](GroundingEnv&, const std::vector<ResolvedArg>& args) {
          ++calls;
          CHECK(args[0].index != args[1].index);
          return Tensor::scalar(0.5);
        };
    auto va = validated(
        "axiom t: forall diag(x1, l1) . forall diag(x2, l2) where l1 == l2 . "
        "hasSameAttribute(x1, x2)");
    eval_formula(va, env, cfg);
    CHECK(calls == 5 * 4);  // ordered pairs, i != j
  }
}

TEST_CASE("vacuous quantification") {
  Rng rng(7);
  FuzzyConfig cfg;

  SUBCASE("guard that filters everything makes the axiom vacuous") {
    Fixture f = random_fixture(rng, 4, 3, 4, 1);  // one class: no l1 != l2
    auto env = f.env();
    auto va = validated(
        "axiom t: forall diag(x1, l1) . forall diag(x2, l2) where l1 != l2 . "
        "not hasSameAttribute(x1, x2)");
    EvalResult r = eval_formula(va, env, cfg);
    CHECK(r.vacuous);
    CHECK(r.truth.value() == 1.0);
  }

  SUBCASE("empty inner exists drops its branch") {
    Fixture f = random_fixture(rng, 4, 3, 4, 1);
    auto env = f.env();
    auto va = validated(
        "axiom t: forall diag(x1, l1) . exists diag(x2, l2) where l2 != l1 . "
        "hasSameAttribute(x1, x2)");
    EvalResult r = eval_formula(va, env, cfg);
    CHECK(r.vacuous);  // every branch dropped
  }

  SUBCASE("non-vacuous when the guard keeps some pairs") {
    Fixture f = random_fixture(rng, 4, 3, 4, 2);
    bool has_both = false;
    for (int l : f.labels) has_both |= (l != f.labels[0]);
    if (has_both) {
      auto env = f.env();
      auto va = validated(
          "axiom t: forall diag(x1, l1) . forall diag(x2, l2) where l1 != l2 . "
          "not hasSameAttribute(x1, x2)");
      EvalResult r = eval_formula(va, env, cfg);
      CHECK(!r.vacuous);
    }
  }
}

TEST_CASE("gradients flow through every built-in axiom") {
  Rng rng(8);
  Fixture f = random_fixture(rng, 5, 4, 6, 3, 2);
  f.table.mask = make_mask(6, 1, rng);
  FuzzyConfig cfg;
  for (const auto& va : builtin_validated()) {
    auto env = f.env();
    f.v.zero_grad();
    EvalResult r = eval_formula(va, env, cfg);
    REQUIRE(!r.vacuous);
    backward(const_minus(1.0, r.truth));
    bool nonzero = false;
    for (double g : f.v.grad()) nonzero |= (g != 0.0);
    CAPTURE(va.axiom.name);
    CHECK(nonzero);
  }
}

TEST_CASE("eval_formula matches the brute-force oracle") {
  Rng rng(9);
  auto axioms = builtin_validated();
  for (int trial = 0; trial < 30; ++trial) {
    std::size_t n = 2 + rng.index(5);   // up to 6 samples
    std::size_t c = 1 + rng.index(4);   // up to 4 classes
    Fixture f = random_fixture(rng, n, 3, 5, c, 2);
    f.table.mask = make_mask(5, rng.index(3), rng);
    f.alpha = 1.0 + 3.0 * rng.uniform();
    FuzzyConfig cfg;
    double ps[] = {1.0, 2.0, 4.0, 6.0};
    cfg.p_forall = ps[rng.index(4)];
    cfg.p_exists = ps[rng.index(4)];
    oracle::Env oenv = to_oracle(f);
    oracle::Config ocfg{cfg.p_forall, cfg.p_exists, cfg.clamp_eps};
    for (const auto& va : axioms) {
      auto env = f.env();
      EvalResult got = eval_formula(va, env, cfg);
      oracle::Result want = oracle::eval(va, oenv, ocfg);
      CAPTURE(trial);
      CAPTURE(va.axiom.name);
      CHECK(got.vacuous == want.vacuous);
      if (!got.vacuous) {
        CHECK(got.truth.value() ==
              doctest::Approx(want.truth).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("axiom truths stay strictly inside (0,1)") {
  Rng rng(10);
  FuzzyConfig cfg;
  for (int trial = 0; trial < 10; ++trial) {
    Fixture f = random_fixture(rng, 4 + rng.index(3), 3, 5, 3, 2);
    f.table.mask = make_mask(5, 1, rng);
    for (const auto& va : builtin_validated()) {
      auto env = f.env();
      EvalResult r = eval_formula(va, env, cfg);
      if (r.vacuous) continue;
      CHECK(r.truth.value() > 0.0);
      CHECK(r.truth.value() < 1.0);
    }
  }
}
