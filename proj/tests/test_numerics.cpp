// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fens/numerics.hpp"

using namespace fens;

TEST_CASE("linear_forward identity passes input through") {
  Tensor x({1, 2}, {1.0f, 2.0f});
  Tensor W({2, 2}, {1.0f, 0.0f, 0.0f, 1.0f});
  Tensor b({2}, {0.0f, 0.0f});
  Tensor y = linear_forward(x, W, b);
  CHECK(y.data[0] == doctest::Approx(1.0f));
  CHECK(y.data[1] == doctest::Approx(2.0f));
}

TEST_CASE("linear_forward zero input passes bias") {
  Tensor x = Tensor::zeros({1, 3});
  Tensor W({3, 2}, {1, 2, 3, 4, 5, 6});
  Tensor b({2}, {1.0f, 1.0f});
  Tensor y = linear_forward(x, W, b);
  CHECK(y.data[0] == doctest::Approx(1.0f));
  CHECK(y.data[1] == doctest::Approx(1.0f));
}

TEST_CASE("linear_forward matches hand-computed 2x3 . 3x2 product") {
  Tensor x({2, 3}, {1, 2, 3, 4, 5, 6});
  Tensor W({3, 2}, {7, 8, 9, 10, 11, 12});
  Tensor b({2}, {1.0f, -1.0f});
  Tensor y = linear_forward(x, W, b);
  // row 0: [1*7+2*9+3*11, 1*8+2*10+3*12] = [58, 64]
  CHECK(y.at(0, 0) == doctest::Approx(58.0f + 1.0f));
  CHECK(y.at(0, 1) == doctest::Approx(64.0f - 1.0f));
  // row 1: [4*7+5*9+6*11, 4*8+5*10+6*12] = [139, 154]
  CHECK(y.at(1, 0) == doctest::Approx(139.0f + 1.0f));
  CHECK(y.at(1, 1) == doctest::Approx(154.0f - 1.0f));
}

TEST_CASE("linear_forward rejects mismatched shapes") {
  Tensor x({1, 3}, {1, 2, 3});
  Tensor W({2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(linear_forward(x, W, Tensor::zeros({2})),
                  std::invalid_argument);
}

TEST_CASE("relu and its subgradient at zero") {
  Tensor x({3}, {-1.0f, 0.0f, 2.0f});
  Tensor y = relu(x);
  CHECK(y.data[0] == 0.0f);
  CHECK(y.data[1] == 0.0f);
  CHECK(y.data[2] == 2.0f);
  Tensor up = Tensor::full({3}, 1.0f);
  Tensor g = relu_backward(x, up);
  CHECK(g.data[0] == 0.0f);
  CHECK(g.data[1] == 0.0f);  // subgradient choice at the kink
  CHECK(g.data[2] == 1.0f);
}

TEST_CASE("softmax_cross_entropy on uniform logits is ln C") {
  Tensor logits = Tensor::zeros({1, 4});
  auto [loss, grad] = softmax_cross_entropy(logits, {2});
  CHECK(loss == doctest::Approx(std::log(4.0)).epsilon(1e-9));
}

TEST_CASE("softmax_cross_entropy saturates when the true logit dominates") {
  Tensor logits({1, 3}, {0.0f, 30.0f, 0.0f});
  auto [loss, grad] = softmax_cross_entropy(logits, {1});
  CHECK(loss < 1e-9);
}

TEST_CASE("softmax_cross_entropy rejects out-of-range labels") {
  Tensor logits = Tensor::zeros({1, 3});
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {3}), std::invalid_argument);
  CHECK_THROWS_AS(softmax_cross_entropy(logits, {-1}), std::invalid_argument);
}

TEST_CASE("softmax_cross_entropy gradient matches finite differences") {
  Rng rng(7);
  ParamSet params;
  Tensor logits = Tensor::zeros({3, 5});
  for (auto& v : logits.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  params.add("logits", logits);
  std::vector<int> labels = {0, 3, 4};
  auto analytic = softmax_cross_entropy(params.at("logits"), labels);
  ParamSet grads;
  grads.add("logits", analytic.grad);
  auto loss_fn = [&](const ParamSet& p) {
    return softmax_cross_entropy(p.at("logits"), labels).loss;
  };
  CHECK(grad_check(loss_fn, params, grads, 1e-4) < 1e-4);
}

TEST_CASE("softmax_cross_entropy is shift-invariant per sample") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor logits = Tensor::zeros({2, 6});
    for (auto& v : logits.data)
      v = static_cast<float>(rng.uniform(-3.0, 3.0));
    std::vector<int> labels = {static_cast<int>(rng.below(6)),
                               static_cast<int>(rng.below(6))};
    const double base = softmax_cross_entropy(logits, labels).loss;
    const float shift = static_cast<float>(rng.uniform(-5.0, 5.0));
    for (std::size_t c = 0; c < 6; ++c) logits.data[c] += shift;
    CHECK(softmax_cross_entropy(logits, labels).loss ==
          doctest::Approx(base).epsilon(1e-6));
  }
}

TEST_CASE("sgd_step basics") {
  ParamSet p;
  p.add("w", Tensor({1}, {1.0f}));
  ParamSet g;
  g.add("w", Tensor({1}, {2.0f}));
  CHECK(sgd_step(p, g, 0.0f).at("w").data[0] == 1.0f);
  CHECK(sgd_step(p, g, 0.5f).at("w").data[0] == 0.0f);
  // linearity under constant gradients
  ParamSet two = sgd_step(sgd_step(p, g, 0.25f), g, 0.25f);
  CHECK(two.at("w").data[0] == doctest::Approx(sgd_step(p, g, 0.5f)
                                                   .at("w")
                                                   .data[0]));
}

TEST_CASE("sgd_step is deterministic bitwise") {
  Rng rng(3);
  ParamSet p, g;
  Tensor t = Tensor::zeros({17});
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1, 1));
  p.add("w", t);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1, 1));
  g.add("w", t);
  ParamSet a = sgd_step(p, g, 0.123f);
  ParamSet b = sgd_step(p, g, 0.123f);
  CHECK(a.content_hash() == b.content_hash());
}

TEST_CASE("cosine_anneal endpoints and midpoint") {
  CHECK(cosine_anneal(0.1, 0, 10) == doctest::Approx(0.1));
  CHECK(cosine_anneal(0.1, 10, 10) == doctest::Approx(0.0));
  CHECK(cosine_anneal(0.1, 5, 10) == doctest::Approx(0.05));
  CHECK_THROWS_AS(cosine_anneal(0.1, 11, 10), std::invalid_argument);
}

TEST_CASE("cosine_anneal is monotone non-increasing") {
  double prev = cosine_anneal(1.0, 0, 100);
  for (std::size_t t = 1; t <= 100; ++t) {
    const double cur = cosine_anneal(1.0, t, 100);
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("adaptive_step leaves params alone on zero delta") {
  ParamSet p;
  p.add("w", Tensor({2}, {0.5f, -0.5f}));
  OptimizerState st = OptimizerState::init(OptimizerKind::adam, p, 0.1);
  ParamSet out = adaptive_step(st, p.zeros_like(), p);
  CHECK(out.content_hash() == p.content_hash());
}

TEST_CASE("adaptive_step matches the hand-worked first adam step") {
  ParamSet p;
  p.add("w", Tensor({1}, {0.0f}));
  ParamSet d;
  d.add("w", Tensor({1}, {1.0f}));
  OptimizerState st = OptimizerState::init(OptimizerKind::adam, p, 0.1, 0.9,
                                           0.99, 1e-3);
  ParamSet out = adaptive_step(st, d, p);
  CHECK(st.first_moment.at("w").data[0] == doctest::Approx(0.1f));
  CHECK(st.second_moment.at("w").data[0] == doctest::Approx(0.01f));
  // 0.1 * 0.1 / (0.1 + 1e-3)
  CHECK(out.at("w").data[0] == doctest::Approx(0.0990099f).epsilon(1e-5));
}

TEST_CASE("adam and yogi coincide on the first step from zero state") {
  Rng rng(5);
  ParamSet p, d;
  Tensor t = Tensor::zeros({9});
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1, 1));
  p.add("w", t);
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1, 1));
  d.add("w", t);
  OptimizerState adam = OptimizerState::init(OptimizerKind::adam, p, 0.05);
  OptimizerState yogi = OptimizerState::init(OptimizerKind::yogi, p, 0.05);
  ParamSet a = adaptive_step(adam, d, p);
  ParamSet y = adaptive_step(yogi, d, p);
  CHECK(a.content_hash() == y.content_hash());
}

TEST_CASE("adaptive_step validates inputs") {
  ParamSet p;
  p.add("w", Tensor({1}, {0.0f}));
  OptimizerState st = OptimizerState::init(OptimizerKind::adam, p, 0.1);
  st.tau = 0.0;
  CHECK_THROWS_AS(adaptive_step(st, p, p), std::invalid_argument);
  st.tau = 1e-3;
  ParamSet wrong;
  wrong.add("w", Tensor({2}, {0.0f, 0.0f}));
  CHECK_THROWS_AS(adaptive_step(st, wrong, p), std::invalid_argument);
}

TEST_CASE("grad_check on a 2-layer relu net stays under 1e-3") {
  Rng rng(17);
  const std::vector<std::size_t> widths = {4, 6, 3};
  ParamSet params = mlp::init_params(widths, rng.stream("init"));
  Tensor x = Tensor::zeros({5, 4});
  for (auto& v : x.data) v = static_cast<float>(rng.uniform(-1.5, 1.5));
  std::vector<int> labels;
  for (int i = 0; i < 5; ++i) labels.push_back(static_cast<int>(rng.below(3)));
  mlp::Cache cache;
  Tensor logits = mlp::forward(params, widths, x, &cache);
  auto [loss, dlogits] = softmax_cross_entropy(logits, labels);
  auto back = mlp::backward(params, widths, cache, dlogits);
  auto loss_fn = [&](const ParamSet& p) {
    return softmax_cross_entropy(mlp::forward(p, widths, x), labels).loss;
  };
  CHECK(grad_check(loss_fn, params, back.grads, 1e-3) < 1e-3);
}

TEST_CASE("grad_check is vacuous on an empty param set") {
  ParamSet empty;
  auto loss_fn = [](const ParamSet&) { return 1.0; };
  CHECK(grad_check(loss_fn, empty, empty) == 0.0);
}

TEST_CASE("mlp::param_count matches the architectural formula") {
  CHECK(mlp::param_count({20, 32, 10}) == 20 * 32 + 32 + 32 * 10 + 10);
  Rng rng(1);
  CHECK(mlp::init_params({20, 32, 10}, rng).scalar_count() ==
        mlp::param_count({20, 32, 10}));
}
