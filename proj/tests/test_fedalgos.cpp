// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fens/fedalgos.hpp"
#include "fens/models.hpp"

using namespace fens;

namespace {

// quadratic loss 0.5 * ||w - target||^2, independent of the batch content
BatchGradFn quadratic_grad(const std::vector<float>& target) {
  return [target](const ParamSet& p, const Dataset&,
                  const std::vector<std::size_t>&) {
    const auto& w = p.at("w").data;
    double loss = 0.0;
    ParamSet g = p.zeros_like();
    auto& gd = g.at("w").data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double d = w[i] - target[i];
      loss += 0.5 * d * d;
      gd[i] = static_cast<float>(d);
    }
    return std::make_pair(loss, g);
  };
}

Dataset tiny_dataset(std::size_t n = 8) {
  Dataset ds;
  ds.num_classes = 2;
  ds.features = Tensor::zeros({n, 1});
  ds.labels.assign(n, 0);
  return ds;
}

ParamSet scalar_params(std::initializer_list<float> vals) {
  ParamSet p;
  p.add("w", Tensor({vals.size()}, vals));
  return p;
}

BatchGradFn mlp_grad(const std::vector<std::size_t>& widths) {
  return [widths](const ParamSet& p, const Dataset& data,
                  const std::vector<std::size_t>& batch) {
    Dataset sub = data.subset(batch);
    mlp::Cache cache;
    Tensor logits = mlp::forward(p, widths, sub.features, &cache);
    auto [loss, dlogits] = softmax_cross_entropy(logits, sub.labels);
    auto back = mlp::backward(p, widths, cache, dlogits);
    return std::make_pair(loss, back.grads);
  };
}

}  // namespace

TEST_CASE("client_local_update with zero steps returns the start point") {
  FedConfig cfg;
  cfg.local_steps = 0;
  ParamSet start = scalar_params({1.0f, 2.0f});
  ParamSet out = client_local_update(start, tiny_dataset(), cfg,
                                     quadratic_grad({0, 0}), Rng(1));
  CHECK(out.content_hash() == start.content_hash());
}

TEST_CASE("client_local_update matches hand-run gradient descent") {
  FedConfig cfg;
  cfg.local_steps = 3;
  cfg.batch_size = 8;
  cfg.client_lr = 0.5;
  // w <- w - 0.5 (w - 4): 1 -> 2.5 -> 3.25 -> 3.625
  ParamSet start = scalar_params({1.0f});
  ParamSet out = client_local_update(start, tiny_dataset(), cfg,
                                     quadratic_grad({4.0f}), Rng(1));
  CHECK(out.at("w").data[0] == doctest::Approx(3.625f));
}

TEST_CASE("fedprox pull strength zero is bit-identical to plain sgd") {
  Dataset ds = gen_synthetic(2, 3, 10, 2.0, 5);
  const std::vector<std::size_t> widths = {3, 4, 2};
  ParamSet init = mlp::init_params(widths, Rng(2));
  FedConfig plain;
  plain.local_steps = 7;
  plain.batch_size = 4;
  plain.client_lr = 0.1;
  FedConfig prox = plain;
  prox.prox_mu = 0.0;
  prox.algorithm = FedAlgo::fedprox;
  ParamSet a = client_local_update(init, ds, plain, mlp_grad(widths), Rng(3));
  ParamSet b = client_local_update(init, ds, prox, mlp_grad(widths), Rng(3));
  CHECK(a.content_hash() == b.content_hash());
}

TEST_CASE("fedprox pull keeps iterates closer to the broadcast point") {
  Dataset ds = gen_synthetic(2, 3, 20, 2.0, 7);
  const std::vector<std::size_t> widths = {3, 4, 2};
  ParamSet init = mlp::init_params(widths, Rng(4));
  FedConfig cfg;
  cfg.local_steps = 30;
  cfg.batch_size = 8;
  cfg.client_lr = 0.2;
  ParamSet free = client_local_update(init, ds, cfg, mlp_grad(widths), Rng(5));
  cfg.prox_mu = 5.0;
  ParamSet held = client_local_update(init, ds, cfg, mlp_grad(widths), Rng(5));
  CHECK(squared_norm(difference(held, init)) <
        squared_norm(difference(free, init)));
}

TEST_CASE("server_fedavg takes the unweighted mean by default") {
  std::vector<ClientUpdate> ups(2);
  ups[0].params = scalar_params({1.0f, 10.0f});
  ups[0].sample_count = 1;
  ups[1].params = scalar_params({3.0f, 30.0f});
  ups[1].sample_count = 999;
  ParamSet mean = server_fedavg(ups);
  CHECK(mean.at("w").data[0] == doctest::Approx(2.0f));
  CHECK(mean.at("w").data[1] == doctest::Approx(20.0f));
  ParamSet wmean = server_fedavg(ups, true);
  CHECK(wmean.at("w").data[0] == doctest::Approx((1.0 + 3.0 * 999) / 1000.0));
}

TEST_CASE("server_adaptive matches the hand-worked first adam round") {
  ParamSet broadcast = scalar_params({0.0f});
  std::vector<ClientUpdate> ups(1);
  ups[0].params = scalar_params({1.0f});  // delta = 1
  OptimizerState st = OptimizerState::init(OptimizerKind::adam, broadcast,
                                           0.1, 0.9, 0.99, 1e-3);
  ParamSet out = server_adaptive(st, broadcast, ups);
  // m = 0.1, v = 0.01, step = 0.1 * 0.1 / (0.1 + 1e-3)
  CHECK(out.at("w").data[0] == doctest::Approx(0.0990099f).epsilon(1e-5));
}

TEST_CASE("stc_compress keeps the top half by magnitude") {
  ParamSet delta = scalar_params({0.1f, -3.0f, 0.5f, 2.0f});
  CompressedDelta cd = stc_compress(delta, 0.5);
  CHECK(cd.kept_count == 2);
  REQUIRE(cd.indices.size() == 2);
  CHECK(cd.indices[0] == 1);  // -3.0
  CHECK(cd.indices[1] == 3);  // 2.0
  CHECK(cd.scale == doctest::Approx(3.0f / 32767.0f));
  ParamSet back = stc_decompress(cd);
  CHECK(back.at("w").data[0] == 0.0f);
  CHECK(back.at("w").data[1] == doctest::Approx(-3.0f).epsilon(1e-4));
  CHECK(back.at("w").data[2] == 0.0f);
  CHECK(back.at("w").data[3] == doctest::Approx(2.0f).epsilon(1e-4));
}

TEST_CASE("stc on an all-zero delta ships nothing but stays decodable") {
  ParamSet delta = scalar_params({0.0f, 0.0f, 0.0f, 0.0f});
  CompressedDelta cd = stc_compress(delta, 0.5);
  CHECK(cd.indices.empty());
  ParamSet back = stc_decompress(cd);
  for (float v : back.at("w").data) CHECK(v == 0.0f);
}

TEST_CASE("stc wire accounting gives exactly 4x vs fp32 at half sparsity") {
  ParamSet delta;
  Tensor t = Tensor::zeros({100});
  for (std::size_t i = 0; i < 100; ++i)
    t.data[i] = static_cast<float>(i) - 50.0f;
  delta.add("w", t);
  CompressedDelta cd = stc_compress(delta, 0.5);
  CHECK(payload_bytes(delta) == 400);
  CHECK(cd.wire_bytes(false) == 100);  // 50 kept * 2 bytes
  CHECK(payload_bytes(delta) / cd.wire_bytes(false) == 4);
  // strict accounting adds the scale and 7-bit indices
  CHECK(cd.wire_bytes(true) == 100 + 4 + (50 * 7 + 7) / 8);
}

TEST_CASE("stc round-trip error is within half a grid step") {
  Rng rng(9);
  ParamSet delta;
  Tensor t = Tensor::zeros({64});
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  delta.add("w", t);
  CompressedDelta cd = stc_compress(delta, 0.5);
  ParamSet back = stc_decompress(cd);
  for (std::size_t k = 0; k < cd.indices.size(); ++k) {
    const float orig = t.data[cd.indices[k]];
    CHECK(std::abs(back.at("w").data[cd.indices[k]] - orig) <=
          cd.scale / 2 + 1e-7f);
  }
}

TEST_CASE("run_fl on a quadratic converges to the shared optimum") {
  FedConfig cfg;
  cfg.rounds = 40;
  cfg.local_steps = 1;
  cfg.client_lr = 0.5;
  cfg.seed = 11;
  std::vector<Dataset> clients = {tiny_dataset(), tiny_dataset()};
  // clients pull toward different targets; fedavg settles at the midpoint
  std::vector<float> t0 = {2.0f}, t1 = {6.0f};
  BatchGradFn grad = [&](const ParamSet& p, const Dataset& d,
                         const std::vector<std::size_t>& b) {
    // the second dataset is distinguished by address equality
    return (&d == &clients[0] ? quadratic_grad(t0) : quadratic_grad(t1))(p, d,
                                                                         b);
  };
  FlResult res = run_fl(scalar_params({0.0f}), clients, cfg, grad, nullptr);
  CHECK(res.final_params.at("w").data[0] == doctest::Approx(4.0f).epsilon(
      1e-3));
  CHECK(res.metrics.size() == 40);
}

TEST_CASE("run_fl ledgers count one payload up and down per round") {
  FedConfig cfg;
  cfg.rounds = 5;
  cfg.local_steps = 1;
  cfg.client_lr = 0.1;
  std::vector<Dataset> clients = {tiny_dataset(), tiny_dataset(),
                                  tiny_dataset()};
  ParamSet init = scalar_params({1.0f, 2.0f, 3.0f});  // 12 bytes
  FlResult res = run_fl(init, clients, cfg, quadratic_grad({0, 0, 0}),
                        nullptr);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(res.ledger.up_bytes[i] == 5 * 12);
    CHECK(res.ledger.down_bytes[i] == 5 * 12);
  }
  CHECK(res.metrics.back().cum_up_bytes == 3 * 5 * 12);
  CHECK(res.metrics.back().cum_down_bytes == 3 * 5 * 12);
}

TEST_CASE("partial participation bills only the selected clients") {
  FedConfig cfg;
  cfg.rounds = 10;
  cfg.local_steps = 1;
  cfg.client_lr = 0.1;
  cfg.participation = 0.5;
  cfg.seed = 13;
  std::vector<Dataset> clients(4, tiny_dataset());
  ParamSet init = scalar_params({1.0f});
  FlResult res = run_fl(init, clients, cfg, quadratic_grad({0}), nullptr);
  std::size_t total = res.ledger.total_up();
  CHECK(total == 10 * 2 * 4);  // 2 of 4 clients, 4 bytes, 10 rounds
}

TEST_CASE("run_fl is deterministic and thread-count independent") {
  Dataset ds = gen_synthetic(3, 4, 30, 2.0, 17);
  PartitionSpec spec;
  spec.alpha = 0.5;
  spec.clients = 4;
  spec.seed = 19;
  std::vector<Dataset> clients = dirichlet_partition(ds, spec);
  const std::vector<std::size_t> widths = {4, 6, 3};
  ParamSet init = mlp::init_params(widths, Rng(21));
  for (auto algo : {FedAlgo::fedavg, FedAlgo::fedadam, FedAlgo::fedyogi,
                    FedAlgo::fedavg_stc}) {
    FedConfig cfg;
    cfg.rounds = 6;
    cfg.local_steps = 2;
    cfg.batch_size = 8;
    cfg.client_lr = 0.05;
    cfg.server_lr = 0.01;
    cfg.algorithm = algo;
    cfg.seed = 23;
    FlResult a = run_fl(init, clients, cfg, mlp_grad(widths), nullptr, 1);
    FlResult b = run_fl(init, clients, cfg, mlp_grad(widths), nullptr, 8);
    CHECK(a.final_params.content_hash() == b.final_params.content_hash());
    CHECK(a.ledger.total_up() == b.ledger.total_up());
  }
}

TEST_CASE("fedadam run differs from fedavg on the same inputs") {
  Dataset ds = gen_synthetic(2, 3, 20, 2.0, 25);
  std::vector<Dataset> clients = {ds};
  const std::vector<std::size_t> widths = {3, 2};
  ParamSet init = mlp::init_params(widths, Rng(27));
  FedConfig avg;
  avg.rounds = 3;
  avg.local_steps = 2;
  avg.client_lr = 0.1;
  avg.seed = 29;
  FedConfig adam = avg;
  adam.algorithm = FedAlgo::fedadam;
  adam.server_lr = 0.05;
  FlResult a = run_fl(init, clients, avg, mlp_grad(widths), nullptr);
  FlResult b = run_fl(init, clients, adam, mlp_grad(widths), nullptr);
  CHECK(a.final_params.content_hash() != b.final_params.content_hash());
}

TEST_CASE("local_epochs converts to ceil(n / batch) * epochs steps") {
  FedConfig cfg;
  cfg.local_epochs = 3;
  cfg.batch_size = 32;
  CHECK(cfg.steps_for(100) == 4 * 3);
  CHECK(cfg.steps_for(32) == 3);
  cfg.local_epochs = 0;
  cfg.local_steps = 7;
  CHECK(cfg.steps_for(100) == 7);
}

TEST_CASE("config validation rejects bad fields") {
  FedConfig cfg;
  cfg.rounds = 0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.rounds = 1;
  cfg.participation = 0.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.participation = 1.0;
  cfg.prox_mu = -1.0;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("parallel_for covers every index exactly once and rethrows") {
  std::vector<std::atomic<int>> hits(100);
  for (auto& h : hits) h = 0;
  parallel_for(100, 8, [&](std::size_t i) { ++hits[i]; });
  for (auto& h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(
      parallel_for(10, 4,
                   [](std::size_t i) {
                     if (i == 5) throw std::runtime_error("boom");
                   }),
      std::runtime_error);
}

TEST_CASE("fed algorithm strings round-trip") {
  for (auto a : {FedAlgo::fedavg, FedAlgo::fedprox, FedAlgo::fedadam,
                 FedAlgo::fedyogi, FedAlgo::fedavg_stc})
    CHECK(fed_algo_from_string(to_string(a)) == a);
  CHECK_THROWS_AS(fed_algo_from_string("sgd"), std::invalid_argument);
}
