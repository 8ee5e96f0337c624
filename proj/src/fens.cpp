// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include "fens/fens.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fens {

std::size_t CommLedger::total() const {
  std::size_t t = 0;
  for (const auto& e : clients) t += e.total();
  return t;
}

std::string CommLedger::to_json() const {
  std::ostringstream out;
  out << "{";
  for (std::size_t i = 0; i < clients.size(); ++i) {
    const auto& e = clients[i];
    if (i) out << ",";
    out << "\"" << i << "\":{"
        << "\"phase1_up\":" << e.phase1_up << ","
        << "\"phase1_down\":" << e.phase1_down << ","
        << "\"phase2_up\":" << e.phase2_up << ","
        << "\"phase2_down\":" << e.phase2_down << ","
        << "\"total\":" << e.total() << "}";
  }
  out << "}";
  return out.str();
}

ParamSet train_classifier(const std::vector<std::size_t>& widths,
                          const ParamSet& init, const Dataset& data,
                          const LocalTrainRecipe& recipe, Rng rng) {
  if (data.size() == 0)
    throw std::invalid_argument("train_classifier: empty dataset");
  ParamSet params = init;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t epoch = 0; epoch < recipe.epochs; ++epoch) {
    const double lr = recipe.cosine
                          ? cosine_anneal(recipe.lr, epoch, recipe.epochs)
                          : recipe.lr;
    rng.shuffle(order);
    for (std::size_t pos = 0; pos < order.size(); pos += recipe.batch_size) {
      const std::size_t take = std::min(recipe.batch_size,
                                        order.size() - pos);
      std::vector<std::size_t> batch(order.begin() + pos,
                                     order.begin() + pos + take);
      Dataset b = data.subset(batch);
      mlp::Cache cache;
      Tensor logits = mlp::forward(params, widths, b.features, &cache);
      auto [loss, dlogits] = softmax_cross_entropy(logits, b.labels);
      if (!std::isfinite(loss))
        throw std::runtime_error("train_classifier: non-finite loss");
      auto back = mlp::backward(params, widths, cache, dlogits);
      params = sgd_step(params, back.grads, static_cast<float>(lr));
    }
  }
  return params;
}

Phase1Result phase1(const std::vector<ClientShard>& shards,
                    const FensConfig& cfg, std::size_t threads) {
  if (shards.empty()) throw std::invalid_argument("phase1: no shards");
  for (const auto& s : shards)
    if (s.local_train.size() == 0)
      throw std::invalid_argument("phase1: client " +
                                  std::to_string(s.client_id) +
                                  " has an empty local training split");
  const std::size_t d = shards[0].local_train.dim();
  const std::size_t C = shards[0].local_train.num_classes;
  std::vector<std::size_t> widths;
  widths.push_back(d);
  for (std::size_t h : cfg.local.hidden) widths.push_back(h);
  widths.push_back(C);

  // the server draws one shared initialization and sends it to everyone
  Rng base(cfg.seed);
  LocalModel shared = init_local_model(widths, base.stream("phase1-init"));

  Phase1Result out;
  out.models.assign(shards.size(), shared);
  out.upload_bytes.assign(shards.size(), 0);
  parallel_for(shards.size(), threads, [&](std::size_t i) {
    Rng client_rng = base.stream("phase1-client", shards[i].client_id);
    out.models[i].params = train_classifier(widths, shared.params,
                                            shards[i].local_train, cfg.local,
                                            client_rng);
    out.upload_bytes[i] = payload_bytes(out.models[i].params);
  });
  return out;
}

BroadcastResult broadcast_ensemble(const std::vector<LocalModel>& models,
                                   bool quantize) {
  BroadcastResult out;
  out.shipped = models;
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (quantize) {
      QuantizedParamSet q = quantize_params(models[i].params);
      out.bytes_per_client += payload_bytes(q);
      out.shipped[i].params = dequantize(q);
    } else {
      out.bytes_per_client += payload_bytes(models[i].params);
    }
  }
  return out;
}

namespace {

Tensor logits_for_rows(const std::vector<LocalModel>& ensemble,
                       const Dataset& data,
                       const std::vector<std::size_t>& idx) {
  Dataset b = data.subset(idx);
  return ensemble_forward(ensemble, b.features);
}

AggregatorSpec with_params(const AggregatorSpec& tmpl, const ParamSet& p) {
  AggregatorSpec s = tmpl;
  s.params = p;
  return s;
}

double aggregator_accuracy(const AggregatorSpec& spec, const Tensor& Z,
                           const Tensor& x, const std::vector<int>& labels) {
  Tensor out = aggregator_forward(spec, Z, x);
  const std::size_t n = out.shape[0], C = out.shape[1];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Tensor row({C}, std::vector<float>(out.data.begin() + i * C,
                                       out.data.begin() + (i + 1) * C));
    hits += argmax_class(row) == labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace

Phase2Result phase2(const std::vector<LocalModel>& ensemble,
                    const std::vector<ClientShard>& shards,
                    const FensConfig& cfg, const Dataset& validation,
                    std::size_t threads) {
  if (!agg_is_trainable(cfg.aggregator))
    throw std::invalid_argument("phase2: aggregator kind " +
                                to_string(cfg.aggregator) +
                                " is static; use fit_static");
  const std::size_t M = ensemble.size();
  const std::size_t C = ensemble[0].num_classes();
  const std::size_t d = ensemble[0].input_dim();

  Rng base(cfg.seed);
  AggregatorSpec spec =
      init_aggregator(cfg.aggregator, M, C, cfg.hidden_width, d,
                      cfg.gating_hidden, base.stream("agg-init"));

  // the client models are frozen for the whole phase
  std::vector<std::uint64_t> hashes;
  for (const auto& m : ensemble) hashes.push_back(m.params.content_hash());

  std::vector<Dataset> client_data;
  client_data.reserve(shards.size());
  for (const auto& s : shards) client_data.push_back(s.agg_train);

  // optional per-client precomputed logits; identical results because the
  // forward pass is row-independent
  std::vector<Tensor> cached;
  std::vector<const Dataset*> dataset_ptrs;
  if (cfg.cache_logits) {
    for (const auto& ds : client_data)
      cached.push_back(ensemble_forward(ensemble, ds.features));
    for (const auto& ds : client_data) dataset_ptrs.push_back(&ds);
  }

  BatchGradFn grad_fn = [&](const ParamSet& params, const Dataset& data,
                            const std::vector<std::size_t>& batch)
      -> std::pair<double, ParamSet> {
    AggregatorSpec s = with_params(spec, params);
    Dataset b = data.subset(batch);
    Tensor Z;
    if (cfg.cache_logits) {
      // locate the cache for this client dataset
      std::size_t who = 0;
      while (who < dataset_ptrs.size() && dataset_ptrs[who] != &data) ++who;
      if (who == dataset_ptrs.size())
        throw std::logic_error("phase2: unknown dataset in cached mode");
      const Tensor& full = cached[who];
      Z = Tensor::zeros({batch.size(), M, C});
      for (std::size_t r = 0; r < batch.size(); ++r)
        std::copy_n(full.data.begin() + batch[r] * M * C, M * C,
                    Z.data.begin() + r * M * C);
    } else {
      Z = ensemble_forward(ensemble, b.features);
    }
    auto lg = aggregator_loss_grad(s, Z, b.features, b.labels);
    return {lg.loss, std::move(lg.grads)};
  };

  Tensor Zval = ensemble_forward(ensemble, validation.features);
  EvalFn eval_fn = [&](const ParamSet& params) {
    return aggregator_accuracy(with_params(spec, params), Zval,
                               validation.features, validation.labels);
  };

  FedConfig fl_cfg = cfg.agg_fl;
  fl_cfg.seed = base.stream("phase2-fl").next_u64();
  FlResult fl = run_fl(spec.params, client_data, fl_cfg, grad_fn, eval_fn,
                       threads);

  for (std::size_t i = 0; i < ensemble.size(); ++i)
    if (ensemble[i].params.content_hash() != hashes[i])
      throw std::logic_error("phase2: frozen client model was mutated");

  Phase2Result out;
  out.aggregator = with_params(spec, fl.final_params);
  out.metrics = std::move(fl.metrics);
  out.up_bytes = std::move(fl.ledger.up_bytes);
  out.down_bytes = std::move(fl.ledger.down_bytes);
  return out;
}

StaticFitResult fit_static(const std::vector<LocalModel>& ensemble,
                           const std::vector<ClientShard>& shards,
                           AggKind kind) {
  const std::size_t M = ensemble.size();
  const std::size_t C = ensemble[0].num_classes();
  StaticFitResult out;
  out.up_bytes.assign(shards.size(), 0);
  switch (kind) {
    case AggKind::average: {
      out.aggregator = init_aggregator(AggKind::average, M, C, 0, 0, 0,
                                       Rng(0));
      break;
    }
    case AggKind::weighted_average: {
      std::vector<std::vector<std::size_t>> counts;
      for (std::size_t i = 0; i < shards.size(); ++i) {
        counts.push_back(shards[i].label_counts);
        out.up_bytes[i] = C * 4;  // one count vector
      }
      out.aggregator = init_aggregator(AggKind::weighted_average, M, C, 0, 0,
                                       0, Rng(0));
      out.aggregator.params.at("lambda") =
          weighted_lambda_from_counts(counts, C);
      break;
    }
    case AggKind::vote: {
      std::vector<std::vector<CompetencyMatrix>> estimates;
      std::vector<std::size_t> sample_counts;
      for (std::size_t i = 0; i < shards.size(); ++i) {
        estimates.push_back(estimate_competency(ensemble,
                                                shards[i].agg_train));
        sample_counts.push_back(shards[i].agg_train.size());
        out.up_bytes[i] = M * C * C * 4;  // M competency matrices
      }
      out.aggregator = init_aggregator(AggKind::vote, M, C, 0, 0, 0, Rng(0));
      out.aggregator.competency = aggregate_competency(estimates,
                                                       sample_counts);
      break;
    }
    default:
      throw std::invalid_argument("fit_static: kind " + to_string(kind) +
                                  " is trainable; use phase2");
  }
  return out;
}

int global_predict(const GlobalModel& gm, const Tensor& x_row) {
  Tensor x({1, x_row.size()}, x_row.data);
  Tensor Z = ensemble_forward(gm.ensemble, x);
  if (gm.aggregator.kind == AggKind::vote) {
    const std::size_t M = Z.shape[1], C = Z.shape[2];
    std::vector<int> votes(M);
    for (std::size_t i = 0; i < M; ++i) {
      Tensor row({C}, std::vector<float>(Z.data.begin() + i * C,
                                         Z.data.begin() + (i + 1) * C));
      votes[i] = argmax_class(row);
    }
    const Tensor prior = Tensor::full({C}, 1.0f / static_cast<float>(C));
    Tensor benefit = Tensor::zeros({C, C});
    for (std::size_t c = 0; c < C; ++c) benefit.data[c * C + c] = 1.0f;
    return agg_vote(votes, gm.aggregator.competency, prior, benefit);
  }
  Tensor out = aggregator_forward(gm.aggregator, Z, x);
  return argmax_class(Tensor({out.shape[1]}, out.data));
}

double evaluate_global(const GlobalModel& gm, const Dataset& data) {
  if (data.size() == 0)
    throw std::invalid_argument("evaluate_global: empty dataset");
  if (gm.aggregator.kind == AggKind::vote) {
    std::size_t hits = 0;
    const std::size_t d = data.dim();
    for (std::size_t i = 0; i < data.size(); ++i) {
      Tensor row({d}, std::vector<float>(
                          data.features.data.begin() + i * d,
                          data.features.data.begin() + (i + 1) * d));
      hits += global_predict(gm, row) == data.labels[i];
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
  }
  Tensor Z = ensemble_forward(gm.ensemble, data.features);
  return aggregator_accuracy(gm.aggregator, Z, data.features, data.labels);
}

LocalModel distill(const GlobalModel& gm, const Tensor& aux_features,
                   const std::vector<std::size_t>& student_widths,
                   const DistillRecipe& recipe, std::uint64_t seed) {
  if (gm.aggregator.kind == AggKind::vote)
    throw std::invalid_argument("distill: vote aggregator has no logit "
                                "output to match");
  if (aux_features.shape.empty() || aux_features.shape[0] == 0)
    throw std::invalid_argument("distill: empty auxiliary set");
  const std::size_t n = aux_features.shape[0];
  const std::size_t C = gm.ensemble[0].num_classes();
  const double T = recipe.temperature;

  Tensor Zaux = ensemble_forward(gm.ensemble, aux_features);
  Tensor teacher_logits = aggregator_forward(gm.aggregator, Zaux,
                                             aux_features);
  Tensor scaled = teacher_logits;
  for (auto& v : scaled.data) v = static_cast<float>(v / T);
  Tensor teacher_probs = softmax_rows(scaled);

  Rng rng = Rng(seed).stream("distill");
  LocalModel student = init_local_model(student_widths, rng.stream("init"));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng batch_rng = rng.stream("batches");
  for (std::size_t epoch = 0; epoch < recipe.epochs; ++epoch) {
    const double lr = recipe.cosine
                          ? cosine_anneal(recipe.lr, epoch, recipe.epochs)
                          : recipe.lr;
    batch_rng.shuffle(order);
    for (std::size_t pos = 0; pos < n; pos += recipe.batch_size) {
      const std::size_t take = std::min(recipe.batch_size, n - pos);
      const std::size_t d = aux_features.shape[1];
      Tensor xb = Tensor::zeros({take, d});
      Tensor pb = Tensor::zeros({take, C});
      for (std::size_t r = 0; r < take; ++r) {
        const std::size_t i = order[pos + r];
        std::copy_n(aux_features.data.begin() + i * d, d,
                    xb.data.begin() + r * d);
        std::copy_n(teacher_probs.data.begin() + i * C, C,
                    pb.data.begin() + r * C);
      }
      mlp::Cache cache;
      Tensor logits = mlp::forward(student.params, student.widths, xb,
                                   &cache);
      Tensor student_scaled = logits;
      for (auto& v : student_scaled.data) v = static_cast<float>(v / T);
      Tensor q = softmax_rows(student_scaled);
      // d(T^2 * KL)/d logits = T (q - p) / n_batch
      Tensor dlogits = Tensor::zeros({take, C});
      for (std::size_t e = 0; e < dlogits.size(); ++e)
        dlogits.data[e] = static_cast<float>(
            T * (static_cast<double>(q.data[e]) - pb.data[e]) /
            static_cast<double>(take));
      auto back = mlp::backward(student.params, student.widths, cache,
                                dlogits);
      student.params = sgd_step(student.params, back.grads,
                                static_cast<float>(lr));
    }
  }
  return student;
}

FensRunResult run_fens(const std::vector<ClientShard>& shards,
                       const Dataset& validation, const FensConfig& cfg,
                       std::size_t threads) {
  FensRunResult out;
  out.ledger.clients.assign(shards.size(), {});

  Phase1Result p1 = phase1(shards, cfg, threads);
  for (std::size_t i = 0; i < shards.size(); ++i)
    out.ledger.clients[i].phase1_up = p1.upload_bytes[i];

  BroadcastResult bc = broadcast_ensemble(p1.models, cfg.quantize);
  for (auto& e : out.ledger.clients) e.phase1_down = bc.bytes_per_client;
  out.model.ensemble = bc.shipped;

  if (agg_is_trainable(cfg.aggregator)) {
    Phase2Result p2 = phase2(bc.shipped, shards, cfg, validation, threads);
    out.model.aggregator = std::move(p2.aggregator);
    out.phase2_metrics = std::move(p2.metrics);
    for (std::size_t i = 0; i < shards.size(); ++i) {
      out.ledger.clients[i].phase2_up = p2.up_bytes[i];
      out.ledger.clients[i].phase2_down = p2.down_bytes[i];
    }
  } else {
    StaticFitResult fit = fit_static(bc.shipped, shards, cfg.aggregator);
    out.model.aggregator = std::move(fit.aggregator);
    for (std::size_t i = 0; i < shards.size(); ++i)
      out.ledger.clients[i].phase2_up = fit.up_bytes[i];
  }
  return out;
}

LedgerReport ledger_report(const CommLedger& ledger,
                           std::size_t fp32_model_bytes,
                           std::size_t fl_rounds) {
  LedgerReport r;
  if (ledger.clients.empty()) return r;
  r.fens_bytes_per_client = ledger.total() / ledger.clients.size();
  std::size_t up_total = 0;
  for (const auto& e : ledger.clients) up_total += e.phase1_up + e.phase2_up;
  r.fens_up_bytes_per_client = up_total / ledger.clients.size();
  r.ofl_bytes_per_client = fp32_model_bytes;
  if (fp32_model_bytes > 0) {
    r.fens_over_ofl = static_cast<double>(r.fens_bytes_per_client) /
                      static_cast<double>(fp32_model_bytes);
    r.fens_up_over_ofl = static_cast<double>(r.fens_up_bytes_per_client) /
                         static_cast<double>(fp32_model_bytes);
  }
  r.fl_bytes_per_client = 2 * fl_rounds * fp32_model_bytes;
  if (r.fens_bytes_per_client > 0)
    r.fl_over_fens = static_cast<double>(r.fl_bytes_per_client) /
                     static_cast<double>(r.fens_bytes_per_client);
  return r;
}

}  // namespace fens
