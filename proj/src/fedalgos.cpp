// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include "fens/fedalgos.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

namespace fens {

FedAlgo fed_algo_from_string(const std::string& s) {
  if (s == "fedavg") return FedAlgo::fedavg;
  if (s == "fedprox") return FedAlgo::fedprox;
  if (s == "fedadam") return FedAlgo::fedadam;
  if (s == "fedyogi") return FedAlgo::fedyogi;
  if (s == "fedavg_stc") return FedAlgo::fedavg_stc;
  throw std::invalid_argument("unknown FL algorithm: " + s);
}

std::string to_string(FedAlgo a) {
  switch (a) {
    case FedAlgo::fedavg: return "fedavg";
    case FedAlgo::fedprox: return "fedprox";
    case FedAlgo::fedadam: return "fedadam";
    case FedAlgo::fedyogi: return "fedyogi";
    case FedAlgo::fedavg_stc: return "fedavg_stc";
  }
  return "?";
}

void FedConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("FedConfig: rounds must be >= 1");
  if (batch_size < 1)
    throw std::invalid_argument("FedConfig: batch_size must be >= 1");
  if (prox_mu < 0.0)
    throw std::invalid_argument("FedConfig: prox_mu must be >= 0");
  if (participation <= 0.0 || participation > 1.0)
    throw std::invalid_argument("FedConfig: participation must be in (0, 1]");
}

std::size_t FedConfig::steps_for(std::size_t n) const {
  if (local_epochs == 0) return local_steps;
  const std::size_t per_epoch = (n + batch_size - 1) / batch_size;
  return per_epoch * local_epochs;
}

std::size_t CompressedDelta::wire_bytes(bool strict) const {
  // default accounting counts only the 16-bit value payload, giving an
  // exact 4x reduction at 50% sparsity
  std::size_t bytes = kept_count * 2;
  if (strict && total_scalars > 1) {
    std::size_t index_bits = 1;
    while ((std::size_t{1} << index_bits) < total_scalars) ++index_bits;
    bytes += 4 + (indices.size() * index_bits + 7) / 8;  // scale + indices
  }
  return bytes;
}

CompressedDelta stc_compress(const ParamSet& delta, double sparsity,
                             int bits) {
  if (sparsity <= 0.0 || sparsity >= 1.0)
    throw std::invalid_argument("stc_compress: sparsity must be in (0, 1)");
  if (bits != 16)
    throw std::invalid_argument("stc_compress: only 16-bit grid supported");
  CompressedDelta cd;
  std::vector<float> flat;
  for (const auto& [name, t] : delta.entries()) {
    cd.layout.emplace_back(name, t.shape);
    flat.insert(flat.end(), t.data.begin(), t.data.end());
  }
  cd.total_scalars = flat.size();
  const std::size_t keep = static_cast<std::size_t>(
      std::ceil((1.0 - sparsity) * static_cast<double>(flat.size())));
  std::vector<std::size_t> order(flat.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  // ties resolve to the lower flat index via stable ordering
  std::stable_sort(order.begin(), order.end(),
                   [&flat](std::size_t a, std::size_t b) {
                     return std::abs(flat[a]) > std::abs(flat[b]);
                   });
  std::vector<std::size_t> kept(order.begin(), order.begin() + keep);
  std::sort(kept.begin(), kept.end());
  cd.kept_count = keep;
  float max_abs = 0.0f;
  for (std::size_t i : kept) max_abs = std::max(max_abs, std::abs(flat[i]));
  cd.scale = max_abs > 0.0f ? max_abs / 32767.0f : 1.0f;
  for (std::size_t i : kept) {
    if (flat[i] == 0.0f) continue;  // a zero coordinate carries no update
    cd.indices.push_back(i);
    cd.values.push_back(static_cast<std::int16_t>(
        std::clamp(std::round(flat[i] / cd.scale), -32767.0f, 32767.0f)));
  }
  return cd;
}

ParamSet stc_decompress(const CompressedDelta& cd) {
  std::vector<float> flat(cd.total_scalars, 0.0f);
  for (std::size_t k = 0; k < cd.indices.size(); ++k)
    flat[cd.indices[k]] = cd.scale * static_cast<float>(cd.values[k]);
  ParamSet out;
  std::size_t cursor = 0;
  for (const auto& [name, shape] : cd.layout) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    out.add(name, Tensor(shape, std::vector<float>(flat.begin() + cursor,
                                                   flat.begin() + cursor + n)));
    cursor += n;
  }
  return out;
}

ParamSet client_local_update(const ParamSet& start, const Dataset& data,
                             const FedConfig& cfg, const BatchGradFn& grad_fn,
                             Rng rng) {
  const std::size_t steps = cfg.steps_for(data.size());
  if (steps == 0) return start;
  if (data.size() == 0)
    throw std::invalid_argument("client_local_update: empty dataset with "
                                "positive step budget");
  ParamSet params = start;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::size_t pos = 0;
  for (std::size_t step = 0; step < steps; ++step) {
    if (pos >= order.size()) {
      rng.shuffle(order);
      pos = 0;
    }
    const std::size_t take = std::min(cfg.batch_size, order.size() - pos);
    std::vector<std::size_t> batch(order.begin() + pos,
                                   order.begin() + pos + take);
    pos += take;
    auto [loss, grads] = grad_fn(params, data, batch);
    if (!std::isfinite(loss))
      throw std::runtime_error("client_local_update: non-finite loss");
    if (cfg.prox_mu > 0.0) {
      // FedProx proximal pull toward the broadcast point
      const float mu = static_cast<float>(cfg.prox_mu);
      ParamSet pull = difference(params, start);
      axpy(grads, pull, mu);
    }
    params = sgd_step(params, grads, static_cast<float>(cfg.client_lr));
  }
  return params;
}

namespace {

ParamSet mean_updates(const std::vector<ClientUpdate>& updates,
                      bool weighted) {
  if (updates.empty())
    throw std::invalid_argument("server aggregation: empty update set");
  if (!weighted) {
    std::vector<ParamSet> sets;
    sets.reserve(updates.size());
    for (const auto& u : updates) sets.push_back(u.params);
    return mean(sets);
  }
  double total = 0.0;
  for (const auto& u : updates) total += static_cast<double>(u.sample_count);
  if (total <= 0.0)
    throw std::invalid_argument("server aggregation: zero total samples");
  ParamSet out = updates[0].params.zeros_like();
  for (std::size_t e = 0; e < out.entries().size(); ++e) {
    auto& dst = out.entries()[e].second.data;
    for (std::size_t j = 0; j < dst.size(); ++j) {
      double acc = 0.0;
      for (const auto& u : updates)
        acc += static_cast<double>(u.sample_count) *
               u.params.entries()[e].second.data[j];
      dst[j] = static_cast<float>(acc / total);
    }
  }
  return out;
}

}  // namespace

ParamSet server_fedavg(const std::vector<ClientUpdate>& updates,
                       bool weighted) {
  return mean_updates(updates, weighted);
}

ParamSet server_adaptive(OptimizerState& state, const ParamSet& broadcast,
                         const std::vector<ClientUpdate>& updates,
                         bool weighted) {
  ParamSet delta = difference(mean_updates(updates, weighted), broadcast);
  return adaptive_step(state, delta, broadcast);
}

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

FlResult run_fl(const ParamSet& init, const std::vector<Dataset>& client_data,
                const FedConfig& cfg, const BatchGradFn& grad_fn,
                const EvalFn& eval_fn, std::size_t threads) {
  cfg.validate();
  const std::size_t M = client_data.size();
  if (M == 0) throw std::invalid_argument("run_fl: no clients");

  FlResult result;
  result.final_params = init;
  result.ledger.up_bytes.assign(M, 0);
  result.ledger.down_bytes.assign(M, 0);

  const std::size_t model_bytes = payload_bytes(init);
  OptimizerState opt = OptimizerState::init(
      cfg.algorithm == FedAlgo::fedyogi ? OptimizerKind::yogi
                                        : OptimizerKind::adam,
      init, cfg.server_lr, cfg.beta1, cfg.beta2, cfg.tau);

  Rng base(cfg.seed);
  std::size_t cum_up = 0, cum_down = 0;

  for (std::size_t round = 0; round < cfg.rounds; ++round) {
    // uniform sampling without replacement from the round's stream
    std::vector<std::size_t> selected(M);
    for (std::size_t i = 0; i < M; ++i) selected[i] = i;
    const std::size_t take = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(cfg.participation * static_cast<double>(M))));
    if (take < M) {
      Rng round_rng = base.stream("sample", round);
      round_rng.shuffle(selected);
      selected.resize(take);
      std::sort(selected.begin(), selected.end());
    }

    std::vector<ClientUpdate> updates(selected.size());
    parallel_for(selected.size(), threads, [&](std::size_t s) {
      const std::size_t id = selected[s];
      Rng client_rng = base.stream("client", id).stream("round", round);
      ClientUpdate u;
      u.client_id = id;
      u.sample_count = client_data[id].size();
      u.params = client_local_update(result.final_params, client_data[id],
                                     cfg, grad_fn, client_rng);
      if (cfg.algorithm == FedAlgo::fedavg_stc) {
        ParamSet delta = difference(u.params, result.final_params);
        CompressedDelta cd = stc_compress(delta, cfg.stc_sparsity,
                                          cfg.stc_bits);
        u.bytes = cd.wire_bytes(cfg.stc_strict_bytes);
        // the server sees exactly what survives the wire
        u.params = result.final_params;
        axpy(u.params, stc_decompress(cd), 1.0f);
      } else {
        u.bytes = payload_bytes(u.params);
      }
      updates[s] = std::move(u);
    });

    for (const auto& u : updates) {
      result.ledger.down_bytes[u.client_id] += model_bytes;
      result.ledger.up_bytes[u.client_id] += u.bytes;
      cum_down += model_bytes;
      cum_up += u.bytes;
    }

    switch (cfg.algorithm) {
      case FedAlgo::fedavg:
      case FedAlgo::fedprox:
      case FedAlgo::fedavg_stc:
        result.final_params = server_fedavg(updates, cfg.weighted_mean);
        break;
      case FedAlgo::fedadam:
      case FedAlgo::fedyogi:
        result.final_params = server_adaptive(opt, result.final_params,
                                              updates, cfg.weighted_mean);
        break;
    }

    RoundMetrics m;
    m.round = round;
    m.val_accuracy = eval_fn ? eval_fn(result.final_params) : 0.0;
    m.cum_up_bytes = cum_up;
    m.cum_down_bytes = cum_down;
    result.metrics.push_back(m);
  }
  return result;
}

std::size_t FlLedger::total_up() const {
  std::size_t t = 0;
  for (std::size_t b : up_bytes) t += b;
  return t;
}

std::size_t FlLedger::total_down() const {
  std::size_t t = 0;
  for (std::size_t b : down_bytes) t += b;
  return t;
}

}  // namespace fens
