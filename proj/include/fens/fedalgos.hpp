// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "fens/data.hpp"
#include "fens/numerics.hpp"
#include "fens/quantize.hpp"
#include "fens/rng.hpp"
#include "fens/tensor.hpp"

namespace fens {

enum class FedAlgo { fedavg, fedprox, fedadam, fedyogi, fedavg_stc };

FedAlgo fed_algo_from_string(const std::string& s);
std::string to_string(FedAlgo a);

struct FedConfig {
  std::size_t rounds = 1;
  std::size_t local_steps = 1;   // K; ignored when local_epochs > 0
  std::size_t local_epochs = 0;  // converts to ceil(n/batch) * epochs
  std::size_t batch_size = 32;
  double client_lr = 0.1;   // eta_l
  double server_lr = 1e-3;  // eta_s (adaptive algorithms)
  double participation = 1.0;
  double prox_mu = 0.0;
  FedAlgo algorithm = FedAlgo::fedavg;
  std::uint64_t seed = 0;
  bool weighted_mean = false;  // sample-count-weighted server mean
  double beta1 = 0.9;
  double beta2 = 0.99;
  double tau = 1e-3;
  double stc_sparsity = 0.5;
  int stc_bits = 16;
  bool stc_strict_bytes = false;  // add index overhead to the accounting

  void validate() const;
  std::size_t steps_for(std::size_t n) const;
};

/// Loss and parameter gradient on one mini-batch of a client dataset. The
/// trained parameters may belong to a local model or an aggregator; the
/// callable closes over whatever else the forward pass needs.
using BatchGradFn = std::function<std::pair<double, ParamSet>(
    const ParamSet&, const Dataset&, const std::vector<std::size_t>&)>;

/// Validation metric for the trained parameters (accuracy in [0, 1]).
using EvalFn = std::function<double(const ParamSet&)>;

/// Top-k magnitude sparsified delta with 16-bit symmetric value grid.
struct CompressedDelta {
  std::vector<std::pair<std::string, std::vector<std::size_t>>> layout;
  std::vector<std::uint64_t> indices;  // flat, ascending
  std::vector<std::int16_t> values;
  float scale = 1.0f;
  std::size_t total_scalars = 0;
  std::size_t kept_count = 0;  // ceil((1 - sparsity) * total_scalars)

  std::size_t wire_bytes(bool strict) const;
};

/// Keep the ceil((1 - sparsity) * n) largest-magnitude coordinates (ties to
/// the lower flat index) and quantize them to a symmetric 16-bit grid.
CompressedDelta stc_compress(const ParamSet& delta, double sparsity = 0.5,
                             int bits = 16);
ParamSet stc_decompress(const CompressedDelta& cd);

/// K deterministic mini-batch SGD steps from start. prox_mu > 0 adds the
/// FedProx pull mu * (p - start) to every gradient; mu = 0 is plain SGD.
ParamSet client_local_update(const ParamSet& start, const Dataset& data,
                             const FedConfig& cfg, const BatchGradFn& grad_fn,
                             Rng rng);

struct ClientUpdate {
  std::size_t client_id = 0;
  ParamSet params;  // full parameters after local work
  std::size_t sample_count = 0;
  std::size_t bytes = 0;  // wire size of the payload actually sent
};

/// Unweighted arithmetic mean of the updates (the displayed FedAvg rule);
/// weighted = true switches to sample-count weighting.
ParamSet server_fedavg(const std::vector<ClientUpdate>& updates,
                       bool weighted = false);

/// Pseudo-gradient step: delta = mean(updates) - broadcast, applied through
/// the adaptive server optimizer.
ParamSet server_adaptive(OptimizerState& state, const ParamSet& broadcast,
                         const std::vector<ClientUpdate>& updates,
                         bool weighted = false);

struct RoundMetrics {
  std::size_t round = 0;
  double val_accuracy = 0.0;
  std::size_t cum_up_bytes = 0;
  std::size_t cum_down_bytes = 0;
};

struct FlLedger {
  std::vector<std::size_t> up_bytes;    // per client
  std::vector<std::size_t> down_bytes;  // per client
  std::size_t total_up() const;
  std::size_t total_down() const;
};

struct FlResult {
  ParamSet final_params;
  std::vector<RoundMetrics> metrics;
  FlLedger ledger;
};

/// R rounds of broadcast -> local update -> aggregate. Client work within a
/// round may run on several threads; updates are reduced in client-id order
/// so the result is schedule-independent.
FlResult run_fl(const ParamSet& init, const std::vector<Dataset>& client_data,
                const FedConfig& cfg, const BatchGradFn& grad_fn,
                const EvalFn& eval_fn, std::size_t threads = 1);

/// Run fn(i) for i in [0, n) across the given number of worker threads.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& fn);

}  // namespace fens
