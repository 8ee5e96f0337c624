// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fens/data.hpp"
#include "fens/fedalgos.hpp"
#include "fens/models.hpp"
#include "fens/quantize.hpp"
#include "fens/tensor.hpp"

namespace fens {

struct LocalTrainRecipe {
  std::size_t epochs = 20;
  double lr = 0.05;
  bool cosine = true;
  std::size_t batch_size = 32;
  std::vector<std::size_t> hidden = {32};  // hidden widths of the local MLP
};

struct FensConfig {
  LocalTrainRecipe local;
  bool quantize = true;
  AggKind aggregator = AggKind::nn;
  std::size_t hidden_width = 40;   // k, nn aggregator
  std::size_t gating_hidden = 16;  // moe gating
  bool cache_logits = false;       // precompute frozen logits per client
  FedConfig agg_fl;                // phase-2 recipe, fedadam by default
  std::uint64_t seed = 0;

  FensConfig() {
    agg_fl.algorithm = FedAlgo::fedadam;
    agg_fl.rounds = 100;
    agg_fl.local_steps = 1;
    agg_fl.batch_size = 128;
    agg_fl.client_lr = 1.0;
    agg_fl.server_lr = 0.001;
  }
};

/// Exact per-client, per-phase byte accounting.
struct CommLedger {
  struct Entry {
    std::size_t phase1_up = 0;    // one-shot local model upload
    std::size_t phase1_down = 0;  // ensemble broadcast
    std::size_t phase2_up = 0;    // aggregator rounds + static-fit payloads
    std::size_t phase2_down = 0;
    std::size_t total() const {
      return phase1_up + phase1_down + phase2_up + phase2_down;
    }
  };
  std::vector<Entry> clients;

  std::size_t total() const;
  std::string to_json() const;
};

struct GlobalModel {
  std::vector<LocalModel> ensemble;
  AggregatorSpec aggregator;
};

/// Epoch-budgeted mini-batch SGD with a per-epoch cosine-annealed learning
/// rate. Shared by phase-1 local training, centralized baselines and the
/// distillation student.
ParamSet train_classifier(const std::vector<std::size_t>& widths,
                          const ParamSet& init, const Dataset& data,
                          const LocalTrainRecipe& recipe, Rng rng);

struct Phase1Result {
  std::vector<LocalModel> models;
  std::vector<std::size_t> upload_bytes;  // per client
};

/// Every client trains the shared initialization on its D_i1 and uploads the
/// result once.
Phase1Result phase1(const std::vector<ClientShard>& shards,
                    const FensConfig& cfg, std::size_t threads = 1);

struct BroadcastResult {
  std::vector<LocalModel> shipped;  // dequantized when quantize is on
  std::size_t bytes_per_client = 0; // sum over the M shipped models
};

BroadcastResult broadcast_ensemble(const std::vector<LocalModel>& models,
                                   bool quantize);

struct Phase2Result {
  AggregatorSpec aggregator;
  std::vector<RoundMetrics> metrics;
  std::vector<std::size_t> up_bytes;    // per client
  std::vector<std::size_t> down_bytes;  // per client
};

/// Federated training of the aggregator's parameters over the frozen
/// ensemble's logits on the clients' reserved splits.
Phase2Result phase2(const std::vector<LocalModel>& ensemble,
                    const std::vector<ClientShard>& shards,
                    const FensConfig& cfg, const Dataset& validation,
                    std::size_t threads = 1);

struct StaticFitResult {
  AggregatorSpec aggregator;
  std::vector<std::size_t> up_bytes;  // per client, the one extra exchange
};

/// Builds the static rules: average (nothing to send), weighted averaging
/// (label counts) and voting (competency estimates, server-aggregated).
StaticFitResult fit_static(const std::vector<LocalModel>& ensemble,
                           const std::vector<ClientShard>& shards,
                           AggKind kind);

int global_predict(const GlobalModel& gm, const Tensor& x_row);
double evaluate_global(const GlobalModel& gm, const Dataset& data);

struct DistillRecipe {
  std::size_t epochs = 30;
  double lr = 0.05;
  std::size_t batch_size = 64;
  double temperature = 1.0;
  bool cosine = true;
};

/// Server-side knowledge distillation of the global model into one student
/// over an unlabeled auxiliary set.
LocalModel distill(const GlobalModel& gm, const Tensor& aux_features,
                   const std::vector<std::size_t>& student_widths,
                   const DistillRecipe& recipe, std::uint64_t seed);

struct FensRunResult {
  GlobalModel model;
  CommLedger ledger;
  std::vector<RoundMetrics> phase2_metrics;
};

/// Algorithms 1 and 2 end to end: phase 1, (optional) quantized broadcast,
/// then either federated aggregator training or a static fit.
FensRunResult run_fens(const std::vector<ClientShard>& shards,
                       const Dataset& validation, const FensConfig& cfg,
                       std::size_t threads = 1);

struct LedgerReport {
  std::size_t fens_bytes_per_client = 0;  // mean over clients
  std::size_t ofl_bytes_per_client = 0;   // one FP32 model upload
  double fens_over_ofl = 0.0;
  // upload-only comparison: what a client spends sending, the cost the
  // one-shot baseline is usually credited with
  std::size_t fens_up_bytes_per_client = 0;
  double fens_up_over_ofl = 0.0;
  std::size_t fl_bytes_per_client = 0;    // for the given FL round count
  double fl_over_fens = 0.0;
};

LedgerReport ledger_report(const CommLedger& ledger,
                           std::size_t fp32_model_bytes,
                           std::size_t fl_rounds);

}  // namespace fens
