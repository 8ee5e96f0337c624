// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <string>
#include <vector>

#include "fens/data.hpp"
#include "fens/numerics.hpp"
#include "fens/rng.hpp"
#include "fens/tensor.hpp"

namespace fens {

/// Fully connected classifier with ReLU hidden layers.
struct LocalModel {
  std::vector<std::size_t> widths;  // [d, h1, ..., C]
  ParamSet params;

  std::size_t num_classes() const { return widths.back(); }
  std::size_t input_dim() const { return widths.front(); }
};

LocalModel init_local_model(const std::vector<std::size_t>& widths, Rng rng);

/// Raw pre-softmax logits, [n x C].
Tensor local_forward(const LocalModel& model, const Tensor& x);

/// Stacked client logits for a batch: shape [n, M, C], row order = client
/// id order.
Tensor ensemble_forward(const std::vector<LocalModel>& models,
                        const Tensor& x);

enum class AggKind {
  average,
  weighted_average,
  linear,
  per_class,
  nn,
  vote,
  moe,
};

AggKind agg_kind_from_string(const std::string& s);
std::string to_string(AggKind k);
bool agg_is_trainable(AggKind k);

/// Row-stochastic C x C matrix: P[r][c] = probability the model votes c when
/// the ground truth is r.
using CompetencyMatrix = Tensor;

/// One of the six aggregation rules plus its parameters.
struct AggregatorSpec {
  AggKind kind = AggKind::average;
  ParamSet params;  // empty | lambda[MxC] | w[M] | W1,W2 | gating MLP
  std::size_t hidden_width = 40;          // nn only
  std::vector<std::size_t> gating_widths; // moe only, [d, g, M]
  std::vector<CompetencyMatrix> competency;  // vote only, M matrices
  std::size_t clients = 0;
  std::size_t classes = 0;
};

/// Parameter layout + averaging-equivalent initialization: linear w = 1/M,
/// weighted/per-class lambda = 1/M, nn embeds exact averaging through paired
/// ReLU units when hidden_width >= 2*classes (uniform fan-in otherwise), moe
/// zeroes the gating output layer so the gate starts uniform.
AggregatorSpec init_aggregator(AggKind kind, std::size_t clients,
                               std::size_t classes, std::size_t hidden_width,
                               std::size_t input_dim,
                               std::size_t gating_hidden, Rng rng);

// -- single-sample forwards (Z is the [M x C] logit matrix of one input) --

Tensor agg_average(const Tensor& Z);
Tensor agg_weighted(const Tensor& Z, const Tensor& lambda);
/// lambda[i][c] = n_i^c / sum_j n_j^c, uniform 1/M where a class has no
/// samples anywhere.
Tensor weighted_lambda_from_counts(
    const std::vector<std::vector<std::size_t>>& counts, std::size_t classes);
Tensor agg_linear(const Tensor& Z, const Tensor& w);
Tensor agg_per_class(const Tensor& Z, const Tensor& lambda);
Tensor agg_nn(const Tensor& Z, const Tensor& W1, const Tensor& W2);
Tensor agg_moe(const Tensor& x_row, const ParamSet& gating,
               const std::vector<std::size_t>& gating_widths, const Tensor& Z);

/// Expected-utility vote over hard client predictions.
/// With the 0/1 benefit this is argmax_c [log prior(c) + sum_i log
/// P_i[c][vote_i]]; ties break to the lowest class index.
int agg_vote(const std::vector<int>& votes,
             const std::vector<CompetencyMatrix>& competency,
             const Tensor& prior, const Tensor& benefit);

/// Smoothed per-model confusion estimate on the shard's reserved split:
/// P[r][c] = (count(truth r, vote c) + eps) / (count(truth r) + C*eps).
std::vector<CompetencyMatrix> estimate_competency(
    const std::vector<LocalModel>& models, const Dataset& data,
    double eps = 1e-3);

/// Sample-count-weighted average of per-client estimates, rows renormalized.
std::vector<CompetencyMatrix> aggregate_competency(
    const std::vector<std::vector<CompetencyMatrix>>& estimates,
    const std::vector<std::size_t>& sample_counts);

/// Batched aggregator output [n x C] over stacked logits Z[n, M, C];
/// x is consulted by moe only. vote is not batched here (hard decision).
Tensor aggregator_forward(const AggregatorSpec& spec, const Tensor& Z,
                          const Tensor& x);

/// Mean cross-entropy of the aggregator on a batch plus the gradient w.r.t.
/// the aggregator's own parameters (client models stay frozen).
struct AggLossGrad {
  double loss;
  ParamSet grads;
};
AggLossGrad aggregator_loss_grad(const AggregatorSpec& spec, const Tensor& Z,
                                 const Tensor& x,
                                 const std::vector<int>& labels);

/// argmax class with ties to the lowest index.
int argmax_class(const Tensor& scores);

// -- FENS1 binary serialization --
void save_params(const ParamSet& p, const std::string& path,
                 const std::string& arch_descriptor = "");
ParamSet load_params(const std::string& path,
                     std::string* arch_descriptor = nullptr);

}  // namespace fens
