// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include "fens/models.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace fens {

LocalModel init_local_model(const std::vector<std::size_t>& widths, Rng rng) {
  LocalModel m;
  m.widths = widths;
  m.params = mlp::init_params(widths, rng);
  return m;
}

Tensor local_forward(const LocalModel& model, const Tensor& x) {
  return mlp::forward(model.params, model.widths, x);
}

Tensor ensemble_forward(const std::vector<LocalModel>& models,
                        const Tensor& x) {
  if (models.empty())
    throw std::invalid_argument("ensemble_forward: no models");
  const std::size_t M = models.size();
  const std::size_t C = models[0].num_classes();
  for (const auto& m : models)
    if (m.num_classes() != C)
      throw std::invalid_argument("ensemble_forward: heterogeneous class "
                                  "counts");
  const std::size_t n = x.shape[0];
  Tensor Z = Tensor::zeros({n, M, C});
  for (std::size_t i = 0; i < M; ++i) {
    Tensor logits = local_forward(models[i], x);
    for (std::size_t r = 0; r < n; ++r)
      std::copy_n(logits.data.begin() + r * C, C,
                  Z.data.begin() + (r * M + i) * C);
  }
  return Z;
}

AggKind agg_kind_from_string(const std::string& s) {
  if (s == "average") return AggKind::average;
  if (s == "weighted_average") return AggKind::weighted_average;
  if (s == "linear") return AggKind::linear;
  if (s == "per_class") return AggKind::per_class;
  if (s == "nn") return AggKind::nn;
  if (s == "vote") return AggKind::vote;
  if (s == "moe") return AggKind::moe;
  throw std::invalid_argument("unknown aggregator kind: " + s);
}

std::string to_string(AggKind k) {
  switch (k) {
    case AggKind::average: return "average";
    case AggKind::weighted_average: return "weighted_average";
    case AggKind::linear: return "linear";
    case AggKind::per_class: return "per_class";
    case AggKind::nn: return "nn";
    case AggKind::vote: return "vote";
    case AggKind::moe: return "moe";
  }
  return "?";
}

bool agg_is_trainable(AggKind k) {
  return k == AggKind::linear || k == AggKind::per_class || k == AggKind::nn ||
         k == AggKind::moe;
}

AggregatorSpec init_aggregator(AggKind kind, std::size_t clients,
                               std::size_t classes, std::size_t hidden_width,
                               std::size_t input_dim,
                               std::size_t gating_hidden, Rng rng) {
  AggregatorSpec spec;
  spec.kind = kind;
  spec.clients = clients;
  spec.classes = classes;
  spec.hidden_width = hidden_width;
  const float invM = 1.0f / static_cast<float>(clients);
  switch (kind) {
    case AggKind::average:
    case AggKind::vote:
      break;
    case AggKind::weighted_average:
    case AggKind::per_class:
      spec.params.add("lambda", Tensor::full({clients, classes}, invM));
      break;
    case AggKind::linear:
      spec.params.add("w", Tensor::full({clients}, invM));
      break;
    case AggKind::nn: {
      const std::size_t MC = clients * classes, k = hidden_width;
      Tensor W1 = Tensor::zeros({MC, k});
      Tensor W2 = Tensor::zeros({k, classes});
      if (k >= 2 * classes) {
        // exact averaging embedded through paired ReLU units
        // (s and -s per class), so training starts at the averaging
        // baseline; spare hidden units get small random fan-in and a
        // zeroed output row
        for (std::size_t c = 0; c < classes; ++c) {
          for (std::size_t i = 0; i < clients; ++i) {
            W1.data[(i * classes + c) * k + 2 * c] = invM;
            W1.data[(i * classes + c) * k + 2 * c + 1] = -invM;
          }
          W2.data[(2 * c) * classes + c] = 1.0f;
          W2.data[(2 * c + 1) * classes + c] = -1.0f;
        }
        const double bound = std::sqrt(1.0 / static_cast<double>(MC));
        for (std::size_t u = 2 * classes; u < k; ++u)
          for (std::size_t r = 0; r < MC; ++r)
            W1.data[r * k + u] = static_cast<float>(rng.uniform(-bound,
                                                                bound));
      } else {
        const double b1 = std::sqrt(1.0 / static_cast<double>(MC));
        const double b2 = std::sqrt(1.0 / static_cast<double>(k));
        for (auto& w : W1.data) w = static_cast<float>(rng.uniform(-b1, b1));
        for (auto& w : W2.data) w = static_cast<float>(rng.uniform(-b2, b2));
      }
      spec.params.add("W1", std::move(W1));
      spec.params.add("W2", std::move(W2));
      break;
    }
    case AggKind::moe: {
      spec.gating_widths = {input_dim, gating_hidden, clients};
      ParamSet g = mlp::init_params(spec.gating_widths, rng);
      // zero output layer: the gate starts uniform, i.e. plain averaging
      for (auto& v : g.at("W1").data) v = 0.0f;
      spec.params = std::move(g);
      break;
    }
  }
  return spec;
}

namespace {
void require_zmatrix(const Tensor& Z) {
  if (Z.shape.size() != 2)
    throw std::invalid_argument("aggregator: Z must be [M x C]");
}
}  // namespace

Tensor agg_average(const Tensor& Z) {
  require_zmatrix(Z);
  const std::size_t M = Z.shape[0], C = Z.shape[1];
  Tensor out = Tensor::zeros({C});
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < M; ++i) acc += Z.data[i * C + c];
    out.data[c] = static_cast<float>(acc / static_cast<double>(M));
  }
  return out;
}

Tensor agg_weighted(const Tensor& Z, const Tensor& lambda) {
  require_zmatrix(Z);
  if (!Z.same_shape(lambda))
    throw std::invalid_argument("agg_weighted: lambda shape mismatch");
  const std::size_t M = Z.shape[0], C = Z.shape[1];
  Tensor out = Tensor::zeros({C});
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < M; ++i)
      acc += static_cast<double>(lambda.data[i * C + c]) * Z.data[i * C + c];
    out.data[c] = static_cast<float>(acc);
  }
  return out;
}

Tensor weighted_lambda_from_counts(
    const std::vector<std::vector<std::size_t>>& counts,
    std::size_t classes) {
  const std::size_t M = counts.size();
  if (M == 0) throw std::invalid_argument("weighted_lambda: no clients");
  Tensor lambda = Tensor::zeros({M, classes});
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t total = 0;
    for (const auto& cnt : counts) {
      if (cnt.size() != classes)
        throw std::invalid_argument("weighted_lambda: count vector length");
      total += cnt[c];
    }
    for (std::size_t i = 0; i < M; ++i)
      lambda.data[i * classes + c] =
          total == 0 ? 1.0f / static_cast<float>(M)
                     : static_cast<float>(counts[i][c]) /
                           static_cast<float>(total);
  }
  return lambda;
}

Tensor agg_linear(const Tensor& Z, const Tensor& w) {
  require_zmatrix(Z);
  const std::size_t M = Z.shape[0], C = Z.shape[1];
  if (w.size() != M)
    throw std::invalid_argument("agg_linear: weight length mismatch");
  Tensor out = Tensor::zeros({C});
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < M; ++i)
      acc += static_cast<double>(w.data[i]) * Z.data[i * C + c];
    out.data[c] = static_cast<float>(acc);
  }
  return out;
}

Tensor agg_per_class(const Tensor& Z, const Tensor& lambda) {
  return agg_weighted(Z, lambda);  // same contraction, trainable lambda
}

Tensor agg_nn(const Tensor& Z, const Tensor& W1, const Tensor& W2) {
  require_zmatrix(Z);
  const std::size_t MC = Z.size();
  if (W1.shape.size() != 2 || W1.shape[0] != MC)
    throw std::invalid_argument("agg_nn: W1 must be [MC x k]");
  const std::size_t k = W1.shape[1];
  if (W2.shape.size() != 2 || W2.shape[0] != k)
    throw std::invalid_argument("agg_nn: W2 must be [k x C]");
  Tensor z = Tensor({1, MC}, Z.data);
  Tensor h = relu(linear_forward(z, W1, Tensor::zeros({k})));
  Tensor out = linear_forward(h, W2, Tensor::zeros({W2.shape[1]}));
  return Tensor({W2.shape[1]}, out.data);
}

Tensor agg_moe(const Tensor& x_row, const ParamSet& gating,
               const std::vector<std::size_t>& gating_widths,
               const Tensor& Z) {
  require_zmatrix(Z);
  const std::size_t M = Z.shape[0], C = Z.shape[1];
  if (gating_widths.back() != M)
    throw std::invalid_argument("agg_moe: gating output dim != M");
  Tensor x({1, x_row.size()}, x_row.data);
  Tensor g = softmax_rows(mlp::forward(gating, gating_widths, x));
  Tensor out = Tensor::zeros({C});
  for (std::size_t c = 0; c < C; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < M; ++i)
      acc += static_cast<double>(g.data[i]) * Z.data[i * C + c];
    out.data[c] = static_cast<float>(acc);
  }
  return out;
}

int agg_vote(const std::vector<int>& votes,
             const std::vector<CompetencyMatrix>& competency,
             const Tensor& prior, const Tensor& benefit) {
  const std::size_t M = votes.size();
  if (competency.size() != M)
    throw std::invalid_argument("agg_vote: one competency matrix per voter");
  const std::size_t C = prior.size();
  // posterior over the truth r given all votes
  std::vector<double> post(C);
  double norm = 0.0;
  for (std::size_t r = 0; r < C; ++r) {
    double p = prior.data[r];
    for (std::size_t i = 0; i < M; ++i) {
      const int v = votes[i];
      if (v < 0 || static_cast<std::size_t>(v) >= C)
        throw std::invalid_argument("agg_vote: vote out of range");
      p *= competency[i].data[r * C + v];
    }
    post[r] = p;
    norm += p;
  }
  if (norm > 0.0)
    for (auto& p : post) p /= norm;
  int best = 0;
  double best_utility = -1.0;
  for (std::size_t c = 0; c < C; ++c) {
    double u = 0.0;
    for (std::size_t r = 0; r < C; ++r)
      u += static_cast<double>(benefit.data[c * C + r]) * post[r];
    if (u > best_utility) {
      best_utility = u;
      best = static_cast<int>(c);
    }
  }
  return best;
}

std::vector<CompetencyMatrix> estimate_competency(
    const std::vector<LocalModel>& models, const Dataset& data, double eps) {
  if (data.size() == 0)
    throw std::invalid_argument("estimate_competency: empty data");
  const std::size_t C = data.num_classes;
  std::vector<CompetencyMatrix> out;
  out.reserve(models.size());
  for (const auto& model : models) {
    Tensor logits = local_forward(model, data.features);
    std::vector<std::vector<std::size_t>> counts(C,
                                                 std::vector<std::size_t>(C));
    std::vector<std::size_t> truth_counts(C, 0);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const int r = data.labels[i];
      Tensor row({C}, std::vector<float>(logits.data.begin() + i * C,
                                         logits.data.begin() + (i + 1) * C));
      ++counts[r][argmax_class(row)];
      ++truth_counts[r];
    }
    CompetencyMatrix P = Tensor::zeros({C, C});
    for (std::size_t r = 0; r < C; ++r)
      for (std::size_t c = 0; c < C; ++c)
        P.data[r * C + c] = static_cast<float>(
            (static_cast<double>(counts[r][c]) + eps) /
            (static_cast<double>(truth_counts[r]) +
             static_cast<double>(C) * eps));
    out.push_back(std::move(P));
  }
  return out;
}

std::vector<CompetencyMatrix> aggregate_competency(
    const std::vector<std::vector<CompetencyMatrix>>& estimates,
    const std::vector<std::size_t>& sample_counts) {
  if (estimates.empty())
    throw std::invalid_argument("aggregate_competency: no contributions");
  if (estimates.size() != sample_counts.size())
    throw std::invalid_argument("aggregate_competency: count mismatch");
  const std::size_t M = estimates[0].size();
  const std::size_t C = estimates[0][0].shape[0];
  double total = 0.0;
  for (std::size_t s : sample_counts) total += static_cast<double>(s);
  if (total <= 0.0)
    throw std::invalid_argument("aggregate_competency: zero total weight");
  std::vector<CompetencyMatrix> out(M, Tensor::zeros({C, C}));
  for (std::size_t i = 0; i < M; ++i) {
    std::vector<double> acc(C * C, 0.0);
    for (std::size_t j = 0; j < estimates.size(); ++j) {
      const double w = static_cast<double>(sample_counts[j]) / total;
      for (std::size_t e = 0; e < C * C; ++e)
        acc[e] += w * estimates[j][i].data[e];
    }
    for (std::size_t r = 0; r < C; ++r) {
      double row_sum = 0.0;
      for (std::size_t c = 0; c < C; ++c) row_sum += acc[r * C + c];
      for (std::size_t c = 0; c < C; ++c)
        out[i].data[r * C + c] =
            static_cast<float>(row_sum > 0.0 ? acc[r * C + c] / row_sum : 0.0);
    }
  }
  return out;
}

Tensor aggregator_forward(const AggregatorSpec& spec, const Tensor& Z,
                          const Tensor& x) {
  if (Z.shape.size() != 3)
    throw std::invalid_argument("aggregator_forward: Z must be [n, M, C]");
  const std::size_t n = Z.shape[0], M = Z.shape[1], C = Z.shape[2];
  Tensor out = Tensor::zeros({n, C});
  switch (spec.kind) {
    case AggKind::average: {
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < M; ++i)
            acc += Z.data[(r * M + i) * C + c];
          out.data[r * C + c] = static_cast<float>(acc /
                                                   static_cast<double>(M));
        }
      return out;
    }
    case AggKind::weighted_average:
    case AggKind::per_class: {
      const Tensor& lambda = spec.params.at("lambda");
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < M; ++i)
            acc += static_cast<double>(lambda.data[i * C + c]) *
                   Z.data[(r * M + i) * C + c];
          out.data[r * C + c] = static_cast<float>(acc);
        }
      return out;
    }
    case AggKind::linear: {
      const Tensor& w = spec.params.at("w");
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < M; ++i)
            acc += static_cast<double>(w.data[i]) * Z.data[(r * M + i) * C + c];
          out.data[r * C + c] = static_cast<float>(acc);
        }
      return out;
    }
    case AggKind::nn: {
      const Tensor& W1 = spec.params.at("W1");
      const Tensor& W2 = spec.params.at("W2");
      Tensor z({n, M * C}, Z.data);
      Tensor h = relu(linear_forward(z, W1, Tensor::zeros({W1.shape[1]})));
      return linear_forward(h, W2, Tensor::zeros({C}));
    }
    case AggKind::moe: {
      Tensor g = softmax_rows(mlp::forward(spec.params, spec.gating_widths,
                                           x));
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < C; ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < M; ++i)
            acc += static_cast<double>(g.data[r * M + i]) *
                   Z.data[(r * M + i) * C + c];
          out.data[r * C + c] = static_cast<float>(acc);
        }
      return out;
    }
    case AggKind::vote:
      throw std::invalid_argument("aggregator_forward: vote has no logit "
                                  "output");
  }
  throw std::logic_error("aggregator_forward: unreachable");
}

AggLossGrad aggregator_loss_grad(const AggregatorSpec& spec, const Tensor& Z,
                                 const Tensor& x,
                                 const std::vector<int>& labels) {
  if (!agg_is_trainable(spec.kind))
    throw std::invalid_argument("aggregator_loss_grad: " +
                                to_string(spec.kind) + " is not trainable");
  const std::size_t n = Z.shape[0], M = Z.shape[1], C = Z.shape[2];
  ParamSet grads = spec.params.zeros_like();

  if (spec.kind == AggKind::nn) {
    const Tensor& W1 = spec.params.at("W1");
    const Tensor& W2 = spec.params.at("W2");
    const std::size_t MC = M * C, k = W1.shape[1];
    Tensor z({n, MC}, Z.data);
    Tensor pre = linear_forward(z, W1, Tensor::zeros({k}));
    Tensor h = relu(pre);
    Tensor out = linear_forward(h, W2, Tensor::zeros({C}));
    auto [loss, dout] = softmax_cross_entropy(out, labels);
    Tensor& dW2 = grads.at("W2");
    for (std::size_t u = 0; u < k; ++u)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r)
          acc += static_cast<double>(h.data[r * k + u]) * dout.data[r * C + c];
        dW2.data[u * C + c] = static_cast<float>(acc);
      }
    Tensor dh = Tensor::zeros({n, k});
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t u = 0; u < k; ++u) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c)
          acc += static_cast<double>(dout.data[r * C + c]) *
                 W2.data[u * C + c];
        dh.data[r * k + u] = static_cast<float>(acc);
      }
    dh = relu_backward(pre, dh);
    Tensor& dW1 = grads.at("W1");
    for (std::size_t i = 0; i < MC; ++i)
      for (std::size_t u = 0; u < k; ++u) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r)
          acc += static_cast<double>(z.data[r * MC + i]) * dh.data[r * k + u];
        dW1.data[i * k + u] = static_cast<float>(acc);
      }
    return {loss, std::move(grads)};
  }

  if (spec.kind == AggKind::moe) {
    Tensor glogits = mlp::forward(spec.params, spec.gating_widths, x);
    Tensor g = softmax_rows(glogits);
    Tensor out = Tensor::zeros({n, C});
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < M; ++i)
          acc += static_cast<double>(g.data[r * M + i]) *
                 Z.data[(r * M + i) * C + c];
        out.data[r * C + c] = static_cast<float>(acc);
      }
    auto [loss, dout] = softmax_cross_entropy(out, labels);
    // through the gate only; client logits stay frozen
    Tensor dg = Tensor::zeros({n, M});
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t i = 0; i < M; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < C; ++c)
          acc += static_cast<double>(dout.data[r * C + c]) *
                 Z.data[(r * M + i) * C + c];
        dg.data[r * M + i] = static_cast<float>(acc);
      }
    Tensor dglogits = Tensor::zeros({n, M});
    for (std::size_t r = 0; r < n; ++r) {
      double dot = 0.0;
      for (std::size_t i = 0; i < M; ++i)
        dot += static_cast<double>(g.data[r * M + i]) * dg.data[r * M + i];
      for (std::size_t i = 0; i < M; ++i)
        dglogits.data[r * M + i] = static_cast<float>(
            static_cast<double>(g.data[r * M + i]) *
            (static_cast<double>(dg.data[r * M + i]) - dot));
    }
    mlp::Cache cache;
    mlp::forward(spec.params, spec.gating_widths, x, &cache);
    auto back = mlp::backward(spec.params, spec.gating_widths, cache,
                              dglogits);
    return {loss, std::move(back.grads)};
  }

  // linear / per_class share the contraction structure
  Tensor out = aggregator_forward(spec, Z, x);
  auto [loss, dout] = softmax_cross_entropy(out, labels);
  if (spec.kind == AggKind::linear) {
    Tensor& dw = grads.at("w");
    for (std::size_t i = 0; i < M; ++i) {
      double acc = 0.0;
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < C; ++c)
          acc += static_cast<double>(dout.data[r * C + c]) *
                 Z.data[(r * M + i) * C + c];
      dw.data[i] = static_cast<float>(acc);
    }
  } else {  // per_class
    Tensor& dl = grads.at("lambda");
    for (std::size_t i = 0; i < M; ++i)
      for (std::size_t c = 0; c < C; ++c) {
        double acc = 0.0;
        for (std::size_t r = 0; r < n; ++r)
          acc += static_cast<double>(dout.data[r * C + c]) *
                 Z.data[(r * M + i) * C + c];
        dl.data[i * C + c] = static_cast<float>(acc);
      }
  }
  return {loss, std::move(grads)};
}

int argmax_class(const Tensor& scores) {
  int best = 0;
  float best_v = scores.data[0];
  for (std::size_t c = 1; c < scores.size(); ++c)
    if (scores.data[c] > best_v) {
      best_v = scores.data[c];
      best = static_cast<int>(c);
    }
  return best;
}

namespace {
constexpr char kMagic[] = "FENS1";

template <typename T>
void write_raw(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("load_params: truncated file");
  return v;
}
}  // namespace

void save_params(const ParamSet& p, const std::string& path,
                 const std::string& arch_descriptor) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_params: cannot open " + path);
  out.write(kMagic, 5);
  write_raw(out, static_cast<std::uint32_t>(arch_descriptor.size()));
  out.write(arch_descriptor.data(),
            static_cast<std::streamsize>(arch_descriptor.size()));
  write_raw(out, static_cast<std::uint32_t>(p.tensor_count()));
  for (const auto& [name, t] : p.entries()) {
    write_raw(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_raw(out, static_cast<std::uint32_t>(t.shape.size()));
    for (std::size_t d : t.shape) write_raw(out,
                                            static_cast<std::uint64_t>(d));
    out.write(reinterpret_cast<const char*>(t.data.data()),
              static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  }
}

ParamSet load_params(const std::string& path, std::string* arch_descriptor) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_params: cannot open " + path);
  char magic[5];
  in.read(magic, 5);
  if (!in || std::memcmp(magic, kMagic, 5) != 0)
    throw std::runtime_error("load_params: bad magic in " + path);
  const auto arch_len = read_raw<std::uint32_t>(in);
  std::string arch(arch_len, '\0');
  in.read(arch.data(), arch_len);
  if (arch_descriptor) *arch_descriptor = arch;
  const auto count = read_raw<std::uint32_t>(in);
  ParamSet p;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = read_raw<std::uint32_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    const auto ndim = read_raw<std::uint32_t>(in);
    std::vector<std::size_t> shape(ndim);
    std::size_t total = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(read_raw<std::uint64_t>(in));
      total *= d;
    }
    std::vector<float> data(total);
    in.read(reinterpret_cast<char*>(data.data()),
            static_cast<std::streamsize>(total * sizeof(float)));
    if (!in) throw std::runtime_error("load_params: truncated payload");
    p.add(std::move(name), Tensor(std::move(shape), std::move(data)));
  }
  return p;
}

}  // namespace fens
