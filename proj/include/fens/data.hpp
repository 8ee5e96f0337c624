// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fens/tensor.hpp"

namespace fens {

/// Labeled classification dataset. Labels live in [0, num_classes); classes
/// may be empty.
struct Dataset {
  Tensor features;          // [n x d]
  std::vector<int> labels;  // length n
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const {
    return features.shape.size() == 2 ? features.shape[1] : 0;
  }

  void validate() const;
  Dataset subset(const std::vector<std::size_t>& idx) const;
  std::vector<std::size_t> label_counts() const;  // length num_classes
};

struct PartitionSpec {
  double alpha = 1.0;     // Dirichlet concentration, > 0
  std::size_t clients = 1;
  std::uint64_t seed = 0;
};

/// One client's data: the 90% local-training part and the 10% reserved for
/// aggregator training.
struct ClientShard {
  std::size_t client_id = 0;
  Dataset local_train;  // D_i1
  Dataset agg_train;    // D_i2
  std::vector<std::size_t> label_counts;  // over the union, length C
};

/// Isotropic unit-variance Gaussian blobs; class means sit at
/// separation * (fixed unit directions independent of seed). Shuffled
/// deterministically by seed.
Dataset gen_synthetic(int num_classes, int dim, int n_per_class,
                      double separation, std::uint64_t seed);

/// Per class, draw proportions over clients from Dir(alpha) and allocate
/// that class's samples by largest-remainder rounding. Exact partition;
/// clients left empty are given one sample from the largest client.
std::vector<Dataset> dirichlet_partition(const Dataset& ds,
                                         const PartitionSpec& spec);

/// Stratified-where-possible random split with |first| = round(frac * n).
/// Both parts are non-empty whenever n >= 2.
std::pair<Dataset, Dataset> split_local(const Dataset& ds, double frac,
                                        std::uint64_t seed);

/// Deterministic 50-50 split of a held-out set into (validation, test).
std::pair<Dataset, Dataset> split_eval(const Dataset& ds, std::uint64_t seed);

ClientShard make_shard(std::size_t client_id, const Dataset& ds, double frac,
                       std::uint64_t seed);

/// CSV rows: d comma-separated reals then one integer label. Optional first
/// line "#classes=C" pins the class count.
Dataset load_csv(const std::string& path);
void save_csv(const Dataset& ds, const std::string& path);

}  // namespace fens
