// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include "fens/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fens/rng.hpp"

namespace fens {

void Dataset::validate() const {
  if (features.shape.size() != 2)
    throw std::invalid_argument("Dataset: features must be 2-D");
  if (features.shape[0] != labels.size())
    throw std::invalid_argument("Dataset: feature/label count mismatch");
  for (int y : labels)
    if (y < 0 || y >= num_classes)
      throw std::invalid_argument("Dataset: label out of range");
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  const std::size_t d = dim();
  Dataset out;
  out.num_classes = num_classes;
  out.features = Tensor::zeros({idx.size(), d});
  out.labels.reserve(idx.size());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const std::size_t i = idx[r];
    if (i >= size()) throw std::out_of_range("Dataset::subset: index");
    std::copy_n(features.data.begin() + i * d, d,
                out.features.data.begin() + r * d);
    out.labels.push_back(labels[i]);
  }
  return out;
}

std::vector<std::size_t> Dataset::label_counts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts[y];
  return counts;
}

Dataset gen_synthetic(int num_classes, int dim, int n_per_class,
                      double separation, std::uint64_t seed) {
  if (num_classes < 2 || dim < 2 || n_per_class < 1 || separation < 0.0)
    throw std::invalid_argument("gen_synthetic: invalid parameters");
  // class means on a fixed sphere grid, independent of the dataset seed
  std::vector<std::vector<double>> means(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    Rng mean_rng = Rng(0x5eedc0de).stream("class-mean", c);
    std::vector<double> dir(dim);
    double norm2 = 0.0;
    for (auto& v : dir) {
      v = mean_rng.normal();
      norm2 += v * v;
    }
    const double inv = separation / std::sqrt(std::max(norm2, 1e-12));
    for (auto& v : dir) v *= inv;
    means[c] = std::move(dir);
  }
  const std::size_t n = static_cast<std::size_t>(num_classes) * n_per_class;
  Dataset ds;
  ds.num_classes = num_classes;
  ds.features = Tensor::zeros({n, static_cast<std::size_t>(dim)});
  ds.labels.resize(n);
  Rng sample_rng = Rng(seed).stream("synthetic-samples");
  std::size_t row = 0;
  for (int c = 0; c < num_classes; ++c)
    for (int s = 0; s < n_per_class; ++s, ++row) {
      ds.labels[row] = c;
      for (int j = 0; j < dim; ++j)
        ds.features.data[row * dim + j] =
            static_cast<float>(means[c][j] + sample_rng.normal());
    }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng = Rng(seed).stream("synthetic-shuffle");
  shuffle_rng.shuffle(order);
  return ds.subset(order);
}

namespace {

/// Largest-remainder conversion of proportions to integer counts summing to
/// total. Ties go to the lower index.
std::vector<std::size_t> largest_remainder(const std::vector<double>& p,
                                           std::size_t total) {
  const std::size_t m = p.size();
  std::vector<std::size_t> counts(m);
  std::vector<std::pair<double, std::size_t>> rem(m);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    const double exact = p[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    rem[i] = {exact - std::floor(exact), i};
    assigned += counts[i];
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) {
    return a.first > b.first;
  });
  for (std::size_t k = 0; assigned < total; ++k, ++assigned)
    ++counts[rem[k % m].second];
  return counts;
}

}  // namespace

std::vector<Dataset> dirichlet_partition(const Dataset& ds,
                                         const PartitionSpec& spec) {
  if (spec.alpha <= 0.0 || spec.clients < 1)
    throw std::invalid_argument("dirichlet_partition: invalid spec");
  if (ds.size() == 0)
    throw std::invalid_argument("dirichlet_partition: empty dataset");
  const std::size_t M = spec.clients;
  Rng base = Rng(spec.seed).stream("partition");

  std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[ds.labels[i]].push_back(i);

  std::vector<std::vector<std::size_t>> assigned(M);
  for (int c = 0; c < ds.num_classes; ++c) {
    auto& members = by_class[c];
    if (members.empty()) continue;
    Rng class_rng = base.stream("class", c);
    class_rng.shuffle(members);
    const auto p = class_rng.dirichlet(spec.alpha, M);
    const auto counts = largest_remainder(p, members.size());
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < M; ++i) {
      for (std::size_t k = 0; k < counts[i]; ++k)
        assigned[i].push_back(members[cursor++]);
    }
  }

  // every client must be splittable into train and reserved parts: pull
  // samples from the largest client until everyone holds at least two
  for (std::size_t i = 0; i < M; ++i) {
    while (assigned[i].size() < 2) {
      std::size_t donor = 0;
      for (std::size_t j = 1; j < M; ++j)
        if (assigned[j].size() > assigned[donor].size()) donor = j;
      if (donor == i || assigned[donor].size() <= 2)
        throw std::runtime_error("dirichlet_partition: too few samples to "
                                 "seed every client");
      assigned[i].push_back(assigned[donor].back());
      assigned[donor].pop_back();
    }
  }

  std::vector<Dataset> out;
  out.reserve(M);
  for (std::size_t i = 0; i < M; ++i) {
    std::sort(assigned[i].begin(), assigned[i].end());
    out.push_back(ds.subset(assigned[i]));
  }
  return out;
}

namespace {

std::pair<Dataset, Dataset> split_by_fraction(const Dataset& ds, double frac,
                                              std::uint64_t seed,
                                              bool stratified,
                                              const char* stream_name) {
  const std::size_t n = ds.size();
  if (n < 2) throw std::invalid_argument("split: need at least 2 samples");
  const std::size_t target =
      static_cast<std::size_t>(std::llround(frac * static_cast<double>(n)));
  Rng rng = Rng(seed).stream(stream_name);

  std::vector<std::size_t> first, second;
  bool single_sample_class = false;
  if (stratified) {
    for (int c = 0; c < ds.num_classes && !single_sample_class; ++c) {
      std::size_t cnt = 0;
      for (int y : ds.labels) cnt += (y == c);
      if (cnt == 1) single_sample_class = true;
    }
  }
  if (stratified && !single_sample_class && ds.num_classes > 0) {
    // per-class quotas via largest remainder so the totals land on target
    std::vector<std::vector<std::size_t>> by_class(ds.num_classes);
    for (std::size_t i = 0; i < n; ++i) by_class[ds.labels[i]].push_back(i);
    std::vector<double> props(ds.num_classes);
    for (int c = 0; c < ds.num_classes; ++c)
      props[c] = static_cast<double>(by_class[c].size()) /
                 static_cast<double>(n);
    const auto quotas = largest_remainder(props, target);
    for (int c = 0; c < ds.num_classes; ++c) {
      auto& members = by_class[c];
      Rng class_rng = rng.stream("class", c);
      class_rng.shuffle(members);
      const std::size_t q = std::min(quotas[c], members.size());
      for (std::size_t k = 0; k < members.size(); ++k)
        (k < q ? first : second).push_back(members[k]);
    }
  } else {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t k = 0; k < n; ++k)
      (k < target ? first : second).push_back(order[k]);
  }
  // both halves non-empty when n >= 2
  if (first.empty()) {
    first.push_back(second.back());
    second.pop_back();
  } else if (second.empty()) {
    second.push_back(first.back());
    first.pop_back();
  }
  std::sort(first.begin(), first.end());
  std::sort(second.begin(), second.end());
  return {ds.subset(first), ds.subset(second)};
}

}  // namespace

std::pair<Dataset, Dataset> split_local(const Dataset& ds, double frac,
                                        std::uint64_t seed) {
  if (frac <= 0.0 || frac >= 1.0)
    throw std::invalid_argument("split_local: frac must be in (0, 1)");
  return split_by_fraction(ds, frac, seed, /*stratified=*/true, "split-local");
}

std::pair<Dataset, Dataset> split_eval(const Dataset& ds, std::uint64_t seed) {
  return split_by_fraction(ds, 0.5, seed, /*stratified=*/false, "split-eval");
}

ClientShard make_shard(std::size_t client_id, const Dataset& ds, double frac,
                       std::uint64_t seed) {
  ClientShard shard;
  shard.client_id = client_id;
  auto [d1, d2] = split_local(ds, frac, Rng(seed).stream("shard", client_id)
                                            .next_u64());
  shard.local_train = std::move(d1);
  shard.agg_train = std::move(d2);
  shard.label_counts = ds.label_counts();
  return shard;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_csv: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  int header_classes = -1;
  std::vector<std::vector<float>> rows;
  std::vector<int> labels;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("#classes=", 0) == 0) {
      header_classes = std::stoi(line.substr(9));
      continue;
    }
    if (line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() < 2)
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) +
                               ": need at least one feature and a label");
    if (width == 0) width = cells.size();
    if (cells.size() != width)
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) +
                               ": inconsistent column count");
    std::vector<float> feat(width - 1);
    try {
      for (std::size_t j = 0; j + 1 < width; ++j)
        feat[j] = std::stof(cells[j]);
      std::size_t pos = 0;
      const std::string& lab = cells.back();
      int y = std::stoi(lab, &pos);
      while (pos < lab.size() && std::isspace(static_cast<unsigned char>(
                                     lab[pos])))
        ++pos;
      if (pos != lab.size())
        throw std::invalid_argument("trailing characters");
      labels.push_back(y);
    } catch (const std::exception&) {
      throw std::runtime_error("load_csv: line " + std::to_string(lineno) +
                               ": malformed value");
    }
    rows.push_back(std::move(feat));
  }
  if (rows.empty()) throw std::runtime_error("load_csv: no data rows");
  Dataset ds;
  ds.features = Tensor::zeros({rows.size(), width - 1});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy(rows[i].begin(), rows[i].end(),
              ds.features.data.begin() + i * (width - 1));
  ds.labels = std::move(labels);
  int max_label = *std::max_element(ds.labels.begin(), ds.labels.end());
  ds.num_classes = header_classes > 0 ? header_classes : max_label + 1;
  ds.validate();
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_csv: cannot open " + path);
  out << "#classes=" << ds.num_classes << "\n";
  const std::size_t d = ds.dim();
  out.precision(9);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) out << ds.features.data[i * d + j]
                                            << ',';
    out << ds.labels[i] << "\n";
  }
}

}  // namespace fens
