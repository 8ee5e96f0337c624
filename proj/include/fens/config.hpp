// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "fens/fens.hpp"

namespace fens {

/// Thrown when a config field is missing or malformed; the message names the
/// offending key.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Flat key-value configuration with dotted section keys. Canonical
/// serialization sorts keys, so parse(serialize(parse(x))) is a fixed point.
class KvConfig {
 public:
  static KvConfig parse_file(const std::string& path);
  static KvConfig parse_string(const std::string& text);

  std::string serialize() const;  // sorted "key = value" lines

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::int64_t get_int(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<std::int64_t> get_int_list(const std::string& key,
                                         std::vector<std::int64_t> fallback)
      const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

enum class Protocol { fens, fl, ofl_one_round, local_only };
Protocol protocol_from_string(const std::string& s);
std::string to_string(Protocol p);

/// Fully validated experiment description assembled from a KvConfig.
struct ExperimentConfig {
  // dataset
  bool synthetic = true;
  std::string csv_path;
  int classes = 10;
  int dim = 20;
  int train_per_class = 500;
  int eval_per_class = 200;  // pool split 50-50 into validation and test
  double separation = 3.0;

  // partition
  double alpha = 0.1;
  std::size_t clients = 10;
  double local_split_frac = 0.9;

  Protocol protocol = Protocol::fens;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  FensConfig fens;             // protocol = fens
  FedConfig fl;                // protocol = fl / ofl_one_round
  LocalTrainRecipe fl_local;   // model shape + ofl/local-only training recipe

  // distillation (distill subcommand)
  DistillRecipe distill;
  std::vector<std::size_t> student_hidden = {32};
  int aux_per_class = 500;

  static ExperimentConfig from_kv(const KvConfig& kv);
  KvConfig to_kv() const;  // canonical snapshot of every effective value
};

struct SeedOutcome {
  std::uint64_t seed = 0;
  double test_accuracy = 0.0;
  std::vector<RoundMetrics> rounds;
  CommLedger ledger;
  std::size_t bytes_per_client = 0;
};

struct ExperimentResult {
  std::vector<SeedOutcome> outcomes;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation
};

/// Executes the configured protocol for every seed and writes metrics.csv,
/// summary.json, ledger.json and the config snapshot into out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir,
                                std::size_t threads);

/// Joins completed run summaries into a comparison table (CSV text), sorted
/// by bytes per client ascending.
std::string compare_runs(const std::vector<std::string>& run_dirs);

struct DistillOutcome {
  std::uint64_t seed = 0;
  double ensemble_accuracy = 0.0;
  double student_accuracy = 0.0;
  std::size_t ensemble_bytes = 0;
  std::size_t student_bytes = 0;
};

/// Runs the fens protocol per seed, distills the global model into a single
/// student over an unlabeled auxiliary set, and writes distill.json.
std::vector<DistillOutcome> run_distill(const ExperimentConfig& cfg,
                                        const std::string& out_dir,
                                        std::size_t threads);

}  // namespace fens
