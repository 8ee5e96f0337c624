// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fens/config.hpp"

namespace fens {

namespace {

struct SeedData {
  std::vector<Dataset> partitions;
  std::vector<ClientShard> shards;
  Dataset validation;
  Dataset test;
};

SeedData build_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  Rng base(seed);
  Dataset train, eval_pool;
  if (cfg.synthetic) {
    train = gen_synthetic(cfg.classes, cfg.dim, cfg.train_per_class,
                          cfg.separation, base.stream("train-data").next_u64());
    eval_pool = gen_synthetic(cfg.classes, cfg.dim, cfg.eval_per_class,
                              cfg.separation,
                              base.stream("eval-data").next_u64());
  } else {
    Dataset full = load_csv(cfg.csv_path);
    auto [tr, ev] = split_local(full, 0.8, base.stream("csv-split").next_u64());
    train = std::move(tr);
    eval_pool = std::move(ev);
  }
  SeedData out;
  auto [val, test] = split_eval(eval_pool, base.stream("eval-split").next_u64());
  out.validation = std::move(val);
  out.test = std::move(test);

  PartitionSpec spec;
  spec.alpha = cfg.alpha;
  spec.clients = cfg.clients;
  spec.seed = base.stream("partition").next_u64();
  out.partitions = dirichlet_partition(train, spec);
  for (std::size_t i = 0; i < out.partitions.size(); ++i)
    out.shards.push_back(make_shard(i, out.partitions[i],
                                    cfg.local_split_frac,
                                    base.stream("shard-split").next_u64()));
  return out;
}

std::vector<std::size_t> model_widths(const ExperimentConfig& cfg,
                                      std::size_t dim) {
  std::vector<std::size_t> widths;
  widths.push_back(dim);
  for (std::size_t h : cfg.fl_local.hidden) widths.push_back(h);
  widths.push_back(static_cast<std::size_t>(cfg.classes));
  return widths;
}

BatchGradFn mlp_grad_fn(const std::vector<std::size_t>& widths) {
  return [widths](const ParamSet& params, const Dataset& data,
                  const std::vector<std::size_t>& batch) {
    Dataset b = data.subset(batch);
    mlp::Cache cache;
    Tensor logits = mlp::forward(params, widths, b.features, &cache);
    auto [loss, dlogits] = softmax_cross_entropy(logits, b.labels);
    auto back = mlp::backward(params, widths, cache, dlogits);
    return std::make_pair(loss, std::move(back.grads));
  };
}

double mlp_accuracy(const ParamSet& params,
                    const std::vector<std::size_t>& widths,
                    const Dataset& data) {
  Tensor logits = mlp::forward(params, widths, data.features);
  const std::size_t C = logits.shape[1];
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    Tensor row({C}, std::vector<float>(logits.data.begin() + i * C,
                                       logits.data.begin() + (i + 1) * C));
    hits += argmax_class(row) == data.labels[i];
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

SeedOutcome run_seed(const ExperimentConfig& cfg, std::uint64_t seed,
                     const std::string& out_dir, std::size_t threads) {
  SeedData data = build_data(cfg, seed);
  SeedOutcome out;
  out.seed = seed;
  const std::size_t dim = data.shards[0].local_train.dim();
  const auto widths = model_widths(cfg, dim);

  switch (cfg.protocol) {
    case Protocol::fens: {
      FensConfig fc = cfg.fens;
      fc.seed = seed;
      FensRunResult run = run_fens(data.shards, data.validation, fc, threads);
      out.test_accuracy = evaluate_global(run.model, data.test);
      out.rounds = run.phase2_metrics;
      out.ledger = run.ledger;
      if (!out_dir.empty()) {
        const auto dir = std::filesystem::path(out_dir) /
                         ("seed_" + std::to_string(seed));
        std::filesystem::create_directories(dir);
        for (std::size_t i = 0; i < run.model.ensemble.size(); ++i) {
          std::ostringstream arch;
          for (std::size_t w : run.model.ensemble[i].widths) arch << w << " ";
          save_params(run.model.ensemble[i].params,
                      (dir / ("client_" + std::to_string(i) + ".fens"))
                          .string(),
                      arch.str());
          save_quantized(quantize_params(run.model.ensemble[i].params),
                         (dir / ("client_" + std::to_string(i) + ".fensq"))
                             .string());
        }
        if (!run.model.aggregator.params.empty())
          save_params(run.model.aggregator.params,
                      (dir / "aggregator.fens").string(),
                      to_string(run.model.aggregator.kind));
      }
      break;
    }
    case Protocol::fl:
    case Protocol::ofl_one_round: {
      FedConfig fl = cfg.fl;
      fl.seed = Rng(seed).stream("fl").next_u64();
      if (cfg.protocol == Protocol::ofl_one_round) {
        fl.algorithm = FedAlgo::fedavg;
        fl.rounds = 1;
        if (fl.local_epochs == 0) fl.local_epochs = cfg.fl_local.epochs;
      }
      ParamSet init = mlp::init_params(widths, Rng(seed).stream("fl-init"));
      auto grad_fn = mlp_grad_fn(widths);
      EvalFn eval_fn = [&](const ParamSet& p) {
        return mlp_accuracy(p, widths, data.validation);
      };
      FlResult run = run_fl(init, data.partitions, fl, grad_fn, eval_fn,
                            threads);
      out.test_accuracy = mlp_accuracy(run.final_params, widths, data.test);
      out.rounds = run.metrics;
      out.ledger.clients.assign(data.partitions.size(), {});
      for (std::size_t i = 0; i < data.partitions.size(); ++i) {
        out.ledger.clients[i].phase2_up = run.ledger.up_bytes[i];
        out.ledger.clients[i].phase2_down = run.ledger.down_bytes[i];
      }
      break;
    }
    case Protocol::local_only: {
      // every client trains alone; report the mean individual test accuracy
      std::vector<double> accs(data.partitions.size());
      Rng base(seed);
      parallel_for(data.partitions.size(), threads, [&](std::size_t i) {
        ParamSet init = mlp::init_params(widths, base.stream("local-init"));
        ParamSet trained = train_classifier(widths, init, data.partitions[i],
                                            cfg.fl_local,
                                            base.stream("local-train", i));
        accs[i] = mlp_accuracy(trained, widths, data.test);
      });
      double sum = 0.0;
      for (double a : accs) sum += a;
      out.test_accuracy = sum / static_cast<double>(accs.size());
      out.ledger.clients.assign(data.partitions.size(), {});
      break;
    }
  }

  if (out.ledger.clients.empty()) out.ledger.clients.assign(cfg.clients, {});
  out.bytes_per_client = out.ledger.total() / out.ledger.clients.size();
  return out;
}

std::string format_accuracy(double a) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(6);
  ss << a;
  return ss.str();
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                const std::string& out_dir,
                                std::size_t threads) {
  if (cfg.seeds.empty()) throw ConfigError("seeds: at least one required");
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);

  ExperimentResult result;
  for (std::uint64_t seed : cfg.seeds)
    result.outcomes.push_back(run_seed(cfg, seed, out_dir, threads));

  double sum = 0.0;
  for (const auto& o : result.outcomes) sum += o.test_accuracy;
  result.mean_accuracy = sum / static_cast<double>(result.outcomes.size());
  if (result.outcomes.size() > 1) {
    double ss = 0.0;
    for (const auto& o : result.outcomes) {
      const double d = o.test_accuracy - result.mean_accuracy;
      ss += d * d;
    }
    result.std_accuracy =
        std::sqrt(ss / static_cast<double>(result.outcomes.size() - 1));
  }

  if (out_dir.empty()) return result;
  const std::filesystem::path dir(out_dir);

  {  // canonical config snapshot
    std::ofstream f(dir / "config.canonical.txt");
    f << cfg.to_kv().serialize();
  }
  {  // metrics.csv, one row per seed per round
    std::ofstream f(dir / "metrics.csv");
    f << "# metrics schema v1\n";
    f << "round,algorithm,alpha,seed,val_accuracy,cum_up_bytes,"
         "cum_down_bytes\n";
    const std::string algo =
        cfg.protocol == Protocol::fens
            ? "fens"
            : (cfg.protocol == Protocol::local_only
                   ? "local_only"
                   : to_string(cfg.protocol == Protocol::ofl_one_round
                                   ? FedAlgo::fedavg
                                   : cfg.fl.algorithm));
    std::ostringstream alpha_ss;
    alpha_ss << cfg.alpha;
    for (const auto& o : result.outcomes)
      for (const auto& m : o.rounds)
        f << m.round << "," << algo << "," << alpha_ss.str() << "," << o.seed
          << "," << format_accuracy(m.val_accuracy) << "," << m.cum_up_bytes
          << "," << m.cum_down_bytes << "\n";
  }
  {  // summary.json
    nlohmann::json j;
    j["protocol"] = to_string(cfg.protocol);
    j["alpha"] = cfg.alpha;
    j["seeds"] = cfg.seeds;
    j["accuracy_mean"] = result.mean_accuracy;
    j["accuracy_std"] = result.std_accuracy;
    std::vector<double> per_seed;
    std::vector<std::size_t> bytes;
    for (const auto& o : result.outcomes) {
      per_seed.push_back(o.test_accuracy);
      bytes.push_back(o.bytes_per_client);
    }
    j["accuracy_per_seed"] = per_seed;
    j["bytes_per_client_per_seed"] = bytes;
    j["bytes_per_client"] = bytes.empty() ? 0 : bytes[0];
    std::ofstream f(dir / "summary.json");
    f << j.dump(2) << "\n";
  }
  {  // ledger.json: seed -> client -> phase bytes
    std::ofstream f(dir / "ledger.json");
    f << "{";
    for (std::size_t i = 0; i < result.outcomes.size(); ++i) {
      if (i) f << ",";
      f << "\"" << result.outcomes[i].seed
        << "\":" << result.outcomes[i].ledger.to_json();
    }
    f << "}\n";
  }
  return result;
}

std::string compare_runs(const std::vector<std::string>& run_dirs) {
  if (run_dirs.size() < 2)
    throw std::invalid_argument("compare: need at least two run directories");
  struct Row {
    std::string protocol;
    double alpha;
    double mean, stdev;
    std::size_t bytes;
  };
  std::vector<Row> rows;
  for (const auto& d : run_dirs) {
    const auto path = std::filesystem::path(d) / "summary.json";
    std::ifstream f(path);
    if (!f)
      throw std::runtime_error("compare: missing summary file " +
                               path.string());
    nlohmann::json j;
    f >> j;
    rows.push_back({j.at("protocol").get<std::string>(),
                    j.at("alpha").get<double>(),
                    j.at("accuracy_mean").get<double>(),
                    j.at("accuracy_std").get<double>(),
                    j.at("bytes_per_client").get<std::size_t>()});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.bytes < b.bytes; });
  const std::size_t min_bytes = std::max<std::size_t>(1, rows.front().bytes);
  std::ostringstream out;
  out << "protocol,alpha,accuracy_mean,accuracy_std,bytes_per_client,"
         "bytes_ratio\n";
  out.setf(std::ios::fixed);
  out.precision(6);
  for (const auto& r : rows)
    out << r.protocol << "," << r.alpha << "," << r.mean << "," << r.stdev
        << "," << r.bytes << ","
        << static_cast<double>(std::max<std::size_t>(r.bytes, 1)) /
               static_cast<double>(min_bytes)
        << "\n";
  return out.str();
}

std::vector<DistillOutcome> run_distill(const ExperimentConfig& cfg,
                                        const std::string& out_dir,
                                        std::size_t threads) {
  if (!cfg.synthetic)
    throw ConfigError("distill: requires a synthetic dataset for the "
                      "auxiliary pool");
  std::vector<DistillOutcome> outcomes;
  for (std::uint64_t seed : cfg.seeds) {
    SeedData data = build_data(cfg, seed);
    FensConfig fc = cfg.fens;
    fc.seed = seed;
    FensRunResult run = run_fens(data.shards, data.validation, fc, threads);

    // unlabeled auxiliary pool from the same distribution
    Dataset aux = gen_synthetic(cfg.classes, cfg.dim, cfg.aux_per_class,
                                cfg.separation,
                                Rng(seed).stream("aux-data").next_u64());
    std::vector<std::size_t> student_widths;
    student_widths.push_back(data.shards[0].local_train.dim());
    for (std::size_t h : cfg.student_hidden) student_widths.push_back(h);
    student_widths.push_back(static_cast<std::size_t>(cfg.classes));

    LocalModel student = distill(run.model, aux.features, student_widths,
                                 cfg.distill, seed);
    DistillOutcome o;
    o.seed = seed;
    o.ensemble_accuracy = evaluate_global(run.model, data.test);
    GlobalModel student_only;
    student_only.ensemble = {student};
    student_only.aggregator = init_aggregator(AggKind::average, 1,
                                              student_widths.back(), 0, 0, 0,
                                              Rng(0));
    o.student_accuracy = evaluate_global(student_only, data.test);
    for (const auto& m : run.model.ensemble)
      o.ensemble_bytes += payload_bytes(m.params);
    o.student_bytes = payload_bytes(student.params);
    outcomes.push_back(o);
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    nlohmann::json j = nlohmann::json::array();
    for (const auto& o : outcomes)
      j.push_back({{"seed", o.seed},
                   {"ensemble_accuracy", o.ensemble_accuracy},
                   {"student_accuracy", o.student_accuracy},
                   {"ensemble_bytes", o.ensemble_bytes},
                   {"student_bytes", o.student_bytes}});
    std::ofstream f(std::filesystem::path(out_dir) / "distill.json");
    f << j.dump(2) << "\n";
  }
  return outcomes;
}

}  // namespace fens
