// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fens/config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::size_t resolve_threads(std::size_t flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("FENS_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<std::size_t>(n);
  }
  return 1;
}

fens::ExperimentConfig load_config(const std::string& path,
                                   std::int64_t seed_override) {
  fens::KvConfig kv = fens::KvConfig::parse_file(path);
  if (seed_override >= 0) kv.set("seeds", std::to_string(seed_override));
  return fens::ExperimentConfig::from_kv(kv);
}

int cmd_gen_data(const std::string& config_path, std::int64_t seed_override,
                 const std::string& out_file) {
  fens::ExperimentConfig cfg = load_config(config_path, seed_override);
  if (!cfg.synthetic)
    throw fens::ConfigError("dataset.kind: gen-data needs 'synthetic'");
  fens::Dataset ds = fens::gen_synthetic(
      cfg.classes, cfg.dim, cfg.train_per_class, cfg.separation,
      fens::Rng(cfg.seeds.at(0)).stream("train-data").next_u64());
  fens::save_csv(ds, out_file);
  std::cout << "wrote " << ds.size() << " samples (" << cfg.classes
            << " classes, dim " << cfg.dim << ") to " << out_file << "\n";
  return kExitOk;
}

int cmd_partition(const std::string& config_path, std::int64_t seed_override,
                  const std::string& out_dir) {
  fens::ExperimentConfig cfg = load_config(config_path, seed_override);
  fens::Dataset ds;
  const std::uint64_t seed = cfg.seeds.at(0);
  if (cfg.synthetic)
    ds = fens::gen_synthetic(cfg.classes, cfg.dim, cfg.train_per_class,
                             cfg.separation,
                             fens::Rng(seed).stream("train-data").next_u64());
  else
    ds = fens::load_csv(cfg.csv_path);
  fens::PartitionSpec spec;
  spec.alpha = cfg.alpha;
  spec.clients = cfg.clients;
  spec.seed = fens::Rng(seed).stream("partition").next_u64();
  auto parts = fens::dirichlet_partition(ds, spec);
  std::filesystem::create_directories(out_dir);
  for (std::size_t i = 0; i < parts.size(); ++i)
    fens::save_csv(parts[i], (std::filesystem::path(out_dir) /
                              ("client_" + std::to_string(i) + ".csv"))
                                 .string());
  std::cout << "wrote " << parts.size() << " client shards to " << out_dir
            << "\n";
  return kExitOk;
}

int cmd_run(const std::string& config_path, std::int64_t seed_override,
            const std::string& out_dir, std::size_t threads, bool quiet) {
  fens::ExperimentConfig cfg = load_config(config_path, seed_override);
  fens::ExperimentResult res = fens::run_experiment(cfg, out_dir, threads);
  if (!quiet) {
    std::cout << "protocol " << fens::to_string(cfg.protocol) << " alpha "
              << cfg.alpha << ": accuracy " << res.mean_accuracy << " +- "
              << res.std_accuracy << " over " << res.outcomes.size()
              << " seed(s)\n";
    for (const auto& o : res.outcomes)
      std::cout << "  seed " << o.seed << ": accuracy " << o.test_accuracy
                << ", " << o.bytes_per_client << " bytes/client\n";
  }
  return kExitOk;
}

int cmd_compare(const std::vector<std::string>& dirs,
                const std::string& out_file) {
  const std::string table = fens::compare_runs(dirs);
  if (out_file.empty()) {
    std::cout << table;
  } else {
    std::ofstream f(out_file);
    f << table;
  }
  return kExitOk;
}

int cmd_distill(const std::string& config_path, std::int64_t seed_override,
                const std::string& out_dir, std::size_t threads, bool quiet) {
  fens::ExperimentConfig cfg = load_config(config_path, seed_override);
  auto outcomes = fens::run_distill(cfg, out_dir, threads);
  if (!quiet)
    for (const auto& o : outcomes)
      std::cout << "seed " << o.seed << ": ensemble " << o.ensemble_accuracy
                << " (" << o.ensemble_bytes << " B) -> student "
                << o.student_accuracy << " (" << o.student_bytes << " B)\n";
  return kExitOk;
}

// exposes the finite-difference checker for CI
int cmd_grad_check(bool quiet) {
  fens::Rng rng(42);
  double worst = 0.0;
  auto report = [&](const std::string& name, double err) {
    worst = std::max(worst, err);
    if (!quiet) std::cout << name << ": max rel err " << err << "\n";
  };

  {  // 2-layer ReLU classifier
    const std::vector<std::size_t> widths = {5, 8, 3};
    fens::ParamSet params = fens::mlp::init_params(widths, rng.stream("mlp"));
    fens::Dataset batch =
        fens::gen_synthetic(3, 5, 4, 2.0, rng.stream("data").next_u64());
    fens::mlp::Cache cache;
    fens::Tensor logits =
        fens::mlp::forward(params, widths, batch.features, &cache);
    auto [loss, dlogits] = fens::softmax_cross_entropy(logits, batch.labels);
    auto back = fens::mlp::backward(params, widths, cache, dlogits);
    auto loss_fn = [&](const fens::ParamSet& p) {
      fens::Tensor l = fens::mlp::forward(p, widths, batch.features);
      return fens::softmax_cross_entropy(l, batch.labels).loss;
    };
    report("local_mlp",
           fens::grad_check(loss_fn, params, back.grads, 1e-3, 256,
                            rng.stream("coords")));
  }

  const std::size_t M = 3, C = 4;
  fens::Dataset batch =
      fens::gen_synthetic(static_cast<int>(C), 6, 3, 2.0,
                          rng.stream("agg-data").next_u64());
  fens::Tensor Z = fens::Tensor::zeros({batch.size(), M, C});
  for (auto& v : Z.data) v = static_cast<float>(rng.uniform(-2.0, 2.0));
  for (auto kind : {fens::AggKind::linear, fens::AggKind::per_class,
                    fens::AggKind::nn, fens::AggKind::moe}) {
    fens::AggregatorSpec spec = fens::init_aggregator(
        kind, M, C, 10, batch.dim(), 6, rng.stream("agg-init"));
    for (auto& [name, t] : spec.params.entries())
      for (auto& v : t.data) v = static_cast<float>(rng.uniform(-0.5, 0.5));
    auto lg = fens::aggregator_loss_grad(spec, Z, batch.features,
                                         batch.labels);
    auto loss_fn = [&](const fens::ParamSet& p) {
      fens::AggregatorSpec s = spec;
      s.params = p;
      return fens::aggregator_loss_grad(s, Z, batch.features, batch.labels)
          .loss;
    };
    report("aggregator_" + fens::to_string(kind),
           fens::grad_check(loss_fn, spec.params, lg.grads, 1e-3, 256,
                            rng.stream("coords")));
  }

  if (!quiet) std::cout << "worst: " << worst << "\n";
  return worst < 1e-3 ? kExitOk : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fens-sim: desk-scale federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::int64_t seed_override = -1;
  std::size_t threads = 0;
  bool quiet = false;
  std::vector<std::string> compare_dirs;

  auto add_common = [&](CLI::App* cmd, bool needs_config) {
    if (needs_config)
      cmd->add_option("--config", config_path, "config file path")
          ->required();
    cmd->add_option("--seed-override", seed_override,
                    "run only this seed, ignoring the config's list");
    cmd->add_option("--out", out_path, "output file or directory");
    cmd->add_option("--threads", threads,
                    "worker threads (or FENS_THREADS env)");
    cmd->add_flag("--quiet", quiet, "suppress progress output");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic CSV");
  add_common(gen, true);
  CLI::App* part = app.add_subcommand("partition",
                                      "write per-client Dirichlet shards");
  add_common(part, true);
  CLI::App* run = app.add_subcommand("run", "run the configured experiment");
  add_common(run, true);
  CLI::App* cmp = app.add_subcommand("compare", "join run summaries");
  cmp->add_option("dirs", compare_dirs, "completed run directories")
      ->expected(-1);
  cmp->add_option("--out", out_path, "output CSV path (default stdout)");
  CLI::App* dis = app.add_subcommand("distill",
                                     "run fens and distill the global model");
  add_common(dis, true);
  CLI::App* gc = app.add_subcommand("grad-check",
                                    "finite-difference gradient audit");
  gc->add_flag("--quiet", quiet, "suppress per-model output");

  CLI11_PARSE(app, argc, argv);

  try {
    const std::size_t n_threads = resolve_threads(threads);
    if (gen->parsed())
      return cmd_gen_data(config_path, seed_override,
                          out_path.empty() ? "data.csv" : out_path);
    if (part->parsed())
      return cmd_partition(config_path, seed_override,
                           out_path.empty() ? "shards" : out_path);
    if (run->parsed())
      return cmd_run(config_path, seed_override, out_path, n_threads, quiet);
    if (cmp->parsed()) return cmd_compare(compare_dirs, out_path);
    if (dis->parsed())
      return cmd_distill(config_path, seed_override, out_path, n_threads,
                         quiet);
    if (gc->parsed()) return cmd_grad_check(quiet);
  } catch (const fens::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
