// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fens/config.hpp"

using namespace fens;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  return dir;
}

// a deliberately tiny experiment so the whole suite stays fast
KvConfig tiny_kv(const std::string& protocol) {
  return KvConfig::parse_string(
      "protocol = " + protocol + "\n" +
      "dataset.classes = 3\n"
      "dataset.dim = 4\n"
      "dataset.train_per_class = 40\n"
      "dataset.eval_per_class = 20\n"
      "partition.clients = 3\n"
      "partition.alpha = 0.5\n"
      "seeds = 1,2\n"
      "local.epochs = 5\n"
      "local.hidden = 8\n"
      "fens.k = 8\n"
      "agg.rounds = 8\n"
      "fl.rounds = 6\n"
      "fl.local_epochs = 1\n"
      "distill.epochs = 8\n"
      "distill.student_hidden = 8\n"
      "distill.aux_per_class = 40\n");
}

}  // namespace

TEST_CASE("kv parsing skips comments and trims whitespace") {
  KvConfig kv = KvConfig::parse_string(
      "# a comment\n\n  key.a =  1 \nkey.b= two words \n");
  CHECK(kv.get_int("key.a") == 1);
  CHECK(kv.get_string("key.b") == "two words");
  CHECK_FALSE(kv.has("missing"));
}

TEST_CASE("kv parsing names the offending line") {
  try {
    KvConfig::parse_string("a = 1\nnot a pair\n");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("2") != std::string::npos);
  }
}

TEST_CASE("typed getters name the bad key") {
  KvConfig kv = KvConfig::parse_string("x = abc\n");
  try {
    kv.get_int("x");
    FAIL("expected a config error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x") != std::string::npos);
  }
  CHECK_THROWS_AS(kv.get_bool("x", false), ConfigError);
  CHECK_THROWS_AS(kv.get_double("x", 0.0), ConfigError);
  CHECK_THROWS_AS(kv.get_string("absent"), ConfigError);
}

TEST_CASE("canonical serialization is a parse fixed point") {
  KvConfig kv = tiny_kv("fens");
  ExperimentConfig cfg = ExperimentConfig::from_kv(kv);
  const std::string canon = cfg.to_kv().serialize();
  ExperimentConfig again =
      ExperimentConfig::from_kv(KvConfig::parse_string(canon));
  CHECK(again.to_kv().serialize() == canon);
  // sorted keys: serialization of a reordered input is identical
  KvConfig shuffled = KvConfig::parse_string(
      "partition.alpha = 0.5\ndataset.classes = 3\n");
  CHECK(shuffled.serialize() ==
        "dataset.classes = 3\npartition.alpha = 0.5\n");
}

TEST_CASE("experiment config validation names the offending field") {
  auto expect_error = [](const std::string& text, const std::string& key) {
    try {
      ExperimentConfig::from_kv(KvConfig::parse_string(text));
      FAIL("expected a config error for ", key);
    } catch (const ConfigError& e) {
      CHECK(std::string(e.what()).find(key) != std::string::npos);
    }
  };
  expect_error("protocol = banana\n", "protocol");
  expect_error("partition.alpha = 0\n", "partition.alpha");
  expect_error("partition.local_frac = 1.5\n", "partition.local_frac");
  expect_error("dataset.kind = parquet\n", "dataset.kind");
  expect_error("dataset.kind = csv\n", "dataset.csv_path");
  expect_error("distill.temperature = 0\n", "distill.temperature");
}

TEST_CASE("run_experiment writes the full artifact set") {
  ExperimentConfig cfg = ExperimentConfig::from_kv(tiny_kv("fens"));
  auto dir = fresh_dir("fens_run_artifacts");
  ExperimentResult res = run_experiment(cfg, dir.string(), 2);
  CHECK(res.outcomes.size() == 2);
  CHECK(std::filesystem::exists(dir / "metrics.csv"));
  CHECK(std::filesystem::exists(dir / "summary.json"));
  CHECK(std::filesystem::exists(dir / "ledger.json"));
  CHECK(std::filesystem::exists(dir / "config.canonical.txt"));
  CHECK(std::filesystem::exists(dir / "seed_1" / "client_0.fens"));
  CHECK(std::filesystem::exists(dir / "seed_1" / "client_0.fensq"));
  CHECK(std::filesystem::exists(dir / "seed_2" / "aggregator.fens"));
  // metrics header pins the schema
  const std::string metrics = slurp(dir / "metrics.csv");
  CHECK(metrics.rfind("# metrics schema v1", 0) == 0);
  CHECK(metrics.find("round,algorithm,alpha,seed,val_accuracy,cum_up_bytes,"
                     "cum_down_bytes") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("summary statistics match a hand computation") {
  ExperimentConfig cfg = ExperimentConfig::from_kv(tiny_kv("local_only"));
  cfg.seeds = {1, 2, 3};
  auto dir = fresh_dir("fens_run_stats");
  ExperimentResult res = run_experiment(cfg, dir.string(), 2);
  REQUIRE(res.outcomes.size() == 3);
  double sum = 0.0;
  for (const auto& o : res.outcomes) sum += o.test_accuracy;
  const double mean = sum / 3.0;
  CHECK(res.mean_accuracy == doctest::Approx(mean).epsilon(1e-12));
  double ss = 0.0;
  for (const auto& o : res.outcomes)
    ss += (o.test_accuracy - mean) * (o.test_accuracy - mean);
  CHECK(res.std_accuracy == doctest::Approx(std::sqrt(ss / 2.0)).epsilon(
      1e-12));
  std::filesystem::remove_all(dir);
}

TEST_CASE("reruns produce byte-identical metrics and ledgers") {
  for (const std::string protocol : {"fens", "fl"}) {
    ExperimentConfig cfg = ExperimentConfig::from_kv(tiny_kv(protocol));
    auto dir_a = fresh_dir("fens_rerun_a");
    auto dir_b = fresh_dir("fens_rerun_b");
    run_experiment(cfg, dir_a.string(), 1);
    run_experiment(cfg, dir_b.string(), 8);
    CHECK(slurp(dir_a / "metrics.csv") == slurp(dir_b / "metrics.csv"));
    CHECK(slurp(dir_a / "ledger.json") == slurp(dir_b / "ledger.json"));
    std::filesystem::remove_all(dir_a);
    std::filesystem::remove_all(dir_b);
  }
}

TEST_CASE("compare joins summaries sorted by bytes per client") {
  ExperimentConfig fens_cfg = ExperimentConfig::from_kv(tiny_kv("fens"));
  ExperimentConfig fl_cfg = ExperimentConfig::from_kv(tiny_kv("fl"));
  auto dir_a = fresh_dir("fens_cmp_a");
  auto dir_b = fresh_dir("fens_cmp_b");
  run_experiment(fens_cfg, dir_a.string(), 2);
  run_experiment(fl_cfg, dir_b.string(), 2);
  const std::string table = compare_runs({dir_a.string(), dir_b.string()});
  std::istringstream lines(table);
  std::string header, first, second;
  std::getline(lines, header);
  std::getline(lines, first);
  std::getline(lines, second);
  CHECK(header.rfind("protocol,alpha,", 0) == 0);
  // the cheaper run leads and carries ratio 1
  CHECK(first.find(",1.000000") != std::string::npos);
  auto bytes_of = [](const std::string& row) {
    // bytes_per_client is the second-to-last field
    const auto last = row.rfind(',');
    const auto prev = row.rfind(',', last - 1);
    return std::stoull(row.substr(prev + 1, last - prev - 1));
  };
  CHECK(bytes_of(first) <= bytes_of(second));
  CHECK_THROWS_AS(compare_runs({dir_a.string()}), std::invalid_argument);
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("ofl_one_round forces a single fedavg round") {
  ExperimentConfig cfg = ExperimentConfig::from_kv(tiny_kv("ofl_one_round"));
  auto dir = fresh_dir("fens_ofl");
  ExperimentResult res = run_experiment(cfg, dir.string(), 2);
  for (const auto& o : res.outcomes) CHECK(o.rounds.size() == 1);
  const std::string metrics = slurp(dir / "metrics.csv");
  CHECK(metrics.find("fedavg") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_distill writes per-seed outcomes") {
  ExperimentConfig cfg = ExperimentConfig::from_kv(tiny_kv("fens"));
  cfg.seeds = {1};
  auto dir = fresh_dir("fens_distill_out");
  auto outcomes = run_distill(cfg, dir.string(), 2);
  REQUIRE(outcomes.size() == 1);
  CHECK(outcomes[0].student_bytes < outcomes[0].ensemble_bytes);
  CHECK(outcomes[0].student_accuracy > 0.3);  // well above 1/3 chance floor
  CHECK(std::filesystem::exists(dir / "distill.json"));
  std::filesystem::remove_all(dir);
}
