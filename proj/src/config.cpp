// Copyright 2026 the fens-sim authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0

#include "fens/config.hpp"

#include <fstream>
#include <sstream>

namespace fens {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

KvConfig KvConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config file: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
  KvConfig kv;
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": empty key");
    kv.values_[key] = trim(t.substr(eq + 1));
  }
  return kv;
}

std::string KvConfig::serialize() const {
  std::ostringstream out;
  for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
  return out.str();
}

bool KvConfig::has(const std::string& key) const {
  return values_.count(key) > 0;
}

void KvConfig::set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::string KvConfig::get_string(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError(key + ": missing required key");
  return it->second;
}

std::string KvConfig::get_string(const std::string& key,
                                 const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::int64_t KvConfig::get_int(const std::string& key) const {
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const std::int64_t n = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return n;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not an integer: '" + v + "'");
  }
}

std::int64_t KvConfig::get_int(const std::string& key,
                               std::int64_t fallback) const {
  return has(key) ? get_int(key) : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("");
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ConfigError(key + ": not a boolean: '" + v + "'");
}

std::vector<std::int64_t> KvConfig::get_int_list(
    const std::string& key, std::vector<std::int64_t> fallback) const {
  if (!has(key)) return fallback;
  const std::string v = get_string(key);
  std::vector<std::int64_t> out;
  std::stringstream ss(v);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stoll(trim(cell)));
    } catch (const std::exception&) {
      throw ConfigError(key + ": not an integer list: '" + v + "'");
    }
  }
  if (out.empty()) throw ConfigError(key + ": empty list");
  return out;
}

Protocol protocol_from_string(const std::string& s) {
  if (s == "fens") return Protocol::fens;
  if (s == "fl") return Protocol::fl;
  if (s == "ofl_one_round") return Protocol::ofl_one_round;
  if (s == "local_only") return Protocol::local_only;
  throw ConfigError("protocol: unknown value '" + s + "'");
}

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::fens: return "fens";
    case Protocol::fl: return "fl";
    case Protocol::ofl_one_round: return "ofl_one_round";
    case Protocol::local_only: return "local_only";
  }
  return "?";
}

ExperimentConfig ExperimentConfig::from_kv(const KvConfig& kv) {
  ExperimentConfig cfg;
  const std::string kind = kv.get_string("dataset.kind", "synthetic");
  if (kind == "synthetic") {
    cfg.synthetic = true;
  } else if (kind == "csv") {
    cfg.synthetic = false;
    cfg.csv_path = kv.get_string("dataset.csv_path");
  } else {
    throw ConfigError("dataset.kind: unknown value '" + kind + "'");
  }
  cfg.classes = static_cast<int>(kv.get_int("dataset.classes", cfg.classes));
  cfg.dim = static_cast<int>(kv.get_int("dataset.dim", cfg.dim));
  cfg.train_per_class = static_cast<int>(
      kv.get_int("dataset.train_per_class", cfg.train_per_class));
  cfg.eval_per_class = static_cast<int>(
      kv.get_int("dataset.eval_per_class", cfg.eval_per_class));
  cfg.separation = kv.get_double("dataset.separation", cfg.separation);
  if (cfg.synthetic && (cfg.classes < 2 || cfg.dim < 2))
    throw ConfigError("dataset.classes/dataset.dim: need >= 2 classes and "
                      ">= 2 dimensions");

  cfg.alpha = kv.get_double("partition.alpha", cfg.alpha);
  if (cfg.alpha <= 0.0) throw ConfigError("partition.alpha: must be > 0");
  cfg.clients = static_cast<std::size_t>(
      kv.get_int("partition.clients", static_cast<std::int64_t>(cfg.clients)));
  if (cfg.clients < 1) throw ConfigError("partition.clients: must be >= 1");
  cfg.local_split_frac = kv.get_double("partition.local_frac",
                                       cfg.local_split_frac);
  if (cfg.local_split_frac <= 0.0 || cfg.local_split_frac >= 1.0)
    throw ConfigError("partition.local_frac: must be in (0, 1)");

  cfg.protocol = protocol_from_string(kv.get_string("protocol", "fens"));
  {
    auto raw = kv.get_int_list("seeds", {1, 2, 3});
    cfg.seeds.clear();
    for (auto s : raw) cfg.seeds.push_back(static_cast<std::uint64_t>(s));
  }

  LocalTrainRecipe local;
  local.epochs = static_cast<std::size_t>(kv.get_int("local.epochs", 20));
  local.lr = kv.get_double("local.lr", 0.05);
  local.cosine = kv.get_bool("local.cosine", true);
  local.batch_size = static_cast<std::size_t>(kv.get_int("local.batch", 32));
  {
    auto h = kv.get_int_list("local.hidden", {32});
    local.hidden.clear();
    for (auto w : h) {
      if (w < 1) throw ConfigError("local.hidden: widths must be >= 1");
      local.hidden.push_back(static_cast<std::size_t>(w));
    }
  }
  if (local.epochs < 1) throw ConfigError("local.epochs: must be >= 1");
  cfg.fens.local = local;
  cfg.fl_local = local;

  cfg.fens.quantize = kv.get_bool("fens.quantize", true);
  cfg.fens.aggregator =
      agg_kind_from_string(kv.get_string("fens.aggregator", "nn"));
  cfg.fens.hidden_width = static_cast<std::size_t>(kv.get_int("fens.k", 40));
  cfg.fens.gating_hidden = static_cast<std::size_t>(
      kv.get_int("fens.gating_hidden", 16));
  cfg.fens.cache_logits = kv.get_bool("fens.cache_logits", false);
  cfg.fens.agg_fl.algorithm =
      fed_algo_from_string(kv.get_string("agg.algorithm", "fedadam"));
  cfg.fens.agg_fl.rounds = static_cast<std::size_t>(
      kv.get_int("agg.rounds", 100));
  cfg.fens.agg_fl.local_steps = static_cast<std::size_t>(
      kv.get_int("agg.local_steps", 1));
  cfg.fens.agg_fl.batch_size = static_cast<std::size_t>(
      kv.get_int("agg.batch", 128));
  cfg.fens.agg_fl.client_lr = kv.get_double("agg.client_lr", 1.0);
  cfg.fens.agg_fl.server_lr = kv.get_double("agg.server_lr", 0.001);
  cfg.fens.agg_fl.participation = kv.get_double("agg.participation", 1.0);
  cfg.fens.agg_fl.validate();

  cfg.fl.algorithm = fed_algo_from_string(kv.get_string("fl.algorithm",
                                                        "fedavg"));
  cfg.fl.rounds = static_cast<std::size_t>(kv.get_int("fl.rounds", 50));
  cfg.fl.local_epochs = static_cast<std::size_t>(
      kv.get_int("fl.local_epochs", 2));
  cfg.fl.local_steps = static_cast<std::size_t>(
      kv.get_int("fl.local_steps", 0));
  if (cfg.fl.local_steps == 0 && cfg.fl.local_epochs == 0)
    throw ConfigError("fl.local_steps/fl.local_epochs: one must be positive");
  cfg.fl.batch_size = static_cast<std::size_t>(kv.get_int("fl.batch", 32));
  cfg.fl.client_lr = kv.get_double("fl.client_lr", 0.05);
  cfg.fl.server_lr = kv.get_double("fl.server_lr", 0.001);
  cfg.fl.prox_mu = kv.get_double("fl.prox_mu", 0.0);
  cfg.fl.participation = kv.get_double("fl.participation", 1.0);
  cfg.fl.weighted_mean = kv.get_bool("fl.weighted_mean", false);
  cfg.fl.stc_strict_bytes = kv.get_bool("fl.stc_strict_bytes", false);
  cfg.fl.validate();

  cfg.distill.epochs = static_cast<std::size_t>(
      kv.get_int("distill.epochs", 30));
  cfg.distill.lr = kv.get_double("distill.lr", 0.05);
  cfg.distill.batch_size = static_cast<std::size_t>(
      kv.get_int("distill.batch", 64));
  cfg.distill.temperature = kv.get_double("distill.temperature", 1.0);
  if (cfg.distill.temperature <= 0.0)
    throw ConfigError("distill.temperature: must be > 0");
  {
    auto h = kv.get_int_list("distill.student_hidden", {32});
    cfg.student_hidden.clear();
    for (auto w : h) cfg.student_hidden.push_back(static_cast<std::size_t>(w));
  }
  cfg.aux_per_class = static_cast<int>(
      kv.get_int("distill.aux_per_class", 500));
  return cfg;
}

KvConfig ExperimentConfig::to_kv() const {
  KvConfig kv;
  auto set_int = [&kv](const std::string& k, std::int64_t v) {
    kv.set(k, std::to_string(v));
  };
  auto set_double = [&kv](const std::string& k, double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    kv.set(k, ss.str());
  };
  auto set_bool = [&kv](const std::string& k, bool v) {
    kv.set(k, v ? "true" : "false");
  };
  auto set_list = [&kv](const std::string& k, const auto& list) {
    std::ostringstream ss;
    for (std::size_t i = 0; i < list.size(); ++i) {
      if (i) ss << ",";
      ss << list[i];
    }
    kv.set(k, ss.str());
  };

  kv.set("dataset.kind", synthetic ? "synthetic" : "csv");
  if (!synthetic) kv.set("dataset.csv_path", csv_path);
  set_int("dataset.classes", classes);
  set_int("dataset.dim", dim);
  set_int("dataset.train_per_class", train_per_class);
  set_int("dataset.eval_per_class", eval_per_class);
  set_double("dataset.separation", separation);
  set_double("partition.alpha", alpha);
  set_int("partition.clients", static_cast<std::int64_t>(clients));
  set_double("partition.local_frac", local_split_frac);
  kv.set("protocol", to_string(protocol));
  set_list("seeds", seeds);
  set_int("local.epochs", static_cast<std::int64_t>(fens.local.epochs));
  set_double("local.lr", fens.local.lr);
  set_bool("local.cosine", fens.local.cosine);
  set_int("local.batch", static_cast<std::int64_t>(fens.local.batch_size));
  set_list("local.hidden", fens.local.hidden);
  set_bool("fens.quantize", fens.quantize);
  kv.set("fens.aggregator", to_string(fens.aggregator));
  set_int("fens.k", static_cast<std::int64_t>(fens.hidden_width));
  set_int("fens.gating_hidden", static_cast<std::int64_t>(fens.gating_hidden));
  set_bool("fens.cache_logits", fens.cache_logits);
  kv.set("agg.algorithm", to_string(fens.agg_fl.algorithm));
  set_int("agg.rounds", static_cast<std::int64_t>(fens.agg_fl.rounds));
  set_int("agg.local_steps",
          static_cast<std::int64_t>(fens.agg_fl.local_steps));
  set_int("agg.batch", static_cast<std::int64_t>(fens.agg_fl.batch_size));
  set_double("agg.client_lr", fens.agg_fl.client_lr);
  set_double("agg.server_lr", fens.agg_fl.server_lr);
  set_double("agg.participation", fens.agg_fl.participation);
  kv.set("fl.algorithm", to_string(fl.algorithm));
  set_int("fl.rounds", static_cast<std::int64_t>(fl.rounds));
  set_int("fl.local_epochs", static_cast<std::int64_t>(fl.local_epochs));
  set_int("fl.local_steps", static_cast<std::int64_t>(fl.local_steps));
  set_int("fl.batch", static_cast<std::int64_t>(fl.batch_size));
  set_double("fl.client_lr", fl.client_lr);
  set_double("fl.server_lr", fl.server_lr);
  set_double("fl.prox_mu", fl.prox_mu);
  set_double("fl.participation", fl.participation);
  set_bool("fl.weighted_mean", fl.weighted_mean);
  set_bool("fl.stc_strict_bytes", fl.stc_strict_bytes);
  set_int("distill.epochs", static_cast<std::int64_t>(distill.epochs));
  set_double("distill.lr", distill.lr);
  set_int("distill.batch", static_cast<std::int64_t>(distill.batch_size));
  set_double("distill.temperature", distill.temperature);
  set_list("distill.student_hidden", student_hidden);
  set_int("distill.aux_per_class", aux_per_class);
  return kv;
}

}  // namespace fens
