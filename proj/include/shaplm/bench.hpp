#pragma once

#include "shaplm/shaplm.hpp"
#include "shaplm/simulate.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace shaplm {

/// One column group of the replicate table: the scenario with an intercept GP
/// of the given range.
struct BenchSetting {
  std::string name;
  double intercept_range = 1.0;
};

struct BenchConfig {
  int replicates = 10;
  std::vector<std::uint64_t> seeds;  // replicate seeds; empty: 1, 2, ..., replicates
  std::vector<Method> methods{Method::Psccm, Method::Shaplm};
  std::vector<int> Q_values{0, 5, 10, 20};
  std::vector<BenchSetting> settings{{"weak", 1.0}, {"strong", 10.0}};
  ScenarioSpec scenario = ScenarioSpec::defaults();  // intercept range replaced per setting
  ForestConfig forest{};                             // Q and seed replaced per replicate
  int threads = 1;                                   // replicate workers; 0 = hardware concurrency

  std::vector<std::uint64_t> replicate_seeds() const;
  void validate() const;
};

/// Replicate means for one (method, Q, setting) cell.
struct BenchCell {
  double mse_beta = 0.0;
  double mse_g = 0.0;
  std::vector<double> rand_index;  // per covariate
  double se_mse_beta = 0.0;        // standard error of the mean; 0 with one replicate
  int replicates = 0;              // successful replicates
  int failures = 0;
};

struct BenchRow {
  Method method = Method::Shaplm;
  int Q = 0;
  std::vector<BenchCell> cells;  // one per setting
  bool partial = false;          // some replicate failed in some setting
};

/// Raw per-replicate metrics, kept for standard errors and reproducibility.
struct ReplicateResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  MetricsReport metrics;
};

struct BenchResult {
  std::vector<BenchSetting> settings;
  int covariates = 0;
  std::vector<BenchRow> rows;  // methods in config order, then Q ascending
  // [row][setting][replicate]
  std::vector<std::vector<std::vector<ReplicateResult>>> raw;
};

/// Each replicate draws one dataset per setting; each method runs its trials
/// once at the largest Q and reuses prefixes for the smaller ones. The
/// forest seed of a replicate equals its data seed.
BenchResult run_bench(const BenchConfig& config);

/// Columns: method, Q, then per setting <name>_mse_beta, <name>_mse_g,
/// <name>_ri_beta1..p, <name>_se_mse_beta, <name>_replicates, then partial.
std::vector<std::string> bench_header(const std::vector<BenchSetting>& settings, int covariates);
std::string bench_to_csv(const BenchResult& result);

}  // namespace shaplm
