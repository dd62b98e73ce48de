#include "shaplm/bench.hpp"

#include "shaplm/io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace shaplm {

std::vector<std::uint64_t> BenchConfig::replicate_seeds() const {
  if (!seeds.empty()) return seeds;
  std::vector<std::uint64_t> out;
  for (int r = 0; r < replicates; ++r) out.push_back(static_cast<std::uint64_t>(r) + 1);
  return out;
}

void BenchConfig::validate() const {
  if (seeds.empty() && replicates < 1) throw std::invalid_argument("bench: replicates must be >= 1");
  if (methods.empty()) throw std::invalid_argument("bench: no methods");
  if (Q_values.empty()) throw std::invalid_argument("bench: no Q values");
  for (int q : Q_values) {
    if (q < 0) throw std::invalid_argument("bench: Q values must be >= 0");
  }
  if (settings.empty()) throw std::invalid_argument("bench: no settings");
  for (const auto& s : settings) {
    if (s.name.empty()) throw std::invalid_argument("bench: setting without a name");
    if (!(s.intercept_range > 0)) throw std::invalid_argument("bench: intercept range must be > 0");
  }
  if (threads < 0) throw std::invalid_argument("bench: threads must be >= 0");
  scenario.validate();
  forest.validate();
}

namespace {

MetricsReport evaluate(const SyntheticDataset& ds, const ShaplmFit& fit) {
  MetricsReport m;
  m.mse_beta = mse_beta(ds.true_beta, fit.beta_hat);
  m.mse_g = mse_g(ds.true_g, fit.g_fitted);
  for (std::size_t k = 0; k < ds.true_labels.size(); ++k) {
    m.rand_index.push_back(rand_index(ds.true_labels[k], fit.clusters[k]));
  }
  return m;
}

BenchCell summarize(const std::vector<ReplicateResult>& reps, int covariates) {
  BenchCell cell;
  cell.rand_index.assign(static_cast<std::size_t>(covariates), 0.0);
  std::vector<double> mses;
  for (const auto& r : reps) {
    if (!r.ok) {
      ++cell.failures;
      continue;
    }
    mses.push_back(r.metrics.mse_beta);
    cell.mse_g += r.metrics.mse_g;
    for (int k = 0; k < covariates; ++k) cell.rand_index[k] += r.metrics.rand_index[k];
  }
  cell.replicates = static_cast<int>(mses.size());
  if (cell.replicates == 0) {
    cell.mse_beta = cell.mse_g = std::nan("");
    for (auto& v : cell.rand_index) v = std::nan("");
    cell.se_mse_beta = std::nan("");
    return cell;
  }
  const double m = static_cast<double>(cell.replicates);
  for (double v : mses) cell.mse_beta += v;
  cell.mse_beta /= m;
  cell.mse_g /= m;
  for (auto& v : cell.rand_index) v /= m;
  if (cell.replicates > 1) {
    double ss = 0.0;
    for (double v : mses) ss += (v - cell.mse_beta) * (v - cell.mse_beta);
    cell.se_mse_beta = std::sqrt(ss / (m - 1.0) / m);
  }
  return cell;
}

}  // namespace

BenchResult run_bench(const BenchConfig& config) {
  config.validate();
  const std::vector<std::uint64_t> seeds = config.replicate_seeds();
  std::vector<int> qs = config.Q_values;
  std::sort(qs.begin(), qs.end());
  qs.erase(std::unique(qs.begin(), qs.end()), qs.end());
  const int max_q = qs.back();
  const std::size_t n_rows = config.methods.size() * qs.size();
  const std::size_t n_set = config.settings.size(), n_rep = seeds.size();

  BenchResult out;
  out.settings = config.settings;
  out.covariates = static_cast<int>(config.scenario.beta_surfaces.size());
  out.raw.assign(n_rows, std::vector<std::vector<ReplicateResult>>(n_set, std::vector<ReplicateResult>(n_rep)));

  parallel_for(static_cast<int>(n_rep), config.threads, [&](int r) {
    const std::uint64_t seed = seeds[r];
    for (std::size_t s = 0; s < n_set; ++s) {
      ScenarioSpec spec = config.scenario;
      spec.intercept.kind = InterceptSpec::Kind::Gp;
      spec.intercept.gp.range = config.settings[s].intercept_range;
      for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        for (std::size_t qi = 0; qi < qs.size(); ++qi) {
          auto& cell = out.raw[mi * qs.size() + qi][s][r];
          cell.seed = seed;
          cell.error = "not run";
        }
      }
      SyntheticDataset ds;
      try {
        ds = gen_scenario(spec, seed);
      } catch (const std::exception& e) {
        for (auto& row : out.raw) row[s][r].error = e.what();
        continue;
      }
      const SpatialData data{ds.locations, ds.X, ds.y};
      ForestConfig fc = config.forest;
      fc.seed = seed;
      fc.threads = 1;
      for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
        try {
          const PreparedData prep = prepare_data(data, fc, config.methods[mi]);
          const TrialSet all = run_trials(prep, fc, max_q);
          for (std::size_t qi = 0; qi < qs.size(); ++qi) {
            auto& cell = out.raw[mi * qs.size() + qi][s][r];
            try {
              TrialSet prefix;
              prefix.estimates.assign(all.estimates.begin(), all.estimates.begin() + qs[qi]);
              prefix.lambdas.assign(all.lambdas.begin(), all.lambdas.begin() + qs[qi]);
              fc.Q = qs[qi];
              const ShaplmFit fit = fit_from_trials(prep, fc, prefix);
              cell.metrics = evaluate(ds, fit);
              cell.ok = true;
              cell.error.clear();
            } catch (const std::exception& e) {
              cell.error = e.what();
            }
          }
        } catch (const std::exception& e) {
          for (std::size_t qi = 0; qi < qs.size(); ++qi) out.raw[mi * qs.size() + qi][s][r].error = e.what();
        }
      }
    }
  });

  for (std::size_t mi = 0; mi < config.methods.size(); ++mi) {
    for (std::size_t qi = 0; qi < qs.size(); ++qi) {
      const std::size_t idx = mi * qs.size() + qi;
      BenchRow row;
      row.method = config.methods[mi];
      row.Q = qs[qi];
      for (std::size_t s = 0; s < n_set; ++s) {
        row.cells.push_back(summarize(out.raw[idx][s], out.covariates));
        if (row.cells.back().failures > 0) row.partial = true;
      }
      out.rows.push_back(std::move(row));
    }
  }
  return out;
}

std::vector<std::string> bench_header(const std::vector<BenchSetting>& settings, int covariates) {
  std::vector<std::string> h{"method", "Q"};
  for (const auto& s : settings) {
    h.push_back(s.name + "_mse_beta");
    h.push_back(s.name + "_mse_g");
    for (int k = 1; k <= covariates; ++k) h.push_back(s.name + "_ri_beta" + std::to_string(k));
    h.push_back(s.name + "_se_mse_beta");
    h.push_back(s.name + "_replicates");
  }
  h.push_back("partial");
  return h;
}

std::string bench_to_csv(const BenchResult& result) {
  std::ostringstream os;
  const auto header = bench_header(result.settings, result.covariates);
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  for (const auto& row : result.rows) {
    os << method_name(row.method) << ',' << row.Q;
    for (const auto& c : row.cells) {
      os << ',' << format_double(c.mse_beta) << ',' << format_double(c.mse_g);
      for (double ri : c.rand_index) os << ',' << format_double(ri);
      os << ',' << format_double(c.se_mse_beta) << ',' << c.replicates;
    }
    os << ',' << (row.partial ? 1 : 0) << '\n';
  }
  return os.str();
}

}  // namespace shaplm
