#include "cli.hpp"

#include "shaplm/io.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace shaplm::cli {

using nlohmann::json;

namespace {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

json scenario_defaults() {
  return {{"n", 1000},   {"sigma2", 0.1},    {"c", 0.75},
          {"r_prime", 0.1}, {"range", 10.0}, {"intercept", "gp"},
          {"domain", {0.0, 0.0, 1.0, 1.0}}};
}

json forest_defaults() {
  const ForestConfig fc;
  return {{"Q", 10},
          {"lambda_grid", json::array()},
          {"n_lambda", fc.n_lambda},
          {"lambda_min_ratio", fc.lambda_min_ratio},
          {"lambda_patience", fc.lambda_patience},
          {"rho_grid", fc.rho_grid},
          {"degree", fc.spline.degree},
          {"smoothness", fc.spline.smoothness},
          {"mesh_resolution", fc.mesh.resolution},
          {"mesh_file", ""},
          {"weight_floor", fc.weight_floor},
          {"ridge_factor", fc.ridge_factor},
          {"tol", fc.solver.tol},
          {"kkt_tol", fc.solver.kkt_tol},
          {"max_iter", fc.solver.max_iter},
          {"threads", 1}};
}

template <class T>
T get(const json& cfg, const std::string& key) {
  if (!cfg.contains(key)) throw ConfigError(key + ": missing");
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(key + ": wrong type (" + cfg.at(key).dump() + ")");
  }
}

Rect domain_from(const json& v, const std::string& key) {
  std::vector<double> d;
  try {
    d = v.get<std::vector<double>>();
  } catch (const json::exception&) {
    throw ConfigError(key + ": expected [xmin, ymin, xmax, ymax]");
  }
  if (d.size() != 4 || !(d[2] > d[0]) || !(d[3] > d[1])) {
    throw ConfigError(key + ": expected [xmin, ymin, xmax, ymax] with xmax > xmin and ymax > ymin");
  }
  return Rect{d[0], d[1], d[2], d[3]};
}

json parse_flag_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

std::filesystem::path out_dir(const json& cfg) {
  std::filesystem::path dir = get<std::string>(cfg, "out");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
  return dir;
}

void write_snapshot(const std::filesystem::path& dir, const std::string& command, const json& cfg) {
  json snap = cfg;
  snap["command"] = command;
  write_text_file((dir / (command + "_config.json")).string(), snap.dump(2) + "\n");
}

std::vector<std::string> covariate_names(const std::string& prefix, Eigen::Index p) {
  std::vector<std::string> out;
  for (Eigen::Index k = 1; k <= p; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

int cmd_simulate(const json& cfg, std::ostream& out) {
  const ScenarioSpec spec = scenario_from(cfg);
  const auto seed = get<std::uint64_t>(cfg, "seed");
  const SyntheticDataset ds = gen_scenario(spec, seed);
  const auto dir = out_dir(cfg);
  const Eigen::Index n = ds.y.size(), p = ds.X.cols();

  std::vector<std::string> header{"x", "y", "resp"};
  for (const auto& h : covariate_names("x", p)) header.push_back(h);
  Eigen::MatrixXd data(n, 3 + p);
  for (Eigen::Index i = 0; i < n; ++i) {
    data(i, 0) = ds.locations[i].x();
    data(i, 1) = ds.locations[i].y();
  }
  data.col(2) = ds.y;
  data.rightCols(p) = ds.X;
  write_csv((dir / "data.csv").string(), header, data);

  std::vector<std::string> truth_header{"x", "y", "g"};
  for (const auto& h : covariate_names("beta", p)) truth_header.push_back(h);
  for (const auto& h : covariate_names("label", p)) truth_header.push_back(h);
  Eigen::MatrixXd truth(n, 3 + 2 * p);
  truth.leftCols(2) = data.leftCols(2);
  truth.col(2) = ds.true_g;
  truth.middleCols(3, p) = ds.true_beta;
  for (Eigen::Index k = 0; k < p; ++k) {
    for (Eigen::Index i = 0; i < n; ++i) truth(i, 3 + p + k) = ds.true_labels[k].labels[i];
  }
  write_csv((dir / "truth.csv").string(), truth_header, truth);
  write_snapshot(dir, "simulate", cfg);
  out << "wrote " << n << " rows to " << (dir / "data.csv").string() << "\n";
  return kOk;
}

Rect bounding_box(const SpatialData& data) {
  Rect r{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
         -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : data.locations) {
    r.xmin = std::min(r.xmin, s.x());
    r.ymin = std::min(r.ymin, s.y());
    r.xmax = std::max(r.xmax, s.x());
    r.ymax = std::max(r.ymax, s.y());
  }
  return r;
}

void write_table_csv(const std::string& path, const char* value_key, const char* crit_key,
                     const std::vector<TuningRow>& table) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(table.size()), 6);
  for (std::size_t r = 0; r < table.size(); ++r) {
    const auto& row = table[r];
    m.row(static_cast<Eigen::Index>(r)) << row.value, row.criterion, row.rss, row.df, row.iterations,
        row.converged ? 1.0 : 0.0;
  }
  write_csv(path, {value_key, crit_key, "rss", "df", "iterations", "converged"}, m);
}

int cmd_fit(json cfg, std::ostream& out) {
  const auto data_path = get<std::string>(cfg, "data");
  if (data_path.empty()) throw ConfigError("data: an input CSV is required");
  const Method method = [&] {
    try {
      return parse_method(get<std::string>(cfg, "mode"));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("mode: ") + e.what());
    }
  }();
  const SpatialData data = read_data_csv(data_path);
  if (cfg.at("domain").is_null()) {
    const Rect box = bounding_box(data);
    cfg["domain"] = {box.xmin, box.ymin, box.xmax, box.ymax};
  }
  ForestConfig fc = forest_from(cfg);
  const auto dir = out_dir(cfg);
  write_snapshot(dir, "fit", cfg);

  const ShaplmFit fit = fit_method(data, fc, method);
  write_text_file((dir / "fit.json").string(), fit_to_json_text(fit) + "\n");
  write_csv((dir / "g_grid.csv").string(), {"x", "y", "g"},
            g_grid(fit, fc.mesh.domain, get<int>(cfg, "grid_resolution")));

  const Eigen::Index n = data.n(), p = data.p();
  std::vector<std::string> header{"x", "y"};
  for (const auto& h : covariate_names("cluster_beta", p)) header.push_back(h);
  if (fit.intercept_clusters) header.push_back("cluster_intercept");
  Eigen::MatrixXd labels(n, static_cast<Eigen::Index>(header.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    labels(i, 0) = data.locations[i].x();
    labels(i, 1) = data.locations[i].y();
    for (Eigen::Index k = 0; k < p; ++k) labels(i, 2 + k) = fit.clusters[k].labels[i];
    if (fit.intercept_clusters) labels(i, 2 + p) = fit.intercept_clusters->labels[i];
  }
  write_csv((dir / "clusters.csv").string(), header, labels);
  write_table_csv((dir / "mbic.csv").string(), "lambda", "mbic", fit.lambda_table);
  if (method == Method::Shaplm) write_table_csv((dir / "bic.csv").string(), "rho", "bic", fit.rho_table);

  out << method_name(method) << " fit: lambda* = " << fit.lambda_star;
  if (method == Method::Shaplm) out << ", rho* = " << fit.rho_star;
  out << ", clusters =";
  for (const auto& part : fit.clusters) out << ' ' << part.num_clusters();
  out << "\n";
  if (!fit.converged) {
    out << "warning: the final solve did not converge (kkt residual " << fit.kkt_residual << ")\n";
    return kNumerical;
  }
  return kOk;
}

int cmd_eval(const json& cfg, std::ostream& out) {
  const auto fit_path = get<std::string>(cfg, "fit");
  const auto truth_path = get<std::string>(cfg, "truth");
  if (fit_path.empty()) throw ConfigError("fit: a fit JSON file is required");
  if (truth_path.empty()) throw ConfigError("truth: a truth CSV file is required");
  json fit;
  try {
    fit = json::parse(read_text_file(fit_path));
  } catch (const json::parse_error& e) {
    throw ParseError(fit_path + ": " + e.what());
  }
  Eigen::MatrixXd beta_hat;
  Eigen::VectorXd g_hat;
  std::vector<Partition> clusters;
  try {
    const auto rows = fit.at("beta_hat").get<std::vector<std::vector<double>>>();
    const auto g = fit.at("g_fitted").get<std::vector<double>>();
    const auto parts = fit.at("clusters").get<std::vector<std::vector<int>>>();
    const auto n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Index p = n ? static_cast<Eigen::Index>(rows[0].size()) : 0;
    beta_hat.resize(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (static_cast<Eigen::Index>(rows[i].size()) != p) throw ParseError(fit_path + ": ragged beta_hat");
      for (Eigen::Index k = 0; k < p; ++k) beta_hat(i, k) = rows[i][k];
    }
    g_hat = Eigen::Map<const Eigen::VectorXd>(g.data(), static_cast<Eigen::Index>(g.size()));
    for (const auto& labels : parts) clusters.push_back(Partition{labels});
  } catch (const json::exception& e) {
    throw ParseError(fit_path + ": " + e.what());
  }

  const CsvTable truth = read_csv(truth_path);
  const Eigen::Index n = truth.values.rows(), p = beta_hat.cols();
  if (n != beta_hat.rows() || n != g_hat.size()) {
    throw ConfigError("truth: " + std::to_string(n) + " rows but the fit has " + std::to_string(beta_hat.rows()) +
                      " locations");
  }
  if (static_cast<Eigen::Index>(clusters.size()) != p) throw ParseError(fit_path + ": clusters do not match p");
  Eigen::MatrixXd true_beta(n, p);
  for (Eigen::Index k = 0; k < p; ++k) {
    true_beta.col(k) = truth.values.col(truth.require("beta" + std::to_string(k + 1), truth_path));
  }
  const Eigen::VectorXd true_g = truth.values.col(truth.require("g", truth_path));

  MetricsReport report;
  report.mse_beta = mse_beta(true_beta, beta_hat);
  report.mse_g = mse_g(true_g, g_hat);
  for (Eigen::Index k = 0; k < p; ++k) {
    const Eigen::VectorXd col = truth.values.col(truth.require("label" + std::to_string(k + 1), truth_path));
    Partition t;
    for (Eigen::Index i = 0; i < n; ++i) t.labels.push_back(static_cast<int>(col[i]));
    if (clusters[k].size() != static_cast<std::size_t>(n)) throw ParseError(fit_path + ": cluster labels do not match n");
    report.rand_index.push_back(rand_index(t, clusters[k]));
  }
  const auto dir = out_dir(cfg);
  write_text_file((dir / "metrics.json").string(), metrics_to_json_text(report) + "\n");
  write_snapshot(dir, "eval", cfg);
  out << "mse_beta " << report.mse_beta << ", mse_g " << report.mse_g << ", rand_index";
  for (double r : report.rand_index) out << ' ' << r;
  out << "\n";
  return kOk;
}

int cmd_bench(const json& cfg, std::ostream& out) {
  const BenchConfig bc = bench_from(cfg);
  const auto dir = out_dir(cfg);
  write_snapshot(dir, "bench", cfg);
  const BenchResult result = run_bench(bc);
  write_text_file((dir / "bench.csv").string(), bench_to_csv(result));

  std::ostringstream raw;
  raw << "method,Q,setting,seed,ok,mse_beta,mse_g";
  for (int k = 1; k <= result.covariates; ++k) raw << ",ri_beta" << k;
  raw << ",error\n";
  for (std::size_t r = 0; r < result.rows.size(); ++r) {
    for (std::size_t s = 0; s < result.settings.size(); ++s) {
      for (const auto& rep : result.raw[r][s]) {
        raw << method_name(result.rows[r].method) << ',' << result.rows[r].Q << ',' << result.settings[s].name << ','
            << rep.seed << ',' << (rep.ok ? 1 : 0);
        if (rep.ok) {
          raw << ',' << format_double(rep.metrics.mse_beta) << ',' << format_double(rep.metrics.mse_g);
          for (double ri : rep.metrics.rand_index) raw << ',' << format_double(ri);
          raw << ",\n";
        } else {
          raw << ",,";
          for (int k = 0; k < result.covariates; ++k) raw << ',';
          std::string msg = rep.error;
          for (char& ch : msg) {
            if (ch == ',' || ch == '\n') ch = ';';
          }
          raw << ',' << msg << '\n';
        }
      }
    }
  }
  write_text_file((dir / "bench_replicates.csv").string(), raw.str());
  bool partial = false;
  for (const auto& row : result.rows) partial = partial || row.partial;
  out << "wrote " << result.rows.size() << " rows to " << (dir / "bench.csv").string() << "\n";
  if (partial) out << "warning: some replicates failed; see bench_replicates.csv\n";
  return kOk;
}

}  // namespace

json default_config(const std::string& command) {
  json cfg = {{"seed", 1}, {"out", "."}};
  if (command == "simulate") {
    cfg.update(scenario_defaults());
  } else if (command == "fit") {
    cfg.update(forest_defaults());
    cfg["data"] = "";
    cfg["mode"] = "shaplm";
    cfg["domain"] = nullptr;
    cfg["grid_resolution"] = 50;
  } else if (command == "eval") {
    cfg.erase("seed");
    cfg["fit"] = "";
    cfg["truth"] = "";
  } else if (command == "bench") {
    cfg.update(scenario_defaults());
    cfg.update(forest_defaults());
    cfg.erase("range");
    cfg.erase("Q");
    cfg["replicates"] = 10;
    cfg["seeds"] = json::array();
    cfg["Q_values"] = {0, 5, 10, 20};
    cfg["methods"] = {"psccm", "shaplm"};
    cfg["settings"] = json::array({{{"name", "weak"}, {"range", 1.0}}, {{"name", "strong"}, {"range", 10.0}}});
  } else {
    throw ConfigError("unknown command '" + command + "'");
  }
  return cfg;
}

json resolve_config(const std::string& command, const json& file,
                    const std::vector<std::pair<std::string, std::string>>& flags) {
  json cfg = default_config(command);
  if (!file.is_null()) {
    if (!file.is_object()) throw ConfigError("config file: expected a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (key == "command") continue;  // present in snapshots
      if (!cfg.contains(key)) throw ConfigError(key + ": unknown key for '" + command + "'");
      cfg[key] = value;
    }
  }
  for (const auto& [key, value] : flags) {
    if (!cfg.contains(key)) throw ConfigError("--" + key + ": unknown option for '" + command + "'");
    cfg[key] = parse_flag_value(value);
  }
  return cfg;
}

ScenarioSpec scenario_from(const json& cfg) {
  ScenarioSpec spec = ScenarioSpec::defaults();
  spec.n = get<int>(cfg, "n");
  if (spec.n < 3) throw ConfigError("n: must be >= 3");
  spec.sigma2 = get<double>(cfg, "sigma2");
  if (!(spec.sigma2 >= 0)) throw ConfigError("sigma2: must be >= 0");
  spec.collinearity = get<double>(cfg, "c");
  if (!(spec.collinearity >= 0 && spec.collinearity <= 1)) {
    throw ConfigError("c: must lie in [0, 1] (got " + cfg.at("c").dump() + ")");
  }
  spec.covariate_range = get<double>(cfg, "r_prime");
  if (!(spec.covariate_range > 0)) throw ConfigError("r_prime: must be > 0");
  spec.domain = domain_from(cfg.at("domain"), "domain");
  spec.beta_surfaces = {default_beta1(spec.domain), default_beta2(spec.domain)};
  const auto intercept = get<std::string>(cfg, "intercept");
  if (intercept == "gp") {
    spec.intercept.kind = InterceptSpec::Kind::Gp;
  } else if (intercept == "zero") {
    spec.intercept.kind = InterceptSpec::Kind::Zero;
  } else {
    throw ConfigError("intercept: expected 'gp' or 'zero' (got '" + intercept + "')");
  }
  if (cfg.contains("range")) {
    spec.intercept.gp.range = get<double>(cfg, "range");
    if (!(spec.intercept.gp.range > 0)) throw ConfigError("range: must be > 0");
  }
  spec.validate();
  return spec;
}

ForestConfig forest_from(const json& cfg) {
  ForestConfig fc;
  if (cfg.contains("Q")) {
    fc.Q = get<int>(cfg, "Q");
    if (fc.Q < 0) throw ConfigError("Q: must be >= 0");
  }
  if (cfg.contains("seed")) fc.seed = get<std::uint64_t>(cfg, "seed");
  fc.lambda_grid = get<std::vector<double>>(cfg, "lambda_grid");
  for (double v : fc.lambda_grid) {
    if (!(v > 0)) throw ConfigError("lambda_grid: values must be > 0");
  }
  for (std::size_t i = 1; i < fc.lambda_grid.size(); ++i) {
    if (!(fc.lambda_grid[i] < fc.lambda_grid[i - 1])) throw ConfigError("lambda_grid: values must be strictly descending");
  }
  fc.n_lambda = get<int>(cfg, "n_lambda");
  if (fc.n_lambda < 1) throw ConfigError("n_lambda: must be >= 1");
  fc.lambda_min_ratio = get<double>(cfg, "lambda_min_ratio");
  if (!(fc.lambda_min_ratio > 0 && fc.lambda_min_ratio <= 1)) throw ConfigError("lambda_min_ratio: must lie in (0, 1]");
  fc.lambda_patience = get<int>(cfg, "lambda_patience");
  if (fc.lambda_patience < 0) throw ConfigError("lambda_patience: must be >= 0");
  fc.rho_grid = get<std::vector<double>>(cfg, "rho_grid");
  if (fc.rho_grid.empty()) throw ConfigError("rho_grid: must not be empty");
  for (double v : fc.rho_grid) {
    if (!(v >= 0)) throw ConfigError("rho_grid: values must be >= 0");
  }
  fc.spline.degree = get<int>(cfg, "degree");
  fc.spline.smoothness = get<int>(cfg, "smoothness");
  if (fc.spline.degree < 2) throw ConfigError("degree: must be >= 2");
  if (fc.spline.smoothness < 0) throw ConfigError("smoothness: must be >= 0");
  fc.mesh.resolution = get<int>(cfg, "mesh_resolution");
  if (fc.mesh.resolution < 1) throw ConfigError("mesh_resolution: must be >= 1");
  fc.mesh.file = get<std::string>(cfg, "mesh_file");
  if (cfg.contains("domain") && !cfg.at("domain").is_null()) fc.mesh.domain = domain_from(cfg.at("domain"), "domain");
  fc.weight_floor = get<double>(cfg, "weight_floor");
  if (!(fc.weight_floor >= 0)) throw ConfigError("weight_floor: must be >= 0");
  fc.ridge_factor = get<double>(cfg, "ridge_factor");
  if (!(fc.ridge_factor > 0)) throw ConfigError("ridge_factor: must be > 0");
  fc.solver.tol = get<double>(cfg, "tol");
  if (!(fc.solver.tol > 0)) throw ConfigError("tol: must be > 0");
  fc.solver.kkt_tol = get<double>(cfg, "kkt_tol");
  if (!(fc.solver.kkt_tol > 0)) throw ConfigError("kkt_tol: must be > 0");
  fc.solver.max_iter = get<int>(cfg, "max_iter");
  if (fc.solver.max_iter < 1) throw ConfigError("max_iter: must be >= 1");
  fc.threads = get<int>(cfg, "threads");
  if (fc.threads < 0) throw ConfigError("threads: must be >= 0");
  fc.validate();
  return fc;
}

BenchConfig bench_from(const json& cfg) {
  BenchConfig bc;
  bc.scenario = scenario_from(cfg);
  bc.forest = forest_from(cfg);
  bc.threads = bc.forest.threads;
  bc.forest.threads = 1;
  bc.replicates = get<int>(cfg, "replicates");
  if (bc.replicates < 1) throw ConfigError("replicates: must be >= 1");
  bc.seeds = get<std::vector<std::uint64_t>>(cfg, "seeds");
  if (bc.seeds.empty()) {
    const auto first = get<std::uint64_t>(cfg, "seed");
    for (int r = 0; r < bc.replicates; ++r) bc.seeds.push_back(first + static_cast<std::uint64_t>(r));
  }
  bc.Q_values = get<std::vector<int>>(cfg, "Q_values");
  if (bc.Q_values.empty()) throw ConfigError("Q_values: must not be empty");
  for (int q : bc.Q_values) {
    if (q < 0) throw ConfigError("Q_values: values must be >= 0");
  }
  bc.methods.clear();
  for (const auto& m : get<std::vector<std::string>>(cfg, "methods")) {
    try {
      bc.methods.push_back(parse_method(m));
    } catch (const std::exception& e) {
      throw ConfigError(std::string("methods: ") + e.what());
    }
  }
  if (bc.methods.empty()) throw ConfigError("methods: must not be empty");
  bc.settings.clear();
  const json& settings = cfg.at("settings");
  if (!settings.is_array() || settings.empty()) throw ConfigError("settings: expected a non-empty array");
  for (const auto& s : settings) {
    BenchSetting b;
    b.name = get<std::string>(s, "name");
    b.intercept_range = get<double>(s, "range");
    if (b.name.empty()) throw ConfigError("settings: name must not be empty");
    if (!(b.intercept_range > 0)) throw ConfigError("settings: range must be > 0");
    bc.settings.push_back(b);
  }
  bc.validate();
  return bc;
}

SpatialData read_data_csv(const std::string& path) {
  const CsvTable t = read_csv(path);
  const int cx = t.require("x", path), cy = t.require("y", path), cr = t.require("resp", path);
  std::vector<int> cov;
  for (int k = 1; t.column("x" + std::to_string(k)) >= 0; ++k) cov.push_back(t.column("x" + std::to_string(k)));
  if (cov.empty()) throw ParseError(path + ": need covariate columns x1, ..., xp");
  SpatialData d;
  const Eigen::Index n = t.values.rows();
  if (n < 3) throw ParseError(path + ": need at least 3 data rows, found " + std::to_string(n));
  d.X.resize(n, static_cast<Eigen::Index>(cov.size()));
  d.y = t.values.col(cr);
  for (Eigen::Index i = 0; i < n; ++i) {
    d.locations.emplace_back(t.values(i, cx), t.values(i, cy));
    for (std::size_t k = 0; k < cov.size(); ++k) d.X(i, static_cast<Eigen::Index>(k)) = t.values(i, cov[k]);
  }
  d.validate();
  return d;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Spatially clustered coefficient regression with a smooth spatial intercept"};
  app.require_subcommand(1);
  std::string config_path;
  const std::vector<std::pair<std::string, std::string>> help_text{
      {"simulate", "Generate a synthetic dataset and its truth"},
      {"fit", "Fit the model to a data CSV (x,y,resp,x1..xp)"},
      {"eval", "Compare a fit JSON against a truth CSV"},
      {"bench", "Run the replicate benchmark table"}};
  std::vector<CLI::App*> subs;
  for (const auto& [name, text] : help_text) {
    CLI::App* sub = app.add_subcommand(name, text + "; other settings as --key value");
    sub->add_option("--config", config_path, "JSON config file");
    sub->allow_extras();
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  CLI::App* sub = nullptr;
  for (CLI::App* s : subs) {
    if (s->parsed()) sub = s;
  }
  const std::string command = sub->get_name();
  try {
    std::vector<std::pair<std::string, std::string>> flags;
    const std::vector<std::string> rest = sub->remaining();
    for (std::size_t i = 0; i < rest.size(); ++i) {
      const std::string& tok = rest[i];
      if (tok.rfind("--", 0) != 0 || tok.size() < 3) throw ConfigError("unexpected argument '" + tok + "'");
      const auto eq = tok.find('=');
      if (eq != std::string::npos) {
        flags.emplace_back(tok.substr(2, eq - 2), tok.substr(eq + 1));
      } else {
        if (i + 1 >= rest.size()) throw ConfigError(tok + ": missing value");
        flags.emplace_back(tok.substr(2), rest[++i]);
      }
    }
    json file;
    if (!config_path.empty()) {
      try {
        file = json::parse(read_text_file(config_path));
      } catch (const json::parse_error& e) {
        throw ParseError(config_path + ": " + e.what());
      }
    }
    const json cfg = resolve_config(command, file, flags);
    if (command == "simulate") return cmd_simulate(cfg, out);
    if (command == "fit") return cmd_fit(cfg, out);
    if (command == "eval") return cmd_eval(cfg, out);
    return cmd_bench(cfg, out);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }
}

}  // namespace shaplm::cli
