#include "cli.hpp"
#include "shaplm/bench.hpp"
#include "shaplm/io.hpp"

#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace shaplm;

namespace {

struct Run {
  int code = 0;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "shaplm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Run r;
  r.code = cli::run(int(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shaplm_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Small, fast settings shared by the fit-level tests.
std::vector<std::string> small_fit_flags() {
  return {"--mesh_resolution", "1", "--degree", "3", "--n_lambda", "8", "--rho_grid", "[0.001, 0.1]"};
}

}  // namespace

TEST_CASE("csv parsing") {
  const CsvTable t = parse_csv("a,b\n1,2\n3.5,-4e-1\n");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.values(1, 1) == -0.4);
  CHECK(t.column("b") == 1);
  CHECK(t.column("c") == -1);
  CHECK_THROWS_AS(t.require("c", "f.csv"), ParseError);
  try {
    parse_csv("a,b\n1,2\n3,oops\n", "data.csv");
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_csv("a,b\n1,2,3\n"), ParseError);
  CHECK_THROWS_AS(read_csv("/nonexistent/file.csv"), std::exception);

  const fs::path dir = scratch("csv");
  Eigen::MatrixXd m(2, 2);
  m << 0.1, 1.0 / 3.0, -2e-300, 12345.678901234567;
  write_csv((dir / "m.csv").string(), {"u", "v"}, m);
  CHECK(read_csv((dir / "m.csv").string()).values == m);
}

TEST_CASE("config resolution") {
  const json cfg = cli::resolve_config("simulate", json{{"n", 50}}, {{"c", "0.5"}, {"intercept", "zero"}});
  CHECK(cfg["n"] == 50);
  CHECK(cfg["c"] == 0.5);
  CHECK(cfg["intercept"] == "zero");
  CHECK_THROWS(cli::resolve_config("simulate", json{{"bogus", 1}}, {}));
  CHECK_THROWS(cli::resolve_config("fit", json(), {{"bogus", "1"}}));
  CHECK(cli::default_config("fit")["Q"] == 10);
  CHECK(cli::bench_from(cli::default_config("bench")).Q_values == std::vector<int>{0, 5, 10, 20});
}

TEST_CASE("usage errors") {
  CHECK(cli::run(1, std::vector<const char*>{"shaplm"}.data(), std::cout, std::cerr) == cli::kUsage);
  CHECK(invoke({"nonsense"}).code == cli::kUsage);
  const Run bad = invoke({"simulate", "--c", "1.5", "--out", scratch("bad_c").string()});
  CHECK(bad.code == cli::kUsage);
  CHECK(bad.err.find("c:") != std::string::npos);
  CHECK(invoke({"simulate", "--n"}).code == cli::kUsage);
  CHECK(invoke({"fit"}).err.find("data") != std::string::npos);
}

TEST_CASE("simulate is reproducible") {
  const fs::path a = scratch("sim_a"), b = scratch("sim_b");
  REQUIRE(invoke({"simulate", "--n", "40", "--seed", "3", "--out", a.string()}).code == 0);
  REQUIRE(invoke({"simulate", "--n=40", "--seed=3", "--out=" + b.string()}).code == 0);
  for (const char* f : {"data.csv", "truth.csv"}) {
    CHECK(read_text_file((a / f).string()) == read_text_file((b / f).string()));
  }
  const CsvTable data = read_csv((a / "data.csv").string());
  CHECK(data.values.rows() == 40);
  CHECK(data.header == std::vector<std::string>{"x", "y", "resp", "x1", "x2"});
  const CsvTable truth = read_csv((a / "truth.csv").string());
  CHECK(truth.header == std::vector<std::string>{"x", "y", "g", "beta1", "beta2", "label1", "label2"});
  CHECK(fs::exists(a / "simulate_config.json"));

  // The snapshot reproduces the run.
  const fs::path c = scratch("sim_c");
  REQUIRE(invoke({"simulate", "--config", (a / "simulate_config.json").string(), "--out", c.string()}).code == 0);
  CHECK(read_text_file((a / "data.csv").string()) == read_text_file((c / "data.csv").string()));
}

TEST_CASE("fit, eval and their outputs") {
  const fs::path dir = scratch("fit");
  REQUIRE(invoke({"simulate", "--n", "60", "--seed", "2", "--out", dir.string()}).code == 0);
  const std::string data = (dir / "data.csv").string();
  const std::string before = read_text_file(data);

  const fs::path sh = dir / "shaplm";
  auto args = std::vector<std::string>{"fit", "--data", data, "--out", sh.string(), "--grid_resolution", "5", "--Q", "1"};
  for (const auto& f : small_fit_flags()) args.push_back(f);
  const Run fit = invoke(args);
  INFO(fit.err);
  REQUIRE(fit.code == 0);
  CHECK(read_text_file(data) == before);
  const json fj = json::parse(read_text_file((sh / "fit.json").string()));
  CHECK(fj["schema"] == 1);
  CHECK(fj["clusters"].size() == 2);
  CHECK(fj.contains("lambda_star"));
  CHECK(fj.contains("rho_star"));
  CHECK(read_csv((sh / "g_grid.csv").string()).values.rows() == 25);
  CHECK(read_csv((sh / "clusters.csv").string()).header.size() == 4);
  CHECK(fs::exists(sh / "mbic.csv"));
  CHECK(fs::exists(sh / "bic.csv"));
  CHECK(fs::exists(sh / "fit_config.json"));

  const fs::path ps = dir / "psccm";
  args = {"fit", "--data", data, "--out", ps.string(), "--mode", "psccm", "--grid_resolution", "5", "--Q", "1"};
  for (const auto& f : small_fit_flags()) args.push_back(f);
  REQUIRE(invoke(args).code == 0);
  CHECK(fs::exists(ps / "mbic.csv"));
  CHECK_FALSE(fs::exists(ps / "bic.csv"));
  CHECK(read_csv((ps / "clusters.csv").string()).header.back() == "cluster_intercept");

  // eval matches a direct metrics computation.
  const fs::path ev = dir / "eval";
  REQUIRE(invoke({"eval", "--fit", (sh / "fit.json").string(), "--truth", (dir / "truth.csv").string(), "--out", ev.string()}).code == 0);
  const json mj = json::parse(read_text_file((ev / "metrics.json").string()));
  const CsvTable truth = read_csv((dir / "truth.csv").string());
  Eigen::MatrixXd tb(60, 2), eb(60, 2);
  for (int i = 0; i < 60; ++i) {
    for (int k = 0; k < 2; ++k) {
      tb(i, k) = truth.values(i, 3 + k);
      eb(i, k) = fj["beta_hat"][i][k].get<double>();
    }
  }
  CHECK(mj["mse_beta"].get<double>() == doctest::Approx(mse_beta(tb, eb)).epsilon(1e-12));
  CHECK(mj["rand_index"].size() == 2);

  // The truth scored against itself.
  json self = fj;
  for (int i = 0; i < 60; ++i) {
    for (int k = 0; k < 2; ++k) self["beta_hat"][i][k] = truth.values(i, 3 + k);
    self["g_fitted"][i] = truth.values(i, 2);
    for (int k = 0; k < 2; ++k) self["clusters"][k][i] = int(truth.values(i, 5 + k));
  }
  write_text_file((dir / "self.json").string(), self.dump());
  REQUIRE(invoke({"eval", "--fit", (dir / "self.json").string(), "--truth", (dir / "truth.csv").string(), "--out", ev.string()}).code == 0);
  const json sm = json::parse(read_text_file((ev / "metrics.json").string()));
  CHECK(sm["mse_beta"] == 0.0);
  CHECK(sm["mse_g"] == 0.0);
  CHECK(sm["rand_index"][0] == 1.0);
  CHECK(sm["rand_index"][1] == 1.0);

  // Missing truth columns.
  write_text_file((dir / "short.csv").string(), "x,y,g\n0,0,0\n");
  CHECK(invoke({"eval", "--fit", (sh / "fit.json").string(), "--truth", (dir / "short.csv").string(), "--out", ev.string()}).code == cli::kUsage);
}

TEST_CASE("fit reports malformed input by line") {
  const fs::path dir = scratch("malformed");
  write_text_file((dir / "bad.csv").string(), "x,y,resp,x1\n0,0,1,1\n1,0,2,1\n0,1,x,1\n1,1,3,1\n");
  const Run r = invoke({"fit", "--data", (dir / "bad.csv").string(), "--out", dir.string()});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("line 4") != std::string::npos);
  write_text_file((dir / "nocov.csv").string(), "x,y,resp\n0,0,1\n1,0,2\n0,1,3\n");
  CHECK(invoke({"fit", "--data", (dir / "nocov.csv").string(), "--out", dir.string()}).code == cli::kUsage);
}

std::vector<std::vector<std::string>> split_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

TEST_CASE("bench table") {
  const fs::path a = scratch("bench_a"), b = scratch("bench_b");
  std::vector<std::string> args{"bench", "--replicates", "1", "--Q_values", "[0]", "--n", "50"};
  for (const auto& f : small_fit_flags()) args.push_back(f);
  auto run_in = [&](const fs::path& dir) {
    auto full = args;
    full.push_back("--out");
    full.push_back(dir.string());
    return invoke(full);
  };
  const Run r = run_in(a);
  INFO(r.err);
  REQUIRE(r.code == 0);
  const auto rows = split_csv(read_text_file((a / "bench.csv").string()));
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == bench_header({{"weak", 1.0}, {"strong", 10.0}}, 2));
  CHECK(rows[1][0] == "psccm");
  CHECK(rows[2][0] == "shaplm");
  CHECK(rows[1][1] == "0");
  CHECK(rows[2].back() == "0");
  CHECK(fs::exists(a / "bench_replicates.csv"));
  CHECK(fs::exists(a / "bench_config.json"));

  REQUIRE(run_in(b).code == 0);
  CHECK(read_text_file((a / "bench.csv").string()) == read_text_file((b / "bench.csv").string()));
}
