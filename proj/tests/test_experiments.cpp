#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "twoport/experiments/artifacts.hpp"

using namespace twoport;
using namespace twoport::experiments;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("twoport_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentConfig small_scan() {
  ExperimentConfig c;
  c.experiment = Experiment::kFimScan;
  c.n_grid = {10.0, 100.0, 1000.0, 10000.0};
  c.k = {{0.5, 0.5, 0.0}, {1.0, 0.5, 0.3}};
  return c;
}

}  // namespace

TEST_CASE("configuration survives a serialize / parse round trip") {
  ExperimentConfig c = small_scan();
  c.truth_sweep = {{0.3, 0.8, 0.5}, {1.1, 2.0, 1.4}};
  c.master_seed = 18446744073709551557ULL;
  c.n_grid = {0.1, 1.0 / 3.0, 7.25};
  CHECK(parse_config(serialize(c)) == c);
  CHECK(parse_config(serialize(ExperimentConfig{})) == ExperimentConfig{});
  CHECK(parse_config("{}") == ExperimentConfig{});
}

TEST_CASE("invalid configurations are rejected") {
  CHECK_THROWS_AS(parse_config("{not json"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"n_grid": [10, 10]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"n_grid": []})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"m_grid": [20, 10]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"beta": 1.0})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"beta": "half"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"experiment": "nope"})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"k": [[1, 2]]})"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"trials": 1})"), ConfigError);
  CHECK_THROWS_AS(parse_config("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("config hash ignores output location and thread count") {
  ExperimentConfig a = small_scan(), b = a;
  b.output_dir = "elsewhere";
  b.threads = 8;
  CHECK(config_hash(a) == config_hash(b));
  b.master_seed += 1;
  CHECK(config_hash(a) != config_hash(b));
}

TEST_CASE("fim-scan approaches the plateau") {
  const ResultTable t = run_fim_scan(small_scan());
  REQUIRE(t.rows.size() == 4);
  REQUIRE(t.columns.size() == 5);
  const auto& last = t.rows.back();
  CHECK_THAT(last[2], Catch::Matchers::WithinRel(10.0, 1e-12));
  CHECK(std::abs(last[1] - 10.0) / 10.0 < 0.02);
  CHECK(std::abs(last[3] - last[4]) / last[4] < 0.02);
  for (const auto& row : t.rows) CHECK(row.size() == t.columns.size());
}

TEST_CASE("fim-scan refuses singular tuning constants") {
  ExperimentConfig c = small_scan();
  c.k = {{1.0, -1.0, 0.3}};
  try {
    run_fim_scan(c);
    FAIL("expected SingularConfiguration");
  } catch (const SingularConfiguration& e) {
    CHECK(std::string(e.what()).find("singular-antisymmetric") != std::string::npos);
  }
}

TEST_CASE("single-point grid gives a single row") {
  ExperimentConfig c = small_scan();
  c.n_grid = {50.0};
  CHECK(run_fim_scan(c).rows.size() == 1);
  c.experiment = Experiment::kMleVsM;
  c.m_grid = {20};
  c.trials = 10;
  CHECK(run_mle_vs_m(c).rows.size() == 1);
}

TEST_CASE("fim-diag plateaus are the reciprocal inverse diagonal") {
  ExperimentConfig c = small_scan();
  c.experiment = Experiment::kFimDiag;
  c.k = {{0.5, 0.5, 0.0}};
  const ResultTable t = run_fim_diag(c);
  REQUIRE(t.columns.size() == 9);
  const std::vector<double> expected{1.0, 0.25, 0.25, 1.0};
  for (int i = 0; i < 4; ++i) {
    CHECK_THAT(t.rows.back()[5 + i], Catch::Matchers::WithinRel(expected[i], 1e-9));
    CHECK(std::abs(t.rows.back()[1 + i] - expected[i]) / expected[i] < 0.02);
  }
}

TEST_CASE("fim-diag residual halves when N doubles") {
  ExperimentConfig c = small_scan();
  c.experiment = Experiment::kFimDiag;
  c.n_grid = {2000.0, 4000.0};
  const ResultTable t = run_fim_diag(c);
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 4; ++i) {
      const int col = 1 + 8 * j + i;
      const double r0 = t.rows[0][col] - t.rows[0][col + 4];
      const double r1 = t.rows[1][col] - t.rows[1][col + 4];
      if (j == 0 && i == 1) {
        // At k1 = k2, k3 = 0 the phi1 entry has no 1/N term; the residual
        // falls as 1/N^2.
        CHECK_THAT(r0 / r1, Catch::Matchers::WithinAbs(4.0, 0.1));
      } else {
        CHECK_THAT(r0 / r1, Catch::Matchers::WithinAbs(2.0, 0.1));
      }
    }
  }
}

TEST_CASE("singularity scan classifies the loci") {
  ExperimentConfig c;
  c.experiment = Experiment::kSingularityScan;
  c.k1_grid = {-1.0, -0.5, 0.0, 0.5, 1.0};
  c.k2_grid = {-1.0, 0.0, 0.5, 1.0};
  c.k3_grid = {0.0};
  const ResultTable t = run_singularity_scan(c);
  REQUIRE(t.rows.size() == 20);
  for (const auto& row : t.rows) {
    const double k1 = row[0], k2 = row[1];
    const bool anti = k1 + k2 == 0.0;
    const bool axis = k1 * k2 == 0.0;  // the quadric at k3 = 0
    const int expected = anti && axis ? 3 : anti ? 1 : axis ? 2 : 0;
    CHECK(static_cast<int>(row[5]) == expected);
    if (expected != 0) {
      CHECK(row[3] == 0.0);
      CHECK(std::abs(row[4]) < 1e-10);
    } else {
      CHECK(row[3] > 0.0);
      CHECK(row[4] > 1e-3);
    }
  }
}

TEST_CASE("CSV round trip reproduces the table exactly") {
  const ResultTable t = run_fim_scan(small_scan());
  const std::string text = to_csv(t);
  CHECK(text.find('\r') == std::string::npos);
  const CsvContent back = parse_csv(text);
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);
  CHECK(back.comments == t.provenance);
  bool has_hash = false, has_seed = false, has_version = false;
  for (const auto& line : back.comments) {
    has_hash |= line.rfind("config_hash: ", 0) == 0;
    has_seed |= line.rfind("master_seed: ", 0) == 0;
    has_version |= line.rfind("version: ", 0) == 0;
  }
  CHECK((has_hash && has_seed && has_version));
}

TEST_CASE("embedded configuration parses back to the run configuration") {
  ExperimentConfig c = small_scan();
  const ResultTable t = run_fim_scan(c);
  for (const auto& line : t.provenance) {
    if (line.rfind("config: ", 0) == 0) {
      ExperimentConfig back = parse_config(line.substr(8));
      back.output_dir = c.output_dir;
      back.threads = c.threads;
      CHECK(back == c);
    }
  }
}

TEST_CASE("empty table gives a header-only CSV and an axes-only SVG") {
  ResultTable t;
  t.name = "empty";
  t.columns = {"N", "value"};
  t.series = {1};
  CHECK(to_csv(t) == "N,value\n");
  const std::string svg = to_svg(t);
  CHECK(svg.find("<svg") == 0);
  CHECK(svg.find("<polyline") == std::string::npos);
  CHECK(svg.find("</svg>") != std::string::npos);
}

TEST_CASE("SVG uses a log axis for positive x and is deterministic") {
  const ResultTable t = run_fim_scan(small_scan());
  const std::string a = to_svg(t), b = to_svg(t);
  CHECK(a == b);
  CHECK(a.find("N (log)") != std::string::npos);
  CHECK(a.find("n2_trace_k0") != std::string::npos);
  std::size_t lines = 0;
  for (std::size_t p = a.find("<polyline"); p != std::string::npos; p = a.find("<polyline", p + 1)) ++lines;
  CHECK(lines == t.series.size());
}

TEST_CASE("artifacts are written and re-runs are byte identical across thread counts") {
  ExperimentConfig c;
  c.experiment = Experiment::kMleVsM;
  c.m_grid = {10, 50};
  c.trials = 30;
  const fs::path d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
  c.threads = 1;
  const ArtifactPaths p1 = emit_artifacts(run_experiment(c), d1);
  c.threads = 4;
  const ArtifactPaths p2 = emit_artifacts(run_experiment(c), d2);
  CHECK(p1.csv.filename() == "mle-vs-m.csv");
  CHECK(read_file(p1.csv) == read_file(p2.csv));
  CHECK(read_file(p1.svg) == read_file(p2.svg));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("I/O failure leaves no partial files") {
  const fs::path base = scratch_dir("io");
  fs::create_directories(base);
  const fs::path blocker = base / "file";
  std::ofstream(blocker) << "x";
  const ResultTable t = run_fim_scan(small_scan());
  CHECK_THROWS_AS(emit_artifacts(t, blocker / "sub"), IoError);

  // A directory squatting on the SVG name makes the second write fail.
  const fs::path out = base / "out";
  fs::create_directories(out / "fim-scan.svg" / "x");
  CHECK_THROWS_AS(emit_artifacts(t, out), IoError);
  CHECK(!fs::exists(out / "fim-scan.csv"));
  CHECK(!fs::exists(out / "fim-scan.csv.partial"));
  CHECK(!fs::exists(out / "fim-scan.svg.partial"));
  fs::remove_all(base);
}

TEST_CASE("mle-vs-n sweeps truths and flags validity per row") {
  ExperimentConfig c;
  c.experiment = Experiment::kMleVsN;
  c.n_grid = {10.0, 20.0};
  c.repetitions = 50;
  c.trials = 20;
  c.truth_sweep = {{0.3, 0.8, 0.5}, {1.1, 2.0, 1.4}};
  const ResultTable t = run_mle_vs_n(c);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.rows[2][0] == 1.0);
  CHECK(t.rows[2][1] == 1.1);
  CHECK(t.columns.back() == "valid");
  c.truth_sweep.clear();
  CHECK(run_mle_vs_n(c).rows.size() == 2);
}

TEST_CASE("mle-vs-m groups rows by truth when sweeping") {
  ExperimentConfig c;
  c.experiment = Experiment::kMleVsM;
  c.m_grid = {20, 40};
  c.trials = 10;
  const ResultTable plain = run_mle_vs_m(c);
  CHECK(plain.columns.front() == "M");
  CHECK(plain.group_columns.empty());
  c.truth_sweep = {{0.3, 0.8, 0.5}, {2.2, 0.5, 2.7}};
  const ResultTable t = run_mle_vs_m(c);
  REQUIRE(t.rows.size() == 4);
  CHECK(t.columns[t.x_column] == "M");
  CHECK(t.rows[3][0] == 1.0);
  CHECK(t.rows[3][3] == 2.7);
  CHECK(t.rows[3][4] == 40.0);
  // The first truth matches the plain run row for row.
  for (std::size_t r = 0; r < 2; ++r) {
    CHECK(std::vector<double>(t.rows[r].begin() + 4, t.rows[r].end()) == plain.rows[r]);
  }
}
