#include <cdsc/experiments.hpp>

#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

using namespace cdsc;
namespace fs = std::filesystem;

namespace {

ExperimentTable sample_table() {
  ExperimentTable t;
  t.name = "sample";
  t.title = "Sample";
  t.row_header = "method";
  t.columns = {"sigma=10", "sigma=20"};
  t.rows = {"A", "B, with comma"};
  t.values = {{30.123456, 28.5}, {std::nan(""), 27.25}};
  t.reference_columns = {"sigma=10"};
  t.reference = {{33.57}, {std::nullopt}};
  return t;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::stringstream s(line);
  std::string item;
  while (std::getline(s, item, sep)) out.push_back(item);
  return out;
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(' ');
  const auto b = s.find_last_not_of(' ');
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

}  // namespace

TEST_CASE("RunConfig: JSON round trip and the shipped config file") {
  const RunConfig d = default_config();
  const RunConfig back = RunConfig::from_json(d.to_json());
  CHECK(back.to_json() == d.to_json());

  std::ifstream in(fs::path(CDSC_SOURCE_DIR) / "config" / "default.json");
  REQUIRE(in);
  nlohmann::json shipped;
  in >> shipped;
  CHECK(RunConfig::from_json(shipped, RunConfig{}).to_json() == d.to_json());
}

TEST_CASE("RunConfig: partial files keep defaults, unknown keys and bad types are rejected") {
  const RunConfig c = RunConfig::from_json(nlohmann::json{{"seed", 7}, {"solver", {{"beta", 0.5}}}});
  CHECK(c.seed == 7);
  CHECK(c.denoise.solver.beta == 0.5);
  CHECK(c.sr.solver.beta == 0.5);
  CHECK(c.denoise.solver.seed == 7);
  CHECK(c.denoise.global_atoms == default_config().denoise.global_atoms);

  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"sead", 7}}), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"solver", {{"betta", 0.5}}}}), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"denoise", {{"lambda_scale", {{"sc_xx", 1}}}}}}), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"seed", "seven"}}), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"solver", 3}}), InvalidArgument);
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json{{"workers", 0}}), InvalidArgument);
  try {
    RunConfig::from_json(nlohmann::json{{"sr", {{"radius", 3}}}});
    FAIL("expected an error");
  } catch (const InvalidArgument& e) {
    CHECK(std::string(e.what()).find("sr.radius") != std::string::npos);
  }
}

TEST_CASE("derive_seed is deterministic and separates tags") {
  CHECK(derive_seed(1, {2, 3}) == derive_seed(1, {2, 3}));
  CHECK(derive_seed(1, {2, 3}) != derive_seed(1, {3, 2}));
  CHECK(derive_seed(1, {2}) != derive_seed(2, {2}));
}

TEST_CASE("CSV and Markdown carry identical numeric content") {
  const ExperimentTable t = sample_table();
  std::ostringstream csv, md;
  write_csv(t, csv);
  write_markdown(t, md);
  CHECK(csv.str() ==
        "method,sigma=10,sigma=20,published sigma=10\n"
        "A,30.1235,28.5000,33.5700\n"
        "\"B, with comma\",nan,27.2500,\n");

  std::vector<std::vector<std::string>> md_rows;
  std::istringstream lines(md.str());
  std::string line;
  while (std::getline(lines, line)) {
    if (line.empty() || line[0] != '|' || line.find("---") != std::string::npos) continue;
    auto cells = split(line.substr(1), '|');
    for (auto& c : cells) c = trim(c);
    md_rows.push_back(cells);
  }
  REQUIRE(md_rows.size() == 3);
  CHECK(md_rows[1] == std::vector<std::string>{"A", "30.1235", "28.5000", "33.5700"});
  CHECK(md_rows[2] == std::vector<std::string>{"B, with comma", "nan", "27.2500", ""});
  CHECK(t.at("A", "sigma=20") == 28.5);
  CHECK_THROWS_AS(t.at("C", "sigma=20"), InvalidArgument);
}

TEST_CASE("run_queue places results by index and captures errors") {
  for (int workers : {1, 3}) {
    std::vector<int> out(20, -1);
    const auto errors = run_queue(20, workers, [&](std::size_t i) {
      if (i == 7) throw InvalidArgument("seven");
      out[i] = static_cast<int>(i * i);
    });
    for (std::size_t i = 0; i < 20; ++i) {
      if (i == 7) {
        CHECK(errors[i] == "seven");
        CHECK(out[i] == -1);
      } else {
        CHECK(errors[i].empty());
        CHECK(out[i] == static_cast<int>(i * i));
      }
    }
  }
  CHECK(run_queue(0, 4, [](std::size_t) {}).empty());
}

TEST_CASE("exit codes follow the contract") {
  ExperimentResult r;
  r.checks = {{"a", true}};
  CHECK(r.exit_code() == 0);
  r.checks.push_back({"b", false});
  CHECK(r.exit_code() == 2);
  r.cells.push_back({"row", "col", "img", 0.0, 0.0, "boom"});
  CHECK(r.exit_code() == 1);
}

TEST_CASE("table names and best scale selection") {
  CHECK(parse_table("table3") == TableId::table3);
  CHECK_THROWS_AS(parse_table("table5"), InvalidArgument);

  ExperimentTable tune;
  tune.rows = {"ksvd_g", "sc_lw"};
  tune.columns = {"2", "3", "4"};
  tune.values = {{29.0, 29.5, 29.4}, {28.0, 28.0, 28.1}};
  const LambdaScales best = best_scales(tune, LambdaScales{});
  CHECK(best.ksvd_g == 3.0);
  CHECK(best.sc_lw == 4.0);
  CHECK(best.ksvd_s == 1.0);
}

TEST_CASE("sha256 matches the published test vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  Image a(3, 2, 1.0);
  Image b = a;
  CHECK(sha256_image(a) == sha256_image(b));
  b(1, 2) = 1.0000000001;
  CHECK(sha256_image(a) != sha256_image(b));
}

TEST_CASE("write_experiment emits every artifact") {
  ExperimentResult r;
  r.table = sample_table();
  r.checks = {{"ok", true}};
  r.cells = {{"A", "sigma=10", "img", 30.1, 1.5, ""}, {"B, with comma", "sigma=10", "img", 0.0, 0.1, "failed"}};
  const fs::path dir = fs::temp_directory_path() / "cdsc_experiment_test";
  fs::remove_all(dir);
  write_experiment(r, default_config(), dir);
  for (const char* f : {"sample.csv", "sample.md", "sample_cells.csv", "sample_timing.csv", "sample_checks.json",
                        "sample_config.json", "sample_failures.json"})
    CHECK(fs::exists(dir / f));
  std::ifstream checks(dir / "sample_checks.json");
  nlohmann::json j;
  checks >> j;
  CHECK(j["exit_code"] == 1);
  fs::remove_all(dir);
}

TEST_CASE("the bundled corpus has every split") {
  const Corpus c = load_corpus(CDSC_DATA_DIR);
  CHECK(c.test.size() >= 3);
  CHECK(!c.train.empty());
  CHECK(!c.tune.empty());
  CHECK(!c.sr.empty());
  for (const auto& t : c.test) {
    CHECK(t.image.width() == 128);
    CHECK(t.image.height() == 128);
  }
  CHECK_THROWS_AS(load_corpus("/nonexistent/cdsc"), IoError);
}
