#pragma once

#include <cdsc/pipelines.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cdsc {

// --- data -------------------------------------------------------------------------

struct NamedImage {
  std::string name;  // file stem
  Image image;
};

/// Every .pgm / .png file of a directory, sorted by file name.
std::vector<NamedImage> load_image_dir(const std::filesystem::path& dir);

/// The bundled layout: test/, train/, tune/ and sr/ (high-resolution truth).
struct Corpus {
  std::vector<NamedImage> test;
  std::vector<NamedImage> train;
  std::vector<NamedImage> tune;
  std::vector<NamedImage> sr;

  std::vector<Image> train_images() const;
};

Corpus load_corpus(const std::filesystem::path& data_dir);

// --- configuration ----------------------------------------------------------------

/// How external dictionaries are learned from the training corpus.
struct ExternalTraining {
  Index pool_size = 20000;
  int ksvd_iterations = 20;
  int knn_iterations = 100;
  Index sr_pairs = 20000;
  int coupled_iterations = 20;
};

struct ExperimentGrid {
  std::vector<double> sigmas{10, 20, 30, 40, 50};
  std::vector<double> r_values{0, 1, 3, 4, 7, 9, 15};
  Index total_atoms = 160;
  double table1_sigma = 10;
};

/// Everything a run depends on. All randomness derives from `seed`.
struct RunConfig {
  std::uint64_t seed = 1;
  /// Empty means the data directory compiled into the build.
  std::string data_dir;
  int workers = 1;
  ExternalTraining external;
  DenoiseParams denoise;
  SrParams sr;
  ExperimentGrid grid;

  /// Copies the top-level seed and the shared solver settings into the
  /// pipeline parameter blocks.
  void resolve();
  std::filesystem::path data_path() const;

  nlohmann::json to_json() const;
  /// Missing keys keep the value from `base` (the shipped defaults when
  /// omitted); unknown keys throw InvalidArgument.
  static RunConfig from_json(const nlohmann::json& json, const RunConfig& base);
  static RunConfig from_json(const nlohmann::json& json);
  static RunConfig load(const std::filesystem::path& path, const RunConfig& base);
  static RunConfig load(const std::filesystem::path& path);
};

/// The shipped defaults (config/default.json mirrors them).
RunConfig default_config();

/// Deterministic sub-seed for a (top seed, tag...) tuple.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

/// Noisy copy of test image `image_index` at `sigma`, seeded from the run seed.
Image noisy_test_image(const RunConfig& config, std::size_t image_index, const Image& clean, double sigma);

// --- external dictionaries --------------------------------------------------------

ExamplePool external_pool(const RunConfig& config, const Corpus& corpus);
BaseDictionary train_global_ksvd(const RunConfig& config, const ExamplePool& pool, Index atoms);
BaseDictionary train_global_knn(const RunConfig& config, const ExamplePool& pool, Index atoms);
CoupledDictionaryPair train_global_pair(const RunConfig& config, const Corpus& corpus);

// --- tables -----------------------------------------------------------------------

struct ExperimentTable {
  std::string name;        // table1 ... table4, tune
  std::string title;
  std::string row_header;  // first CSV column
  std::vector<std::string> columns;
  std::vector<std::string> rows;
  /// values[row][column]; NaN marks a failed cell.
  std::vector<std::vector<double>> values;
  /// Published numbers shown beside ours; names get a "published " prefix.
  std::vector<std::string> reference_columns;
  std::vector<std::vector<std::optional<double>>> reference;

  double at(std::string_view row, std::string_view column) const;
};

void write_csv(const ExperimentTable& table, std::ostream& out);
void write_markdown(const ExperimentTable& table, std::ostream& out);

struct TrendCheck {
  std::string description;
  bool passed = false;
};

struct CellRecord {
  std::string row, column, image;
  double psnr = 0.0;
  double seconds = 0.0;
  std::string error;  // empty on success
};

struct ExperimentResult {
  ExperimentTable table;
  std::vector<TrendCheck> checks;
  std::vector<CellRecord> cells;

  bool failed_cells() const;
  bool checks_passed() const;
  /// 0 success, 2 a trend check failed, 1 a cell failed to execute.
  int exit_code() const;
};

enum class TableId { table1, table2, table3, table4 };
std::string_view to_string(TableId id);
TableId parse_table(std::string_view name);

/// Runs the full grid of one table over the corpus test (or sr) images.
ExperimentResult run_experiment(TableId id, const RunConfig& config, const Corpus& corpus);

/// Writes <name>.csv, <name>.md, <name>_cells.csv, <name>_timing.csv,
/// <name>_checks.json and, when cells failed, <name>_failures.json.
void write_experiment(const ExperimentResult& result, const RunConfig& config, const std::filesystem::path& dir);

/// Lambda-scale search on the tune images: one row per method, one column per
/// candidate scale, values are the mean PSNR over `sigmas`.
ExperimentTable tune_lambda_scales(const RunConfig& config, const Corpus& corpus, const std::vector<double>& scales,
                                   const std::vector<double>& sigmas);
/// Best scale per method (row) of a tune table.
LambdaScales best_scales(const ExperimentTable& tune, const LambdaScales& fallback);

/// Omega grid search for SC FW on the tune images over pairs with
/// omega_specific > omega_global; rows omega_global, columns omega_specific.
ExperimentTable tune_omegas(const RunConfig& config, const Corpus& corpus, const std::vector<double>& omegas,
                            double sigma);

/// lambda_E search for super-resolution: each tuning image is downscaled and
/// restored; rows are methods, columns candidate lambda_E values.
ExperimentTable tune_sr_lambdas(const RunConfig& config, const Corpus& corpus, const std::vector<double>& lambdas);

/// Runs job(i) for i in [0, count) over `workers` threads; results are placed
/// by index so the outcome does not depend on scheduling. Exceptions are
/// captured per index.
std::vector<std::string> run_queue(std::size_t count, int workers, const std::function<void(std::size_t)>& job);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_image(const Image& image);

}  // namespace cdsc
