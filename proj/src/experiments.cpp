#include <cdsc/experiments.hpp>

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#ifndef CDSC_DATA_DIR
#define CDSC_DATA_DIR "data"
#endif

namespace cdsc {

namespace fs = std::filesystem;

// --- data -------------------------------------------------------------------------

std::vector<NamedImage> load_image_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".pgm" || ext == ".png")) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<NamedImage> out;
  for (const auto& f : files) out.push_back({f.stem().string(), read_image(f)});
  return out;
}

std::vector<Image> Corpus::train_images() const {
  std::vector<Image> out;
  for (const auto& n : train) out.push_back(n.image);
  return out;
}

Corpus load_corpus(const fs::path& data_dir) {
  if (!fs::is_directory(data_dir)) throw IoError("data directory not found: " + data_dir.string());
  Corpus c;
  auto sub = [&](const char* name) {
    const fs::path p = data_dir / name;
    return fs::is_directory(p) ? load_image_dir(p) : std::vector<NamedImage>{};
  };
  c.test = sub("test");
  c.train = sub("train");
  c.tune = sub("tune");
  c.sr = sub("sr");
  return c;
}

// --- configuration ----------------------------------------------------------------

namespace {

using nlohmann::json;

// Reads the keys of one JSON object and rejects any it does not know.
class KeyReader {
 public:
  KeyReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) throw InvalidArgument("config: '" + path_ + "' must be an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    if (it == obj_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception&) {
      throw InvalidArgument("config: '" + name(key) + "' has the wrong type");
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    const auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  std::string name(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!seen_.count(key)) throw InvalidArgument("config: unknown key '" + name(key.c_str()) + "'");
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

json lambda_json(const LambdaScales& s) {
  return {{"ksvd_g", s.ksvd_g}, {"ksvd_s", s.ksvd_s}, {"ksvd_c", s.ksvd_c}, {"sc_fw", s.sc_fw},
          {"sc_lw", s.sc_lw},   {"method_i", s.method_i}, {"method_ii", s.method_ii}};
}

}  // namespace

void RunConfig::resolve() {
  denoise.seed = seed;
  denoise.solver.seed = seed;
  const double lg = sr.solver.lambda_global, ls = sr.solver.lambda_specific;
  sr.solver = denoise.solver;
  sr.solver.lambda_global = lg;
  sr.solver.lambda_specific = ls;
  sr.seed = seed;
}

fs::path RunConfig::data_path() const { return data_dir.empty() ? fs::path(CDSC_DATA_DIR) : fs::path(data_dir); }

nlohmann::json RunConfig::to_json() const {
  const SolverConfig& s = denoise.solver;
  return {
      {"seed", seed},
      {"data_dir", data_dir},
      {"workers", workers},
      {"external",
       {{"pool_size", external.pool_size},
        {"ksvd_iterations", external.ksvd_iterations},
        {"knn_iterations", external.knn_iterations},
        {"sr_pairs", external.sr_pairs},
        {"coupled_iterations", external.coupled_iterations}}},
      {"solver",
       {{"iterations", s.iterations},
        {"beta", s.beta},
        {"omega_global", s.omega_global},
        {"omega_specific", s.omega_specific},
        {"init_jitter", s.init_jitter},
        {"max_halvings", s.max_halvings},
        {"early_exit_tolerance", s.early_exit_tolerance}}},
      {"denoise",
       {{"patch_side", denoise.patch_side},
        {"global_atoms", denoise.global_atoms},
        {"specific_atoms", denoise.specific_atoms},
        {"target_sparsity", denoise.target_sparsity},
        {"internal_ksvd_iterations", denoise.internal_ksvd_iterations},
        {"lambda_ratio", denoise.lambda_ratio},
        {"lambda_scale", lambda_json(denoise.lambda_scale)}}},
      {"sr",
       {{"factor", sr.factor},
        {"patch_side", sr.patch_side},
        {"window_radius", sr.window_radius},
        {"global_atoms", sr.global_atoms},
        {"specific_atoms", sr.specific_atoms},
        {"target_sparsity", sr.target_sparsity},
        {"internal_ksvd_iterations", sr.internal_ksvd_iterations},
        {"min_feature_norm", sr.min_feature_norm},
        {"lambda_global", sr.lambda_global},
        {"lambda_ratio", sr.lambda_ratio}}},
      {"grid",
       {{"sigmas", grid.sigmas},
        {"r_values", grid.r_values},
        {"total_atoms", grid.total_atoms},
        {"table1_sigma", grid.table1_sigma}}},
  };
}

RunConfig RunConfig::from_json(const nlohmann::json& j, const RunConfig& base) {
  RunConfig c = base;
  KeyReader top(j, "");
  top.get("seed", c.seed);
  top.get("data_dir", c.data_dir);
  top.get("workers", c.workers);
  if (const json* e = top.child("external")) {
    KeyReader r(*e, "external");
    r.get("pool_size", c.external.pool_size);
    r.get("ksvd_iterations", c.external.ksvd_iterations);
    r.get("knn_iterations", c.external.knn_iterations);
    r.get("sr_pairs", c.external.sr_pairs);
    r.get("coupled_iterations", c.external.coupled_iterations);
    r.finish();
  }
  if (const json* e = top.child("solver")) {
    KeyReader r(*e, "solver");
    SolverConfig& s = c.denoise.solver;
    r.get("iterations", s.iterations);
    r.get("beta", s.beta);
    r.get("omega_global", s.omega_global);
    r.get("omega_specific", s.omega_specific);
    r.get("init_jitter", s.init_jitter);
    r.get("max_halvings", s.max_halvings);
    r.get("early_exit_tolerance", s.early_exit_tolerance);
    r.finish();
  }
  if (const json* e = top.child("denoise")) {
    KeyReader r(*e, "denoise");
    DenoiseParams& d = c.denoise;
    r.get("patch_side", d.patch_side);
    r.get("global_atoms", d.global_atoms);
    r.get("specific_atoms", d.specific_atoms);
    r.get("target_sparsity", d.target_sparsity);
    r.get("internal_ksvd_iterations", d.internal_ksvd_iterations);
    r.get("lambda_ratio", d.lambda_ratio);
    if (const json* l = r.child("lambda_scale")) {
      KeyReader ls(*l, "denoise.lambda_scale");
      ls.get("ksvd_g", d.lambda_scale.ksvd_g);
      ls.get("ksvd_s", d.lambda_scale.ksvd_s);
      ls.get("ksvd_c", d.lambda_scale.ksvd_c);
      ls.get("sc_fw", d.lambda_scale.sc_fw);
      ls.get("sc_lw", d.lambda_scale.sc_lw);
      ls.get("method_i", d.lambda_scale.method_i);
      ls.get("method_ii", d.lambda_scale.method_ii);
      ls.finish();
    }
    r.finish();
  }
  if (const json* e = top.child("sr")) {
    KeyReader r(*e, "sr");
    SrParams& s = c.sr;
    r.get("factor", s.factor);
    r.get("patch_side", s.patch_side);
    r.get("window_radius", s.window_radius);
    r.get("global_atoms", s.global_atoms);
    r.get("specific_atoms", s.specific_atoms);
    r.get("target_sparsity", s.target_sparsity);
    r.get("internal_ksvd_iterations", s.internal_ksvd_iterations);
    r.get("min_feature_norm", s.min_feature_norm);
    r.get("lambda_global", s.lambda_global);
    r.get("lambda_ratio", s.lambda_ratio);
    r.finish();
  }
  if (const json* e = top.child("grid")) {
    KeyReader r(*e, "grid");
    r.get("sigmas", c.grid.sigmas);
    r.get("r_values", c.grid.r_values);
    r.get("total_atoms", c.grid.total_atoms);
    r.get("table1_sigma", c.grid.table1_sigma);
    r.finish();
  }
  top.finish();
  if (c.workers < 1) throw InvalidArgument("config: workers must be >= 1");
  c.resolve();
  return c;
}

RunConfig RunConfig::load(const fs::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return from_json(j, base);
}

RunConfig RunConfig::from_json(const nlohmann::json& j) { return from_json(j, default_config()); }

RunConfig RunConfig::load(const fs::path& path) { return load(path, default_config()); }

RunConfig default_config() {
  RunConfig c;
  c.denoise.lambda_ratio = 0.7;
  c.denoise.lambda_scale = {3.25, 2.5, 4.0, 3.5, 3.5, 7.0, 8.0};
  c.denoise.solver.omega_global = 0.04;
  c.denoise.solver.omega_specific = 0.12;
  c.sr.lambda_global = 0.2;
  c.resolve();
  return c;
}

std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

namespace {

enum SeedTag : std::uint64_t { kNoise = 1, kPool, kKsvd, kKnn, kPairs, kCoupled };

std::uint64_t sigma_tag(double sigma) { return static_cast<std::uint64_t>(std::llround(sigma * 1000.0)); }

}  // namespace

Image noisy_test_image(const RunConfig& config, std::size_t image_index, const Image& clean, double sigma) {
  return add_gaussian_noise(clean, sigma, derive_seed(config.seed, {kNoise, image_index, sigma_tag(sigma)}));
}

// --- external dictionaries --------------------------------------------------------

ExamplePool external_pool(const RunConfig& config, const Corpus& corpus) {
  if (corpus.train.empty()) throw InvalidArgument("the training corpus is empty");
  return sample_external_pool(corpus.train_images(), config.denoise.patch_side, config.external.pool_size,
                              derive_seed(config.seed, {kPool}));
}

BaseDictionary train_global_ksvd(const RunConfig& config, const ExamplePool& pool, Index atoms) {
  if (atoms == 0) return BaseDictionary::empty(pool.dim(), Origin::external);
  return ksvd_learn(pool, {atoms, config.denoise.target_sparsity, config.external.ksvd_iterations,
                           derive_seed(config.seed, {kKsvd, static_cast<std::uint64_t>(atoms)})});
}

BaseDictionary train_global_knn(const RunConfig& config, const ExamplePool& pool, Index atoms) {
  return knn_global_base(pool, atoms, derive_seed(config.seed, {kKnn, static_cast<std::uint64_t>(atoms)}),
                         config.external.knn_iterations);
}

CoupledDictionaryPair train_global_pair(const RunConfig& config, const Corpus& corpus) {
  if (corpus.train.empty()) throw InvalidArgument("the training corpus is empty");
  const SrParams& s = config.sr;
  const PairPool raw = sample_external_pairs(corpus.train_images(), ScaleOperators{s.factor}, s.patch_side,
                                             config.external.sr_pairs, derive_seed(config.seed, {kPairs}));
  return coupled_learn(sr_features(raw, s.min_feature_norm),
                       {s.global_atoms, s.target_sparsity, config.external.coupled_iterations,
                        derive_seed(config.seed, {kCoupled})});
}

// --- tables -----------------------------------------------------------------------

double ExperimentTable::at(std::string_view row, std::string_view column) const {
  const auto r = std::find(rows.begin(), rows.end(), row);
  const auto c = std::find(columns.begin(), columns.end(), column);
  if (r == rows.end() || c == columns.end())
    throw InvalidArgument("table " + name + " has no cell (" + std::string(row) + ", " + std::string(column) + ")");
  return values[static_cast<std::size_t>(r - rows.begin())][static_cast<std::size_t>(c - columns.begin())];
}

namespace {

std::string number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

std::vector<std::vector<std::string>> table_cells(const ExperimentTable& t) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head{t.row_header};
  head.insert(head.end(), t.columns.begin(), t.columns.end());
  for (const auto& r : t.reference_columns) head.push_back("published " + r);
  cells.push_back(head);
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    std::vector<std::string> line{t.rows[i]};
    for (double v : t.values[i]) line.push_back(number(v));
    for (std::size_t k = 0; k < t.reference_columns.size(); ++k) {
      const auto& ref = i < t.reference.size() && k < t.reference[i].size() ? t.reference[i][k] : std::nullopt;
      line.push_back(ref ? number(*ref) : "");
    }
    cells.push_back(line);
  }
  return cells;
}

}  // namespace

void write_csv(const ExperimentTable& table, std::ostream& out) {
  for (const auto& line : table_cells(table)) {
    for (std::size_t k = 0; k < line.size(); ++k) out << (k ? "," : "") << csv_field(line[k]);
    out << '\n';
  }
}

void write_markdown(const ExperimentTable& table, std::ostream& out) {
  const auto cells = table_cells(table);
  std::vector<std::size_t> width(cells.front().size(), 3);
  for (const auto& line : cells)
    for (std::size_t k = 0; k < line.size(); ++k) width[k] = std::max(width[k], line[k].size());
  auto emit = [&](const std::vector<std::string>& line) {
    out << '|';
    for (std::size_t k = 0; k < line.size(); ++k) {
      const std::string pad(width[k] - line[k].size(), ' ');
      out << ' ' << (k ? pad + line[k] : line[k] + pad) << " |";
    }
    out << '\n';
  };
  if (!table.title.empty()) out << "**" << table.title << "**\n\n";
  emit(cells.front());
  out << '|';
  for (std::size_t k = 0; k < width.size(); ++k) out << (k ? ' ' + std::string(width[k] - 1, '-') + ": |" : ' ' + std::string(width[k], '-') + " |");
  out << '\n';
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
}

bool ExperimentResult::failed_cells() const {
  return std::any_of(cells.begin(), cells.end(), [](const CellRecord& c) { return !c.error.empty(); });
}

bool ExperimentResult::checks_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const TrendCheck& c) { return c.passed; });
}

int ExperimentResult::exit_code() const {
  if (failed_cells()) return 1;
  return checks_passed() ? 0 : 2;
}

std::string_view to_string(TableId id) {
  switch (id) {
    case TableId::table1: return "table1";
    case TableId::table2: return "table2";
    case TableId::table3: return "table3";
    case TableId::table4: return "table4";
  }
  return "unknown";
}

TableId parse_table(std::string_view name) {
  for (auto t : {TableId::table1, TableId::table2, TableId::table3, TableId::table4})
    if (to_string(t) == name) return t;
  throw InvalidArgument("unknown table '" + std::string(name) + "' (expected table1, table2, table3, table4)");
}

std::vector<std::string> run_queue(std::size_t count, int workers, const std::function<void(std::size_t)>& job) {
  std::vector<std::string> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (const std::exception& e) {
        errors[i] = e.what();
        if (errors[i].empty()) errors[i] = "unknown error";
      }
    }
  };
  const auto threads = static_cast<std::size_t>(std::clamp<std::size_t>(static_cast<std::size_t>(std::max(workers, 1)), 1, std::max<std::size_t>(count, 1)));
  if (threads == 1) {
    worker();
    return errors;
  }
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  return errors;
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string sigma_label(double sigma) {
  std::ostringstream s;
  s << "sigma=" << sigma;
  return s.str();
}

std::string r_label(double r) {
  std::ostringstream s;
  s << "r=" << r;
  return s.str();
}

// A grid cell: one restoration run whose PSNR lands in (row, column) of the
// table, averaged with the other images of that cell.
struct Cell {
  std::size_t row, column;
  std::string image;
  std::function<double()> run;
};

struct Grid {
  ExperimentTable table;
  std::vector<Cell> cells;
  bool mean_over_images = true;
};

// Runs every cell and fills table values with per-(row, column) means in
// image order.
std::vector<CellRecord> execute(Grid& g, int workers) {
  std::vector<CellRecord> records(g.cells.size());
  std::vector<double> psnrs(g.cells.size(), std::numeric_limits<double>::quiet_NaN());
  const auto errors = run_queue(g.cells.size(), workers, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    psnrs[i] = g.cells[i].run();
    records[i].seconds = seconds_since(start);
  });
  const std::size_t nr = g.table.rows.size(), nc = g.table.columns.size();
  std::vector<std::vector<double>> sum(nr, std::vector<double>(nc, 0.0));
  std::vector<std::vector<int>> count(nr, std::vector<int>(nc, 0));
  std::vector<std::vector<bool>> failed(nr, std::vector<bool>(nc, false));
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    const Cell& c = g.cells[i];
    records[i].row = g.table.rows[c.row];
    records[i].column = g.table.columns[c.column];
    records[i].image = c.image;
    records[i].psnr = psnrs[i];
    records[i].error = errors[i];
    if (!errors[i].empty()) {
      failed[c.row][c.column] = true;
      continue;
    }
    sum[c.row][c.column] += psnrs[i];
    ++count[c.row][c.column];
  }
  g.table.values.assign(nr, std::vector<double>(nc, std::numeric_limits<double>::quiet_NaN()));
  for (std::size_t r = 0; r < nr; ++r)
    for (std::size_t c = 0; c < nc; ++c)
      if (!failed[r][c] && count[r][c] > 0) g.table.values[r][c] = sum[r][c] / count[r][c];
  return records;
}

// Mean over the image columns of a per-image table, written to its last column.
void fill_mean_column(ExperimentTable& t) {
  const std::size_t last = t.columns.size() - 1;
  for (auto& row : t.values) {
    double s = 0.0;
    for (std::size_t c = 0; c < last; ++c) s += row[c];
    row[last] = s / static_cast<double>(last);
  }
}

std::string fmt(double v) { return number(v); }

DenoiseJob denoise_job(const RunConfig& config, DenoiseMethod method, const Image& noisy, double sigma,
                       const Image& clean) {
  DenoiseJob job;
  job.noisy = noisy;
  job.sigma = sigma;
  job.method = method;
  job.params = config.denoise;
  job.reference = clean;
  return job;
}

const std::vector<NamedImage>& require(const std::vector<NamedImage>& images, const char* what) {
  if (images.empty()) throw InvalidArgument(std::string("no ") + what + " images in the data directory");
  return images;
}

// Published reference values.
const std::vector<std::string> kTable1Images{"Lena", "Barbara", "Boats", "House", "Peppers"};
const std::vector<std::vector<double>> kTable1{{35.57, 33.98, 33.83, 33.56, 34.93},
                                               {31.21, 30.41, 31.24, 29.43, 30.67},
                                               {35.36, 34.24, 33.62, 34.76, 34.32}};
const std::vector<double> kPublishedSigmas{10, 20, 30, 40, 50};
const std::vector<std::vector<double>> kTable2{{33.57, 30.18, 28.83, 26.43, 25.32},
                                               {34.23, 31.02, 28.94, 26.66, 25.48},
                                               {34.46, 32.24, 29.62, 26.76, 25.67},
                                               {34.83, 33.45, 30.28, 26.27, 25.32},
                                               {36.27, 34.24, 32.83, 28.76, 26.32}};
const std::vector<double> kPublishedR{0, 1, 3, 4, 7, 9, 15};
const std::vector<std::vector<double>> kTable3{{30.47, 28.48, 27.67, 26.20, 24.06}, {32.23, 30.27, 29.95, 26.82, 25.03},
                                               {35.46, 33.27, 31.80, 28.97, 26.21}, {36.27, 34.24, 32.83, 28.76, 26.32},
                                               {36.18, 34.05, 32.58, 28.94, 26.37}, {36.07, 33.84, 31.73, 28.31, 26.02},
                                               {34.57, 31.28, 30.80, 27.67, 25.83}};
const std::vector<std::string> kTable4Images{"Temple", "Train", "Leopard"};
const std::vector<std::vector<double>> kTable4{
    {25.29, 26.14, 24.14}, {26.20, 26.58, 25.32}, {21.17, 22.54, 23.04}, {26.86, 27.44, 25.62}};

std::vector<std::optional<double>> reference_by_key(const std::vector<double>& keys, const std::vector<double>& values,
                                                    const std::vector<double>& wanted) {
  std::vector<std::optional<double>> out;
  for (double w : wanted) {
    const auto it = std::find(keys.begin(), keys.end(), w);
    out.push_back(it == keys.end() ? std::nullopt : std::optional<double>(values[static_cast<std::size_t>(it - keys.begin())]));
  }
  return out;
}

std::vector<std::optional<double>> as_optional(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

// Checks that every method row beats the noisy-input row on every image.
TrendCheck beats_noisy(const std::vector<CellRecord>& cells, const std::string& noisy_row, const std::string& column_filter,
                       const std::string& description) {
  std::map<std::pair<std::string, std::string>, double> noisy;
  for (const auto& c : cells)
    if (c.row == noisy_row) noisy[{c.column, c.image}] = c.psnr;
  bool ok = true;
  for (const auto& c : cells) {
    if (c.row == noisy_row || (!column_filter.empty() && c.column != column_filter)) continue;
    const auto it = noisy.find({c.column, c.image});
    if (!c.error.empty() || it == noisy.end() || !(c.psnr > it->second)) ok = false;
  }
  return {description, ok};
}

Grid table1_grid(const RunConfig& config, const Corpus& corpus) {
  const auto& test = require(corpus.test, "test");
  Grid g;
  auto& t = g.table;
  t.name = "table1";
  t.title = "PSNR (dB) of Method I, II and III at " + sigma_label(config.grid.table1_sigma);
  t.row_header = "method";
  t.rows = {"Method I", "Method II", "Method III", "noisy input"};
  for (const auto& img : test) t.columns.push_back(img.name);
  t.columns.push_back("mean");
  t.reference_columns = kTable1Images;
  for (const auto& r : kTable1) t.reference.push_back(as_optional(r));
  g.mean_over_images = false;

  const ExamplePool pool = external_pool(config, corpus);
  std::optional<BaseDictionary> ksvd, knn;
  const auto errors = run_queue(2, config.workers, [&](std::size_t i) {
    if (i == 0) ksvd = train_global_ksvd(config, pool, config.denoise.global_atoms);
    else knn = train_global_knn(config, pool, config.denoise.global_atoms);
  });
  for (const auto& e : errors)
    if (!e.empty()) throw Error("external dictionary training failed: " + e);

  const double sigma = config.grid.table1_sigma;
  const DenoiseMethod methods[] = {DenoiseMethod::method_i, DenoiseMethod::method_ii, DenoiseMethod::method_iii};
  for (std::size_t k = 0; k < test.size(); ++k) {
    const Image& clean = test[k].image;
    for (std::size_t m = 0; m < 3; ++m)
      g.cells.push_back({m, k, test[k].name, [&config, &test, k, m, sigma, ksvd, knn, methods]() {
                           const Image& clean = test[k].image;
                           DenoiseJob job = denoise_job(config, methods[m], noisy_test_image(config, k, clean, sigma), sigma, clean);
                           job.global_ksvd = ksvd;
                           job.global_knn = knn;
                           return *denoise(job).psnr;
                         }});
    g.cells.push_back({3, k, test[k].name, [&config, &clean, k, sigma]() {
                         return psnr(clean, noisy_test_image(config, k, clean, sigma));
                       }});
  }
  return g;
}

Grid table2_grid(const RunConfig& config, const Corpus& corpus) {
  const auto& test = require(corpus.test, "test");
  Grid g;
  auto& t = g.table;
  t.name = "table2";
  t.title = "Mean PSNR (dB) of the denoising methods over the test images";
  t.row_header = "method";
  t.rows = {"KSVD G", "KSVD S", "KSVD C", "SC FW", "SC LW", "noisy input"};
  for (double s : config.grid.sigmas) t.columns.push_back(sigma_label(s));
  for (double s : config.grid.sigmas) t.reference_columns.push_back(sigma_label(s));
  for (const auto& r : kTable2) t.reference.push_back(reference_by_key(kPublishedSigmas, r, config.grid.sigmas));

  const ExamplePool pool = external_pool(config, corpus);
  const BaseDictionary ksvd = train_global_ksvd(config, pool, config.denoise.global_atoms);
  const DenoiseMethod methods[] = {DenoiseMethod::ksvd_g, DenoiseMethod::ksvd_s, DenoiseMethod::ksvd_c,
                                   DenoiseMethod::sc_fw, DenoiseMethod::sc_lw};
  for (std::size_t s = 0; s < config.grid.sigmas.size(); ++s) {
    const double sigma = config.grid.sigmas[s];
    for (std::size_t k = 0; k < test.size(); ++k) {
      for (std::size_t m = 0; m < 5; ++m)
        g.cells.push_back({m, s, test[k].name, [&config, &test, k, m, sigma, ksvd, methods]() {
                             const Image& clean = test[k].image;
                             DenoiseJob job = denoise_job(config, methods[m], noisy_test_image(config, k, clean, sigma), sigma, clean);
                             job.global_ksvd = ksvd;
                             return *denoise(job).psnr;
                           }});
      g.cells.push_back({5, s, test[k].name, [&config, &test, k, sigma]() {
                           return psnr(test[k].image, noisy_test_image(config, k, test[k].image, sigma));
                         }});
    }
  }
  return g;
}

Grid table3_grid(const RunConfig& config, const Corpus& corpus) {
  const auto& test = require(corpus.test, "test");
  Grid g;
  auto& t = g.table;
  t.name = "table3";
  t.title = "Mean PSNR (dB) of SC LW for atom ratios r = M / N with M + N = " + std::to_string(config.grid.total_atoms);
  t.row_header = "r";
  for (double r : config.grid.r_values) t.rows.push_back(r_label(r));
  t.rows.push_back("noisy input");
  for (double s : config.grid.sigmas) t.columns.push_back(sigma_label(s));
  for (double s : config.grid.sigmas) t.reference_columns.push_back(sigma_label(s));
  for (double r : config.grid.r_values) {
    const auto it = std::find(kPublishedR.begin(), kPublishedR.end(), r);
    t.reference.push_back(it == kPublishedR.end()
                              ? std::vector<std::optional<double>>(config.grid.sigmas.size())
                              : reference_by_key(kPublishedSigmas, kTable3[static_cast<std::size_t>(it - kPublishedR.begin())],
                                                 config.grid.sigmas));
  }

  const ExamplePool pool = external_pool(config, corpus);
  std::vector<Index> sizes;
  for (double r : config.grid.r_values) sizes.push_back(split_atoms(r, config.grid.total_atoms).first);
  std::vector<Index> unique = sizes;
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  std::vector<std::optional<BaseDictionary>> trained(unique.size());
  const auto errors = run_queue(unique.size(), config.workers, [&](std::size_t i) {
    trained[i] = train_global_ksvd(config, pool, unique[i]);
  });
  for (const auto& e : errors)
    if (!e.empty()) throw Error("external dictionary training failed: " + e);

  for (std::size_t s = 0; s < config.grid.sigmas.size(); ++s) {
    const double sigma = config.grid.sigmas[s];
    for (std::size_t k = 0; k < test.size(); ++k) {
      for (std::size_t ri = 0; ri < config.grid.r_values.size(); ++ri) {
        const auto [m, n] = split_atoms(config.grid.r_values[ri], config.grid.total_atoms);
        const auto which = static_cast<std::size_t>(std::find(unique.begin(), unique.end(), m) - unique.begin());
        const BaseDictionary dict = *trained[which];
        g.cells.push_back({ri, s, test[k].name, [&config, &test, k, sigma, dict, m = m, n = n]() {
                             const Image& clean = test[k].image;
                             DenoiseJob job = denoise_job(config, DenoiseMethod::sc_lw, noisy_test_image(config, k, clean, sigma), sigma, clean);
                             job.params.global_atoms = m;
                             job.params.specific_atoms = n;
                             job.global_ksvd = dict;
                             return *denoise(job).psnr;
                           }});
      }
      g.cells.push_back({config.grid.r_values.size(), s, test[k].name, [&config, &test, k, sigma]() {
                           return psnr(test[k].image, noisy_test_image(config, k, test[k].image, sigma));
                         }});
    }
  }
  return g;
}

Grid table4_grid(const RunConfig& config, const Corpus& corpus) {
  const auto& hr_images = require(corpus.sr, "sr");
  Grid g;
  auto& t = g.table;
  t.name = "table4";
  t.title = "PSNR (dB) of x" + std::to_string(config.sr.factor) + " super-resolution";
  t.row_header = "method";
  t.rows = {"Bicubic", "External pair only", "HF transfer", "Proposed"};
  for (const auto& img : hr_images) t.columns.push_back(img.name);
  t.columns.push_back("mean");
  t.reference_columns = kTable4Images;
  for (const auto& r : kTable4) t.reference.push_back(as_optional(r));
  g.mean_over_images = false;

  const CoupledDictionaryPair pair = train_global_pair(config, corpus);
  const SrMethod methods[] = {SrMethod::bicubic, SrMethod::external_only, SrMethod::hf_transfer, SrMethod::proposed};
  const ScaleOperators ops{config.sr.factor};
  for (std::size_t k = 0; k < hr_images.size(); ++k) {
    for (std::size_t m = 0; m < 4; ++m)
      g.cells.push_back({m, k, hr_images[k].name, [&config, &hr_images, k, m, pair, ops, methods]() {
                           const Image hr = crop_to_multiple(hr_images[k].image, ops.factor);
                           SrJob job;
                           job.lr_input = ops.downsample(hr);
                           job.method = methods[m];
                           job.params = config.sr;
                           job.global_pair = pair;
                           job.reference = hr;
                           return *super_resolve(job).psnr;
                         }});
  }
  return g;
}

void add_checks(TableId id, const RunConfig& config, ExperimentResult& res) {
  const ExperimentTable& t = res.table;
  auto has_column = [&](const std::string& c) { return std::find(t.columns.begin(), t.columns.end(), c) != t.columns.end(); };
  auto has_row = [&](const std::string& r) { return std::find(t.rows.begin(), t.rows.end(), r) != t.rows.end(); };
  switch (id) {
    case TableId::table1:
      res.checks.push_back(beats_noisy(res.cells, "noisy input", "", "every method beats the noisy input on every image"));
      break;
    case TableId::table2:
      for (double sigma : {10.0, 20.0}) {
        const std::string col = sigma_label(sigma);
        if (!has_column(col)) continue;
        const double g = t.at("KSVD G", col), s = t.at("KSVD S", col), c = t.at("KSVD C", col), lw = t.at("SC LW", col);
        res.checks.push_back({col + ": SC LW (" + fmt(lw) + ") >= KSVD C (" + fmt(c) + ")", lw >= c});
        res.checks.push_back({col + ": KSVD C (" + fmt(c) + ") >= max(KSVD G, KSVD S) (" + fmt(std::max(g, s)) + ") - 0.1 dB",
                              c >= std::max(g, s) - 0.1});
        res.checks.push_back(beats_noisy(res.cells, "noisy input", col, col + ": every method beats the noisy input on every image"));
      }
      break;
    case TableId::table3: {
      const std::string col = sigma_label(10);
      if (!has_column(col) || !has_row(r_label(4))) break;
      const double mid = t.at(r_label(4), col);
      for (double r : {0.0, 15.0}) {
        if (!has_row(r_label(r))) continue;
        const double v = t.at(r_label(r), col);
        res.checks.push_back({col + ": PSNR(" + r_label(r) + ") (" + fmt(v) + ") <= PSNR(r=4) (" + fmt(mid) + ") - 0.2 dB",
                              v <= mid - 0.2});
      }
      break;
    }
    case TableId::table4:
      for (std::size_t c = 0; c + 1 < t.columns.size(); ++c) {
        const double p = t.at("Proposed", t.columns[c]), b = t.at("Bicubic", t.columns[c]);
        res.checks.push_back({t.columns[c] + ": Proposed (" + fmt(p) + ") > Bicubic (" + fmt(b) + ")", p > b});
      }
      break;
  }
  (void)config;
}

}  // namespace

ExperimentResult run_experiment(TableId id, const RunConfig& config, const Corpus& corpus) {
  Grid g;
  switch (id) {
    case TableId::table1: g = table1_grid(config, corpus); break;
    case TableId::table2: g = table2_grid(config, corpus); break;
    case TableId::table3: g = table3_grid(config, corpus); break;
    case TableId::table4: g = table4_grid(config, corpus); break;
  }
  ExperimentResult res;
  res.cells = execute(g, config.workers);
  if (!g.mean_over_images) fill_mean_column(g.table);
  res.table = std::move(g.table);
  add_checks(id, config, res);
  return res;
}

void write_experiment(const ExperimentResult& result, const RunConfig& config, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string& name = result.table.name;
  auto open = [&](const std::string& file) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / file).string());
    return out;
  };
  {
    auto out = open(name + ".csv");
    write_csv(result.table, out);
  }
  {
    auto out = open(name + ".md");
    write_markdown(result.table, out);
  }
  {
    auto out = open(name + "_cells.csv");
    out << "row,column,image,psnr\n";
    for (const auto& c : result.cells)
      out << csv_field(c.row) << ',' << csv_field(c.column) << ',' << csv_field(c.image) << ','
          << (c.error.empty() ? number(c.psnr) : "nan") << '\n';
  }
  {
    auto out = open(name + "_timing.csv");
    out << "row,column,image,seconds\n";
    for (const auto& c : result.cells)
      out << csv_field(c.row) << ',' << csv_field(c.column) << ',' << csv_field(c.image) << ',' << number(c.seconds) << '\n';
  }
  {
    nlohmann::json checks = nlohmann::json::array();
    for (const auto& c : result.checks) checks.push_back({{"check", c.description}, {"passed", c.passed}});
    auto out = open(name + "_checks.json");
    out << nlohmann::json{{"table", name}, {"exit_code", result.exit_code()}, {"checks", checks}}.dump(2) << '\n';
  }
  {
    auto out = open(name + "_config.json");
    out << config.to_json().dump(2) << '\n';
  }
  if (result.failed_cells()) {
    nlohmann::json failures = nlohmann::json::array();
    for (const auto& c : result.cells)
      if (!c.error.empty()) failures.push_back({{"row", c.row}, {"column", c.column}, {"image", c.image}, {"error", c.error}});
    auto out = open(name + "_failures.json");
    out << failures.dump(2) << '\n';
  }
}

ExperimentTable tune_lambda_scales(const RunConfig& config, const Corpus& corpus, const std::vector<double>& scales,
                                   const std::vector<double>& sigmas) {
  const auto& tune = require(corpus.tune, "tune");
  if (scales.empty() || sigmas.empty()) throw InvalidArgument("tuning needs at least one scale and one sigma");
  Grid g;
  auto& t = g.table;
  t.name = "tune";
  t.title = "Mean PSNR (dB) on the tuning images per lambda scale";
  t.row_header = "method";
  const DenoiseMethod methods[] = {DenoiseMethod::ksvd_g, DenoiseMethod::ksvd_s, DenoiseMethod::ksvd_c, DenoiseMethod::sc_fw,
                                   DenoiseMethod::sc_lw, DenoiseMethod::method_i, DenoiseMethod::method_ii};
  for (auto m : methods) t.rows.emplace_back(to_string(m));
  for (double c : scales) {
    std::ostringstream s;
    s << c;
    t.columns.push_back(s.str());
  }
  const ExamplePool pool = external_pool(config, corpus);
  const BaseDictionary ksvd = train_global_ksvd(config, pool, config.denoise.global_atoms);
  const BaseDictionary knn = train_global_knn(config, pool, config.denoise.global_atoms);
  for (std::size_t m = 0; m < 7; ++m)
    for (std::size_t c = 0; c < scales.size(); ++c)
      for (std::size_t k = 0; k < tune.size(); ++k)
        for (double sigma : sigmas)
          g.cells.push_back({m, c, tune[k].name, [&config, &tune, k, m, c, sigma, &scales, ksvd, knn, methods]() {
                               const Image& clean = tune[k].image;
                               DenoiseJob job = denoise_job(config, methods[m], noisy_test_image(config, k, clean, sigma), sigma, clean);
                               const double v = scales[c];
                               job.params.lambda_scale = {v, v, v, v, v, v, v};
                               job.global_ksvd = ksvd;
                               job.global_knn = knn;
                               return *denoise(job).psnr;
                             }});
  const auto records = execute(g, config.workers);
  for (const auto& r : records)
    if (!r.error.empty()) throw Error("tuning run failed: " + r.error);
  return g.table;
}

LambdaScales best_scales(const ExperimentTable& tune, const LambdaScales& fallback) {
  LambdaScales out = fallback;
  for (std::size_t r = 0; r < tune.rows.size(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < tune.columns.size(); ++c)
      if (tune.values[r][c] > tune.values[r][best]) best = c;
    const double v = std::stod(tune.columns[best]);
    switch (parse_denoise_method(tune.rows[r])) {
      case DenoiseMethod::ksvd_g: out.ksvd_g = v; break;
      case DenoiseMethod::ksvd_s: out.ksvd_s = v; break;
      case DenoiseMethod::ksvd_c: out.ksvd_c = v; break;
      case DenoiseMethod::sc_fw: out.sc_fw = v; break;
      case DenoiseMethod::sc_lw: out.sc_lw = v; break;
      case DenoiseMethod::method_i: out.method_i = v; break;
      case DenoiseMethod::method_ii: out.method_ii = v; break;
      case DenoiseMethod::method_iii: break;
    }
  }
  return out;
}

ExperimentTable tune_omegas(const RunConfig& config, const Corpus& corpus, const std::vector<double>& omegas,
                            double sigma) {
  const auto& tune = require(corpus.tune, "tune");
  Grid g;
  auto& t = g.table;
  t.name = "tune_omega";
  t.title = "Mean SC FW PSNR (dB) on the tuning images, rows omega_G, columns omega_S";
  t.row_header = "omega_global";
  for (double w : omegas) {
    std::ostringstream s;
    s << w;
    t.rows.push_back(s.str());
    t.columns.push_back(s.str());
  }
  const ExamplePool pool = external_pool(config, corpus);
  const BaseDictionary ksvd = train_global_ksvd(config, pool, config.denoise.global_atoms);
  for (std::size_t a = 0; a < omegas.size(); ++a)
    for (std::size_t b = 0; b < omegas.size(); ++b) {
      if (!(omegas[b] > omegas[a])) continue;
      for (std::size_t k = 0; k < tune.size(); ++k)
        g.cells.push_back({a, b, tune[k].name, [&config, &tune, &omegas, k, a, b, sigma, ksvd]() {
                             const Image& clean = tune[k].image;
                             DenoiseJob job = denoise_job(config, DenoiseMethod::sc_fw, noisy_test_image(config, k, clean, sigma), sigma, clean);
                             job.params.solver.omega_global = omegas[a];
                             job.params.solver.omega_specific = omegas[b];
                             job.global_ksvd = ksvd;
                             return *denoise(job).psnr;
                           }});
    }
  const auto records = execute(g, config.workers);
  for (const auto& r : records)
    if (!r.error.empty()) throw Error("tuning run failed: " + r.error);
  return g.table;
}

ExperimentTable tune_sr_lambdas(const RunConfig& config, const Corpus& corpus, const std::vector<double>& lambdas) {
  const auto& tune = require(corpus.tune, "tune");
  if (lambdas.empty()) throw InvalidArgument("tuning needs at least one lambda");
  Grid g;
  auto& t = g.table;
  t.name = "tune_sr";
  t.title = "Mean x" + std::to_string(config.sr.factor) + " super-resolution PSNR (dB) on the tuning images per lambda_E";
  t.row_header = "method";
  t.rows = {"Bicubic", "External pair only", "Proposed"};
  for (double v : lambdas) {
    std::ostringstream s;
    s << v;
    t.columns.push_back(s.str());
  }
  const CoupledDictionaryPair pair = train_global_pair(config, corpus);
  const SrMethod methods[] = {SrMethod::bicubic, SrMethod::external_only, SrMethod::proposed};
  const ScaleOperators ops{config.sr.factor};
  for (std::size_t m = 0; m < 3; ++m)
    for (std::size_t c = 0; c < lambdas.size(); ++c)
      for (std::size_t k = 0; k < tune.size(); ++k)
        g.cells.push_back({m, c, tune[k].name, [&config, &tune, &lambdas, k, m, c, pair, ops, methods]() {
                             const Image hr = crop_to_multiple(tune[k].image, ops.factor);
                             SrJob job;
                             job.lr_input = ops.downsample(hr);
                             job.method = methods[m];
                             job.params = config.sr;
                             job.params.lambda_global = lambdas[c];
                             job.global_pair = pair;
                             job.reference = hr;
                             return *super_resolve(job).psnr;
                           }});
  const auto records = execute(g, config.workers);
  for (const auto& r : records)
    if (!r.error.empty()) throw Error("tuning run failed: " + r.error);
  return g.table;
}

// --- hashing ----------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) throw Error("SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return sha256_hex(s.str());
}

std::string sha256_image(const Image& image) {
  std::string bytes;
  const Index dims[2] = {image.height(), image.width()};
  bytes.append(reinterpret_cast<const char*>(dims), sizeof dims);
  const Matrix& px = image.pixels();
  for (Index c = 0; c < px.cols(); ++c)
    for (Index r = 0; r < px.rows(); ++r) {
      const double v = px(r, c);
      bytes.append(reinterpret_cast<const char*>(&v), sizeof v);
    }
  return sha256_hex(bytes);
}

}  // namespace cdsc
