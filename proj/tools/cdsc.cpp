// Command-line front end: dictionary training, restoration jobs, experiment
// tables and PSNR evaluation.

#include <cdsc/experiments.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>

using namespace cdsc;
namespace fs = std::filesystem;

namespace {

// Flags shared by every subcommand that runs a pipeline.
struct Common {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string data_dir;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "JSON run configuration (unknown keys are rejected)")->check(CLI::ExistingFile);
    app->add_option("--seed", seed, "top-level seed (overrides the config)");
    app->add_option("--workers", workers, "parallel grid workers (overrides the config)");
    app->add_option("--data", data_dir, "data directory with test/, train/, tune/, sr/");
  }

  RunConfig resolve() const {
    RunConfig c = config_file.empty() ? default_config() : RunConfig::load(config_file);
    if (seed) c.seed = *seed;
    if (workers) c.workers = *workers;
    if (!data_dir.empty()) c.data_dir = data_dir;
    c.resolve();
    return c;
  }
};

void write_json(const nlohmann::json& j, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path report_path(const std::string& report, const fs::path& out) {
  if (!report.empty()) return report;
  fs::path p = out;
  return p.replace_extension(".json");
}

BaseDictionary load_named(const std::string& file, const char* kind) {
  if (file.empty())
    throw InvalidArgument(std::string("this method needs a ") + kind +
                          " dictionary; create one with 'cdsc train-dict --kind " + kind + " --out FILE' and pass it with --" +
                          (std::string(kind) == "knn" ? "knn" : "dict") + " FILE");
  if (!fs::exists(file))
    throw IoError("dictionary file '" + file + "' not found; create it with 'cdsc train-dict --kind " + kind + " --out " +
                  file + "'");
  return load_dictionary(file);
}

void print_table(const ExperimentTable& t) { write_markdown(t, std::cout); }

std::vector<NamedImage> training_images(const RunConfig& config, const std::string& dir) {
  const fs::path p = dir.empty() ? config.data_path() / "train" : fs::path(dir);
  auto images = load_image_dir(p);
  if (images.empty()) throw InvalidArgument("no training images (.pgm / .png) in " + p.string());
  return images;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Composite-dictionary sparse coding for image denoising and super-resolution"};
  app.require_subcommand(1);

  // train-dict
  Common train_common;
  std::string train_kind = "ksvd", train_images_dir, train_out;
  std::optional<Index> train_atoms, train_pool;
  std::optional<int> train_iterations;
  auto* train = app.add_subcommand("train-dict", "learn an external dictionary from a directory of training images");
  train_common.add(train);
  train->add_option("--kind", train_kind, "ksvd (global K-SVD), knn (k-means centroids) or coupled (SR pair)")
      ->check(CLI::IsMember({"ksvd", "knn", "coupled"}));
  train->add_option("--images", train_images_dir, "training image directory (default: <data>/train)");
  train->add_option("--out", train_out, "output file (coupled: prefix of .low.dict / .high.dict)")->required();
  train->add_option("--atoms", train_atoms, "atom count (default 128)");
  train->add_option("--pool", train_pool, "number of sampled patches or pairs (default 20000)");
  train->add_option("--iterations", train_iterations, "learning iterations");

  // denoise
  Common dn_common;
  std::string dn_input, dn_out, dn_method = "sc_lw", dn_reference, dn_dict, dn_knn, dn_report;
  double dn_sigma = 0.0;
  bool dn_add_noise = false;
  std::optional<double> dn_scale;
  auto* dn = app.add_subcommand("denoise", "denoise one image");
  dn_common.add(dn);
  dn->add_option("--input", dn_input, "input image (noisy, or clean with --add-noise)")->required()->check(CLI::ExistingFile);
  dn->add_option("--out", dn_out, "output image (.png or .pgm)")->required();
  dn->add_option("--sigma", dn_sigma, "noise standard deviation in 8-bit units")->required();
  dn->add_option("--method", dn_method, "ksvd_g, ksvd_s, ksvd_c, sc_fw, sc_lw, method_i, method_ii, method_iii");
  dn->add_option("--dict", dn_dict, "external K-SVD dictionary (from train-dict --kind ksvd)");
  dn->add_option("--knn", dn_knn, "external k-means centroids (from train-dict --kind knn)");
  dn->add_option("--reference", dn_reference, "clean image for PSNR")->check(CLI::ExistingFile);
  dn->add_flag("--add-noise", dn_add_noise, "treat --input as clean: add seeded noise and use it as the reference");
  dn->add_option("--lambda-scale", dn_scale, "override the method's lambda scale c (lambda_E = c sigma / 255)");
  dn->add_option("--report", dn_report, "JSON report path (default: <out>.json)");

  // sr
  Common sr_common;
  std::string sr_input, sr_hr, sr_out, sr_method = "proposed", sr_pair, sr_report;
  std::optional<int> sr_factor;
  auto* sr = app.add_subcommand("sr", "super-resolve one image");
  sr_common.add(sr);
  auto* sr_in_opt = sr->add_option("--input", sr_input, "low-resolution input")->check(CLI::ExistingFile);
  auto* sr_hr_opt = sr->add_option("--hr", sr_hr, "high-resolution truth: downsample it and report PSNR")->check(CLI::ExistingFile);
  sr_in_opt->excludes(sr_hr_opt);
  sr->add_option("--out", sr_out, "output image")->required();
  sr->add_option("--method", sr_method, "bicubic, external_only, hf_transfer, proposed");
  sr->add_option("--factor", sr_factor, "scale factor (default 3)");
  sr->add_option("--pair", sr_pair, "coupled dictionary prefix (from train-dict --kind coupled)");
  sr->add_option("--report", sr_report, "JSON report path (default: <out>.json)");

  // experiment
  Common ex_common;
  std::string ex_table, ex_out = "results";
  std::vector<double> ex_sigmas, ex_r;
  auto* ex = app.add_subcommand("experiment", "run a full experiment grid and check its trends");
  ex_common.add(ex);
  ex->add_option("table", ex_table, "table1, table2, table3 or table4")->required();
  ex->add_option("--out", ex_out, "output directory");
  ex->add_option("--sigmas", ex_sigmas, "noise levels (default 10 20 30 40 50)");
  ex->add_option("--r-values", ex_r, "atom ratios for table3 (default 0 1 3 4 7 9 15)");

  // tune
  Common tn_common;
  std::string tn_out = "results";
  std::vector<double> tn_scales{1, 1.5, 2, 2.5, 3, 3.5, 4, 5}, tn_sigmas{10, 20}, tn_omegas, tn_sr_lambdas;
  double tn_omega_sigma = 20;
  bool tn_no_scales = false;
  auto* tn = app.add_subcommand("tune", "lambda-scale (and optional omega) search on the tuning images");
  tn_common.add(tn);
  tn->add_option("--out", tn_out, "output directory");
  tn->add_option("--scales", tn_scales, "candidate lambda scales");
  tn->add_flag("--no-scales", tn_no_scales, "skip the lambda-scale search and keep the configured scales");
  tn->add_option("--sigmas", tn_sigmas, "noise levels averaged per candidate");
  tn->add_option("--omegas", tn_omegas, "omega grid for an SC FW search (pairs with omega_S > omega_G)");
  tn->add_option("--omega-sigma", tn_omega_sigma, "noise level of the omega search");
  tn->add_option("--sr-lambdas", tn_sr_lambdas, "lambda_E grid for a super-resolution search (Proposed row picks the value)");

  // config
  Common cf_common;
  auto* cf = app.add_subcommand("config", "print the fully resolved configuration as JSON");
  cf_common.add(cf);

  // eval-psnr
  std::string ev_a, ev_b;
  auto* ev = app.add_subcommand("eval-psnr", "PSNR (dB) between two images");
  ev->add_option("reference", ev_a)->required()->check(CLI::ExistingFile);
  ev->add_option("test", ev_b)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train) {
      RunConfig c = train_common.resolve();
      const auto named = training_images(c, train_images_dir);
      Corpus corpus;
      corpus.train = named;
      nlohmann::json prov{{"kind", train_kind}, {"images", nlohmann::json::array()}, {"config", c.to_json()}};
      for (const auto& n : named) prov["images"].push_back(n.name);
      if (train_kind == "coupled") {
        if (train_atoms) c.sr.global_atoms = *train_atoms;
        if (train_pool) c.external.sr_pairs = *train_pool;
        if (train_iterations) c.external.coupled_iterations = *train_iterations;
        prov["config"] = c.to_json();
        const CoupledDictionaryPair pair = train_global_pair(c, corpus);
        save_coupled(pair, train_out, prov);
        std::cout << "wrote coupled pair " << train_out << " (" << pair.count() << " atoms)\n";
      } else {
        if (train_atoms) c.denoise.global_atoms = *train_atoms;
        if (train_pool) c.external.pool_size = *train_pool;
        if (train_iterations) (train_kind == "ksvd" ? c.external.ksvd_iterations : c.external.knn_iterations) = *train_iterations;
        prov["config"] = c.to_json();
        const ExamplePool pool = external_pool(c, corpus);
        const BaseDictionary d = train_kind == "ksvd" ? train_global_ksvd(c, pool, c.denoise.global_atoms)
                                                      : train_global_knn(c, pool, c.denoise.global_atoms);
        save_dictionary(d, train_out, prov);
        std::cout << "wrote " << train_out << " (" << d.count() << " atoms of dimension " << d.dim() << ")\n";
      }
      return 0;
    }

    if (*dn) {
      const RunConfig c = dn_common.resolve();
      DenoiseJob job;
      job.method = parse_denoise_method(dn_method);
      job.sigma = dn_sigma;
      job.params = c.denoise;
      if (dn_scale) job.params.lambda_scale = {*dn_scale, *dn_scale, *dn_scale, *dn_scale, *dn_scale, *dn_scale, *dn_scale};
      const Image input = read_image(dn_input);
      if (dn_add_noise) {
        job.noisy = add_gaussian_noise(input, dn_sigma, derive_seed(c.seed, {1}));
        job.reference = input;
      } else {
        job.noisy = input;
        if (!dn_reference.empty()) job.reference = read_image(dn_reference);
      }
      const bool needs_knn = job.method == DenoiseMethod::method_i || job.method == DenoiseMethod::method_ii;
      const bool needs_ksvd = job.method != DenoiseMethod::ksvd_s && !needs_knn;
      if (needs_ksvd) job.global_ksvd = load_named(dn_dict, "ksvd");
      if (needs_knn) job.global_knn = load_named(dn_knn, "knn");
      const RestorationResult r = denoise(job);
      write_image(r.output, dn_out);
      nlohmann::json report = r.report;
      report["input"] = dn_input;
      report["output"] = dn_out;
      report["config"] = c.to_json();
      write_json(report, report_path(dn_report, dn_out));
      if (r.psnr) std::cout << "PSNR " << *r.psnr << " dB (input " << report["psnr_input"].get<double>() << " dB)\n";
      return 0;
    }

    if (*sr) {
      RunConfig c = sr_common.resolve();
      if (sr_factor) c.sr.factor = *sr_factor;
      if (sr_input.empty() && sr_hr.empty()) throw InvalidArgument("give --input (low resolution) or --hr (truth)");
      SrJob job;
      job.method = parse_sr_method(sr_method);
      job.params = c.sr;
      const ScaleOperators ops{c.sr.factor};
      if (!sr_hr.empty()) {
        const Image hr = crop_to_multiple(read_image(sr_hr), ops.factor);
        job.lr_input = ops.downsample(hr);
        job.reference = hr;
      } else {
        job.lr_input = read_image(sr_input);
      }
      if (job.method == SrMethod::external_only || job.method == SrMethod::proposed) {
        if (sr_pair.empty())
          throw InvalidArgument("this method needs a coupled dictionary pair; create one with "
                                "'cdsc train-dict --kind coupled --out PREFIX' and pass it with --pair PREFIX");
        if (!fs::exists(sr_pair + ".low.dict"))
          throw IoError("coupled pair '" + sr_pair + "' not found; create it with 'cdsc train-dict --kind coupled --out " +
                        sr_pair + "'");
        job.global_pair = load_coupled(sr_pair);
      }
      const RestorationResult r = super_resolve(job);
      write_image(r.output, sr_out);
      nlohmann::json report = r.report;
      report["output"] = sr_out;
      report["config"] = c.to_json();
      write_json(report, report_path(sr_report, sr_out));
      if (r.psnr) std::cout << "PSNR " << *r.psnr << " dB\n";
      return 0;
    }

    if (*ex) {
      RunConfig c = ex_common.resolve();
      if (!ex_sigmas.empty()) c.grid.sigmas = ex_sigmas;
      if (!ex_r.empty()) c.grid.r_values = ex_r;
      const TableId id = parse_table(ex_table);
      const Corpus corpus = load_corpus(c.data_path());
      const ExperimentResult res = run_experiment(id, c, corpus);
      write_experiment(res, c, ex_out);
      print_table(res.table);
      std::cout << '\n';
      for (const auto& chk : res.checks) std::cout << (chk.passed ? "PASS " : "FAIL ") << chk.description << '\n';
      for (const auto& cell : res.cells)
        if (!cell.error.empty()) std::cerr << "cell failed (" << cell.row << ", " << cell.column << ", " << cell.image << "): " << cell.error << '\n';
      return res.exit_code();
    }

    if (*tn) {
      const RunConfig c = tn_common.resolve();
      const Corpus corpus = load_corpus(c.data_path());
      fs::create_directories(tn_out);
      RunConfig tuned = c;
      if (!tn_no_scales) {
        const ExperimentTable t = tune_lambda_scales(c, corpus, tn_scales, tn_sigmas);
        {
          std::ofstream csv(fs::path(tn_out) / "tune.csv");
          write_csv(t, csv);
        }
        print_table(t);
        tuned.denoise.lambda_scale = best_scales(t, c.denoise.lambda_scale);
        std::cout << "\nbest lambda scales: " << tuned.to_json()["denoise"]["lambda_scale"].dump() << '\n';
      }
      if (!tn_omegas.empty()) {
        const ExperimentTable w = tune_omegas(tuned, corpus, tn_omegas, tn_omega_sigma);
        std::ofstream csv(fs::path(tn_out) / "tune_omega.csv");
        write_csv(w, csv);
        print_table(w);
      }
      if (!tn_sr_lambdas.empty()) {
        const ExperimentTable s = tune_sr_lambdas(tuned, corpus, tn_sr_lambdas);
        std::ofstream csv(fs::path(tn_out) / "tune_sr.csv");
        write_csv(s, csv);
        print_table(s);
        const auto& row = s.values.back();
        tuned.sr.lambda_global = tn_sr_lambdas[static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin())];
        std::cout << "\nbest sr lambda_global: " << tuned.sr.lambda_global << '\n';
      }
      write_json(tuned.to_json(), fs::path(tn_out) / "tuned_config.json");
      return 0;
    }

    if (*cf) {
      std::cout << cf_common.resolve().to_json().dump(2) << '\n';
      return 0;
    }

    if (*ev) {
      std::cout << psnr(read_image(ev_a), read_image(ev_b)) << '\n';
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
