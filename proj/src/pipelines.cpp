#include <cdsc/pipelines.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace cdsc {

namespace {

// Penalties need sigma > 0; a clean input still gets a small one.
constexpr double kMinSigma = 0.1;

Index uniform_index(std::mt19937_64& rng, Index n) { return static_cast<Index>(rng() % static_cast<std::uint64_t>(n)); }

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

PatchFeatures patch_features(const Image& image, Index side, Index stride) {
  PatchFeatures out;
  out.layout = extract_patches(Image(Matrix(image.pixels() / 255.0)), side, stride);
  out.means = out.layout.patches.colwise().mean().transpose();
  out.features = out.layout.patches.rowwise() - out.means.transpose();
  return out;
}

ExamplePool sample_external_pool(const std::vector<Image>& images, Index side, Index count, std::uint64_t seed) {
  if (images.empty()) throw InvalidArgument("no training images");
  if (count < 1) throw InvalidArgument("pool size must be >= 1");
  std::vector<Index> offsets{0};
  for (const auto& img : images) {
    if (img.width() < side || img.height() < side) throw DimensionError("training image smaller than the patch");
    offsets.push_back(offsets.back() + (img.height() - side + 1) * (img.width() - side + 1));
  }
  std::mt19937_64 rng(seed);
  ExamplePool pool;
  pool.origin = Origin::external;
  pool.examples.resize(side * side, count);
  Index filled = 0;
  for (Index draw = 0; filled < count && draw < 50 * count; ++draw) {
    const Index flat = uniform_index(rng, offsets.back());
    const auto which = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    const Image& img = images[which];
    const Index local = flat - offsets[which];
    const Index cols = img.width() - side + 1;
    Vector v = patch_at(img, local / cols, local % cols, side) / 255.0;
    v.array() -= v.mean();
    if (v.norm() < 1e-6) continue;
    pool.examples.col(filled++) = v;
  }
  if (filled < count) throw InvalidArgument("training images are too flat to fill the pool");
  return pool;
}

std::string_view to_string(DenoiseMethod method) {
  switch (method) {
    case DenoiseMethod::ksvd_g: return "ksvd_g";
    case DenoiseMethod::ksvd_s: return "ksvd_s";
    case DenoiseMethod::ksvd_c: return "ksvd_c";
    case DenoiseMethod::sc_fw: return "sc_fw";
    case DenoiseMethod::sc_lw: return "sc_lw";
    case DenoiseMethod::method_i: return "method_i";
    case DenoiseMethod::method_ii: return "method_ii";
    case DenoiseMethod::method_iii: return "method_iii";
  }
  return "unknown";
}

DenoiseMethod parse_denoise_method(std::string_view name) {
  for (auto m : {DenoiseMethod::ksvd_g, DenoiseMethod::ksvd_s, DenoiseMethod::ksvd_c, DenoiseMethod::sc_fw,
                 DenoiseMethod::sc_lw, DenoiseMethod::method_i, DenoiseMethod::method_ii, DenoiseMethod::method_iii})
    if (to_string(m) == name) return m;
  throw InvalidArgument("unknown denoising method '" + std::string(name) +
                        "' (expected ksvd_g, ksvd_s, ksvd_c, sc_fw, sc_lw, method_i, method_ii, method_iii)");
}

double LambdaScales::of(DenoiseMethod method) const {
  switch (method) {
    case DenoiseMethod::ksvd_g: return ksvd_g;
    case DenoiseMethod::ksvd_s: return ksvd_s;
    case DenoiseMethod::ksvd_c:
    case DenoiseMethod::method_iii: return ksvd_c;
    case DenoiseMethod::sc_fw: return sc_fw;
    case DenoiseMethod::sc_lw: return sc_lw;
    case DenoiseMethod::method_i: return method_i;
    case DenoiseMethod::method_ii: return method_ii;
  }
  return 1.0;
}

std::pair<Index, Index> split_atoms(double r, Index total) {
  if (!(r >= 0.0)) throw InvalidArgument("atom ratio r must be non-negative");
  const auto global = static_cast<Index>(std::llround(static_cast<double>(total) * r / (1.0 + r)));
  return {global, total - global};
}

namespace {

Matrix expand(const PatchBatch& batch, const Matrix& weights, const Matrix& codes) {
  Matrix out(batch.dim(), batch.size());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < batch.size(); ++i)
    out.col(i) = batch.stacked(i) * weights.col(i).cwiseProduct(codes.col(i));
  return out;
}

nlohmann::json trace_json(const SolverState& s) {
  nlohmann::json t = nlohmann::json::array();
  t.push_back(s.initial.total());
  for (double v : s.objective_trace) t.push_back(v);
  return t;
}

}  // namespace

RestorationResult denoise(const DenoiseJob& job) {
  const auto start = std::chrono::steady_clock::now();
  const DenoiseParams& prm = job.params;
  if (!(job.sigma >= 0.0)) throw InvalidArgument("sigma must be non-negative");
  if (prm.patch_side < 1 || prm.target_sparsity < 1) throw InvalidArgument("bad patch side or sparsity");
  const DenoiseMethod method = job.method;
  const bool composite_lambda = method != DenoiseMethod::ksvd_g && method != DenoiseMethod::ksvd_s;

  const double lambda_e = prm.lambda_scale.of(method) * std::max(job.sigma, kMinSigma) / 255.0;
  SolverConfig cfg = prm.solver;
  cfg.lambda_global = lambda_e;
  cfg.lambda_specific = composite_lambda ? prm.lambda_ratio * lambda_e : lambda_e;
  cfg.validate();

  const PatchFeatures pf = patch_features(job.noisy, prm.patch_side);
  const Index p = pf.features.rows();

  // A flat input has nothing to learn from; the global block carries it alone.
  const Index textured = (pf.features.colwise().squaredNorm().array() > 0.0).count();

  auto need = [&](const std::optional<BaseDictionary>& d, const char* what) -> const BaseDictionary& {
    if (!d) throw InvalidArgument(std::string("method ") + std::string(to_string(method)) + " needs " + what);
    if (d->dim() != p) throw DimensionError("dictionary dimension does not match the patch size");
    return *d;
  };
  auto internal_ksvd = [&]() {
    if (prm.specific_atoms < 1 || textured < prm.specific_atoms) return BaseDictionary::empty(p, Origin::internal);
    ExamplePool pool{pf.features, Origin::internal};
    return ksvd_learn(pool, {prm.specific_atoms, prm.target_sparsity, prm.internal_ksvd_iterations, prm.seed});
  };

  std::optional<PatchBatch> batch;
  switch (method) {
    case DenoiseMethod::ksvd_g:
      batch.emplace(pf.features, CompositeDictionary(need(job.global_ksvd, "an external K-SVD dictionary"),
                                                     BaseDictionary::empty(p, Origin::internal)));
      break;
    case DenoiseMethod::ksvd_s:
      batch.emplace(pf.features, CompositeDictionary(BaseDictionary::empty(p, Origin::external), internal_ksvd()));
      break;
    case DenoiseMethod::ksvd_c:
    case DenoiseMethod::method_iii:
    case DenoiseMethod::sc_fw:
    case DenoiseMethod::sc_lw:
      batch.emplace(pf.features, CompositeDictionary(need(job.global_ksvd, "an external K-SVD dictionary"), internal_ksvd()));
      break;
    case DenoiseMethod::method_i:
    case DenoiseMethod::method_ii: {
      const BaseDictionary& g = need(job.global_knn, "external k-means centroids");
      std::vector<BaseDictionary> per(static_cast<std::size_t>(pf.features.cols()), BaseDictionary::empty(p, Origin::internal));
      if (prm.specific_atoms > 0 && textured > prm.specific_atoms) {
#pragma omp parallel for schedule(dynamic, 64)
        for (Index i = 0; i < pf.features.cols(); ++i)
          per[static_cast<std::size_t>(i)] = knn_specific_base(pf.features, pf.features.col(i), prm.specific_atoms, i);
      }
      batch.emplace(pf.features, g, std::move(per));
      break;
    }
  }

  nlohmann::json report;
  Matrix weights, codes;
  std::optional<SolverState> state;
  switch (method) {
    case DenoiseMethod::sc_fw:
      weights = batch_weights(*batch, cfg.rbf());
      codes = code_batch(*batch, weights, cfg);
      break;
    case DenoiseMethod::sc_lw:
    case DenoiseMethod::method_i:
      state = coordinate_descent(*batch, cfg);
      weights = batch_weights(*batch, state->params);
      codes = state->codes;
      report["objective_trace"] = trace_json(*state);
      break;
    default:
      weights = Matrix::Ones(batch->atom_count(), batch->size());
      codes = code_batch(*batch, weights, cfg);
      break;
  }

  Matrix patches = expand(*batch, weights, codes);
  patches.rowwise() += pf.means.transpose();
  patches *= 255.0;
  RestorationResult result;
  result.output = reconstruct_overlap(pf.layout, patches);

  report["task"] = "denoise";
  report["method"] = std::string(to_string(method));
  report["sigma"] = job.sigma;
  report["lambda_global"] = cfg.lambda_global;
  report["lambda_specific"] = cfg.lambda_specific;
  report["global_atoms"] = batch->global_count();
  report["specific_atoms"] = batch->specific_count();
  report["patch_side"] = prm.patch_side;
  report["seed"] = prm.seed;
  report["mean_nonzeros"] = static_cast<double>((codes.array() != 0.0).count()) / static_cast<double>(codes.cols());
  if (job.reference) {
    result.psnr = psnr(*job.reference, result.output);
    report["psnr"] = *result.psnr;
    report["psnr_input"] = psnr(*job.reference, job.noisy);
  }
  report["runtime_seconds"] = seconds_since(start);
  result.report = std::move(report);
  result.solver_state = std::move(state);
  return result;
}

}  // namespace cdsc
