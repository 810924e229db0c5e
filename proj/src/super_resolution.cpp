#include <cdsc/pipelines.hpp>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

namespace cdsc {

namespace {

// Keys cubic convolution kernel, a = -0.5.
double keys(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

struct Taps {
  std::vector<std::array<Index, 4>> index;
  std::vector<std::array<double, 4>> weight;
};

// Pixel-centre aligned taps for resampling `in` samples to `in * factor`.
Taps cubic_taps(Index in, int factor) {
  Taps t;
  const Index out = in * factor;
  t.index.resize(static_cast<std::size_t>(out));
  t.weight.resize(static_cast<std::size_t>(out));
  for (Index o = 0; o < out; ++o) {
    const double u = (static_cast<double>(o) + 0.5) / factor - 0.5;
    const auto base = static_cast<Index>(std::floor(u));
    double sum = 0.0;
    for (int k = 0; k < 4; ++k) {
      const Index src = base - 1 + k;
      t.index[static_cast<std::size_t>(o)][k] = std::clamp<Index>(src, 0, in - 1);
      t.weight[static_cast<std::size_t>(o)][k] = keys(u - static_cast<double>(src));
      sum += t.weight[static_cast<std::size_t>(o)][k];
    }
    for (int k = 0; k < 4; ++k) t.weight[static_cast<std::size_t>(o)][k] /= sum;
  }
  return t;
}

Index uniform_index(std::mt19937_64& rng, Index n) { return static_cast<Index>(rng() % static_cast<std::uint64_t>(n)); }

}  // namespace

Image ScaleOperators::upsample(const Image& image) const {
  if (factor < 1) throw InvalidArgument("scale factor must be >= 1");
  if (image.empty()) throw DimensionError("cannot upsample an empty image");
  const Index h = image.height(), w = image.width();
  const Taps rows = cubic_taps(h, factor), cols = cubic_taps(w, factor);
  Matrix tmp(h * factor, w);
  for (Index r = 0; r < h * factor; ++r) {
    const auto& ix = rows.index[static_cast<std::size_t>(r)];
    const auto& wt = rows.weight[static_cast<std::size_t>(r)];
    for (Index c = 0; c < w; ++c)
      tmp(r, c) = wt[0] * image(ix[0], c) + wt[1] * image(ix[1], c) + wt[2] * image(ix[2], c) + wt[3] * image(ix[3], c);
  }
  Matrix out(h * factor, w * factor);
  for (Index c = 0; c < w * factor; ++c) {
    const auto& ix = cols.index[static_cast<std::size_t>(c)];
    const auto& wt = cols.weight[static_cast<std::size_t>(c)];
    out.col(c) = wt[0] * tmp.col(ix[0]) + wt[1] * tmp.col(ix[1]) + wt[2] * tmp.col(ix[2]) + wt[3] * tmp.col(ix[3]);
  }
  return Image(std::move(out));
}

Image ScaleOperators::downsample(const Image& image) const {
  if (factor < 1) throw InvalidArgument("scale factor must be >= 1");
  if (image.height() % factor != 0 || image.width() % factor != 0)
    throw DimensionError("image dimensions must be divisible by the scale factor");
  const Index h = image.height() / factor, w = image.width() / factor;
  Matrix out(h, w);
  const double area = static_cast<double>(factor) * factor;
  for (Index r = 0; r < h; ++r)
    for (Index c = 0; c < w; ++c) out(r, c) = image.pixels().block(r * factor, c * factor, factor, factor).sum() / area;
  return Image(std::move(out));
}

Image crop_to_multiple(const Image& image, int factor) {
  const Index h = image.height() - image.height() % factor;
  const Index w = image.width() - image.width() % factor;
  if (h == 0 || w == 0) throw DimensionError("image is smaller than the scale factor");
  return Image(Matrix(image.pixels().topLeftCorner(h, w)));
}

SearchWindow search_window(Index row, Index col, const ScaleOperators& ops, Index lr_height, Index lr_width,
                           Index window_radius, Index side) {
  if (lr_height < side || lr_width < side) throw DimensionError("low-resolution image is smaller than a patch");
  if (window_radius < 0) throw InvalidArgument("window radius must be non-negative");
  const Index max_row = lr_height - side, max_col = lr_width - side;
  // Co-locate patch centres across the scales.
  auto centre = [&](Index anchor, Index max_anchor) {
    const double c = (static_cast<double>(anchor) + 0.5 * static_cast<double>(side - 1) + 0.5) / ops.factor - 0.5;
    return std::clamp<Index>(static_cast<Index>(std::llround(c - 0.5 * static_cast<double>(side - 1))), 0, max_anchor);
  };
  const Index cr = centre(row, max_row), cc = centre(col, max_col);
  SearchWindow w{std::max<Index>(0, cr - window_radius), std::min(max_row, cr + window_radius),
                 std::max<Index>(0, cc - window_radius), std::min(max_col, cc + window_radius)};
  if (w.row_begin > w.row_end || w.col_begin > w.col_end) throw DimensionError("empty search window");
  return w;
}

InternalPairSet build_internal_pairs(const Image& lr_input, const ScaleOperators& ops, Index window_radius,
                                     Index side) {
  if (lr_input.height() < side || lr_input.width() < side) throw DimensionError("low-resolution image is smaller than a patch");
  if (window_radius < 0) throw InvalidArgument("window radius must be non-negative");
  InternalPairSet out;
  out.upsampled = ops.upsample(lr_input);
  out.smoothed = ops.downsample(out.upsampled);
  out.layout = extract_patches(out.upsampled, side, 1);
  const Index n = out.layout.size();
  const Index p = side * side;
  const Matrix& ys = out.smoothed.pixels();
  const Matrix& y = lr_input.pixels();
  out.pairs.origin = Origin::internal;
  out.pairs.low = out.layout.patches;
  out.pairs.high.resize(p, n);
  out.matches.resize(static_cast<std::size_t>(n));

#pragma omp parallel for schedule(static)
  for (Index k = 0; k < n; ++k) {
    const PatchAnchor a = out.layout.positions[static_cast<std::size_t>(k)];
    const SearchWindow w = search_window(a.row, a.col, ops, ys.rows(), ys.cols(), window_radius, side);
    const auto target = out.layout.patches.col(k);
    double best = std::numeric_limits<double>::infinity();
    PatchAnchor at{w.row_begin, w.col_begin};
    for (Index m = w.row_begin; m <= w.row_end; ++m) {
      for (Index c = w.col_begin; c <= w.col_end; ++c) {
        double dist = 0.0;
        for (Index i = 0; i < side && dist < best; ++i)
          for (Index j = 0; j < side; ++j) {
            const double diff = ys(m + i, c + j) - target(i * side + j);
            dist += diff * diff;
          }
        if (dist < best) {
          best = dist;
          at = {m, c};
        }
      }
    }
    out.matches[static_cast<std::size_t>(k)] = at;
    for (Index i = 0; i < side; ++i)
      for (Index j = 0; j < side; ++j)
        out.pairs.high(i * side + j, k) = target(i * side + j) + (y(at.row + i, at.col + j) - ys(at.row + i, at.col + j));
  }
  return out;
}

std::string_view to_string(SrMethod method) {
  switch (method) {
    case SrMethod::bicubic: return "bicubic";
    case SrMethod::external_only: return "external_only";
    case SrMethod::hf_transfer: return "hf_transfer";
    case SrMethod::proposed: return "proposed";
  }
  return "unknown";
}

SrMethod parse_sr_method(std::string_view name) {
  for (auto m : {SrMethod::bicubic, SrMethod::external_only, SrMethod::hf_transfer, SrMethod::proposed})
    if (to_string(m) == name) return m;
  throw InvalidArgument("unknown super-resolution method '" + std::string(name) +
                        "' (expected bicubic, external_only, hf_transfer, proposed)");
}

PairPool sr_features(const PairPool& raw, double min_feature_norm) {
  if (raw.high.cols() != raw.low.cols() || raw.high.rows() != raw.low.rows())
    throw DimensionError("high and low patches must align");
  Matrix low = raw.low / 255.0;
  const Vector means = low.colwise().mean().transpose();
  low.rowwise() -= means.transpose();
  const Matrix high = (raw.high - raw.low) / 255.0;
  std::vector<Index> keep;
  for (Index k = 0; k < low.cols(); ++k)
    if (low.col(k).norm() >= min_feature_norm) keep.push_back(k);
  PairPool out;
  out.origin = raw.origin;
  out.low.resize(low.rows(), static_cast<Index>(keep.size()));
  out.high.resize(high.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.low.col(static_cast<Index>(j)) = low.col(keep[j]);
    out.high.col(static_cast<Index>(j)) = high.col(keep[j]);
  }
  return out;
}

PairPool sample_external_pairs(const std::vector<Image>& images, const ScaleOperators& ops, Index side, Index count,
                               std::uint64_t seed) {
  if (images.empty()) throw InvalidArgument("no training images");
  std::vector<Image> hr, smooth;
  std::vector<Index> offsets{0};
  for (const auto& img : images) {
    hr.push_back(crop_to_multiple(img, ops.factor));
    smooth.push_back(ops.upsample(ops.downsample(hr.back())));
    if (hr.back().height() < side || hr.back().width() < side) throw DimensionError("training image smaller than the patch");
    offsets.push_back(offsets.back() + (hr.back().height() - side + 1) * (hr.back().width() - side + 1));
  }
  std::mt19937_64 rng(seed);
  PairPool pool;
  pool.origin = Origin::external;
  pool.high.resize(side * side, count);
  pool.low.resize(side * side, count);
  for (Index k = 0; k < count; ++k) {
    const Index flat = uniform_index(rng, offsets.back());
    const auto which = static_cast<std::size_t>(std::upper_bound(offsets.begin(), offsets.end(), flat) - offsets.begin() - 1);
    const Index local = flat - offsets[which];
    const Index cols = hr[which].width() - side + 1;
    pool.high.col(k) = patch_at(hr[which], local / cols, local % cols, side);
    pool.low.col(k) = patch_at(smooth[which], local / cols, local % cols, side);
  }
  return pool;
}

RestorationResult super_resolve(const SrJob& job) {
  const auto start = std::chrono::steady_clock::now();
  const SrParams& prm = job.params;
  if (prm.factor < 2) throw InvalidArgument("scale factor must be >= 2");
  const ScaleOperators ops{prm.factor};
  const Index side = prm.patch_side;
  const Image up = ops.upsample(job.lr_input);

  RestorationResult result;
  nlohmann::json report;
  SolverConfig cfg = prm.solver;
  cfg.lambda_global = prm.lambda_global;
  cfg.lambda_specific = prm.lambda_ratio * prm.lambda_global;

  auto need_pair = [&]() -> const CoupledDictionaryPair& {
    if (!job.global_pair) throw InvalidArgument("method " + std::string(to_string(job.method)) + " needs a coupled external dictionary pair");
    if (job.global_pair->low.dim() != side * side) throw DimensionError("coupled dictionary does not match the patch size");
    return *job.global_pair;
  };

  switch (job.method) {
    case SrMethod::bicubic:
      result.output = up;
      break;
    case SrMethod::hf_transfer: {
      const InternalPairSet internal = build_internal_pairs(job.lr_input, ops, prm.window_radius, side);
      result.output = reconstruct_overlap(internal.layout, internal.pairs.high);
      break;
    }
    case SrMethod::external_only:
    case SrMethod::proposed: {
      cfg.validate();
      const CoupledDictionaryPair& global = need_pair();
      const PatchFeatures pf = patch_features(up, side);
      Matrix high_atoms;
      Matrix weights, codes;
      if (job.method == SrMethod::external_only) {
        const PatchBatch batch(pf.features, CompositeDictionary(global.low, BaseDictionary::empty(side * side, Origin::internal)));
        weights = Matrix::Ones(batch.atom_count(), batch.size());
        codes = code_batch(batch, weights, cfg);
        high_atoms = global.high;
      } else {
        const InternalPairSet internal = build_internal_pairs(job.lr_input, ops, prm.window_radius, side);
        const PairPool features = sr_features(internal.pairs, prm.min_feature_norm);
        // A nearly flat input yields no internal pairs; the global pair carries it alone.
        CoupledDictionaryPair specific{BaseDictionary::empty(side * side, Origin::internal), Matrix(side * side, 0)};
        if (prm.specific_atoms > 0 && features.size() >= prm.specific_atoms)
          specific = coupled_learn(features,
                                   {prm.specific_atoms, prm.target_sparsity, prm.internal_ksvd_iterations, prm.seed});
        const PatchBatch batch(pf.features, CompositeDictionary(global.low, specific.low));
        const SolverState state = coordinate_descent(batch, cfg);
        weights = batch_weights(batch, state.params);
        codes = state.codes;
        high_atoms.resize(side * side, global.count() + specific.count());
        high_atoms << global.high, specific.high;
        nlohmann::json trace = nlohmann::json::array();
        trace.push_back(state.initial.total());
        for (double v : state.objective_trace) trace.push_back(v);
        report["objective_trace"] = trace;
        report["specific_atoms"] = specific.count();
        result.solver_state = state;
      }
      // Codes and weights solved on the low atoms drive the high atoms unchanged.
      Matrix patches = pf.layout.patches * 255.0 + 255.0 * (high_atoms * weights.cwiseProduct(codes));
      result.output = reconstruct_overlap(pf.layout, patches);
      report["global_atoms"] = global.count();
      report["lambda_global"] = cfg.lambda_global;
      report["lambda_specific"] = cfg.lambda_specific;
      break;
    }
  }

  report["task"] = "super_resolution";
  report["method"] = std::string(to_string(job.method));
  report["factor"] = prm.factor;
  report["window_radius"] = prm.window_radius;
  report["seed"] = prm.seed;
  if (job.reference) {
    if (job.reference->height() != result.output.height() || job.reference->width() != result.output.width())
      throw DimensionError("reference size does not match the upscaled output");
    result.psnr = psnr(*job.reference, result.output);
    report["psnr"] = *result.psnr;
  }
  report["runtime_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  result.report = std::move(report);
  return result;
}

}  // namespace cdsc
