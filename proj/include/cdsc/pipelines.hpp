#pragma once

#include <cdsc/composite_solver.hpp>
#include <cdsc/dictionary.hpp>
#include <cdsc/patch_grid.hpp>

#include <nlohmann/json.hpp>

#include <optional>
#include <string_view>
#include <vector>

namespace cdsc {

// --- example pools --------------------------------------------------------------

/// Signals are patches scaled to [0, 1] with their mean removed; the means are
/// kept for reconstruction.
struct PatchFeatures {
  PatchDecomposition layout;
  Matrix features;  // p x n, mean-removed, intensity / 255
  Vector means;     // per patch, intensity / 255
};

PatchFeatures patch_features(const Image& image, Index side, Index stride = 1);

/// Samples `count` mean-removed patches uniformly over all patch positions of
/// the training images. Near-flat patches (norm < 1e-6) are skipped.
ExamplePool sample_external_pool(const std::vector<Image>& images, Index side, Index count, std::uint64_t seed);

// --- denoising --------------------------------------------------------------------

enum class DenoiseMethod { ksvd_g, ksvd_s, ksvd_c, sc_fw, sc_lw, method_i, method_ii, method_iii };

std::string_view to_string(DenoiseMethod method);
DenoiseMethod parse_denoise_method(std::string_view name);

/// lambda_E = scale * sigma / 255 for each method (lambda_I = ratio * lambda_E
/// for composite methods; single-block methods use their scale directly).
struct LambdaScales {
  double ksvd_g = 1.0;
  double ksvd_s = 1.0;
  double ksvd_c = 1.0;
  double sc_fw = 1.0;
  double sc_lw = 1.0;
  double method_i = 1.0;
  double method_ii = 1.0;

  double of(DenoiseMethod method) const;
};

struct DenoiseParams {
  Index patch_side = 5;
  Index global_atoms = 128;
  Index specific_atoms = 32;
  Index target_sparsity = 3;
  int internal_ksvd_iterations = 30;
  double lambda_ratio = 10.0;
  LambdaScales lambda_scale;
  /// lambda fields are overwritten per job from lambda_scale and sigma.
  SolverConfig solver;
  std::uint64_t seed = 1;
};

/// (M, N) = (160 r / (1 + r), 160 / (1 + r)) for the atom-ratio sweep.
std::pair<Index, Index> split_atoms(double r, Index total = 160);

struct DenoiseJob {
  Image noisy;
  double sigma = 0.0;
  DenoiseMethod method = DenoiseMethod::sc_lw;
  DenoiseParams params;
  /// K-SVD dictionary learned from external examples (M atoms; may be empty
  /// when M = 0). Required by every method except ksvd_s, method_i, method_ii.
  std::optional<BaseDictionary> global_ksvd;
  /// k-means centroids of external examples, required by method_i / method_ii.
  std::optional<BaseDictionary> global_knn;
  std::optional<Image> reference;
};

struct RestorationResult {
  Image output;
  nlohmann::json report;
  std::optional<double> psnr;
  std::optional<SolverState> solver_state;
};

RestorationResult denoise(const DenoiseJob& job);

// --- super-resolution -------------------------------------------------------------

/// Bicubic upsampling (Keys, a = -0.5, clamped borders) and box-filter
/// decimation by an integer factor.
struct ScaleOperators {
  int factor = 3;

  Image upsample(const Image& image) const;
  /// Requires dimensions divisible by the factor.
  Image downsample(const Image& image) const;
};

/// Crops the bottom/right border so both dimensions are divisible by factor.
Image crop_to_multiple(const Image& image, int factor);

struct InternalPairSet {
  /// high column = X^E_ij (smoothed patch plus pasted high band), low column =
  /// the co-located smoothed patch X'^E_ij; raw intensities.
  PairPool pairs;
  PatchDecomposition layout;        // grid of X'^E = U(Y)
  std::vector<PatchAnchor> matches;  // chosen (m, n) on Y' per grid anchor
  Image upsampled;                   // X'^E
  Image smoothed;                    // Y' = D(U(Y))
};

/// Cross-scale nearest-neighbour matching inside a (2 r + 1)^2 window and
/// high-frequency pasting. Ties go to the lowest scan order.
InternalPairSet build_internal_pairs(const Image& lr_input, const ScaleOperators& ops, Index window_radius,
                                     Index side = 5);

/// The window of LR anchors searched for HR anchor (row, col).
struct SearchWindow {
  Index row_begin, row_end, col_begin, col_end;  // inclusive
};
SearchWindow search_window(Index row, Index col, const ScaleOperators& ops, Index lr_height, Index lr_width,
                           Index window_radius, Index side);

enum class SrMethod { bicubic, external_only, hf_transfer, proposed };
std::string_view to_string(SrMethod method);
SrMethod parse_sr_method(std::string_view name);

struct SrParams {
  int factor = 3;
  Index patch_side = 5;
  Index window_radius = 4;
  Index global_atoms = 128;
  Index specific_atoms = 32;
  Index target_sparsity = 3;
  int internal_ksvd_iterations = 30;
  /// Pairs whose low feature norm is below this are not used for learning.
  double min_feature_norm = 0.02;
  double lambda_global = 0.02;
  double lambda_ratio = 10.0;
  SolverConfig solver;
  std::uint64_t seed = 1;
};

/// Converts raw (HR, smoothed) patch pairs to coupled-learning features:
/// high = HR - smoothed, low = smoothed - mean(smoothed), both / 255.
PairPool sr_features(const PairPool& raw, double min_feature_norm);

/// Raw (HR, U(D(HR))) patch pairs sampled from training images.
PairPool sample_external_pairs(const std::vector<Image>& images, const ScaleOperators& ops, Index side,
                               Index count, std::uint64_t seed);

struct SrJob {
  Image lr_input;
  SrMethod method = SrMethod::proposed;
  SrParams params;
  /// Coupled pair learned from external examples (external_only, proposed).
  std::optional<CoupledDictionaryPair> global_pair;
  std::optional<Image> reference;
};

RestorationResult super_resolve(const SrJob& job);

}  // namespace cdsc
