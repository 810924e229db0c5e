#pragma once

#include <cdsc/common.hpp>
#include <cdsc/patch_grid.hpp>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <string_view>
#include <vector>

namespace cdsc {

enum class Origin : std::uint8_t { external = 0, internal = 1 };

std::string_view to_string(Origin origin);

/// Ordered set of unit-l2-norm atoms stored as the columns of a p x count matrix.
class BaseDictionary {
 public:
  BaseDictionary() = default;

  /// Normalizes every column. Throws on zero or non-finite columns.
  BaseDictionary(Matrix atoms, Origin origin);

  /// Adopts atoms that are already unit-norm (to 1e-10) without rescaling.
  static BaseDictionary from_unit_atoms(Matrix atoms, Origin origin);

  /// A dictionary with no atoms. Only meaningful as one block of a
  /// CompositeDictionary (e.g. the global block at atom ratio r = 0).
  static BaseDictionary empty(Index dim, Origin origin);

  const Matrix& atoms() const { return atoms_; }
  auto atom(Index k) const { return atoms_.col(k); }
  Index dim() const { return atoms_.rows(); }
  Index count() const { return atoms_.cols(); }
  Origin origin() const { return origin_; }

 private:
  Matrix atoms_;
  Origin origin_ = Origin::external;
};

/// Global (external) block followed by the sample-specific (internal) block.
class CompositeDictionary {
 public:
  CompositeDictionary(BaseDictionary global, BaseDictionary specific);

  const BaseDictionary& global() const { return global_; }
  const BaseDictionary& specific() const { return specific_; }
  Index dim() const { return global_.dim(); }
  Index global_count() const { return global_.count(); }
  Index specific_count() const { return specific_.count(); }
  Index size() const { return global_count() + specific_count(); }

  /// [D^G | D^S] as one p x (M + N) matrix.
  Matrix stacked() const;

 private:
  BaseDictionary global_;
  BaseDictionary specific_;
};

/// Aligned high/low resolution dictionaries sharing sparse codes.
/// `low` is unit-norm; `high` column k is scaled so that a code solved
/// against `low` reconstructs the high-resolution feature directly, so its
/// columns are not unit-norm.
struct CoupledDictionaryPair {
  BaseDictionary low;
  Matrix high;

  Index count() const { return low.count(); }
};

struct ExamplePool {
  Matrix examples;  // one example per column
  Origin origin = Origin::external;

  Index size() const { return examples.cols(); }
  Index dim() const { return examples.rows(); }
};

/// Column k of `high` pairs with column k of `low`.
struct PairPool {
  Matrix high;
  Matrix low;
  Origin origin = Origin::external;

  Index size() const { return low.cols(); }
};

// --- sparse approximation used inside K-SVD -------------------------------

struct SparseColumn {
  std::vector<Index> index;
  std::vector<double> value;
};

/// Orthogonal matching pursuit with at most `sparsity` atoms; `gram` must be
/// dictionary^T dictionary. Stops early once the residual vanishes.
SparseColumn omp(const Matrix& dictionary, const Matrix& gram, const Eigen::Ref<const Vector>& x,
                 Index sparsity);

// --- learning -----------------------------------------------------------------

struct KsvdOptions {
  Index atom_count = 128;
  Index target_sparsity = 3;
  int iterations = 30;
  std::uint64_t seed = 1;
};

/// K-SVD. `error_trace` (optional) receives the mean squared representation
/// error after the initial coding and after every iteration; it is
/// non-increasing.
BaseDictionary ksvd_learn(const ExamplePool& pool, const KsvdOptions& options,
                          std::vector<double>* error_trace = nullptr);

/// Lloyd k-means (k-means++ seeding); atoms are the normalized centroids.
BaseDictionary knn_global_base(const ExamplePool& pool, Index atom_count, std::uint64_t seed,
                               int max_iterations = 100);

/// The `count` candidates nearest to `query` in l2, nearest first, ties by
/// scan order, normalized. Zero-norm candidates are not eligible, nor is
/// column `exclude` when it is non-negative.
BaseDictionary knn_specific_base(const Matrix& candidates, const Eigen::Ref<const Vector>& query,
                                 Index count, Index exclude = -1);
BaseDictionary knn_specific_base(const PatchDecomposition& candidates,
                                 const Eigen::Ref<const Vector>& query, Index count);

/// Joint K-SVD over [high / sqrt(p_h); low / sqrt(p_l)], split into an
/// aligned pair.
CoupledDictionaryPair coupled_learn(const PairPool& pairs, const KsvdOptions& options,
                                    std::vector<double>* error_trace = nullptr);

// --- serialization ------------------------------------------------------------
//
// Binary layout (little-endian):
//   char[8]  magic "CDSCDICT"
//   uint32   version (1)
//   uint32   dim p
//   uint32   count
//   uint8    origin (0 external, 1 internal)
//   uint8    kind   (0 unit-norm atoms, 1 unnormalized coupled high atoms)
//   uint16   reserved (0)
//   float64  count * p values, atom after atom
// A JSON sidecar "<file>.json" records provenance.

void save_dictionary(const BaseDictionary& dictionary, const std::filesystem::path& path,
                     const nlohmann::json& provenance = {});
BaseDictionary load_dictionary(const std::filesystem::path& path);

/// Writes <prefix>.low.dict and <prefix>.high.dict (+ sidecars).
void save_coupled(const CoupledDictionaryPair& pair, const std::filesystem::path& prefix,
                  const nlohmann::json& provenance = {});
CoupledDictionaryPair load_coupled(const std::filesystem::path& prefix);

}  // namespace cdsc
