#pragma once

#include <cdsc/atom_weights.hpp>
#include <cdsc/dictionary.hpp>
#include <cdsc/sparse_solver.hpp>

#include <iosfwd>
#include <memory>
#include <vector>

namespace cdsc {

struct SolverConfig {
  double lambda_global = 0.05;
  double lambda_specific = 0.5;  // 10 x lambda_global
  int iterations = 5;
  /// Gradient step size on F_S and F_G; 0 disables the metric updates.
  double beta = 0.9;
  /// RBF constants of the warm start (omega_specific > omega_global).
  double omega_global = 0.5;
  double omega_specific = 1.0;
  /// Magnitude of the random disturbance on the diagonal of the initial F.
  double init_jitter = 0.01;
  std::uint64_t seed = 1;
  /// Backtracking tries beta, beta/2, ..., beta/2^max_halvings.
  int max_halvings = 8;
  /// Stop early when the relative objective decrease falls below this.
  double early_exit_tolerance = 1e-6;

  void validate() const;
  FixedRbfParams rbf() const { return {omega_global, omega_specific}; }
};

/// Signals to code (one per column) together with their dictionaries. The
/// global block is always shared; the specific block is either shared or
/// given per signal.
class PatchBatch {
 public:
  PatchBatch(Matrix signals, const CompositeDictionary& dictionary);
  PatchBatch(Matrix signals, BaseDictionary global, std::vector<BaseDictionary> per_signal_specific);

  Index size() const { return signals_.cols(); }
  Index dim() const { return signals_.rows(); }
  Index global_count() const { return global_.count(); }
  Index specific_count() const { return specific_.front().count(); }
  Index atom_count() const { return global_count() + specific_count(); }

  const Matrix& signals() const { return signals_; }
  const BaseDictionary& global() const { return global_; }
  const BaseDictionary& specific(Index i) const {
    return specific_.size() == 1 ? specific_.front() : specific_[static_cast<std::size_t>(i)];
  }
  bool shared_specific() const { return specific_.size() == 1; }

  /// [D^G | D^S(i)].
  Matrix stacked(Index i) const;
  CompositeDictionary dictionary(Index i) const { return {global_, specific(i)}; }

 private:
  Matrix signals_;
  BaseDictionary global_;
  std::vector<BaseDictionary> specific_;
};

struct ObjectiveTerms {
  double residual = 0.0;
  double penalty = 0.0;
  double total() const { return residual + penalty; }
};

struct IterationRecord {
  int iteration = 0;
  ObjectiveTerms terms;
  double step_specific = 0.0;  // accepted step on F_S (0 = skipped)
  double step_global = 0.0;    // accepted step on F_G (0 = skipped)
};

struct SolverState {
  Matrix codes;  // stacked codes, one column per signal
  MahalanobisParams params;
  ObjectiveTerms initial;  // after the warm start
  std::vector<double> objective_trace;  // one entry per completed outer iteration
  std::vector<IterationRecord> records;
  /// Objective of the returned codes/params (codes re-solved for the final metric).
  ObjectiveTerms final_terms;

  SparseCode code(Index i, Index global_count) const { return SparseCode::from_stacked(codes.col(i), global_count); }
};

/// Weights of every atom for every signal (atom x signal).
Matrix batch_weights(const PatchBatch& batch, const MahalanobisParams& params);
Matrix batch_weights(const PatchBatch& batch, const FixedRbfParams& params);

/// Feature-sign coding of every signal against the weighted atoms.
Matrix code_batch(const PatchBatch& batch, const Matrix& weights, const SolverConfig& config);

/// Composite objective summed over the batch for given per-atom weights.
ObjectiveTerms objective_terms(const PatchBatch& batch, const Matrix& weights, const Matrix& codes,
                               const SolverConfig& config);
/// Same, with weights from the Mahalanobis parameters (only active atoms are evaluated).
ObjectiveTerms objective_terms(const PatchBatch& batch, const MahalanobisParams& params, const Matrix& codes,
                               const SolverConfig& config);
double objective(const PatchBatch& batch, const MahalanobisParams& params, const Matrix& codes,
                 const SolverConfig& config);

/// Gradient of the batch-mean objective with respect to one block's F.
Matrix batch_gradient(const PatchBatch& batch, const MahalanobisParams& params, const Matrix& codes, Block which);

/// Initial factors sqrt(omega) (I + jitter diag(u)), u ~ U[-1, 1] from the seed.
MahalanobisParams initial_metric(const SolverConfig& config, Index dim);

/// Codes under the fixed RBF weights plus the initial metric.
SolverState warm_start(const PatchBatch& batch, const SolverConfig& config);

/// Alternates (codes, F_S, F_G) for config.iterations rounds, then re-solves
/// the codes for the final metric.
SolverState coordinate_descent(const PatchBatch& batch, const SolverConfig& config);

/// CSV: iteration,objective,residual,penalty,step_specific,step_global
void write_trace_csv(const SolverState& state, std::ostream& out);

}  // namespace cdsc
