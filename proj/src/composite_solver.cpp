#include <cdsc/composite_solver.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <random>

namespace cdsc {

void SolverConfig::validate() const {
  if (!(lambda_global > 0.0) || !(lambda_specific > 0.0)) throw InvalidArgument("lambdas must be positive");
  if (iterations < 1) throw InvalidArgument("iterations must be >= 1");
  if (!(beta >= 0.0)) throw InvalidArgument("beta must be non-negative");
  if (!(init_jitter >= 0.0)) throw InvalidArgument("init_jitter must be non-negative");
  if (max_halvings < 0) throw InvalidArgument("max_halvings must be >= 0");
  rbf().validate();
}

PatchBatch::PatchBatch(Matrix signals, const CompositeDictionary& dictionary)
    : signals_(std::move(signals)), global_(dictionary.global()), specific_{dictionary.specific()} {
  if (signals_.rows() != dictionary.dim()) throw DimensionError("signal dimension does not match dictionary");
}

PatchBatch::PatchBatch(Matrix signals, BaseDictionary global, std::vector<BaseDictionary> per_signal_specific)
    : signals_(std::move(signals)), global_(std::move(global)), specific_(std::move(per_signal_specific)) {
  if (specific_.empty()) throw DimensionError("no specific dictionaries given");
  if (specific_.size() != 1 && static_cast<Index>(specific_.size()) != signals_.cols())
    throw DimensionError("need one specific dictionary per signal");
  for (const auto& s : specific_) {
    if (s.count() != specific_.front().count()) throw DimensionError("specific dictionaries differ in size");
    if (s.dim() != signals_.rows() || global_.dim() != signals_.rows())
      throw DimensionError("signal dimension does not match dictionary");
  }
  if (atom_count() == 0) throw DimensionError("batch has no atoms");
}

Matrix PatchBatch::stacked(Index i) const {
  Matrix d(dim(), atom_count());
  d.leftCols(global_count()) = global_.atoms();
  d.rightCols(specific_count()) = specific(i).atoms();
  return d;
}

namespace {

// Fixed-size chunks keep reductions independent of the thread count.
constexpr Index kChunk = 256;

// Per-signal weights for one block: exp(-||F d_k - F x||^2).
void block_weights(const Matrix& fd, const Vector& fx, Eigen::Ref<Vector> out) {
  for (Index k = 0; k < fd.cols(); ++k) out(k) = guarded_exp_neg(squared_distance(fd.col(k), fx));
}

// F applied atom by atom (matrix-vector), matching metric_weight's evaluation.
Matrix apply_columns(const Matrix& f, const Matrix& atoms) {
  Matrix out(f.rows(), atoms.cols());
  for (Index k = 0; k < atoms.cols(); ++k) out.col(k).noalias() = f * atoms.col(k);
  return out;
}

// Same evaluation order as block_weights, so weights agree bit for bit.
double metric_weight(const Matrix& f, const Eigen::Ref<const Vector>& atom, const Vector& fx) {
  const Vector fd = f * atom;
  return guarded_exp_neg(squared_distance(fd, fx));
}

}  // namespace

Matrix batch_weights(const PatchBatch& batch, const MahalanobisParams& params) {
  const Index m = batch.global_count();
  const Index nspec = batch.specific_count();
  Matrix w(batch.atom_count(), batch.size());
  const Matrix fdg = apply_columns(params.f_global, batch.global().atoms());
  const Matrix fds_shared = batch.shared_specific() ? apply_columns(params.f_specific, batch.specific(0).atoms()) : Matrix();
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < batch.size(); ++i) {
    const Vector x = batch.signals().col(i);
    block_weights(fdg, params.f_global * x, w.col(i).head(m));
    if (batch.shared_specific()) {
      block_weights(fds_shared, params.f_specific * x, w.col(i).tail(nspec));
    } else {
      block_weights(apply_columns(params.f_specific, batch.specific(i).atoms()), params.f_specific * x, w.col(i).tail(nspec));
    }
  }
  return w;
}

Matrix batch_weights(const PatchBatch& batch, const FixedRbfParams& params) {
  const Index m = batch.global_count();
  Matrix w(batch.atom_count(), batch.size());
#pragma omp parallel for schedule(static)
  for (Index i = 0; i < batch.size(); ++i) {
    const auto x = batch.signals().col(i);
    for (Index k = 0; k < m; ++k) w(k, i) = rbf_weight(batch.global().atom(k), x, params.omega_global);
    const BaseDictionary& sd = batch.specific(i);
    for (Index k = 0; k < sd.count(); ++k) w(m + k, i) = rbf_weight(sd.atom(k), x, params.omega_specific);
  }
  return w;
}

Matrix code_batch(const PatchBatch& batch, const Matrix& weights, const SolverConfig& config) {
  if (weights.rows() != batch.atom_count() || weights.cols() != batch.size())
    throw DimensionError("weight matrix does not match batch");
  const Vector lambdas = PenaltyProfile::composite(batch.global_count(), batch.specific_count(),
                                                   config.lambda_global, config.lambda_specific)
                             .lambdas();
  Matrix codes(batch.atom_count(), batch.size());
  const Matrix shared = batch.shared_specific() ? batch.stacked(0) : Matrix();
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 64)
  for (Index i = 0; i < batch.size(); ++i) {
    try {
      const Matrix effective = (batch.shared_specific() ? shared : batch.stacked(i)) * weights.col(i).asDiagonal();
      codes.col(i) = feature_sign(effective, batch.signals().col(i), lambdas);
    } catch (const FeatureSignError& e) {
#pragma omp critical
      if (!failure)
        failure = std::make_exception_ptr(FeatureSignError(
            "signal " + std::to_string(i) + ": " + e.what(), e.best(), e.violation()));
    }
  }
  if (failure) std::rethrow_exception(failure);
  return codes;
}

ObjectiveTerms objective_terms(const PatchBatch& batch, const Matrix& weights, const Matrix& codes,
                               const SolverConfig& config) {
  if (codes.rows() != batch.atom_count() || codes.cols() != batch.size())
    throw DimensionError("code matrix does not match batch");
  const Index m = batch.global_count();
  ObjectiveTerms total;
  for (Index i = 0; i < batch.size(); ++i) {
    Vector r = batch.signals().col(i);
    for (Index k = 0; k < codes.rows(); ++k) {
      const double a = codes(k, i);
      if (a == 0.0) continue;
      const auto atom = k < m ? batch.global().atom(k) : batch.specific(i).atom(k - m);
      r -= atom * (weights(k, i) * a);
    }
    total.residual += r.squaredNorm();
    total.penalty += config.lambda_global * codes.col(i).head(m).lpNorm<1>() +
                     config.lambda_specific * codes.col(i).tail(codes.rows() - m).lpNorm<1>();
  }
  return total;
}

ObjectiveTerms objective_terms(const PatchBatch& batch, const MahalanobisParams& params, const Matrix& codes,
                               const SolverConfig& config) {
  if (codes.rows() != batch.atom_count() || codes.cols() != batch.size())
    throw DimensionError("code matrix does not match batch");
  const Index m = batch.global_count();
  const Index n = batch.size();
  const Index chunks = (n + kChunk - 1) / kChunk;
  std::vector<ObjectiveTerms> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    ObjectiveTerms acc;
    for (Index i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
      const Vector x = batch.signals().col(i);
      const Vector fgx = params.f_global * x;
      const Vector fsx = params.f_specific * x;
      Vector r = x;
      for (Index k = 0; k < codes.rows(); ++k) {
        const double a = codes(k, i);
        if (a == 0.0) continue;
        const bool global = k < m;
        const auto atom = global ? batch.global().atom(k) : batch.specific(i).atom(k - m);
        r -= atom * (metric_weight(global ? params.f_global : params.f_specific, atom, global ? fgx : fsx) * a);
      }
      acc.residual += r.squaredNorm();
      acc.penalty += config.lambda_global * codes.col(i).head(m).lpNorm<1>() +
                     config.lambda_specific * codes.col(i).tail(codes.rows() - m).lpNorm<1>();
    }
    partial[static_cast<std::size_t>(c)] = acc;
  }
  ObjectiveTerms total;
  for (const auto& t : partial) {
    total.residual += t.residual;
    total.penalty += t.penalty;
  }
  return total;
}

double objective(const PatchBatch& batch, const MahalanobisParams& params, const Matrix& codes,
                 const SolverConfig& config) {
  return objective_terms(batch, params, codes, config).total();
}

Matrix batch_gradient(const PatchBatch& batch, const MahalanobisParams& params, const Matrix& codes, Block which) {
  const Index p = batch.dim();
  const Index m = batch.global_count();
  const Index n = batch.size();
  const Index begin = which == Block::global ? 0 : m;
  const Index end = which == Block::global ? m : batch.atom_count();
  const Matrix& f = params.factor(which);
  const Index chunks = (n + kChunk - 1) / kChunk;
  std::vector<Matrix> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(static)
  for (Index c = 0; c < chunks; ++c) {
    Matrix scatter = Matrix::Zero(p, p);
    for (Index i = c * kChunk; i < std::min(n, (c + 1) * kChunk); ++i) {
      const Vector x = batch.signals().col(i);
      const Vector fgx = params.f_global * x;
      const Vector fsx = params.f_specific * x;
      // Residual under the current weights of both blocks.
      Vector r = x;
      std::vector<std::pair<Index, double>> active;
      for (Index k = 0; k < codes.rows(); ++k) {
        const double a = codes(k, i);
        if (a == 0.0) continue;
        const bool global = k < m;
        const auto atom = global ? batch.global().atom(k) : batch.specific(i).atom(k - m);
        const double w = metric_weight(global ? params.f_global : params.f_specific, atom, global ? fgx : fsx);
        r -= atom * (w * a);
        if (k >= begin && k < end) active.emplace_back(k, w);
      }
      const Vector& fx = which == Block::global ? fgx : fsx;
      for (const auto& [k, w] : active) {
        if (w == 0.0) continue;
        const auto atom = k < m ? batch.global().atom(k) : batch.specific(i).atom(k - m);
        const Vector delta = atom - x;
        if (squared_distance(f * atom, fx) >= kMaxExponent) continue;
        const double coef = 4.0 * r.dot(atom) * codes(k, i) * w;
        scatter.noalias() += coef * delta * delta.transpose();
      }
    }
    partial[static_cast<std::size_t>(c)] = std::move(scatter);
  }
  Matrix total = Matrix::Zero(p, p);
  for (const auto& s : partial) total += s;
  return f * total / static_cast<double>(std::max<Index>(n, 1));
}

MahalanobisParams initial_metric(const SolverConfig& config, Index dim) {
  std::mt19937_64 rng(config.seed);
  auto draw = [&]() { return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0; };
  MahalanobisParams params;
  params.f_global = Matrix::Identity(dim, dim);
  params.f_specific = Matrix::Identity(dim, dim);
  for (Index i = 0; i < dim; ++i) params.f_global(i, i) += config.init_jitter * draw();
  for (Index i = 0; i < dim; ++i) params.f_specific(i, i) += config.init_jitter * draw();
  params.f_global *= std::sqrt(config.omega_global);
  params.f_specific *= std::sqrt(config.omega_specific);
  return params;
}

SolverState warm_start(const PatchBatch& batch, const SolverConfig& config) {
  config.validate();
  SolverState state;
  state.codes = code_batch(batch, batch_weights(batch, config.rbf()), config);
  state.params = initial_metric(config, batch.dim());
  state.initial = objective_terms(batch, state.params, state.codes, config);
  state.final_terms = state.initial;
  return state;
}

namespace {

// One backtracking gradient step on a block's factor; returns the accepted step (0 if none).
double metric_step(const PatchBatch& batch, const SolverConfig& config, const Matrix& codes,
                   MahalanobisParams& params, Block which, double& current) {
  if (config.beta == 0.0) return 0.0;
  const Matrix grad = batch_gradient(batch, params, codes, which);
  if (grad.squaredNorm() == 0.0) return 0.0;
  double step = config.beta;
  for (int h = 0; h <= config.max_halvings; ++h, step *= 0.5) {
    MahalanobisParams trial = params;
    trial.factor(which) -= step * grad;
    const double value = objective(batch, trial, codes, config);
    if (value <= current) {
      params = std::move(trial);
      current = value;
      return step;
    }
  }
  return 0.0;
}

}  // namespace

SolverState coordinate_descent(const PatchBatch& batch, const SolverConfig& config) {
  SolverState state = warm_start(batch, config);
  double previous = state.initial.total();
  for (int t = 1; t <= config.iterations; ++t) {
    try {
      state.codes = code_batch(batch, batch_weights(batch, state.params), config);
    } catch (const FeatureSignError& e) {
      throw FeatureSignError("coordinate descent iteration " + std::to_string(t) + ": " + e.what(), e.best(),
                             e.violation());
    }
    double current = objective(batch, state.params, state.codes, config);
    IterationRecord rec;
    rec.iteration = t;
    rec.step_specific = metric_step(batch, config, state.codes, state.params, Block::specific, current);
    rec.step_global = metric_step(batch, config, state.codes, state.params, Block::global, current);
    rec.terms = objective_terms(batch, state.params, state.codes, config);
    state.objective_trace.push_back(rec.terms.total());
    state.records.push_back(rec);

    const double now = rec.terms.total();
    const bool stalled = previous - now <= config.early_exit_tolerance * std::abs(previous);
    previous = now;
    if (stalled) break;
  }
  state.codes = code_batch(batch, batch_weights(batch, state.params), config);
  state.final_terms = objective_terms(batch, state.params, state.codes, config);
  return state;
}

void write_trace_csv(const SolverState& state, std::ostream& out) {
  out << "iteration,objective,residual,penalty,step_specific,step_global\n";
  out.precision(17);
  out << 0 << ',' << state.initial.total() << ',' << state.initial.residual << ',' << state.initial.penalty
      << ",0,0\n";
  for (const auto& r : state.records)
    out << r.iteration << ',' << r.terms.total() << ',' << r.terms.residual << ',' << r.terms.penalty << ','
        << r.step_specific << ',' << r.step_global << '\n';
}

}  // namespace cdsc
