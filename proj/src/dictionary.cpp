#include <cdsc/dictionary.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>

namespace cdsc {

std::string_view to_string(Origin origin) {
  return origin == Origin::external ? "external" : "internal";
}

BaseDictionary::BaseDictionary(Matrix atoms, Origin origin) : atoms_(std::move(atoms)), origin_(origin) {
  if (atoms_.cols() < 1) throw DimensionError("a base dictionary needs at least one atom");
  if (atoms_.rows() < 1) throw DimensionError("atom dimension must be positive");
  for (Index k = 0; k < atoms_.cols(); ++k) {
    const double n = atoms_.col(k).norm();
    if (!std::isfinite(n) || n == 0.0)
      throw InvalidArgument("atom " + std::to_string(k) + " is zero or non-finite");
    atoms_.col(k) /= n;
  }
}

BaseDictionary BaseDictionary::from_unit_atoms(Matrix atoms, Origin origin) {
  for (Index k = 0; k < atoms.cols(); ++k)
    if (!(std::abs(atoms.col(k).norm() - 1.0) <= 1e-10))
      throw InvalidArgument("atom " + std::to_string(k) + " is not unit-norm");
  BaseDictionary d;
  d.atoms_ = std::move(atoms);
  d.origin_ = origin;
  return d;
}

BaseDictionary BaseDictionary::empty(Index dim, Origin origin) {
  BaseDictionary d;
  d.atoms_.resize(dim, 0);
  d.origin_ = origin;
  return d;
}

CompositeDictionary::CompositeDictionary(BaseDictionary global, BaseDictionary specific)
    : global_(std::move(global)), specific_(std::move(specific)) {
  if (global_.dim() != specific_.dim())
    throw DimensionError("global and specific atoms differ in dimension");
  if (size() == 0) throw DimensionError("composite dictionary has no atoms");
}

Matrix CompositeDictionary::stacked() const {
  Matrix d(dim(), size());
  d.leftCols(global_count()) = global_.atoms();
  d.rightCols(specific_count()) = specific_.atoms();
  return d;
}

// --- OMP ------------------------------------------------------------------------

SparseColumn omp(const Matrix& dictionary, const Matrix& gram, const Eigen::Ref<const Vector>& x,
                 Index sparsity) {
  SparseColumn out;
  const double energy = x.squaredNorm();
  if (energy == 0.0 || sparsity < 1) return out;

  const Vector alpha = dictionary.transpose() * x;
  Vector corr = alpha;
  std::vector<Index>& support = out.index;
  Vector coef;
  std::vector<char> used(static_cast<std::size_t>(dictionary.cols()), 0);

  for (Index t = 0; t < sparsity && t < dictionary.cols(); ++t) {
    Index best = -1;
    double best_abs = 0.0;
    for (Index k = 0; k < corr.size(); ++k) {
      if (used[static_cast<std::size_t>(k)]) continue;
      const double a = std::abs(corr(k));
      if (a > best_abs) {
        best_abs = a;
        best = k;
      }
    }
    if (best < 0 || best_abs <= 1e-12 * std::sqrt(energy)) break;
    support.push_back(best);
    used[static_cast<std::size_t>(best)] = 1;

    const Index s = static_cast<Index>(support.size());
    Matrix g(s, s);
    Vector rhs(s);
    for (Index i = 0; i < s; ++i) {
      rhs(i) = alpha(support[static_cast<std::size_t>(i)]);
      for (Index j = 0; j < s; ++j)
        g(i, j) = gram(support[static_cast<std::size_t>(i)], support[static_cast<std::size_t>(j)]);
    }
    Eigen::LDLT<Matrix> ldlt(g);
    Vector next = ldlt.solve(rhs);
    if (ldlt.info() != Eigen::Success || !next.allFinite()) {
      support.pop_back();
      break;
    }
    coef = std::move(next);

    const double residual = energy - coef.dot(rhs);
    if (residual <= 1e-14 * energy) break;
    corr = alpha;
    for (Index i = 0; i < s; ++i) corr -= gram.col(support[static_cast<std::size_t>(i)]) * coef(i);
  }
  out.value.assign(coef.data(), coef.data() + coef.size());
  out.index.resize(out.value.size());
  return out;
}

namespace {

double column_error(const Matrix& dictionary, const Eigen::Ref<const Vector>& x, const SparseColumn& code) {
  Vector r = x;
  for (std::size_t i = 0; i < code.index.size(); ++i) r -= dictionary.col(code.index[i]) * code.value[i];
  return r.squaredNorm();
}

std::vector<Index> shuffled_indices(Index n, std::mt19937_64& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  // Fisher-Yates with explicit draws, so the order does not depend on the
  // standard library's shuffle implementation.
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  return idx;
}

// Atoms this close to an earlier one are treated as duplicates.
constexpr double kDuplicateCoherence = 0.99;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

// --- K-SVD ----------------------------------------------------------------------

BaseDictionary ksvd_learn(const ExamplePool& pool, const KsvdOptions& options,
                          std::vector<double>* error_trace) {
  const Index n = pool.size();
  const Index p = pool.dim();
  const Index k_atoms = options.atom_count;
  if (k_atoms < 1) throw InvalidArgument("atom_count must be >= 1");
  if (options.target_sparsity < 1) throw InvalidArgument("target_sparsity must be >= 1");
  if (options.iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (n < k_atoms)
    throw InvalidArgument("example pool (" + std::to_string(n) + ") is smaller than atom_count (" +
                          std::to_string(k_atoms) + ")");
  const Matrix& x = pool.examples;

  std::mt19937_64 rng(options.seed);
  Matrix dict(p, k_atoms);
  {
    Index filled = 0;
    for (Index i : shuffled_indices(n, rng)) {
      const double nrm = x.col(i).norm();
      if (nrm <= 1e-12) continue;
      dict.col(filled++) = x.col(i) / nrm;
      if (filled == k_atoms) break;
    }
    if (filled < k_atoms) throw InvalidArgument("pool has fewer nonzero examples than atom_count");
  }

  std::vector<SparseColumn> codes(static_cast<std::size_t>(n));
  std::vector<double> errors(static_cast<std::size_t>(n), 0.0);
  Matrix residual(p, n);
  if (error_trace) error_trace->clear();
  const double denom = static_cast<double>(n) * static_cast<double>(p);

  // Sparse coding stage. An example keeps its current code unless OMP does
  // better or the code refers to a replaced atom. Returns the mean error.
  auto coding_stage = [&](const std::vector<char>& stale, bool first) {
    const Matrix gram = dict.transpose() * dict;
#pragma omp parallel for schedule(static)
    for (Index i = 0; i < n; ++i) {
      const auto si = static_cast<std::size_t>(i);
      SparseColumn fresh = omp(dict, gram, x.col(i), options.target_sparsity);
      const double e = column_error(dict, x.col(i), fresh);
      const double kept = first || stale[si] ? std::numeric_limits<double>::infinity()
                                             : column_error(dict, x.col(i), codes[si]);
      if (e < kept) {
        codes[si] = std::move(fresh);
        errors[si] = e;
      } else {
        errors[si] = kept;
      }
      Vector r = x.col(i);
      for (std::size_t j = 0; j < codes[si].index.size(); ++j) r -= dict.col(codes[si].index[j]) * codes[si].value[j];
      residual.col(i) = r;
    }
    double total = 0.0;
    for (double e : errors) total += e;
    return total / denom;
  };

  // Exact rank-1 refit of every used atom and its coefficients.
  auto update_atoms = [&]() {
    std::vector<std::vector<std::pair<Index, std::size_t>>> users(static_cast<std::size_t>(k_atoms));
    for (Index i = 0; i < n; ++i) {
      const auto& c = codes[static_cast<std::size_t>(i)];
      for (std::size_t j = 0; j < c.index.size(); ++j) users[static_cast<std::size_t>(c.index[j])].emplace_back(i, j);
    }
    for (Index k = 0; k < k_atoms; ++k) {
      const auto& uk = users[static_cast<std::size_t>(k)];
      if (uk.empty()) continue;
      const Index m = static_cast<Index>(uk.size());
      Matrix e(p, m);
      for (Index t = 0; t < m; ++t) {
        const auto [i, j] = uk[static_cast<std::size_t>(t)];
        e.col(t) = residual.col(i) + dict.col(k) * codes[static_cast<std::size_t>(i)].value[j];
      }
      Eigen::SelfAdjointEigenSolver<Matrix> eig(e * e.transpose());
      if (eig.eigenvalues()(p - 1) <= 0.0) continue;
      Vector u = eig.eigenvectors().col(p - 1);
      if (u.dot(dict.col(k)) < 0.0) u = -u;
      const Vector coef = e.transpose() * u;
      dict.col(k) = u;
      for (Index t = 0; t < m; ++t) {
        const auto [i, j] = uk[static_cast<std::size_t>(t)];
        codes[static_cast<std::size_t>(i)].value[j] = coef(t);
        residual.col(i) = e.col(t) - u * coef(t);
      }
    }
  };

  // Unused atoms and near-duplicates of an earlier atom are replaced by the
  // worst-represented examples (normalized), skipping repeats. Codes that
  // used a replaced atom go stale.
  auto replace_atoms = [&](std::vector<char>& stale) {
    std::vector<Index> usage(static_cast<std::size_t>(k_atoms), 0);
    for (const auto& c : codes)
      for (Index k : c.index) ++usage[static_cast<std::size_t>(k)];
    const Matrix coherence = (dict.transpose() * dict).cwiseAbs();
    std::vector<char> replaced(static_cast<std::size_t>(k_atoms), 0);
    std::vector<Index> by_error;
    std::size_t next_worst = 0;
    std::vector<Index> placed;
    for (Index k = 0; k < k_atoms; ++k) {
      bool duplicate = false;
      for (Index j = 0; j < k && !duplicate; ++j)
        duplicate = !replaced[static_cast<std::size_t>(j)] && coherence(j, k) > kDuplicateCoherence;
      if (usage[static_cast<std::size_t>(k)] > 0 && !duplicate) continue;
      if (by_error.empty()) {
        by_error.resize(static_cast<std::size_t>(n));
        std::iota(by_error.begin(), by_error.end(), Index{0});
        const Vector err = residual.colwise().squaredNorm();
        std::stable_sort(by_error.begin(), by_error.end(), [&](Index a, Index b) { return err(a) > err(b); });
      }
      Index cand = -1;
      while (cand < 0 && next_worst < by_error.size()) {
        const Index i = by_error[next_worst++];
        if (residual.col(i).squaredNorm() <= 1e-24) {
          next_worst = by_error.size();
          break;
        }
        const Vector v = x.col(i).normalized();
        bool repeats = false;
        for (Index j : placed) repeats = repeats || std::abs(dict.col(j).dot(v)) > kDuplicateCoherence;
        if (!repeats) cand = i;
      }
      if (cand < 0) break;
      dict.col(k) = x.col(cand).normalized();
      replaced[static_cast<std::size_t>(k)] = 1;
      placed.push_back(k);
    }
    if (placed.empty()) return false;
    for (Index i = 0; i < n; ++i)
      for (Index k : codes[static_cast<std::size_t>(i)].index)
        if (replaced[static_cast<std::size_t>(k)]) stale[static_cast<std::size_t>(i)] = 1;
    return true;
  };

  double current = coding_stage({}, true);
  if (error_trace) error_trace->push_back(current);
  for (int it = 1; it <= options.iterations; ++it) {
    // An iteration whose error would rise is rolled back; without atom
    // replacement a rise can only come from rounding, and learning stops.
    const Matrix saved_dict = dict;
    const std::vector<SparseColumn> saved_codes = codes;
    const std::vector<double> saved_errors = errors;
    const Matrix saved_residual = residual;
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      std::vector<char> stale(static_cast<std::size_t>(n), 0);
      update_atoms();
      if (attempt == 0) {
        if (!replace_atoms(stale)) attempt = 1;
      }
      const double next = coding_stage(stale, false);
      if (next <= current) {
        current = next;
        accepted = true;
      } else {
        dict = saved_dict;
        codes = saved_codes;
        errors = saved_errors;
        residual = saved_residual;
      }
    }
    if (!accepted) {
      if (error_trace) error_trace->resize(static_cast<std::size_t>(options.iterations) + 1, current);
      break;
    }
    if (error_trace) error_trace->push_back(current);
  }
  return BaseDictionary(std::move(dict), pool.origin);
}

// --- k-means --------------------------------------------------------------------

BaseDictionary knn_global_base(const ExamplePool& pool, Index atom_count, std::uint64_t seed,
                               int max_iterations) {
  const Index n = pool.size();
  const Index p = pool.dim();
  if (atom_count < 1) throw InvalidArgument("atom_count must be >= 1");
  if (n < atom_count) throw InvalidArgument("example pool is smaller than the requested centroid count");
  const Matrix& x = pool.examples;
  std::mt19937_64 rng(seed);

  // k-means++ seeding.
  Matrix centers(p, atom_count);
  std::vector<char> chosen(static_cast<std::size_t>(n), 0);
  Vector d2(n);
  {
    const auto first = static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
    centers.col(0) = x.col(first);
    chosen[static_cast<std::size_t>(first)] = 1;
    d2 = (x.colwise() - centers.col(0)).colwise().squaredNorm().transpose();
  }
  for (Index c = 1; c < atom_count; ++c) {
    const double total = d2.sum();
    Index pick = -1;
    if (total > 0.0) {
      const double target = uniform01(rng) * total;
      double acc = 0.0;
      for (Index i = 0; i < n; ++i) {
        acc += d2(i);
        if (acc > target && d2(i) > 0.0) {
          pick = i;
          break;
        }
      }
    }
    if (pick < 0) {
      // Remaining points coincide with existing centers: take any unchosen one.
      std::vector<Index> free;
      for (Index i = 0; i < n; ++i)
        if (!chosen[static_cast<std::size_t>(i)]) free.push_back(i);
      pick = free[static_cast<std::size_t>(rng() % free.size())];
    }
    chosen[static_cast<std::size_t>(pick)] = 1;
    centers.col(c) = x.col(pick);
    d2 = d2.cwiseMin((x.colwise() - centers.col(c)).colwise().squaredNorm().transpose());
  }

  // Lloyd iterations.
  std::vector<Index> assign(static_cast<std::size_t>(n), -1);
  Vector dist(n);
  for (int it = 0; it < max_iterations; ++it) {
    bool changed = false;
    const Vector cnorm = centers.colwise().squaredNorm().transpose();
#pragma omp parallel for schedule(static) reduction(|| : changed)
    for (Index i = 0; i < n; ++i) {
      const Vector scores = cnorm - 2.0 * (centers.transpose() * x.col(i));
      Index best = 0;
      for (Index c = 1; c < atom_count; ++c)
        if (scores(c) < scores(best)) best = c;
      dist(i) = std::max(0.0, scores(best) + x.col(i).squaredNorm());
      if (assign[static_cast<std::size_t>(i)] != best) {
        assign[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
    }
    if (!changed && it > 0) break;

    Matrix sums = Matrix::Zero(p, atom_count);
    std::vector<Index> counts(static_cast<std::size_t>(atom_count), 0);
    for (Index i = 0; i < n; ++i) {
      sums.col(assign[static_cast<std::size_t>(i)]) += x.col(i);
      ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
    }
    for (Index c = 0; c < atom_count; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        centers.col(c) = sums.col(c) / static_cast<double>(counts[static_cast<std::size_t>(c)]);
        continue;
      }
      // Empty cluster: re-seed from the example farthest from its center.
      Index far = 0;
      for (Index i = 1; i < n; ++i)
        if (dist(i) > dist(far)) far = i;
      centers.col(c) = x.col(far);
      dist(far) = 0.0;
      assign[static_cast<std::size_t>(far)] = c;
    }
  }

  // Normalize; a zero centroid falls back to its largest member.
  for (Index c = 0; c < atom_count; ++c) {
    if (centers.col(c).norm() > 1e-12) continue;
    Index best = -1;
    double best_norm = 1e-12;
    for (Index i = 0; i < n; ++i) {
      if (assign[static_cast<std::size_t>(i)] != c) continue;
      const double nn = x.col(i).norm();
      if (nn > best_norm) {
        best_norm = nn;
        best = i;
      }
    }
    if (best < 0) throw InvalidArgument("k-means cluster " + std::to_string(c) + " has only zero examples");
    centers.col(c) = x.col(best);
  }
  return BaseDictionary(std::move(centers), pool.origin);
}

// --- nearest internal examples ---------------------------------------------------

BaseDictionary knn_specific_base(const Matrix& candidates, const Eigen::Ref<const Vector>& query,
                                 Index count, Index exclude) {
  if (count < 1) throw InvalidArgument("count must be >= 1");
  if (query.size() != candidates.rows()) throw DimensionError("query and candidate dimensions differ");
  std::vector<std::pair<double, Index>> order;
  order.reserve(static_cast<std::size_t>(candidates.cols()));
  for (Index i = 0; i < candidates.cols(); ++i) {
    if (i == exclude || candidates.col(i).squaredNorm() <= 1e-24) continue;
    order.emplace_back((candidates.col(i) - query).squaredNorm(), i);
  }
  if (static_cast<Index>(order.size()) < count)
    throw InvalidArgument("only " + std::to_string(order.size()) + " eligible internal candidates, " +
                          std::to_string(count) + " requested");
  std::partial_sort(order.begin(), order.begin() + count, order.end());
  Matrix atoms(candidates.rows(), count);
  for (Index k = 0; k < count; ++k) atoms.col(k) = candidates.col(order[static_cast<std::size_t>(k)].second);
  return BaseDictionary(std::move(atoms), Origin::internal);
}

BaseDictionary knn_specific_base(const PatchDecomposition& candidates,
                                 const Eigen::Ref<const Vector>& query, Index count) {
  return knn_specific_base(candidates.patches, query, count);
}

// --- coupled learning -----------------------------------------------------------

CoupledDictionaryPair coupled_learn(const PairPool& pairs, const KsvdOptions& options,
                                    std::vector<double>* error_trace) {
  if (pairs.high.cols() != pairs.low.cols()) throw DimensionError("high and low pools differ in size");
  const Index ph = pairs.high.rows();
  const Index pl = pairs.low.rows();
  const double sh = 1.0 / std::sqrt(static_cast<double>(ph));
  const double sl = 1.0 / std::sqrt(static_cast<double>(pl));

  ExamplePool joint;
  joint.origin = pairs.origin;
  joint.examples.resize(ph + pl, pairs.size());
  joint.examples.topRows(ph) = pairs.high * sh;
  joint.examples.bottomRows(pl) = pairs.low * sl;
  const BaseDictionary learned = ksvd_learn(joint, options, error_trace);

  // Rescale so that codes solved against the unit-norm low atoms map onto
  // high-space features: x_h ~ sum_k high_k * b_k with b_k = a_k |l_k| / sl.
  std::vector<Index> keep;
  for (Index k = 0; k < learned.count(); ++k)
    if (learned.atoms().col(k).tail(pl).norm() > 1e-8) keep.push_back(k);
  if (keep.empty()) throw InvalidArgument("coupled learning produced no atoms with low-resolution support");

  Matrix low(pl, static_cast<Index>(keep.size()));
  Matrix high(ph, static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    const auto atom = learned.atoms().col(keep[j]);
    const double lnorm = atom.tail(pl).norm();
    low.col(static_cast<Index>(j)) = atom.tail(pl) / lnorm;
    high.col(static_cast<Index>(j)) = atom.head(ph) * (sl / (sh * lnorm));
  }
  return CoupledDictionaryPair{BaseDictionary(std::move(low), pairs.origin), std::move(high)};
}

// --- serialization --------------------------------------------------------------

namespace {

constexpr char kDictMagic[8] = {'C', 'D', 'S', 'C', 'D', 'I', 'C', 'T'};

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw IoError("truncated dictionary file");
  return v;
}

void write_matrix_file(const Matrix& atoms, Origin origin, std::uint8_t kind, const std::filesystem::path& path,
                       const nlohmann::json& provenance) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kDictMagic, 8);
  put<std::uint32_t>(out, 1);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(atoms.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(atoms.cols()));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(origin));
  put<std::uint8_t>(out, kind);
  put<std::uint16_t>(out, 0);
  // Column-major storage already lays atoms out one after another.
  out.write(reinterpret_cast<const char*>(atoms.data()),
            static_cast<std::streamsize>(atoms.size() * static_cast<Index>(sizeof(double))));
  if (!out) throw IoError("write failed: " + path.string());

  nlohmann::json side = provenance.is_object() ? provenance : nlohmann::json::object();
  side["dim"] = atoms.rows();
  side["count"] = atoms.cols();
  side["origin"] = std::string(to_string(origin));
  side["kind"] = kind == 0 ? "unit_atoms" : "coupled_high";
  std::ofstream js(path.string() + ".json");
  js << side.dump(2) << '\n';
}

std::pair<Matrix, Origin> read_matrix_file(const std::filesystem::path& path, std::uint8_t expected_kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dictionary " + path.string());
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kDictMagic, 8) != 0) throw IoError(path.string() + ": not a dictionary file");
  if (get<std::uint32_t>(in) != 1) throw IoError(path.string() + ": unsupported version");
  const auto dim = get<std::uint32_t>(in);
  const auto count = get<std::uint32_t>(in);
  const auto origin = get<std::uint8_t>(in);
  const auto kind = get<std::uint8_t>(in);
  get<std::uint16_t>(in);
  if (origin > 1) throw IoError(path.string() + ": bad origin tag");
  if (kind != expected_kind) throw IoError(path.string() + ": unexpected dictionary kind");
  Matrix atoms(dim, count);
  in.read(reinterpret_cast<char*>(atoms.data()), static_cast<std::streamsize>(atoms.size() * 8));
  if (in.gcount() != static_cast<std::streamsize>(atoms.size() * 8)) throw IoError(path.string() + ": truncated");
  return {std::move(atoms), static_cast<Origin>(origin)};
}

}  // namespace

void save_dictionary(const BaseDictionary& dictionary, const std::filesystem::path& path,
                     const nlohmann::json& provenance) {
  write_matrix_file(dictionary.atoms(), dictionary.origin(), 0, path, provenance);
}

BaseDictionary load_dictionary(const std::filesystem::path& path) {
  auto [atoms, origin] = read_matrix_file(path, 0);
  for (Index k = 0; k < atoms.cols(); ++k)
    if (std::abs(atoms.col(k).norm() - 1.0) > 1e-10) throw IoError(path.string() + ": atom not unit-norm");
  if (atoms.cols() == 0) return BaseDictionary::empty(atoms.rows(), origin);
  // Stored atoms are kept bit-exact rather than renormalized.
  return BaseDictionary::from_unit_atoms(std::move(atoms), origin);
}

void save_coupled(const CoupledDictionaryPair& pair, const std::filesystem::path& prefix,
                  const nlohmann::json& provenance) {
  write_matrix_file(pair.low.atoms(), pair.low.origin(), 0, prefix.string() + ".low.dict", provenance);
  write_matrix_file(pair.high, pair.low.origin(), 1, prefix.string() + ".high.dict", provenance);
}

CoupledDictionaryPair load_coupled(const std::filesystem::path& prefix) {
  BaseDictionary low = load_dictionary(prefix.string() + ".low.dict");
  auto [high, origin] = read_matrix_file(prefix.string() + ".high.dict", 1);
  if (high.cols() != low.count()) throw IoError(prefix.string() + ": coupled halves differ in atom count");
  return CoupledDictionaryPair{std::move(low), std::move(high)};
}

}  // namespace cdsc
