#include "jointbe/rom.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <set>

#include "jointbe/error.hpp"

namespace jointbe {

namespace {

double sparse_max_abs(const SpMat& a) {
  double m = 0.0;
  for (int k = 0; k < a.outerSize(); ++k) {
    for (SpMat::InnerIterator it(a, k); it; ++it) m = std::max(m, std::abs(it.value()));
  }
  return m;
}

double sparse_asymmetry(const SpMat& a) {
  const SpMat t = a.transpose();
  const SpMat d = a - t;
  const double scale = sparse_max_abs(a);
  return scale == 0.0 ? 0.0 : sparse_max_abs(d) / scale;
}

// Rows/columns `rows` x `cols` of a sparse matrix as a new sparse matrix.
SpMat extract(const SpMat& a, const std::vector<int>& rows, const std::vector<int>& cols) {
  std::vector<int> row_pos(static_cast<std::size_t>(a.rows()), -1);
  for (std::size_t i = 0; i < rows.size(); ++i) row_pos[static_cast<std::size_t>(rows[i])] = int(i);
  std::vector<Eigen::Triplet<double>> trips;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (SpMat::InnerIterator it(a, cols[j]); it; ++it) {
      const int r = row_pos[static_cast<std::size_t>(it.row())];
      if (r >= 0) trips.emplace_back(r, static_cast<int>(j), it.value());
    }
  }
  SpMat out(static_cast<int>(rows.size()), static_cast<int>(cols.size()));
  out.setFromTriplets(trips.begin(), trips.end());
  return out;
}

EigenPairs dense_modes(const SpMat& k, const SpMat& m, int count) {
  const Mat kd = Mat(k);
  const Mat md = Mat(m);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(kd, md);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCategory::numerical, "eigen solver failed (mass matrix not positive definite?)");
  }
  EigenPairs out;
  out.omega.resize(count);
  out.vectors = es.eigenvectors().leftCols(count);
  for (int i = 0; i < count; ++i) out.omega(i) = std::sqrt(std::max(0.0, es.eigenvalues()(i)));
  return out;
}

// Shift-invert subspace iteration with Rayleigh-Ritz projection.
EigenPairs subspace_modes(const SpMat& k, const SpMat& m, int count) {
  const int n = static_cast<int>(k.rows());
  const int p = std::min(n, std::max(2 * count, count + 8));
  double kd = 0.0, md = 0.0;
  for (int i = 0; i < n; ++i) {
    kd += k.coeff(i, i);
    md += m.coeff(i, i);
  }
  // A small positive shift keeps the factorization valid for semi-definite K.
  const double shift = 1e-8 * kd / md;
  const SpMat ks = k + shift * m;
  Eigen::SimplicialLDLT<SpMat> ldlt(ks);
  if (ldlt.info() != Eigen::Success) {
    throw Error(ErrorCategory::numerical, "subspace iteration: factorization failed");
  }
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> dist;
  Mat x(n, p);
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < n; ++i) x(i, j) = dist(rng);
  }
  Vec previous = Vec::Constant(count, -1.0);
  EigenPairs out;
  for (int iter = 0; iter < 500; ++iter) {
    const Mat y = ldlt.solve(m * x);
    const Mat kr = y.transpose() * (k * y);
    const Mat mr = y.transpose() * (m * y);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (kr + kr.transpose()),
                                                     0.5 * (mr + mr.transpose()));
    if (es.info() != Eigen::Success) {
      throw Error(ErrorCategory::numerical, "subspace iteration: Ritz problem failed");
    }
    x = y * es.eigenvectors();
    const Vec lam = es.eigenvalues().head(count);
    const double change = ((lam - previous).cwiseAbs().array() /
                           lam.cwiseAbs().array().max(1e-300)).maxCoeff();
    previous = lam;
    if (iter > 2 && change < 1e-13) break;
  }
  out.omega.resize(count);
  out.vectors = x.leftCols(count);
  for (int i = 0; i < count; ++i) out.omega(i) = std::sqrt(std::max(0.0, previous(i)));
  return out;
}

}  // namespace

EigenPairs lowest_modes(const SpMat& k, const SpMat& m, int count, int dense_limit) {
  const int n = static_cast<int>(k.rows());
  if (count < 0 || count > n) {
    throw Error(ErrorCategory::input, "lowest_modes: requested mode count out of range");
  }
  if (count == 0) return {Vec(0), Mat(n, 0)};
  EigenPairs pairs = (n <= dense_limit || 3 * count > n) ? dense_modes(k, m, count)
                                                         : subspace_modes(k, m, count);
  for (int j = 0; j < count; ++j) {
    const double norm = std::sqrt(pairs.vectors.col(j).dot(m * pairs.vectors.col(j)));
    pairs.vectors.col(j) /= norm;
  }
  return pairs;
}

void FeModel::validate() const {
  const int n = size();
  if (stiffness.rows() != n || stiffness.cols() != n || mass.cols() != n) {
    throw Error(ErrorCategory::input, "FE model: M and K must be square and of equal size");
  }
  if (static_cast<int>(dofs.size()) != n) {
    throw Error(ErrorCategory::input, "FE model: DOF map size does not match the matrices");
  }
  if (sparse_asymmetry(mass) > 1e-12 || sparse_asymmetry(stiffness) > 1e-12) {
    throw Error(ErrorCategory::input, "FE model: M and K must be symmetric");
  }
  std::set<int> seen;
  for (int d : boundary_dofs) {
    if (d < 0 || d >= n) throw Error(ErrorCategory::input, "FE model: boundary DOF out of range");
    if (!seen.insert(d).second) {
      throw Error(ErrorCategory::input, "FE model: boundary DOF listed twice");
    }
  }
  for (const auto& [name, f] : loads) {
    if (f.size() != n) {
      throw Error(ErrorCategory::input, "FE model: load `" + name + "` has the wrong size");
    }
  }
  if (to_physical.size() != 0 && to_physical.cols() != n) {
    throw Error(ErrorCategory::input, "FE model: physical map has the wrong size");
  }
}

Vec FeModel::physical(const Vec& q) const {
  if (to_physical.size() == 0) return q;
  return to_physical * q;
}

FeModel relative_transform(const FeModel& model,
                           const std::vector<std::pair<int, int>>& matched_pairs) {
  model.validate();
  if (matched_pairs.empty()) return model;
  const int n = model.size();
  std::set<int> used;
  for (const auto& [a, b] : matched_pairs) {
    if (a < 0 || a >= n || b < 0 || b >= n) {
      throw Error(ErrorCategory::input, "relative_transform: DOF out of range");
    }
    if (a == b || !used.insert(a).second || !used.insert(b).second) {
      throw Error(ErrorCategory::input, "relative_transform: DOF " +
                                            std::to_string(used.count(a) ? a : b) +
                                            " appears in more than one pair");
    }
  }
  // q = T q', q_a = r_a + q_b.
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n) + matched_pairs.size());
  for (int i = 0; i < n; ++i) trips.emplace_back(i, i, 1.0);
  for (const auto& [a, b] : matched_pairs) trips.emplace_back(a, b, 1.0);
  SpMat t(n, n);
  t.setFromTriplets(trips.begin(), trips.end());
  const SpMat tt = t.transpose();

  FeModel out;
  out.stiffness = tt * model.stiffness * t;
  out.mass = tt * model.mass * t;
  out.stiffness = 0.5 * (out.stiffness + SpMat(out.stiffness.transpose()));
  out.mass = 0.5 * (out.mass + SpMat(out.mass.transpose()));
  out.dofs = model.dofs;
  for (const auto& [a, b] : matched_pairs) {
    out.dofs[static_cast<std::size_t>(a)].relative = true;
    out.boundary_dofs.push_back(a);
  }
  for (const auto& [name, f] : model.loads) out.loads[name] = tt * f;
  out.to_physical = model.to_physical.size() == 0 ? t : SpMat(model.to_physical * t);
  return out;
}

ReducedModel craig_bampton(const FeModel& model, int n_modes, const CraigBamptonOptions& options) {
  model.validate();
  const int n = model.size();
  const std::vector<int>& b = model.boundary_dofs;
  std::vector<char> is_b(static_cast<std::size_t>(n), 0);
  for (int d : b) is_b[static_cast<std::size_t>(d)] = 1;
  std::vector<int> inner;
  for (int i = 0; i < n; ++i) {
    if (!is_b[static_cast<std::size_t>(i)]) inner.push_back(i);
  }
  const int nb = static_cast<int>(b.size());
  const int ni = static_cast<int>(inner.size());
  if (n_modes < 0 || n_modes > ni) {
    throw Error(ErrorCategory::input, "craig_bampton: n_modes must lie in [0, inner DOF count]");
  }

  const SpMat kii = extract(model.stiffness, inner, inner);
  const SpMat kib = extract(model.stiffness, inner, b);
  const SpMat mii = extract(model.mass, inner, inner);

  Mat psi(ni, nb);
  if (ni > 0) {
    Eigen::SimplicialLDLT<SpMat> ldlt(kii);
    bool ok = ldlt.info() == Eigen::Success;
    if (ok) {
      const Vec d = ldlt.vectorD();
      ok = d.minCoeff() > 1e-12 * d.cwiseAbs().maxCoeff();
    }
    if (!ok) {
      throw Error(ErrorCategory::numerical,
                  "craig_bampton: inner stiffness K_ii is singular or indefinite; the structure "
                  "is not constrained once the boundary is fixed (review boundary conditions)");
    }
    psi = -ldlt.solve(Mat(kib));
  }

  EigenPairs modes = lowest_modes(kii, mii, n_modes, options.dense_eigen_limit);

  ReducedModel rom;
  rom.n_boundary = nb;
  rom.n_modes = n_modes;
  rom.boundary_dofs = b;
  rom.fixed_interface_omega = modes.omega;
  rom.basis = Mat::Zero(n, nb + n_modes);
  for (int j = 0; j < nb; ++j) rom.basis(b[static_cast<std::size_t>(j)], j) = 1.0;
  for (int i = 0; i < ni; ++i) {
    rom.basis.row(inner[static_cast<std::size_t>(i)]).head(nb) = psi.row(i);
    rom.basis.row(inner[static_cast<std::size_t>(i)]).tail(n_modes) = modes.vectors.row(i);
  }

  const double knorm = sparse_max_abs(kii);
  for (int m = 0; m < n_modes; ++m) {
    const Vec r = kii * modes.vectors.col(m) -
                  modes.omega(m) * modes.omega(m) * (mii * modes.vectors.col(m));
    rom.max_mode_residual = std::max(rom.max_mode_residual, r.cwiseAbs().maxCoeff() / knorm);
  }

  // K_tilde is assembled from its closed form: the coupling block vanishes
  // identically because Psi solves the inner equilibrium.
  const SpMat kbb = extract(model.stiffness, b, b);
  Mat kbb_tilde = Mat(kbb) + Mat(kib.transpose()) * psi;
  kbb_tilde = 0.5 * (kbb_tilde + kbb_tilde.transpose()).eval();
  rom.k_red = Mat::Zero(nb + n_modes, nb + n_modes);
  rom.k_red.topLeftCorner(nb, nb) = kbb_tilde;
  for (int m = 0; m < n_modes; ++m) rom.k_red(nb + m, nb + m) = modes.omega(m) * modes.omega(m);

  const Mat mr = rom.basis.transpose() * (model.mass * rom.basis);
  rom.m_red = 0.5 * (mr + mr.transpose());

  for (const auto& [name, f] : model.loads) rom.loads[name] = rom.reduce_load(f);
  return rom;
}

namespace {

constexpr char kMagic[8] = {'J', 'B', 'R', 'O', 'M', '0', '0', '1'};

void put_i64(std::ofstream& out, std::int64_t v) { out.write(reinterpret_cast<char*>(&v), 8); }
std::int64_t get_i64(std::ifstream& in) {
  std::int64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), 8);
  return v;
}
void put_mat(std::ofstream& out, const Mat& m) {
  put_i64(out, m.rows());
  put_i64(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}
Mat get_mat(std::ifstream& in) {
  const auto r = get_i64(in);
  const auto c = get_i64(in);
  if (r < 0 || c < 0 || r > (1 << 24) || c > (1 << 24)) {
    throw Error(ErrorCategory::io, "reduced model bundle: corrupt matrix header");
  }
  Mat m(r, c);
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(sizeof(double) * m.size()));
  return m;
}

}  // namespace

void write_reduced_model(const std::string& path, const ReducedModel& rom) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCategory::io, "cannot open " + path + " for writing");
  out.write(kMagic, 8);
  put_i64(out, rom.n_boundary);
  put_i64(out, rom.n_modes);
  for (int d : rom.boundary_dofs) put_i64(out, d);
  put_mat(out, rom.m_red);
  put_mat(out, rom.k_red);
  put_mat(out, rom.basis);
  put_mat(out, rom.fixed_interface_omega);
  put_i64(out, static_cast<std::int64_t>(rom.loads.size()));
  for (const auto& [name, f] : rom.loads) {
    put_i64(out, static_cast<std::int64_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_mat(out, f);
  }
  if (!out) throw Error(ErrorCategory::io, "failed writing " + path);
}

ReducedModel read_reduced_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCategory::io, "cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kMagic)) {
    throw Error(ErrorCategory::io, path + ": not a reduced-model bundle");
  }
  ReducedModel rom;
  rom.n_boundary = static_cast<int>(get_i64(in));
  rom.n_modes = static_cast<int>(get_i64(in));
  for (int i = 0; i < rom.n_boundary; ++i) rom.boundary_dofs.push_back(static_cast<int>(get_i64(in)));
  rom.m_red = get_mat(in);
  rom.k_red = get_mat(in);
  rom.basis = get_mat(in);
  rom.fixed_interface_omega = get_mat(in);
  const auto nloads = get_i64(in);
  for (std::int64_t i = 0; i < nloads; ++i) {
    const auto len = get_i64(in);
    std::string name(static_cast<std::size_t>(len), '\0');
    in.read(name.data(), len);
    rom.loads[name] = get_mat(in);
  }
  if (!in) throw Error(ErrorCategory::io, path + ": truncated reduced-model bundle");
  return rom;
}

}  // namespace jointbe
