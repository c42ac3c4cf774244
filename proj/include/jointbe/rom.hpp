#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "jointbe/types.hpp"

namespace jointbe {

/// What a model coordinate means physically. Relative coordinates (after
/// relative_transform) are the difference of two matched nodal DOFs.
struct DofInfo {
  int node = -1;       // -1 when not tied to a mesh node
  int direction = -1;  // 0 = x, 1 = y, 2 = z
  bool relative = false;
};

/// Linear FE model M q'' + K q = f_ex.
struct FeModel {
  SpMat mass;
  SpMat stiffness;
  std::vector<int> boundary_dofs;      // ordered q_b
  std::vector<DofInfo> dofs;           // one per coordinate
  std::map<std::string, Vec> loads;    // named load patterns, e.g. "preload"
  SpMat to_physical;                   // maps coordinates to nodal DOFs; empty = identity

  int size() const { return static_cast<int>(mass.rows()); }
  /// Checks dimensions, symmetry (1e-12 relative) and the boundary partition.
  void validate() const;
  /// Physical nodal displacement from model coordinates.
  Vec physical(const Vec& q) const;
};

/// Replaces q_a by the relative coordinate q_a - q_b for every matched pair
/// (a, b) through the congruence T = I + sum e_a e_b^T. The relative coordinates
/// become the boundary set, in pair order. No pairs leaves the model unchanged.
FeModel relative_transform(const FeModel& model,
                           const std::vector<std::pair<int, int>>& matched_pairs);

/// Craig-Bampton reduced model, reduced coordinates ordered [q_b; eta].
struct ReducedModel {
  Mat m_red;                      // R^T M R, modal block = I
  Mat k_red;                      // blockdiag(K_bb_tilde, diag(omega^2))
  Mat basis;                      // R, full model coordinates x reduced coordinates
  std::vector<int> boundary_dofs; // model coordinate of each q_b entry
  Vec fixed_interface_omega;      // ascending [rad/s]
  std::map<std::string, Vec> loads;
  int n_boundary = 0;
  int n_modes = 0;
  double max_mode_residual = 0.0;  // max ||(K_ii - w^2 M_ii) theta|| / ||K_ii||

  int size() const { return n_boundary + n_modes; }
  Mat kbb() const { return k_red.topLeftCorner(n_boundary, n_boundary); }
  Vec reduce_load(const Vec& f) const { return basis.transpose() * f; }
};

struct CraigBamptonOptions {
  /// Inner partitions larger than this use shift-invert subspace iteration
  /// instead of a dense generalized eigensolver.
  int dense_eigen_limit = 600;
};

ReducedModel craig_bampton(const FeModel& model, int n_modes,
                           const CraigBamptonOptions& options = {});

/// Lowest `count` eigenpairs of (K, M) for sparse SPD K and M; vectors are
/// mass-normalized and frequencies ascending. Used for the fixed-interface modes
/// and for free-interface reference spectra.
struct EigenPairs {
  Vec omega;
  Mat vectors;
};
EigenPairs lowest_modes(const SpMat& k, const SpMat& m, int count, int dense_limit = 600);

/// Binary bundle: magic "JBROM001", then counts and raw little-endian doubles.
void write_reduced_model(const std::string& path, const ReducedModel& rom);
ReducedModel read_reduced_model(const std::string& path);

}  // namespace jointbe
