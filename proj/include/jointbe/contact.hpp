#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "jointbe/coupling.hpp"
#include "jointbe/types.hpp"

namespace jointbe {

enum class PointStatus : std::uint8_t { separated, stick, slip };

/// Gap and force per retained point, 3 components each (normal first).
struct ContactState {
  Vec gap;
  Vec force;
  Vec last_increment;              // gap increment of the last load step
  std::vector<std::uint8_t> sliding;  // slipped during the last step
  double mu = 0.0;

  int point_count() const { return static_cast<int>(gap.size() / 3); }
  /// Unstressed, undeformed configuration: g = -h, lambda = 0, nothing sliding.
  static ContactState initial(const CondensedSystem& cs, double mu);
  PointStatus status(int j) const;
  double normal_resultant() const;
};

struct ContactSets {
  std::vector<int> sep;
  std::vector<int> cl;
  std::vector<int> st;
  std::vector<int> a;
};

/// I_sep: open gap and zero normal force; I_cl: the rest (grazing points close).
ContactSets classify_sets(const ContactState& state);

/// Projections onto R0+ and onto the disk of radius r.
inline double project_nonnegative(double xi) { return xi >= 0.0 ? xi : 0.0; }
Eigen::Vector2d project_disk(const Eigen::Vector2d& xi, double r);

struct StickPrediction {
  std::vector<int> st;
  std::vector<int> a;
  Vec lambda_pre;  // full 3C layout; unchanged at separated points
};

/// All closed points assumed sticking: dlambda_cl = -C*_cl^-1 dg_ex_cl; points
/// not sliding before whose prediction lies strictly inside the cone stick.
StickPrediction predict_stick(const ContactState& state, const Mat& c_star,
                              const std::vector<int>& cl, const Vec& dg_ex);

/// dg_a = G dlambda_a + c with G, c the Schur complement of C* onto I_a given
/// zero gap increments on I_st. `active` lists point indices.
struct DelassusProblem {
  Mat g_mat;
  Vec c_vec;
  std::vector<int> active;
};
DelassusProblem build_delassus(const Mat& c_star, const std::vector<int>& st,
                               const std::vector<int>& a, const Vec& dg_ex);

struct PjorOptions {
  double omega = 0.5;        // relaxation, capped by the spectral stability bound
  double tolerance = 1e-10;  // relative fixed-point residual
  int max_iterations = 50000;
  int monitor_window = 50;
};

struct PjorResult {
  Vec x;  // forces
  Vec y;  // G x + c
  int iterations = 0;
  double residual = 0.0;
  double omega = 0.0;  // relaxation actually used
};

/// Solves -(G x + c) in N_C(x), C = prod R0+ x D(mu x_n), for 3-component
/// points, by x <- proj_C[x - eps (G x + c)] with Jacobi scaling eps. When
/// normal_only, G and c cover normal components only (one per point).
PjorResult pjor_solve(const Mat& g, const Vec& c, double mu, const Vec& x0,
                      const PjorOptions& options, bool normal_only = false);

struct StepReport {
  int closed = 0;
  int sticking = 0;
  int active = 0;
  int separated = 0;
  int pjor_iterations = 0;
  double pjor_residual = 0.0;
  int retries = 0;
};

struct InvariantReport {
  double min_normal_force = 0.0;   // normalized by the force scale
  double min_gap = 0.0;            // normalized by the gap scale
  double complementarity = 0.0;    // max |lambda_n g_n| / (force scale * gap scale)
  double cone_excess = 0.0;        // max (|lambda_t| - mu lambda_n) / force scale
  double dissipation = 0.0;        // max lambda_t . dg_t / (force scale * gap scale), <= 0 expected
  double slip_alignment = 0.0;     // max deviation of slip from anti-parallel (1 - cos)
  bool ok(double tol = 1e-6) const;
};

/// Checks the contact laws on a converged state; `increment` is the gap change
/// of the step that produced it.
InvariantReport check_invariants(const ContactState& state, double force_scale, double gap_scale);

struct ContactOptions {
  PjorOptions pjor;
  int max_retries = 40;
};

/// Incremental Coulomb-Signorini solver over a condensed system. Caches the
/// factorization of C*_cl between steps while the closed set is unchanged.
class ContactSolver {
 public:
  ContactSolver(const CondensedSystem& system, double mu, ContactOptions options = {});
  ~ContactSolver();
  ContactSolver(const ContactSolver&) = delete;
  ContactSolver& operator=(const ContactSolver&) = delete;

  /// One load increment with gap-pattern change dg_ex. Returns the new state.
  ContactState step(const ContactState& state, const Vec& dg_ex, StepReport* report = nullptr);

  const CondensedSystem& system() const { return system_; }
  double mu() const { return mu_; }

 private:
  struct Factor;
  const Factor& factor(const std::vector<int>& cl);

  const CondensedSystem& system_;
  double mu_;
  ContactOptions options_;
  bool separable_;
  std::unique_ptr<Factor> cached_;
};

/// CSV dump: point_id,x,y,g_n,g_t1,g_t2,lam_n,lam_t1,lam_t2,status.
void write_state_csv(const std::filesystem::path& path, const ContactState& state,
                     const CondensedSystem& system);

}  // namespace jointbe
