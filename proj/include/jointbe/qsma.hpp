#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "jointbe/contact.hpp"
#include "jointbe/coupling.hpp"
#include "jointbe/rom.hpp"
#include "jointbe/types.hpp"

namespace jointbe {

/// Mass-normalized mode over the reduced coordinates [q_b; eta].
struct ModeShape {
  Vec phi;
  double omega = 0.0;  // [rad/s]
  int id = 0;          // 1-based, ascending frequency
};

/// Lowest modes of (K_red + [k_bb 0; 0 0], M_red). Throws Error(numerical) when
/// a rigid-body mode shows up.
std::vector<ModeShape> modes_with_stiffness(const ReducedModel& rom, const Mat& k_bb, int n_modes);

/// Modes with the constraint W^T q_b = 0 (columns of W tie the interface).
std::vector<ModeShape> constrained_modes(const ReducedModel& rom, const Mat& w, int n_modes);

/// Linearization around a converged state: closed points add the tangent
/// stiffness W_cl C_cl^-1 W_cl^T (normal and tangential, sliding points included),
/// separated points nothing. A singular C_cl (node mode) ties those points.
std::vector<ModeShape> linearized_modes(const ReducedModel& rom, const CondensedSystem& cs,
                                        const ContactState& state, int n_modes);

/// Interface fully tied at every coupled point; the normalization frequencies.
std::vector<ModeShape> tied_modes(const ReducedModel& rom, const CondensedSystem& cs, int n_modes);

/// Rows mapping reduced coordinates to physical displacements at the given
/// physical DOFs (model coordinates pass through to_physical).
Mat observation_matrix(const FeModel& model, const ReducedModel& rom, const std::vector<int>& physical_dofs);

/// Everything a modal load ramp f = M phi alpha needs on the contact grid.
/// Responses are linear in alpha and in the force change since the preload:
///   q_mod = q_per_alpha * alpha + q_per_force . (lambda - lambda_pre)
struct ModalLoad {
  Vec gap_pattern;
  double q_per_alpha = 0.0;
  Vec q_per_force;
  Vec sensor_per_alpha;   // empty without observation rows
  Mat sensor_per_force;
};

ModalLoad modal_load(const ReducedModel& rom, const CondensedSystem& cs, const ModeShape& mode,
                     const Mat& observation = Mat());

/// Initial loading curves in both directions from the preload state.
struct HysteresisRecord {
  std::vector<double> alpha;  // 0 then ascending load scales
  std::vector<double> q_pos;  // q_mod(+alpha)
  std::vector<double> q_neg;  // q_mod(-alpha)
  std::vector<Vec> sensor_pos;
  std::vector<Vec> sensor_neg;
  std::string failure;  // solver message when the ramp stopped early
  double failed_alpha = 0.0;

  double alpha_max() const { return alpha.empty() ? 0.0 : alpha.back(); }
};

using StepObserver = std::function<void(const ContactState&, const StepReport&)>;

/// Ramps alpha through `alphas` (ascending, > 0) in `substeps` equal increments
/// per interval, once towards + and once towards -. A solver failure truncates
/// the record and is stored with the load scale at which it happened.
HysteresisRecord modal_load_sweep(ContactSolver& solver, const ContactState& preload,
                                  const ModalLoad& load, const std::vector<double>& alphas,
                                  int substeps, const StepObserver& observer = {});

/// Linear reference: q = phi^T M K^-1 M phi alpha for a linear stiffness K.
HysteresisRecord linear_sweep(const Mat& k, const Mat& m, const Vec& phi, const std::vector<double>& alphas);

/// Closed loop, starting at +alpha_hat, descending to -alpha_hat and back.
struct HysteresisLoop {
  std::vector<double> alpha;
  std::vector<double> q;
};

/// Masing construction from the symmetrized backbone
/// f(b) = (q_pos(b) - q_neg(b)) / 2, linearly interpolated.
HysteresisLoop masing_cycle(const HysteresisRecord& record, double alpha_hat, int points_per_quarter = 100);

/// Loop integral of alpha dq by the trapezoidal rule (positive when dissipative).
double loop_energy(const HysteresisLoop& loop);

/// Direct simulation of one full load cycle after the initial ramp.
HysteresisLoop direct_cycle(ContactSolver& solver, const ContactState& preload, const ModalLoad& load,
                            double alpha_hat, int steps_per_quarter);

struct ModalPoint {
  double alpha = 0.0;
  double q_hat = 0.0;      // half the modal displacement span
  double omega = 0.0;
  double damping = 0.0;
  double energy = 0.0;
  double amplitude = 0.0;  // half span of the sensor displacement norm [m]
};

ModalPoint modal_properties(const HysteresisRecord& record, double alpha_hat, int points_per_quarter = 100);

struct ModalCurveRow {
  int mode = 0;
  double amplitude = 0.0;
  double omega = 0.0;
  double omega_over_lin = 0.0;
  double damping = 0.0;
};

void write_modal_curves(const std::filesystem::path& path, const std::vector<ModalCurveRow>& rows);
std::vector<ModalCurveRow> read_modal_curves(const std::filesystem::path& path);

}  // namespace jointbe
