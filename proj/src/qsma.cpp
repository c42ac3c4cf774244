#include "jointbe/qsma.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include "jointbe/csv.hpp"
#include "jointbe/error.hpp"

namespace jointbe {

namespace {

std::vector<ModeShape> solve_modes(const Mat& k, const Mat& m, const Mat& basis, int n_modes) {
  if (n_modes < 1) throw Error(ErrorCategory::config, "modes: at least one mode must be requested");
  const Mat kz = basis.transpose() * k * basis;
  const Mat mz = basis.transpose() * m * basis;
  const int n = static_cast<int>(kz.rows());
  if (n_modes > n) {
    throw Error(ErrorCategory::config, "modes: " + std::to_string(n_modes) + " modes requested but only " +
                                           std::to_string(n) + " coordinates remain");
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(0.5 * (kz + kz.transpose()), 0.5 * (mz + mz.transpose()));
  if (es.info() != Eigen::Success) throw Error(ErrorCategory::numerical, "modes: eigensolver failed");
  const double scale = kz.trace() / mz.trace();
  if (es.eigenvalues()(0) < 1e-10 * scale) {
    throw Error(ErrorCategory::numerical,
                "modes: rigid-body mode detected; no closed contact or support restrains the structure");
  }
  std::vector<ModeShape> out;
  for (int i = 0; i < n_modes; ++i) {
    ModeShape s;
    s.phi = basis * es.eigenvectors().col(i);
    s.phi /= std::sqrt(s.phi.dot(m * s.phi));
    s.omega = std::sqrt(es.eigenvalues()(i));
    s.id = i + 1;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<int> components(const std::vector<int>& points) {
  std::vector<int> out;
  for (int j : points) {
    for (int c = 0; c < 3; ++c) out.push_back(3 * j + c);
  }
  return out;
}

double interpolate(const std::vector<double>& x, const std::vector<double>& y, double at) {
  if (at <= x.front()) return y.front();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  if (it == x.end()) return y.back();
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + t * (y[i] - y[i - 1]);
}

Vec interpolate(const std::vector<double>& x, const std::vector<Vec>& y, double at) {
  if (at <= x.front()) return y.front();
  const auto it = std::upper_bound(x.begin(), x.end(), at);
  if (it == x.end()) return y.back();
  const std::size_t i = static_cast<std::size_t>(it - x.begin());
  const double t = (at - x[i - 1]) / (x[i] - x[i - 1]);
  return y[i - 1] + t * (y[i] - y[i - 1]);
}

double modal_displacement(const ModalLoad& load, const ContactState& s, const ContactState& pre, double alpha) {
  return load.q_per_alpha * alpha + load.q_per_force.dot(s.force - pre.force);
}

Vec sensor_displacement(const ModalLoad& load, const ContactState& s, const ContactState& pre, double alpha) {
  if (load.sensor_per_alpha.size() == 0) return Vec();
  return load.sensor_per_alpha * alpha + load.sensor_per_force * (s.force - pre.force);
}

}  // namespace

std::vector<ModeShape> modes_with_stiffness(const ReducedModel& rom, const Mat& k_bb, int n_modes) {
  Mat k = rom.k_red;
  if (k_bb.size() > 0) {
    if (k_bb.rows() != rom.n_boundary || k_bb.cols() != rom.n_boundary) {
      throw Error(ErrorCategory::input, "modes: boundary stiffness has the wrong size");
    }
    k.topLeftCorner(rom.n_boundary, rom.n_boundary) += k_bb;
  }
  return solve_modes(k, rom.m_red, Mat::Identity(rom.size(), rom.size()), n_modes);
}

std::vector<ModeShape> constrained_modes(const ReducedModel& rom, const Mat& w, int n_modes) {
  if (w.rows() != rom.n_boundary) throw Error(ErrorCategory::input, "modes: constraint rows do not match q_b");
  // Null space of W^T is the orthogonal complement of range(W).
  Eigen::ColPivHouseholderQR<Mat> qr(w);
  qr.setThreshold(1e-10);
  const int rank = static_cast<int>(qr.rank());
  const Mat q = qr.householderQ();
  const int nb = rom.n_boundary;
  Mat basis = Mat::Zero(rom.size(), rom.size() - rank);
  basis.topLeftCorner(nb, nb - rank) = q.rightCols(nb - rank);
  basis.bottomRightCorner(rom.n_modes, rom.n_modes).setIdentity();
  return solve_modes(rom.k_red, rom.m_red, basis, n_modes);
}

std::vector<ModeShape> linearized_modes(const ReducedModel& rom, const CondensedSystem& cs,
                                        const ContactState& state, int n_modes) {
  if (cs.rigid) throw Error(ErrorCategory::input, "modes: a rigid condensed system has no structural modes");
  const auto cl = classify_sets(state).cl;
  if (cl.empty()) return modes_with_stiffness(rom, Mat(), n_modes);
  const auto idx = components(cl);
  Mat w(cs.w_b.rows(), static_cast<int>(idx.size()));
  Mat c(idx.size(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    w.col(static_cast<int>(i)) = cs.w_b.col(idx[i]);
    for (std::size_t j = 0; j < idx.size(); ++j) c(static_cast<int>(i), static_cast<int>(j)) = cs.c_be(idx[i], idx[j]);
  }
  Eigen::LLT<Mat> llt(c);
  if (c.cwiseAbs().maxCoeff() == 0.0 || llt.info() != Eigen::Success) return constrained_modes(rom, w, n_modes);
  const Mat kt = w * llt.solve(w.transpose());
  return modes_with_stiffness(rom, 0.5 * (kt + kt.transpose()), n_modes);
}

std::vector<ModeShape> tied_modes(const ReducedModel& rom, const CondensedSystem& cs, int n_modes) {
  if (cs.rigid) throw Error(ErrorCategory::input, "modes: a rigid condensed system has no structural modes");
  return constrained_modes(rom, cs.w_b, n_modes);
}

Mat observation_matrix(const FeModel& model, const ReducedModel& rom, const std::vector<int>& physical_dofs) {
  Mat out(physical_dofs.size(), rom.size());
  const bool identity = model.to_physical.size() == 0;
  const SpMat pt = identity ? SpMat() : SpMat(model.to_physical.transpose());
  const int rows = identity ? model.size() : static_cast<int>(model.to_physical.rows());
  for (std::size_t i = 0; i < physical_dofs.size(); ++i) {
    const int d = physical_dofs[i];
    if (d < 0 || d >= rows) throw Error(ErrorCategory::input, "observation: physical DOF out of range");
    if (identity) {
      out.row(static_cast<int>(i)) = rom.basis.row(d);
    } else {
      const Vec r = Vec(pt.col(d));
      out.row(static_cast<int>(i)) = r.transpose() * rom.basis;
    }
  }
  return out;
}

ModalLoad modal_load(const ReducedModel& rom, const CondensedSystem& cs, const ModeShape& mode,
                     const Mat& observation) {
  if (cs.rigid) throw Error(ErrorCategory::input, "modal load: needs a flexible condensed system");
  const int nb = rom.n_boundary, nm = rom.n_modes;
  if (mode.phi.size() != rom.size()) throw Error(ErrorCategory::input, "modal load: mode shape has the wrong size");
  const Vec f = rom.m_red * mode.phi;  // M phi, also (phi^T M)^T
  const Vec omega2 = rom.k_red.diagonal().tail(nm);
  ModalLoad load;
  load.gap_pattern = cs.pattern_for(f);
  const Vec kf = cs.kbb.solve(f.head(nb));
  Vec eta = f.tail(nm).cwiseQuotient(omega2);
  load.q_per_alpha = f.head(nb).dot(kf) + f.tail(nm).dot(eta);
  load.q_per_force = cs.w_b.transpose() * cs.kbb.solve(f.head(nb));
  if (observation.size() > 0) {
    if (observation.cols() != rom.size()) throw Error(ErrorCategory::input, "modal load: observation rows have the wrong width");
    const Mat ob = observation.leftCols(nb);
    load.sensor_per_alpha = ob * kf + observation.rightCols(nm) * eta;
    load.sensor_per_force = (cs.w_b.transpose() * cs.kbb.solve(ob.transpose())).transpose();
  }
  return load;
}

HysteresisRecord modal_load_sweep(ContactSolver& solver, const ContactState& preload, const ModalLoad& load,
                                  const std::vector<double>& alphas, int substeps, const StepObserver& observer) {
  if (substeps < 1) throw Error(ErrorCategory::config, "modal sweep: substeps must be >= 1");
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (!(alphas[i] > (i ? alphas[i - 1] : 0.0))) {
      throw Error(ErrorCategory::config, "modal sweep: load scales must be positive and strictly ascending");
    }
  }
  HysteresisRecord rec;
  rec.alpha.push_back(0.0);
  rec.q_pos.push_back(0.0);
  rec.q_neg.push_back(0.0);
  const Vec s0 = sensor_displacement(load, preload, preload, 0.0);
  rec.sensor_pos.push_back(s0);
  rec.sensor_neg.push_back(s0);

  std::size_t reached[2] = {alphas.size(), alphas.size()};
  std::vector<double> q[2];
  std::vector<Vec> sens[2];
  for (int branch = 0; branch < 2; ++branch) {
    const double sign = branch == 0 ? 1.0 : -1.0;
    ContactState s = preload;
    double a_prev = 0.0;
    for (std::size_t i = 0; i < alphas.size(); ++i) {
      const double a0 = i ? alphas[i - 1] : 0.0;
      try {
        for (int k = 1; k <= substeps; ++k) {
          const double a = a0 + (alphas[i] - a0) * k / substeps;
          StepReport rep;
          s = solver.step(s, load.gap_pattern * (sign * (a - a_prev)), &rep);
          a_prev = a;
          if (observer) observer(s, rep);
        }
      } catch (const Error& e) {
        std::ostringstream msg;
        msg << e.what() << " (modal load scale " << sign * a_prev << ")";
        if (rec.failure.empty() || i < std::min(reached[0], reached[1])) {
          rec.failure = msg.str();
          rec.failed_alpha = sign * a_prev;
        }
        reached[branch] = i;
        break;
      }
      q[branch].push_back(modal_displacement(load, s, preload, sign * alphas[i]));
      sens[branch].push_back(sensor_displacement(load, s, preload, sign * alphas[i]));
    }
  }
  const std::size_t n = std::min(reached[0], reached[1]);
  for (std::size_t i = 0; i < n; ++i) {
    rec.alpha.push_back(alphas[i]);
    rec.q_pos.push_back(q[0][i]);
    rec.q_neg.push_back(q[1][i]);
    rec.sensor_pos.push_back(sens[0][i]);
    rec.sensor_neg.push_back(sens[1][i]);
  }
  return rec;
}

HysteresisRecord linear_sweep(const Mat& k, const Mat& m, const Vec& phi, const std::vector<double>& alphas) {
  const Vec f = m * phi;
  Eigen::LLT<Mat> llt(k);
  if (llt.info() != Eigen::Success) throw Error(ErrorCategory::numerical, "linear sweep: stiffness is not positive definite");
  const double flex = f.dot(llt.solve(f));
  HysteresisRecord rec;
  rec.alpha.push_back(0.0);
  rec.q_pos.push_back(0.0);
  rec.q_neg.push_back(0.0);
  for (double a : alphas) {
    rec.alpha.push_back(a);
    rec.q_pos.push_back(flex * a);
    rec.q_neg.push_back(-flex * a);
  }
  return rec;
}

HysteresisLoop masing_cycle(const HysteresisRecord& record, double alpha_hat, int points_per_quarter) {
  if (points_per_quarter < 1) throw Error(ErrorCategory::config, "masing: points per quarter must be >= 1");
  if (!(alpha_hat > 0.0) || alpha_hat > record.alpha_max() * (1 + 1e-12)) {
    throw Error(ErrorCategory::input, "masing: amplitude outside the recorded load range");
  }
  std::vector<double> backbone(record.alpha.size());
  for (std::size_t i = 0; i < backbone.size(); ++i) backbone[i] = 0.5 * (record.q_pos[i] - record.q_neg[i]);
  auto fbar = [&](double b) { return interpolate(record.alpha, backbone, b); };
  const double q_top = interpolate(record.alpha, record.q_pos, alpha_hat);
  const double q_bottom = interpolate(record.alpha, record.q_neg, alpha_hat);

  HysteresisLoop loop;
  const int half = 2 * points_per_quarter;
  for (int i = 0; i <= half; ++i) {
    const double a = alpha_hat - 2.0 * alpha_hat * i / half;
    loop.alpha.push_back(a);
    loop.q.push_back(q_top - 2.0 * fbar(0.5 * (alpha_hat - a)));
  }
  for (int i = 1; i <= half; ++i) {
    const double a = -alpha_hat + 2.0 * alpha_hat * i / half;
    loop.alpha.push_back(a);
    loop.q.push_back(q_bottom + 2.0 * fbar(0.5 * (a + alpha_hat)));
  }
  // Both ends meet by construction; pin them against round-off.
  loop.q.front() = loop.q.back() = q_top;
  loop.q[static_cast<std::size_t>(half)] = q_bottom;
  return loop;
}

double loop_energy(const HysteresisLoop& loop) {
  double e = 0.0;
  for (std::size_t i = 1; i < loop.alpha.size(); ++i) {
    e += 0.5 * (loop.alpha[i] + loop.alpha[i - 1]) * (loop.q[i] - loop.q[i - 1]);
  }
  return e;
}

HysteresisLoop direct_cycle(ContactSolver& solver, const ContactState& preload, const ModalLoad& load,
                            double alpha_hat, int steps_per_quarter) {
  if (steps_per_quarter < 1) throw Error(ErrorCategory::config, "direct cycle: steps per quarter must be >= 1");
  ContactState s = preload;
  const double da = alpha_hat / steps_per_quarter;
  double a = 0.0;
  for (int k = 0; k < steps_per_quarter; ++k) {
    s = solver.step(s, load.gap_pattern * da);
    a += da;
  }
  HysteresisLoop loop;
  loop.alpha.push_back(alpha_hat);
  loop.q.push_back(modal_displacement(load, s, preload, alpha_hat));
  for (int dir : {-1, 1}) {
    for (int k = 1; k <= 2 * steps_per_quarter; ++k) {
      s = solver.step(s, load.gap_pattern * (dir * da));
      a = dir * (-alpha_hat + 2.0 * alpha_hat * k / (2 * steps_per_quarter));
      loop.alpha.push_back(a);
      loop.q.push_back(modal_displacement(load, s, preload, a));
    }
  }
  return loop;
}

ModalPoint modal_properties(const HysteresisRecord& record, double alpha_hat, int points_per_quarter) {
  const HysteresisLoop loop = masing_cycle(record, alpha_hat, points_per_quarter);
  const double span = interpolate(record.alpha, record.q_pos, alpha_hat) -
                      interpolate(record.alpha, record.q_neg, alpha_hat);
  if (!(std::abs(span) > 0.0)) throw Error(ErrorCategory::numerical, "modal properties: zero modal displacement span");
  ModalPoint p;
  p.alpha = alpha_hat;
  p.q_hat = 0.5 * std::abs(span);
  p.omega = std::sqrt(2.0 * alpha_hat / std::abs(span));
  p.energy = loop_energy(loop);
  p.damping = p.energy / (2.0 * std::numbers::pi * std::pow(p.omega * p.q_hat, 2));
  if (!record.sensor_pos.empty() && record.sensor_pos.front().size() > 0) {
    p.amplitude = 0.5 * (interpolate(record.alpha, record.sensor_pos, alpha_hat) -
                         interpolate(record.alpha, record.sensor_neg, alpha_hat))
                            .norm();
  }
  return p;
}

void write_modal_curves(const std::filesystem::path& path, const std::vector<ModalCurveRow>& rows) {
  auto out = csv::open_output(path);
  out << "mode,amplitude_m,omega_rad_s,omega_over_lin,damping_ratio\n";
  for (const auto& r : rows) {
    out << r.mode << ',' << csv::sci(r.amplitude) << ',' << csv::sci(r.omega) << ',' << csv::sci(r.omega_over_lin)
        << ',' << csv::sci(r.damping) << '\n';
  }
}

std::vector<ModalCurveRow> read_modal_curves(const std::filesystem::path& path) {
  const auto t = csv::read(path, {"mode", "amplitude_m", "omega_rad_s", "omega_over_lin", "damping_ratio"});
  std::vector<ModalCurveRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const int line = t.line_numbers[i];
    rows.push_back({static_cast<int>(csv::to_long(r[0], path, line)), csv::to_double(r[1], path, line),
                    csv::to_double(r[2], path, line), csv::to_double(r[3], path, line),
                    csv::to_double(r[4], path, line)});
  }
  return rows;
}

}  // namespace jointbe
