#include "jointbe/contact.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <spdlog/spdlog.h>

#include "jointbe/csv.hpp"
#include "jointbe/error.hpp"

namespace jointbe {

ContactState ContactState::initial(const CondensedSystem& cs, double mu) {
  if (!(mu >= 0.0)) throw Error(ErrorCategory::input, "contact: friction coefficient must be >= 0");
  ContactState s;
  const int n = cs.point_count();
  s.gap = -cs.heights;
  s.force = Vec::Zero(3 * n);
  s.last_increment = Vec::Zero(3 * n);
  s.sliding.assign(static_cast<std::size_t>(n), 0);
  s.mu = mu;
  for (int j = 0; j < n; ++j) {
    if (s.gap(3 * j) < 0.0) {
      throw Error(ErrorCategory::input, "contact: initial interference (height profile above the reference)");
    }
  }
  return s;
}

PointStatus ContactState::status(int j) const {
  if (!(force(3 * j) > 0.0)) return PointStatus::separated;
  return sliding[static_cast<std::size_t>(j)] ? PointStatus::slip : PointStatus::stick;
}

double ContactState::normal_resultant() const {
  double s = 0.0;
  for (int j = 0; j < point_count(); ++j) s += force(3 * j);
  return s;
}

ContactSets classify_sets(const ContactState& state) {
  ContactSets sets;
  for (int j = 0; j < state.point_count(); ++j) {
    if (state.gap(3 * j) > 0.0 && state.force(3 * j) == 0.0) {
      sets.sep.push_back(j);
    } else {
      sets.cl.push_back(j);
    }
  }
  return sets;
}

Eigen::Vector2d project_disk(const Eigen::Vector2d& xi, double r) {
  const double n = xi.norm();
  if (n > r) return n > 0.0 ? Eigen::Vector2d(r * xi / n) : Eigen::Vector2d::Zero();
  return xi;
}

namespace {

std::vector<int> components(const std::vector<int>& points) {
  std::vector<int> out;
  out.reserve(3 * points.size());
  for (int j : points) {
    for (int c = 0; c < 3; ++c) out.push_back(3 * j + c);
  }
  return out;
}

Mat submatrix(const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Mat out(rows.size(), cols.size());
  for (std::size_t c = 0; c < cols.size(); ++c) {
    for (std::size_t r = 0; r < rows.size(); ++r) out(r, c) = m(rows[r], cols[c]);
  }
  return out;
}

Vec subvector(const Vec& v, const std::vector<int>& idx) {
  Vec out(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out(i) = v(idx[i]);
  return out;
}

bool inside_cone(const Vec& lam, int j, double mu) {
  const double ln = lam(3 * j);
  const double lt = std::hypot(lam(3 * j + 1), lam(3 * j + 2));
  return lt < mu * ln;
}

}  // namespace

StickPrediction predict_stick(const ContactState& state, const Mat& c_star,
                              const std::vector<int>& cl, const Vec& dg_ex) {
  if (cl.empty()) throw Error(ErrorCategory::input, "predict_stick: no closed points");
  const auto idx = components(cl);
  Eigen::LLT<Mat> llt(submatrix(c_star, idx, idx));
  if (llt.info() != Eigen::Success) {
    throw Error(ErrorCategory::numerical, "predict_stick: C*(cl,cl) is not positive definite");
  }
  const Vec d = -llt.solve(subvector(dg_ex, idx));
  StickPrediction p;
  p.lambda_pre = state.force;
  for (std::size_t i = 0; i < idx.size(); ++i) p.lambda_pre(idx[i]) += d(static_cast<int>(i));
  for (int j : cl) {
    if (!state.sliding[static_cast<std::size_t>(j)] && inside_cone(p.lambda_pre, j, state.mu)) {
      p.st.push_back(j);
    } else {
      p.a.push_back(j);
    }
  }
  return p;
}

DelassusProblem build_delassus(const Mat& c_star, const std::vector<int>& st,
                               const std::vector<int>& a, const Vec& dg_ex) {
  DelassusProblem p;
  p.active = a;
  const auto ia = components(a);
  const auto is = components(st);
  p.g_mat = submatrix(c_star, ia, ia);
  p.c_vec = subvector(dg_ex, ia);
  if (!is.empty()) {
    Eigen::LLT<Mat> llt(submatrix(c_star, is, is));
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCategory::numerical, "build_delassus: C*(st,st) is not positive definite");
    }
    const Mat cas = submatrix(c_star, ia, is);
    const Mat sol = llt.solve(cas.transpose());
    p.g_mat -= cas * sol;
    p.c_vec -= sol.transpose() * subvector(dg_ex, is);
  }
  p.g_mat = 0.5 * (p.g_mat + p.g_mat.transpose()).eval();
  return p;
}

PjorResult pjor_solve(const Mat& g, const Vec& c, double mu, const Vec& x0,
                      const PjorOptions& options, bool normal_only) {
  const int n = static_cast<int>(g.rows());
  const int stride = normal_only ? 1 : 3;
  if (g.cols() != n || c.size() != n || x0.size() != n || n % stride != 0) {
    throw Error(ErrorCategory::input, "pjor: inconsistent problem dimensions");
  }
  if (!(options.tolerance > 0.0) || options.max_iterations < 1) {
    throw Error(ErrorCategory::config, "pjor: tolerance must be > 0 and max_iterations >= 1");
  }
  PjorResult res;
  res.x = x0;
  if (n == 0) {
    res.y = Vec(0);
    return res;
  }
  const int points = n / stride;

  // One step length per point from the Frobenius norm of its diagonal block.
  Vec d(n);
  for (int j = 0; j < points; ++j) {
    const int k = stride * j;
    for (int q = 0; q < stride; ++q) {
      if (!(g(k + q, k + q) > 0.0)) throw Error(ErrorCategory::numerical, "pjor: Delassus matrix has a non-positive diagonal");
    }
    d.segment(k, stride).setConstant(g.block(k, k, stride, stride).norm());
  }
  const Vec dinv_sqrt = d.cwiseSqrt().cwiseInverse();

  // Largest eigenvalue of D^-1/2 G D^-1/2 by power iteration; the relaxation is
  // capped below the stability limit 2 / lambda_max.
  Vec v = Vec::Ones(n) / std::sqrt(double(n));
  double lmax = 0.0;
  for (int it = 0; it < 300; ++it) {
    Vec w = dinv_sqrt.asDiagonal() * (g * (dinv_sqrt.asDiagonal() * v));
    const double nw = w.norm();
    if (!(nw > 0.0)) break;
    if (std::abs(nw - lmax) < 1e-6 * nw) {
      lmax = nw;
      break;
    }
    lmax = nw;
    v = w / nw;
  }
  lmax *= 1.05;
  res.omega = std::min(options.omega, 1.9 / std::max(lmax, 1e-300));
  Vec eps = res.omega * d.cwiseInverse();

  auto project = [&](Vec& z) {
    for (int j = 0; j < points; ++j) {
      const int k = stride * j;
      z(k) = project_nonnegative(z(k));
      if (!normal_only) {
        const Eigen::Vector2d t = project_disk(Eigen::Vector2d(z(k + 1), z(k + 2)), mu * z(k));
        z(k + 1) = t(0);
        z(k + 2) = t(1);
      }
    }
  };

  project(res.x);
  const double scale = std::max({res.x.cwiseAbs().maxCoeff(), eps.cwiseProduct(c).cwiseAbs().maxCoeff(),
                                 std::numeric_limits<double>::min()});
  const double tol = options.tolerance * scale;
  double best = std::numeric_limits<double>::infinity();
  // A slowly converging power iteration underestimates lambda_max; on growth the
  // relaxation is halved and the iteration restarted, a few times at most.
  int restarts = 0;
  const Vec x_start = res.x;
  Vec y(n), z(n);
  for (int it = 1; it <= options.max_iterations; ++it) {
    y.noalias() = g * res.x;
    y += c;
    z = res.x - eps.cwiseProduct(y);
    project(z);
    const double r = (z - res.x).cwiseAbs().maxCoeff();
    res.x.swap(z);
    res.iterations = it;
    res.residual = r;
    if (!std::isfinite(r)) throw SolverError("pjor: iteration produced non-finite values", r, it);
    if (r <= tol) {
      res.y.noalias() = g * res.x;
      res.y += c;
      res.residual = r / scale;
      return res;
    }
    best = std::min(best, r);
    if (it % options.monitor_window == 0 && r > 1e3 * best && restarts < 4) {
      ++restarts;
      res.omega *= 0.5;
      eps *= 0.5;
      res.x = x_start;
      best = std::numeric_limits<double>::infinity();
      continue;
    }
    if (it % options.monitor_window == 0 && r > 1e3 * best) {
      std::ostringstream msg;
      msg << "pjor: residual grew from " << best / scale << " to " << r / scale << " (relative) after "
          << it << " iterations; the Delassus matrix is probably not positive definite";
      throw SolverError(msg.str(), r / scale, it);
    }
  }
  std::ostringstream msg;
  msg << "pjor: no convergence within " << options.max_iterations << " iterations (relative residual "
      << res.residual / scale << ", tolerance " << options.tolerance << ")";
  throw SolverError(msg.str(), res.residual / scale, options.max_iterations);
}

bool InvariantReport::ok(double tol) const {
  return min_normal_force >= -tol && min_gap >= -tol && complementarity <= tol && cone_excess <= tol &&
         dissipation <= tol && slip_alignment <= tol;
}

InvariantReport check_invariants(const ContactState& s, double force_scale, double gap_scale) {
  InvariantReport r;
  const double f = std::max(force_scale, std::numeric_limits<double>::min());
  const double gs = std::max(gap_scale, std::numeric_limits<double>::min());
  r.min_normal_force = std::numeric_limits<double>::infinity();
  r.min_gap = std::numeric_limits<double>::infinity();
  r.dissipation = -std::numeric_limits<double>::infinity();
  for (int j = 0; j < s.point_count(); ++j) {
    const double ln = s.force(3 * j);
    const double gn = s.gap(3 * j);
    const Eigen::Vector2d lt(s.force(3 * j + 1), s.force(3 * j + 2));
    const Eigen::Vector2d dgt(s.last_increment(3 * j + 1), s.last_increment(3 * j + 2));
    r.min_normal_force = std::min(r.min_normal_force, ln / f);
    r.min_gap = std::min(r.min_gap, gn / gs);
    r.complementarity = std::max(r.complementarity, std::abs(ln * gn) / (f * gs));
    r.cone_excess = std::max(r.cone_excess, (lt.norm() - s.mu * ln) / f);
    r.dissipation = std::max(r.dissipation, lt.dot(dgt) / (f * gs));
    // Slip has to be opposed by a force on the cone boundary.
    if (dgt.norm() > 1e-6 * gs && ln > 1e-9 * f && s.mu > 0.0) {
      const double cosang = lt.dot(dgt) / (lt.norm() * dgt.norm() + std::numeric_limits<double>::min());
      r.slip_alignment = std::max(r.slip_alignment, 1.0 + cosang);
      r.cone_excess = std::max(r.cone_excess, std::abs(lt.norm() - s.mu * ln) / f);
    }
  }
  if (s.point_count() == 0) r.min_normal_force = r.min_gap = r.dissipation = 0.0;
  return r;
}

// Factorization of C*(cl,cl) in cl-local 3-component layout; split into three
// independent blocks when the directions do not couple.
struct ContactSolver::Factor {
  std::vector<int> cl;
  bool separable = false;
  Eigen::LLT<Mat> full;
  std::array<Eigen::LLT<Mat>, 3> dir;

  Vec solve(const Vec& rhs) const {
    if (!separable) return full.solve(rhs);
    const int m = static_cast<int>(cl.size());
    Vec out(3 * m);
    for (int c = 0; c < 3; ++c) {
      Vec r(m);
      for (int p = 0; p < m; ++p) r(p) = rhs(3 * p + c);
      const Vec s = dir[static_cast<std::size_t>(c)].solve(r);
      for (int p = 0; p < m; ++p) out(3 * p + c) = s(p);
    }
    return out;
  }

  /// Columns of C*(cl,cl)^-1 for the given cl-local component indices.
  Mat columns(const std::vector<int>& local) const {
    const int m = static_cast<int>(cl.size());
    Mat out = Mat::Zero(3 * m, static_cast<int>(local.size()));
    if (!separable) {
      Mat e = Mat::Zero(3 * m, static_cast<int>(local.size()));
      for (std::size_t i = 0; i < local.size(); ++i) e(local[i], static_cast<int>(i)) = 1.0;
      return full.solve(e);
    }
    for (int c = 0; c < 3; ++c) {
      std::vector<int> which;
      for (std::size_t i = 0; i < local.size(); ++i) {
        if (local[i] % 3 == c) which.push_back(static_cast<int>(i));
      }
      if (which.empty()) continue;
      Mat e = Mat::Zero(m, static_cast<int>(which.size()));
      for (std::size_t i = 0; i < which.size(); ++i) e(local[static_cast<std::size_t>(which[i])] / 3, static_cast<int>(i)) = 1.0;
      const Mat s = dir[static_cast<std::size_t>(c)].solve(e);
      for (std::size_t i = 0; i < which.size(); ++i) {
        for (int p = 0; p < m; ++p) out(3 * p + c, which[i]) = s(p, static_cast<int>(i));
      }
    }
    return out;
  }
};

ContactSolver::ContactSolver(const CondensedSystem& system, double mu, ContactOptions options)
    : system_(system), mu_(mu), options_(options), separable_(system.direction_separable()) {
  if (!(mu >= 0.0)) throw Error(ErrorCategory::input, "contact: friction coefficient must be >= 0");
}

ContactSolver::~ContactSolver() = default;

const ContactSolver::Factor& ContactSolver::factor(const std::vector<int>& cl) {
  if (cached_ && cached_->cl == cl) return *cached_;
  auto f = std::make_unique<Factor>();
  f->cl = cl;
  f->separable = separable_;
  const auto idx = components(cl);
  if (separable_) {
    for (int c = 0; c < 3; ++c) {
      std::vector<int> d;
      for (int j : cl) d.push_back(3 * j + c);
      f->dir[static_cast<std::size_t>(c)].compute(submatrix(system_.c_star, d, d));
      if (f->dir[static_cast<std::size_t>(c)].info() != Eigen::Success) {
        throw Error(ErrorCategory::numerical, "contact: C*(cl,cl) is not positive definite");
      }
    }
  } else {
    f->full.compute(submatrix(system_.c_star, idx, idx));
    if (f->full.info() != Eigen::Success) {
      throw Error(ErrorCategory::numerical, "contact: C*(cl,cl) is not positive definite");
    }
  }
  cached_ = std::move(f);
  return *cached_;
}

ContactState ContactSolver::step(const ContactState& state, const Vec& dg_ex, StepReport* report) {
  const int n = state.point_count();
  if (dg_ex.size() != 3 * n) throw Error(ErrorCategory::input, "contact step: increment has the wrong size");
  const Mat& cs = system_.c_star;

  std::vector<std::uint8_t> closed(static_cast<std::size_t>(n), 0);
  for (int j : classify_sets(state).cl) closed[static_cast<std::size_t>(j)] = 1;
  std::vector<std::uint8_t> forced(static_cast<std::size_t>(n), 0);
  const double pen_tol = 1e-10 * std::max(dg_ex.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());

  StepReport rep;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    std::vector<int> cl, st, a;
    for (int j = 0; j < n; ++j) {
      if (closed[static_cast<std::size_t>(j)]) cl.push_back(j);
    }
    Vec dlam = Vec::Zero(3 * n);
    std::vector<std::pair<int, double>> exact;  // PJOR forces, assigned without round-off
    rep.pjor_iterations = 0;
    rep.pjor_residual = 0.0;

    if (!cl.empty() && mu_ == 0.0) {
      // Frictionless: only normal components carry force, every closed point is active.
      a = cl;
      std::vector<int> in;
      for (int j : cl) in.push_back(3 * j);
      const Mat g = submatrix(cs, in, in);
      Vec c(in.size()), x0(in.size());
      for (std::size_t i = 0; i < in.size(); ++i) {
        x0(static_cast<int>(i)) = state.force(in[i]);
        c(static_cast<int>(i)) = dg_ex(in[i]) + state.gap(in[i]);
      }
      c -= g * x0;
      const PjorResult pr = pjor_solve(g, c, 0.0, x0, options_.pjor, true);
      for (std::size_t i = 0; i < in.size(); ++i) {
        dlam(in[i]) = pr.x(static_cast<int>(i)) - x0(static_cast<int>(i));
        exact.emplace_back(in[i], pr.x(static_cast<int>(i)));
      }
      rep.pjor_iterations = pr.iterations;
      rep.pjor_residual = pr.residual;
    } else if (!cl.empty()) {
      const Factor& f = factor(cl);
      const auto idx = components(cl);
      const Vec dpre = f.solve(-subvector(dg_ex, idx));
      Vec lam_pre = state.force;
      for (std::size_t i = 0; i < idx.size(); ++i) lam_pre(idx[i]) += dpre(static_cast<int>(i));
      std::vector<int> la;  // cl-local components of active points
      for (std::size_t p = 0; p < cl.size(); ++p) {
        const int j = cl[p];
        if (!state.sliding[static_cast<std::size_t>(j)] && !forced[static_cast<std::size_t>(j)] &&
            inside_cone(lam_pre, j, mu_)) {
          st.push_back(j);
        } else {
          a.push_back(j);
          for (int c = 0; c < 3; ++c) la.push_back(3 * static_cast<int>(p) + c);
        }
      }
      Vec dcl = dpre;
      if (!a.empty()) {
        // G = [C*(cl,cl)^-1]_(a,a)^-1 is the Schur complement onto I_a, and the
        // all-stick prediction gives c = -G dlambda_pre_a.
        const Mat x = f.columns(la);
        Mat xaa(la.size(), la.size());
        for (std::size_t r = 0; r < la.size(); ++r) xaa.row(static_cast<int>(r)) = x.row(la[r]);
        xaa = 0.5 * (xaa + xaa.transpose()).eval();
        Eigen::LLT<Mat> llt(xaa);
        if (llt.info() != Eigen::Success) throw Error(ErrorCategory::numerical, "contact: Delassus matrix is not positive definite");
        Mat g = llt.solve(Mat::Identity(xaa.rows(), xaa.cols()));
        g = 0.5 * (g + g.transpose()).eval();
        Vec dpre_a(la.size()), lam_prev(la.size()), lam0(la.size());
        for (std::size_t r = 0; r < la.size(); ++r) {
          dpre_a(static_cast<int>(r)) = dpre(la[r]);
          lam_prev(static_cast<int>(r)) = state.force(idx[static_cast<std::size_t>(la[r])]);
        }
        const Vec c = -g * dpre_a;
        Vec ct = c - g * lam_prev;
        for (std::size_t r = 0; r < la.size(); r += 3) ct(static_cast<int>(r)) += state.gap(idx[static_cast<std::size_t>(la[r])]);
        lam0 = lam_prev + dpre_a;
        const PjorResult pr = pjor_solve(g, ct, mu_, lam0, options_.pjor);
        const Vec dga = g * (pr.x - lam_prev) + c;
        dcl += x * dga;
        for (std::size_t r = 0; r < la.size(); ++r) exact.emplace_back(idx[static_cast<std::size_t>(la[r])], pr.x(static_cast<int>(r)));
        rep.pjor_iterations = pr.iterations;
        rep.pjor_residual = pr.residual;
      }
      for (std::size_t i = 0; i < idx.size(); ++i) dlam(idx[i]) = dcl(static_cast<int>(i));
    }

    const Vec dg = cs * dlam + dg_ex;
    ContactState next = state;
    next.force += dlam;
    for (const auto& [k, v] : exact) next.force(k) = v;
    next.gap += dg;
    next.last_increment = dg;

    bool changed = false;
    for (int j = 0; j < n; ++j) {
      if (!closed[static_cast<std::size_t>(j)] && next.gap(3 * j) < -pen_tol) {
        closed[static_cast<std::size_t>(j)] = 1;
        forced[static_cast<std::size_t>(j)] = 1;
        changed = true;
      }
    }
    for (int j : st) {
      const double ln = next.force(3 * j);
      if (!(ln > 0.0) || std::hypot(next.force(3 * j + 1), next.force(3 * j + 2)) > mu_ * ln * (1 + 1e-9)) {
        forced[static_cast<std::size_t>(j)] = 1;
        changed = true;
      }
    }
    if (changed) {
      ++rep.retries;
      continue;
    }

    // Clean up round-off so separated points carry exactly zero force.
    for (int j = 0; j < n; ++j) {
      if (!closed[static_cast<std::size_t>(j)]) next.force.segment<3>(3 * j).setZero();
    }
    for (int j = 0; j < n; ++j) {
      const double ln = next.force(3 * j);
      const double lt = std::hypot(next.force(3 * j + 1), next.force(3 * j + 2));
      next.sliding[static_cast<std::size_t>(j)] = (ln > 0.0 && mu_ > 0.0 && lt >= mu_ * ln * (1 - 1e-9)) ? 1 : 0;
    }
    rep.closed = static_cast<int>(cl.size());
    rep.sticking = static_cast<int>(st.size());
    rep.active = static_cast<int>(a.size());
    rep.separated = n - rep.closed;
    if (report) *report = rep;
    return next;
  }
  throw SolverError("contact: active-set corrections did not settle within " +
                        std::to_string(options_.max_retries) + " retries; use smaller load increments",
                    rep.pjor_residual, rep.pjor_iterations);
}

void write_state_csv(const std::filesystem::path& path, const ContactState& state,
                     const CondensedSystem& system) {
  auto out = csv::open_output(path);
  out << "point_id,x,y,g_n,g_t1,g_t2,lam_n,lam_t1,lam_t2,status\n";
  for (int j = 0; j < state.point_count(); ++j) {
    const Point2 p = system.positions[static_cast<std::size_t>(j)];
    out << system.point_index[static_cast<std::size_t>(j)] << ',' << csv::sci(p.x) << ',' << csv::sci(p.y);
    for (int c = 0; c < 3; ++c) out << ',' << csv::sci(state.gap(3 * j + c));
    for (int c = 0; c < 3; ++c) out << ',' << csv::sci(state.force(3 * j + c));
    const char* names[] = {"sep", "stick", "slip"};
    out << ',' << names[static_cast<int>(state.status(j))] << '\n';
  }
}

}  // namespace jointbe
