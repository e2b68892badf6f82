#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "qrlab/conformal.hpp"
#include "qrlab/functionals.hpp"

namespace qrlab {

// ------------------------------------------------------------------ flow state
//
// Shared carrier for the two nonlocal flows.  `energy` is the flow's Lyapunov
// quantity (the log functional in dimension 4, the perturbed quotient for the
// subcritical flow); `totalQ` is the conserved total fourth-order curvature;
// `weightedR` is the subcritical flow's nondecreasing weighted total scalar.

struct FlowMonitors {
  double energy = 0;     // nonincreasing Lyapunov value
  double totalQ = 0;     // conserved int Q_g dv_g
  double minR = 0;       // positivity monitor
  double minU = 0;       // positive-factor monitor
  double ut_norm = 0;    // int u_t P0 u_t dv0 (convergence gauge)
  double weightedR = 0;  // subcritical only: nondecreasing weighted total scalar
};

struct FlowState {
  double t = 0;
  ConformalMetric m;
  Field ut;   // velocity at this state
  double r = 0;  // multiplier r(t)
  FlowMonitors monitors;
};

enum class Termination { Converged, BudgetExceeded, InvariantViolated };

struct TraceSample {
  double t = 0;
  FlowMonitors monitors;
  bool energy_monotone = true;  // vs previous accepted step
  bool totalQ_conserved = true;
};

struct FlowTrace {
  std::vector<TraceSample> samples;
  Termination termination = Termination::BudgetExceeded;
  std::string diagnostic;
  Field limit;
  double r_bar = 0;     // multiplier at the final state
  double residual = 0;  // stationary-equation residual at the final state
  long steps = 0;
};

struct FlowConfig {
  double dt = 1e-2;
  double tol = 1e-12;        // ut_norm threshold
  double residual_tol = 1e-5;  // stationary-equation gate required at convergence
  long max_steps = 100000;
  int consecutive = 10;    // steps below tol required to declare convergence
  int max_halvings = 10;   // dt halvings before giving up on a monitor violation
};

namespace detail {

inline double mean0(const Background& bg, const Field& f) {
  return integrate(bg, f) / bg.vol;
}

inline Field project_mean_zero(const Background& bg, const Field& f) {
  return Field(VectorXd((f.v.array() - mean0(bg, f)).matrix()));
}

}  // namespace detail

// ------------------------------------------------------------ dimension-4 flow
//
// u_t = -u + P0^{-1}( r |R_g| e^{4u} - Q0 ),  r = int Q0 dv0 / int |R_g| e^{4u} dv0,
// on a 4-dimensional background in the exponential convention, restricted to
// mean-zero u.  The right-hand side is mean-zero by the choice of r, so the
// class is preserved; the absolute value is kept exactly as stated even
// though the positivity monitor makes it a no-op on accepted steps.

namespace detail {

// |R_g| e^{4u} at nodes: 6 e^{2u} | -lap u - |grad u|^2 + R0/6 |.
inline VectorXd abs_scal_e4u(const Background& bg, const Field& u) {
  VectorXd lap = laplacian_g0(bg, u).v;
  VectorXd g2 = grad_sq_g0(bg, u).v;
  VectorXd e2u = (2.0 * u.v.array()).exp();
  VectorXd out(bg.N);
  for (int i = 0; i < bg.N; ++i)
    out[i] = 6.0 * e2u[i] * std::abs(-lap[i] - g2[i] + bg.R0 / 6.0);
  return out;
}

inline Field flow4_velocity(const Background& bg, const Field& u, double& r) {
  VectorXd se = abs_scal_e4u(bg, u);
  double denom = bg.w.dot(se);
  if (!(denom > 0)) throw InvariantError("total curvature weight collapsed");
  r = bg.Q0 * bg.vol / denom;
  Field rhs(VectorXd((r * se.array() - bg.Q0).matrix()));
  Field v = paneitz_invert(bg, band_project(bg, rhs));
  return Field(-u.v + v.v);
}

}  // namespace detail

inline FlowState flow4_state(const Background& bg, Field u, double t) {
  if (bg.n != 4) throw PreconditionError("this flow is the dimension-4 flow");
  if (!(bg.Q0 >= 0) || !(bg.R0 > 0))
    throw PreconditionError("background must have semi-positive Q0 and positive R0");
  double ceiling = 16.0 * M_PI * M_PI;
  double q = bg.Q0 * bg.vol;
  if (!(q > 0) || q >= ceiling * (1.0 - 1e-10))
    throw PreconditionError("total background curvature must lie strictly below 16 pi^2");
  double scale = std::max(1.0, u.v.cwiseAbs().maxCoeff());
  if (std::abs(detail::mean0(bg, u)) > 1e-9 * scale)
    throw PreconditionError("flow lives in the mean-zero class");

  FlowState s;
  s.t = t;
  s.m = conformal_metric(bg, Convention::Exponential4, std::move(u));
  s.ut = detail::flow4_velocity(bg, s.m.u, s.r);
  s.monitors.energy = dim4_functional(s.m);
  s.monitors.totalQ = integrate_g(s.m, s.m.Q.v);
  s.monitors.minR = s.m.R.v.minCoeff();
  s.monitors.minU = s.m.w.v.minCoeff();  // conformal factor e^u
  s.monitors.ut_norm = detail::energy_form(bg, paneitz_operator(bg), s.ut);
  return s;
}

// One explicit 4-stage Runge-Kutta step with the multiplier recomputed at
// every stage, mean-zero reprojection, and the step-level monitors: the
// energy may not increase past 1e-10 * max(1,|F|) and the scalar curvature
// must stay positive.
inline FlowState step_flow4(const FlowState& s, double dt) {
  const Background& bg = *s.m.bg;
  if (!(dt > 0)) throw PreconditionError("time step must be positive");
  double r;
  const Field& u = s.m.u;
  Field k1 = s.ut;
  Field k2 = detail::flow4_velocity(bg, Field(u.v + 0.5 * dt * k1.v), r);
  Field k3 = detail::flow4_velocity(bg, Field(u.v + 0.5 * dt * k2.v), r);
  Field k4 = detail::flow4_velocity(bg, Field(u.v + dt * k3.v), r);
  Field next(u.v + (dt / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v));
  FlowState out = flow4_state(bg, detail::project_mean_zero(bg, next), s.t + dt);
  if (!(out.monitors.minR > 0)) throw InvariantError("scalar curvature lost positivity");
  double ftol = 1e-10 * std::max(1.0, std::abs(s.monitors.energy));
  if (out.monitors.energy > s.monitors.energy + ftol)
    throw InvariantError("flow energy increased");
  return out;
}

// L2 residual of the stationary equation P0 u + Q0 = lambda R_g e^{4u} with
// lambda = r taken from the state itself.
inline double flow4_residual(const FlowState& s) {
  const Background& bg = *s.m.bg;
  Field Pu = paneitz_apply(bg, s.m.u);
  VectorXd se = detail::abs_scal_e4u(bg, s.m.u);
  VectorXd res = VectorXd((Pu.v.array() + bg.Q0 - s.r * se.array()).matrix());
  return detail::lp_norm(bg, res, 2.0);
}

inline FlowTrace run_flow4(const Background& bg, const Field& u0, const FlowConfig& cfg = {}) {
  FlowState s = flow4_state(bg, detail::project_mean_zero(bg, u0), 0.0);
  if (!(s.monitors.minR > 0))
    throw PreconditionError("initial metric must have positive scalar curvature");

  FlowTrace tr;
  tr.samples.push_back({s.t, s.monitors, true, true});
  double dt = cfg.dt;
  // A state that enters below tol is accepted immediately; the consecutive
  // counter exists to confirm sustained decay during evolution.  Convergence
  // additionally requires the stationary residual to be small, so a declared
  // limit always solves the stationary equation to residual_tol.
  int below = s.monitors.ut_norm < cfg.tol ? cfg.consecutive : 0;
  int halvings = 0;
  auto settled = [&] {
    return below >= cfg.consecutive && flow4_residual(s) <= cfg.residual_tol;
  };
  for (long k = 0; k < cfg.max_steps; ++k) {
    if (settled()) {
      tr.termination = Termination::Converged;
      break;
    }
    FlowState next;
    try {
      next = step_flow4(s, dt);
    } catch (const InvariantError& e) {
      if (++halvings > cfg.max_halvings) {
        tr.termination = Termination::InvariantViolated;
        tr.diagnostic = e.what();
        break;
      }
      dt *= 0.5;
      continue;
    }
    ++tr.steps;
    TraceSample smp{next.t, next.monitors, true, true};
    smp.energy_monotone = next.monitors.energy <=
                          s.monitors.energy + 1e-10 * std::max(1.0, std::abs(s.monitors.energy));
    smp.totalQ_conserved =
        std::abs(next.monitors.totalQ - s.monitors.totalQ) <=
        1e-9 * std::max(1.0, std::abs(s.monitors.totalQ));
    tr.samples.push_back(smp);
    s = std::move(next);
    below = s.monitors.ut_norm < cfg.tol ? below + 1 : 0;
  }
  if (tr.termination == Termination::BudgetExceeded && settled())
    tr.termination = Termination::Converged;

  tr.limit = s.m.u;
  tr.r_bar = s.r;
  tr.residual = flow4_residual(s);
  return tr;
}

// ------------------------------------------------------------ subcritical flow
//
// (4/(n-4)) u_t = -u + ((n-4)/2) r P0^{-1}( u^{pw} Reps ),
//   pw = (n+4)/(n-4) - 2(n-2)eps/(n-4),
//   r  = int Q_g dv_g / int u^{-2(n-2)eps/(n-4)} Reps dv_g,
// on an n >= 5 background in the fourth-order power convention.  The
// denominator of r is exactly the weighted total scalar curvature in its
// gradient form (no nodal fourth-order reconstruction); the direct nodal
// evaluation of the same integral is kept as a test oracle.

namespace detail {

inline double subcritical_power(const EpsilonParams& p) {
  double n = p.n;
  return (n + 4.0) / (n - 4.0) - 2.0 * (n - 2.0) * p.eps / (n - 4.0);
}

inline Field subcritical_velocity(const ConformalMetric& m, const EpsilonParams& p, double& r) {
  const Background& bg = *m.bg;
  double n = bg.n;
  double totalQ = 2.0 / (n - 4.0) * paneitz_energy(m);
  double denom = total_scalar_eps(m, p);
  if (!(denom > 0)) throw InvariantError("weighted total curvature collapsed");
  r = totalQ / denom;
  Field reps = r_eps_field(m, p);
  VectorXd upw = pow_nodal(m.u.v, subcritical_power(p));
  Field rhs = band_project(bg, Field(upw.cwiseProduct(reps.v)));
  Field v = paneitz_invert(bg, rhs);
  double c = (n - 4.0) / 4.0;
  return Field(c * (-m.u.v + 0.5 * (n - 4.0) * r * v.v));
}

}  // namespace detail

inline FlowState subcritical_state(const Background& bg, Field u, const EpsilonParams& p,
                                   double t) {
  if (bg.n < 5) throw PreconditionError("subcritical flow requires n >= 5");
  if (p.n != bg.n) throw PreconditionError("epsilon parameters built for a different dimension");
  if (!(bg.Q0 >= 0) || !(bg.R0 > 0))
    throw PreconditionError("background must have semi-positive Q0 and positive R0");
  FlowState s;
  s.t = t;
  s.m = conformal_metric(bg, Convention::PowerN5plus, std::move(u));
  s.ut = detail::subcritical_velocity(s.m, p, s.r);
  s.monitors.energy = quotient_I_eps(s.m, p);
  s.monitors.totalQ = 2.0 / (bg.n - 4.0) * paneitz_energy(s.m);
  s.monitors.weightedR = total_scalar_eps(s.m, p);
  s.monitors.minR = s.m.R.v.minCoeff();
  s.monitors.minU = s.m.u.v.minCoeff();
  s.monitors.ut_norm = detail::energy_form(bg, paneitz_operator(bg), s.ut);
  return s;
}

// One RK step of the subcritical flow with its three step-level laws: the
// total fourth-order curvature is conserved (1e-9 relative), the weighted
// total scalar may not decrease, the perturbed quotient may not increase,
// and the solution keeps the exponential lower bound u' >= e^{-(n-4)dt/4} u.
inline FlowState step_subcritical(const FlowState& s, const EpsilonParams& p, double dt) {
  const Background& bg = *s.m.bg;
  if (!(dt > 0)) throw PreconditionError("time step must be positive");
  double r;
  const Field& u = s.m.u;
  auto vel = [&](const VectorXd& v) {
    ConformalMetric mm = conformal_metric(bg, Convention::PowerN5plus, Field(v));
    return detail::subcritical_velocity(mm, p, r);
  };
  Field k1 = s.ut;
  Field k2 = vel(u.v + 0.5 * dt * k1.v);
  Field k3 = vel(u.v + 0.5 * dt * k2.v);
  Field k4 = vel(u.v + dt * k3.v);
  Field next(u.v + (dt / 6.0) * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v));

  FlowState out = subcritical_state(bg, band_project(bg, next), p, s.t + dt);
  if (!(out.monitors.minU > 0)) throw InvariantError("conformal factor lost positivity");
  if (!(out.monitors.minR > 0)) throw InvariantError("scalar curvature lost positivity");
  double qtol = 1e-9 * std::max(1.0, std::abs(s.monitors.totalQ));
  if (std::abs(out.monitors.totalQ - s.monitors.totalQ) > qtol)
    throw InvariantError("total fourth-order curvature drifted");
  if (out.monitors.weightedR < s.monitors.weightedR -
                                   1e-10 * std::max(1.0, std::abs(s.monitors.weightedR)))
    throw InvariantError("weighted total scalar decreased");
  if (out.monitors.energy > s.monitors.energy + 1e-10)
    throw InvariantError("perturbed quotient increased");
  double decay = std::exp(-(bg.n - 4.0) * dt / 4.0);
  if ((out.m.u.v - decay * u.v).minCoeff() < -1e-9)
    throw InvariantError("exponential lower bound violated");
  return out;
}

// L2 residual of the stationary equation P0 u = ((n-4)/2) r u^{pw} Reps with
// r taken from the state itself.
inline double subcritical_residual(const FlowState& s, const EpsilonParams& p) {
  const Background& bg = *s.m.bg;
  Field Pu = paneitz_apply(bg, s.m.u);
  Field reps = r_eps_field(s.m, p);
  VectorXd upw = detail::pow_nodal(s.m.u.v, detail::subcritical_power(p));
  VectorXd res = Pu.v - 0.5 * (bg.n - 4.0) * s.r * upw.cwiseProduct(reps.v);
  return detail::lp_norm(bg, res, 2.0);
}

inline FlowTrace run_subcritical(const Background& bg, const Field& u0, const EpsilonParams& p,
                                 const FlowConfig& cfg = {}) {
  if (!(p.eps > 0)) throw PreconditionError("subcritical run needs eps in (0, 2/(n-2))");
  if (!(u0.v.minCoeff() > 0)) throw PreconditionError("initial factor must be positive");
  FlowState s = subcritical_state(bg, u0, p, 0.0);
  if (!(s.monitors.minR > 0))
    throw PreconditionError("initial metric must have positive scalar curvature");

  FlowTrace tr;
  tr.samples.push_back({s.t, s.monitors, true, true});
  double dt = cfg.dt;
  // entry below tol is accepted immediately, as in run_flow4
  int below = s.monitors.ut_norm < cfg.tol ? cfg.consecutive : 0;
  int halvings = 0;
  double decay = (bg.n - 4.0) / 4.0;
  auto settled = [&] {
    return below >= cfg.consecutive && subcritical_residual(s, p) <= cfg.residual_tol;
  };
  for (long k = 0; k < cfg.max_steps; ++k) {
    if (settled()) {
      tr.termination = Termination::Converged;
      break;
    }
    FlowState next;
    try {
      next = step_subcritical(s, p, dt);
      // run-level envelope against the true initial data
      double env = std::exp(-decay * next.t);
      if ((next.m.u.v - env * u0.v).minCoeff() < -1e-9)
        throw InvariantError("exponential lower bound violated");
    } catch (const InvariantError& e) {
      if (++halvings > cfg.max_halvings) {
        tr.termination = Termination::InvariantViolated;
        tr.diagnostic = e.what();
        break;
      }
      dt *= 0.5;
      continue;
    }
    ++tr.steps;
    TraceSample smp{next.t, next.monitors, true, true};
    smp.energy_monotone = next.monitors.energy <= s.monitors.energy + 1e-10;
    smp.totalQ_conserved =
        std::abs(next.monitors.totalQ - s.monitors.totalQ) <=
        1e-9 * std::max(1.0, std::abs(s.monitors.totalQ));
    tr.samples.push_back(smp);
    s = std::move(next);
    below = s.monitors.ut_norm < cfg.tol ? below + 1 : 0;
  }
  if (tr.termination == Termination::BudgetExceeded && settled())
    tr.termination = Termination::Converged;

  tr.limit = s.m.u;
  tr.r_bar = s.r;
  tr.residual = subcritical_residual(s, p);
  return tr;
}

// ------------------------------------------------------- epsilon continuation
//
// Chain of subcritical runs along a strictly decreasing schedule, each stage
// warm-started from the previous limit.  Records the boundedness dichotomy:
// a stage whose limit has max(u)/min(u) > 1e6 or puts more than 1e-2 of its
// coefficient energy in the top two modes is flagged unbounded and stops the
// continuation.

struct ContinuationStage {
  double eps = 0;
  Field limit;
  double r_bar = 0;
  double quotient = 0;  // perturbed quotient at the stage limit
  Termination termination = Termination::BudgetExceeded;
  bool unbounded = false;
};

inline std::vector<ContinuationStage> epsilon_continuation(const Background& bg, const Field& u0,
                                                           const std::vector<double>& schedule,
                                                           const FlowConfig& cfg = {}) {
  if (bg.n < 5) throw PreconditionError("continuation requires n >= 5");
  for (size_t i = 0; i < schedule.size(); ++i) {
    if (!(schedule[i] > 0) || !(schedule[i] < 2.0 / (bg.n - 2)))
      throw PreconditionError("schedule values must lie in (0, 2/(n-2))");
    if (i > 0 && !(schedule[i] < schedule[i - 1]))
      throw PreconditionError("schedule must be strictly decreasing");
  }

  std::vector<ContinuationStage> stages;
  Field warm = u0;
  for (double eps : schedule) {
    EpsilonParams p = make_epsilon(bg.n, eps);
    FlowTrace tr = run_subcritical(bg, warm, p, cfg);
    ContinuationStage st;
    st.eps = eps;
    st.limit = tr.limit;
    st.r_bar = tr.r_bar;
    st.quotient = quotient_I_eps(conformal_metric(bg, Convention::PowerN5plus, tr.limit), p);
    st.termination = tr.termination;
    double ratio = tr.limit.v.maxCoeff() / tr.limit.v.minCoeff();
    VectorXd c = coeffs(bg, tr.limit);
    double total = c.squaredNorm();
    double tail = c[bg.L] * c[bg.L] + (bg.L >= 1 ? c[bg.L - 1] * c[bg.L - 1] : 0.0);
    st.unbounded = ratio > 1e6 || (total > 0 && tail / total > 1e-2);
    stages.push_back(std::move(st));
    if (stages.back().termination != Termination::Converged || stages.back().unbounded) break;
    warm = stages.back().limit;
  }
  return stages;
}

// --------------------------------------------------- three-dimensional path
//
// Damped-Newton continuation in t for
//   P0 u + (1-t) u^{-3} + (t/2) u^{-7} R_g = 0,   g = u^{-4} g0,
// solved in spectral coefficients with a finite-difference Jacobian and
// Armijo backtracking.  On Newton failure the t-step is bisected down to a
// minimum step of 1e-4, then the path aborts at the last good t.  Accepted
// solutions must satisfy u > 0, R_g > 0 and the second-order positivity
// lap u + (R0/8) u > 0.

struct PathPoint {
  double t = 0;
  Field u;
  double residual = 0;
  double minU = 0, maxU = 0, minR = 0, min_second_order = 0;
};

struct PathResult {
  std::vector<PathPoint> points;
  bool complete = false;   // whole grid reached
  double last_good_t = 0;
  std::string diagnostic;
  double u_floor = 0, u_ceiling = 0;  // a-priori window observed along the path
};

struct NewtonConfig {
  double newton_tol = 1e-10;
  int max_iterations = 60;
  int max_halvings = 30;
  double min_t_step = 1e-4;
};

namespace detail {

// residual of the path equation in coefficient space; +inf when the trial
// coefficients leave the positive cone
inline bool path_residual(const Background& bg, double t, const VectorXd& c, VectorXd& out) {
  Field u = from_coeffs(bg, c);
  if (!(u.v.minCoeff() > 1e-10)) return false;
  Field Pu = paneitz_apply(bg, u);
  Field Lw = apply(bg, conformal_laplacian(bg), Field(pow_nodal(u.v, -1.0)));
  VectorXd Rg = 8.0 * pow_nodal(u.v, 5.0).cwiseProduct(Lw.v);  // R of u^{-4} g0
  VectorXd um3 = pow_nodal(u.v, -3.0), um7 = pow_nodal(u.v, -7.0);
  VectorXd nodal = Pu.v + (1.0 - t) * um3 + 0.5 * t * um7.cwiseProduct(Rg);
  out = bg.B.transpose() * bg.w.cwiseProduct(nodal);
  return true;
}

inline bool newton_solve_path(const Background& bg, double t, VectorXd& c,
                              const NewtonConfig& cfg, double& out_res) {
  const int dim = bg.L + 1;
  VectorXd F(dim);
  if (!path_residual(bg, t, c, F)) return false;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    double fn = F.norm();
    out_res = fn;
    if (fn <= cfg.newton_tol) return true;
    MatrixXd J(dim, dim);
    VectorXd Fp(dim);
    for (int j = 0; j < dim; ++j) {
      double h = 1e-7 * (1.0 + std::abs(c[j]));
      VectorXd cp = c;
      cp[j] += h;
      if (!path_residual(bg, t, cp, Fp)) return false;
      J.col(j) = (Fp - F) / h;
    }
    VectorXd delta = J.partialPivLu().solve(F);
    double step = 1.0;
    bool accepted = false;
    for (int h = 0; h <= cfg.max_halvings; ++h) {
      VectorXd trial = c - step * delta;
      if (path_residual(bg, t, trial, Fp) && Fp.squaredNorm() < fn * fn * (1.0 - 1e-4 * step)) {
        c = trial;
        F = Fp;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) return false;
  }
  out_res = F.norm();
  return out_res <= cfg.newton_tol;
}

}  // namespace detail

inline PathResult newton_continuation_3d(const Background& bg, const std::vector<double>& t_grid,
                                         const NewtonConfig& cfg = {}) {
  if (bg.n != 3) throw PreconditionError("the path continuation is the n=3 construction");
  if (!(bg.Q0 >= 0) || !(bg.R0 > 0))
    throw PreconditionError("background must have semi-positive Q0 and positive R0");
  if (t_grid.empty()) throw PreconditionError("t grid must be nonempty");
  for (size_t i = 0; i < t_grid.size(); ++i) {
    if (t_grid[i] < 0.0 || t_grid[i] > 1.0) throw PreconditionError("t values must lie in [0,1]");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
      throw PreconditionError("t grid must be strictly increasing");
  }
  if (!(bg.Q0 > 0)) throw PreconditionError("constant initial guess needs Q0 > 0");

  PathResult out;
  out.u_floor = std::numeric_limits<double>::infinity();
  out.u_ceiling = 0;

  // closed-form constant solution at t: (Q0/2) c = ((1-t) + R0 t/2) c^{-3}
  auto constant_guess = [&](double t) {
    return std::pow(2.0 * ((1.0 - t) + 0.5 * bg.R0 * t) / bg.Q0, 0.25);
  };
  VectorXd c = coeffs(bg, constant_field(bg, constant_guess(t_grid.front())));

  auto accept = [&](double t, const VectorXd& coef, double res) -> bool {
    Field u = from_coeffs(bg, coef);
    ConformalMetric m = conformal_metric(bg, Convention::PowerN5plus, u);
    Field second(laplacian_g0(bg, u).v + (bg.R0 / 8.0) * u.v);
    PathPoint pt;
    pt.t = t;
    pt.u = u;
    pt.residual = res;
    pt.minU = u.v.minCoeff();
    pt.maxU = u.v.maxCoeff();
    pt.minR = m.R.v.minCoeff();
    pt.min_second_order = second.v.minCoeff();
    if (!(pt.minU > 0) || !(pt.minR > 0) || !(pt.min_second_order > 0)) return false;
    out.u_floor = std::min(out.u_floor, pt.minU);
    out.u_ceiling = std::max(out.u_ceiling, pt.maxU);
    out.points.push_back(std::move(pt));
    return true;
  };

  double t_cur = t_grid.front();
  double res = 0;
  VectorXd c_good = c;
  if (!detail::newton_solve_path(bg, t_cur, c, cfg, res) || !accept(t_cur, c, res)) {
    out.diagnostic = "no solution at the first grid point";
    return out;
  }
  c_good = c;
  out.last_good_t = t_cur;

  for (size_t gi = 1; gi < t_grid.size(); ++gi) {
    double target = t_grid[gi];
    while (t_cur < target) {
      double trial_t = target;
      bool solved = false;
      VectorXd trial_c;
      while (true) {
        trial_c = c_good;
        double r2 = 0;
        if (detail::newton_solve_path(bg, trial_t, trial_c, cfg, r2) &&
            accept(trial_t, trial_c, r2)) {
          solved = true;
          break;
        }
        double step = trial_t - t_cur;
        if (step <= cfg.min_t_step) break;
        trial_t = t_cur + 0.5 * step;  // bisect toward the last good t
      }
      if (!solved) {
        out.diagnostic = "path stalled: t-step bisected below the minimum step";
        return out;
      }
      t_cur = trial_t;
      c_good = trial_c;
      out.last_good_t = t_cur;
    }
  }
  out.complete = true;
  return out;
}

}  // namespace qrlab
