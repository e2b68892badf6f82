#pragma once

#include <cmath>

#include "qrlab/conformal.hpp"

namespace qrlab {

// ------------------------------------------------------------ ConstantsTable
//
// Closed-form sharp constants of the unit round n-sphere: volume, the
// second-order Yamabe constant, its sigma_2 and sigma_2/sigma_1 analogues,
// the fourth-order-over-second-order quotient constant, and the dimensional
// factors tying them together.

struct ConstantsTable {
  int n = 0;
  double omega_n = 0;                      // volume of the unit n-sphere
  double Y_sphere = 0;                     // n(n-2) omega^{2/n} / 4
  double Y_sigma2_sphere = 0;              // n(n-1) omega^{4/n} / 8
  double Y_sigma2_over_sigma1_sphere = 0;  // (n(n-1)/8) omega^{2/(n-2)} / (n/2)^{(n-4)/(n-2)}
  double Y42_sphere = 0;                   // sharp constant of the Q-over-R quotient
  double d_n = 0;                          // (n^2-4)/(8n(n-1)^2)
  double QoverR_sphere = 0;                // (n^2-4)/(8(n-1)) at the unit round metric
  double c_Y42_vs_Y = 0;                   // Y42 = c * Y^{n/(n-2)}
};

inline ConstantsTable constants_table(int n) {
  if (n < 5) throw PreconditionError("constants table defined for n >= 5");
  ConstantsTable t;
  t.n = n;
  double nd = n;
  t.omega_n = sphere_volume(n);
  t.Y_sphere = nd * (nd - 2.0) / 4.0 * std::pow(t.omega_n, 2.0 / nd);
  t.Y_sigma2_sphere = nd * (nd - 1.0) / 8.0 * std::pow(t.omega_n, 4.0 / nd);
  t.Y_sigma2_over_sigma1_sphere = nd * (nd - 1.0) / 8.0 *
                                  std::pow(t.omega_n, 2.0 / (nd - 2.0)) /
                                  std::pow(nd / 2.0, (nd - 4.0) / (nd - 2.0));
  t.Y42_sphere = (nd - 4.0) * (nd * nd - 4.0) * std::pow(nd, 2.0 / (nd - 2.0)) *
                 std::pow(nd - 1.0, (4.0 - nd) / (nd - 2.0)) *
                 std::pow(t.omega_n, 2.0 / (nd - 2.0)) / 16.0;
  t.d_n = (nd * nd - 4.0) / (8.0 * nd * (nd - 1.0) * (nd - 1.0));
  t.QoverR_sphere = (nd * nd - 4.0) / (8.0 * (nd - 1.0));
  t.c_Y42_vs_Y = (nd - 4.0) * (nd + 2.0) /
                 (nd * std::pow(nd - 2.0, 2.0 / (nd - 2.0)) *
                  std::pow(4.0 * (nd - 1.0), (nd - 4.0) / (nd - 2.0)));
  return t;
}

// ------------------------------------------------------------------- helpers

namespace detail {

// L^p norm of a nodal field against the background volume element.
inline double lp_norm(const Background& bg, const VectorXd& f, double p) {
  return std::pow(bg.w.dot(VectorXd(f.array().abs().pow(p).matrix())), 1.0 / p);
}

// Quadratic form sum_l mult_l c_l^2 of a diagonal operator — exact in
// coefficient space, immune to the lambda^2 amplification of nodal routes.
inline double energy_form(const Background& bg, const SpectralOperator& op, const Field& f) {
  const VectorXd& c = coeffs(bg, f);
  return op.mult.dot(VectorXd(c.cwiseAbs2()));
}

// The factor of m in the g = u^{4/(n-4)} g0 convention (n != 4).
inline Field fourth_order_factor(const ConformalMetric& m) {
  const Background& bg = *m.bg;
  if (bg.n == 4) throw PreconditionError("fourth-order factor undefined at n = 4");
  if (m.conv == Convention::PowerN5plus) return m.u;
  return Field(pow_nodal(m.w.v, (bg.n - 4.0) / (bg.n - 2.0)));
}

}  // namespace detail

// ------------------------------------------------------------------ energies

// int u P0 u dv0 with u the metric's fourth-order conformal factor; equals
// (n-4)/2 * int Q_g dv_g.
inline double paneitz_energy(const ConformalMetric& m) {
  const Background& bg = *m.bg;
  if (bg.n == 4)
    throw PreconditionError("use the dimension-4 log functional instead of paneitz_energy");
  return detail::energy_form(bg, paneitz_operator(bg), detail::fourth_order_factor(m));
}

// Total scalar curvature int R_g dv_g.
inline double total_scalar(const ConformalMetric& m) { return integrate_g(m, m.R.v); }

// Weighted total scalar curvature int R_g u^{-2(n-2)eps/(n-4)} dv_g,
// evaluated through its gradient form
//   h_eps int |grad u|^2 u^{(2/(n-4))(2-(n-2)eps)} dv0
//     + d_eps R0 int u^{2(n-2)(1-eps)/(n-4)} dv0,
// which is the numerically robust route (no fourth-order reconstruction).
inline double total_scalar_eps(const ConformalMetric& m, const EpsilonParams& p) {
  const Background& bg = *m.bg;
  if (m.conv != Convention::PowerN5plus)
    throw PreconditionError("weighted total curvature requires the fourth-order convention");
  if (p.n != bg.n) throw PreconditionError("epsilon parameters built for a different dimension");
  double n = bg.n;
  Field g2 = grad_sq_g0(bg, m.u);
  VectorXd grad_weight = detail::pow_nodal(m.u.v, 2.0 / (n - 4.0) * (2.0 - (n - 2.0) * p.eps));
  VectorXd bulk_weight = detail::pow_nodal(m.u.v, 2.0 * (n - 2.0) * (1.0 - p.eps) / (n - 4.0));
  return p.h * bg.w.dot(VectorXd(g2.v.cwiseProduct(grad_weight))) +
         p.d * bg.R0 * bg.w.dot(bulk_weight);
}

// ------------------------------------------------------------------ quotients

// I(g) = (n-4)/2 int Q dv / (int R dv)^{(n-4)/(n-2)}.  The numerator is the
// Paneitz energy of the fourth-order factor, computed in coefficient space.
inline double quotient_I(const ConformalMetric& m) {
  const Background& bg = *m.bg;
  if (bg.n < 5) throw PreconditionError("quotient defined for n >= 5");
  double J = total_scalar(m);
  if (!(J > 0.0)) throw PreconditionError("outside the positive-scalar-curvature cone");
  return paneitz_energy(m) / std::pow(J, (bg.n - 4.0) / (bg.n - 2.0));
}

// Perturbed quotient I_eps(u) = int u P0 u / J_eps^{(n-4)/((n-2)(1-eps))}.
inline double quotient_I_eps(const ConformalMetric& m, const EpsilonParams& p) {
  const Background& bg = *m.bg;
  double J = total_scalar_eps(m, p);
  if (!(J > 0.0)) throw PreconditionError("outside the positive-scalar-curvature cone");
  double e = (bg.n - 4.0) / ((bg.n - 2.0) * (1.0 - p.eps));
  return paneitz_energy(m) / std::pow(J, e);
}

// -------------------------------------------------------------- Sobolev gaps

// Deficit of the higher-order sharp Sobolev inequality between orders 2k and
// 2l on the round sphere:
//   int u_k P_{2k} u_k - K(n,k,l) (int u_l P_{2l} u_l)^{(n-2k)/(n-2l)},
// where u_j = w^{(n-2j)/(n-2)} is the metric's factor in the order-2j
// convention and K is the sharp constant (a Gamma-function ratio times the
// sphere-volume power).  Nonnegative on the admissible cone.
inline double sobolev_deficit(const ConformalMetric& m, int k, int l) {
  const Background& bg = *m.bg;
  if (!(0 < l && l < k && 2 * k < bg.n))
    throw PreconditionError("deficit requires 0 < l < k < n/2");
  if (l == 1 && m.R.v.minCoeff() <= 0.0)
    throw PreconditionError("outside admissible cone");
  double n = bg.n;
  Field uk(detail::pow_nodal(m.w.v, (n - 2.0 * k) / (n - 2.0)));
  Field ul(detail::pow_nodal(m.w.v, (n - 2.0 * l) / (n - 2.0)));
  double A = detail::energy_form(bg, gjms_operator(bg, k), uk);
  double B = detail::energy_form(bg, gjms_operator(bg, l), ul);
  if (!(B > 0.0)) throw PreconditionError("outside admissible cone");
  double s = (n - 2.0 * k) / (n - 2.0 * l);
  double K = std::exp(std::lgamma(n / 2.0 + k) - std::lgamma(n / 2.0 - k) -
                      s * (std::lgamma(n / 2.0 + l) - std::lgamma(n / 2.0 - l))) *
             std::pow(sphere_volume(bg.n), 2.0 * (k - l) / (n - 2.0 * l));
  return A - K * std::pow(B, s);
}

// The sharp constant alone (for offline re-verification of deficit rows).
inline double sobolev_constant(int n, int k, int l) {
  if (!(0 < l && l < k && 2 * k < n))
    throw PreconditionError("deficit requires 0 < l < k < n/2");
  double nd = n;
  double s = (nd - 2.0 * k) / (nd - 2.0 * l);
  return std::exp(std::lgamma(nd / 2.0 + k) - std::lgamma(nd / 2.0 - k) -
                  s * (std::lgamma(nd / 2.0 + l) - std::lgamma(nd / 2.0 - l))) *
         std::pow(sphere_volume(n), 2.0 * (k - l) / (nd - 2.0 * l));
}

// ------------------------------------------------------------------- duality

struct DualityProduct {
  double theta_hat = 0;   // int u P0 u / ||P0 u||^2_{2n/(n+4)}
  double ytilde_hat = 0;  // int u P0 u / ||u||^2_{2n/(n-4)}
  double product = 0;     // theta_hat * ytilde_hat, <= 1 by double Hoelder
};

inline DualityProduct duality_product(const Background& bg, const Field& u) {
  if (bg.n < 5) throw PreconditionError("duality product defined for n >= 5");
  Field Pu = paneitz_apply(bg, u);
  if (u.v.minCoeff() <= 0.0 || Pu.v.minCoeff() <= 0.0)
    throw PreconditionError("outside the fourth-order duality cone");
  double n = bg.n;
  double E = detail::energy_form(bg, paneitz_operator(bg), u);
  DualityProduct d;
  double np = detail::lp_norm(bg, Pu.v, 2.0 * n / (n + 4.0));
  double nu = detail::lp_norm(bg, u.v, 2.0 * n / (n - 4.0));
  d.theta_hat = E / (np * np);
  d.ytilde_hat = E / (nu * nu);
  d.product = d.theta_hat * d.ytilde_hat;
  return d;
}

// ------------------------------------------------- fourth-vs-second quotient

// c * Yhat(w)^{n/(n-2)} - I(m), where Yhat is the classical second-order
// Yamabe quotient of the PowerScalar factor w.  Zero exactly at constant
// factors over any Einstein background; nonnegative on the admissible cone
// of the round sphere.
inline double y42_vs_y_gap(const ConformalMetric& m) {
  const Background& bg = *m.bg;
  if (bg.n < 5) throw PreconditionError("quotient defined for n >= 5");
  if (m.R.v.minCoeff() <= 0.0)
    throw PreconditionError("outside the positive-scalar-curvature cone");
  double n = bg.n;
  double yhat = detail::energy_form(bg, conformal_laplacian(bg), m.w) /
                std::pow(detail::lp_norm(bg, m.w.v, 2.0 * n / (n - 2.0)), 2.0);
  double c = (n - 4.0) * (n + 2.0) /
             (n * std::pow(n - 2.0, 2.0 / (n - 2.0)) *
              std::pow(4.0 * (n - 1.0), (n - 4.0) / (n - 2.0)));
  return c * std::pow(yhat, n / (n - 2.0)) - quotient_I(m);
}

// ------------------------------------------------------- dimension-4 energy

// F[u] = <P0 u, u> + 2 int Q0 u dv0 - (int Q0 dv0) log(int R_gu dv_gu / int R0 dv0)
// in the exponential convention, with the total curvature of g_u evaluated
// through its gradient form 6 int |grad u|^2 e^{2u} + int R0 e^{2u}.
inline double dim4_functional(const ConformalMetric& m) {
  const Background& bg = *m.bg;
  if (m.conv != Convention::Exponential4)
    throw PreconditionError("the log functional lives in the exponential convention");
  double E = detail::energy_form(bg, paneitz_operator(bg), m.u);
  double linear = 2.0 * bg.Q0 * integrate(bg, m.u);
  VectorXd e2u = (2.0 * m.u.v.array()).exp();
  double totalR = 6.0 * bg.w.dot(VectorXd(grad_sq_g0(bg, m.u).v.cwiseProduct(e2u))) +
                  bg.R0 * bg.w.dot(e2u);
  if (!(totalR > 0.0))
    throw PreconditionError("total scalar curvature must be positive for the log term");
  double totalQ0 = bg.Q0 * bg.vol;
  return E + linear - totalQ0 * std::log(totalR / (bg.R0 * bg.vol));
}

}  // namespace qrlab
