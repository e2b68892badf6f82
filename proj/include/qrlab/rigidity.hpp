#pragma once

#include "qrlab/conformal.hpp"

namespace qrlab {

// --------------------------------------------------------- ObataCoefficients
//
// Coefficient bookkeeping for the weighted integral identities in the
// convention g = u^2 g0.  The admissible window for the Cauchy-Schwarz weight
// A comes from the two quadratic conditions
//   A^2 <= (1-alpha)(n-1) alpha1 / n          and
//   (|C| - A)^2 <= 2 alpha (n-1) B.

struct ObataCoefficients {
  int n = 0;
  double alpha = 0;
  double alpha1 = 0, alpha2 = 0;
  double B = 0, C = 0, I = 0;
  double window_lo = 0, window_hi = 0;
  bool feasible = false;
};

inline ObataCoefficients obata_coefficients(int n, double alpha) {
  if (n < 5) throw PreconditionError("coefficient family defined for n >= 5");
  if (!(alpha > 0.0) || !(alpha <= 1.0)) throw PreconditionError("alpha must lie in (0,1]");
  ObataCoefficients oc;
  oc.n = n;
  oc.alpha = alpha;
  double nn = n;
  oc.alpha1 = 4.0 * (nn - 1.0) / ((nn - 2.0) * (nn - 2.0));
  oc.alpha2 = (nn * nn - 4.0) / (4.0 * (nn - 1.0) * nn);
  oc.B = 2.0 * nn / ((nn - 2.0) * (nn - 2.0)) *
             (1.0 / nn + oc.alpha2 * (2.0 - alpha) * (nn - 1.0) / nn) -
         oc.alpha1 / (2.0 * nn);
  oc.C = (nn - 1.0) / (nn - 2.0) -
         2.0 * (1.0 - alpha) / (nn - 2.0) * (1.0 + oc.alpha2 * (2.0 - alpha) * (nn - 1.0));
  oc.I = (1.0 - alpha) * oc.alpha1 * (nn - 1.0) / nn + 2.0 * alpha * (nn - 1.0) * oc.B;

  double q1 = std::sqrt(std::max(0.0, (1.0 - alpha) * (nn - 1.0) * oc.alpha1 / nn));
  double q2 = std::sqrt(std::max(0.0, 2.0 * alpha * (nn - 1.0) * oc.B));
  double absC = std::abs(oc.C);
  oc.window_lo = std::max(0.0, absC - q2);
  oc.window_hi = std::min(q1, absC + q2);
  oc.feasible = oc.window_lo <= oc.window_hi + 1e-15;
  return oc;
}

// ------------------------------------------------- zonal second-order fields
//
// Everything the weighted identities need, for g = u^2 g0 with u built from
// the PowerScalar factor w as u = w^{2/(n-2)}.  Hessians are taken in a
// g0-orthonormal zonal frame: the latitude direction e_t, m-1 directions
// tangent to the symmetric factor's orbit, and (for products) q directions
// along the second factor, where the background Hessian of a zonal function
// vanishes and only the conformal correction survives.

struct ZonalSecondOrder {
  VectorXd u, up;     // u and d u/d mu
  VectorXd S, Sp;     // scalar curvature of g and d S/d mu
  VectorXd Q;         // fourth-order curvature of g
  VectorXd dvg;       // u^n
  VectorXd lapg_u, lapg_S;
  VectorXd E2;        // |E|^2_g by the Hessian route
  VectorXd ES_uS;     // E(grad_g u, grad_g S)
  VectorXd ES_SS;     // E(grad_g S, grad_g S)
  VectorXd Hg_SS;     // (Hess_g u)(grad_g S, grad_g S)
  VectorXd inner_uu, inner_uS, inner_SS;  // <.,.>_g gradient contractions
};

inline ZonalSecondOrder zonal_second_order(const ConformalMetric& mtr) {
  const Background& bg = *mtr.bg;
  const double n = bg.n;
  const double r2 = bg.r1 * bg.r1;
  const int q = bg.n - bg.m;

  ZonalSecondOrder z;
  z.u = detail::pow_nodal(mtr.w.v, 2.0 / (n - 2.0));
  Field uf((VectorXd(z.u)));
  VectorXd cu = detail::denoised(coeffs(bg, uf));
  z.up = bg.D * cu;
  VectorXd upp = bg.D2 * cu;

  z.S = mtr.R.v;
  Field Sf((VectorXd(z.S)));
  VectorXd cS = detail::denoised(coeffs(bg, Sf));
  z.Sp = bg.D * cS;
  VectorXd lap0S = bg.B * (-bg.eigs.array() * cS.array()).matrix();

  z.Q = mtr.Q.v;
  z.dvg = detail::pow_nodal(z.u, n);

  z.lapg_u.resize(bg.N);
  z.lapg_S.resize(bg.N);
  z.E2.resize(bg.N);
  z.ES_uS.resize(bg.N);
  z.ES_SS.resize(bg.N);
  z.Hg_SS.resize(bg.N);
  z.inner_uu.resize(bg.N);
  z.inner_uS.resize(bg.N);
  z.inner_SS.resize(bg.N);

  for (int i = 0; i < bg.N; ++i) {
    double mu = bg.mu[i], s2 = 1.0 - mu * mu;
    double u = z.u[i], up = z.up[i];
    double phip = up / u;
    double H0tt = (s2 * upp[i] - mu * up) / r2;
    double H0ff = -mu * up / r2;
    double G = s2 * phip * up / r2;
    double Hg_tt = H0tt - G;
    double Hg_ff = H0ff + G;
    double Hg_qq = G;
    double lapu = (Hg_tt + (bg.m - 1) * Hg_ff + q * Hg_qq) / (u * u);
    double Ttt = Hg_tt - lapu / n * u * u;
    double Tff = Hg_ff - lapu / n * u * u;
    double Tqq = Hg_qq - lapu / n * u * u;
    double Ett = -(n - 2.0) / u * Ttt;
    double Eff = -(n - 2.0) / u * Tff;
    double Eqq = -(n - 2.0) / u * Tqq;
    double u4 = u * u * u * u;

    z.lapg_u[i] = lapu;
    z.lapg_S[i] = (lap0S[i] + (n - 2.0) * s2 * phip * z.Sp[i] / r2) / (u * u);
    z.E2[i] = (Ett * Ett + (bg.m - 1) * Eff * Eff + q * Eqq * Eqq) / u4;
    z.ES_uS[i] = Ett * s2 * up * z.Sp[i] / (u4 * r2);
    z.ES_SS[i] = Ett * s2 * z.Sp[i] * z.Sp[i] / (u4 * r2);
    z.Hg_SS[i] = Hg_tt * s2 * z.Sp[i] * z.Sp[i] / (u4 * r2);
    z.inner_uu[i] = s2 * up * up / (u * u * r2);
    z.inner_uS[i] = s2 * up * z.Sp[i] / (u * u * r2);
    z.inner_SS[i] = s2 * z.Sp[i] * z.Sp[i] / (u * u * r2);
  }
  return z;
}

// Fourth-order curvature assembled from the sigma-route:
// Q = -Delta_g sigma1 + 4 sigma2 + (n-4)/2 sigma1^2, with sigma2 built from
// the Hessian-route |E|^2.  Completely independent of the operator route.
inline VectorXd q_from_sigma_route(const ZonalSecondOrder& z, int n) {
  VectorXd out(z.S.size());
  for (int i = 0; i < z.S.size(); ++i) {
    double s1 = z.S[i] / (2.0 * (n - 1.0));
    double A2 = z.E2[i] / ((n - 2.0) * (n - 2.0)) + s1 * s1 / n;
    double s2 = 0.5 * (s1 * s1 - A2);
    double lap_s1 = z.lapg_S[i] / (2.0 * (n - 1.0));
    out[i] = -lap_s1 + 4.0 * s2 + (n - 4.0) / 2.0 * s1 * s1;
  }
  return out;
}

// ------------------------------------------------- weighted identity residuals
//
// res_lemma: the five-term integration-by-parts identity; res_main: the main
// weighted equality against its right-hand side.  Both are normalized by the
// largest constituent term, and both must vanish for every metric by
// derivation -- they are implementation checks, not hypotheses.

struct ObataResidual {
  double res_lemma = 0;
  double res_main = 0;
};

inline ObataResidual obata_identity_residual(const ConformalMetric& mtr, double alpha) {
  const Background& bg = *mtr.bg;
  if (!(alpha > 0.0) || !(alpha <= 1.0)) throw PreconditionError("alpha must lie in (0,1]");
  if (mtr.R.v.minCoeff() <= 0.0)
    throw PreconditionError("scalar curvature must be positive for the weighted identities");

  ZonalSecondOrder z = zonal_second_order(mtr);
  const double n = bg.n;

  auto I = [&](const VectorXd& f) { return bg.w.dot(f.cwiseProduct(z.dvg)); };
  VectorXd Sa(bg.N);
  for (int i = 0; i < bg.N; ++i) Sa[i] = std::pow(z.S[i], -alpha);

  // five-term identity
  VectorXd t1(bg.N), t2(bg.N), t3(bg.N), t4(bg.N), t5(bg.N);
  for (int i = 0; i < bg.N; ++i) {
    t1[i] = z.lapg_u[i] * z.lapg_S[i] * Sa[i];
    t2[i] = z.lapg_u[i] * z.inner_SS[i] * Sa[i] / z.S[i];
    t3[i] = z.ES_uS[i] * Sa[i];
    t4[i] = z.u[i] * z.inner_SS[i] * Sa[i];
    t5[i] = z.S[i] * Sa[i] * z.inner_uS[i];
  }
  double T1 = (n - 2.0) * (1.0 - n) / n * I(t1);
  double T2 = (n - 2.0) * (n - 1.0) * alpha / n * I(t2);
  double T3 = (n - 1.0) * I(t3);
  double T4 = (n - 2.0) / (2.0 * n) * I(t4);
  double T5 = (n - 2.0) / n * I(t5);
  double scale5 = std::max({std::abs(T1), std::abs(T2), std::abs(T3), std::abs(T4), std::abs(T5),
                            1e-300});
  ObataResidual res;
  res.res_lemma = std::abs(T1 + T2 + T3 + T4 + T5) / scale5;

  // main equality
  ObataCoefficients oc = obata_coefficients(bg.n, alpha);
  VectorXd m1(bg.N), m2(bg.N), m3(bg.N), m4(bg.N), m5(bg.N), m6(bg.N);
  for (int i = 0; i < bg.N; ++i) {
    m1[i] = z.E2[i] * Sa[i] / z.u[i] * z.inner_uu[i];
    m2[i] = bg.R0 / z.u[i] *
            (oc.alpha1 * z.E2[i] * Sa[i] + alpha * z.inner_SS[i] * Sa[i] / z.S[i]);
    m3[i] = z.inner_SS[i] * Sa[i] / (z.S[i] * z.u[i]) * z.inner_uu[i];
    m4[i] = z.u[i] * z.inner_SS[i] * Sa[i];
    m5[i] = z.u[i] * z.E2[i] * z.S[i] * Sa[i];
    m6[i] = z.ES_uS[i] * Sa[i];
  }
  double M1 = (n - 1.0) * oc.alpha1 / 2.0 * I(m1);
  double M2 = 1.0 / (2.0 * n) * I(m2);
  double M3 = alpha * (n - 1.0) / 2.0 * I(m3);
  double M4 = (1.0 - alpha) / (2.0 * n) * I(m4);
  double M5 = oc.B * I(m5);
  double M6 = oc.C * I(m6);

  // right-hand side: (2(n-1)^2/n) int <grad u, grad(Q S^-alpha)>_g dv_g
  Field qsa(VectorXd(z.Q.cwiseProduct(Sa)));
  VectorXd qp = deriv_mu(bg, qsa);
  VectorXd rhs_i(bg.N);
  for (int i = 0; i < bg.N; ++i) {
    double s2 = 1.0 - bg.mu[i] * bg.mu[i];
    rhs_i[i] = s2 * z.up[i] * qp[i] / (z.u[i] * z.u[i] * bg.r1 * bg.r1);
  }
  double RHS = 2.0 * (n - 1.0) * (n - 1.0) / n * I(rhs_i);

  double scaleM = std::max({std::abs(M1), std::abs(M2), std::abs(M3), std::abs(M4), std::abs(M5),
                            std::abs(M6), std::abs(RHS), 1e-300});
  res.res_main = std::abs(M1 + M2 + M3 + M4 + M5 + M6 - RHS) / scaleM;
  return res;
}

// ------------------------------------------------------------ optimizer family

// u(mu) = a (1 + b mu)^{-(n-4)/2}: the zonal restriction of the extremal
// bubble family; the resulting metric is round with constant curvatures.
inline ConformalMetric optimizer_family(const Background& bg, double a, double b) {
  if (bg.kind.family != BackgroundFamily::RoundSphere || bg.n < 5)
    throw PreconditionError("optimizer family defined on round spheres of dimension >= 5");
  if (!(a > 0.0)) throw PreconditionError("scale parameter a must be positive");
  if (!(std::abs(b) < 1.0)) throw PreconditionError("axis parameter must satisfy |b| < 1");
  VectorXd u(bg.N);
  for (int i = 0; i < bg.N; ++i) u[i] = a * std::pow(1.0 + b * bg.mu[i], -(bg.n - 4.0) / 2.0);
  return conformal_metric(bg, Convention::PowerN5plus, Field(std::move(u)));
}

// --------------------------------------------------------------- convexity

// min over nodes of L0(u^t v^{1-t}) for admissible u, v: nonnegative by the
// two-point convexity property of the second-order operator.
inline double convexity_check(const Background& bg, const Field& u, const Field& v, double t) {
  if (!(t >= 0.0) || !(t <= 1.0)) throw PreconditionError("interpolation weight must be in [0,1]");
  if (u.v.minCoeff() <= 0.0 || v.v.minCoeff() <= 0.0)
    throw PreconditionError("outside admissible cone");
  auto L = conformal_laplacian(bg);
  Field Lu = apply(bg, L, u), Lv = apply(bg, L, v);
  double tolu = 1e-12 * std::max(1.0, Lu.v.cwiseAbs().maxCoeff());
  double tolv = 1e-12 * std::max(1.0, Lv.v.cwiseAbs().maxCoeff());
  if (Lu.v.minCoeff() < -tolu || Lv.v.minCoeff() < -tolv)
    throw PreconditionError("outside admissible cone");
  VectorXd mix(bg.N);
  for (int i = 0; i < bg.N; ++i) mix[i] = std::pow(u.v[i], t) * std::pow(v.v[i], 1.0 - t);
  Field Lmix = apply(bg, L, Field(std::move(mix)));
  return Lmix.v.minCoeff();
}

}  // namespace qrlab
