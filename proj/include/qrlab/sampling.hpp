#pragma once

#include "qrlab/conformal.hpp"

namespace qrlab {

// -------------------------------------------------------------- random fields
//
// Scans quantify over cones (positive factor, positive scalar curvature,
// positive fourth-order image, ...), so admissible metrics are produced by
// rejection sampling around the constant metric:
//   u = exp(s X),  X band-limited Gaussian, sup-normalized, s in [smin, smax].

struct SampleOptions {
  double smin = 0.05;
  double smax = 0.5;
  int lmax = 12;          // band limit of the random direction
  int max_tries = 200;
  double rmin_frac = 0.0;  // require min R_g >= rmin_frac * R0 (resolvability margin)
};

// Band-limited Gaussian direction with zero mean mode and sup-norm 1.
inline Field random_direction(const Background& bg, Rng& rng, int lmax = 12) {
  int top = std::min(lmax, bg.L);
  VectorXd c = VectorXd::Zero(bg.L + 1);
  for (int l = 1; l <= top; ++l) c[l] = rng.normal();
  Field X = from_coeffs(bg, c);
  double sup = X.v.cwiseAbs().maxCoeff();
  if (sup <= 0) return constant_field(bg, 0.0);
  X.v /= sup;
  X.coef = *X.coef / sup;
  return X;
}

// Random metric in the positive-scalar-curvature cone.  Scalar curvature is
// screened before the full metric is assembled: candidates outside the cone
// are discarded cheaply, and the sigma machinery (whose consistency guard
// assumes a resolved metric) only ever sees admissible factors.
inline ConformalMetric sample_admissible(const Background& bg, Convention conv, Rng& rng,
                                         const SampleOptions& opt = {}) {
  for (int attempt = 0; attempt < opt.max_tries; ++attempt) {
    Field X = random_direction(bg, rng, opt.lmax);
    double s = opt.smin + (opt.smax - opt.smin) * rng.uniform();
    VectorXd u(bg.N);
    for (int i = 0; i < bg.N; ++i) u[i] = std::exp(s * X.v[i]);
    VectorXd w = detail::power_scalar_factor(bg, conv, u);
    if (detail::scalar_curvature_from_w(bg, w).minCoeff() <= opt.rmin_frac * bg.R0) continue;
    return conformal_metric(bg, conv, Field(std::move(u)));
  }
  throw InvariantError("rejection sampling failed to find an admissible metric");
}

// Random band-limited positive factor with positive fourth-order image
// (the admissible cone of the duality pairing).
inline Field sample_positive_pair(const Background& bg, Rng& rng, const SampleOptions& opt = {}) {
  auto P = paneitz_operator(bg);
  for (int attempt = 0; attempt < opt.max_tries; ++attempt) {
    Field X = random_direction(bg, rng, opt.lmax);
    double s = opt.smin + (opt.smax - opt.smin) * rng.uniform();
    VectorXd u(bg.N);
    for (int i = 0; i < bg.N; ++i) u[i] = std::exp(s * X.v[i]);
    Field uf = band_project(bg, Field(std::move(u)));
    if (uf.v.minCoeff() <= 0.0) continue;
    Field Pu = apply(bg, P, uf);
    if (Pu.v.minCoeff() > 0.0) return uf;
  }
  throw InvariantError("rejection sampling failed to find an admissible pair");
}

}  // namespace qrlab
