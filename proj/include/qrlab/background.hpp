#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>

#include "qrlab/common.hpp"

namespace qrlab {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// ------------------------------------------------------------------ Background
//
// Zonal pseudospectral discretization of either the round n-sphere or a
// product of two round spheres with matched Einstein constants.  All fields
// depend on mu = cos(theta) along the first ("symmetric") factor only, so the
// natural basis is the ultraspherical (Gegenbauer-class) family orthogonal
// against (1 - mu^2)^{(m-2)/2}: exactly the zonal Laplace-Beltrami
// eigenfunctions, which keeps every operator in this library diagonal.

enum class BackgroundFamily { RoundSphere, EinsteinProduct };

struct BackgroundKind {
  BackgroundFamily family = BackgroundFamily::RoundSphere;
  int p = 0, q = 0;          // product factor dimensions
  double r1 = 1.0, r2 = 1.0;  // product factor radii

  static BackgroundKind sphere() { return {}; }
  static BackgroundKind product(int p, int q, double r1 = 1.0, double r2 = 1.0) {
    return {BackgroundFamily::EinsteinProduct, p, q, r1, r2};
  }
};

struct Background {
  int n = 0;    // total dimension
  int N = 0;    // quadrature nodes
  int L = 0;    // highest retained mode
  BackgroundKind kind;

  int m = 0;          // dimension of the symmetric factor carrying mu
  double r1 = 1.0;    // its radius
  double lambdaG = 0;  // ultraspherical parameter (m-1)/2

  VectorXd mu;    // nodes, ascending
  VectorXd w;     // weights, sum = vol
  MatrixXd B;     // phi_l(mu_i), N x (L+1), discretely orthonormal
  MatrixXd D;     // d phi_l / d mu at nodes
  MatrixXd D2;    // d^2 phi_l / d mu^2 at nodes
  VectorXd norm;  // phi_l = C_l / norm_l
  VectorXd eigs;  // Laplace-Beltrami eigenvalue lambda_l = l(l+m-1)/r1^2 (>= 0)

  double vol = 0, R0 = 0, Q0 = 0, A0_coeff = 0;
};

namespace detail {

// Raw Gegenbauer values C_l^{lam}(x) for l = 0..L at a single point, by the
// three-term recurrence.
inline void gegenbauer_row(double lam, int L, double x, double* out) {
  out[0] = 1.0;
  if (L >= 1) out[1] = 2.0 * lam * x;
  for (int k = 1; k < L; ++k)
    out[k + 1] = (2.0 * (k + lam) * x * out[k] - (k + 2.0 * lam - 1.0) * out[k - 1]) / (k + 1);
}

inline MatrixXd gegenbauer_table(double lam, int L, const VectorXd& x) {
  MatrixXd C(x.size(), L + 1);
  std::vector<double> row(L + 1);
  for (int i = 0; i < x.size(); ++i) {
    gegenbauer_row(lam, L, x[i], row.data());
    for (int l = 0; l <= L; ++l) C(i, l) = row[l];
  }
  return C;
}

}  // namespace detail

inline Background build_background(int n, const BackgroundKind& kind, int N, int L) {
  if (n < 3) throw PreconditionError("background dimension must be at least 3");
  if (L < 8) throw PreconditionError("mode cutoff L must be at least 8");
  if (N < 2 * L + 2) throw PreconditionError("need N >= 2L+2 quadrature nodes (aliasing)");

  Background bg;
  bg.n = n;
  bg.N = N;
  bg.L = L;
  bg.kind = kind;

  if (kind.family == BackgroundFamily::RoundSphere) {
    bg.m = n;
    bg.r1 = 1.0;
    bg.vol = sphere_volume(n);
    bg.R0 = static_cast<double>(n) * (n - 1);
  } else {
    int p = kind.p, q = kind.q;
    if (p < 2 || q < 2) throw PreconditionError("product factors must have dimension >= 2");
    if (p + q != n) throw PreconditionError("product factor dimensions must sum to n");
    if (!(kind.r1 > 0) || !(kind.r2 > 0)) throw PreconditionError("radii must be positive");
    double k1 = (p - 1) / (kind.r1 * kind.r1);
    double k2 = (q - 1) / (kind.r2 * kind.r2);
    if (std::abs(k1 - k2) > 1e-12 * std::max(k1, k2))
      throw PreconditionError("non-Einstein radii: (p-1)/r1^2 must equal (q-1)/r2^2");
    bg.m = p;
    bg.r1 = kind.r1;
    bg.vol = std::pow(kind.r1, p) * sphere_volume(p) * std::pow(kind.r2, q) * sphere_volume(q);
    bg.R0 = p * k1 + q * k2;
  }
  double dn = (static_cast<double>(n) * n - 4) / (8.0 * n * (n - 1.0) * (n - 1.0));
  bg.Q0 = dn * bg.R0 * bg.R0;
  bg.A0_coeff = bg.R0 / (2.0 * n * (n - 1.0));
  bg.lambdaG = 0.5 * (bg.m - 1);

  // Golub-Welsch on the monic Jacobi matrix of the weight (1-mu^2)^{lam-1/2}.
  const double lam = bg.lambdaG;
  VectorXd diagv = VectorXd::Zero(N), off(N - 1);
  for (int k = 1; k < N; ++k) {
    double beta = k * (k + 2.0 * lam - 1.0) / (4.0 * (k + lam - 1.0) * (k + lam));
    off[k - 1] = std::sqrt(beta);
  }
  Eigen::SelfAdjointEigenSolver<MatrixXd> es;
  es.computeFromTridiagonal(diagv, off, Eigen::ComputeEigenvectors);
  if (es.info() != Eigen::Success) throw InvariantError("quadrature eigensolve failed");
  bg.mu = es.eigenvalues();
  const double mu0 = std::sqrt(M_PI) * gamma_half_int(bg.m) / gamma_half_int(bg.m + 1);
  bg.w.resize(N);
  for (int i = 0; i < N; ++i) {
    double v0 = es.eigenvectors()(0, i);
    bg.w[i] = mu0 * v0 * v0;
  }
  bg.w *= bg.vol / bg.w.sum();

  // Basis, first and second derivative tables.  d/dx C_l^{lam} = 2 lam
  // C_{l-1}^{lam+1} and d^2/dx^2 C_l^{lam} = 4 lam (lam+1) C_{l-2}^{lam+2}.
  MatrixXd C = detail::gegenbauer_table(lam, L, bg.mu);
  MatrixXd C1 = detail::gegenbauer_table(lam + 1.0, L, bg.mu);
  MatrixXd C2 = detail::gegenbauer_table(lam + 2.0, L, bg.mu);
  bg.B.resize(N, L + 1);
  bg.D = MatrixXd::Zero(N, L + 1);
  bg.D2 = MatrixXd::Zero(N, L + 1);
  bg.norm.resize(L + 1);
  for (int l = 0; l <= L; ++l) {
    double s2 = 0;
    for (int i = 0; i < N; ++i) s2 += bg.w[i] * C(i, l) * C(i, l);
    bg.norm[l] = std::sqrt(s2);
    bg.B.col(l) = C.col(l) / bg.norm[l];
    if (l >= 1) bg.D.col(l) = 2.0 * lam * C1.col(l - 1) / bg.norm[l];
    if (l >= 2) bg.D2.col(l) = 4.0 * lam * (lam + 1.0) * C2.col(l - 2) / bg.norm[l];
  }

  bg.eigs.resize(L + 1);
  for (int l = 0; l <= L; ++l)
    bg.eigs[l] = static_cast<double>(l) * (l + bg.m - 1.0) / (bg.r1 * bg.r1);
  return bg;
}

// ----------------------------------------------------------------------- Field
//
// Nodal values plus a lazily cached spectral image.  The cache is an
// optimization local to one thread of work: fields are value types and scans
// hand each worker its own copies.

struct Field {
  VectorXd v;
  mutable std::optional<VectorXd> coef;

  Field() = default;
  explicit Field(VectorXd values) : v(std::move(values)) {}
};

inline Field constant_field(const Background& bg, double c) {
  return Field(VectorXd::Constant(bg.N, c));
}

inline const VectorXd& coeffs(const Background& bg, const Field& f) {
  if (!f.coef) f.coef = bg.B.transpose() * bg.w.cwiseProduct(f.v);
  return *f.coef;
}

inline Field to_spectral(const Background& bg, Field f) {
  coeffs(bg, f);
  return f;
}

inline Field from_coeffs(const Background& bg, const VectorXd& c) {
  Field f(bg.B * c);
  f.coef = c;
  return f;
}

inline Field to_nodal(const Background& bg, const VectorXd& c) { return from_coeffs(bg, c); }

// Mode-l basis function as a field.
inline Field basis_field(const Background& bg, int l) {
  VectorXd c = VectorXd::Zero(bg.L + 1);
  c[l] = 1.0;
  return from_coeffs(bg, c);
}

inline double integrate(const Background& bg, const Field& f) { return bg.w.dot(f.v); }

// Re-projection onto the retained band (tail filter after nodal nonlinearity).
inline Field band_project(const Background& bg, const Field& f) {
  return from_coeffs(bg, coeffs(bg, f));
}

namespace detail {

inline void check_aliasing(const Background& bg, const VectorXd& c) {
  double total = c.squaredNorm();
  if (total <= 0) return;
  double top = c[bg.L] * c[bg.L] + (bg.L >= 1 ? c[bg.L - 1] * c[bg.L - 1] : 0.0);
  double frac = top / total;
  if (frac > 1e-6) diag::note_aliasing(frac);
}

// Coefficients below machine-relative level are quadrature roundoff, not
// signal; differentiation and operator multipliers amplify mode l by up to
// lambda_l^2, so that dirt would dominate high-order quantities.  Zeroing
// everything under 1e-13 * ||c||_inf caps the amplified error at the same
// bound the genuine sub-threshold content would contribute anyway.
inline VectorXd denoised(const VectorXd& c) {
  double thresh = 1e-13 * c.cwiseAbs().maxCoeff();
  VectorXd out = c;
  for (int l = 0; l < out.size(); ++l)
    if (std::abs(out[l]) < thresh) out[l] = 0.0;
  return out;
}

}  // namespace detail

inline Field laplacian_g0(const Background& bg, const Field& f) {
  VectorXd c = detail::denoised(coeffs(bg, f));
  detail::check_aliasing(bg, coeffs(bg, f));
  return from_coeffs(bg, (-bg.eigs.array() * c.array()).matrix());
}

// d/dmu at nodes (band-limited interpretation of f).
inline VectorXd deriv_mu(const Background& bg, const Field& f) {
  return bg.D * detail::denoised(coeffs(bg, f));
}
inline VectorXd deriv2_mu(const Background& bg, const Field& f) {
  return bg.D2 * detail::denoised(coeffs(bg, f));
}

inline Field grad_sq_g0(const Background& bg, const Field& f) {
  const VectorXd& c = coeffs(bg, f);
  detail::check_aliasing(bg, c);
  VectorXd fp = bg.D * detail::denoised(c);
  VectorXd g(bg.N);
  for (int i = 0; i < bg.N; ++i) {
    double s2 = 1.0 - bg.mu[i] * bg.mu[i];
    g[i] = s2 * fp[i] * fp[i] / (bg.r1 * bg.r1);
  }
  return Field(std::move(g));
}

// Pointwise product of the gradients of f and h in the background metric.
inline VectorXd grad_inner_g0(const Background& bg, const Field& f, const Field& h) {
  VectorXd fp = deriv_mu(bg, f), hp = deriv_mu(bg, h);
  VectorXd g(bg.N);
  for (int i = 0; i < bg.N; ++i) {
    double s2 = 1.0 - bg.mu[i] * bg.mu[i];
    g[i] = s2 * fp[i] * hp[i] / (bg.r1 * bg.r1);
  }
  return g;
}

// Evaluate a coefficient vector at arbitrary points in [-1,1] (used by the
// Moebius pullback; points need not be quadrature nodes).
inline VectorXd eval_at(const Background& bg, const VectorXd& c, const VectorXd& x) {
  MatrixXd C = detail::gegenbauer_table(bg.lambdaG, bg.L, x);
  VectorXd scaled = c.cwiseQuotient(bg.norm);
  return C * scaled;
}

// ------------------------------------------------------------ SpectralOperator

struct SpectralOperator {
  VectorXd mult;       // multiplier per mode
  int kernel_dim = 0;  // number of exactly-zero multipliers
};

inline SpectralOperator make_operator(const Background& bg, const VectorXd& mult) {
  SpectralOperator op;
  op.mult = mult;
  op.kernel_dim = 0;
  for (int l = 0; l < mult.size(); ++l)
    if (mult[l] == 0.0) ++op.kernel_dim;
  return op;
}

// L_{g0} = -Delta + (n-2) R0 / (4(n-1)).
inline SpectralOperator conformal_laplacian(const Background& bg) {
  double a = (bg.n - 2.0) * bg.R0 / (4.0 * (bg.n - 1.0));
  return make_operator(bg, (bg.eigs.array() + a).matrix());
}

// Fourth-order covariant operator of the background: lambda^2 - c1 lambda +
// (n-4) Q0 / 2 with c1 = 4 A0 - (n-2) R0 / (2(n-1)); for n = 4 the zeroth
// order term drops and the divergence coefficient is R0/6.
inline SpectralOperator paneitz_operator(const Background& bg) {
  VectorXd mult(bg.L + 1);
  if (bg.n == 4) {
    for (int l = 0; l <= bg.L; ++l) {
      double lam = bg.eigs[l];
      mult[l] = lam * (lam + bg.R0 / 6.0);
    }
  } else {
    double c1 = 4.0 * bg.A0_coeff - (bg.n - 2.0) * bg.R0 / (2.0 * (bg.n - 1.0));
    double c0 = (bg.n - 4.0) * bg.Q0 / 2.0;
    for (int l = 0; l <= bg.L; ++l) {
      double lam = bg.eigs[l];
      mult[l] = lam * lam - c1 * lam + c0;
    }
  }
  return make_operator(bg, mult);
}

// Product of shifted Laplacians Prod_{j=1..k} (lambda + (n-2j)(n+2j-2)/4);
// defined on the unit round sphere, where it gives every even-order
// conformally covariant power.
inline SpectralOperator gjms_operator(const Background& bg, int k) {
  if (bg.kind.family != BackgroundFamily::RoundSphere || bg.r1 != 1.0)
    throw PreconditionError("product-form operator defined on the unit round sphere only");
  if (k < 1 || 2 * k >= bg.n) throw PreconditionError("order k must satisfy 1 <= k < n/2");
  VectorXd mult = VectorXd::Ones(bg.L + 1);
  for (int j = 1; j <= k; ++j) {
    double shift = (bg.n - 2.0 * j) * (bg.n + 2.0 * j - 2.0) / 4.0;
    for (int l = 0; l <= bg.L; ++l) mult[l] *= bg.eigs[l] + shift;
  }
  return make_operator(bg, mult);
}

inline Field apply(const Background& bg, const SpectralOperator& op, const Field& f) {
  const VectorXd& c = coeffs(bg, f);
  detail::check_aliasing(bg, c);
  return from_coeffs(bg, (op.mult.array() * detail::denoised(c).array()).matrix());
}

inline Field paneitz_apply(const Background& bg, const Field& f) {
  return apply(bg, paneitz_operator(bg), f);
}

inline Field gjms_apply(const Background& bg, int k, const Field& f) {
  return apply(bg, gjms_operator(bg, k), f);
}

// Inverse on the orthogonal complement of the kernel.  A kernel component in
// the input is rejected ("kernel violation"); for n != 4 the operator must be
// positive definite.  The sign monitor implements the positivity-preservation
// property of the fourth-order inverse: a positive input on a background with
// Q0 >= 0 and R0 > 0 must produce a strictly positive preimage.
inline Field invert(const Background& bg, const SpectralOperator& op, const Field& f,
                    bool positivity_monitor = false) {
  const VectorXd& c = coeffs(bg, f);
  VectorXd out(c.size());
  double scale = std::max(1.0, f.v.cwiseAbs().maxCoeff());
  for (int l = 0; l < c.size(); ++l) {
    if (op.mult[l] == 0.0) {
      // mean-zero requirement expressed per mode; mode 0 carries the mean
      double mean_like = c[l] / std::sqrt(bg.vol);
      if (std::abs(mean_like) > 1e-10 * scale) throw PreconditionError("kernel violation");
      out[l] = 0.0;
    } else {
      out[l] = c[l] / op.mult[l];
    }
  }
  Field res = from_coeffs(bg, out);
  if (positivity_monitor && op.kernel_dim == 0 && bg.Q0 >= 0.0 && bg.R0 > 0.0 &&
      f.v.minCoeff() > 0.0 && res.v.minCoeff() <= 0.0)
    throw InvariantError("positive-preimage monitor tripped: fourth-order inverse lost positivity");
  return res;
}

inline Field paneitz_invert(const Background& bg, const Field& f) {
  SpectralOperator op = paneitz_operator(bg);
  if (bg.n != 4) {
    for (int l = 0; l <= bg.L; ++l)
      if (op.mult[l] <= 0.0)
        throw PreconditionError("fourth-order operator is not positive definite on this background");
  }
  return invert(bg, op, f, /*positivity_monitor=*/true);
}

}  // namespace qrlab
