#pragma once

#include <cassert>
#include <cmath>
#include <limits>

#include "icmm/linalg.hpp"
#include "icmm/rng.hpp"

namespace icmm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Standard normal CDF.
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

// Standard normal quantile, Wichura's PPND16 (algorithm AS 241).
// Accurate to ~1e-16 over (0, 1).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw NumericalError("normal_quantile: p must lie strictly in (0, 1)");
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -x : x;
}

// One standard normal draw via inverse CDF; exactly one uniform consumed.
inline double sample_normal(RngStream& rng) {
  return normal_quantile(rng.uniform());
}

// Gamma(shape, scale) draw, Marsaglia-Tsang squeeze with the shape<1 boost.
inline double sample_gamma(double shape, double scale, RngStream& rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw NumericalError("sample_gamma: shape and scale must be positive");
  double boost = 1.0;
  if (shape < 1.0) {
    boost = std::pow(rng.uniform(), 1.0 / shape);
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = sample_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return boost * d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return boost * d * v * scale;
  }
}

inline double sample_chisq(double df, RngStream& rng) {
  return sample_gamma(0.5 * df, 2.0, rng);
}

// One draw from N(mean, cov).
inline VectorXd sample_mvnormal(const VectorXd& mean, const SpdMatrix& cov,
                                RngStream& rng) {
  if (mean.size() != cov.dim())
    throw NumericalError("sample_mvnormal: mean/covariance dimension mismatch");
  const MatrixXd l = cholesky(cov);
  VectorXd z(mean.size());
  for (int i = 0; i < z.size(); ++i) z(i) = sample_normal(rng);
  return mean + l * z;
}

namespace detail {

// Robert's exponential-proposal rejection sampler for the standard normal
// restricted to (a, b) with a deep in the upper tail. The truncated
// exponential proposal lands in (a, b) by construction.
inline double truncnormal_tail(double a, double b, RngStream& rng) {
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    double z;
    if (b == kInf) {
      z = a - std::log(rng.uniform()) / alpha;
    } else {
      const double w = -std::expm1(-alpha * (b - a));
      z = a - std::log1p(-rng.uniform() * w) / alpha;
    }
    const double dz = z - alpha;
    if (rng.uniform() <= std::exp(-0.5 * dz * dz) && z < b) return z;
  }
}

}  // namespace detail

// One draw from N(mean, var) restricted to the open interval (lower, upper).
// Inverse-CDF in the central regime; dedicated tail sampler once the
// truncation region lies beyond 4 parent standard deviations.
inline double sample_truncnormal(double mean, double var, double lower,
                                 double upper, RngStream& rng) {
  if (!(var > 0.0)) throw NumericalError("sample_truncnormal: var must be positive");
  if (!(lower < upper))
    throw NumericalError("sample_truncnormal: empty interval (lower >= upper)");
  const double sd = std::sqrt(var);
  const double a = (lower - mean) / sd;
  const double b = (upper - mean) / sd;

  constexpr double kTail = 4.0;
  double z;
  if (a == -kInf && b == kInf) {
    z = sample_normal(rng);
  } else if (a >= kTail) {
    z = detail::truncnormal_tail(a, b, rng);
  } else if (b <= -kTail) {
    z = -detail::truncnormal_tail(-b, -a, rng);
  } else {
    const double pa = (a == -kInf) ? 0.0 : normal_cdf(a);
    const double pb = (b == kInf) ? 1.0 : normal_cdf(b);
    const double u = pa + (pb - pa) * rng.uniform();
    z = normal_quantile(std::fmin(std::fmax(u, 1e-300), 1.0 - 1e-16));
  }

  double x = mean + sd * z;
  // Interpolation can graze a bound when the interval is very narrow; nudge
  // back inside so the draw always satisfies its constraints.
  if (x <= lower) x = std::nextafter(lower, kInf);
  if (x >= upper) x = std::nextafter(upper, -kInf);
  assert(x > lower && x < upper);
  return x;
}

// Scaled inverse chi-squared draw: X = df * scale / chisq(df), i.e. density
// proportional to x^{-(df/2+1)} exp(-df*scale/(2x)).
inline double sample_scaled_inv_chisq(double df, double scale, RngStream& rng) {
  if (!(df > 0.0) || !(scale > 0.0))
    throw NumericalError("sample_scaled_inv_chisq: df and scale must be positive");
  return df * scale / sample_chisq(df, rng);
}

// Inverse Wishart draw. Convention: if W ~ Wishart(df, S^{-1}) then the
// returned X = W^{-1}, so E[X] = S / (df - dim - 1). Bartlett decomposition
// with triangular solves; the scale matrix is never inverted densely.
inline SpdMatrix sample_inv_wishart(double df, const SpdMatrix& scale,
                                    RngStream& rng) {
  const int r = scale.dim();
  if (!(df > r - 1))
    throw NumericalError("sample_inv_wishart: df must exceed dim - 1");
  const MatrixXd c = cholesky(scale);  // scale = C C^T

  // Bartlett factor of Wishart(df, I): lower triangular A.
  MatrixXd a = MatrixXd::Zero(r, r);
  for (int i = 0; i < r; ++i) {
    a(i, i) = std::sqrt(sample_chisq(df - i, rng));
    for (int j = 0; j < i; ++j) a(i, j) = sample_normal(rng);
  }

  // X = (A^{-1} C^T)^T (A^{-1} C^T) = C (A A^T)^{-1} C^T ~ IW(df, C C^T).
  const MatrixXd y =
      a.triangularView<Eigen::Lower>().solve(MatrixXd(c.transpose()));
  MatrixXd x = y.transpose() * y;
  x = ((x + x.transpose()) / 2.0).eval();
  return SpdMatrix(std::move(x));
}

}  // namespace icmm
