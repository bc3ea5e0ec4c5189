#pragma once

#include <cmath>
#include <limits>
#include <algorithm>
#include <span>
#include <vector>

#include "factsteer/common/error.hpp"

namespace factsteer::stats {

namespace detail {

// Continued fraction for the incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw InvalidArgument("incomplete_beta: a and b must be positive");
  if (x < 0.0 || x > 1.0) throw InvalidArgument("incomplete_beta: x outside [0, 1]");
  if (x == 0.0 || x == 1.0) return x;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

// P(|T| >= |t|) for Student's t with `dof` degrees of freedom.
inline double t_two_sided_p(double t, double dof) {
  if (!(dof > 0.0)) throw InvalidArgument("t distribution needs positive degrees of freedom");
  if (std::isnan(t)) throw InvalidArgument("t statistic is NaN");
  if (std::isinf(t)) return 0.0;
  const double p = incomplete_beta(dof / 2.0, 0.5, dof / (dof + t * t));
  return std::min(1.0, std::max(0.0, p));
}

struct TTest {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  double mean_a = 0.0;
  double mean_b = 0.0;
};

inline double mean(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

inline double sample_variance(std::span<const double> x) {
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return s / static_cast<double>(x.size() - 1);
}

// A zero standard error gives t = 0, p = 1 when the means agree and an
// infinite t with p = 0 otherwise.
inline void finish(TTest& r, double diff, double se) {
  if (se == 0.0) {
    r.t = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
    r.p_value = diff == 0.0 ? 1.0 : 0.0;
    return;
  }
  r.t = diff / se;
  r.p_value = t_two_sided_p(r.t, r.dof);
}

// Unequal-variance two-sample t-test, Welch-Satterthwaite degrees of freedom.
inline TTest welch(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw InvalidArgument("welch: each group needs at least 2 samples");
  TTest r;
  r.mean_a = mean(a);
  r.mean_b = mean(b);
  const double qa = sample_variance(a) / static_cast<double>(a.size());
  const double qb = sample_variance(b) / static_cast<double>(b.size());
  const double se2 = qa + qb;
  r.dof = se2 > 0.0 ? se2 * se2 / (qa * qa / static_cast<double>(a.size() - 1) +
                                   qb * qb / static_cast<double>(b.size() - 1))
                    : static_cast<double>(a.size() + b.size() - 2);
  finish(r, r.mean_a - r.mean_b, std::sqrt(se2));
  return r;
}

inline TTest paired(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("paired t-test: samples differ in length");
  if (a.size() < 2) throw InvalidArgument("paired t-test needs at least 2 pairs");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  TTest r;
  r.mean_a = mean(a);
  r.mean_b = mean(b);
  r.dof = static_cast<double>(d.size() - 1);
  finish(r, mean(d), std::sqrt(sample_variance(d) / static_cast<double>(d.size())));
  return r;
}

}  // namespace factsteer::stats
