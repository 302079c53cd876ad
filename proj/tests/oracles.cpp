#include "oracles.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_odeiv2.h>

#include <cmath>
#include <stdexcept>

namespace kg::oracle {

namespace {

int nlkg_rhs(double r, const double y[], double dydt[], void*) {
  dydt[0] = y[1];
  dydt[1] = -2.0 / r * y[1] - y[0] * y[0] * y[0] + y[0];
  return GSL_SUCCESS;
}

enum class Fate { crosses, turns, undecided };

Fate classify(double b, double rmax, double rel_tol,
              const std::vector<double>* sample_r = nullptr,
              std::vector<double>* sample_q = nullptr) {
  gsl_odeiv2_system sys{nlkg_rhs, nullptr, 2, nullptr};
  gsl_odeiv2_driver* drv = gsl_odeiv2_driver_alloc_y_new(
      &sys, gsl_odeiv2_step_rk8pd, 1e-6, 1e-14, rel_tol);
  double r = 1e-3;
  double c = (b - b * b * b) / 6.0;
  double y[2] = {b + c * r * r, 2.0 * c * r};
  Fate fate = Fate::undecided;
  std::size_t si = 0;
  const double h = 0.02;
  while (r < rmax) {
    double r_next = std::min(r + h, rmax);
    if (sample_r && si < sample_r->size() && (*sample_r)[si] <= r_next)
      r_next = (*sample_r)[si];
    int status = gsl_odeiv2_driver_apply(drv, &r, r_next, y);
    if (status != GSL_SUCCESS) break;
    if (sample_r && si < sample_r->size() && r >= (*sample_r)[si]) {
      sample_q->push_back(y[0]);
      ++si;
    }
    if (y[0] <= 0.0) {
      fate = Fate::crosses;
      break;
    }
    if (y[1] >= 0.0 && r > 0.5 && y[0] < 1.0) {
      fate = Fate::turns;
      break;
    }
  }
  gsl_odeiv2_driver_free(drv);
  return fate;
}

}  // namespace

double shooting_Q0(double rmax, double rel_tol) {
  double lo = 1.0, hi = 10.0;
  if (classify(lo, rmax, rel_tol) != Fate::turns ||
      classify(hi, rmax, rel_tol) != Fate::crosses)
    throw std::runtime_error("oracle shooting: bracket invalid");
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (classify(mid, rmax, rel_tol) == Fate::crosses)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> shooting_profile(const std::vector<double>& r, double rel_tol) {
  double b = shooting_Q0(48.0, rel_tol);
  std::vector<double> q;
  q.reserve(r.size());
  classify(b, r.back() + 1.0, rel_tol, &r, &q);
  while (q.size() < r.size()) q.push_back(0.0);  // beyond the break point
  return q;
}

double fd_lowest_eigenvalue(double R, int n, const std::function<double(double)>& Q) {
  const double dr = R / (n + 1);
  std::vector<double> d(n), e2(n - 1);
  for (int m = 0; m < n; ++m) {
    double r = (m + 1) * dr;
    double q = Q(r);
    d[m] = 2.0 / (dr * dr) + 1.0 - 3.0 * q * q;
  }
  const double off = -1.0 / (dr * dr);
  const double off2 = off * off;

  // Sturm count: number of eigenvalues below x
  auto count_below = [&](double x) {
    int cnt = 0;
    double q = d[0] - x;
    if (q < 0) ++cnt;
    for (int i = 1; i < n; ++i) {
      double denom = (q == 0.0) ? 1e-300 : q;
      q = d[i] - x - off2 / denom;
      if (q < 0) ++cnt;
    }
    return cnt;
  };

  double lo = -200.0, hi = 2.0;
  if (count_below(lo) != 0 || count_below(hi) < 1)
    throw std::runtime_error("fd oracle: bracket failed");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (count_below(mid) >= 1)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

double fd_lowest_eigenvalue_extrapolated(double R, int n,
                                         const std::function<double(double)>& Q) {
  double c = fd_lowest_eigenvalue(R, n, Q);
  double f = fd_lowest_eigenvalue(R, 2 * n, Q);
  return (4.0 * f - c) / 3.0;
}

double trapezoid(const std::function<double(double)>& f, double a, double b, int m) {
  double h = (b - a) / m;
  double s = 0.5 * (f(a) + f(b));
  for (int i = 1; i < m; ++i) s += f(a + i * h);
  return s * h;
}

}  // namespace kg::oracle
