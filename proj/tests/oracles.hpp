#pragma once

// Independent oracles used by the test and acceptance suites. These stay off
// the library's implementation paths on purpose: the shooting oracle uses
// GSL's adaptive RK8(PD) integrator, the eigenvalue oracle a second-order
// finite-difference matrix with Sturm-sequence bisection, and the quadrature
// oracle plain refined trapezoid sums.

#include <functional>
#include <vector>

namespace kg::oracle {

// Q(0) from adaptive high-order shooting on -Q'' - (2/r)Q' + Q = Q^3
double shooting_Q0(double rmax = 48.0, double rel_tol = 1e-13);

// dense sample of the oracle profile on given radii (same integrator)
std::vector<double> shooting_profile(const std::vector<double>& r,
                                     double rel_tol = 1e-13);

// lowest eigenvalue of the FD tridiagonal L_+ = -d2/dr2 + 1 - 3Q(r)^2 on
// (0, R) with n interior nodes (Dirichlet), by Sturm-sequence bisection
double fd_lowest_eigenvalue(double R, int n,
                            const std::function<double(double)>& Q);

// Richardson-extrapolated value from n and 2n (second-order method)
double fd_lowest_eigenvalue_extrapolated(double R, int n,
                                         const std::function<double(double)>& Q);

// trapezoid integral of f on [a,b] with m panels
double trapezoid(const std::function<double(double)>& f, double a, double b, int m);

}  // namespace kg::oracle
