#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "kgdyn/field.hpp"

namespace kg {

struct ShootingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/*
 * Shooting profile of -Q'' - (2/r)Q' + Q = Q^3 on [0, r_stop], with the
 * matched tail A e^{-r}/r grafted beyond r_cut (the tuned solution still
 * drifts like e^{+r} once the bracket width is amplified, so the raw
 * integration is only trusted up to ~28).
 */
struct ShootingProfile {
  double Q0 = 0.0;           // central value
  double r_cut = 0.0;        // graft radius
  double tail_amp = 0.0;     // A in A e^{-r}/r
  std::vector<double> r;     // dense sample radii (from r0)
  std::vector<double> q;     // Q(r) samples
  double eval(double rr) const;  // cubic interpolation + tail
};

// Bisection on Q(0) between "turns upward" and "crosses zero". Step size dr_ode
// controls the fixed-step RK4 integrator. Throws ShootingError on bracket failure.
ShootingProfile shoot_ground_state(double r_max = 48.0, double dr_ode = 1e-3);

struct GroundState {
  std::shared_ptr<const RadialGrid> grid;
  Field Q;        // real radial profile (discrete solution)
  Field DQ;       // frakQ = D Q
  double Q0 = 0;  // extrapolated central value
  double a = 0;   // int |grad Q|^2
  double b = 0;   // int Q^2
  double c4 = 0;  // int Q^4
  double JQ = 0;  // action J(Q) (= b up to solver tolerance)
  double residual = 0;  // grid norm of (-Lap + 1)Q - Q^3

  // complexified static state (Q, wdot = 0)
  const Field& state() const { return DQ; }
};

/*
 * Shooting + projection onto the sine grid + normalized fixed-point relaxation
 * of Q = (-Lap+1)^{-1} Q^3 (Petviashvili exponent 3/2; the plain iteration has
 * the exact unstable mode Q with multiplier 3, the normalization removes it).
 * Postcondition: discrete residual <= tol, Q > 0 and decreasing.
 */
GroundState compute_ground_state(std::shared_ptr<const RadialGrid> grid,
                                 double tol = 1e-10);

// Petviashvili relaxation used by compute_ground_state and by the box-mode
// traveling-wave refinement; exposed for reuse. apply_M / apply_Minv act on
// real sample arrays; dot is the grid quadrature pairing.
double petviashvili(std::vector<double>& q,
                    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply_M,
                    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply_Minv,
                    const std::function<double(const std::vector<double>&, const std::vector<double>&)>& dot,
                    int iters, double tol);

}  // namespace kg
