#pragma once

#include <array>
#include <optional>

#include "kgdyn/field.hpp"
#include "kgdyn/linearization.hpp"

namespace kg {

/*
 * Calibrated smallness constants. The paper proves existence only; these are
 * artifact values derived from the measured k (see the calibrate tool) and
 * satisfy deltaS = deltaX/(2 Cstar), 2 epsStar < Rstar < deltaX,
 * deltaStar < deltaS.
 */
struct Thresholds {
  double deltaE = 0.5;
  double deltaX = 0.35;
  double Cstar = 1.75;
  double deltaS = 0.1;  // deltaX / (2 Cstar)
  double deltaStar = 0.05;
  double Rstar = 0.2;
  double epsStar = 0.06;
  double T_confirm = 4.0;  // scatter sign-persistence window
  double T_trap = 0.0;     // 0 = derive as 10/k at use sites

  void validate() const;
};

struct Decomposition {
  double sgn = +1;                   // s in u = s(frakQ + v)(x - c)
  std::array<double, 3> c{0, 0, 0};  // center (0 in radial mode)
  double lam_plus = 0, lam_minus = 0;
  double lam1 = 0, lam2 = 0;
  Field gamma;        // dispersive remainder
  double gamma_norm = 0;
  double dQ = 0;
  bool energy_formula = false;  // dQ^2 = E - J(Q) + 2k lam1^2 was used
  bool converged = true;
};

/*
 * Radial mode: c = 0 and s = sign <u1|Q> (ties resolve to +1).
 * dQ^2 = E - J(Q) + 2 k lam1^2 when that value lies in [0, deltaE^2], else the
 * equivalent norm sqrt(k/2 (lam+^2 + lam-^2) + <Lcal gamma|gamma>/2).
 */
Decomposition decompose(const Field& u, const Linearization& lin,
                        const Thresholds& th = {});

struct SignOutcome {
  int sign = +1;
  bool admissible = true;     // E < J(Q) + min(dQ^2/2, epsStar^2)
  bool consistent = true;     // overlap region: both rules agree
  bool near_family = false;   // -sign(lam1) rule applied
  bool variational = false;   // sign(K0) rule applied
};

SignOutcome sign_functional(const Field& u, const Linearization& lin,
                            const Thresholds& th);

// lightweight row for trajectory monitors (no gamma field retained)
struct DecompSample {
  double sgn = 1, lam_plus = 0, lam_minus = 0, lam1 = 0, lam2 = 0;
  double gamma_norm = 0, dQ = 0;
  int sign = 0;  // 0 = not evaluable (inadmissible region)
};
DecompSample decompose_sample(const Field& u, const Linearization& lin,
                              const Thresholds& th);

// ---- box mode ----

struct PQFit {
  std::array<double, 3> p{0, 0, 0};
  std::array<double, 3> q{0, 0, 0};
  bool converged = false;
  double residual = 0;        // max |omega(v, dQ_alpha)|
  double condition = 0;       // 6x6 pairing-matrix condition estimate
};

class BoostContext;  // defined in boosts.hpp

// Newton solve of the six orthogonality conditions omega(v, d_q frakQ) =
// omega(v, d_p frakQ) = 0, starting from (P(u)/J(Q), energy centroid).
PQFit fit_pq(const Field& u, const BoostContext& bc, const Linearization& lin);

}  // namespace kg
