#pragma once

#include <array>
#include <optional>
#include <vector>

#include "kgdyn/field.hpp"

namespace kg {

/*
 * Conserved / variational quantities of a state u = D w - i w_t:
 *   E  = ||u||^2/2 - ||u1||_4^4/4
 *   P  = <u2 | grad u1>            (field-theory sign: P(frakQ(p,0)) = +J(Q) p)
 *   Em = sign(E^2-|P|^2) sqrt|E^2-|P|^2|
 *   K0 = int |grad u1|^2 + u1^2 - u1^4
 *   K2 = int |grad u1|^2 - (3/4) u1^4
 *   G  = <w | w_t> = -<u1|u2>, the blowup monitor; dG/dt = ||u2||^2 - K0(u1)
 */
struct FunctionalSet {
  double E = 0;
  std::array<double, 3> P{0, 0, 0};
  double Em = 0;
  double K0 = 0, K2 = 0;
  double L2norm = 0;   // ||u1||_2
  double H1norm = 0;   // (int |grad u1|^2 + u1^2)^(1/2)
  double L4pow4 = 0;   // int u1^4
  double G = 0;
  double state_norm = 0;  // ||u||_2
};

FunctionalSet evaluate(const Field& u);

double energy(const Field& u);  // E only (cheaper)

// minimal energy from scalars
double minimal_energy(double E, const std::array<double, 3>& P);

// radial derivative via the cosine series of psi' (spectral)
Field radial_derivative(const Field& f);

/*
 * Localized virial V_w(t) = <cut * w_t | (x.grad + 3/2) w>, so dV/dt = -K2 + O(E_ext)
 * when the cutoff is 1 on the support.  Cutoffs are the paper's double cones
 * anchored at (centers[i], T_i) with slope 1 and base width S.
 */
struct VirialCutoff {
  // cut(t, x) = prod_i chi(|x - c_i| / (s_i*(t - T_i) + S)), chi = 1 on [0,1], 0 past 2
  struct Cone {
    std::array<double, 3> center{0, 0, 0};
    double T = 0;
    double sign = 1;  // +1 expanding forward, -1 shrinking toward T
  };
  std::vector<Cone> cones;
  double S = 8.0;
  bool trivial() const { return cones.empty(); }
};

double virial_value(const Field& u, const VirialCutoff& cut, double t);
// exterior energy over the complement region X(t)
double exterior_energy(const Field& u, const VirialCutoff& cut, double t);

struct VirialRateRow {
  double t;
  double dVdt;    // 4th-order centered difference of V_w
  double negK2;   // -K2(u1)
  double E_ext;
  bool excluded;  // near-blowup samples
};

// series-level check: |dV/dt + K2| <= C*E_ext + slack
std::vector<VirialRateRow> virial_rate(const std::vector<double>& times,
                                       const std::vector<double>& V,
                                       const std::vector<double>& K2,
                                       const std::vector<double>& Eext,
                                       const std::vector<double>& state_norms,
                                       double blowup_threshold);

}  // namespace kg
