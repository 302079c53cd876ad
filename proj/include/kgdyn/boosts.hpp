#pragma once

#include <array>
#include <memory>
#include <optional>

#include "kgdyn/field.hpp"
#include "kgdyn/ground_state.hpp"

namespace kg {

/*
 * Lorentz data for a traveling ground state: relativistic momentum p, center q,
 * <p> = sqrt(1+|p|^2), velocity tau = p/<p>, rapidity sinh(nu) = |p|.
 */
struct BoostParams {
  std::array<double, 3> p{0, 0, 0};
  std::array<double, 3> q{0, 0, 0};

  double pnorm() const;
  double gamma() const;  // <p>
  double rapidity() const;
  std::array<double, 3> theta() const;  // p/|p| (unit; zero p gives e_x)
  std::array<double, 3> tau() const;    // p/<p>
};

// (E, P) hyperbolic rotation in the (E, P.theta) plane; components orthogonal
// to theta unchanged. Preserves E^2 - |P|^2.
void transform_EP(double& E, std::array<double, 3>& P, double nu,
                  const std::array<double, 3>& theta);

// Unique boost with P' = 0 when |E| > |P|; failure tag otherwise (the
// Payne-Sattinger trichotomy covers those states).
struct NormalizeResult {
  bool ok = false;
  BoostParams boost;      // rapidity/theta stored through p = sinh(nu) theta
  double E_rest = 0;      // energy in the zero-momentum frame
  std::string reason;     // set when !ok
};
NormalizeResult normalize_momentum(double E, const std::array<double, 3>& P);

/*
 * Shared machinery for box-mode traveling waves: the radial shooting profile,
 * anisotropic sampling of Q(p,q), and the discrete profile refinement
 *   (1 - Lap + (tau.grad)^2) Q = Q^3
 * (normalized fixed point; same scheme as the radial ground state). The
 * sampled continuum profile alone leaves an O(1) multiplier-amplified residual
 * at practical grids, so the refinement is on by default.
 */
class BoostContext {
 public:
  BoostContext(const GroundState& gs, std::shared_ptr<const BoxGrid> box);

  const BoxGrid& box() const { return *box_; }
  std::shared_ptr<const BoxGrid> box_ptr() const { return box_; }
  double JQ() const { return JQ_; }

  enum class Refine { none, nyquist, dealias };
  // scalar contracted profile Q(p,q) sampled on the box
  Field profile(const BoostParams& bp, Refine refine = Refine::nyquist) const;
  // complexified traveling state frakQ(p,q) = (D + i tau.grad) Q(p,q)
  Field traveling_wave(const BoostParams& bp, Refine refine = Refine::nyquist) const;
  // residual of i D frakQ + tau.grad frakQ - i frakQ1^3 in the box norm
  double profile_equation_residual(const Field& frakQ, const BoostParams& bp) const;

  // derivatives of frakQ wrt q_j and p_j at bp (spectral for q, central
  // differences for p), used by the six-parameter orthogonality fit
  Field d_dq(const Field& frakQ, int axis) const;
  Field d_dp(const BoostParams& bp, int axis, Refine refine = Refine::nyquist,
             double h = 1e-4) const;

  double radial_Q(double r) const { return prof_.eval(r); }

 private:
  std::shared_ptr<const BoxGrid> box_;
  ShootingProfile prof_;
  double JQ_;
  Field multiplier_symbol(const BoostParams& bp) const;  // 1+|k|^2-(tau.k)^2
};

// throws GridError if the profile tail exceeds 1e-6 at the box boundary
Field traveling_wave(const GroundState& gs, const BoostParams& bp,
                     std::shared_ptr<const BoxGrid> box,
                     BoostContext::Refine refine = BoostContext::Refine::nyquist);

}  // namespace kg
