#include "kgdyn/decomposition.hpp"

#include <Eigen/Dense>

#include <cmath>

#include "kgdyn/boosts.hpp"
#include "kgdyn/functionals.hpp"

namespace kg {

void Thresholds::validate() const {
  auto fail = [](const char* m) { throw std::invalid_argument(std::string("Thresholds: ") + m); };
  if (!(deltaE > 0 && deltaX > 0 && deltaS > 0 && deltaStar > 0 && Rstar > 0 &&
        epsStar > 0 && Cstar >= 1))
    fail("all constants must be positive, Cstar >= 1");
  if (std::abs(deltaS - deltaX / (2 * Cstar)) > 1e-12) fail("deltaS != deltaX/(2 Cstar)");
  if (!(2 * epsStar < Rstar && Rstar < deltaX)) fail("need 2 epsStar < Rstar < deltaX");
  if (!(deltaStar < deltaS)) fail("need deltaStar < deltaS");
}

Decomposition decompose(const Field& u, const Linearization& lin, const Thresholds& th) {
  if (!u.finite()) throw GridError("decompose: non-finite state");
  if (!u.is_radial())
    throw GridError("decompose: radial states only (box mode uses fit_pq)");
  Decomposition d;
  Field u1 = u1_of(u);
  double s = pair(u1, lin.gs.Q, PairForm::inner);
  d.sgn = (s >= 0.0) ? +1.0 : -1.0;  // ties resolve to +1

  Field v = u;
  v *= cplx(d.sgn, 0);
  v -= lin.gs.DQ;
  d.lam_plus = lin.lambda_plus(v);
  d.lam_minus = lin.lambda_minus(v);
  d.lam1 = 0.5 * (d.lam_plus + d.lam_minus);
  d.lam2 = 0.5 * (d.lam_plus - d.lam_minus);
  d.gamma = v;
  d.gamma -= cplx(d.lam_plus, 0) * lin.gplus;
  d.gamma -= cplx(d.lam_minus, 0) * lin.gminus;
  d.gamma_norm = l2norm(d.gamma);

  double E = energy(u);
  double q = E - lin.gs.JQ + 2.0 * lin.k * d.lam1 * d.lam1;
  if (q >= 0.0 && q <= th.deltaE * th.deltaE) {
    d.dQ = std::sqrt(q);
    d.energy_formula = true;
  } else {
    double n2 = 0.5 * lin.k * (d.lam_plus * d.lam_plus + d.lam_minus * d.lam_minus) +
                0.5 * Lcal_quadratic(lin.gs.Q, d.gamma);
    d.dQ = std::sqrt(std::max(n2, 0.0));
    d.energy_formula = false;
  }
  return d;
}

SignOutcome sign_functional(const Field& u, const Linearization& lin,
                            const Thresholds& th) {
  SignOutcome out;
  Decomposition d = decompose(u, lin, th);
  double E = energy(u);
  double gate = std::min(0.5 * d.dQ * d.dQ, th.epsStar * th.epsStar);
  out.admissible = E < lin.gs.JQ + gate;
  if (!out.admissible)
    throw std::domain_error("sign_functional: state outside the admissible region");

  int near = 0, far = 0;
  if (d.dQ <= th.deltaE) {
    near = d.lam1 > 0.0 ? -1 : +1;  // -sign(lam1), sign 0 = +1
    out.near_family = true;
  }
  if (d.dQ >= th.deltaS) {
    FunctionalSet F = evaluate(u);
    far = F.K0 >= 0.0 ? +1 : -1;
    out.variational = true;
  }
  if (out.near_family && out.variational) {
    out.consistent = near == far;
    out.sign = far;  // overlap: both agree when consistent
  } else if (out.near_family) {
    out.sign = near;
  } else {
    out.sign = far;
  }
  return out;
}

DecompSample decompose_sample(const Field& u, const Linearization& lin,
                              const Thresholds& th) {
  DecompSample s;
  Decomposition d = decompose(u, lin, th);
  s.sgn = d.sgn;
  s.lam_plus = d.lam_plus;
  s.lam_minus = d.lam_minus;
  s.lam1 = d.lam1;
  s.lam2 = d.lam2;
  s.gamma_norm = d.gamma_norm;
  s.dQ = d.dQ;
  double E = energy(u);
  double gate = std::min(0.5 * d.dQ * d.dQ, th.epsStar * th.epsStar);
  if (E < lin.gs.JQ + gate) {
    if (d.dQ >= th.deltaS) {
      FunctionalSet F = evaluate(u);
      s.sign = F.K0 >= 0.0 ? +1 : -1;
    } else {
      s.sign = d.lam1 > 0.0 ? -1 : +1;
    }
  } else {
    s.sign = 0;
  }
  return s;
}

PQFit fit_pq(const Field& u, const BoostContext& bc, const Linearization& lin) {
  if (!u.is_box()) throw GridError("fit_pq: box states only");
  PQFit fit;
  const auto& g = u.bgrid();
  const double JQ = bc.JQ();

  // initial guess: p ~ P(u)/J(Q), q = energy centroid of u1^2
  FunctionalSet F = evaluate(u);
  BoostParams bp;
  for (int i = 0; i < 3; ++i) bp.p[i] = F.P[i] / JQ;
  {
    Field u1 = u1_of(u);
    double m = 0, cx = 0, cy = 0, cz = 0;
    std::size_t idx = 0;
    for (int ix = 0; ix < g.n(); ++ix)
      for (int iy = 0; iy < g.n(); ++iy)
        for (int iz = 0; iz < g.n(); ++iz, ++idx) {
          double w = u1[idx].real() * u1[idx].real();
          m += w;
          cx += w * g.x(ix);
          cy += w * g.x(iy);
          cz += w * g.x(iz);
        }
    bp.q = {cx / m, cy / m, cz / m};
  }

  auto residual = [&](const BoostParams& b, Eigen::VectorXd& r, Field* vout) {
    Field frakQ = bc.traveling_wave(b);
    Field v = u;
    v -= frakQ;
    r.resize(6);
    for (int j = 0; j < 3; ++j) {
      r[j] = pair(v, bc.d_dq(frakQ, j), PairForm::omega);
      r[3 + j] = pair(v, bc.d_dp(b, j), PairForm::omega);
    }
    if (vout) *vout = v;
    return frakQ;
  };

  Eigen::VectorXd r(6);
  for (int it = 0; it < 12; ++it) {
    Field frakQ = residual(bp, r, nullptr);
    fit.residual = r.cwiseAbs().maxCoeff();
    if (fit.residual <= 1e-8) {
      fit.converged = true;
      break;
    }
    // Jacobian by forward differences in (q, p)
    Eigen::MatrixXd J(6, 6);
    const double h = 1e-5;
    for (int c = 0; c < 6; ++c) {
      BoostParams b2 = bp;
      if (c < 3)
        b2.q[c] += h;
      else
        b2.p[c - 3] += h;
      Eigen::VectorXd r2(6);
      residual(b2, r2, nullptr);
      J.col(c) = (r2 - r) / h;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(J, Eigen::ComputeFullU | Eigen::ComputeFullV);
    fit.condition = svd.singularValues()(0) / svd.singularValues()(5);
    if (svd.singularValues()(5) < 1e-12 * svd.singularValues()(0)) {
      fit.converged = false;
      break;  // singular pairing matrix
    }
    Eigen::VectorXd step = svd.solve(r);
    for (int j = 0; j < 3; ++j) {
      bp.q[j] -= step[j];
      bp.p[j] -= step[3 + j];
    }
    if (!(bp.pnorm() < 0.45)) {
      fit.converged = false;
      break;  // diverged out of the small-boost regime
    }
  }
  fit.p = bp.p;
  fit.q = bp.q;
  return fit;
}

}  // namespace kg
