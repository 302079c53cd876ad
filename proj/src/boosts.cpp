#include "kgdyn/boosts.hpp"

#include <cmath>

namespace kg {

double BoostParams::pnorm() const {
  return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}
double BoostParams::gamma() const { return std::sqrt(1.0 + pnorm() * pnorm()); }
double BoostParams::rapidity() const { return std::asinh(pnorm()); }
std::array<double, 3> BoostParams::theta() const {
  double n = pnorm();
  if (n == 0.0) return {1, 0, 0};
  return {p[0] / n, p[1] / n, p[2] / n};
}
std::array<double, 3> BoostParams::tau() const {
  double g = gamma();
  return {p[0] / g, p[1] / g, p[2] / g};
}

void transform_EP(double& E, std::array<double, 3>& P, double nu,
                  const std::array<double, 3>& theta) {
  double ch = std::cosh(nu), sh = std::sinh(nu);
  double Pth = P[0] * theta[0] + P[1] * theta[1] + P[2] * theta[2];
  double Enew = E * ch + Pth * sh;
  double Pthnew = Pth * ch + E * sh;
  for (int i = 0; i < 3; ++i) P[i] += (Pthnew - Pth) * theta[i];
  E = Enew;
}

NormalizeResult normalize_momentum(double E, const std::array<double, 3>& P) {
  NormalizeResult out;
  double pn = std::sqrt(P[0] * P[0] + P[1] * P[1] + P[2] * P[2]);
  if (!(std::abs(E) > pn)) {
    out.ok = false;
    out.reason = std::abs(E) == pn
                     ? "|E| = |P|: degenerate light-like pair"
                     : "|E| < |P|: a boost makes the energy negative "
                       "(blowup in both time directions)";
    return out;
  }
  out.ok = true;
  if (pn == 0.0) {
    out.E_rest = E;
    return out;  // nu = 0
  }
  // tanh(nu) = -P.theta/E zeroes the momentum; store through p = sinh(nu) theta
  double nu = -std::atanh(pn / E);
  double s = std::sinh(nu);
  for (int i = 0; i < 3; ++i) out.boost.p[i] = s * P[i] / pn;
  double Ecur = E;
  std::array<double, 3> Pcur = P;
  transform_EP(Ecur, Pcur, nu, {P[0] / pn, P[1] / pn, P[2] / pn});
  out.E_rest = Ecur;
  return out;
}

// ------------------------------------------------------------ BoostContext

BoostContext::BoostContext(const GroundState& gs, std::shared_ptr<const BoxGrid> box)
    : box_(std::move(box)), JQ_(gs.JQ) {
  prof_ = shoot_ground_state();
}

Field BoostContext::multiplier_symbol(const BoostParams& bp) const {
  const auto& g = *box_;
  auto tau = bp.tau();
  Field m(box_);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double tk = tau[0] * g.kx()[i] + tau[1] * g.ky()[i] + tau[2] * g.kz()[i];
    m[i] = cplx(1.0 + g.mult_k2()[i] - tk * tk, 0.0);
  }
  return m;
}

Field BoostContext::profile(const BoostParams& bp, Refine refine) const {
  const auto& g = *box_;
  const int n = g.n();
  Field out(box_);
  double pn = bp.pnorm();
  double gamma = bp.gamma();
  auto th = bp.theta();
  // Lorentz-contracted argument: y = (x-q) + ((<p>-1)) th (th.(x-q))
  std::size_t idx = 0;
  double tail_max = 0.0;
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz, ++idx) {
        double X = g.x(ix) - bp.q[0], Y = g.x(iy) - bp.q[1], Z = g.x(iz) - bp.q[2];
        double par = X * th[0] + Y * th[1] + Z * th[2];
        double f = (pn > 0.0) ? (gamma - 1.0) * par : 0.0;
        double yx = X + f * th[0], yy = Y + f * th[1], yz = Z + f * th[2];
        double rr = std::sqrt(yx * yx + yy * yy + yz * yz);
        out[idx] = cplx(prof_.eval(rr), 0.0);
        bool boundary = ix == 0 || iy == 0 || iz == 0;
        if (boundary) tail_max = std::max(tail_max, std::abs(out[idx].real()));
      }
  if (tail_max > 1e-6)
    throw GridError("traveling_wave: profile tail " + std::to_string(tail_max) +
                    " at the box boundary; enlarge L");

  if (refine == Refine::none) return out;

  // refine to the discrete profile equation with the requested mask
  const std::vector<float>& mask = g.dealias_mask();
  Field M = multiplier_symbol(bp);
  std::vector<double> q(g.size()), Mq, tmp;
  for (std::size_t i = 0; i < g.size(); ++i) q[i] = out[i].real();

  auto mult_real = [&](const std::vector<double>& in, std::vector<double>& o,
                       bool inverse) {
    std::vector<cplx> hat(g.size());
    std::vector<cplx> cin(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) cin[i] = cplx(in[i], 0.0);
    g.fft(cin.data(), hat.data(), -1);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double m = M[i].real();
      hat[i] *= inverse ? 1.0 / m : m;
      if (refine == Refine::dealias) hat[i] *= double(mask[i]);
    }
    g.fft(hat.data(), cin.data(), +1);
    o.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) o[i] = cin[i].real();
  };
  auto dotv = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s * g.dV();
  };
  petviashvili(
      q, [&](const std::vector<double>& in, std::vector<double>& o) { mult_real(in, o, false); },
      [&](const std::vector<double>& in, std::vector<double>& o) { mult_real(in, o, true); },
      dotv, 160, 1e-11);
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = cplx(q[i], 0.0);
  // strip content beyond the mask so the cube used later stays consistent
  if (refine == Refine::dealias) {
    Field tmpf = out;
    g.dealias(tmpf.data().data(), out.data().data());
  }
  return out;
}

Field BoostContext::traveling_wave(const BoostParams& bp, Refine refine) const {
  Field Qp = profile(bp, refine);
  const auto& g = *box_;
  auto tau = bp.tau();
  Field DQ = apply_multiplier(Qp, Mult::D);
  // tau.grad Qp (real field, odd symbol)
  std::vector<cplx> hat(g.size());
  g.fft(Qp.data().data(), hat.data(), -1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double tk = tau[0] * g.kx()[i] + tau[1] * g.ky()[i] + tau[2] * g.kz()[i];
    hat[i] *= cplx(0.0, tk);
  }
  Field TG(box_);
  g.fft(hat.data(), TG.data().data(), +1);
  Field out(box_);
  for (std::size_t i = 0; i < g.size(); ++i)
    out[i] = cplx(DQ[i].real(), TG[i].real());
  return out;
}

double BoostContext::profile_equation_residual(const Field& frakQ,
                                               const BoostParams& bp) const {
  const auto& g = *box_;
  auto tau = bp.tau();
  Field iD = apply_multiplier(frakQ, Mult::D);
  iD *= cplx(0, 1);
  std::vector<cplx> hat(g.size());
  g.fft(frakQ.data().data(), hat.data(), -1);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double tk = tau[0] * g.kx()[i] + tau[1] * g.ky()[i] + tau[2] * g.kz()[i];
    hat[i] *= cplx(0.0, tk);
  }
  Field TG(box_);
  g.fft(hat.data(), TG.data().data(), +1);
  Field u1 = u1_of(frakQ);
  Field res = iD;
  res += TG;
  for (std::size_t i = 0; i < g.size(); ++i) {
    double q = u1[i].real();
    res[i] -= cplx(0.0, 1.0) * (q * q * q);
  }
  return l2norm(res);
}

Field BoostContext::d_dq(const Field& frakQ, int axis) const {
  Field d = gradient_component(frakQ, axis);
  d *= cplx(-1.0, 0.0);  // d_q frakQ = -grad frakQ
  return d;
}

Field BoostContext::d_dp(const BoostParams& bp, int axis, Refine refine,
                         double h) const {
  BoostParams a = bp, b = bp;
  a.p[axis] += h;
  b.p[axis] -= h;
  Field fa = traveling_wave(a, refine);
  Field fb = traveling_wave(b, refine);
  fa -= fb;
  fa *= cplx(1.0 / (2.0 * h), 0.0);
  return fa;
}

Field traveling_wave(const GroundState& gs, const BoostParams& bp,
                     std::shared_ptr<const BoxGrid> box,
                     BoostContext::Refine refine) {
  if (bp.pnorm() > 0.5)
    throw std::invalid_argument("traveling_wave: |p| <= 0.5 (small-boost regime)");
  BoostContext bc(gs, std::move(box));
  return bc.traveling_wave(bp, refine);
}

}  // namespace kg
