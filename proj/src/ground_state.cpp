#include "kgdyn/ground_state.hpp"

#include <algorithm>
#include <cmath>

namespace kg {

namespace {

struct OdeState {
  double q, p;  // Q, Q'
};

inline OdeState rhs(double r, OdeState y) {
  return {y.p, -2.0 / r * y.p - y.q * y.q * y.q + y.q};
}

inline OdeState rk4_step(double r, OdeState y, double h) {
  auto add = [](OdeState a, OdeState b, double s) {
    return OdeState{a.q + s * b.q, a.p + s * b.p};
  };
  OdeState k1 = rhs(r, y);
  OdeState k2 = rhs(r + 0.5 * h, add(y, k1, 0.5 * h));
  OdeState k3 = rhs(r + 0.5 * h, add(y, k2, 0.5 * h));
  OdeState k4 = rhs(r + h, add(y, k3, h));
  return {y.q + h / 6.0 * (k1.q + 2 * k2.q + 2 * k3.q + k4.q),
          y.p + h / 6.0 * (k1.p + 2 * k2.p + 2 * k3.p + k4.p)};
}

enum class Fate { crosses, turns, undecided };

// integrate from the series start; record samples if out != nullptr
Fate integrate(double b, double r_max, double h, std::vector<double>* rs,
               std::vector<double>* qs) {
  const double r0 = 1e-3;
  // series start: Q(r) = b + c r^2, c = (b - b^3)/6 from the ODE at r=0
  double c = (b - b * b * b) / 6.0;
  OdeState y{b + c * r0 * r0, 2.0 * c * r0};
  double r = r0;
  while (r < r_max) {
    y = rk4_step(r, y, h);
    r += h;
    if (rs) {
      rs->push_back(r);
      qs->push_back(y.q);
    }
    if (y.q <= 0.0) return Fate::crosses;
    if (y.p >= 0.0 && r > 0.5 && y.q < 1.0) return Fate::turns;
  }
  return Fate::undecided;
}

}  // namespace

double ShootingProfile::eval(double rr) const {
  if (rr <= r.front()) {
    // quadratic series through the origin
    double c = (Q0 - Q0 * Q0 * Q0) / 6.0;
    return Q0 + c * rr * rr;
  }
  if (rr >= r_cut) return tail_amp * std::exp(-rr) / rr;
  // local cubic (Catmull-Rom) on the uniform sample array
  double h = r[1] - r[0];
  auto idx = std::size_t((rr - r.front()) / h);
  idx = std::min(idx, r.size() - 2);
  double t = (rr - r[idx]) / h;
  double p0 = idx > 0 ? q[idx - 1] : Q0;
  double p1 = q[idx], p2 = q[idx + 1];
  double p3 = idx + 2 < q.size() ? q[idx + 2] : tail_amp * std::exp(-(r[idx + 1] + h)) / (r[idx + 1] + h);
  double a0 = -0.5 * p0 + 1.5 * p1 - 1.5 * p2 + 0.5 * p3;
  double a1 = p0 - 2.5 * p1 + 2.0 * p2 - 0.5 * p3;
  double a2 = -0.5 * p0 + 0.5 * p2;
  return ((a0 * t + a1) * t + a2) * t + p1;
}

ShootingProfile shoot_ground_state(double r_max, double dr_ode) {
  // b = 1 is the constant equilibrium, bracket strictly above it
  double lo = 1.5, hi = 10.0;
  if (integrate(lo, r_max, dr_ode, nullptr, nullptr) != Fate::turns ||
      integrate(hi, r_max, dr_ode, nullptr, nullptr) != Fate::crosses)
    throw ShootingError("shoot_ground_state: initial bracket [1.5,10] invalid");
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;  // bracket at machine width
    Fate f = integrate(mid, r_max, dr_ode, nullptr, nullptr);
    if (f == Fate::crosses)
      hi = mid;
    else
      lo = mid;
  }
  ShootingProfile out;
  out.Q0 = 0.5 * (lo + hi);
  out.r_cut = std::min(28.0, 0.7 * r_max);
  integrate(out.Q0, out.r_cut, dr_ode, &out.r, &out.q);
  out.tail_amp = out.q.back() * out.r.back() * std::exp(out.r.back());
  return out;
}

double petviashvili(
    std::vector<double>& q,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply_M,
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply_Minv,
    const std::function<double(const std::vector<double>&, const std::vector<double>&)>& dot,
    int iters, double tol) {
  std::vector<double> Mq(q.size()), q3(q.size()), tmp(q.size());
  double res = 0.0;
  for (int it = 0; it < iters; ++it) {
    apply_M(q, Mq);
    for (std::size_t i = 0; i < q.size(); ++i) q3[i] = q[i] * q[i] * q[i];
    double num = dot(Mq, q);
    double den = dot(q3, q);
    double S = num / den;
    apply_Minv(q3, tmp);
    double Spow = S * std::sqrt(S);  // exponent 3/2
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = Spow * tmp[i];
    // residual of M q = q^3 every few sweeps
    if (it % 4 == 3 || it == iters - 1) {
      apply_M(q, Mq);
      for (std::size_t i = 0; i < q.size(); ++i) tmp[i] = Mq[i] - q[i] * q[i] * q[i];
      res = std::sqrt(std::max(dot(tmp, tmp), 0.0));
      if (res <= tol) break;
    }
  }
  return res;
}

GroundState compute_ground_state(std::shared_ptr<const RadialGrid> grid, double tol) {
  if (!(tol > 1e-14 && tol < 1e-4))
    throw std::invalid_argument("compute_ground_state: tol out of (1e-14, 1e-4)");
  const auto& g = *grid;
  ShootingProfile prof = shoot_ground_state(std::min(48.0, g.R() * 0.8));

  std::vector<double> q(g.n());
  for (int m = 0; m < g.n(); ++m) q[m] = prof.eval(g.r(m));

  auto apply_mult_real = [&](const std::vector<double>& in, std::vector<double>& out,
                             bool inverse) {
    std::vector<double> psi(g.n());
    for (int m = 0; m < g.n(); ++m) psi[m] = g.r(m) * in[m];
    std::vector<double> a(g.n());
    g.dst(psi.data(), a.data());
    for (int k = 0; k < g.n(); ++k) {
      double s = 1.0 + g.mult_xi2()[k];
      a[k] *= inverse ? 1.0 / s : s;
    }
    g.dst(a.data(), psi.data());
    const double inv = 2.0 / (g.n() + 1);
    out.resize(g.n());
    for (int m = 0; m < g.n(); ++m) out[m] = inv * psi[m] / g.r(m);
  };
  auto dotw = [&](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (int m = 0; m < g.n(); ++m) s += g.quad_weight()[m] * a[m] * b[m];
    return s;
  };

  double res = petviashvili(
      q, [&](const std::vector<double>& in, std::vector<double>& out) { apply_mult_real(in, out, false); },
      [&](const std::vector<double>& in, std::vector<double>& out) { apply_mult_real(in, out, true); },
      dotw, 200, tol * 0.1);
  if (res > tol)
    throw ShootingError("compute_ground_state: relaxation stalled at residual " +
                        std::to_string(res));

  GroundState gs;
  gs.grid = grid;
  gs.Q = Field(grid);
  for (int m = 0; m < g.n(); ++m) gs.Q[m] = cplx(q[m], 0.0);
  if (!gs.Q.finite()) throw ShootingError("compute_ground_state: non-finite profile");
  for (int m = 0; m + 1 < g.n(); ++m) {
    if (!(q[m] > 0.0) && g.r(m) < 0.8 * g.R())
      throw ShootingError("compute_ground_state: profile not positive");
  }
  gs.DQ = apply_multiplier(gs.Q, Mult::D);
  gs.residual = res;

  // Q(0) by psi'(0) extrapolation (phi(0) = psi'(0) since psi = r phi)
  {
    std::vector<double> psi(g.n()), a(g.n()), dp(g.n() + 2);
    for (int m = 0; m < g.n(); ++m) psi[m] = g.r(m) * q[m];
    g.dst(psi.data(), a.data());
    const double inv = 2.0 / (g.n() + 1);
    for (auto& c : a) c *= inv;
    g.dpsi_from_coeff(a.data(), dp.data());
    gs.Q0 = dp[0];
  }

  Field lap = apply_multiplier(gs.Q, Mult::Laplacian);
  gs.a = -pair(lap, gs.Q, PairForm::inner);
  gs.b = pair(gs.Q, gs.Q, PairForm::inner);
  double c4 = 0.0;
  for (int m = 0; m < g.n(); ++m) {
    double v = gs.Q[m].real();
    c4 += g.quad_weight()[m] * v * v * v * v;
  }
  gs.c4 = c4;
  gs.JQ = 0.5 * (gs.a + gs.b) - 0.25 * gs.c4;
  return gs;
}

}  // namespace kg
