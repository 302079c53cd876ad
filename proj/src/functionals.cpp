#include "kgdyn/functionals.hpp"

#include <cmath>

namespace kg {

namespace {

double quartic_integral(const Field& f) {
  double s = 0.0;
  if (f.is_radial()) {
    const auto& w = f.rgrid().quad_weight();
    for (std::size_t i = 0; i < f.size(); ++i) {
      double v = f[i].real();
      s += w[i] * v * v * v * v;
    }
  } else {
    for (std::size_t i = 0; i < f.size(); ++i) {
      double v = f[i].real();
      s += v * v * v * v;
    }
    s *= f.bgrid().dV();
  }
  return s;
}

// smooth cutoff: 1 on [0,1], 0 on [2,inf)
double chi(double x) {
  if (x <= 1.0) return 1.0;
  if (x >= 2.0) return 0.0;
  double t = x - 1.0;  // C^1 smoothstep is plenty for quadrature
  return 1.0 - t * t * (3.0 - 2.0 * t);
}

}  // namespace

double minimal_energy(double E, const std::array<double, 3>& P) {
  double p2 = P[0] * P[0] + P[1] * P[1] + P[2] * P[2];
  double d = E * E - p2;
  return (d >= 0 ? 1.0 : -1.0) * std::sqrt(std::abs(d));
}

double energy(const Field& u) {
  Field u1 = u1_of(u);
  return 0.5 * pair(u, u, PairForm::inner) - 0.25 * quartic_integral(u1);
}

Field radial_derivative(const Field& f) {
  const auto& g = f.rgrid();
  const int n = g.n();
  std::vector<double> psi(n), a(n), dp(n + 2);
  Field out = f;
  const double inv = 2.0 / (n + 1);
  for (int part = 0; part < 2; ++part) {
    for (int m = 0; m < n; ++m)
      psi[m] = g.r(m) * (part == 0 ? f[m].real() : f[m].imag());
    g.dst(psi.data(), a.data());
    for (auto& c : a) c *= inv;
    g.dpsi_from_coeff(a.data(), dp.data());
    // phi' = (psi' - phi)/r
    for (int m = 0; m < n; ++m) {
      double phi = part == 0 ? f[m].real() : f[m].imag();
      double d = (dp[m + 1] - phi) / g.r(m);
      out[m] = part == 0 ? cplx(d, out[m].imag()) : cplx(out[m].real(), d);
    }
  }
  return out;
}

FunctionalSet evaluate(const Field& u) {
  if (!u.finite()) throw GridError("evaluate: non-finite state");
  FunctionalSet F;
  Field u1 = u1_of(u);
  Field u2 = u2_of(u);
  Field lap = apply_multiplier(u1, Mult::Laplacian);
  double grad2 = -pair(lap, u1, PairForm::inner);
  double l2sq = pair(u1, u1, PairForm::inner);
  F.L4pow4 = quartic_integral(u1);
  F.state_norm = l2norm(u);
  F.E = 0.5 * F.state_norm * F.state_norm - 0.25 * F.L4pow4;
  F.K0 = grad2 + l2sq - F.L4pow4;
  F.K2 = grad2 - 0.75 * F.L4pow4;
  F.L2norm = std::sqrt(l2sq);
  F.H1norm = std::sqrt(grad2 + l2sq);
  F.G = -pair(u1, u2, PairForm::inner);
  if (u.is_box()) {
    for (int ax = 0; ax < 3; ++ax)
      F.P[ax] = pair(u2, gradient_component(u1, ax), PairForm::inner);
  }
  F.Em = minimal_energy(F.E, F.P);
  return F;
}

double virial_value(const Field& u, const VirialCutoff& cut, double t) {
  Field u1 = u1_of(u);
  Field u2 = u2_of(u);
  // A w = (x.grad + 3/2) w
  if (u.is_radial()) {
    const auto& g = u.rgrid();
    Field du = radial_derivative(u1);
    double s = 0.0;
    for (int m = 0; m < g.n(); ++m) {
      double c = 1.0;
      if (!cut.trivial()) {
        for (const auto& cone : cut.cones) {
          double cc = std::sqrt(cone.center[0] * cone.center[0] +
                                cone.center[1] * cone.center[1] +
                                cone.center[2] * cone.center[2]);
          double rad = cone.sign * (t - cone.T) + cut.S;
          c *= chi(std::abs(g.r(m) - cc) / std::max(rad, 1e-9));
        }
      }
      double Aw = g.r(m) * du[m].real() + 1.5 * u1[m].real();
      s += g.quad_weight()[m] * c * (-u2[m].real()) * Aw;  // w_t = -u2
    }
    return s;
  }
  const auto& g = u.bgrid();
  Field dx = gradient_component(u1, 0), dy = gradient_component(u1, 1),
        dz = gradient_component(u1, 2);
  double s = 0.0;
  std::size_t idx = 0;
  const int n = g.n();
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz, ++idx) {
        double X = g.x(ix), Y = g.x(iy), Z = g.x(iz);
        double c = 1.0;
        if (!cut.trivial()) {
          for (const auto& cone : cut.cones) {
            double dxc = X - cone.center[0], dyc = Y - cone.center[1],
                   dzc = Z - cone.center[2];
            double rad = cone.sign * (t - cone.T) + cut.S;
            c *= chi(std::sqrt(dxc * dxc + dyc * dyc + dzc * dzc) /
                     std::max(rad, 1e-9));
          }
        }
        double Aw = X * dx[idx].real() + Y * dy[idx].real() + Z * dz[idx].real() +
                    1.5 * u1[idx].real();
        s += c * (-u2[idx].real()) * Aw;
      }
  return s * g.dV();
}

double exterior_energy(const Field& u, const VirialCutoff& cut, double t) {
  if (cut.trivial()) return 0.0;
  Field u1 = u1_of(u);
  Field u2 = u2_of(u);
  // e(x) = (|u2|^2 + |grad u1|^2 + u1^2)/2 integrated over the exterior X(t)
  if (u.is_radial()) {
    const auto& g = u.rgrid();
    Field du = radial_derivative(u1);
    double s = 0.0;
    for (int m = 0; m < g.n(); ++m) {
      bool exterior = false;
      for (const auto& cone : cut.cones) {
        double cc = std::sqrt(cone.center[0] * cone.center[0] +
                              cone.center[1] * cone.center[1] +
                              cone.center[2] * cone.center[2]);
        double rad = cone.sign * (t - cone.T) + cut.S;
        if (std::abs(g.r(m) - cc) > rad) exterior = true;
      }
      if (!exterior) continue;
      double e = 0.5 * (u2[m].real() * u2[m].real() + du[m].real() * du[m].real() +
                        u1[m].real() * u1[m].real());
      s += g.quad_weight()[m] * e;
    }
    return s;
  }
  const auto& g = u.bgrid();
  Field dx = gradient_component(u1, 0), dy = gradient_component(u1, 1),
        dz = gradient_component(u1, 2);
  double s = 0.0;
  std::size_t idx = 0;
  const int n = g.n();
  for (int ix = 0; ix < n; ++ix)
    for (int iy = 0; iy < n; ++iy)
      for (int iz = 0; iz < n; ++iz, ++idx) {
        bool outside = false;
        for (const auto& cone : cut.cones) {
          double dxc = g.x(ix) - cone.center[0], dyc = g.x(iy) - cone.center[1],
                 dzc = g.x(iz) - cone.center[2];
          double rad = cone.sign * (t - cone.T) + cut.S;
          if (std::sqrt(dxc * dxc + dyc * dyc + dzc * dzc) > rad) outside = true;
        }
        if (!outside) continue;
        double gr2 = dx[idx].real() * dx[idx].real() + dy[idx].real() * dy[idx].real() +
                     dz[idx].real() * dz[idx].real();
        s += 0.5 * (u2[idx].real() * u2[idx].real() + gr2 +
                    u1[idx].real() * u1[idx].real());
      }
  return s * g.dV();
}

std::vector<VirialRateRow> virial_rate(const std::vector<double>& times,
                                       const std::vector<double>& V,
                                       const std::vector<double>& K2,
                                       const std::vector<double>& Eext,
                                       const std::vector<double>& state_norms,
                                       double blowup_threshold) {
  std::vector<VirialRateRow> out;
  const std::size_t N = times.size();
  if (N < 5) return out;
  const double h = times[1] - times[0];
  for (std::size_t i = 2; i + 2 < N; ++i) {
    VirialRateRow row;
    row.t = times[i];
    // 4th-order centered stencil
    row.dVdt = (-V[i + 2] + 8.0 * V[i + 1] - 8.0 * V[i - 1] + V[i - 2]) / (12.0 * h);
    row.negK2 = -K2[i];
    row.E_ext = Eext[i];
    row.excluded = state_norms[i] > blowup_threshold;
    out.push_back(row);
  }
  return out;
}

}  // namespace kg
