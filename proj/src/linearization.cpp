#include "kgdyn/linearization.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "kgdyn/rng.hpp"

namespace kg {

namespace {

// ---- psi-space helpers on a radial grid (flat measure 4 pi dr) ----

struct PsiOps {
  const RadialGrid& g;
  std::vector<double> V;  // -3Q^2 at nodes

  explicit PsiOps(const RadialGrid& grid, const Field& Q) : g(grid), V(grid.n()) {
    for (int m = 0; m < g.n(); ++m) {
      double q = Q[m].real();
      V[m] = -3.0 * q * q;
    }
  }

  // L_+ psi = IDST((1+xi^2) DST psi) + V psi
  void apply_Lplus(const std::vector<double>& in, std::vector<double>& out) const {
    const int n = g.n();
    std::vector<double> a(n);
    g.dst(in.data(), a.data());
    for (int k = 0; k < n; ++k) a[k] *= 1.0 + g.mult_xi2()[k];
    out.resize(n);
    g.dst(a.data(), out.data());
    const double inv = 2.0 / (n + 1);
    for (int m = 0; m < n; ++m) out[m] = inv * out[m] + V[m] * in[m];
  }

  // PCG for (L_+ + shift) x = b, sine-diagonal preconditioner
  int solve_shifted(const std::vector<double>& b, std::vector<double>& x,
                    double shift, double tol = 1e-13, int maxit = 800) const {
    const int n = g.n();
    x.assign(n, 0.0);
    std::vector<double> r = b, z(n), p(n), Ap(n), tmp(n);
    auto precond = [&](const std::vector<double>& v, std::vector<double>& out) {
      std::vector<double> a(n);
      g.dst(v.data(), a.data());
      for (int k = 0; k < n; ++k) a[k] /= (1.0 + g.mult_xi2()[k] + shift);
      out.resize(n);
      g.dst(a.data(), out.data());
      const double inv = 2.0 / (n + 1);
      for (auto& w : out) w *= inv;
    };
    double b0 = 0.0;
    for (double v : b) b0 += v * v;
    b0 = std::sqrt(b0);
    precond(r, z);
    p = z;
    double rz = 0.0;
    for (int i = 0; i < n; ++i) rz += r[i] * z[i];
    for (int it = 0; it < maxit; ++it) {
      apply_Lplus(p, Ap);
      for (int i = 0; i < n; ++i) Ap[i] += shift * p[i];
      double pAp = 0.0;
      for (int i = 0; i < n; ++i) pAp += p[i] * Ap[i];
      double al = rz / pAp;
      double rn = 0.0;
      for (int i = 0; i < n; ++i) {
        x[i] += al * p[i];
        r[i] -= al * Ap[i];
        rn += r[i] * r[i];
      }
      if (std::sqrt(rn) < tol * b0) return it + 1;
      precond(r, z);
      double rz2 = 0.0;
      for (int i = 0; i < n; ++i) rz2 += r[i] * z[i];
      double beta = rz2 / rz;
      for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
      rz = rz2;
    }
    return maxit;
  }
};

// dense node-space matrix of a sine multiplier (symmetric): M = c S diag(m) S
Eigen::MatrixXd dense_multiplier(const RadialGrid& g, const std::vector<double>& mult) {
  const int n = g.n();
  Eigen::MatrixXd M(n, n);
  std::vector<double> e(n, 0.0), a(n), col(n);
  const double inv = 2.0 / (n + 1);
  for (int j = 0; j < n; ++j) {
    e.assign(n, 0.0);
    e[j] = 1.0;
    g.dst(e.data(), a.data());
    for (int k = 0; k < n; ++k) a[k] *= mult[k];
    g.dst(a.data(), col.data());
    for (int i = 0; i < n; ++i) M(i, j) = inv * col[i];
  }
  return M;
}

std::vector<double> relaxed_Q_psi(const RadialGrid& g) {
  // shoot + petviashvili directly on this grid; returns phi-samples
  auto grid = std::make_shared<RadialGrid>(g.R(), g.n());
  GroundState gs = compute_ground_state(grid, 1e-9);
  std::vector<double> q(g.n());
  for (int m = 0; m < g.n(); ++m) q[m] = gs.Q[m].real();
  return q;
}

}  // namespace

// ------------------------------------------------------------ linearization

double Linearization::lambda_plus(const Field& v) const {
  return pair(v, gminus, PairForm::omega);
}
double Linearization::lambda_minus(const Field& v) const {
  return -pair(v, gplus, PairForm::omega);
}

Linearization compute_linearization(const GroundState& gs) {
  Linearization lin;
  lin.grid = gs.grid;
  lin.gs = gs;
  const auto& g = *gs.grid;
  const int n = g.n();

  PsiOps ops(g, gs.Q);
  // inverse iteration with fixed shift; L_+ + 20 is SPD here (lowest eig ~ -15.3)
  const double shift = 20.0;
  std::vector<double> v(n), Lv(n);
  for (int m = 0; m < n; ++m) v[m] = g.r(m) * std::exp(-g.r(m));
  double lam = 0.0, lam_prev = 1e9;
  for (int it = 0; it < 80; ++it) {
    std::vector<double> w;
    ops.solve_shifted(v, w, shift);
    double nrm = 0.0;
    for (double x : w) nrm += x * x;
    nrm = std::sqrt(nrm);
    for (int i = 0; i < n; ++i) v[i] = w[i] / nrm;
    ops.apply_Lplus(v, Lv);
    lam = 0.0;
    for (int i = 0; i < n; ++i) lam += v[i] * Lv[i];
    if (std::abs(lam - lam_prev) < 1e-13 * std::abs(lam)) break;
    lam_prev = lam;
  }
  if (!(lam < 0.0))
    throw std::runtime_error("compute_linearization: lowest L+ eigenvalue is not negative "
                             "(grid/Q inconsistency)");
  lin.k2 = -lam;
  lin.k = std::sqrt(lin.k2);

  // rho normalized in L^2(R^3): ||rho||^2 = 4 pi dr sum psi^2
  double nrm3d = 0.0;
  for (double x : v) nrm3d += x * x;
  nrm3d = std::sqrt(4.0 * M_PI * g.dr() * nrm3d);
  double sign = v[n / 8] >= 0 ? 1.0 : -1.0;
  lin.rho = Field(gs.grid);
  for (int m = 0; m < n; ++m) lin.rho[m] = cplx(sign * v[m] / (nrm3d * g.r(m)), 0.0);
  lin.Drho = apply_multiplier(lin.rho, Mult::D);

  const double cp = 1.0 / std::sqrt(2.0 * lin.k), cm = std::sqrt(lin.k / 2.0);
  lin.gplus = Field(gs.grid);
  lin.gminus = Field(gs.grid);
  for (int m = 0; m < n; ++m) {
    double dr_ = lin.Drho[m].real(), rr = lin.rho[m].real();
    lin.gplus[m] = cplx(cp * dr_, -cm * rr);
    lin.gminus[m] = cplx(cp * dr_, +cm * rr);
  }
  lin.Q_dot_rho = pair(gs.Q, lin.rho, PairForm::inner);

  // eigenrelation residuals (postcondition of the assembly)
  Field rp = apply_iDL(gs.Q, lin.gplus) - cplx(lin.k, 0) * lin.gplus;
  Field rm = apply_iDL(gs.Q, lin.gminus) + cplx(lin.k, 0) * lin.gminus;
  double res = std::max(l2norm(rp), l2norm(rm));
  if (res > 1e-5)
    throw std::runtime_error("compute_linearization: eigenmode residual " +
                             std::to_string(res));
  return lin;
}

Field apply_Lplus(const Field& Q, const Field& phi) {
  require_same_grid(Q, phi, "apply_Lplus");
  Field out = apply_multiplier(apply_multiplier(phi, Mult::D), Mult::D);
  for (std::size_t i = 0; i < out.size(); ++i) {
    double q = Q[i].real();
    out[i] -= 3.0 * q * q * phi[i];
  }
  return out;
}

Field apply_Lcal(const Field& Q, const Field& v) {
  require_same_grid(Q, v, "apply_Lcal");
  Field v1 = u1_of(v);
  Field w = v1;  // 3 Q^2 v1
  for (std::size_t i = 0; i < w.size(); ++i) {
    double q = Q[i].real();
    w[i] = 3.0 * q * q * v1[i].real();
  }
  Field out = v;
  out -= apply_multiplier(w, Mult::Dinv);
  return out;
}

Field apply_iDL(const Field& Q, const Field& v) {
  Field out = apply_multiplier(apply_Lcal(Q, v), Mult::D);
  out *= cplx(0.0, 1.0);
  return out;
}

double Lcal_quadratic(const Field& Q, const Field& v) {
  Field v1 = u1_of(v);
  Field Lp = apply_Lplus(Q, v1);
  double s = pair(Lp, v1, PairForm::inner);
  Field v2 = u2_of(v);
  return s + pair(v2, v2, PairForm::inner);
}

// ------------------------------------------------------------------ gap

GapReport verify_gap(const Linearization& lin, int n_dense) {
  GapReport rep;
  const double R = lin.grid->R();
  RadialGrid gd(R, n_dense);
  std::vector<double> q = relaxed_Q_psi(gd);

  std::vector<double> m1(n_dense);
  for (int k = 0; k < n_dense; ++k) m1[k] = 1.0 + gd.mult_xi2()[k];
  Eigen::MatrixXd H = dense_multiplier(gd, m1);
  for (int m = 0; m < n_dense; ++m) H(m, m) -= 3.0 * q[m] * q[m];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.compute(H, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  for (int i = 0; i < ev.size(); ++i) {
    if (ev[i] < 1.0 + rep.margin) rep.eigenvalues_below.push_back(ev[i]);
    if (ev[i] < 0.0) ++rep.negative_count;
    if (ev[i] > 0.0 && ev[i] <= 1.0) ++rep.count_in_0_1;
  }

  // resonance test by domain doubling: (L_+ - 1) phi = source, compare the
  // interior norm on R and 2R (growth would indicate a threshold resonance)
  auto interior_norm = [](double RR, int nn) {
    RadialGrid g2(RR, nn);
    std::vector<double> q2 = relaxed_Q_psi(g2);
    Eigen::MatrixXd A = dense_multiplier(g2, std::vector<double>(g2.mult_xi2().begin(),
                                                                 g2.mult_xi2().end()));
    for (int m = 0; m < nn; ++m) A(m, m) -= 3.0 * q2[m] * q2[m];
    Eigen::VectorXd src(nn);
    for (int m = 0; m < nn; ++m)
      src[m] = g2.r(m) * std::exp(-0.5 * g2.r(m) * g2.r(m));
    Eigen::VectorXd phi = A.partialPivLu().solve(src);
    double s = 0.0;
    for (int m = 0; m < nn; ++m)
      if (g2.r(m) < 10.0) s += phi[m] * phi[m];
    return std::sqrt(4.0 * M_PI * g2.dr() * s);
  };
  double nR = interior_norm(R, std::min(n_dense, 840));
  double n2R = interior_norm(2.0 * R, std::min(n_dense, 840));
  rep.resonance_ratio = n2R / nR;
  rep.resonance_free = rep.resonance_ratio < 2.0;

  // free-operator control: the sine discretization of -Lap + 1 is diagonal
  rep.free_lowest = 1.0 + std::pow(M_PI / R, 2);

  // coercivity on the orthogonal sector: min <L_+ g|g>/<D^2 g|g> over <g|rho>=0
  {
    const int nc = std::min(n_dense, 420);
    RadialGrid gc(R, nc);
    std::vector<double> qc = relaxed_Q_psi(gc);
    std::vector<double> mm(nc);
    for (int k = 0; k < nc; ++k) mm[k] = 1.0 + gc.mult_xi2()[k];
    Eigen::MatrixXd Hc = dense_multiplier(gc, mm);
    Eigen::MatrixXd D2 = Hc;
    for (int m = 0; m < nc; ++m) Hc(m, m) -= 3.0 * qc[m] * qc[m];
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> esc(Hc);
    Eigen::VectorXd rho = esc.eigenvectors().col(0).normalized();
    Eigen::MatrixXd P = Eigen::MatrixXd::Identity(nc, nc) - rho * rho.transpose();
    Eigen::MatrixXd A = P * Hc * P;
    Eigen::MatrixXd B = P * D2 * P + rho * rho.transpose();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ges(
        0.5 * (A + A.transpose()), 0.5 * (B + B.transpose()));
    double c0 = 1.0;
    for (int i = 0; i < ges.eigenvalues().size(); ++i) {
      double lamb = ges.eigenvalues()[i];
      if (std::abs(lamb) < 1e-9) continue;  // deflated rho direction
      c0 = std::min(c0, lamb);
      break;
    }
    rep.coercivity_c0 = c0;
  }

  rep.pass = rep.negative_count == 1 && rep.count_in_0_1 == 0 &&
             rep.resonance_free && rep.coercivity_c0 > 0.0;
  return rep;
}

// --------------------------------------------------------------- MatrixL

MatrixL::MatrixL(const Linearization& lin)
    : grid_(lin.grid), n_(lin.grid->n()), k_(lin.k), dr_(lin.grid->dr()) {
  Q2_.resize(n_);
  for (int m = 0; m < n_; ++m) {
    double q = lin.gs.Q[m].real();
    Q2_[m] = 1.5 * q * q;
  }
  // vector eigenfunctions in psi-representation
  gvp_.resize(2 * n_);
  gvm_.resize(2 * n_);
  const double c = 1.0 / std::sqrt(2.0 * k_);
  for (int m = 0; m < n_; ++m) {
    double r = grid_->r(m);
    double Drho = r * lin.Drho[m].real();
    double rho = r * lin.rho[m].real();
    gvp_[m] = c * cplx(Drho, k_ * rho);
    gvp_[n_ + m] = c * cplx(Drho, -k_ * rho);
    gvm_[m] = c * cplx(Drho, -k_ * rho);
    gvm_[n_ + m] = c * cplx(Drho, k_ * rho);
  }
}

void MatrixL::dinv_psi(const cplx* in, cplx* out) const {
  std::vector<double> re(n_), im(n_), a(n_);
  for (int m = 0; m < n_; ++m) {
    re[m] = in[m].real();
    im[m] = in[m].imag();
  }
  grid_->dst(re.data(), a.data());
  for (int k = 0; k < n_; ++k) a[k] *= grid_->mult_Dinv()[k];
  grid_->dst(a.data(), re.data());
  grid_->dst(im.data(), a.data());
  for (int k = 0; k < n_; ++k) a[k] *= grid_->mult_Dinv()[k];
  grid_->dst(a.data(), im.data());
  const double inv = 2.0 / (n_ + 1);
  for (int m = 0; m < n_; ++m) out[m] = inv * cplx(re[m], im[m]);
}

void MatrixL::d_psi(const cplx* in, cplx* out) const {
  std::vector<double> re(n_), im(n_), a(n_);
  for (int m = 0; m < n_; ++m) {
    re[m] = in[m].real();
    im[m] = in[m].imag();
  }
  grid_->dst(re.data(), a.data());
  for (int k = 0; k < n_; ++k) a[k] *= grid_->mult_D()[k];
  grid_->dst(a.data(), re.data());
  grid_->dst(im.data(), a.data());
  for (int k = 0; k < n_; ++k) a[k] *= grid_->mult_D()[k];
  grid_->dst(a.data(), im.data());
  const double inv = 2.0 / (n_ + 1);
  for (int m = 0; m < n_; ++m) out[m] = inv * cplx(re[m], im[m]);
}

void MatrixL::apply(const Vec& in, Vec& out) const {
  out.resize(2 * n_);
  std::vector<cplx> s(n_), ds(n_), d1(n_), d2(n_);
  for (int m = 0; m < n_; ++m) s[m] = in[m] + in[n_ + m];
  dinv_psi(s.data(), ds.data());
  d_psi(in.data(), d1.data());
  d_psi(in.data() + n_, d2.data());
  for (int m = 0; m < n_; ++m) {
    cplx pot = Q2_[m] * ds[m];
    out[m] = d1[m] - pot;
    out[n_ + m] = -d2[m] + pot;
  }
}

void MatrixL::apply_iL(const Vec& in, Vec& out) const {
  apply(in, out);
  for (auto& z : out) z *= cplx(0.0, 1.0);
}

cplx MatrixL::inner(const Vec& a, const Vec& b) const {
  cplx s = 0.0;
  for (int i = 0; i < 2 * n_; ++i) s += a[i] * std::conj(b[i]);
  return 0.5 * 4.0 * M_PI * dr_ * s;
}

cplx MatrixL::Omega(const Vec& a, const Vec& b) const {
  Vec t(2 * n_);
  dinv_psi(a.data(), t.data());
  dinv_psi(a.data() + n_, t.data() + n_);
  for (int m = 0; m < n_; ++m) t[n_ + m] = -t[n_ + m];  // sigma_3
  return inner(t, b) / cplx(0.0, 1.0);
}

void MatrixL::project_Pd(const Vec& in, Vec& out) const {
  cplx cp = Omega(in, gvm_);   // coefficient of gv_+
  cplx cm = -Omega(in, gvp_);  // coefficient of gv_-
  out.resize(2 * n_);
  for (int i = 0; i < 2 * n_; ++i) out[i] = cp * gvp_[i] + cm * gvm_[i];
}

void MatrixL::project_Pc(const Vec& in, Vec& out) const {
  project_Pd(in, out);
  for (int i = 0; i < 2 * n_; ++i) out[i] = in[i] - out[i];
}

MatrixL::Vec MatrixL::embed(const Field& u) const {
  Vec v(2 * n_);
  for (int m = 0; m < n_; ++m) {
    cplx z = grid_->r(m) * u[m];
    v[m] = z;
    v[n_ + m] = std::conj(z);
  }
  return v;
}

// ------------------------------------------------------------ resolvent

namespace {

struct DenseL {
  int n;
  double dr, k;
  Eigen::MatrixXcd L;    // 2n x 2n
  Eigen::MatrixXcd Pc;   // dense projection
  Eigen::VectorXd wdiag;  // <r>^-sigma tiled

  DenseL(const Linearization& lin_op, int n_probe, double sigma) {
    auto grid = std::make_shared<RadialGrid>(lin_op.grid->R(), n_probe);
    GroundState gs = compute_ground_state(grid, 1e-9);
    Linearization lin = compute_linearization(gs);
    MatrixL ml(lin);
    n = n_probe;
    dr = grid->dr();
    k = lin.k;
    Eigen::MatrixXd D = dense_multiplier(*grid, std::vector<double>(grid->mult_D().begin(),
                                                                    grid->mult_D().end()));
    Eigen::MatrixXd Dinv = dense_multiplier(
        *grid, std::vector<double>(grid->mult_Dinv().begin(), grid->mult_Dinv().end()));
    Eigen::MatrixXd QD(n, n);
    for (int i = 0; i < n; ++i) {
      double q = gs.Q[i].real();
      QD.row(i) = 1.5 * q * q * Dinv.row(i);
    }
    L.resize(2 * n, 2 * n);
    L.topLeftCorner(n, n) = (D - QD).cast<cplx>();
    L.topRightCorner(n, n) = (-QD).cast<cplx>();
    L.bottomLeftCorner(n, n) = QD.cast<cplx>();
    L.bottomRightCorner(n, n) = (QD - D).cast<cplx>();

    // rank-2 P_d via the Omega row functionals
    const auto& gp = ml.gvec_plus();
    const auto& gm = ml.gvec_minus();
    Eigen::VectorXcd vgp(2 * n), vgm(2 * n);
    for (int i = 0; i < 2 * n; ++i) {
      vgp[i] = gp[i];
      vgm[i] = gm[i];
    }
    auto omega_row = [&](const Eigen::VectorXcd& v) {
      // Omega(u, v) = (2 pi dr / i) * sum_j (sigma3 Dinv u)_j conj(v)_j
      //            = u^T row, row_j = (2 pi dr / i) (Dinv^T sigma3 conj(v))_j
      Eigen::VectorXcd s3cv(2 * n);
      for (int i = 0; i < n; ++i) {
        s3cv[i] = std::conj(v[i]);
        s3cv[n + i] = -std::conj(v[n + i]);
      }
      Eigen::VectorXcd row(2 * n);
      row.head(n) = Dinv.transpose().cast<cplx>() * s3cv.head(n);
      row.tail(n) = Dinv.transpose().cast<cplx>() * s3cv.tail(n);
      return Eigen::VectorXcd(row * (2.0 * M_PI * dr / cplx(0.0, 1.0)));
    };
    Eigen::VectorXcd rm = omega_row(vgm), rp = omega_row(vgp);
    Eigen::MatrixXcd Pd = vgp * rm.transpose() - vgm * rp.transpose();
    Pc = Eigen::MatrixXcd::Identity(2 * n, 2 * n) - Pd;

    wdiag.resize(2 * n);
    for (int i = 0; i < n; ++i) {
      double w = std::pow(1.0 + grid->r(i) * grid->r(i), -0.5 * sigma);
      wdiag[i] = w;
      wdiag[n + i] = w;
    }
  }
};

double dist_to_spectrum(cplx z, double k) {
  double re = z.real(), im = z.imag();
  double dcont = (std::abs(re) >= 1.0)
                     ? std::abs(im)
                     : std::min(std::hypot(re - 1.0, im), std::hypot(re + 1.0, im));
  double dpt = std::min({std::abs(z), std::abs(z - cplx(0, k)), std::abs(z + cplx(0, k))});
  return std::min(dcont, dpt);
}

}  // namespace

std::vector<ResolventSample> resolvent_probe(const Linearization& lin,
                                             const std::vector<cplx>& zs,
                                             bool project_pc, int n_probe,
                                             double sigma) {
  DenseL dl(lin, n_probe, sigma);
  const int N = 2 * dl.n;
  std::vector<ResolventSample> out;
  for (cplx z : zs) {
    ResolventSample s;
    s.z = z;
    s.projected = project_pc;
    s.dist_to_spectrum = dist_to_spectrum(z, dl.k);
    Eigen::MatrixXcd M = dl.L - z * Eigen::MatrixXcd::Identity(N, N);
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu(M);
    // power iteration on T^H T, T = W (L-z)^{-1} [P_c] W
    auto applyT = [&](const Eigen::VectorXcd& x) {
      Eigen::VectorXcd y = dl.wdiag.cast<cplx>().asDiagonal() * x;
      if (project_pc) y = dl.Pc * y;
      y = lu.solve(y);
      return Eigen::VectorXcd(dl.wdiag.cast<cplx>().asDiagonal() * y);
    };
    auto applyTH = [&](const Eigen::VectorXcd& x) {
      Eigen::VectorXcd y = dl.wdiag.cast<cplx>().asDiagonal() * x;
      y = lu.adjoint().solve(y);
      if (project_pc) y = dl.Pc.adjoint() * y;
      return Eigen::VectorXcd(dl.wdiag.cast<cplx>().asDiagonal() * y);
    };
    // power iteration for the largest singular value of T
    Rng rng(42);
    Eigen::VectorXcd x(N);
    for (int i = 0; i < N; ++i) x[i] = cplx(rng.symmetric(), rng.symmetric());
    x.normalize();
    for (int it = 0; it < 60 && s.solve_ok; ++it) {
      Eigen::VectorXcd y = applyT(x);
      double ny = y.norm();
      if (!(ny > 0) || !std::isfinite(ny)) s.solve_ok = false;
      if (!s.solve_ok) break;
      x = applyTH(y / ny);
      x.normalize();
    }
    if (s.solve_ok) s.weighted_norm = applyT(x).norm();
    out.push_back(s);
  }
  return out;
}

double weighted_evolution_norm(const Linearization& lin, double T, int n_probe,
                               bool project_pc, std::uint64_t seed) {
  auto grid = std::make_shared<RadialGrid>(lin.grid->R(), n_probe);
  GroundState gs = compute_ground_state(grid, 1e-9);
  Linearization l2 = compute_linearization(gs);
  const auto& g = *grid;
  const int n = g.n();

  Rng rng(seed);
  Field v(grid);
  for (int m = 0; m < n; ++m)
    v[m] = cplx(rng.symmetric(), rng.symmetric()) * std::exp(-0.1 * g.r(m));
  auto project = [&](Field& u) {
    double lp = l2.lambda_plus(u), lm = l2.lambda_minus(u);
    u -= cplx(lp, 0) * l2.gplus;
    u -= cplx(lm, 0) * l2.gminus;
  };
  if (project_pc) project(v);
  double phi_norm2 = pair(v, v, PairForm::inner);

  // RK4 on v_t = i D Lcal v; spectral radius ~ xi_max so dt = 0.3/xi_max
  const double ximax = g.xi(n - 1);
  const double dt = std::min(0.02, 0.3 / ximax);
  auto rhs = [&](const Field& u) { return apply_iDL(gs.Q, u); };
  double acc = 0.0;
  double t = 0.0;
  double next_proj = 1.0;
  std::vector<double> wgt(n);
  for (int m = 0; m < n; ++m) wgt[m] = 1.0 / (1.0 + g.r(m) * g.r(m));
  auto weighted2 = [&](const Field& u) {
    double s = 0.0;
    for (int m = 0; m < n; ++m) s += g.quad_weight()[m] * wgt[m] * std::norm(u[m]);
    return s;
  };
  while (t < T) {
    acc += dt * weighted2(v);  // left-endpoint rule is enough for a probe
    Field k1 = rhs(v);
    Field k2 = rhs(v + cplx(0.5 * dt, 0) * k1);
    Field k3 = rhs(v + cplx(0.5 * dt, 0) * k2);
    Field k4 = rhs(v + cplx(dt, 0) * k3);
    Field dv = k1;
    dv += cplx(2, 0) * k2;
    dv += cplx(2, 0) * k3;
    dv += k4;
    v += cplx(dt / 6.0, 0) * dv;
    t += dt;
    if (project_pc && t >= next_proj) {
      project(v);
      next_proj += 1.0;
    }
  }
  return acc / phi_norm2;
}

// --------------------------------------------------------------- kernels

namespace {
inline double bump(double x) {
  if (x <= 0.5 || x >= 2.0) return 0.0;
  return std::exp(-1.0 / ((x - 0.5) * (2.0 - x)));
}
}  // namespace

KernelSample kernel_value(int j, double t, double r, int nodes) {
  KernelSample s;
  s.j = j;
  s.t = t;
  s.r = r;
  const double lo = 0.5, hi = 2.0;
  const double m2 = std::pow(4.0, -j);
  const int N = nodes;  // intervals; N+1 points, endpoints vanish
  const double h = (hi - lo) / N;
  cplx full = 0.0, half = 0.0;
  for (int i = 1; i < N; ++i) {
    double rho = lo + i * h;
    double b = bump(rho);
    if (b == 0.0) continue;
    double ph = t * std::sqrt(rho * rho + m2);
    double amp = (r < 1e-8) ? rho * b : std::sin(r * rho) * b / r;
    cplx val = amp * cplx(std::cos(ph), std::sin(ph));
    full += val;
    if (i % 2 == 0) half += val;
  }
  full *= h;
  half *= 2.0 * h;
  s.value = full;
  s.quad_error = std::abs(full - half);
  s.converged = s.quad_error <= 1e-8;
  return s;
}

KernelFit kernel_probe(int j, const std::vector<double>& tgrid_in,
                       const std::vector<double>& rt_in) {
  KernelFit fit;
  fit.j = j;
  std::vector<double> tg = tgrid_in;
  if (tg.empty()) {
    // probe each j in its own asymptotic regime
    double t0 = 8.0 * std::pow(4.0, j), t1 = 64.0 * std::pow(4.0, j);
    for (int i = 0; i < 6; ++i) tg.push_back(t0 * std::pow(t1 / t0, i / 5.0));
  }
  std::vector<double> rts = rt_in;
  if (rts.empty()) {
    const double m2 = std::pow(4.0, -j);
    double vlo = std::max(0.0, 0.5 / std::sqrt(0.25 + m2) - 0.1);
    double vhi = 1.02;
    for (int i = 0; i < 120; ++i) rts.push_back(vlo + (vhi - vlo) * i / 119.0);
  }
  fit.C1 = 0.0;
  fit.C2 = 0.0;
  for (double t : tg) {
    // enough nodes for ~10 points per oscillation period
    int nodes = 1 << 15;
    while (nodes < 8.0 * t * (2.0 - 0.5) / (2.0 * M_PI) * 10.0 && nodes < (1 << 20))
      nodes <<= 1;
    for (double rt : rts) {
      double r = rt * t;
      KernelSample s = kernel_value(j, t, r, nodes);
      double absK = std::abs(s.value);
      fit.C1 = std::max(fit.C1, absK * std::pow(t, 1.5) / std::pow(2.0, j));
      double dtr = std::abs(t - r);
      double band = std::pow(4.0, -j) * t;
      if (dtr >= 0.5 * band && dtr <= 2.0 * band)
        fit.C2 = std::max(fit.C2, absK * t * std::sqrt(std::hypot(1.0, dtr)));
      fit.table.push_back(s);
    }
  }
  return fit;
}

// ----------------------------------------------------------- box root mode

BoxRootModeCheck box_root_mode_residual(const Field& Qbox) {
  if (!Qbox.is_box()) throw GridError("box_root_mode_residual: box field expected");
  const auto& g = Qbox.bgrid();
  BoxRootModeCheck out{};

  Field Q3 = Qbox;
  for (auto& z : Q3.data()) {
    double q = z.real();
    z = cplx(q * q * q, 0.0);
  }
  // consistent form: i D [ D grad Q - Dinv grad(Q^3) ] = i grad(D^2 Q - Q^3)
  Field rQ = apply_multiplier(apply_multiplier(Qbox, Mult::D), Mult::D);
  rQ -= Q3;
  Field grad_res = gradient_component(rQ, 0);
  out.residual_consistent = l2norm(grad_res);

  // pointwise-product form (spectral chain-rule defect, diagnostic only)
  Field w = gradient_component(apply_multiplier(Qbox, Mult::D), 0);
  Field res2 = apply_iDL(Qbox, w);
  out.residual_pointwise = l2norm(res2);
  return out;
}

}  // namespace kg
