#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace kg {

using cplx = std::complex<double>;

struct GridError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/*
 * Radial grid for 3D radial functions phi(r), carried through psi = r*phi
 * with Dirichlet ends psi(0) = psi(R) = 0.  Interior nodes r_m = (m+1)*dr,
 * m = 0..n-1, dr = R/(n+1).  The sine basis sin(xi_k r), xi_k = (k+1)*pi/R,
 * diagonalizes the 3D radial Laplacian acting through psi, so D = sqrt(1-Lap)
 * and friends are diagonal multipliers on the DST-I coefficients of psi.
 *
 * Transform normalization: coeff(psi)_k = sum_m psi_m sin(pi(m+1)(k+1)/(n+1)),
 * inverse = same kernel scaled by 2/(n+1).
 */
class RadialGrid {
 public:
  RadialGrid(double R, int n);
  ~RadialGrid();
  RadialGrid(const RadialGrid&) = delete;
  RadialGrid& operator=(const RadialGrid&) = delete;

  double R() const { return R_; }
  int n() const { return n_; }
  double dr() const { return dr_; }
  double r(int m) const { return (m + 1) * dr_; }
  double xi(int k) const { return (k + 1) * pi_over_R_; }
  const std::vector<double>& rnodes() const { return r_; }
  const std::vector<double>& quad_weight() const { return w_; }  // 4 pi r^2 dr

  // DST-I with the natural (unscaled) kernel; out may alias in.
  void dst(const double* in, double* out) const;
  // psi'(r) at nodes r_0..r_{n+1} (incl. both ends) from sine coefficients of psi.
  // out must have n+2 entries; out[0] = psi'(0) gives the r=0 extrapolation of phi.
  void dpsi_from_coeff(const double* coeff, double* out) const;

  // apply a real diagonal multiplier m_k to the complex phi-samples
  void multiply(const cplx* in, cplx* out, const double* mult) const;
  // apply the unitary phase multiplier exp(i*t*sqrt(1+xi^2))
  void multiply_phase(const cplx* in, cplx* out, double t) const;

  const std::vector<double>& mult_D() const { return mD_; }
  const std::vector<double>& mult_Dinv() const { return mDinv_; }
  const std::vector<double>& mult_xi2() const { return mXi2_; }  // symbol of -Lap

 private:
  double R_, dr_, pi_over_R_;
  int n_;
  std::vector<double> r_, w_, mD_, mDinv_, mXi2_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

/*
 * Periodic box [-L/2, L/2)^3, n nodes per axis (power of two), complex 3D FFT.
 * Node x_i = -L/2 + i*L/n; flattened index ((ix*n)+iy)*n+iz.
 * Dealiasing drops modes above 2/3 Nyquist per axis (used for the cubic term).
 */
class BoxGrid {
 public:
  BoxGrid(double L, int n);
  ~BoxGrid();
  BoxGrid(const BoxGrid&) = delete;
  BoxGrid& operator=(const BoxGrid&) = delete;

  double L() const { return L_; }
  int n() const { return n_; }
  std::size_t size() const { return std::size_t(n_) * n_ * n_; }
  double dx() const { return L_ / n_; }
  double dV() const { return dx() * dx() * dx(); }
  double x(int i) const { return -0.5 * L_ + i * dx(); }
  double freq(int i) const;  // 2 pi f / L, FFT ordering

  void fft(const cplx* in, cplx* out, int sign) const;  // sign=-1 fwd, +1 inv (scaled)

  void multiply(const cplx* in, cplx* out, const double* mult) const;
  void multiply_phase(const cplx* in, cplx* out, double t) const;
  // zero all modes above 2/3 Nyquist (per axis) in place, physical-space io
  void dealias(const cplx* in, cplx* out) const;

  const std::vector<double>& mult_D() const { return mD_; }
  const std::vector<double>& mult_Dinv() const { return mDinv_; }
  const std::vector<double>& mult_k2() const { return mK2_; }  // |xi|^2
  const std::vector<float>& dealias_mask() const { return mask_; }
  // i * (a . grad) symbol is built by callers from kx,ky,kz
  const std::vector<double>& kx() const { return kx_; }
  const std::vector<double>& ky() const { return ky_; }
  const std::vector<double>& kz() const { return kz_; }

 private:
  double L_;
  int n_;
  std::vector<double> mD_, mDinv_, mK2_, kx_, ky_, kz_;
  std::vector<float> mask_;
  struct Plans;
  std::unique_ptr<Plans> plans_;
};

enum class GridKind : std::uint32_t { radial = 0, box = 1 };

// Complex state u = D w - i w_t on one of the two grids. u1 := Dinv Re u and
// u2 := Im u are derived views, never stored.
class Field {
 public:
  Field() = default;
  Field(std::shared_ptr<const RadialGrid> g, cplx fill = {});
  Field(std::shared_ptr<const BoxGrid> g, cplx fill = {});

  bool is_radial() const { return rg_ != nullptr; }
  bool is_box() const { return bg_ != nullptr; }
  GridKind kind() const { return rg_ ? GridKind::radial : GridKind::box; }
  const RadialGrid& rgrid() const;
  const BoxGrid& bgrid() const;
  std::shared_ptr<const RadialGrid> rgrid_ptr() const { return rg_; }
  std::shared_ptr<const BoxGrid> bgrid_ptr() const { return bg_; }

  std::vector<cplx>& data() { return v_; }
  const std::vector<cplx>& data() const { return v_; }
  std::size_t size() const { return v_.size(); }
  cplx& operator[](std::size_t i) { return v_[i]; }
  const cplx& operator[](std::size_t i) const { return v_[i]; }

  bool same_grid(const Field& o) const { return rg_ == o.rg_ && bg_ == o.bg_; }
  bool finite() const;
  double time = 0.0;  // carried through snapshots

  Field& operator+=(const Field& o);
  Field& operator-=(const Field& o);
  Field& operator*=(cplx c);

 private:
  std::shared_ptr<const RadialGrid> rg_;
  std::shared_ptr<const BoxGrid> bg_;
  std::vector<cplx> v_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(cplx c, Field a);

enum class Mult { D, Dinv, ExpiDt, Laplacian };
enum class PairForm { inner, omega };

// Fourier-multiplier application in the grid's transform basis; ExpiDt takes t.
Field apply_multiplier(const Field& f, Mult m, double t = 0.0);

// inner = Re int f conj(g) with the grid quadrature (radial weight 4 pi r^2 dr);
// omega = <i Dinv f | g>, the symplectic pairing.
double pair(const Field& f, const Field& g, PairForm form);

// derived views
Field u1_of(const Field& u);  // Dinv Re u (real-valued samples)
Field u2_of(const Field& u);  // Im u (real-valued samples)

double l2norm(const Field& f);                 // sqrt(pair(f,f,inner))
Field conjugate(const Field& u);               // time reversal map, see evolution
Field gradient_component(const Field& f, int axis);  // box only: d_axis f

// checked helper shared by all pairings
void require_same_grid(const Field& a, const Field& b, const char* where);

}  // namespace kg
