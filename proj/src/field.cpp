#include "kgdyn/field.hpp"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <mutex>

namespace kg {

namespace {
// FFTW's planner is not thread safe; plans are created under this lock and
// then executed via the new-array interface on caller-owned buffers.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

// ---------------------------------------------------------------- RadialGrid

struct RadialGrid::Plans {
  fftw_plan dst = nullptr;   // RODFT00, size n
  fftw_plan dct = nullptr;   // REDFT00, size n+2 (cosine evaluation for psi')
  std::vector<double> buf_in, buf_out, cbuf_in, cbuf_out;
};

RadialGrid::RadialGrid(double R, int n) : R_(R), n_(n) {
  if (!(R > 0.0) || n < 64) throw GridError("RadialGrid: need R > 0 and n >= 64");
  dr_ = R_ / (n_ + 1);
  pi_over_R_ = M_PI / R_;
  r_.resize(n_);
  w_.resize(n_);
  mD_.resize(n_);
  mDinv_.resize(n_);
  mXi2_.resize(n_);
  for (int m = 0; m < n_; ++m) {
    r_[m] = (m + 1) * dr_;
    w_[m] = 4.0 * M_PI * r_[m] * r_[m] * dr_;
  }
  for (int k = 0; k < n_; ++k) {
    double x = xi(k);
    mXi2_[k] = x * x;
    mD_[k] = std::sqrt(1.0 + x * x);
    mDinv_[k] = 1.0 / mD_[k];
  }
  plans_ = std::make_unique<Plans>();
  plans_->buf_in.resize(n_);
  plans_->buf_out.resize(n_);
  plans_->cbuf_in.resize(n_ + 2);
  plans_->cbuf_out.resize(n_ + 2);
  std::lock_guard<std::mutex> lock(planner_mutex());
  // FFTW_ESTIMATE keeps planning deterministic (no runtime measurement).
  plans_->dst = fftw_plan_r2r_1d(n_, plans_->buf_in.data(), plans_->buf_out.data(),
                                 FFTW_RODFT00, FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans_->dct = fftw_plan_r2r_1d(n_ + 2, plans_->cbuf_in.data(), plans_->cbuf_out.data(),
                                 FFTW_REDFT00, FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plans_->dst || !plans_->dct) throw GridError("RadialGrid: fftw plan failed");
}

RadialGrid::~RadialGrid() {
  if (plans_) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plans_->dst) fftw_destroy_plan(plans_->dst);
    if (plans_->dct) fftw_destroy_plan(plans_->dct);
  }
}

void RadialGrid::dst(const double* in, double* out) const {
  // RODFT00 computes 2*sum; halve to get the natural sine sum.
  std::vector<double> tmp(n_);
  std::memcpy(tmp.data(), in, sizeof(double) * n_);
  fftw_execute_r2r(plans_->dst, tmp.data(), out);
  for (int i = 0; i < n_; ++i) out[i] *= 0.5;
}

void RadialGrid::dpsi_from_coeff(const double* coeff, double* out) const {
  // psi(r) = sum_k a_k sin(xi_k r)  =>  psi'(r_j) = sum_k a_k xi_k cos(pi jk/(n+1))
  std::vector<double> tmp(n_ + 2, 0.0);
  for (int k = 0; k < n_; ++k) tmp[k + 1] = 0.5 * coeff[k] * xi(k);
  fftw_execute_r2r(plans_->dct, tmp.data(), out);
}

void RadialGrid::multiply(const cplx* in, cplx* out, const double* mult) const {
  const double inv = 2.0 / (n_ + 1);
  std::vector<double> re(n_), im(n_), re2(n_), im2(n_);
  for (int m = 0; m < n_; ++m) {
    re[m] = r_[m] * in[m].real();
    im[m] = r_[m] * in[m].imag();
  }
  fftw_execute_r2r(plans_->dst, re.data(), re2.data());
  fftw_execute_r2r(plans_->dst, im.data(), im2.data());
  for (int k = 0; k < n_; ++k) {
    re2[k] *= mult[k];
    im2[k] *= mult[k];
  }
  fftw_execute_r2r(plans_->dst, re2.data(), re.data());
  fftw_execute_r2r(plans_->dst, im2.data(), im.data());
  // two unscaled RODFT00 passes pick up 2(n+1); halves fold into inv/4
  for (int m = 0; m < n_; ++m)
    out[m] = cplx(re[m], im[m]) * (0.25 * inv / r_[m]);
}

void RadialGrid::multiply_phase(const cplx* in, cplx* out, double t) const {
  const double inv = 2.0 / (n_ + 1);
  std::vector<double> re(n_), im(n_), re2(n_), im2(n_);
  for (int m = 0; m < n_; ++m) {
    re[m] = r_[m] * in[m].real();
    im[m] = r_[m] * in[m].imag();
  }
  fftw_execute_r2r(plans_->dst, re.data(), re2.data());
  fftw_execute_r2r(plans_->dst, im.data(), im2.data());
  for (int k = 0; k < n_; ++k) {
    double c = std::cos(t * mD_[k]), s = std::sin(t * mD_[k]);
    double a = re2[k], b = im2[k];
    re2[k] = a * c - b * s;
    im2[k] = a * s + b * c;
  }
  fftw_execute_r2r(plans_->dst, re2.data(), re.data());
  fftw_execute_r2r(plans_->dst, im2.data(), im.data());
  for (int m = 0; m < n_; ++m)
    out[m] = cplx(re[m], im[m]) * (0.25 * inv / r_[m]);
}

// ------------------------------------------------------------------- BoxGrid

struct BoxGrid::Plans {
  fftw_plan fwd = nullptr, bwd = nullptr;
  std::vector<cplx> buf_in, buf_out;
};

BoxGrid::BoxGrid(double L, int n) : L_(L), n_(n) {
  if (!(L > 0.0) || n < 8 || (n & (n - 1)) != 0)
    throw GridError("BoxGrid: need L > 0 and n a power of two");
  const std::size_t N = size();
  mD_.resize(N);
  mDinv_.resize(N);
  mK2_.resize(N);
  kx_.resize(N);
  ky_.resize(N);
  kz_.resize(N);
  mask_.resize(N);
  const double kcut = (2.0 / 3.0) * M_PI * n_ / L_;  // 2/3 of Nyquist
  std::size_t idx = 0;
  for (int ix = 0; ix < n_; ++ix)
    for (int iy = 0; iy < n_; ++iy)
      for (int iz = 0; iz < n_; ++iz, ++idx) {
        double fx = freq(ix), fy = freq(iy), fz = freq(iz);
        // Nyquist-zeroed frequencies for odd (first-derivative) symbols
        kx_[idx] = (ix == n_ / 2) ? 0.0 : fx;
        ky_[idx] = (iy == n_ / 2) ? 0.0 : fy;
        kz_[idx] = (iz == n_ / 2) ? 0.0 : fz;
        double k2 = fx * fx + fy * fy + fz * fz;
        mK2_[idx] = k2;
        mD_[idx] = std::sqrt(1.0 + k2);
        mDinv_[idx] = 1.0 / mD_[idx];
        mask_[idx] = (std::abs(fx) <= kcut && std::abs(fy) <= kcut &&
                      std::abs(fz) <= kcut)
                         ? 1.0f
                         : 0.0f;
      }
  plans_ = std::make_unique<Plans>();
  plans_->buf_in.resize(N);
  plans_->buf_out.resize(N);
  std::lock_guard<std::mutex> lock(planner_mutex());
  plans_->fwd = fftw_plan_dft_3d(
      n_, n_, n_, reinterpret_cast<fftw_complex*>(plans_->buf_in.data()),
      reinterpret_cast<fftw_complex*>(plans_->buf_out.data()), FFTW_FORWARD,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  plans_->bwd = fftw_plan_dft_3d(
      n_, n_, n_, reinterpret_cast<fftw_complex*>(plans_->buf_in.data()),
      reinterpret_cast<fftw_complex*>(plans_->buf_out.data()), FFTW_BACKWARD,
      FFTW_ESTIMATE | FFTW_UNALIGNED);
  if (!plans_->fwd || !plans_->bwd) throw GridError("BoxGrid: fftw plan failed");
}

BoxGrid::~BoxGrid() {
  if (plans_) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (plans_->fwd) fftw_destroy_plan(plans_->fwd);
    if (plans_->bwd) fftw_destroy_plan(plans_->bwd);
  }
}

double BoxGrid::freq(int i) const {
  int f = (i < n_ / 2) ? i : i - n_;
  return 2.0 * M_PI * f / L_;
}

void BoxGrid::fft(const cplx* in, cplx* out, int sign) const {
  std::vector<cplx> tmp(in, in + size());
  if (sign < 0) {
    fftw_execute_dft(plans_->fwd, reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(out));
  } else {
    fftw_execute_dft(plans_->bwd, reinterpret_cast<fftw_complex*>(tmp.data()),
                     reinterpret_cast<fftw_complex*>(out));
    const double s = 1.0 / double(size());
    for (std::size_t i = 0; i < size(); ++i) out[i] *= s;
  }
}

void BoxGrid::multiply(const cplx* in, cplx* out, const double* mult) const {
  const std::size_t N = size();
  std::vector<cplx> hat(N);
  fft(in, hat.data(), -1);
  for (std::size_t i = 0; i < N; ++i) hat[i] *= mult[i];
  fft(hat.data(), out, +1);
}

void BoxGrid::multiply_phase(const cplx* in, cplx* out, double t) const {
  const std::size_t N = size();
  std::vector<cplx> hat(N);
  fft(in, hat.data(), -1);
  for (std::size_t i = 0; i < N; ++i)
    hat[i] *= cplx(std::cos(t * mD_[i]), std::sin(t * mD_[i]));
  fft(hat.data(), out, +1);
}

void BoxGrid::dealias(const cplx* in, cplx* out) const {
  const std::size_t N = size();
  std::vector<cplx> hat(N);
  fft(in, hat.data(), -1);
  for (std::size_t i = 0; i < N; ++i) hat[i] *= double(mask_[i]);
  fft(hat.data(), out, +1);
}

// --------------------------------------------------------------------- Field

Field::Field(std::shared_ptr<const RadialGrid> g, cplx fill)
    : rg_(std::move(g)), v_(rg_->n(), fill) {}
Field::Field(std::shared_ptr<const BoxGrid> g, cplx fill)
    : bg_(std::move(g)), v_(bg_->size(), fill) {}

const RadialGrid& Field::rgrid() const {
  if (!rg_) throw GridError("Field: not a radial field");
  return *rg_;
}
const BoxGrid& Field::bgrid() const {
  if (!bg_) throw GridError("Field: not a box field");
  return *bg_;
}

bool Field::finite() const {
  for (const auto& z : v_)
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return false;
  return true;
}

Field& Field::operator+=(const Field& o) {
  require_same_grid(*this, o, "Field += ");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}
Field& Field::operator-=(const Field& o) {
  require_same_grid(*this, o, "Field -= ");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}
Field& Field::operator*=(cplx c) {
  for (auto& z : v_) z *= c;
  return *this;
}
Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(cplx c, Field a) { return a *= c; }

void require_same_grid(const Field& a, const Field& b, const char* where) {
  if (!a.same_grid(b)) throw GridError(std::string(where) + ": grid mismatch");
}

Field apply_multiplier(const Field& f, Mult m, double t) {
  if (!f.finite()) throw GridError("apply_multiplier: non-finite input");
  Field out = f;
  if (f.is_radial()) {
    const auto& g = f.rgrid();
    switch (m) {
      case Mult::D: g.multiply(f.data().data(), out.data().data(), g.mult_D().data()); break;
      case Mult::Dinv: g.multiply(f.data().data(), out.data().data(), g.mult_Dinv().data()); break;
      case Mult::Laplacian: {
        std::vector<double> neg(g.n());
        for (int k = 0; k < g.n(); ++k) neg[k] = -g.mult_xi2()[k];
        g.multiply(f.data().data(), out.data().data(), neg.data());
        break;
      }
      case Mult::ExpiDt:
        if (!std::isfinite(t)) throw GridError("apply_multiplier: non-finite t");
        g.multiply_phase(f.data().data(), out.data().data(), t);
        break;
    }
  } else {
    const auto& g = f.bgrid();
    switch (m) {
      case Mult::D: g.multiply(f.data().data(), out.data().data(), g.mult_D().data()); break;
      case Mult::Dinv: g.multiply(f.data().data(), out.data().data(), g.mult_Dinv().data()); break;
      case Mult::Laplacian: {
        std::vector<double> neg(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g.mult_k2()[i];
        g.multiply(f.data().data(), out.data().data(), neg.data());
        break;
      }
      case Mult::ExpiDt:
        if (!std::isfinite(t)) throw GridError("apply_multiplier: non-finite t");
        g.multiply_phase(f.data().data(), out.data().data(), t);
        break;
    }
  }
  return out;
}

double pair(const Field& f, const Field& g, PairForm form) {
  require_same_grid(f, g, "pair");
  if (form == PairForm::omega) {
    Field h = apply_multiplier(f, Mult::Dinv);
    h *= cplx(0.0, 1.0);
    return pair(h, g, PairForm::inner);
  }
  double s = 0.0;
  if (f.is_radial()) {
    const auto& w = f.rgrid().quad_weight();
    for (std::size_t i = 0; i < f.size(); ++i)
      s += w[i] * (f[i].real() * g[i].real() + f[i].imag() * g[i].imag());
  } else {
    const double dV = f.bgrid().dV();
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
      acc += f[i].real() * g[i].real() + f[i].imag() * g[i].imag();
    s = acc * dV;
  }
  return s;
}

Field u1_of(const Field& u) {
  Field re = u;
  for (auto& z : re.data()) z = cplx(z.real(), 0.0);
  return apply_multiplier(re, Mult::Dinv);
}

Field u2_of(const Field& u) {
  Field im = u;
  for (auto& z : im.data()) z = cplx(z.imag(), 0.0);
  return im;
}

double l2norm(const Field& f) { return std::sqrt(pair(f, f, PairForm::inner)); }

Field conjugate(const Field& u) {
  Field out = u;
  for (auto& z : out.data()) z = std::conj(z);
  return out;
}

Field gradient_component(const Field& f, int axis) {
  if (!f.is_box()) throw GridError("gradient_component: box fields only");
  const auto& g = f.bgrid();
  const std::vector<double>& kk =
      axis == 0 ? g.kx() : (axis == 1 ? g.ky() : g.kz());
  const std::size_t N = g.size();
  std::vector<cplx> hat(N);
  g.fft(f.data().data(), hat.data(), -1);
  for (std::size_t i = 0; i < N; ++i) hat[i] *= cplx(0.0, kk[i]);
  Field out = f;
  g.fft(hat.data(), out.data().data(), +1);
  return out;
}

}  // namespace kg
