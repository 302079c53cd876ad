#include "kgdyn/evolution.hpp"

#include <cmath>

namespace kg {

const TrajectorySample& Trajectory::at_or_before(double t) const {
  if (samples.empty()) throw std::runtime_error("Trajectory: no samples");
  const TrajectorySample* best = &samples.front();
  for (const auto& s : samples) {
    if (s.t <= t + 1e-12) best = &s;
    else break;
  }
  return *best;
}

namespace {

// cached phase tables for the two half steps of one dt
struct RadialStepper {
  const RadialGrid& g;
  std::vector<double> cos_h, sin_h;
  explicit RadialStepper(const RadialGrid& grid, double dt) : g(grid) {
    cos_h.resize(g.n());
    sin_h.resize(g.n());
    for (int k = 0; k < g.n(); ++k) {
      cos_h[k] = std::cos(0.5 * dt * g.mult_D()[k]);
      sin_h[k] = std::sin(0.5 * dt * g.mult_D()[k]);
    }
  }
  void half_linear(std::vector<cplx>& u) const {
    const int n = g.n();
    std::vector<double> re(n), im(n), re2(n), im2(n);
    for (int m = 0; m < n; ++m) {
      re[m] = g.r(m) * u[m].real();
      im[m] = g.r(m) * u[m].imag();
    }
    g.dst(re.data(), re2.data());
    g.dst(im.data(), im2.data());
    for (int k = 0; k < n; ++k) {
      double a = re2[k], b = im2[k];
      re2[k] = a * cos_h[k] - b * sin_h[k];
      im2[k] = a * sin_h[k] + b * cos_h[k];
    }
    g.dst(re2.data(), re.data());
    g.dst(im2.data(), im.data());
    const double s = 2.0 / (g.n() + 1);
    for (int m = 0; m < n; ++m)
      u[m] = cplx(re[m], im[m]) * (s / g.r(m));
  }
  void kick(std::vector<cplx>& u, double dt) const {
    const int n = g.n();
    std::vector<double> re(n), a(n);
    for (int m = 0; m < n; ++m) re[m] = g.r(m) * u[m].real();
    g.dst(re.data(), a.data());
    for (int k = 0; k < n; ++k) a[k] *= g.mult_Dinv()[k];
    g.dst(a.data(), re.data());
    const double s = 2.0 / (g.n() + 1);
    for (int m = 0; m < n; ++m) {
      double u1 = s * re[m] / g.r(m);
      u[m] -= cplx(0.0, dt * u1 * u1 * u1);
    }
  }
};

struct BoxStepper {
  const BoxGrid& g;
  std::vector<cplx> phase_h;
  explicit BoxStepper(const BoxGrid& grid, double dt) : g(grid) {
    phase_h.resize(g.size());
    for (std::size_t i = 0; i < g.size(); ++i)
      phase_h[i] = cplx(std::cos(0.5 * dt * g.mult_D()[i]),
                        std::sin(0.5 * dt * g.mult_D()[i]));
  }
  void half_linear(std::vector<cplx>& u) const {
    std::vector<cplx> hat(g.size());
    g.fft(u.data(), hat.data(), -1);
    for (std::size_t i = 0; i < g.size(); ++i) hat[i] *= phase_h[i];
    g.fft(hat.data(), u.data(), +1);
  }
  void kick(std::vector<cplx>& u, double dt) const {
    const std::size_t N = g.size();
    std::vector<cplx> re(N), hat(N);
    for (std::size_t i = 0; i < N; ++i) re[i] = cplx(u[i].real(), 0.0);
    g.fft(re.data(), hat.data(), -1);
    for (std::size_t i = 0; i < N; ++i) hat[i] *= g.mult_Dinv()[i];
    g.fft(hat.data(), re.data(), +1);
    for (std::size_t i = 0; i < N; ++i) {
      double u1 = re[i].real();
      re[i] = cplx(u1 * u1 * u1, 0.0);
    }
    // 2/3-rule mask on the cubic term keeps the state band-limited
    g.fft(re.data(), hat.data(), -1);
    const auto& mask = g.dealias_mask();
    for (std::size_t i = 0; i < N; ++i) hat[i] *= double(mask[i]);
    g.fft(hat.data(), re.data(), +1);
    for (std::size_t i = 0; i < N; ++i) u[i] -= cplx(0.0, dt) * re[i].real();
  }
};

}  // namespace

void strang_step(Field& u, double dt) {
  if (u.is_radial()) {
    RadialStepper st(u.rgrid(), dt);
    st.half_linear(u.data());
    st.kick(u.data(), dt);
    st.half_linear(u.data());
  } else {
    BoxStepper st(u.bgrid(), dt);
    st.half_linear(u.data());
    st.kick(u.data(), dt);
    st.half_linear(u.data());
  }
}

Trajectory evolve(const Field& u0, const EvolveParams& prm) {
  if (!(prm.T > 0)) throw std::invalid_argument("evolve: T > 0 required");
  if (!(std::abs(prm.dt) > 0) || std::abs(prm.dt) > 0.01)
    throw std::invalid_argument("evolve: need 0 < |dt| <= 0.01");
  if (!u0.finite()) throw GridError("evolve: non-finite initial state");

  Trajectory traj;
  traj.dt = prm.dt;
  traj.initial_norm = l2norm(u0);
  const double cap = prm.blowup_factor * (1.0 + traj.initial_norm);
  const double dt = prm.dt;
  const long nsteps = std::lround(prm.T / std::abs(dt));
  const long sample_stride =
      std::max<long>(1, std::lround(prm.dt_sample / std::abs(dt)));
  const long snap_stride =
      prm.snapshot_every > 0
          ? std::max<long>(1, std::lround(prm.snapshot_every / std::abs(dt)))
          : 0;

  Field u = u0;
  if (u.is_box()) {  // keep the state band-limited from the start
    Field tmp = u;
    u.bgrid().dealias(tmp.data().data(), u.data().data());
  }

  auto record = [&](double t) {
    TrajectorySample s;
    s.t = t;
    s.F = evaluate(u);
    if (prm.monitors && prm.lin && u.is_radial()) {
      s.D = decompose_sample(u, *prm.lin, prm.thresholds);
      s.has_D = true;
    }
    traj.samples.push_back(std::move(s));
    if (prm.on_sample) prm.on_sample(t, u);
  };

  record(0.0);
  if (prm.snapshot_every > 0) {
    Field snap = u;
    snap.time = 0.0;
    traj.snapshots.push_back(std::move(snap));
  }

  // fused Strang stepping: half kicks merged between samples
  double t = 0.0;
  if (u.is_radial()) {
    RadialStepper half(u.rgrid(), dt);
    RadialStepper full(u.rgrid(), 2.0 * dt);  // phase for merged half+half
    bool open = false;                        // inside a merged linear stretch
    for (long i = 0; i < nsteps; ++i) {
      if (!open) half.half_linear(u.data());
      else full.half_linear(u.data());  // closes previous step and opens this one
      half.kick(u.data(), dt);
      bool boundary = ((i + 1) % sample_stride == 0) || i + 1 == nsteps;
      if (boundary) {
        half.half_linear(u.data());
        open = false;
      } else {
        open = true;
      }
      t = (i + 1) * dt;
      if (boundary) {
        if (!u.finite()) {
          traj.status = RunStatus::aborted;
          traj.t_end = t - dt;
          return traj;
        }
        double nn = l2norm(u);
        record(t);
        if (snap_stride && (i + 1) % snap_stride == 0) {
          Field snap = u;
          snap.time = t;
          traj.snapshots.push_back(std::move(snap));
        }
        if (nn > cap) {
          traj.status = RunStatus::blowup;
          traj.t_blowup = std::abs(t);
          traj.t_end = t;
          return traj;
        }
      }
    }
  } else {
    BoxStepper half(u.bgrid(), dt);
    BoxStepper full(u.bgrid(), 2.0 * dt);
    bool open = false;
    for (long i = 0; i < nsteps; ++i) {
      if (!open) half.half_linear(u.data());
      else full.half_linear(u.data());
      half.kick(u.data(), dt);
      bool boundary = ((i + 1) % sample_stride == 0) || i + 1 == nsteps;
      if (boundary) {
        half.half_linear(u.data());
        open = false;
      } else {
        open = true;
      }
      t = (i + 1) * dt;
      if (boundary) {
        if (!u.finite()) {
          traj.status = RunStatus::aborted;
          traj.t_end = t - dt;
          return traj;
        }
        double nn = l2norm(u);
        record(t);
        if (snap_stride && (i + 1) % snap_stride == 0) {
          Field snap = u;
          snap.time = t;
          traj.snapshots.push_back(std::move(snap));
        }
        if (nn > cap) {
          traj.status = RunStatus::blowup;
          traj.t_blowup = std::abs(t);
          traj.t_end = t;
          return traj;
        }
      }
    }
  }
  traj.status = RunStatus::completed;
  traj.t_end = t;
  return traj;
}

}  // namespace kg
