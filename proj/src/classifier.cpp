#include "kgdyn/classifier.hpp"

#include <algorithm>
#include <cmath>

namespace kg {

char label_char(Label l) {
  switch (l) {
    case Label::Scatter: return 'S';
    case Label::Blowup: return 'B';
    case Label::Trapped: return 'T';
    default: return 'U';
  }
}

double ClassifyParams::T_trap() const {
  if (th.T_trap > 0) return th.T_trap;
  if (!lin) throw std::invalid_argument("ClassifyParams: lin required for T_trap");
  return 10.0 / lin->k;
}

ForwardReport classify_forward(const Trajectory& traj, const ClassifyParams& prm) {
  ForwardReport rep;
  rep.status = traj.status;
  rep.t_end = traj.samples.empty() ? 0.0 : traj.samples.back().t;
  if (traj.status == RunStatus::blowup) {
    rep.label = Label::Blowup;
    return rep;
  }
  if (traj.samples.empty() || !traj.samples.front().has_D)
    throw std::invalid_argument("classify_forward: trajectory lacks decomposition monitors");

  const auto& S = traj.samples;
  const double dX = prm.th.deltaX, dstar = prm.th.deltaStar;

  rep.dq_final = S.back().D.dQ;
  rep.trapped_duration = rep.t_end;
  for (const auto& s : S) {
    rep.dq_max = std::max(rep.dq_max, s.D.dQ);
    if (s.D.dQ > dstar) {
      rep.trapped_duration = std::min(rep.trapped_duration, s.t);
    }
    if (rep.t_eject < 0 && s.D.dQ >= dX) rep.t_eject = s.t;
  }

  // Scatter: ejection happened, sign +1 persisted for T_confirm, windowed L4 down
  if (rep.t_eject >= 0 && rep.t_end - rep.t_eject >= prm.th.T_confirm) {
    bool persisted = true;
    int sgn = 0;
    for (const auto& s : S) {
      if (s.t < rep.t_eject || s.t > rep.t_eject + prm.th.T_confirm) continue;
      if (s.D.sign == 0) continue;  // inadmissible pocket, skip
      if (sgn == 0) sgn = s.D.sign;
      if (s.D.sign != sgn) {
        persisted = false;
        break;
      }
    }
    rep.sign_after_eject = sgn;
    rep.sign_persisted = persisted && sgn != 0;
    if (rep.sign_persisted && sgn == +1) {
      // windowed L4 trend over unit windows after ejection
      double t0 = rep.t_eject, t1 = rep.t_end;
      auto window_l4 = [&](double a, double b) {
        double acc = 0;
        int cnt = 0;
        for (const auto& s : S)
          if (s.t >= a && s.t < b) {
            acc += s.F.L4pow4;
            ++cnt;
          }
        return cnt ? acc / cnt : 0.0;
      };
      rep.l4_first_window = window_l4(t0, t0 + 1.0);
      rep.l4_last_window = window_l4(t1 - 1.0, t1);
      if (rep.l4_last_window <= 0.8 * rep.l4_first_window) {
        rep.label = Label::Scatter;
        return rep;
      }
    }
  }

  // Trapped: dQ < deltaStar over the whole final window of length T_trap
  const double Ttrap = prm.T_trap();
  if (rep.t_end >= Ttrap) {
    bool quiet = true;
    for (const auto& s : S)
      if (s.t >= rep.t_end - Ttrap && s.D.dQ >= dstar) {
        quiet = false;
        break;
      }
    if (quiet) {
      rep.label = Label::Trapped;
      return rep;
    }
  }
  rep.label = Label::Undecided;
  return rep;
}

int NineLabel::case_index() const {
  auto idx = [](Label f, Label b) -> int {
    using L = Label;
    if (f == L::Scatter && b == L::Scatter) return 1;
    if (f == L::Blowup && b == L::Blowup) return 2;
    if (f == L::Scatter && b == L::Blowup) return 3;
    if (f == L::Blowup && b == L::Scatter) return 4;
    if (f == L::Trapped && b == L::Scatter) return 5;
    if (f == L::Scatter && b == L::Trapped) return 6;
    if (f == L::Trapped && b == L::Blowup) return 7;
    if (f == L::Blowup && b == L::Trapped) return 8;
    if (f == L::Trapped && b == L::Trapped) return 9;
    return 0;
  };
  return idx(forward, backward);
}

NineLabel classify_nine(const Field& u0, const ClassifyParams& prm) {
  if (!prm.lin) throw std::invalid_argument("classify_nine: linearization required");
  FunctionalSet F = evaluate(u0);
  if (!(F.Em < prm.lin->gs.JQ + prm.th.epsStar * prm.th.epsStar))
    throw std::domain_error("classify_nine: Em(u0) >= J(Q) + epsStar^2");

  EvolveParams ep;
  ep.T = prm.T;
  ep.dt = prm.dt;
  ep.dt_sample = prm.dt_sample;
  ep.snapshot_every = 0;
  ep.lin = prm.lin;
  ep.thresholds = prm.th;

  NineLabel out;
  Trajectory tf = evolve(u0, ep);
  out.fwd = classify_forward(tf, prm);
  out.forward = out.fwd.label;
  Trajectory tb = evolve(conjugate(u0), ep);
  out.bwd = classify_forward(tb, prm);
  out.backward = out.bwd.label;
  return out;
}

std::optional<EjectionFit> ejection_fit(const Trajectory& traj, const Thresholds& th) {
  const auto& S = traj.samples;
  if (S.empty() || !S.front().has_D) return std::nullopt;
  // first crossing of deltaX
  std::size_t hi = S.size();
  for (std::size_t i = 0; i < S.size(); ++i)
    if (S[i].D.dQ >= th.deltaX) {
      hi = i;
      break;
    }
  if (hi == S.size()) return std::nullopt;
  // walk back through the monotone rise to deltaX/10
  std::size_t lo = hi;
  while (lo > 0 && S[lo - 1].D.dQ < S[lo].D.dQ && S[lo - 1].D.dQ > 0) --lo;
  if (S[lo].D.dQ > th.deltaX / 10.0) return std::nullopt;  // no qualifying segment

  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = lo; i <= hi; ++i) {
    double dq = S[i].D.dQ;
    if (dq < th.deltaX / 10.0 || dq > th.deltaX) continue;
    double x = S[i].t, y = std::log(dq);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 5) return std::nullopt;
  EjectionFit fit;
  fit.rate = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.t_lo = S[lo].t;
  fit.t_hi = S[hi].t;
  fit.points = n;
  return fit;
}

OnePassReport one_pass_audit(const std::vector<double>& times,
                             const std::vector<double>& dq, double R) {
  OnePassReport rep;
  const double exit_level = R + R * R;
  bool below_seen = false;
  double tau1 = 0;
  bool exited = false;
  double tau2 = 0;
  for (std::size_t i = 0; i < dq.size(); ++i) {
    if (!below_seen) {
      if (dq[i] < R) {
        below_seen = true;
        tau1 = times[i];
      }
      continue;
    }
    if (!exited) {
      if (dq[i] > exit_level) {
        exited = true;
        tau2 = times[i];
        rep.pattern_found = true;
      }
      continue;
    }
    if (dq[i] <= R) {
      ++rep.violations;
      rep.events.push_back({tau1, tau2, times[i]});
      // continue scanning for further returns after re-exit
      below_seen = true;
      tau1 = times[i];
      exited = false;
    }
  }
  return rep;
}

OnePassReport one_pass_audit(const Trajectory& traj, double R) {
  std::vector<double> t, dq;
  for (const auto& s : traj.samples)
    if (s.has_D) {
      t.push_back(s.t);
      dq.push_back(s.D.dQ);
    }
  return one_pass_audit(t, dq, R);
}

ThresholdTrajectory bisect_manifold(const InitialDataFamily& family, double lo,
                                    double hi, const ClassifyParams& prm,
                                    double ptol) {
  ThresholdTrajectory out;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  if (!(lo < hi)) throw std::invalid_argument("bisect_manifold: need lo < hi");

  auto run = [&](double s, std::vector<std::array<double, 4>>* trace) {
    EvolveParams ep;
    ep.T = prm.T;
    ep.dt = prm.dt;
    ep.dt_sample = prm.dt_sample;
    ep.snapshot_every = 0;
    ep.lin = prm.lin;
    ep.thresholds = prm.th;
    if (trace) {
      const Linearization& L = *prm.lin;
      ep.on_sample = [&, trace](double t, const Field& u) {
        Field v = u;
        v -= L.gs.DQ;
        double lp = L.lambda_plus(v), lm = L.lambda_minus(v);
        // forcing omega(-i N(v1), g_-) = (2k)^{-1/2} <N(v1)|rho>
        Field v1 = u1_of(v);
        double acc = 0;
        const auto& g = *L.grid;
        for (int m = 0; m < g.n(); ++m) {
          double q = L.gs.Q[m].real(), w = v1[m].real();
          acc += g.quad_weight()[m] * (3.0 * q * w * w + w * w * w) * L.rho[m].real();
        }
        trace->push_back({t, lp, lm, acc / std::sqrt(2.0 * L.k)});
      };
    }
    return evolve(family(s), ep);
  };

  auto classify_s = [&](double s) {
    Trajectory tr = run(s, nullptr);
    return classify_forward(tr, prm);
  };

  ForwardReport flo = classify_s(lo), fhi = classify_s(hi);
  out.trapped_lo = flo.trapped_duration;
  out.trapped_hi = fhi.trapped_duration;
  bool lo_blow = flo.label == Label::Blowup, hi_blow = fhi.label == Label::Blowup;
  if (lo_blow == hi_blow || (flo.label != Label::Scatter && fhi.label != Label::Scatter)) {
    out.ok = false;
    out.message = "bracket invalid: endpoints are " +
                  std::string(1, label_char(flo.label)) + "/" +
                  std::string(1, label_char(fhi.label));
    throw std::invalid_argument("bisect_manifold: " + out.message);
  }

  double a = lo, b = hi;
  while (b - a > ptol * std::max({1.0, std::abs(a), std::abs(b)})) {
    double mid = 0.5 * (a + b);
    if (mid == a || mid == b) break;
    Trajectory tm = run(mid, nullptr);
    bool blow = tm.status == RunStatus::blowup;
    if (blow == lo_blow)
      a = mid;
    else
      b = mid;
  }
  out.param = 0.5 * (a + b);

  // midpoint diagnostics
  std::vector<std::array<double, 4>> trace;
  Trajectory tmid = run(out.param, &trace);
  ForwardReport fmid = classify_forward(tmid, prm);
  out.trapped_mid = fmid.trapped_duration;

  const double k = prm.lin->k;
  // lambda_- decay fit on the trapped stretch
  {
    double t0 = 0.3, t1 = std::max(0.6, out.trapped_mid - 0.3);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    double last_lm = 0;
    for (const auto& row : trace) {
      if (row[0] < t0 || row[0] > t1) continue;
      double lm = std::abs(row[2]);
      if (lm < 1e-12) continue;
      double x = row[0], y = std::log(lm);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
      ++n;
      last_lm = row[2];
    }
    if (n >= 5) out.lam_minus_rate = -(n * sxy - sx * sy) / (n * sxx - sx * sx);
    out.lam_minus_terminal_sign = last_lm > 0 ? +1 : (last_lm < 0 ? -1 : 0);
  }

  // stable-mode integral relation on the trapped stretch:
  // lam_+(t) = e^{k(t-T')} lam_+(T') - int_t^{T'} e^{k(t-s)} F(s) ds
  {
    double Tp = std::max(0.0, out.trapped_mid - 0.2);
    double dqmax = 0;
    for (const auto& s : tmid.samples)
      if (s.t <= Tp && s.has_D) dqmax = std::max(dqmax, s.D.dQ);
    out.dq_max_trapped = dqmax;
    // locate trace rows in [0, Tp]
    std::vector<std::array<double, 4>> rows;
    for (const auto& r : trace)
      if (r[0] <= Tp) rows.push_back(r);
    double worst = 0;
    if (rows.size() >= 10) {
      double lamTp = rows.back()[1];
      double TT = rows.back()[0];
      for (std::size_t i = 0; i + 1 < rows.size(); i += std::max<std::size_t>(1, rows.size() / 40)) {
        double t = rows[i][0];
        // trapezoid over [t, TT]
        double integral = 0;
        for (std::size_t j = i; j + 1 < rows.size(); ++j) {
          double s0 = rows[j][0], s1 = rows[j + 1][0];
          double f0 = std::exp(k * (t - s0)) * rows[j][3];
          double f1 = std::exp(k * (t - s1)) * rows[j + 1][3];
          integral += 0.5 * (s0 < s1 ? (s1 - s0) : 0) * (f0 + f1);
        }
        double pred = std::exp(k * (t - TT)) * lamTp - integral;
        worst = std::max(worst, std::abs(rows[i][1] - pred));
      }
    }
    out.stable_integral_residual = worst;
  }
  out.ok = true;
  return out;
}

}  // namespace kg
