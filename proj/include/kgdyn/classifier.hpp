#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgdyn/evolution.hpp"

namespace kg {

enum class Label { Scatter, Blowup, Trapped, Undecided };
char label_char(Label l);

struct ClassifyParams {
  double T = 12.0;
  double dt = 2e-3;
  double dt_sample = 0.01;
  const Linearization* lin = nullptr;
  Thresholds th;
  double T_trap() const;  // th.T_trap > 0 ? th.T_trap : 10/k
};

struct ForwardReport {
  Label label = Label::Undecided;
  double t_eject = -1;        // first sample with dQ >= deltaX (-1 = none)
  bool sign_persisted = false;
  int sign_after_eject = 0;
  double l4_first_window = 0, l4_last_window = 0;
  double dq_max = 0, dq_final = 0;
  double trapped_duration = 0;  // time before dQ first exceeds deltaStar
  double t_end = 0;
  RunStatus status = RunStatus::completed;
};

// Post-ejection rule: Blowup from the terminal status; Scatter from persistent
// sign +1 over T_confirm after ejection plus a decreasing windowed L4 norm;
// Trapped when dQ < deltaStar over the whole final window of length T_trap;
// Undecided otherwise (an explicit value, never an error).
ForwardReport classify_forward(const Trajectory& traj, const ClassifyParams& prm);

struct NineLabel {
  Label forward = Label::Undecided;
  Label backward = Label::Undecided;
  ForwardReport fwd, bwd;
  int case_index() const;  // 1..9 per the nine-set classification; 0 undecided
};

NineLabel classify_nine(const Field& u0, const ClassifyParams& prm);

struct EjectionFit {
  double rate = 0;       // least-squares slope of log dQ
  double t_lo = 0, t_hi = 0;
  int points = 0;
};

// Fit over a segment rising monotonically from deltaX/10 to deltaX.
std::optional<EjectionFit> ejection_fit(const Trajectory& traj, const Thresholds& th);

struct OnePassEvent {
  double tau1, tau2, t_return;
};
struct OnePassReport {
  int violations = 0;
  std::vector<OnePassEvent> events;
  bool pattern_found = false;  // some (tau1, tau2) exit pattern existed
};

// Series-level audit: dQ(tau1) < R < R + R^2 < dQ(tau2) and any later return
// dQ <= R is a violation of the one-pass property.
OnePassReport one_pass_audit(const std::vector<double>& times,
                             const std::vector<double>& dq, double R);
OnePassReport one_pass_audit(const Trajectory& traj, double R);

struct ThresholdTrajectory {
  double param = 0;             // bisected family parameter
  double bracket_lo = 0, bracket_hi = 0;
  double trapped_mid = 0, trapped_lo = 0, trapped_hi = 0;
  double lam_minus_rate = 0;    // fitted decay rate of |lambda_-| (compare e^{-kt})
  int lam_minus_terminal_sign = 0;
  double stable_integral_residual = 0;  // eq-la check, relative to dQ_max^2
  double dq_max_trapped = 0;
  bool ok = false;
  std::string message;
};

using InitialDataFamily = std::function<Field(double)>;

// Bisection between a Scatter and a Blowup endpoint to parameter tolerance
// ptol; the midpoint run is re-examined for the threshold diagnostics.
ThresholdTrajectory bisect_manifold(const InitialDataFamily& family, double lo,
                                    double hi, const ClassifyParams& prm,
                                    double ptol = 1e-12);

}  // namespace kg
