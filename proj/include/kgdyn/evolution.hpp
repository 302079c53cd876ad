#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kgdyn/decomposition.hpp"
#include "kgdyn/field.hpp"
#include "kgdyn/functionals.hpp"
#include "kgdyn/linearization.hpp"

namespace kg {

enum class RunStatus { completed, blowup, aborted };

struct TrajectorySample {
  double t = 0;
  FunctionalSet F;
  DecompSample D;
  bool has_D = false;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  std::vector<Field> snapshots;          // sparse field snapshots
  RunStatus status = RunStatus::completed;
  double t_end = 0;      // last good time
  double t_blowup = 0;   // estimate (status == blowup), uncertainty ~ dt
  double dt = 0;
  double initial_norm = 0;

  const TrajectorySample& at_or_before(double t) const;
};

struct EvolveParams {
  double T = 10.0;
  double dt = 1e-3;        // negative dt runs backward in time
  double dt_sample = 0.01;
  double snapshot_every = 1.0;  // <= 0 disables field snapshots
  double blowup_factor = 100.0;  // halt when ||u|| > factor*(1 + ||u0||)
  bool monitors = true;          // decomposition sampling (radial only)
  const Linearization* lin = nullptr;
  Thresholds thresholds;
  // optional extra per-sample callback (virial bookkeeping etc.)
  std::function<void(double, const Field&)> on_sample;
};

/*
 * Strang splitting with both substeps exact:
 *   linear     u <- exp(i dt D) u            (unitary multiplier)
 *   nonlinear  u <- u - i dt u1^3            (u1 depends on Re u only, so it is
 *                                             frozen along this substep)
 * Box mode applies the 2/3-rule mask to u0 and to every cubic kick.
 */
Trajectory evolve(const Field& u0, const EvolveParams& prm);

// single Strang step (used by tests and by the reversibility oracle)
void strang_step(Field& u, double dt);

}  // namespace kg
