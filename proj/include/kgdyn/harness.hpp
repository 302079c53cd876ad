#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "kgdyn/classifier.hpp"

namespace kg {

inline constexpr const char* kToolVersion = "kgdyn 0.1.0";

// flat key=value configuration with [sections]; '#' comments
class Config {
 public:
  static Config parse_file(const std::filesystem::path& p);
  static Config parse_string(const std::string& text);

  bool has(const std::string& section, const std::string& key) const;
  std::string get(const std::string& section, const std::string& key,
                  const std::string& def) const;
  double get_num(const std::string& section, const std::string& key, double def) const;
  long get_int(const std::string& section, const std::string& key, long def) const;
  void set(const std::string& section, const std::string& key, const std::string& v);
  std::string str() const;  // canonical serialization (sorted)

 private:
  std::map<std::string, std::map<std::string, std::string>> s_;
};

/*
 * Initial-data recipes. Flat constructor syntax, e.g.
 *   scaled-Q:c=0.9
 *   Q-plus-modes:ep=1e-3,em=0,gnorm=1e-4,gseed=7
 *   traveling-wave:px=0.2,py=0,pz=0
 *   file:/path/to/state.bin
 */
struct Recipe {
  std::string tag;
  std::map<std::string, std::string> kv;
  static Recipe parse(const std::string& text);
  std::string str() const;
  double num(const std::string& key, double def) const;
};

// shared per-grid context built on demand
struct LabContext {
  std::shared_ptr<const RadialGrid> grid;
  GroundState gs;
  Linearization lin;
  Thresholds th;
};
LabContext make_context(double R, int n, const Thresholds& th, double gs_tol = 1e-10);

// dispersive remainder used by Q-plus-modes: seeded smooth radial noise,
// symplectically orthogonal to g_pm, normalized to gnorm
Field dispersive_component(const LabContext& ctx, std::uint64_t seed, double gnorm);

Field build_initial_data(const Recipe& r, const LabContext& ctx);

std::string trajectory_csv(const Trajectory& traj);  // the documented column set

struct ExperimentResult {
  bool pass = true;
  std::vector<std::string> messages;  // assertion log, one line each
  void check(bool ok, const std::string& what);
};

/*
 * Executes one named experiment {ground-state, spectrum, evolve, classify,
 * nine-sweep, ejection, one-pass, bisect, probe-resolvent, probe-kernel,
 * traveling-wave, calibrate} into out_dir. Outputs are staged in a temp
 * directory and renamed into place; a manifest.json indexes every file.
 * Returns exit status 0 iff every embedded assertion passed.
 */
int run_experiment(const Config& cfg, std::filesystem::path out_dir, int jobs);

// work queue of independent runs; results are reduced in index order
void parallel_for_indexed(std::size_t count, int jobs,
                          const std::function<void(std::size_t)>& fn);

std::filesystem::path resolve_out_dir(const std::filesystem::path& requested);

}  // namespace kg
