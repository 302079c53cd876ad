// Command-line front end: each subcommand assembles a flat config and hands it
// to run_experiment; `run` executes a config file directly.

#include <CLI11.hpp>

#include <cstdio>

#include "kgdyn/harness.hpp"
#include "kgdyn/io.hpp"

using namespace kg;

int main(int argc, char** argv) {
  CLI::App app{"kgdyn: dynamics laboratory for the focusing cubic Klein-Gordon "
               "equation in R^3"};
  app.require_subcommand(1);
  int jobs = 1;
  app.add_option("--jobs", jobs, "parallel workers for sweeps");

  Config cfg;
  std::string out_dir = "run";
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option_function<double>(
        "--R", [&](double v) { cfg.set("grid", "R", fmt_double(v)); }, "radial domain");
    sub->add_option_function<long>(
        "--n", [&](long v) { cfg.set("grid", "n", std::to_string(v)); }, "radial nodes");
    sub->add_option_function<long>(
        "--seed", [&](long v) { cfg.set("experiment", "seed", std::to_string(v)); },
        "rng seed");
  };

  auto* gs = app.add_subcommand("ground-state", "compute Q and its invariants");
  add_common(gs);
  gs->add_option_function<double>(
      "--tol", [&](double v) { cfg.set("experiment", "tol", fmt_double(v)); },
      "target residual");

  auto* sp = app.add_subcommand("spectrum", "L_+ gap report and resonance test");
  add_common(sp);

  auto* ev = app.add_subcommand("evolve", "time evolution of a recipe or file");
  add_common(ev);
  ev->add_option_function<std::string>(
      "--init", [&](std::string v) { cfg.set("init", "recipe", v); }, "initial data");
  ev->add_option_function<double>(
      "--T", [&](double v) { cfg.set("evolve", "T", fmt_double(v)); }, "horizon");
  ev->add_option_function<double>(
      "--dt", [&](double v) { cfg.set("evolve", "dt", fmt_double(v)); }, "time step");

  auto* cl = app.add_subcommand("classify", "nine-way label of one initial datum");
  add_common(cl);
  cl->add_option_function<std::string>(
      "--init", [&](std::string v) { cfg.set("init", "recipe", v); }, "initial data");
  cl->add_option_function<double>(
      "--T", [&](double v) { cfg.set("evolve", "T", fmt_double(v)); }, "horizon");

  auto* ns = app.add_subcommand("nine-sweep", "(eps+, eps-) grid with refinements");
  add_common(ns);
  ns->add_option_function<double>(
      "--eps", [&](double v) { cfg.set("sweep", "eps", fmt_double(v)); }, "amplitude");
  ns->add_option_function<long>(
      "--grid", [&](long v) { cfg.set("sweep", "grid", std::to_string(v)); },
      "points per axis");
  ns->add_option_function<double>(
      "--T", [&](double v) { cfg.set("evolve", "T", fmt_double(v)); }, "horizon");

  auto* ej = app.add_subcommand("ejection", "ejection-rate fits vs k");
  add_common(ej);
  ej->add_option_function<std::string>(
      "--eps", [&](std::string v) { cfg.set("experiment", "eps_list", v); },
      "comma list of eps");

  auto* op = app.add_subcommand("one-pass", "no-return audit over randomized runs");
  add_common(op);
  op->add_option_function<long>(
      "--runs", [&](long v) { cfg.set("experiment", "runs", std::to_string(v)); },
      "number of runs");
  op->add_option_function<double>(
      "--Rlevel", [&](double v) { cfg.set("experiment", "R", fmt_double(v)); },
      "audit level R");

  auto* bi = app.add_subcommand("bisect", "threshold trajectory by bisection");
  add_common(bi);
  bi->add_option_function<std::string>(
      "--family", [&](std::string v) { cfg.set("experiment", "family", v); },
      "family: mode | scaling");
  bi->add_option_function<double>(
      "--lo", [&](double v) { cfg.set("experiment", "lo", fmt_double(v)); }, "bracket lo");
  bi->add_option_function<double>(
      "--hi", [&](double v) { cfg.set("experiment", "hi", fmt_double(v)); }, "bracket hi");
  bi->add_option_function<double>(
      "--T", [&](double v) { cfg.set("evolve", "T", fmt_double(v)); }, "horizon");

  auto* pr = app.add_subcommand("probe-resolvent", "weighted resolvent/evolution probes");
  add_common(pr);
  pr->add_option_function<long>(
      "--n-probe", [&](long v) { cfg.set("experiment", "n_probe", std::to_string(v)); },
      "dense probe resolution");

  auto* pk = app.add_subcommand("probe-kernel", "oscillatory kernel decay probes");
  add_common(pk);
  pk->add_option_function<long>(
      "--j", [&](long v) { cfg.set("experiment", "jmax", std::to_string(v)); },
      "largest dyadic index");

  auto* tw = app.add_subcommand("traveling-wave", "boosted ground state on a box");
  add_common(tw);
  tw->add_option_function<std::string>(
      "--p", [&](std::string v) {
        auto c1 = v.find(','), c2 = v.rfind(',');
        cfg.set("experiment", "px", v.substr(0, c1));
        cfg.set("experiment", "py", v.substr(c1 + 1, c2 - c1 - 1));
        cfg.set("experiment", "pz", v.substr(c2 + 1));
      },
      "momentum px,py,pz");
  tw->add_option_function<double>(
      "--L", [&](double v) { cfg.set("box", "L", fmt_double(v)); }, "box period");
  tw->add_option_function<long>(
      "--nbox", [&](long v) { cfg.set("box", "n", std::to_string(v)); }, "box nodes/axis");

  auto* ca = app.add_subcommand("calibrate", "threshold calibration sweep");
  add_common(ca);

  std::string cfg_path;
  auto* run = app.add_subcommand("run", "execute a config file");
  run->add_option("--config", cfg_path, "flat key=value config")->required();
  run->add_option("--out", out_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      Config file_cfg = Config::parse_file(cfg_path);
      return run_experiment(file_cfg, out_dir, jobs);
    }
    const char* kinds[] = {"ground-state", "spectrum",  "evolve",        "classify",
                           "nine-sweep",   "ejection",  "one-pass",      "bisect",
                           "probe-resolvent", "probe-kernel", "traveling-wave",
                           "calibrate"};
    for (const char* k : kinds)
      if (app.get_subcommand(k)->parsed()) {
        cfg.set("experiment", "kind", k);
        return run_experiment(cfg, out_dir, jobs);
      }
    std::fprintf(stderr, "no subcommand\n");
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
