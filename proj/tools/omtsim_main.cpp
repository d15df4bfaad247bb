// Command line front end. All work happens behind the shared C API; this
// translation unit only assembles config JSON from flags, dispatches, and
// reports what was written.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "omtsim.h"

namespace {

using nlohmann::json;

struct Args {
  std::string config;
  std::string preset;
  std::string out;
  std::uint64_t seed = 0;
  std::int64_t n_traj = 0;
  std::vector<std::string> sets;
  bool all_presets = false;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* n_traj_opt = nullptr;
};

// Every subcommand accepts --config/--seed/--out/--set; --preset and
// --n-traj only where the experiment schema has those keys.
Args* add_common(CLI::App* cmd, bool with_preset, bool with_n_traj) {
  auto* a = new Args;
  cmd->add_option("--config", a->config,
                  "config file (JSON, or a previously emitted manifest)")
      ->check(CLI::ExistingFile);
  a->seed_opt = cmd->add_option("--seed", a->seed, "master seed");
  cmd->add_option("--out", a->out, "output directory (default out/<command>)");
  cmd->add_option("--set", a->sets,
                  "extra config override as key=value, value parsed as JSON "
                  "(repeatable)");
  if (with_preset)
    cmd->add_option("--preset", a->preset,
                    "system preset (nanobeam, membrane, flux, nv)");
  if (with_n_traj)
    a->n_traj_opt =
        cmd->add_option("--n-traj", a->n_traj, "trajectories per ensemble")
            ->check(CLI::PositiveNumber);
  return a;
}

int run(const std::string& name, const Args& a) {
  json ov;
  ov["experiment"] = name;
  if (a.all_presets)
    ov["preset"] = "all";
  else if (!a.preset.empty())
    ov["preset"] = a.preset;
  if (a.seed_opt && a.seed_opt->count() > 0) ov["seed"] = a.seed;
  if (a.n_traj_opt && a.n_traj_opt->count() > 0) ov["n_traj"] = a.n_traj;
  for (const std::string& kv : a.sets) {
    const std::size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "error: --set expects key=value, got \"" << kv << "\"\n";
      return 2;
    }
    const std::string key = kv.substr(0, eq);
    const std::string val = kv.substr(eq + 1);
    const json parsed = json::parse(val, nullptr, false);
    ov[key] = parsed.is_discarded() ? json(val) : parsed;
  }

  const std::string base =
      a.config.empty() ? json{{"experiment", name}}.dump() : a.config;
  const std::string out_dir = a.out.empty() ? "out/" + name : a.out;

  char* manifest = nullptr;
  const omtsim_status st =
      omtsim_run_experiment(base.c_str(), out_dir.c_str(), ov.dump().c_str(),
                            &manifest);
  if (st != OMTSIM_OK) {
    std::cerr << "error: " << omtsim_last_error() << "\n";
    return static_cast<int>(st);
  }

  const std::string mpath = manifest;
  omtsim_string_free(manifest);
  json m;
  {
    std::ifstream in(mpath);
    m = json::parse(in, nullptr, false);
  }
  const std::string dir = mpath.substr(0, mpath.find_last_of('/'));
  if (m.is_object() && m.contains("files"))
    for (const auto& f : m["files"])
      std::cout << "wrote " << dir << "/" << f.get<std::string>() << "\n";
  std::cout << "manifest " << mpath << "\n";

  // The quick reports are small enough to show inline.
  if (name == "rates" || name == "eliminate") {
    const std::string primary =
        dir + (name == "rates" ? "/rates.tsv" : "/eliminate_report.txt");
    std::ifstream in(primary);
    if (in.good()) std::cout << "\n" << in.rdbuf();
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continuous-measurement entanglement simulator for "
               "optomechanically transduced qubits"};
  app.set_version_flag("--version", omtsim_version());
  app.require_subcommand(1);

  struct Cmd {
    const char* name;
    const char* help;
    bool preset;
    bool n_traj;
  };
  const std::vector<Cmd> cmds = {
      {"rates", "effective rate table for the shipped presets", true, false},
      {"eliminate", "adiabatic elimination of the transducer chain", true,
       false},
      {"simulate", "conditioned trajectory ensemble with homodyne records",
       true, true},
      {"postselect", "ensemble with record-based state selection", true, true},
      {"analytic", "closed-form postselected concurrence curve", false, false},
      {"figure3", "physical-system entanglement curves and sweeps", true, true},
      {"figure5", "trajectory vs analytic curves for three rate sets", false,
       true},
      {"figure6", "measurement-strategy comparison", false, true},
      {"sweep", "generic tau/eta/success-probability grid", true, true},
  };

  std::vector<std::pair<std::string, Args*>> parsed;
  for (const Cmd& c : cmds) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    Args* a = add_common(sub, c.preset, c.n_traj);
    if (std::string(c.name) == "rates")
      sub->add_flag("--all", a->all_presets, "emit rows for all presets");
    parsed.emplace_back(c.name, a);
  }

  CLI11_PARSE(app, argc, argv);

  for (const auto& [name, args] : parsed)
    if (app.got_subcommand(name)) return run(name, *args);
  return 2;
}
