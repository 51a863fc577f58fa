#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lab/config.hpp"
#include "lab/experiments.hpp"
#include "lab/golden.hpp"

namespace {

using namespace huo::lab;

struct Flags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> tol;
  std::optional<std::string> golden;
  std::vector<std::string> golden_tol;
  bool json = false;

  std::optional<std::string> dim;
  std::optional<std::string> hamiltonian;
  std::optional<std::string> method;
  std::optional<std::string> spectrum;
  std::optional<std::string> observable;
  std::optional<std::string> energy;
  std::optional<std::string> center;
  std::optional<std::string> delta;
  std::optional<std::string> state;
  std::optional<std::string> basis;
  std::optional<std::string> basis2;
  std::optional<std::string> manifest;
  std::optional<std::string> starts;
  std::optional<std::string> tmin;
  std::optional<std::string> tmax;
  std::optional<std::string> points;
  std::optional<std::string> scan_dims;
  std::optional<std::string> pairs;
  std::optional<std::string> criteria;
};

void set(RawConfig& raw, const std::string& sec, const std::string& key, const std::string& value, const std::string& flag) {
  raw[sec][key] = {value, flag};
}

bool split_assignment(const std::string& s, std::string& name, std::string& value) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) return false;
  name = trim(s.substr(0, eq));
  value = trim(s.substr(eq + 1));
  return true;
}

/// "fourier", "mub:K" or "random-hadamard[:S]".
void apply_method(RawConfig& raw, const std::string& m, std::vector<std::string>& errors) {
  const auto colon = m.find(':');
  const std::string name = m.substr(0, colon);
  const std::string arg = colon == std::string::npos ? std::string() : m.substr(colon + 1);
  set(raw, "observable", "hub", name, "--method");
  if (name == "mub" && !arg.empty()) set(raw, "observable", "mub_index", arg, "--method");
  else if (name == "random-hadamard" && !arg.empty()) set(raw, "observable", "hub_seed", arg, "--method");
  else if (!arg.empty()) errors.push_back("--method: '" + name + "' takes no argument");
}

/// "nondegenerate" or "degenerate:K".
void apply_spectrum(RawConfig& raw, const std::string& s, std::vector<std::string>& errors) {
  const auto colon = s.find(':');
  const std::string name = s.substr(0, colon);
  set(raw, "observable", "spectrum", name, "--spectrum");
  if (colon != std::string::npos) {
    if (name != "degenerate") errors.push_back("--spectrum: only 'degenerate:K' takes an argument");
    else set(raw, "observable", "sectors", s.substr(colon + 1), "--spectrum");
  }
}

RawConfig assemble(const std::string& kind, const Flags& f, std::vector<std::string>& errors) {
  RawConfig raw;
  if (f.config) raw = read_raw_config(*f.config, errors);
  if (f.hamiltonian) merge_into(raw, read_raw_config(*f.hamiltonian, errors));
  if (kind == "evolve" && f.state) merge_into(raw, read_raw_config(*f.state, errors));

  if (const auto it = raw.find("experiment"); it != raw.end()) {
    if (const auto k = it->second.find("kind"); k != it->second.end() && k->second.value != kind) {
      errors.push_back(k->second.origin + ": config is for kind '" + k->second.value + "' but the subcommand is '" + kind + "'");
    }
  }
  set(raw, "experiment", "kind", kind, "subcommand");
  if (f.seed) set(raw, "experiment", "seed", std::to_string(*f.seed), "--seed");
  if (f.out) set(raw, "experiment", "out", *f.out, "--out");
  for (const auto& t : f.tol) {
    std::string name;
    std::string value;
    if (!split_assignment(t, name, value)) errors.push_back("--tol expects name=value, got '" + t + "'");
    else set(raw, "tolerances", name, value, "--tol");
  }
  if (f.dim) set(raw, "mub", "dim", *f.dim, "--dim");
  if (f.method) apply_method(raw, *f.method, errors);
  if (f.spectrum) apply_spectrum(raw, *f.spectrum, errors);
  if (f.observable) set(raw, "observable", "path", *f.observable, "--observable");
  if (f.energy) set(raw, "maximize", "energy", *f.energy, "--energy");
  if (f.center) set(raw, "shell", "center", *f.center, "--center");
  if (f.delta) set(raw, "shell", "delta", *f.delta, "--delta");
  if (f.starts) set(raw, "maximize", "starts", *f.starts, "--starts");
  if (f.tmin) set(raw, "evolve", "tmin", *f.tmin, "--tmin");
  if (f.tmax) set(raw, "evolve", "tmax", *f.tmax, "--tmax");
  if (f.points) set(raw, "evolve", "points", *f.points, "--points");
  if (f.scan_dims) set(raw, "eth", "scan_dims", *f.scan_dims, "--scan-dims");
  if (f.pairs) set(raw, "eth", "pairs", *f.pairs, "--pairs");
  if (f.criteria) set(raw, "acceptance", "criteria", *f.criteria, "--criteria");
  if (kind == "entropy") {
    if (f.state) set(raw, "entropy", "state", *f.state, "--state");
    if (f.basis) set(raw, "entropy", "basis", *f.basis, "--basis");
    if (f.basis2) set(raw, "entropy", "basis2", *f.basis2, "--basis2");
    if (f.manifest) set(raw, "entropy", "manifest", *f.manifest, "--manifest");
  }
  return raw;
}

int execute(const std::string& kind, const Flags& f) {
  std::vector<std::string> errors;
  ExperimentConfig cfg;
  GoldenTolerances gtol;
  try {
    const RawConfig raw = assemble(kind, f, errors);
    cfg = build_config(raw, errors);
    lab_threads();
    gtol.default_tol = cfg.tolerances.at("golden");
    for (const auto& t : f.golden_tol) {
      std::string name;
      std::string value;
      if (!split_assignment(t, name, value)) throw huo::ConfigError({"--golden-tol expects column=value, got '" + t + "'"});
      gtol.per_column[name] = std::stod(value);
    }
    if (f.golden && !cfg.out) throw huo::ConfigError({"--golden needs --out so there is a run directory to compare"});
  } catch (const huo::ConfigError& e) {
    for (const auto& m : e.messages()) std::cerr << "config error: " << m << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  RunRecord rec;
  try {
    rec = run(cfg);
    if (f.golden) {
      const auto rep = compare_golden(*rec.output, *f.golden, gtol);
      for (const auto& fv : rep.files) {
        rec.verdicts.push_back({"golden:" + fv.file, fv.pass ? VerdictKind::pass : VerdictKind::fail, fv.reason});
        for (const auto& d : fv.diffs) rec.report.push_back("golden diff: " + format_diff(d));
      }
    }
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.input_error() ? 2 : 1;
  } catch (const huo::SchemaError& e) {
    std::cerr << "golden schema error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }

  if (f.json) {
    std::cout << rec.to_json().dump(2) << "\n";
  } else {
    for (const auto& line : rec.report) std::cout << line << "\n";
    for (const auto& v : rec.verdicts) std::cout << "  " << to_string(v.kind) << "  " << v.check << ": " << v.detail << "\n";
    if (rec.output) std::cout << "output: " << rec.output->string() << "\n";
  }
  return rec.all_pass() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"huo-lab: Hamiltonian-unbiased observable experiments"};
  app.require_subcommand(1);
  app.set_version_flag("--version", HUO_LAB_VERSION);
  Flags f;

  auto common = [&f](CLI::App* sub) {
    sub->add_option("--config", f.config, "Experiment config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", f.seed, "Root seed (u64)");
    sub->add_option("--out", f.out, "Output directory (or file for maximize/evolve)");
    sub->add_option("--tol", f.tol, "Tolerance override name=value")->take_all();
    sub->add_option("--golden", f.golden, "Compare CSV outputs with this golden directory");
    sub->add_option("--golden-tol", f.golden_tol, "Per-column golden tolerance column=value")->take_all();
    sub->add_flag("--json", f.json, "Print the run record as JSON");
  };
  auto model_opts = [&f](CLI::App* sub) {
    sub->add_option("--hamiltonian", f.hamiltonian, "Config file with a [model] section")->check(CLI::ExistingFile);
    sub->add_option("--method", f.method, "fourier | mub:K | random-hadamard:S");
    sub->add_option("--spectrum", f.spectrum, "nondegenerate | degenerate:K");
  };

  auto* mub = app.add_subcommand("mub", "Generate a complete MUB family");
  common(mub);
  mub->add_option("--dim", f.dim, "Dimension D");

  auto* huo_cmd = app.add_subcommand("huo", "Build a HUB and a HUO for a Hamiltonian");
  common(huo_cmd);
  model_opts(huo_cmd);

  auto* entropy = app.add_subcommand("entropy", "Shannon entropy of a state in one or two bases");
  common(entropy);
  entropy->add_option("--state", f.state, "Density matrix dump");
  entropy->add_option("--basis", f.basis, "Basis dump (columns are basis vectors)");
  entropy->add_option("--basis2", f.basis2, "Second basis dump for the uncertainty check");
  entropy->add_option("--manifest", f.manifest, "Batch CSV with columns state,basis,basis2");

  auto* maximize = app.add_subcommand("maximize", "Maximize H_O at fixed energy");
  common(maximize);
  model_opts(maximize);
  maximize->add_option("--observable", f.observable, "Observable directory written by 'huo'");
  maximize->add_option("--energy", f.energy, "Target energy E0");
  maximize->add_option("--delta", f.delta, "Shell width for a microcanonical comparison");
  maximize->add_option("--starts", f.starts, "Number of optimizer starts");

  auto* evolve = app.add_subcommand("evolve", "Time evolution of the outcome distribution");
  common(evolve);
  model_opts(evolve);
  evolve->add_option("--observable", f.observable, "Observable directory written by 'huo'");
  evolve->add_option("--state", f.state, "Config file with [state] / [shell] sections")->check(CLI::ExistingFile);
  evolve->add_option("--center", f.center, "Shell center E0");
  evolve->add_option("--delta", f.delta, "Shell width");
  evolve->add_option("--tmin", f.tmin, "First time point");
  evolve->add_option("--tmax", f.tmax, "Last time point");
  evolve->add_option("--points", f.points, "Number of log-spaced time points");

  auto* eth = app.add_subcommand("eth", "Energy-basis matrix element statistics");
  common(eth);
  model_opts(eth);
  eth->add_option("--observable", f.observable, "Observable directory written by 'huo'");
  eth->add_option("--scan-dims", f.scan_dims, "Dimensions for the scaling scan, e.g. 64..2048");
  eth->add_option("--pairs", f.pairs, "Sampled off-diagonal pairs");

  auto* acceptance = app.add_subcommand("acceptance", "Run the acceptance suite");
  common(acceptance);
  acceptance->add_option("--criteria", f.criteria, "Comma list of criterion numbers (default: all)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  return execute(app.get_subcommands().front()->get_name(), f);
}
