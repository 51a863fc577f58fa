#pragma once

#include <chrono>
#include <ctime>
#include <fstream>
#include <functional>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "huo/huo.hpp"
#include "lab/acceptance.hpp"
#include "lab/config.hpp"
#include "lab/io.hpp"

#ifndef HUO_LAB_VERSION
#define HUO_LAB_VERSION "0.0.0"
#endif

namespace huo::lab {

using Json = nlohmann::ordered_json;

enum class VerdictKind { pass, fail, skipped };

struct Verdict {
  std::string check;
  VerdictKind kind = VerdictKind::fail;
  std::string detail;  // measured value or skip reason
};

inline const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::pass: return "pass";
    case VerdictKind::fail: return "fail";
    case VerdictKind::skipped: return "skipped";
  }
  return "?";
}

struct RunRecord {
  std::string kind;
  std::string config_hash;
  std::string version = HUO_LAB_VERSION;
  std::uint64_t seed = 0;
  std::string started_at;
  double wall_seconds = 0.0;
  std::vector<Verdict> verdicts;
  std::vector<ManifestEntry> manifest;
  std::optional<fs::path> output;
  std::vector<std::string> report;  // human-readable lines for the terminal
  Json result;                      // experiment-specific summary

  bool all_pass() const {
    return std::none_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.kind == VerdictKind::fail; });
  }

  Json to_json() const {
    Json j;
    j["kind"] = kind;
    j["version"] = version;
    j["config_sha256"] = config_hash;
    j["seed"] = seed;
    j["started_at"] = started_at;
    j["wall_seconds"] = wall_seconds;
    j["verdicts"] = Json::array();
    for (const auto& v : verdicts) j["verdicts"].push_back({{"check", v.check}, {"verdict", to_string(v.kind)}, {"detail", v.detail}});
    j["manifest"] = Json::array();
    for (const auto& m : manifest) j["manifest"].push_back({{"file", m.file}, {"sha256", m.sha256}});
    j["result"] = result;
    return j;
  }
};

/// A failure inside one named stage of a run. `input` marks problems with
/// the supplied parameters or files rather than with the computation.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what, bool input)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)), input_(input) {}
  const std::string& stage() const noexcept { return stage_; }
  bool input_error() const noexcept { return input_; }

 private:
  std::string stage_;
  bool input_;
};

template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const ValidationError& e) {
    throw StageError(name, e.what(), true);
  } catch (const ResourceError& e) {
    throw StageError(name, e.what(), true);
  } catch (const UnsupportedDimensionError& e) {
    throw StageError(name, e.what(), true);
  } catch (const SchemaError& e) {
    throw StageError(name, e.what(), true);
  } catch (const std::exception& e) {
    throw StageError(name, e.what(), false);
  }
}

// ---------------------------------------------------------------------------
// Building blocks shared by the experiment kinds.

namespace exp_detail {

inline Verdict threshold(const std::string& check, double value, double tol, bool below = true) {
  const bool ok = below ? value <= tol : value >= tol;
  return {check, ok ? VerdictKind::pass : VerdictKind::fail,
          fmt_double(value) + (below ? " <= " : " >= ") + fmt_double(tol) + (ok ? "" : " violated")};
}

inline Verdict skipped(const std::string& check, const std::string& reason) { return {check, VerdictKind::skipped, reason}; }

inline ModelSpec model_spec(const ModelConfig& m) {
  if (m.type == "ising") return IsingChain{m.sites, m.coupling, m.field, m.longitudinal};
  if (m.type == "xxz") return XxzChain{m.sites, m.coupling, m.anisotropy, m.field};
  return RandomHermitian{m.dim, m.seed};
}

inline Json model_json(const ModelConfig& m) {
  Json j{{"type", m.type}};
  if (m.type == "random") {
    j["dim"] = m.dim;
    j["seed"] = m.seed;
  } else {
    j["sites"] = m.sites;
    j["coupling"] = m.coupling;
    j["field"] = m.field;
    if (m.type == "ising") j["longitudinal"] = m.longitudinal;
    else j["anisotropy"] = m.anisotropy;
  }
  return j;
}

inline ModelConfig model_from_json(const Json& j) {
  ModelConfig m;
  m.type = j.at("type").get<std::string>();
  if (m.type == "random") {
    m.dim = j.at("dim").get<std::size_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
  } else {
    m.sites = j.at("sites").get<unsigned>();
    m.coupling = j.at("coupling").get<double>();
    m.field = j.at("field").get<double>();
    m.longitudinal = j.value("longitudinal", 0.0);
    m.anisotropy = j.value("anisotropy", 1.0);
  }
  return m;
}

inline std::string model_id(const ModelConfig& m) { return sha256_hex(model_json(m).dump()).substr(0, 16); }

inline HubMethod hub_method(const ObservableConfig& o) {
  if (o.hub == "mub") return MubFamilyMethod{o.mub_index};
  if (o.hub == "random-hadamard") return RandomHadamardMethod{o.hub_seed};
  return FourierMethod{};
}

inline SpectrumAssignment spectrum(const ObservableConfig& o, Index dim) {
  if (o.spectrum == "degenerate") return SpectrumAssignment::degenerate(dim, static_cast<Index>(o.sectors), o.values);
  if (o.spectrum == "custom") {
    std::vector<Index> m(o.multiplicities.begin(), o.multiplicities.end());
    return SpectrumAssignment::custom(o.values, m);
  }
  return SpectrumAssignment::nondegenerate(dim, o.values);
}

/// Everything an experiment needs about T and O.
struct Setup {
  ModelConfig model;
  HermitianOperator hamiltonian = HermitianOperator::identity(1);
  SpectralDecomposition spec;
  std::optional<HubBasis> hub;  // present when O was built here
  std::optional<Observable> observable;
  std::string observable_source;
};

inline Observable load_observable(const fs::path& dir, Json& meta) {
  meta = Json::parse(read_file(dir / "observable.json"));
  std::ifstream in(dir / "basis.dump");
  if (!in) throw ValidationError("cannot open " + (dir / "basis.dump").string());
  const CMatrix basis = read_matrix_dump(in);
  const auto values = meta.at("values").get<std::vector<double>>();
  const auto mults = meta.at("multiplicities").get<std::vector<Index>>();
  return Observable(Eigen::Map<const RVector>(values.data(), static_cast<Index>(values.size())), mults, basis);
}

inline Setup make_setup(const ExperimentConfig& c, bool need_observable) {
  Setup s;
  Json meta;
  if (c.observable.path) {
    s.observable = stage("load observable", [&] { return load_observable(*c.observable.path, meta); });
    s.observable_source = *c.observable.path;
  }
  if (c.model) s.model = *c.model;
  else if (meta.contains("model")) s.model = stage("load observable", [&] { return model_from_json(meta.at("model")); });
  else throw StageError("build hamiltonian", "no [model] given and the observable directory names none", true);

  s.hamiltonian = stage("build hamiltonian", [&] { return build_hamiltonian(model_spec(s.model)); });
  s.spec = stage("diagonalize", [&] { return spectral_decompose(s.hamiltonian); });
  if (s.observable) {
    if (s.observable->dim() != s.spec.dim()) {
      throw StageError("load observable", "observable dimension " + std::to_string(s.observable->dim()) +
                                              " does not match the Hamiltonian dimension " + std::to_string(s.spec.dim()), true);
    }
  } else if (need_observable) {
    s.hub = stage("construct hub", [&] { return hub_from_hamiltonian(s.spec, hub_method(c.observable), model_id(s.model)); });
    s.observable = stage("construct observable", [&] { return make_huo(*s.hub, spectrum(c.observable, s.spec.dim())); });
    s.observable_source = s.hub->method;
  }
  return s;
}

inline std::string dump_matrix(const CMatrix& m) {
  std::ostringstream os;
  write_matrix_dump(os, m);
  return os.str();
}

inline CMatrix load_matrix(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ValidationError("cannot open " + p.string());
  return read_matrix_dump(in);
}

inline std::string timestamp_utc() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Output target: a directory, or a single file when `out` has an extension
/// matching `file_ext`.
struct Output {
  std::optional<StagedOutput> dir;
  std::optional<fs::path> file;
  std::vector<std::pair<fs::path, std::string>> pending;  // file mode: written on commit

  void write(const std::string& name, const std::string& contents, std::vector<ManifestEntry>& manifest,
             const std::string& primary = {}) {
    if (dir) {
      dir->write(name, contents);
      manifest = dir->manifest();
    } else if (file) {
      const fs::path p = (name == primary) ? *file : file->parent_path() / (file->stem().string() + "_" + name);
      pending.emplace_back(p, contents);
      manifest.push_back({p.string(), sha256_hex(contents)});
    }
  }
};

inline void open_output(Output& o, const ExperimentConfig& c, const std::string& file_ext = {}) {
  if (!c.out) return;
  const fs::path p(*c.out);
  if (!file_ext.empty() && p.extension() == file_ext) o.file = p;
  else o.dir.emplace(p);
}

}  // namespace exp_detail

// ---------------------------------------------------------------------------

inline void run_mub(const ExperimentConfig& c, RunRecord& rec, exp_detail::Output& out) {
  using namespace exp_detail;
  const Index d = static_cast<Index>(c.mub_dim);
  const auto fam = stage("generate mub family", [&] { return generate_mub_family(d); });
  std::vector<CMatrix> bases;
  for (std::size_t i = 0; i < fam.size(); ++i) bases.push_back(fam.basis_matrix(i));
  double worst = 0.0;
  double ortho = 0.0;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    ortho = std::max(ortho, orthonormality_error(bases[i]));
    for (std::size_t j = i + 1; j < bases.size(); ++j) worst = std::max(worst, unbiasedness_deviation(bases[i], bases[j]));
  }
  Json files = Json::array();
  const int width = static_cast<int>(std::to_string(bases.size() - 1).size());
  for (std::size_t i = 0; i < bases.size(); ++i) {
    std::string idx = std::to_string(i);
    idx.insert(0, static_cast<std::size_t>(width) - idx.size(), '0');
    const std::string name = "basis_" + idx + ".dump";
    const std::string body = dump_matrix(bases[i]);
    files.push_back({{"file", name}, {"sha256", sha256_hex(body)}});
    out.write(name, body, rec.manifest);
  }
  rec.result = {{"dim", d}, {"count", fam.size()}, {"max_pairwise_deviation", worst}, {"max_orthonormality_error", ortho}, {"bases", files}};
  out.write("manifest.json", rec.result.dump(2) + "\n", rec.manifest);
  rec.verdicts.push_back({"family_size", fam.size() == static_cast<std::size_t>(d) + 1 ? VerdictKind::pass : VerdictKind::fail,
                          std::to_string(fam.size()) + " bases"});
  rec.verdicts.push_back(threshold("unbiasedness", worst, c.tolerances.at("mub_deviation")));
  rec.report.push_back("D = " + std::to_string(d) + ": " + std::to_string(fam.size()) + " bases, max pairwise deviation " + fmt_double(worst));
}

inline void run_huo(const ExperimentConfig& c, RunRecord& rec, exp_detail::Output& out) {
  using namespace exp_detail;
  ExperimentConfig cc = c;
  cc.observable.path.reset();
  auto s = make_setup(cc, true);
  const Observable& obs = *s.observable;
  const double hub_dev = hub_deviation(s.hub->columns, s.spec);
  const auto dc = stage("diagonal constancy", [&] { return diagonal_constancy(matrix_elements(obs, s.spec), obs); });
  const auto phases = phase_table(obs.basis(), s.spec);

  CsvTable csv({"j", "s", "alpha", "theta"});
  for (Index j = 0; j < obs.sector_count(); ++j)
    for (Index k = 0; k < obs.multiplicity(j); ++k)
      for (Index a = 0; a < obs.dim(); ++a) csv.row(j, k, a, phases.theta(obs.sector_begin(j) + k, a));

  std::vector<double> values(obs.values().data(), obs.values().data() + obs.values().size());
  rec.result = {{"dim", obs.dim()},
                {"method", s.hub->method},
                {"hamiltonian_id", s.hub->hamiltonian_id},
                {"model", model_json(s.model)},
                {"values", values},
                {"multiplicities", obs.multiplicities()},
                {"trace_over_dim", obs.trace() / static_cast<double>(obs.dim())},
                {"hub_deviation", hub_dev},
                {"diagonal_max_deviation", dc.max_deviation}};
  out.write("basis.dump", dump_matrix(obs.basis()), rec.manifest);
  out.write("observable.dump", dump_matrix(obs.matrix()), rec.manifest);
  out.write("observable.json", rec.result.dump(2) + "\n", rec.manifest);
  out.write("phases.csv", csv.str(), rec.manifest);
  rec.verdicts.push_back(threshold("hub_unbiasedness", hub_dev, c.tolerances.at("mub_deviation")));
  rec.verdicts.push_back(threshold("diagonal_constancy", dc.max_deviation, c.tolerances.at("diagonal_constancy")));
  rec.report.push_back("HUO on D = " + std::to_string(obs.dim()) + " via " + s.hub->method + ", " +
                       std::to_string(obs.sector_count()) + " sectors, hub deviation " + fmt_double(hub_dev));
}

inline void run_entropy(const ExperimentConfig& c, RunRecord& rec, exp_detail::Output& out) {
  using namespace exp_detail;
  const double tol = c.tolerances.at("uncertainty");
  auto eval = [&](const fs::path& state_p, const fs::path& b1_p, const std::optional<fs::path>& b2_p) {
    const CMatrix rho = stage("load state", [&] { return load_matrix(state_p); });
    const auto state = stage("load state", [&] { return QuantumState::mixed(rho); });
    const CMatrix b1 = stage("load basis", [&] { return load_matrix(b1_p); });
    Json j{{"dim", state.dim()}, {"basis_id", b1_p.filename().string() + ":" + sha256_file(b1_p).substr(0, 16)}};
    j["H"] = stage("entropy", [&] { return basis_entropy(state, b1); });
    j["H_bits"] = nats_to_bits(j["H"].get<double>());
    if (b2_p) {
      const CMatrix b2 = stage("load basis", [&] { return load_matrix(*b2_p); });
      j["basis2_id"] = b2_p->filename().string() + ":" + sha256_file(*b2_p).substr(0, 16);
      j["H2"] = stage("entropy", [&] { return basis_entropy(state, b2); });
      j["slack"] = j["H"].get<double>() + j["H2"].get<double>() - std::log(static_cast<double>(state.dim()));
      j["pair_deviation"] = unbiasedness_deviation(b1, b2);
    }
    return j;
  };

  if (c.entropy_manifest) {
    const fs::path mp(*c.entropy_manifest);
    const auto csv = stage("read manifest", [&] { return read_csv(mp); });
    const auto col = [&](const std::string& name) -> std::size_t {
      const auto it = std::find(csv.columns.begin(), csv.columns.end(), name);
      if (it == csv.columns.end()) throw StageError("read manifest", "manifest lacks column '" + name + "'", true);
      return static_cast<std::size_t>(it - csv.columns.begin());
    };
    const std::size_t cs = col("state");
    const std::size_t cb1 = col("basis");
    const std::size_t cb2 = col("basis2");
    CsvTable table({"trial", "H1", "H2", "slack"});
    double min_slack = std::numeric_limits<double>::infinity();
    std::size_t skipped_pairs = 0;
    for (std::size_t t = 0; t < csv.rows.size(); ++t) {
      const auto& row = csv.rows[t];
      const auto j = eval(mp.parent_path() / row.at(cs), mp.parent_path() / row.at(cb1), mp.parent_path() / row.at(cb2));
      table.row(t, j["H"].get<double>(), j["H2"].get<double>(), j["slack"].get<double>());
      if (j["pair_deviation"].get<double>() > 1e-8) ++skipped_pairs;
      else min_slack = std::min(min_slack, j["slack"].get<double>());
    }
    out.write("entropy.csv", table.str(), rec.manifest);
    rec.result = {{"trials", csv.rows.size()}, {"min_slack", min_slack}, {"non_unbiased_pairs", skipped_pairs}};
    if (std::isfinite(min_slack)) rec.verdicts.push_back(threshold("entropic_uncertainty", min_slack, -tol, false));
    else rec.verdicts.push_back(skipped("entropic_uncertainty", "no mutually unbiased basis pairs in manifest"));
    rec.report.push_back(std::to_string(csv.rows.size()) + " trials, min slack " + fmt_double(min_slack));
    if (!c.out) rec.report.push_back(table.str());
    return;
  }

  std::optional<fs::path> b2;
  if (c.entropy_basis2) b2 = *c.entropy_basis2;
  rec.result = eval(*c.entropy_state, *c.entropy_basis, b2);
  out.write("entropy.json", rec.result.dump(2) + "\n", rec.manifest);
  if (b2) {
    if (rec.result["pair_deviation"].get<double>() > 1e-8) rec.verdicts.push_back(skipped("entropic_uncertainty", "bases are not mutually unbiased"));
    else rec.verdicts.push_back(threshold("entropic_uncertainty", rec.result["slack"].get<double>(), -tol, false));
  }
  rec.report.push_back(rec.result.dump());
}

inline void run_maximize(const ExperimentConfig& c, RunRecord& rec, exp_detail::Output& out) {
  using namespace exp_detail;
  const auto s = make_setup(c, true);
  const Observable& obs = *s.observable;
  MaximizeOptions opt;
  opt.starts = c.starts;
  opt.seed = derive_seed(c.seed, "maximize");
  opt.max_iterations = c.max_iterations;
  const auto res = stage("maximize entropy", [&] { return maximize_entropy(obs, s.hamiltonian, *c.energy, opt); });

  CsvTable dist({"j", "lambda", "p"});
  for (Index j = 0; j < obs.sector_count(); ++j) dist.row(j, obs.values()(j), res.distribution.probabilities(j));

  Json& r = rec.result;
  r = {{"dim", obs.dim()},
       {"energy_target", *c.energy},
       {"entropy", res.entropy},
       {"multipliers", {{"lambda_N", res.multipliers.normalization}, {"lambda_E", res.multipliers.energy}}},
       {"ee1_residual_max", res.report.ee1_residual},
       {"ee2_residual_max", res.report.ee2_max},
       {"linear_relation_gap", res.report.linear_relation_gap},
       {"constraint_normalization", res.constraints.normalization},
       {"constraint_energy", res.constraints.energy},
       {"gradient_norm", res.gradient_norm},
       {"iterations", res.iterations},
       {"support_collapse", res.support_collapse},
       {"multistart_spread", res.multistart_spread},
       {"mixed_ansatz_entropy", res.mixed_ansatz_entropy}};
  if (c.shell.delta) {
    const auto mc = stage("microcanonical comparison", [&] {
      return microcanonical_state(s.spec, make_energy_shell(s.spec, *c.energy, *c.shell.delta, 1));
    });
    r["microcanonical_levels"] = mc.shell.size();
    r["microcanonical_entropy"] = shannon_entropy(eigenvalue_distribution(mc.state, obs));
  }
  out.write("eq.json", r.dump(2) + "\n", rec.manifest, "eq.json");
  out.write("distribution.csv", dist.str(), rec.manifest);
  const double cons = std::max(std::abs(res.constraints.normalization), std::abs(res.constraints.energy));
  rec.verdicts.push_back(threshold("constraints", cons, 1e-8));
  rec.verdicts.push_back(threshold("ee2", res.report.ee2_max, c.tolerances.at("ee2")));
  rec.verdicts.push_back(threshold("linear_relation", res.report.linear_relation_gap, c.tolerances.at("linear_gap")));
  rec.verdicts.push_back(threshold("multistart_agreement", res.multistart_spread, c.tolerances.at("maximality")));
  rec.report.push_back("H_O = " + fmt_double(res.entropy) + " at E0 = " + fmt_double(*c.energy) + ", lambda_N = " +
                       fmt_double(res.multipliers.normalization) + ", lambda_E = " + fmt_double(res.multipliers.energy));
}

inline void run_evolve(const ExperimentConfig& c, RunRecord& rec, exp_detail::Output& out) {
  using namespace exp_detail;
  const auto s = make_setup(c, true);
  const Observable& obs = *s.observable;
  const Index d = s.spec.dim();
  const double center = c.shell.center.value_or(0.5 * (s.spec.eigenvalues(0) + s.spec.eigenvalues(d - 1)));
  const auto shell = stage("energy shell", [&] { return make_energy_shell(s.spec, center, c.shell.delta, c.shell.min_levels); });
  const std::uint64_t seed = derive_seed(c.state.seed, "evolve.state");
  const CVector psi0 = stage("initial state", [&]() -> CVector {
    if (c.state.profile == "eigenstate") {
      if (c.state.index >= static_cast<std::size_t>(d)) throw ValidationError("state.index exceeds the dimension");
      return s.spec.eigenvectors.col(static_cast<Index>(c.state.index));
    }
    if (c.state.profile == "random") {
      Rng rng(seed);
      return rng.random_state(d);
    }
    ShellProfile prof = UniformPhaseProfile{};
    if (c.state.profile == "gaussian") prof = GaussianProfile{c.state.sigma.value_or(shell.width / 4.0)};
    return narrow_energy_state(s.spec, shell, prof, seed).state.vector();
  });
  const auto times = stage("time grid", [&] { return log_time_grid(c.points, c.tmin, c.tmax); });
  const std::optional<CMatrix> hub_cols = s.hub ? std::optional<CMatrix>(s.hub->columns) : std::nullopt;
  const auto tr = stage("evolve", [&] { return thermalization_trace(psi0, s.spec, obs, times, shell, hub_cols); });

  CsvTable csv({"t", "expectation", "entropy", "tv_distance"});
  for (std::size_t i = 0; i < tr.times.size(); ++i) csv.row(tr.times[i], tr.expectation[i], tr.entropy[i], tr.tv_distance[i]);

  const CMatrix o = energy_basis_matrix(obs, s.spec);
  const auto de = diagonal_ensemble(psi0, s.spec);
  const double de_value = diagonal_ensemble_value(de.weights, o);
  const double diag_spread = (o.diagonal().real().array() - obs.trace() / static_cast<double>(d)).abs().maxCoeff();
  Json& r = rec.result;
  r = {{"dim", d},
       {"shell_center", shell.center},
       {"shell_width", shell.width},
       {"shell_levels", shell.size()},
       {"diagonal_ensemble", de_value},
       {"microcanonical", tr.microcanonical_expectation},
       {"energy_entropy", shannon_entropy(de.weights)},
       {"final_tv_distance", tr.tv_distance.back()}};
  out.write("trace.csv", csv.str(), rec.manifest, "trace.csv");
  if (out.dir) out.write("summary.json", r.dump(2) + "\n", rec.manifest);
  if (diag_spread <= c.tolerances.at("diagonal_constancy")) {
    rec.verdicts.push_back(threshold("de_equals_mc", std::abs(de_value - tr.microcanonical_expectation), c.tolerances.at("de_mc")));
  } else {
    rec.verdicts.push_back(skipped("de_equals_mc", "observable diagonal is not constant in the energy basis"));
  }
  rec.report.push_back(std::to_string(times.size()) + " time points, DE " + fmt_double(de_value) + ", MC " +
                       fmt_double(tr.microcanonical_expectation));
}

inline void run_eth(const ExperimentConfig& c, RunRecord& rec, exp_detail::Output& out) {
  using namespace exp_detail;
  for (auto d : c.scan_dims) {
    if (d < 2) throw StageError("scan setup", "scan dimension " + std::to_string(d) + " is below 2", true);
    stage("scan setup", [&] { require_within_cap(d, "eth scan"); return 0; });
  }
  const auto s = make_setup(c, true);
  const Observable& obs = *s.observable;
  const Index d = obs.dim();
  const std::uint64_t seed = derive_seed(c.seed, "eth");
  const auto table = stage("matrix elements", [&] { return matrix_elements(obs, s.spec); });
  const auto dc = diagonal_constancy(table, obs);

  CsvTable diag({"alpha", "Oaa", "deviation"});
  for (Index a = 0; a < d; ++a) diag.row(a, table.values(a, a).real(), dc.deviations(a));
  CsvTable off({"alpha", "beta", "re", "im", "Ebar", "omega"});
  for (const auto& [a, b] : sample_pairs(d, c.pairs, derive_seed(seed, "offdiag")))
    off.row(a, b, table.values(a, b).real(), table.values(a, b).imag(), table.ebar(a, b), table.omega(a, b));

  Json& r = rec.result;
  r = {{"dim", d}, {"trace_over_dim", dc.trace_over_dim}, {"diagonal_max_deviation", dc.max_deviation},
       {"hermiticity_error", table.hermiticity_error()}};
  rec.verdicts.push_back(threshold("diagonal_constancy", dc.max_deviation, c.tolerances.at("diagonal_constancy")));
  rec.verdicts.push_back(threshold("hermiticity", table.hermiticity_error(), 1e-12));

  const double predicted = predicted_offdiag_std(obs);
  if (predicted > 0.0 && d >= 4) {
    const auto pt = scaling_point(table, obs, seed);
    r["offdiag_std"] = {{"re", pt.std_re}, {"im", pt.std_im}, {"predicted", pt.predicted}, {"pairs", pt.pairs}};
    const double rel = std::max(std::abs(pt.std_re / predicted - 1.0), std::abs(pt.std_im / predicted - 1.0));
    rec.verdicts.push_back(threshold("offdiag_std", rel, c.tolerances.at("std_relative")));
  } else {
    rec.verdicts.push_back(skipped("offdiag_std", predicted > 0.0 ? "dimension below 4" : "observable is proportional to the identity"));
  }

  if (d >= 64) {
    const auto pu = phase_uniformity_unchecked(obs.basis(), s.spec, random_pairs(d, 100, derive_seed(seed, "phase")));
    r["phase_uniformity_pass_fraction"] = pu.pass_fraction;
    rec.verdicts.push_back({"phase_uniformity", pu.pass ? VerdictKind::pass : VerdictKind::fail, fmt_double(pu.pass_fraction) + " of pairs with p >= 0.01"});
  } else {
    rec.verdicts.push_back(skipped("phase_uniformity", "dimension below 64"));
  }

  const auto fac = stage("factorization", [&] { return uncorrelated_factorization_check(obs, s.spec, derive_seed(seed, "factorization")); });
  r["factorization"] = {{"max_offdiag", fac.max_offdiag}, {"uncorrelated_fraction", fac.uncorrelated_fraction}};
  rec.verdicts.push_back({"uncorrelated_factorization", fac.pass ? VerdictKind::pass : VerdictKind::fail,
                          fmt_double(fac.uncorrelated_fraction) + " of pairs uncorrelated"});

  const std::size_t total_pairs = static_cast<std::size_t>(d) * static_cast<std::size_t>(d - 1) / 2;
  if (total_pairs >= 10000) {
    const auto clt = stage("clt residuals", [&] { return clt_residual_test(table, obs, derive_seed(seed, "clt")); });
    r["clt"] = {{"applicable", clt.applicable}, {"mean", clt.moments.mean}, {"variance", clt.moments.variance}, {"kurtosis", clt.moments.kurtosis}};
    if (!clt.applicable) rec.verdicts.push_back(skipped("clt_residuals", "needs equal multiplicities with D2 >= 64 D1"));
    else rec.verdicts.push_back({"clt_residuals", clt.pass ? VerdictKind::pass : VerdictKind::fail, "moments " + fmt_double(clt.moments.mean) + ", " + fmt_double(clt.moments.variance) + ", " + fmt_double(clt.moments.kurtosis)});
  } else {
    rec.verdicts.push_back(skipped("clt_residuals", "fewer than 10^4 off-diagonal pairs"));
  }

  const auto ansatz = stage("ansatz summary", [&] { return eth_ansatz_summary(table, s.spec, c.smearing, derive_seed(seed, "ansatz")); });
  r["ansatz"] = {{"smearing", ansatz.smearing}, {"f1_centers", ansatz.f1_centers}, {"f1", ansatz.f1},
                 {"residual_mean", ansatz.residual_moments.mean}, {"residual_variance", ansatz.residual_moments.variance},
                 {"insufficient_statistics", ansatz.insufficient_statistics}};

  CsvTable scaling({"D", "std_re", "std_im"});
  if (!c.scan_dims.empty()) {
    std::vector<Index> dims(c.scan_dims.begin(), c.scan_dims.end());
    const ModelConfig base = s.model;
    const auto model_for = [&](Index dim) {
      ModelConfig m = base;
      if (m.type == "random") {
        m.dim = static_cast<std::size_t>(dim);
        m.seed = derive_seed(base.seed, "eth.scan", static_cast<std::uint64_t>(dim));
      } else {
        unsigned n = 0;
        while ((Index{1} << n) < dim) ++n;
        if ((Index{1} << n) != dim) throw ValidationError("scan dimension " + std::to_string(dim) + " is not a power of two for a spin chain");
        m.sites = n;
      }
      return build_hamiltonian(model_spec(m));
    };
    const Index sectors = obs.sector_count();
    std::vector<double> values(obs.values().data(), obs.values().data() + sectors);
    const auto spec_for = [&](Index dim) {
      if (sectors == d) return SpectrumAssignment::nondegenerate(dim);
      return SpectrumAssignment::degenerate(dim, sectors, values);
    };
    const HubMethod method = s.hub ? hub_method(c.observable) : HubMethod{FourierMethod{}};
    const auto fit = stage("scaling scan", [&] { return offdiag_scaling(dims, model_for, spec_for, method, derive_seed(seed, "scan"), c.pairs); });
    double worst = 0.0;
    for (const auto& p : fit.points) {
      scaling.row(p.dim, p.std_re, p.std_im);
      worst = std::max({worst, std::abs(p.std_re / p.predicted - 1.0), std::abs(p.std_im / p.predicted - 1.0)});
    }
    r["scaling"] = {{"slope", fit.fit.slope}, {"slope_stderr", fit.fit.slope_stderr}, {"degenerate_data", fit.degenerate_data}, {"worst_relative_std", worst}};
    const bool slope_ok = !fit.degenerate_data && fit.fit.slope >= -0.6 && fit.fit.slope <= -0.4;
    rec.verdicts.push_back({"scaling_slope", slope_ok ? VerdictKind::pass : VerdictKind::fail, "slope " + fmt_double(fit.fit.slope)});
    rec.verdicts.push_back(threshold("scaling_std", worst, c.tolerances.at("std_relative")));
  } else {
    rec.verdicts.push_back(skipped("scaling_slope", "no scan dimensions given"));
  }

  Json verdicts = Json::object();
  for (const auto& v : rec.verdicts) verdicts[v.check] = to_string(v.kind);
  r["verdicts"] = verdicts;
  out.write("diagonal.csv", diag.str(), rec.manifest);
  out.write("offdiag.csv", off.str(), rec.manifest);
  out.write("scaling.csv", scaling.str(), rec.manifest);
  out.write("summary.json", r.dump(2) + "\n", rec.manifest);
  rec.report.push_back("D = " + std::to_string(d) + ", max |O_aa - Tr O/D| " + fmt_double(dc.max_deviation));
}

/// Number of acceptance criteria evaluated concurrently.
inline unsigned lab_threads() {
  const char* v = std::getenv("HUO_LAB_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  const unsigned long n = std::strtoul(v, &end, 10);
  if (*end != '\0' || n == 0 || n > 256) throw ConfigError({"HUO_LAB_THREADS must be an integer in 1..256, got '" + std::string(v) + "'"});
  return static_cast<unsigned>(n);
}

inline void run_acceptance(const ExperimentConfig& c, RunRecord& rec, exp_detail::Output& out) {
  AcceptanceContext ctx;
  ctx.seed = c.seed;
  ctx.tol = c.tolerances;
  std::vector<int> ids = c.criteria;
  if (ids.empty())
    for (int i = 1; i <= static_cast<int>(acceptance_checks().size()); ++i) ids.push_back(i);

  std::vector<CheckResult> results(ids.size());
  const unsigned threads = lab_threads();
  for (std::size_t start = 0; start < ids.size(); start += threads) {
    std::vector<std::future<CheckResult>> batch;
    for (std::size_t i = start; i < std::min(ids.size(), start + threads); ++i)
      batch.push_back(std::async(threads > 1 ? std::launch::async : std::launch::deferred, [&, i] { return run_check(ids[i], ctx); }));
    for (std::size_t i = 0; i < batch.size(); ++i) results[start + i] = batch[i].get();
  }

  CsvTable verdicts({"id", "name", "pass"});
  CsvTable metrics({"id", "metric", "value"});
  Json checks = Json::array();
  for (const auto& r : results) {
    rec.verdicts.push_back({"#" + std::to_string(r.id) + " " + r.name, r.pass ? VerdictKind::pass : VerdictKind::fail, r.detail});
    rec.report.push_back(format_check_line(r));
    verdicts.row(r.id, r.name, r.pass);
    Json m = Json::object();
    for (const auto& x : r.metrics) {
      metrics.row(r.id, x.name, x.value);
      m[x.name] = x.value;
    }
    checks.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"seconds", r.seconds}, {"time_limit", r.time_limit}, {"metrics", m}});
  }
  rec.result = {{"criteria", checks}};
  out.write("acceptance.csv", verdicts.str(), rec.manifest);
  out.write("metrics.csv", metrics.str(), rec.manifest);
}

// ---------------------------------------------------------------------------

/// Runs the configured experiment. Outputs are staged and moved into place
/// only after every stage succeeded; run.json carries the RunRecord.
inline RunRecord run(const ExperimentConfig& c) {
  RunRecord rec;
  rec.kind = to_string(c.kind);
  rec.config_hash = sha256_hex(c.canonical);
  rec.seed = c.seed;
  rec.started_at = exp_detail::timestamp_utc();
  const auto t0 = std::chrono::steady_clock::now();

  std::string file_ext;
  if (c.kind == ExperimentKind::maximize) file_ext = ".json";
  if (c.kind == ExperimentKind::evolve) file_ext = ".csv";
  exp_detail::Output out;
  exp_detail::open_output(out, c, file_ext);

  switch (c.kind) {
    case ExperimentKind::mub: run_mub(c, rec, out); break;
    case ExperimentKind::huo: run_huo(c, rec, out); break;
    case ExperimentKind::entropy: run_entropy(c, rec, out); break;
    case ExperimentKind::maximize: run_maximize(c, rec, out); break;
    case ExperimentKind::evolve: run_evolve(c, rec, out); break;
    case ExperimentKind::eth: run_eth(c, rec, out); break;
    case ExperimentKind::acceptance: run_acceptance(c, rec, out); break;
  }
  rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  if (out.dir) {
    rec.output = out.dir->target();
    out.dir->write("run.json", rec.to_json().dump(2) + "\n");
    out.dir->commit();
  } else if (out.file) {
    rec.output = *out.file;
    for (const auto& [p, body] : out.pending) write_file_atomic(p, body);
    fs::path record = *out.file;
    record += ".run.json";
    write_file_atomic(record, rec.to_json().dump(2) + "\n");
  }
  return rec;
}

}  // namespace huo::lab
