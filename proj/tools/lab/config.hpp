#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "huo/errors.hpp"

namespace huo::lab {

// ---------------------------------------------------------------------------
// Raw key/value store: "[section]" headers, "key = value" lines, '#' comments.

struct RawEntry {
  std::string value;
  std::string origin;  // "file:line" or "--flag"
};

using RawSection = std::map<std::string, RawEntry>;
using RawConfig = std::map<std::string, RawSection>;

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline RawConfig parse_raw_config(std::istream& in, const std::string& name, std::vector<std::string>& errors) {
  RawConfig cfg;
  std::string section;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    if (line.front() == '[') {
      if (line.back() != ']') {
        errors.push_back(where + ": malformed section header '" + line + "'");
        continue;
      }
      section = trim(line.substr(1, line.size() - 2));
      cfg[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back(where + ": expected 'key = value', got '" + line + "'");
      continue;
    }
    if (section.empty()) {
      errors.push_back(where + ": key outside of any [section]");
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    auto& sec = cfg[section];
    if (sec.count(key)) errors.push_back(where + ": duplicate key '" + section + "." + key + "'");
    sec[key] = {trim(line.substr(eq + 1)), where};
  }
  return cfg;
}

inline RawConfig read_raw_config(const std::filesystem::path& path, std::vector<std::string>& errors) {
  std::ifstream in(path);
  if (!in) {
    errors.push_back("cannot read config file '" + path.string() + "'");
    return {};
  }
  return parse_raw_config(in, path.string(), errors);
}

/// Entries of `overlay` replace those of `base`.
inline void merge_into(RawConfig& base, const RawConfig& overlay) {
  for (const auto& [sec, entries] : overlay)
    for (const auto& [k, v] : entries) base[sec][k] = v;
}

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> prev(b.size() + 1);
  std::vector<std::size_t> cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u)});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

inline std::string nearest(const std::string& word, const std::vector<std::string>& candidates) {
  std::string best;
  std::size_t best_d = SIZE_MAX;
  for (const auto& c : candidates) {
    const auto d = levenshtein(word, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------

enum class ExperimentKind { mub, huo, entropy, maximize, evolve, eth, acceptance };

inline const std::vector<std::string>& experiment_kind_names() {
  static const std::vector<std::string> names = {"mub", "huo", "entropy", "maximize", "evolve", "eth", "acceptance"};
  return names;
}

inline std::string to_string(ExperimentKind k) { return experiment_kind_names()[static_cast<std::size_t>(k)]; }

struct ModelConfig {
  std::string type;  // ising | xxz | random
  unsigned sites = 0;
  double coupling = 1.0;
  double field = 1.0;
  double longitudinal = 0.0;
  double anisotropy = 1.0;
  std::size_t dim = 0;
  std::uint64_t seed = 0;
};

struct ObservableConfig {
  std::optional<std::string> path;  // previously written observable directory
  std::string hub = "fourier";      // fourier | mub | random-hadamard
  std::size_t mub_index = 1;
  std::uint64_t hub_seed = 0;
  std::string spectrum = "nondegenerate";  // nondegenerate | degenerate | custom
  std::size_t sectors = 0;
  std::vector<double> values;
  std::vector<std::size_t> multiplicities;
};

struct ShellConfig {
  std::optional<double> center;
  std::optional<double> delta;
  std::size_t min_levels = 3;
};

struct StateConfig {
  std::string profile = "uniform";  // uniform | gaussian | random | eigenstate
  std::optional<double> sigma;
  std::uint64_t seed = 0;
  std::size_t index = 0;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::acceptance;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
  std::optional<ModelConfig> model;
  ObservableConfig observable;
  ShellConfig shell;
  StateConfig state;
  std::optional<double> energy;
  std::size_t starts = 4;
  std::size_t max_iterations = 100000;
  double tmin = 1e-2;
  double tmax = 1e4;
  std::size_t points = 200;
  std::vector<std::size_t> scan_dims;
  std::size_t pairs = 10000;
  std::optional<double> smearing;
  std::size_t mub_dim = 0;
  std::optional<std::string> entropy_state;
  std::optional<std::string> entropy_basis;
  std::optional<std::string> entropy_basis2;
  std::optional<std::string> entropy_manifest;
  std::map<std::string, double> tolerances;
  std::vector<int> criteria;
  std::string canonical;  // normalized text used for the config hash
};

/// Tolerance names accepted under [tolerances] / --tol.
inline const std::map<std::string, double>& default_tolerances() {
  static const std::map<std::string, double> t = {
      {"mub_deviation", 1e-10},   {"diagonal_constancy", 1e-10}, {"std_relative", 0.1},
      {"uncertainty", 1e-10},     {"ee1", 1e-10},                {"ee2", 1e-8},
      {"uniform_sectors", 1e-8},  {"derivative_relative", 1e-5}, {"commuting_derivative", 1e-10},
      {"entropy_oracle", 1e-6},   {"linear_gap", 1e-6},          {"maximality", 1e-8},
      {"entropy_identity", 1e-10}, {"gibbs", 1e-10},             {"de_mc", 1e-10},
      {"time_average_relative", 0.05}, {"golden", 1e-9}};
  return t;
}

namespace detail {

struct Schema {
  std::map<std::string, std::vector<std::string>> keys = {
      {"experiment", {"kind", "seed", "out"}},
      {"model", {"type", "sites", "coupling", "field", "longitudinal", "anisotropy", "dim", "seed"}},
      {"observable", {"path", "hub", "mub_index", "hub_seed", "spectrum", "sectors", "values", "multiplicities"}},
      {"shell", {"center", "delta", "min_levels"}},
      {"state", {"profile", "sigma", "seed", "index"}},
      {"maximize", {"energy", "starts", "max_iterations"}},
      {"evolve", {"tmin", "tmax", "points"}},
      {"eth", {"scan_dims", "pairs", "smearing"}},
      {"mub", {"dim"}},
      {"entropy", {"state", "basis", "basis2", "manifest"}},
      {"tolerances", {}},
      {"acceptance", {"criteria"}},
  };

  std::vector<std::string> sections() const {
    std::vector<std::string> s;
    for (const auto& [k, v] : keys) s.push_back(k);
    return s;
  }
};

class Reader {
 public:
  Reader(const RawConfig& raw, std::vector<std::string>& errors) : raw_(raw), errors_(errors) {}

  const RawEntry* find(const std::string& sec, const std::string& key) const {
    const auto s = raw_.find(sec);
    if (s == raw_.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  }

  bool has(const std::string& sec, const std::string& key) const { return find(sec, key) != nullptr; }

  template <class T>
  std::optional<T> get(const std::string& sec, const std::string& key) const {
    const RawEntry* e = find(sec, key);
    if (!e) return std::nullopt;
    T v{};
    if (!parse(e->value, v)) {
      errors_.push_back(e->origin + ": " + sec + "." + key + " = '" + e->value + "' is not a valid " + type_name<T>());
      return std::nullopt;
    }
    return v;
  }

  std::optional<std::vector<double>> get_doubles(const std::string& sec, const std::string& key) const {
    const RawEntry* e = find(sec, key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    for (const auto& part : split_list(e->value)) {
      double v = 0.0;
      if (!parse(part, v)) {
        errors_.push_back(e->origin + ": " + sec + "." + key + " has non-numeric entry '" + part + "'");
        return std::nullopt;
      }
      out.push_back(v);
    }
    return out;
  }

  /// Comma list; "a..b" expands to powers of two from a to b.
  std::optional<std::vector<std::size_t>> get_sizes(const std::string& sec, const std::string& key) const {
    const RawEntry* e = find(sec, key);
    if (!e) return std::nullopt;
    std::vector<std::size_t> out;
    for (const auto& part : split_list(e->value)) {
      const auto dots = part.find("..");
      if (dots != std::string::npos) {
        std::uint64_t lo = 0;
        std::uint64_t hi = 0;
        if (!parse(part.substr(0, dots), lo) || !parse(part.substr(dots + 2), hi) || lo == 0 || hi < lo) {
          errors_.push_back(e->origin + ": " + sec + "." + key + " has malformed range '" + part + "'");
          return std::nullopt;
        }
        for (std::uint64_t d = lo; d <= hi; d *= 2) out.push_back(d);
        continue;
      }
      std::uint64_t v = 0;
      if (!parse(part, v)) {
        errors_.push_back(e->origin + ": " + sec + "." + key + " has non-integer entry '" + part + "'");
        return std::nullopt;
      }
      out.push_back(v);
    }
    return out;
  }

  void error(const std::string& msg) const { errors_.push_back(msg); }

  std::string origin(const std::string& sec, const std::string& key) const {
    const RawEntry* e = find(sec, key);
    return e ? e->origin : sec + "." + key;
  }

 private:
  static std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(trim(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!trim(cur).empty() || !out.empty()) out.push_back(trim(cur));
    return out;
  }

  static bool parse(const std::string& s, double& v) {
    if (s.empty()) return false;
    try {
      std::size_t pos = 0;
      v = std::stod(s, &pos);
      return pos == s.size() && std::isfinite(v);
    } catch (const std::exception&) {
      return false;
    }
  }
  static bool parse(const std::string& s, std::uint64_t& v) {
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    return r.ec == std::errc() && r.ptr == s.data() + s.size() && !s.empty();
  }
  static bool parse(const std::string& s, unsigned& v) {
    std::uint64_t w = 0;
    if (!parse(s, w) || w > UINT32_MAX) return false;
    v = static_cast<unsigned>(w);
    return true;
  }
  static bool parse(const std::string& s, std::string& v) {
    v = s;
    return true;
  }

  template <class T>
  static const char* type_name() {
    if constexpr (std::is_same_v<T, double>) return "number";
    else if constexpr (std::is_same_v<T, std::string>) return "string";
    else return "non-negative integer";
  }

  const RawConfig& raw_;
  std::vector<std::string>& errors_;
};

inline void check_choice(const Reader& r, const std::string& sec, const std::string& key, const std::string& value,
                         const std::vector<std::string>& allowed) {
  if (std::find(allowed.begin(), allowed.end(), value) != allowed.end()) return;
  r.error(r.origin(sec, key) + ": unknown " + sec + "." + key + " '" + value + "' (did you mean '" +
          nearest(value, allowed) + "'?)");
}

inline std::string canonical_text(const RawConfig& raw) {
  std::string s;
  for (const auto& [sec, entries] : raw) {
    s += "[" + sec + "]\n";
    for (const auto& [k, v] : entries) s += k + "=" + v.value + "\n";
  }
  return s;
}

}  // namespace detail

/// Validates a raw configuration; every problem found is reported together.
inline ExperimentConfig build_config(const RawConfig& raw, std::vector<std::string> errors = {}) {
  const detail::Schema schema;
  detail::Reader r(raw, errors);
  ExperimentConfig c;

  for (const auto& [sec, entries] : raw) {
    const auto it = schema.keys.find(sec);
    if (it == schema.keys.end()) {
      const std::string where = entries.empty() ? sec : entries.begin()->second.origin;
      errors.push_back(where + ": unknown section [" + sec + "] (did you mean [" + nearest(sec, schema.sections()) + "]?)");
      continue;
    }
    if (sec == "tolerances") continue;
    for (const auto& [k, v] : entries) {
      if (std::find(it->second.begin(), it->second.end(), k) == it->second.end()) {
        errors.push_back(v.origin + ": unknown key '" + sec + "." + k + "' (did you mean '" + sec + "." +
                         nearest(k, it->second) + "'?)");
      }
    }
  }

  if (auto k = r.get<std::string>("experiment", "kind")) {
    const auto& names = experiment_kind_names();
    const auto pos = std::find(names.begin(), names.end(), *k);
    if (pos == names.end()) detail::check_choice(r, "experiment", "kind", *k, names);
    else c.kind = static_cast<ExperimentKind>(pos - names.begin());
  } else {
    errors.push_back("missing required field experiment.kind");
  }
  c.seed = r.get<std::uint64_t>("experiment", "seed").value_or(0);
  c.out = r.get<std::string>("experiment", "out");

  if (raw.count("model")) {
    ModelConfig m;
    if (auto t = r.get<std::string>("model", "type")) {
      m.type = *t;
      detail::check_choice(r, "model", "type", m.type, {"ising", "xxz", "random"});
    } else {
      errors.push_back("missing required field model.type");
    }
    m.sites = r.get<unsigned>("model", "sites").value_or(0);
    m.coupling = r.get<double>("model", "coupling").value_or(1.0);
    m.field = r.get<double>("model", "field").value_or(m.type == "xxz" ? 0.0 : 1.0);
    m.longitudinal = r.get<double>("model", "longitudinal").value_or(0.0);
    m.anisotropy = r.get<double>("model", "anisotropy").value_or(1.0);
    m.dim = r.get<std::uint64_t>("model", "dim").value_or(0);
    m.seed = r.get<std::uint64_t>("model", "seed").value_or(0);
    if ((m.type == "ising" || m.type == "xxz") && m.sites == 0) {
      errors.push_back("missing required field model.sites (>= 1) for model type '" + m.type + "'");
    }
    if (m.type == "random" && m.dim == 0) errors.push_back("missing required field model.dim (>= 1) for random model");
    if (m.type == "random" && r.has("model", "sites")) errors.push_back(r.origin("model", "sites") + ": model.sites does not apply to the random model");
    if (m.type != "random" && r.has("model", "dim")) errors.push_back(r.origin("model", "dim") + ": model.dim applies only to the random model");
    c.model = m;
  }

  auto& o = c.observable;
  o.path = r.get<std::string>("observable", "path");
  o.hub = r.get<std::string>("observable", "hub").value_or("fourier");
  detail::check_choice(r, "observable", "hub", o.hub, {"fourier", "mub", "random-hadamard"});
  o.mub_index = r.get<std::uint64_t>("observable", "mub_index").value_or(1);
  o.hub_seed = r.get<std::uint64_t>("observable", "hub_seed").value_or(c.seed);
  o.spectrum = r.get<std::string>("observable", "spectrum").value_or("nondegenerate");
  detail::check_choice(r, "observable", "spectrum", o.spectrum, {"nondegenerate", "degenerate", "custom"});
  o.sectors = r.get<std::uint64_t>("observable", "sectors").value_or(0);
  o.values = r.get_doubles("observable", "values").value_or(std::vector<double>{});
  o.multiplicities = r.get_sizes("observable", "multiplicities").value_or(std::vector<std::size_t>{});
  if (o.spectrum == "degenerate" && o.sectors == 0) errors.push_back("observable.sectors (>= 1) is required for a degenerate spectrum");
  if (o.spectrum == "custom" && (o.values.empty() || o.values.size() != o.multiplicities.size())) {
    errors.push_back("custom spectrum needs observable.values and observable.multiplicities of equal nonzero length");
  }
  if (o.path && !std::filesystem::is_directory(*o.path)) errors.push_back("observable.path '" + *o.path + "' does not exist");

  c.shell.center = r.get<double>("shell", "center");
  c.shell.delta = r.get<double>("shell", "delta");
  if (c.shell.delta && !(*c.shell.delta > 0.0)) errors.push_back(r.origin("shell", "delta") + ": delta must be positive");
  c.shell.min_levels = r.get<std::uint64_t>("shell", "min_levels").value_or(3);

  c.state.profile = r.get<std::string>("state", "profile").value_or("uniform");
  detail::check_choice(r, "state", "profile", c.state.profile, {"uniform", "gaussian", "random", "eigenstate"});
  c.state.sigma = r.get<double>("state", "sigma");
  if (c.state.sigma && !(*c.state.sigma > 0.0)) errors.push_back(r.origin("state", "sigma") + ": sigma must be positive");
  c.state.seed = r.get<std::uint64_t>("state", "seed").value_or(c.seed);
  c.state.index = r.get<std::uint64_t>("state", "index").value_or(0);

  c.energy = r.get<double>("maximize", "energy");
  c.starts = r.get<std::uint64_t>("maximize", "starts").value_or(4);
  if (c.starts == 0) errors.push_back(r.origin("maximize", "starts") + ": starts must be >= 1");
  c.max_iterations = r.get<std::uint64_t>("maximize", "max_iterations").value_or(100000);

  c.tmin = r.get<double>("evolve", "tmin").value_or(1e-2);
  c.tmax = r.get<double>("evolve", "tmax").value_or(1e4);
  c.points = r.get<std::uint64_t>("evolve", "points").value_or(200);
  if (!(c.tmin > 0.0) || !(c.tmax > c.tmin)) errors.push_back("evolve: need 0 < tmin < tmax");
  if (c.points < 2) errors.push_back("evolve.points must be >= 2");

  c.scan_dims = r.get_sizes("eth", "scan_dims").value_or(std::vector<std::size_t>{});
  c.pairs = r.get<std::uint64_t>("eth", "pairs").value_or(10000);
  c.smearing = r.get<double>("eth", "smearing");
  if (c.smearing && !(*c.smearing > 0.0)) errors.push_back(r.origin("eth", "smearing") + ": smearing must be positive");

  c.mub_dim = r.get<std::uint64_t>("mub", "dim").value_or(0);

  c.entropy_state = r.get<std::string>("entropy", "state");
  c.entropy_basis = r.get<std::string>("entropy", "basis");
  c.entropy_basis2 = r.get<std::string>("entropy", "basis2");
  c.entropy_manifest = r.get<std::string>("entropy", "manifest");
  for (const auto* p : {&c.entropy_state, &c.entropy_basis, &c.entropy_basis2, &c.entropy_manifest})
    if (*p && !std::filesystem::exists(**p)) errors.push_back("referenced file '" + **p + "' does not exist");

  c.tolerances = default_tolerances();
  if (const auto it = raw.find("tolerances"); it != raw.end()) {
    std::vector<std::string> names;
    for (const auto& [k, v] : default_tolerances()) names.push_back(k);
    for (const auto& [k, e] : it->second) {
      if (!default_tolerances().count(k)) {
        errors.push_back(e.origin + ": unknown tolerance '" + k + "' (did you mean '" + nearest(k, names) + "'?)");
        continue;
      }
      if (auto v = r.get<double>("tolerances", k)) {
        if (!(*v > 0.0)) errors.push_back(e.origin + ": tolerance '" + k + "' must be positive");
        else c.tolerances[k] = *v;
      }
    }
  }

  if (auto list = r.get_sizes("acceptance", "criteria")) {
    for (auto v : *list) {
      if (v < 1 || v > 12) errors.push_back(r.origin("acceptance", "criteria") + ": criterion " + std::to_string(v) + " outside 1..12");
      else c.criteria.push_back(static_cast<int>(v));
    }
  }

  // Kind-specific requirements.
  const bool has_obs_source = o.path.has_value() || c.model.has_value();
  switch (c.kind) {
    case ExperimentKind::mub:
      if (c.mub_dim == 0) errors.push_back("missing required field mub.dim for a mub experiment");
      break;
    case ExperimentKind::huo:
      if (!c.model) errors.push_back("missing required section [model] for a huo experiment");
      break;
    case ExperimentKind::entropy:
      if (!c.entropy_manifest && (!c.entropy_state || !c.entropy_basis)) {
        errors.push_back("entropy experiment needs entropy.state and entropy.basis, or entropy.manifest");
      }
      break;
    case ExperimentKind::maximize:
      if (!has_obs_source) errors.push_back("maximize experiment needs a [model] section or observable.path");
      if (!c.energy) errors.push_back("missing required field maximize.energy");
      break;
    case ExperimentKind::evolve:
      if (!has_obs_source) errors.push_back("evolve experiment needs a [model] section or observable.path");
      break;
    case ExperimentKind::eth:
      if (!has_obs_source) errors.push_back("eth experiment needs a [model] section or observable.path");
      if (!c.scan_dims.empty() && c.scan_dims.size() < 4) errors.push_back("eth.scan_dims needs at least 4 dimensions");
      break;
    case ExperimentKind::acceptance:
      break;
  }

  if (!errors.empty()) throw ConfigError(errors);
  c.canonical = detail::canonical_text(raw);
  return c;
}

inline ExperimentConfig parse_config(const std::filesystem::path& path) {
  std::vector<std::string> errors;
  const RawConfig raw = read_raw_config(path, errors);
  return build_config(raw, std::move(errors));
}

}  // namespace huo::lab
