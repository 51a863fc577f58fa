#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "lab/config.hpp"
#include "lab/experiments.hpp"
#include "lab/golden.hpp"

using namespace huo;
using namespace huo::lab;

namespace {

ExperimentConfig cfg(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> errors;
  const RawConfig raw = parse_raw_config(in, "test.cfg", errors);
  return build_config(raw, errors);
}

std::vector<std::string> config_errors(const std::string& text) {
  try {
    cfg(text);
  } catch (const ConfigError& e) {
    return e.messages();
  }
  return {};
}

bool any_contains(const std::vector<std::string>& msgs, const std::string& needle) {
  return std::any_of(msgs.begin(), msgs.end(), [&](const std::string& m) { return m.find(needle) != std::string::npos; });
}

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() / ("huo-lab-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream out(p);
  out << s;
}

std::string mub_config(const fs::path& out, int dim = 4) {
  return "[experiment]\nkind = mub\nseed = 3\nout = " + out.string() + "\n[mub]\ndim = " + std::to_string(dim) + "\n";
}

const char* kIsing = "[model]\ntype = ising\nsites = 4\ncoupling = 1\nfield = 0.9045\nlongitudinal = 0.809\n";

}  // namespace

// ---------------------------------------------------------------- config

TEST(Config, MinimalMubConfigGetsDefaults) {
  const auto c = cfg("[experiment]\nkind = mub\n[mub]\ndim = 8\n");
  EXPECT_EQ(c.kind, ExperimentKind::mub);
  EXPECT_EQ(c.mub_dim, 8u);
  EXPECT_EQ(c.seed, 0u);
  EXPECT_FALSE(c.out.has_value());
  EXPECT_EQ(c.tolerances.at("golden"), 1e-9);
  EXPECT_EQ(c.starts, 4u);
}

TEST(Config, NonPositiveDeltaRejected) {
  const auto msgs = config_errors(std::string("[experiment]\nkind = evolve\n") + kIsing + "[shell]\ndelta = 0\n");
  EXPECT_TRUE(any_contains(msgs, "delta must be positive"));
}

TEST(Config, UnknownModelSuggestsNearest) {
  const auto msgs = config_errors("[experiment]\nkind = huo\n[model]\ntype = ising3d\nsites = 3\n");
  EXPECT_TRUE(any_contains(msgs, "'ising3d'"));
  EXPECT_TRUE(any_contains(msgs, "did you mean 'ising'"));
}

TEST(Config, UnknownKeyAndSectionSuggestNearest) {
  const auto msgs = config_errors("[experiment]\nkind = mub\n[mub]\ndimm = 4\n[shel]\ndelta = 1\n");
  EXPECT_TRUE(any_contains(msgs, "unknown key 'mub.dimm'"));
  EXPECT_TRUE(any_contains(msgs, "did you mean 'mub.dim'"));
  EXPECT_TRUE(any_contains(msgs, "did you mean [shell]"));
  EXPECT_TRUE(any_contains(msgs, "test.cfg:4"));
}

TEST(Config, AllErrorsReportedTogether) {
  const auto msgs = config_errors("[experiment]\nkind = maximize\nseed = x\n[model]\ntype = ising\n[shell]\ndelta = -1\n");
  EXPECT_TRUE(any_contains(msgs, "not a valid non-negative integer"));
  EXPECT_TRUE(any_contains(msgs, "missing required field model.sites"));
  EXPECT_TRUE(any_contains(msgs, "missing required field maximize.energy"));
  EXPECT_TRUE(any_contains(msgs, "delta must be positive"));
  EXPECT_GE(msgs.size(), 4u);
}

TEST(Config, MissingKindAndRequiredFields) {
  EXPECT_TRUE(any_contains(config_errors("[mub]\ndim = 4\n"), "missing required field experiment.kind"));
  EXPECT_TRUE(any_contains(config_errors("[experiment]\nkind = mub\n"), "missing required field mub.dim"));
  EXPECT_TRUE(any_contains(config_errors("[experiment]\nkind = huo\n"), "[model]"));
  EXPECT_TRUE(any_contains(config_errors("[experiment]\nkind = eth\n[model]\ntype = random\ndim = 8\n[eth]\nscan_dims = 8,16\n"),
                           "at least 4"));
}

TEST(Config, TolerancesAndRanges) {
  const auto c = cfg("[experiment]\nkind = eth\n[model]\ntype = random\ndim = 64\n[eth]\nscan_dims = 64..512\n"
                     "[tolerances]\ngolden = 1e-6\n");
  EXPECT_EQ(c.scan_dims, (std::vector<std::size_t>{64, 128, 256, 512}));
  EXPECT_EQ(c.tolerances.at("golden"), 1e-6);
  EXPECT_TRUE(any_contains(config_errors("[experiment]\nkind = mub\n[mub]\ndim = 4\n[tolerances]\ngoldn = 1\n"),
                           "did you mean 'golden'"));
}

TEST(Config, ShippedConfigsParse) {
  for (const auto& e : fs::directory_iterator(HUO_CONFIG_DIR)) {
    if (e.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(parse_config(e.path())) << e.path();
  }
}

// ---------------------------------------------------------------- golden

TEST(Golden, IdenticalPerturbedAndNoise) {
  TempDir tmp;
  fs::create_directories(tmp / "golden");
  fs::create_directories(tmp / "run");
  const std::string base = "a,b,label\n1.0,2.0,x\n3.0,4.0,y\n";
  write_text(tmp / "golden" / "t.csv", base);
  write_text(tmp / "run" / "t.csv", base);
  auto rep = compare_golden(tmp / "run", tmp / "golden");
  EXPECT_TRUE(rep.pass());
  EXPECT_EQ(rep.diff_count(), 0u);

  write_text(tmp / "run" / "t.csv", "a,b,label\n1.0000000000001,2.0,x\n3.0,4.0,y\n");
  EXPECT_TRUE(compare_golden(tmp / "run", tmp / "golden").pass());

  write_text(tmp / "run" / "t.csv", "a,b,label\n1.0,2.0,x\n3.0,4.5,y\n");
  rep = compare_golden(tmp / "run", tmp / "golden");
  ASSERT_EQ(rep.diff_count(), 1u);
  const auto& d = rep.files[0].diffs[0];
  EXPECT_EQ(d.row, 1u);
  EXPECT_EQ(d.column, "b");
  EXPECT_NEAR(d.abs_error, 0.5, 1e-12);
  EXPECT_NE(format_diff(d).find("column 'b'"), std::string::npos);

  GoldenTolerances loose;
  loose.per_column["b"] = 0.2;
  EXPECT_TRUE(compare_golden(tmp / "run", tmp / "golden", loose).pass());

  write_text(tmp / "run" / "t.csv", "a,b,label\n1.0,2.0,z\n3.0,4.0,y\n");
  EXPECT_FALSE(compare_golden(tmp / "run", tmp / "golden").pass());
}

TEST(Golden, SchemaDriftRowCountAndMissingFile) {
  TempDir tmp;
  fs::create_directories(tmp / "golden");
  fs::create_directories(tmp / "run");
  write_text(tmp / "golden" / "t.csv", "a,b\n1,2\n");
  write_text(tmp / "run" / "t.csv", "a,c\n1,2\n");
  EXPECT_THROW(compare_golden(tmp / "run", tmp / "golden"), SchemaError);

  write_text(tmp / "run" / "t.csv", "a,b\n1,2\n3,4\n");
  auto rep = compare_golden(tmp / "run", tmp / "golden");
  EXPECT_FALSE(rep.pass());
  EXPECT_NE(rep.files[0].reason.find("row count"), std::string::npos);

  write_text(tmp / "golden" / "u.csv", "a\n1\n");
  rep = compare_golden(tmp / "run", tmp / "golden");
  ASSERT_EQ(rep.files.size(), 2u);
  EXPECT_EQ(rep.files[1].reason, "missing from run output");
  EXPECT_THROW(compare_golden(tmp / "run", tmp / "nope"), ValidationError);
}

// ---------------------------------------------------------------- run

TEST(Run, MubIsDeterministic) {
  TempDir tmp;
  const auto a = run(cfg(mub_config(tmp / "a")));
  const auto b = run(cfg(mub_config(tmp / "b")));
  ASSERT_EQ(a.manifest.size(), b.manifest.size());
  ASSERT_FALSE(a.manifest.empty());
  for (std::size_t i = 0; i < a.manifest.size(); ++i) {
    EXPECT_EQ(a.manifest[i].file, b.manifest[i].file);
    EXPECT_EQ(a.manifest[i].sha256, b.manifest[i].sha256);
    EXPECT_EQ(sha256_file(tmp / "a" / a.manifest[i].file), a.manifest[i].sha256);
  }
  EXPECT_TRUE(fs::exists(tmp / "a" / "run.json"));
  EXPECT_TRUE(a.all_pass());
  EXPECT_EQ(a.config_hash.size(), 64u);
}

TEST(Run, HuoThenEthIsDeterministic) {
  TempDir tmp;
  const std::string huo_cfg = std::string("[experiment]\nkind = huo\nseed = 4\nout = ") + (tmp / "h1").string() + "\n" + kIsing +
                              "[observable]\nhub = random-hadamard\nspectrum = degenerate\nsectors = 4\n";
  const auto h1 = run(cfg(huo_cfg));
  EXPECT_TRUE(h1.all_pass());
  auto h2cfg = cfg(huo_cfg);
  h2cfg.out = (tmp / "h2").string();
  run(h2cfg);
  EXPECT_TRUE(compare_golden(tmp / "h2", tmp / "h1").pass());
  EXPECT_EQ(sha256_file(tmp / "h1" / "phases.csv"), sha256_file(tmp / "h2" / "phases.csv"));

  const auto eth = run(cfg("[experiment]\nkind = eth\nseed = 2\nout = " + (tmp / "e").string() +
                           "\n[observable]\npath = " + (tmp / "h1").string() + "\n"));
  EXPECT_FALSE(eth.verdicts.empty());
  EXPECT_TRUE(fs::exists(tmp / "e" / "offdiag.csv"));
}

TEST(Run, MaximizeFromStoredObservableWritesFileOutputs) {
  TempDir tmp;
  run(cfg(std::string("[experiment]\nkind = huo\nout = ") + (tmp / "h").string() + "\n" + kIsing));
  const auto rec = run(cfg("[experiment]\nkind = maximize\nout = " + (tmp / "eq.json").string() +
                           "\n[observable]\npath = " + (tmp / "h").string() + "\n[maximize]\nenergy = -1.0\n"));
  EXPECT_TRUE(rec.all_pass());
  EXPECT_TRUE(fs::exists(tmp / "eq.json"));
  EXPECT_TRUE(fs::exists(tmp / "eq.json.run.json"));
  EXPECT_TRUE(fs::exists(tmp / "eq_distribution.csv"));
  EXPECT_NEAR(rec.result["entropy"].get<double>(), std::log(16.0), 1e-8);
}

TEST(Run, EntropyOfStoredStateInTwoBases) {
  TempDir tmp;
  const auto fam = generate_mub_family(4);
  Rng rng(2);
  const CVector psi = rng.random_state(4);
  {
    std::ofstream os(tmp / "rho.dump");
    write_matrix_dump(os, psi * psi.adjoint());
  }
  for (int b : {0, 1}) {
    std::ofstream os(tmp / ("b" + std::to_string(b) + ".dump"));
    write_matrix_dump(os, fam.basis_matrix(static_cast<std::size_t>(b)));
  }
  const auto rec = run(cfg("[experiment]\nkind = entropy\nout = " + (tmp / "out").string() + "\n[entropy]\nstate = " +
                           (tmp / "rho.dump").string() + "\nbasis = " + (tmp / "b0.dump").string() +
                           "\nbasis2 = " + (tmp / "b1.dump").string() + "\n"));
  EXPECT_TRUE(rec.all_pass());
  double h = 0.0;
  for (Index k = 0; k < 4; ++k) {
    const double p = std::norm(psi(k));
    h -= p * std::log(p);
  }
  EXPECT_NEAR(rec.result["H"].get<double>(), h, 1e-12);
}

TEST(Run, DimensionAboveCapFailsBeforeAllocationAndLeavesNoOutput) {
  TempDir tmp;
  const auto c = cfg("[experiment]\nkind = eth\nout = " + (tmp / "big").string() +
                     "\n[model]\ntype = random\ndim = 100000\n");
  try {
    run(c);
    FAIL() << "expected a StageError";
  } catch (const StageError& e) {
    EXPECT_TRUE(e.input_error());
    EXPECT_NE(std::string(e.what()).find("cap"), std::string::npos) << e.what();
  }
  EXPECT_FALSE(fs::exists(tmp / "big"));
  EXPECT_TRUE(fs::is_empty(tmp.path()));
}

TEST(Run, FailedRunKeepsPreviousOutput) {
  TempDir tmp;
  run(cfg(mub_config(tmp / "m")));
  const std::string before = sha256_file(tmp / "m" / "run.json");
  EXPECT_THROW(run(cfg(mub_config(tmp / "m", 6))), StageError);
  EXPECT_EQ(sha256_file(tmp / "m" / "run.json"), before);
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(tmp.path())) ++entries;
  EXPECT_EQ(entries, 1u);
}

TEST(Run, AcceptanceSubsetRecordsOneVerdictPerCriterion) {
  TempDir tmp;
  const auto rec = run(cfg("[experiment]\nkind = acceptance\nseed = 20240611\nout = " + (tmp / "acc").string() +
                           "\n[acceptance]\ncriteria = 1, 6, 10, 12\n"));
  ASSERT_EQ(rec.verdicts.size(), 4u);
  EXPECT_EQ(rec.verdicts[0].check.rfind("#1 ", 0), 0u);
  EXPECT_EQ(rec.verdicts[3].check.rfind("#12 ", 0), 0u);
  EXPECT_TRUE(rec.all_pass());
  const auto csv = read_csv(tmp / "acc" / "acceptance.csv");
  EXPECT_EQ(csv.rows.size(), 4u);
}

TEST(Run, FullAcceptanceSuiteRecordsTwelveVerdicts) {
  TempDir tmp;
  const auto rec = run(cfg("[experiment]\nkind = acceptance\nseed = 20240611\nout = " + (tmp / "acc").string() + "\n"));
  ASSERT_EQ(rec.verdicts.size(), 12u);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(rec.verdicts[static_cast<std::size_t>(i)].check.rfind("#" + std::to_string(i + 1) + " ", 0), 0u);
  EXPECT_EQ(rec.result["criteria"].size(), 12u);
}

// ---------------------------------------------------------------- cli

#ifdef HUO_LAB_BINARY

namespace {

int cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(HUO_LAB_BINARY) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) { return read_file(p); }

}  // namespace

TEST(Cli, VersionAndUsageErrors) {
  TempDir tmp;
  const auto log = tmp / "log";
  EXPECT_EQ(cli("--version", log), 0);
  EXPECT_NE(slurp(log).find(HUO_LAB_VERSION), std::string::npos);
  EXPECT_EQ(cli("", log), 2);
  EXPECT_EQ(cli("mub --bogus 1", log), 2);
  EXPECT_EQ(cli("frobnicate", log), 2);
}

TEST(Cli, ConfigErrorsExitTwo) {
  TempDir tmp;
  const auto log = tmp / "log";
  write_text(tmp / "bad.cfg", "[experiment]\nkind = huo\n[model]\ntype = ising3d\nsites = 3\n");
  EXPECT_EQ(cli("huo --config " + (tmp / "bad.cfg").string(), log), 2);
  EXPECT_NE(slurp(log).find("did you mean 'ising'"), std::string::npos);
  write_text(tmp / "m.cfg", mub_config(tmp / "x"));
  EXPECT_EQ(cli("huo --config " + (tmp / "m.cfg").string(), log), 2);
  EXPECT_NE(slurp(log).find("subcommand"), std::string::npos);
  EXPECT_EQ(cli("mub --dim 4 --tol nonsense", log), 2);
}

TEST(Cli, UnsupportedDimensionIsAnInputError) {
  TempDir tmp;
  EXPECT_EQ(cli("mub --dim 6 --out " + (tmp / "m").string(), tmp / "log"), 2);
  EXPECT_NE(slurp(tmp / "log").find("stage"), std::string::npos);
  EXPECT_FALSE(fs::exists(tmp / "m"));
}

TEST(Cli, RunWritesOutputsAndComparesGolden) {
  TempDir tmp;
  const auto log = tmp / "log";
  write_text(tmp / "model.cfg", kIsing);
  const std::string common = "huo --hamiltonian " + (tmp / "model.cfg").string() + " --method random-hadamard:3 --spectrum degenerate:4";
  ASSERT_EQ(cli(common + " --out " + (tmp / "g").string(), log), 0) << slurp(log);
  EXPECT_TRUE(fs::exists(tmp / "g" / "phases.csv"));
  EXPECT_TRUE(fs::exists(tmp / "g" / "observable.json"));
  EXPECT_EQ(cli(common + " --out " + (tmp / "r").string() + " --golden " + (tmp / "g").string(), log), 0) << slurp(log);
  EXPECT_EQ(cli(common + " --seed 9 --out " + (tmp / "r").string() + " --golden " + (tmp / "g").string(), log), 0);

  auto csv = read_csv(tmp / "g" / "phases.csv");
  const std::size_t last = csv.columns.size() - 1;
  csv.rows[0][last] = "999";
  auto join = [](const std::vector<std::string>& cells) {
    std::string line;
    for (const auto& c : cells) line += (line.empty() ? "" : ",") + c;
    return line + "\n";
  };
  std::string text = join(csv.columns);
  for (const auto& row : csv.rows) text += join(row);
  write_text(tmp / "g" / "phases.csv", text);
  EXPECT_EQ(cli(common + " --out " + (tmp / "r").string() + " --golden " + (tmp / "g").string(), log), 1);
  EXPECT_NE(slurp(log).find("golden diff: phases.csv row 0 column '" + csv.columns[last] + "'"), std::string::npos)
      << slurp(log);
}

TEST(Cli, JsonRecordAndFileModeOutput) {
  TempDir tmp;
  const auto log = tmp / "log";
  write_text(tmp / "model.cfg", kIsing);
  ASSERT_EQ(cli("maximize --hamiltonian " + (tmp / "model.cfg").string() + " --energy -2 --json --out " +
                    (tmp / "eq.json").string(),
                log),
            0)
      << slurp(log);
  const auto j = Json::parse(slurp(log));
  EXPECT_EQ(j["kind"], "maximize");
  EXPECT_EQ(j["verdicts"].size(), 4u);
  EXPECT_TRUE(fs::exists(tmp / "eq.json"));
  EXPECT_EQ(cli("maximize --hamiltonian " + (tmp / "model.cfg").string() + " --energy 99", log), 2);
}

#endif
