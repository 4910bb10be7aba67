#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "rmap/chain.hpp"
#include "rmap/helmholtz.hpp"
#include "rmap/samplers.hpp"

namespace rmap {

// Unreadable config, unknown key, malformed value, or an output collision
// caught before any compute. The CLI maps this to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ProblemKind { J1, J2, Helmholtz };
enum class Method { Rmap, Rto, Sn, Dram, CostTable };

// Weighting/Metropolization treatment of an rMAP proposal stream.
enum class Debias {
  None,
  Simplified,    // accept/reject with the sqrt determinant ratio
  Full,          // accept/reject with the full 1d factor (scalar problems)
  Weights,       // keep every sample, store -log|J|/2 importance weights
  WeightsFull,   // full 1d importance weights (scalar problems)
};

// One experiment: a problem, a sampler, a seed, an output directory.
// Parsed from `key = value` lines with '#' comments; the schema rejects
// unknown keys, duplicate keys, and keys that do not apply to the selected
// problem or method.
struct ExperimentConfig {
  ProblemKind problem = ProblemKind::J1;
  Method method = Method::Rmap;
  std::string name;  // output stem, default "<problem>-<method>"
  int n = 1000;
  std::uint64_t seed = 0;
  int workers = 1;
  std::string output;  // empty = current directory (CLI substitutes the env root)

  StartStrategy start = StartStrategy::PriorPoint;
  Debias metropolize = Debias::None;
  SolverKind solver = SolverKind::Trincg;
  SolverConfig solver_cfg;

  RtoVariant rto_variant = RtoVariant::Qr;
  DramOptions dram;

  HelmholtzConfig helmholtz;
  std::uint64_t case_seed = 0;  // synthetic-case stream, separate from `seed`
};

ExperimentConfig parse_config(std::istream& in);
ExperimentConfig parse_config_file(const std::string& path);

// Sorted `key = value` lines with defaults materialized; only keys that
// apply to the config appear, so the text is independent of comments and
// key order in the source file.
std::string canonical_text(const ExperimentConfig& cfg);

// FNV-1a over the canonical text minus the `output` line (the output
// directory is not part of the experiment identity). 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

struct RunResult {
  int status = 0;  // 0 ok, 1 sampler/solver failure (partial outputs flushed)
  std::string base;  // <output>/<name>-<hash>-seed<seed>
  std::vector<std::string> files;
  std::string error;
};

// Runs the experiment and writes, under cfg.output:
//   <base>.meta.json + <base>.samples.csv   chain (per combo for cost-table)
//   <base>.stats.json                       moments, IACT/ESS, counters
//   <base>.hist.csv                         plot data (scalar problems)
//   <base>.cost-table.csv                   solve counts (cost-table method)
//   <base>.manifest.json                    config hash, seed, counters
// Throws ConfigError before any compute when a target file exists and
// force is false. Sampler failures flush the manifest (status "failed")
// and report status 1 instead of throwing.
RunResult run_experiment(const ExperimentConfig& cfg, bool force,
                         std::ostream& log);

// Side-by-side chain comparison. All chains must share the parameter
// dimension (std::invalid_argument otherwise). For scalar chains the
// report carries pairwise TV distances on a common binning, plus each
// chain's TV to the exact density when its config names an analytical
// problem. Weighted chains (any nonzero log_weight) use their weights.
struct CompareColumn {
  std::string path;
  std::string method;
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double acceptance_rate = 1;
  Vector mean;
  Vector variance;
  double mean_iact = 0;
  double ess = 0;
  double weighted_ess = 0;
  double mean_iterations = 0;
  Counters solves;
  double tv_exact = 0;  // NaN when no exact reference applies
};
struct CompareReport {
  std::vector<CompareColumn> columns;
  Matrix pairwise_tv;  // scalar chains only, else 0x0
  std::string text;
};
CompareReport compare_chains(const std::vector<std::string>& bases);

// Fast oracle self-tests (derivative checks on a small Helmholtz case,
// linear-Gaussian exactness, quadrature self-consistency, rMAP/RTO linear
// agreement). Prints one line per check; returns false if any fails.
bool run_self_checks(std::ostream& out);

}  // namespace rmap
