#include "rmap/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <map>
#include <sstream>

#include "rmap/analytical.hpp"
#include "rmap/diagnostics.hpp"
#include "rmap/linear_problem.hpp"
#include "rmap/optimizer.hpp"

namespace rmap {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kCodeVersion = "1.0.0";
constexpr int kHistBins = 120;
constexpr double kHistLo = -3.0, kHistHi = 3.0;

const char* name_of(ProblemKind p) {
  switch (p) {
    case ProblemKind::J1: return "j1";
    case ProblemKind::J2: return "j2";
    default: return "helmholtz";
  }
}
const char* name_of(Method m) {
  switch (m) {
    case Method::Rmap: return "rmap";
    case Method::Rto: return "rto";
    case Method::Sn: return "sn";
    case Method::Dram: return "dram";
    default: return "cost-table";
  }
}
const char* name_of(Debias d) {
  switch (d) {
    case Debias::None: return "none";
    case Debias::Simplified: return "simplified";
    case Debias::Full: return "full";
    case Debias::Weights: return "weights";
    default: return "weights-full";
  }
}
const char* name_of(RtoVariant v) {
  return v == RtoVariant::Qr ? "qr" : "modified";
}

[[noreturn]] void bad(const std::string& msg) { throw ConfigError(msg); }

ProblemKind problem_from(const std::string& v) {
  if (v == "j1") return ProblemKind::J1;
  if (v == "j2") return ProblemKind::J2;
  if (v == "helmholtz") return ProblemKind::Helmholtz;
  bad("problem must be j1, j2, or helmholtz (got `" + v + "`)");
}
Method method_from(const std::string& v) {
  if (v == "rmap") return Method::Rmap;
  if (v == "rto") return Method::Rto;
  if (v == "sn") return Method::Sn;
  if (v == "dram") return Method::Dram;
  if (v == "cost-table") return Method::CostTable;
  bad("method must be rmap, rto, sn, dram, or cost-table (got `" + v + "`)");
}
StartStrategy start_from(const std::string& v) {
  if (v == "prior-point") return StartStrategy::PriorPoint;
  if (v == "random-draw") return StartStrategy::RandomDraw;
  if (v == "global-1d") return StartStrategy::Global1d;
  if (v == "warm") return StartStrategy::Warm;
  bad("start must be prior-point, random-draw, global-1d, or warm (got `" + v + "`)");
}
Debias debias_from(const std::string& v) {
  if (v == "none") return Debias::None;
  if (v == "simplified") return Debias::Simplified;
  if (v == "full") return Debias::Full;
  if (v == "weights") return Debias::Weights;
  if (v == "weights-full") return Debias::WeightsFull;
  bad("metropolize must be none, simplified, full, weights, or weights-full (got `" + v + "`)");
}
SolverKind solver_from(const std::string& v) {
  if (v == "trincg") return SolverKind::Trincg;
  if (v == "lm") return SolverKind::Lm;
  bad("solver must be trincg or lm (got `" + v + "`)");
}
RtoVariant variant_from(const std::string& v) {
  if (v == "qr") return RtoVariant::Qr;
  if (v == "modified") return RtoVariant::Modified;
  bad("rto_variant must be qr or modified (got `" + v + "`)");
}

long long int_value(const std::string& key, const std::string& v, long long lo,
                    long long hi) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    bad(key + " must be an integer (got `" + v + "`)");
  }
  if (used != v.size()) bad(key + " must be an integer (got `" + v + "`)");
  if (out < lo || out > hi)
    bad(key + " out of range [" + std::to_string(lo) + ", " +
        std::to_string(hi) + "] (got " + v + ")");
  return out;
}
std::uint64_t u64_value(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  std::uint64_t out = 0;
  try {
    out = std::stoull(v, &used);
  } catch (const std::exception&) {
    bad(key + " must be a nonnegative integer (got `" + v + "`)");
  }
  if (used != v.size() || v[0] == '-')
    bad(key + " must be a nonnegative integer (got `" + v + "`)");
  return out;
}
double double_value(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    bad(key + " must be a number (got `" + v + "`)");
  }
  if (used != v.size() || !std::isfinite(out))
    bad(key + " must be a finite number (got `" + v + "`)");
  return out;
}
double positive_value(const std::string& key, const std::string& v) {
  double out = double_value(key, v);
  if (out <= 0) bad(key + " must be positive (got " + v + ")");
  return out;
}
bool bool_value(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad(key + " must be true or false (got `" + v + "`)");
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string trimmed(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string stem_of(const ExperimentConfig& cfg) {
  if (!cfg.name.empty()) return cfg.name;
  return std::string(name_of(cfg.problem)) + "-" + name_of(cfg.method);
}

// Sorted key=value lines; the hash variant drops the output directory,
// which is not part of the experiment identity.
std::string canonical(const ExperimentConfig& cfg, bool with_output) {
  std::map<std::string, std::string> kv;
  kv["problem"] = name_of(cfg.problem);
  kv["method"] = name_of(cfg.method);
  kv["name"] = stem_of(cfg);
  kv["n"] = std::to_string(cfg.n);
  kv["seed"] = std::to_string(cfg.seed);
  kv["workers"] = std::to_string(cfg.workers);
  if (with_output) kv["output"] = cfg.output.empty() ? "." : cfg.output;
  kv["eps_f"] = fmt(cfg.solver_cfg.eps_f);
  kv["eps_g"] = fmt(cfg.solver_cfg.eps_g);
  kv["eps_x"] = fmt(cfg.solver_cfg.eps_x);
  kv["max_iters"] = std::to_string(cfg.solver_cfg.max_iters);
  switch (cfg.method) {
    case Method::Rmap:
      kv["start"] = to_string(cfg.start);
      kv["metropolize"] = name_of(cfg.metropolize);
      kv["solver"] = to_string(cfg.solver);
      break;
    case Method::Rto:
      kv["rto_variant"] = name_of(cfg.rto_variant);
      break;
    case Method::Sn:
      kv["solver"] = to_string(cfg.solver);
      break;
    case Method::Dram:
      kv["solver"] = to_string(cfg.solver);
      kv["burn_in"] = std::to_string(cfg.dram.burn_in);
      kv["adapt_start"] = std::to_string(cfg.dram.adapt_start);
      kv["gamma"] = fmt(cfg.dram.gamma);
      break;
    case Method::CostTable:
      break;
  }
  if (cfg.problem == ProblemKind::Helmholtz) {
    kv["nx"] = std::to_string(cfg.helmholtz.nx);
    kv["ny"] = std::to_string(cfg.helmholtz.ny);
    kv["alpha"] = fmt(cfg.helmholtz.alpha);
    kv["prior_exponent"] = fmt(cfg.helmholtz.prior_exponent);
    kv["noise_pct"] = fmt(cfg.helmholtz.noise_pct);
    kv["noise_of_max"] = cfg.helmholtz.noise_of_max ? "true" : "false";
    kv["obs_per_side"] = std::to_string(cfg.helmholtz.obs_per_side);
    kv["flux"] = fmt(cfg.helmholtz.flux);
    kv["case_seed"] = std::to_string(cfg.case_seed);
  }
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

json counters_json(const Counters& c) {
  json j;
  j["forward"] = c.forward;
  j["adjoint"] = c.adjoint;
  j["incremental_forward"] = c.incremental_forward;
  j["incremental_adjoint"] = c.incremental_adjoint;
  j["total"] = c.total();
  return j;
}

json vector_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::trunc);
  f << content;
  if (!f) throw std::runtime_error("cannot write " + path);
}

std::vector<double> chain_weights(const Chain& chain, std::size_t from) {
  bool any = false;
  for (const SampleMeta& m : chain.meta) any = any || m.log_weight != 0.0;
  if (!any) return {};
  std::vector<double> w;
  w.reserve(chain.meta.size() - from);
  for (std::size_t i = from; i < chain.meta.size(); ++i)
    w.push_back(std::exp(chain.meta[i].log_weight));
  return w;
}

json stats_json(const Chain& chain, std::size_t burn,
                const AnalyticalPosterior* analytic,
                const std::string& hash) {
  json s;
  s["method"] = chain.method;
  s["seed"] = chain.seed;
  s["config_hash"] = hash;
  s["n"] = chain.samples.size();
  s["failures"] = chain.failures.size();
  s["acceptance_rate"] = chain.acceptance_rate;
  if (chain.samples.size() < burn + 10) burn = 0;
  s["stats_from"] = burn;

  std::vector<Vector> post(chain.samples.begin() + burn, chain.samples.end());
  std::vector<double> w = chain_weights(chain, burn);
  auto [mean, var] = w.empty() ? moments(post) : moments(post, w);
  s["mean"] = vector_json(mean);
  s["variance"] = vector_json(var);
  if (!w.empty()) s["weighted_ess"] = weighted_ess(w);
  try {
    ChainStats cs = chain_stats(post);
    s["iact_per_param"] = vector_json(cs.iact_per_param);
    s["mean_iact"] = cs.mean_iact;
    s["ess"] = cs.ess;
  } catch (const std::exception& e) {
    s["iact_error"] = e.what();
  }
  double iters = 0;
  for (const SampleMeta& m : chain.meta) iters += m.iterations;
  s["mean_iterations"] = chain.meta.empty() ? 0.0 : iters / chain.meta.size();
  s["counters"] = counters_json(chain.total_solves());
  if (analytic && !analytic->modes().empty()) {
    std::vector<double> occ(analytic->modes().size(), 0.0);
    std::size_t counted = 0;
    for (std::size_t i = burn; i < chain.meta.size(); ++i) {
      int b = chain.meta[i].basin;
      if (b >= 0 && b < static_cast<int>(occ.size())) occ[b] += 1, ++counted;
    }
    json arr = json::array();
    for (double c : occ) arr.push_back(counted ? c / counted : 0.0);
    s["basin_occupancy"] = arr;
  }
  return s;
}

void write_hist(const std::string& path, const Chain& chain, std::size_t burn,
                const AnalyticalPosterior& analytic) {
  if (chain.samples.size() < burn + 10) burn = 0;
  std::vector<double> xs;
  for (std::size_t i = burn; i < chain.samples.size(); ++i)
    xs.push_back(chain.samples[i][0]);
  std::vector<double> w = chain_weights(chain, burn);
  Histogram h = histogram(xs, kHistLo, kHistHi, kHistBins, w);
  std::ostringstream out;
  out << "lo,hi,mass,exact_mass\n" << std::setprecision(17);
  for (int b = 0; b < kHistBins; ++b)
    out << h.edges[b] << ',' << h.edges[b + 1] << ',' << h.mass[b] << ','
        << analytic.exact_mass(h.edges[b], h.edges[b + 1]) << '\n';
  write_text(path, out.str());
}

Vector solve_map(InverseProblem& problem, SolverKind solver,
                 const SolverConfig& cfg, Counters* used) {
  Counters before = problem.counters();
  auto [u, report] = solver == SolverKind::Trincg
                         ? trincg_minimize(problem, problem.prior().mean(), cfg)
                         : lm_minimize(problem, problem.prior().mean(), cfg);
  if (used) *used += problem.counters() - before;
  return u;
}

std::string combo_base(const std::string& base, SolverKind s, StartStrategy st) {
  return base + "-" + to_string(s) + "-" + to_string(st);
}

void tag_chain(Chain& chain, const ExperimentConfig& cfg,
               const std::string& hash) {
  chain.config["problem"] = name_of(cfg.problem);
  chain.config["config_hash"] = hash;
}

double pair_tv(const Histogram& a, const Histogram& b) {
  double tv = 0, ta = 1, tb = 1;
  for (Eigen::Index i = 0; i < a.mass.size(); ++i) {
    tv += std::abs(a.mass[i] - b.mass[i]);
    ta -= a.mass[i];
    tb -= b.mass[i];
  }
  return 0.5 * (tv + std::abs(ta - tb));
}

std::string format_report(const CompareReport& rep, Eigen::Index dim) {
  std::ostringstream out;
  out << std::setprecision(6);
  for (std::size_t i = 0; i < rep.columns.size(); ++i)
    out << "[" << i << "] " << rep.columns[i].path << "\n";
  out << "\n";
  const int label = 18, col = 16;
  auto row = [&](const std::string& name, auto value_of) {
    out << std::left << std::setw(label) << name << std::right;
    for (const CompareColumn& c : rep.columns) out << std::setw(col) << value_of(c);
    out << "\n";
  };
  row("method", [](const CompareColumn& c) { return c.method; });
  row("seed", [](const CompareColumn& c) { return std::to_string(c.seed); });
  row("samples", [](const CompareColumn& c) { return std::to_string(c.n); });
  row("acceptance", [](const CompareColumn& c) { return c.acceptance_rate; });
  Eigen::Index show = std::min<Eigen::Index>(dim, 5);
  for (Eigen::Index k = 0; k < show; ++k) {
    row("mean[" + std::to_string(k) + "]",
        [k](const CompareColumn& c) { return c.mean[k]; });
  }
  for (Eigen::Index k = 0; k < show; ++k) {
    row("var[" + std::to_string(k) + "]",
        [k](const CompareColumn& c) { return c.variance[k]; });
  }
  if (dim > show) out << "(first " << show << " of " << dim << " components)\n";
  row("mean IACT", [](const CompareColumn& c) { return c.mean_iact; });
  row("ESS", [](const CompareColumn& c) { return c.ess; });
  row("weighted ESS", [](const CompareColumn& c) { return c.weighted_ess; });
  row("mean iterations", [](const CompareColumn& c) { return c.mean_iterations; });
  row("forward solves", [](const CompareColumn& c) { return c.solves.forward; });
  row("adjoint solves", [](const CompareColumn& c) { return c.solves.adjoint; });
  row("inc. forward", [](const CompareColumn& c) { return c.solves.incremental_forward; });
  row("inc. adjoint", [](const CompareColumn& c) { return c.solves.incremental_adjoint; });
  row("total solves", [](const CompareColumn& c) { return c.solves.total(); });
  bool any_exact = false;
  for (const CompareColumn& c : rep.columns) any_exact = any_exact || std::isfinite(c.tv_exact);
  if (any_exact)
    row("TV to exact", [](const CompareColumn& c) {
      return std::isfinite(c.tv_exact) ? c.tv_exact
                                       : std::numeric_limits<double>::quiet_NaN();
    });
  if (rep.pairwise_tv.size() > 0) {
    out << "\npairwise TV (100 common bins)\n" << std::setw(6) << "";
    for (std::size_t j = 0; j < rep.columns.size(); ++j)
      out << std::setw(10) << ("[" + std::to_string(j) + "]");
    out << "\n";
    for (std::size_t i = 0; i < rep.columns.size(); ++i) {
      out << std::setw(6) << ("[" + std::to_string(i) + "]");
      for (std::size_t j = 0; j < rep.columns.size(); ++j)
        out << std::setw(10) << std::setprecision(4) << rep.pairwise_tv(i, j);
      out << "\n" << std::setprecision(6);
    }
  }
  return out.str();
}

}  // namespace

ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trimmed(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      bad("line " + std::to_string(lineno) + ": expected `key = value`");
    std::string key = trimmed(line.substr(0, eq));
    std::string value = trimmed(line.substr(eq + 1));
    if (key.empty() || value.empty())
      bad("line " + std::to_string(lineno) + ": expected `key = value`");
    if (!kv.emplace(key, value).second) bad("duplicate key: " + key);
  }

  if (!kv.count("problem")) bad("missing required key: problem");
  if (!kv.count("method")) bad("missing required key: method");
  ExperimentConfig cfg;
  cfg.problem = problem_from(kv["problem"]);
  cfg.method = method_from(kv["method"]);
  kv.erase("problem");
  kv.erase("method");

  const bool analytic = cfg.problem != ProblemKind::Helmholtz;
  auto only = [&](const std::string& key, bool applies, const char* scope) {
    if (!applies) bad("key `" + key + "` does not apply to " + scope);
  };

  for (const auto& [k, v] : kv) {
    if (k == "name") {
      if (v.find('/') != std::string::npos) bad("name must not contain `/`");
      cfg.name = v;
    } else if (k == "n") {
      cfg.n = static_cast<int>(int_value(k, v, 1, 100000000));
    } else if (k == "seed") {
      cfg.seed = u64_value(k, v);
    } else if (k == "workers") {
      cfg.workers = static_cast<int>(int_value(k, v, 1, 1024));
    } else if (k == "output") {
      cfg.output = v;
    } else if (k == "eps_f") {
      cfg.solver_cfg.eps_f = positive_value(k, v);
    } else if (k == "eps_g") {
      cfg.solver_cfg.eps_g = positive_value(k, v);
    } else if (k == "eps_x") {
      cfg.solver_cfg.eps_x = positive_value(k, v);
    } else if (k == "max_iters") {
      cfg.solver_cfg.max_iters = static_cast<int>(int_value(k, v, 1, 100000));
    } else if (k == "start") {
      only(k, cfg.method == Method::Rmap, "this method (rmap only)");
      cfg.start = start_from(v);
      if (cfg.start == StartStrategy::Global1d && !analytic)
        bad("start = global-1d needs an analytical problem");
    } else if (k == "metropolize") {
      only(k, cfg.method == Method::Rmap, "this method (rmap only)");
      cfg.metropolize = debias_from(v);
      if (!analytic && (cfg.metropolize == Debias::Full ||
                        cfg.metropolize == Debias::WeightsFull))
        bad("metropolize = " + v + " needs a scalar analytical problem");
    } else if (k == "solver") {
      only(k,
           cfg.method == Method::Rmap || cfg.method == Method::Sn ||
               cfg.method == Method::Dram,
           "this method (rmap, sn, dram)");
      cfg.solver = solver_from(v);
    } else if (k == "rto_variant") {
      only(k, cfg.method == Method::Rto, "this method (rto only)");
      cfg.rto_variant = variant_from(v);
    } else if (k == "burn_in") {
      only(k, cfg.method == Method::Dram, "this method (dram only)");
      cfg.dram.burn_in = static_cast<int>(int_value(k, v, 0, 100000000));
    } else if (k == "adapt_start") {
      only(k, cfg.method == Method::Dram, "this method (dram only)");
      cfg.dram.adapt_start = static_cast<int>(int_value(k, v, 1, 100000000));
    } else if (k == "gamma") {
      only(k, cfg.method == Method::Dram, "this method (dram only)");
      cfg.dram.gamma = positive_value(k, v);
      if (cfg.dram.gamma >= 1) bad("gamma must be in (0, 1)");
    } else if (k == "nx") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.helmholtz.nx = static_cast<int>(int_value(k, v, 2, 512));
    } else if (k == "ny") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.helmholtz.ny = static_cast<int>(int_value(k, v, 2, 512));
    } else if (k == "alpha") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.helmholtz.alpha = positive_value(k, v);
    } else if (k == "prior_exponent") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.helmholtz.prior_exponent = positive_value(k, v);
    } else if (k == "noise_pct") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.helmholtz.noise_pct = double_value(k, v);
      if (cfg.helmholtz.noise_pct < 0) bad("noise_pct must be >= 0");
    } else if (k == "noise_of_max") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.helmholtz.noise_of_max = bool_value(k, v);
    } else if (k == "obs_per_side") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.helmholtz.obs_per_side = static_cast<int>(int_value(k, v, 1, 64));
    } else if (k == "flux") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.helmholtz.flux = double_value(k, v);
    } else if (k == "case_seed") {
      only(k, !analytic, "this problem (helmholtz only)");
      cfg.case_seed = u64_value(k, v);
    } else {
      bad("unknown key: " + k);
    }
  }
  cfg.solver_cfg.validate();
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad("cannot read config file " + path);
  return parse_config(in);
}

std::string canonical_text(const ExperimentConfig& cfg) {
  return canonical(cfg, true);
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string text = canonical(cfg, false);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunResult run_experiment(const ExperimentConfig& cfg, bool force,
                         std::ostream& log) {
  const std::string outdir = cfg.output.empty() ? "." : cfg.output;
  const std::string hash = config_hash(cfg);
  RunResult res;
  res.base = outdir + "/" + stem_of(cfg) + "-" + hash + "-seed" +
             std::to_string(cfg.seed);

  const bool analytic = cfg.problem != ProblemKind::Helmholtz;
  const std::vector<std::pair<SolverKind, StartStrategy>> combos = {
      {SolverKind::Trincg, StartStrategy::Warm},
      {SolverKind::Trincg, StartStrategy::RandomDraw},
      {SolverKind::Lm, StartStrategy::Warm},
      {SolverKind::Lm, StartStrategy::RandomDraw}};

  std::vector<std::string> planned = {res.base + ".manifest.json",
                                      res.base + ".stats.json"};
  if (cfg.method == Method::CostTable) {
    planned.push_back(res.base + ".cost-table.csv");
    for (const auto& [s, st] : combos) {
      planned.push_back(combo_base(res.base, s, st) + ".meta.json");
      planned.push_back(combo_base(res.base, s, st) + ".samples.csv");
    }
  } else {
    planned.push_back(res.base + ".meta.json");
    planned.push_back(res.base + ".samples.csv");
    if (analytic) planned.push_back(res.base + ".hist.csv");
  }
  if (!force)
    for (const std::string& f : planned)
      if (fs::exists(f)) bad("refusing to overwrite " + f + " (pass --force)");
  std::error_code ec;
  fs::create_directories(outdir, ec);
  if (ec) bad("cannot create output directory " + outdir + ": " + ec.message());

  Counters used;
  auto manifest = [&](const std::string& status, const std::string& error) {
    json m;
    m["version"] = 1;
    m["code_version"] = kCodeVersion;
    m["config_hash"] = hash;
    m["seed"] = cfg.seed;
    m["status"] = status;
    if (!error.empty()) m["error"] = error;
    json lines = json::array();
    std::istringstream text(canonical_text(cfg));
    for (std::string l; std::getline(text, l);) lines.push_back(l);
    m["config"] = lines;
    m["counters"] = counters_json(used);
    json fnames = json::array();
    for (const std::string& f : res.files)
      fnames.push_back(fs::path(f).filename().string());
    m["files"] = fnames;
    write_text(res.base + ".manifest.json", m.dump(2) + "\n");
    res.files.push_back(res.base + ".manifest.json");
    log << "wrote " << res.base + ".manifest.json" << "\n";
  };

  try {
    std::unique_ptr<InverseProblem> owned;
    const AnalyticalPosterior* exact = nullptr;
    if (analytic) {
      auto ap = std::make_unique<AnalyticalPosterior>(
          cfg.problem == ProblemKind::J1 ? AnalyticKind::J1 : AnalyticKind::J2);
      exact = ap.get();
      owned = std::move(ap);
    } else {
      Rng case_rng(cfg.case_seed);
      SyntheticCase sc = make_synthetic_case(cfg.helmholtz, case_rng);
      owned = std::move(sc.model);
    }
    InverseProblem& problem = *owned;

    auto emit_chain = [&](const std::string& base, Chain& chain) {
      tag_chain(chain, cfg, hash);
      save_chain(base, chain);
      used += chain.total_solves();
      res.files.push_back(base + ".meta.json");
      res.files.push_back(base + ".samples.csv");
      log << "wrote " << base << ".{meta.json,samples.csv}  (" << chain.samples.size()
          << " samples, " << chain.failures.size() << " failed)\n";
    };

    if (cfg.method == Method::CostTable) {
      json combo_stats = json::array();
      std::ostringstream csv;
      csv << "solver,start,samples,failures,forward,adjoint,"
             "incremental_forward,incremental_adjoint,total_solves,"
             "mean_outer_iterations\n";
      for (const auto& [solver, start] : combos) {
        RmapOptions opt;
        opt.start = start;
        opt.solver = solver;
        opt.solver_cfg = cfg.solver_cfg;
        opt.workers = cfg.workers;
        Chain chain = rmap_chain(problem, cfg.n, opt, cfg.seed);
        emit_chain(combo_base(res.base, solver, start), chain);
        Counters c = chain.total_solves();
        double iters = 0;
        for (const SampleMeta& m : chain.meta) iters += m.iterations;
        double mean_iters = chain.meta.empty() ? 0.0 : iters / chain.meta.size();
        csv << to_string(solver) << ',' << to_string(start) << ','
            << chain.samples.size() << ',' << chain.failures.size() << ','
            << c.forward << ',' << c.adjoint << ',' << c.incremental_forward
            << ',' << c.incremental_adjoint << ',' << c.total() << ','
            << std::setprecision(17) << mean_iters << '\n';
        json row;
        row["solver"] = to_string(solver);
        row["start"] = to_string(start);
        row["samples"] = chain.samples.size();
        row["failures"] = chain.failures.size();
        row["counters"] = counters_json(c);
        row["mean_outer_iterations"] = mean_iters;
        combo_stats.push_back(row);
      }
      write_text(res.base + ".cost-table.csv", csv.str());
      res.files.push_back(res.base + ".cost-table.csv");
      log << "wrote " << res.base << ".cost-table.csv\n";
      json s;
      s["config_hash"] = hash;
      s["seed"] = cfg.seed;
      s["combos"] = combo_stats;
      write_text(res.base + ".stats.json", s.dump(2) + "\n");
      res.files.push_back(res.base + ".stats.json");
    } else {
      Chain chain;
      std::size_t burn = 0;
      switch (cfg.method) {
        case Method::Rmap: {
          RmapOptions opt;
          opt.start = cfg.start;
          opt.solver = cfg.solver;
          opt.solver_cfg = cfg.solver_cfg;
          opt.workers = cfg.workers;
          opt.compute_jacobian = cfg.metropolize != Debias::None;
          chain = rmap_chain(problem, cfg.n, opt, cfg.seed);
          Rng mh(cfg.seed, 0);
          switch (cfg.metropolize) {
            case Debias::None:
              break;
            case Debias::Simplified:
              chain = metropolize_rmap(chain, mh);
              break;
            case Debias::Full:
              chain = metropolize_rmap(problem, chain, mh,
                                       MetropolizeMode::Full1d);
              break;
            case Debias::Weights:
            case Debias::WeightsFull: {
              auto lw = rmap_log_weights(
                  problem, chain,
                  cfg.metropolize == Debias::Weights ? MetropolizeMode::Simplified
                                                     : MetropolizeMode::Full1d);
              for (std::size_t i = 0; i < lw.size(); ++i)
                chain.meta[i].log_weight = lw[i];
              chain.method += "+weighted";
              break;
            }
          }
          break;
        }
        case Method::Rto: {
          RtoOptions opt;
          opt.variant = cfg.rto_variant;
          opt.map_solver = cfg.solver_cfg;
          opt.workers = cfg.workers;
          chain = rto_chain(problem, cfg.n, opt, cfg.seed);
          break;
        }
        case Method::Sn: {
          Vector map = solve_map(problem, cfg.solver, cfg.solver_cfg, &used);
          chain = sn_chain(problem, cfg.n, map, cfg.seed);
          chain.map_point = map;
          break;
        }
        default: {  // Dram
          Vector map = solve_map(problem, cfg.solver, cfg.solver_cfg, &used);
          chain = dram_chain(problem, cfg.n, map, cfg.dram, cfg.seed);
          chain.map_point = map;
          burn = static_cast<std::size_t>(cfg.dram.burn_in);
          break;
        }
      }
      emit_chain(res.base, chain);
      write_text(res.base + ".stats.json",
                 stats_json(chain, burn, exact, hash).dump(2) + "\n");
      res.files.push_back(res.base + ".stats.json");
      log << "wrote " << res.base << ".stats.json\n";
      if (exact) {
        write_hist(res.base + ".hist.csv", chain, burn, *exact);
        res.files.push_back(res.base + ".hist.csv");
        log << "wrote " << res.base << ".hist.csv\n";
      }
    }
    manifest("ok", "");
  } catch (const std::exception& e) {
    log << "run failed: " << e.what() << "\n";
    manifest("failed", e.what());
    res.status = 1;
    res.error = e.what();
  }
  return res;
}

CompareReport compare_chains(const std::vector<std::string>& bases) {
  if (bases.size() < 2)
    throw std::invalid_argument("compare needs at least two chain files");
  std::vector<Chain> chains;
  chains.reserve(bases.size());
  for (const std::string& b : bases) chains.push_back(load_chain(b));
  for (const Chain& c : chains)
    if (c.samples.empty())
      throw std::invalid_argument("chain has no samples: cannot compare");
  const Eigen::Index dim = chains[0].samples[0].size();
  for (const Chain& c : chains)
    if (c.samples[0].size() != dim)
      throw std::invalid_argument("incompatible parameter dimensions");

  const bool scalar = dim == 1;
  double lo = 0, hi = 0;
  if (scalar) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    for (const Chain& c : chains)
      for (const Vector& u : c.samples) {
        lo = std::min(lo, u[0]);
        hi = std::max(hi, u[0]);
      }
    double pad = 0.05 * (hi - lo) + 1e-12;
    lo -= pad;
    hi += pad;
  }

  CompareReport rep;
  std::vector<Histogram> hists;
  for (std::size_t i = 0; i < bases.size(); ++i) {
    const Chain& c = chains[i];
    CompareColumn col;
    col.path = bases[i];
    col.method = c.method;
    col.seed = c.seed;
    col.n = c.samples.size();
    col.acceptance_rate = c.acceptance_rate;
    std::size_t burn = 0;
    auto it = c.config.find("burn_in");
    if (it != c.config.end()) burn = std::stoull(it->second);
    if (c.samples.size() < burn + 10) burn = 0;
    std::vector<Vector> post(c.samples.begin() + burn, c.samples.end());
    std::vector<double> w = chain_weights(c, burn);
    std::tie(col.mean, col.variance) = w.empty() ? moments(post) : moments(post, w);
    col.weighted_ess = w.empty() ? static_cast<double>(post.size()) : weighted_ess(w);
    try {
      ChainStats cs = chain_stats(post);
      col.mean_iact = cs.mean_iact;
      col.ess = cs.ess;
    } catch (const std::exception&) {
      col.mean_iact = std::numeric_limits<double>::quiet_NaN();
      col.ess = std::numeric_limits<double>::quiet_NaN();
    }
    double iters = 0;
    for (const SampleMeta& m : c.meta) iters += m.iterations;
    col.mean_iterations = c.meta.empty() ? 0.0 : iters / c.meta.size();
    col.solves = c.total_solves();
    col.tv_exact = std::numeric_limits<double>::quiet_NaN();
    if (scalar) {
      std::vector<double> xs;
      for (std::size_t j = burn; j < c.samples.size(); ++j)
        xs.push_back(c.samples[j][0]);
      hists.push_back(histogram(xs, lo, hi, 100, w));
      auto pit = c.config.find("problem");
      if (pit != c.config.end() && (pit->second == "j1" || pit->second == "j2")) {
        AnalyticalPosterior exact(pit->second == "j1" ? AnalyticKind::J1
                                                      : AnalyticKind::J2);
        col.tv_exact = tv_distance(hists.back(), [&](double a, double b) {
          return exact.exact_mass(a, b);
        });
      }
    }
    rep.columns.push_back(std::move(col));
  }
  if (scalar) {
    rep.pairwise_tv = Matrix::Zero(bases.size(), bases.size());
    for (std::size_t i = 0; i < bases.size(); ++i)
      for (std::size_t j = i + 1; j < bases.size(); ++j)
        rep.pairwise_tv(i, j) = rep.pairwise_tv(j, i) =
            pair_tv(hists[i], hists[j]);
  }
  rep.text = format_report(rep, dim);
  return rep;
}

bool run_self_checks(std::ostream& out) {
  bool all_ok = true;
  auto report = [&](bool ok, const std::string& name, const std::string& detail) {
    all_ok = all_ok && ok;
    out << (ok ? "ok    " : "FAIL  ") << name;
    if (!detail.empty()) out << "  (" << detail << ")";
    out << "\n";
  };
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      report(false, name, e.what());
    }
  };

  guarded("helmholtz derivative checks", [&] {
    HelmholtzConfig hc;
    hc.nx = hc.ny = 6;
    hc.obs_per_side = 3;
    Rng rng(7);
    SyntheticCase sc = make_synthetic_case(hc, rng);
    HelmholtzModel& m = *sc.model;
    Vector u = 0.5 * m.prior().sample_zero_mean(rng);
    const double inv_var = 1.0 / (m.noise_sigma() * m.noise_sigma());

    double worst_dot = 0;
    for (int t = 0; t < 5; ++t) {
      Vector v = m.prior().sample_zero_mean(rng);
      Vector r = rng.normal_vector(m.obs_dim());
      double lhs = inv_var * m.apply_jacobian(u, v).dot(r);
      double rhs = m.inner(v, m.apply_jacobian_adjoint(u, Vector(inv_var * r)));
      worst_dot = std::max(worst_dot,
                           std::abs(lhs - rhs) / std::max(1.0, std::abs(rhs)));
    }
    report(worst_dot < 1e-8, "helmholtz dot test",
           "worst rel gap " + fmt(worst_dot));

    const double h = 1e-4;
    Vector g = m.gradient(u);
    double worst_grad = 0, worst_hess = 0;
    for (int t = 0; t < 3; ++t) {
      Vector v = m.prior().sample_zero_mean(rng);
      v /= m.norm(v);
      double fd = (m.objective(u + h * v) - m.objective(u - h * v)) / (2 * h);
      double an = m.inner(g, v);
      worst_grad = std::max(worst_grad,
                            std::abs(fd - an) / std::max(1.0, std::abs(an)));
      Vector hv = m.hessian_action(u, v);
      Vector fdh = (m.gradient(u + h * v) - m.gradient(u - h * v)) / (2 * h);
      worst_hess = std::max(worst_hess, (fdh - hv).norm() / hv.norm());
    }
    report(worst_grad < 1e-5, "helmholtz gradient fd",
           "worst rel gap " + fmt(worst_grad));
    report(worst_hess < 1e-4, "helmholtz hessian-action fd",
           "worst rel gap " + fmt(worst_hess));
  });

  guarded("linear-gaussian exactness", [&] {
    Rng fix(11);
    Matrix b = random_matrix(6, 8, fix);
    Matrix cov = random_spd_matrix(8, fix);
    Vector mean = fix.normal_vector(8);
    Vector d = fix.normal_vector(6);
    LinearProblem lp(b, d, 0.5, GaussianMeasure::from_dense(mean, cov));

    RmapOptions opt;
    opt.start = StartStrategy::PriorPoint;
    opt.solver_cfg.eps_g = 1e-10;
    opt.workers = 2;
    const int n = 400;
    Chain chain = rmap_chain(lp, n, opt, 13);
    auto [m1, v1] = moments(chain.samples);
    Vector exact_mean = lp.posterior_mean();
    Matrix exact_cov = lp.posterior_covariance();
    double worst = 0;
    for (Eigen::Index i = 0; i < 8; ++i) {
      double se = std::sqrt(exact_cov(i, i) / n);
      worst = std::max(worst, std::abs(m1[i] - exact_mean[i]) / se);
    }
    double var_gap = 0;
    for (Eigen::Index i = 0; i < 8; ++i)
      var_gap = std::max(var_gap,
                         std::abs(v1[i] - exact_cov(i, i)) / exact_cov(i, i));
    report(worst < 5 && var_gap < 0.5, "linear-gaussian exactness",
           "worst mean gap " + fmt(worst) + " se, worst var gap " +
               fmt(var_gap));
  });

  guarded("rto matches the closed-form sampler", [&] {
    Rng fix(21);
    Matrix b = random_matrix(5, 4, fix);
    Matrix cov = random_spd_matrix(4, fix);
    Vector mean = fix.normal_vector(4);
    Vector d = fix.normal_vector(5);
    LinearProblem lp(b, d, 0.7, GaussianMeasure::from_dense(mean, cov));

    RtoOptions opt;
    Chain chain = rto_chain(lp, 40, opt, 5);
    double worst = 0;
    for (std::size_t j = 0; j < chain.samples.size(); ++j) {
      Vector closed = lp.rmap_sample_closed_form(chain.meta[j].randomization);
      worst = std::max(worst, (chain.samples[j] - closed).norm());
    }
    report(chain.failures.empty() && worst < 1e-6,
           "rto matches the closed-form sampler", "worst gap " + fmt(worst));
  });

  guarded("gauss-hermite self-consistency", [&] {
    AnalyticalPosterior j1(AnalyticKind::J1);
    double a = quadrature_expectation_of_optimizer(j1, 30);
    double b = quadrature_expectation_of_optimizer(j1, 60);
    report(std::abs(a - b) < 1e-6, "gauss-hermite self-consistency",
           "order 30 vs 60 gap " + fmt(std::abs(a - b)));
  });

  out << (all_ok ? "all checks passed\n" : "CHECK FAILURES\n");
  return all_ok;
}

}  // namespace rmap
