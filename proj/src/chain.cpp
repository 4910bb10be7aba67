#include "rmap/chain.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

namespace rmap {

namespace {

using nlohmann::json;

json vector_to_json(const Vector& v) {
  json arr = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

Vector vector_from_json(const json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v[i] = arr[i].get<double>();
  return v;
}

StopReason stop_from_string(const std::string& s) {
  for (StopReason r : {StopReason::CostChange, StopReason::StepSize,
                       StopReason::GradientNorm, StopReason::IterationCap})
    if (s == to_string(r)) return r;
  throw std::runtime_error("load_chain: unknown stop reason '" + s + "'");
}

json meta_to_json(const SampleMeta& m) {
  json j;
  j["theta"] = vector_to_json(m.randomization.theta);
  j["eps"] = vector_to_json(m.randomization.eps);
  j["log_weight"] = m.log_weight;
  j["accepted"] = m.accepted;
  j["failed"] = m.failed;
  j["basin"] = m.basin;
  // NaN marks "not computed"; JSON has no NaN literal.
  if (std::isfinite(m.log_absdet)) j["log_absdet"] = m.log_absdet;
  j["used_warm_start"] = m.used_warm_start;
  j["iterations"] = m.iterations;
  j["stop"] = to_string(m.stop);
  j["final_cost"] = m.final_cost;
  j["final_gradnorm"] = m.final_gradnorm;
  j["solves"] = {{"forward", m.solves.forward},
                 {"adjoint", m.solves.adjoint},
                 {"incremental_forward", m.solves.incremental_forward},
                 {"incremental_adjoint", m.solves.incremental_adjoint}};
  return j;
}

SampleMeta meta_from_json(const json& j) {
  SampleMeta m;
  m.randomization.theta = vector_from_json(j.at("theta"));
  m.randomization.eps = vector_from_json(j.at("eps"));
  m.log_weight = j.at("log_weight").get<double>();
  m.accepted = j.at("accepted").get<bool>();
  m.failed = j.at("failed").get<bool>();
  m.basin = j.at("basin").get<int>();
  if (j.contains("log_absdet")) m.log_absdet = j.at("log_absdet").get<double>();
  m.used_warm_start = j.at("used_warm_start").get<bool>();
  m.iterations = j.at("iterations").get<int>();
  m.stop = stop_from_string(j.at("stop").get<std::string>());
  m.final_cost = j.at("final_cost").get<double>();
  m.final_gradnorm = j.at("final_gradnorm").get<double>();
  const json& s = j.at("solves");
  m.solves.forward = s.at("forward").get<long>();
  m.solves.adjoint = s.at("adjoint").get<long>();
  m.solves.incremental_forward = s.at("incremental_forward").get<long>();
  m.solves.incremental_adjoint = s.at("incremental_adjoint").get<long>();
  return m;
}

}  // namespace

Counters Chain::total_solves() const {
  Counters total;
  for (const SampleMeta& m : meta) total += m.solves;
  for (const SampleMeta& m : failures) total += m.solves;
  return total;
}

void validate(const Chain& chain) {
  if (chain.samples.size() != chain.meta.size())
    throw std::logic_error("chain: samples and meta lengths disagree");
  for (const SampleMeta& m : chain.meta)
    if (!std::isfinite(m.log_weight))
      throw std::logic_error("chain: non-finite weight");
  for (std::size_t i = 1; i < chain.samples.size(); ++i)
    if (chain.samples[i].size() != chain.samples.front().size())
      throw std::logic_error("chain: inconsistent sample dimensions");
  if (!(chain.acceptance_rate >= 0.0 && chain.acceptance_rate <= 1.0))
    throw std::logic_error("chain: acceptance rate out of range");
}

void save_chain(const std::string& base_path, const Chain& chain) {
  validate(chain);

  json j;
  j["format_version"] = 1;
  j["method"] = chain.method;
  j["seed"] = chain.seed;
  j["config"] = chain.config;
  j["acceptance_rate"] = chain.acceptance_rate;
  j["map_point"] = vector_to_json(chain.map_point);
  j["meta"] = json::array();
  for (const SampleMeta& m : chain.meta) j["meta"].push_back(meta_to_json(m));
  j["failures"] = json::array();
  for (const SampleMeta& m : chain.failures) j["failures"].push_back(meta_to_json(m));

  std::ofstream meta_out(base_path + ".meta.json");
  if (!meta_out) throw std::runtime_error("save_chain: cannot write " + base_path + ".meta.json");
  meta_out << j.dump(2) << "\n";

  std::ofstream csv(base_path + ".samples.csv");
  if (!csv) throw std::runtime_error("save_chain: cannot write " + base_path + ".samples.csv");
  csv.precision(17);
  for (const Vector& u : chain.samples) {
    for (Eigen::Index i = 0; i < u.size(); ++i) {
      if (i) csv << ",";
      csv << u[i];
    }
    csv << "\n";
  }
}

Chain load_chain(const std::string& base_path) {
  std::ifstream meta_in(base_path + ".meta.json");
  if (!meta_in) throw std::runtime_error("load_chain: cannot read " + base_path + ".meta.json");
  json j;
  meta_in >> j;
  if (j.at("format_version").get<int>() != 1)
    throw std::runtime_error("load_chain: unsupported format version");

  Chain chain;
  chain.method = j.at("method").get<std::string>();
  chain.seed = j.at("seed").get<std::uint64_t>();
  chain.config = j.at("config").get<std::map<std::string, std::string>>();
  chain.acceptance_rate = j.at("acceptance_rate").get<double>();
  chain.map_point = vector_from_json(j.at("map_point"));
  for (const json& m : j.at("meta")) chain.meta.push_back(meta_from_json(m));
  for (const json& m : j.at("failures")) chain.failures.push_back(meta_from_json(m));

  std::ifstream csv(base_path + ".samples.csv");
  if (!csv) throw std::runtime_error("load_chain: cannot read " + base_path + ".samples.csv");
  std::string line;
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    chain.samples.push_back(Eigen::Map<Vector>(row.data(), row.size()));
  }
  validate(chain);
  return chain;
}

}  // namespace rmap
