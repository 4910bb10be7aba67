#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "rmap/optimizer.hpp"
#include "rmap/problem.hpp"

namespace rmap {

// Per-sample record: the randomization pair that produced the sample, the
// optimizer outcome, and sampler bookkeeping (acceptance, importance weight,
// basin label, Jacobian determinant for Metropolization).
struct SampleMeta {
  Randomization randomization;
  double log_weight = 0.0;
  bool accepted = true;
  bool failed = false;
  int basin = -1;  // nearest posterior mode on scalar problems, -1 otherwise
  double log_absdet = std::numeric_limits<double>::quiet_NaN();
  bool used_warm_start = false;
  int iterations = 0;
  StopReason stop = StopReason::IterationCap;
  double final_cost = 0;
  double final_gradnorm = 0;
  Counters solves;  // problem counter delta attributable to this sample
};

// Sample stream plus provenance. Failed optimizations are kept out of
// `samples` (they land in `failures`), so samples and meta always align.
struct Chain {
  std::string method;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config;
  Vector map_point;  // empty when the sampler did not compute one
  double acceptance_rate = 1.0;
  std::vector<Vector> samples;
  std::vector<SampleMeta> meta;
  std::vector<SampleMeta> failures;

  Counters total_solves() const;
};

// Throws std::logic_error when samples/meta lengths disagree, a weight is
// not finite, or sample dimensions are inconsistent.
void validate(const Chain& chain);

// On-disk format, version 1: <base>.meta.json carries everything except the
// samples, which go to <base>.samples.csv (row = sample, column = parameter).
void save_chain(const std::string& base_path, const Chain& chain);
Chain load_chain(const std::string& base_path);

}  // namespace rmap
