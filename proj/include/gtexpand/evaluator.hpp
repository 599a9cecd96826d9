#pragma once

// Multi-answer exact-match scoring: each GT group counts once and may absorb
// at most one prediction.

#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gtexpand/model.hpp"

namespace gtexpand {

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};
Prf prf(std::size_t tp, std::size_t fp, std::size_t fn);

struct Matching {
  std::size_t tp = 0;
  /// (prediction index, group index) pairs.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

/// Maximum one-to-one matching where prediction p may match group g iff p is
/// one of g's variants.
Matching match_example(const std::vector<Quadruple>& preds, const std::vector<GtGroup>& groups);
Matching match_example(const std::set<Quadruple>& preds, const std::vector<GtGroup>& groups);

struct ExampleScore {
  std::string id;
  std::size_t tp = 0, fp = 0, fn = 0;
};

struct ScoreReport {
  std::string run_id;
  std::size_t tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
  /// GT examples absent from the run, scored as empty predictions.
  std::size_t missing = 0;
  std::vector<ExampleScore> examples;

  nlohmann::ordered_json to_json() const;
  std::string table() const;
};

/// Micro-averaged over all GT examples. Throws Error on a run id the GT does
/// not know.
ScoreReport score_corpus(const RunSet& run, const Dataset& gt);

}  // namespace gtexpand
