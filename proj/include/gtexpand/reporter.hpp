#pragma once

// Expansion statistics: per-step added/removed term counts and word-count
// distributions.

#include <string>
#include <vector>

#include <json.hpp>

#include "gtexpand/model.hpp"

namespace gtexpand {

struct StepDelta {
  std::string dataset;
  Element element;
  std::size_t orig = 0;       // explicit original terms
  std::size_t zoom_in = 0;    // new terms proposed by zoom-in
  std::size_t zoom_out = 0;   // new terms proposed by zoom-out
  std::size_t removed = 0;    // judge_invalid + rule_filtered
  std::size_t judge_invalid = 0;
  std::size_t rule_filtered = 0;
  std::size_t final = 0;      // distinct explicit terms kept, summed over groups
};

/// One row per element. final = orig + zoom_in + zoom_out - removed holds by
/// construction on any file written by the expander.
std::vector<StepDelta> step_deltas(const Dataset& expanded);
std::string step_delta_table(const std::vector<StepDelta>& rows);

struct WordCountStats {
  Element element;
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Whitespace token counts over each group's distinct explicit terms.
std::vector<WordCountStats> word_count_stats(const Dataset& dataset);
std::string word_count_table(const std::vector<WordCountStats>& orig, const std::vector<WordCountStats>& ours);

nlohmann::ordered_json to_json(const std::vector<StepDelta>& rows);
nlohmann::ordered_json to_json(const std::vector<WordCountStats>& rows);

}  // namespace gtexpand
