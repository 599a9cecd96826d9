#pragma once

// 20-shot prediction runs, one per element order.

#include <string>
#include <vector>

#include "gtexpand/corpus_io.hpp"
#include "gtexpand/llm_gateway.hpp"
#include "gtexpand/prompt_kit.hpp"

namespace gtexpand {

struct PredictConfig {
  std::string model = "gpt-3.5-turbo-0125";
  std::size_t workers = 4;
};

struct PredictResult {
  /// Raw outputs in dataset order, ready for write_run_records.
  std::vector<RunRecord> records;
  RunSet run;
  std::vector<std::string> diagnostics;
};

/// Greedy decoding (temperature 0) of every example under `order`. The run id
/// is the order code.
PredictResult predict_run(Gateway& gateway, const PromptTemplate& tmpl, const Dataset& dataset,
                          const ElementOrder& order, const std::vector<Shot>& shots,
                          const PredictConfig& config = {});

}  // namespace gtexpand
