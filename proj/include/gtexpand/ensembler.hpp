#pragma once

// Vote across runs: keep a quadruple when enough of the top-ranked runs agree.

#include <filesystem>
#include <string>
#include <vector>

#include "gtexpand/model.hpp"

namespace gtexpand {

/// Keeps, per example, the quadruples predicted by at least `threshold` of
/// the `top_k` best runs under `ranking` (best first). Throws Error if the
/// ranking omits a run, names an unknown run, or fewer than `top_k` runs are
/// given.
RunSet ensemble(const std::vector<RunSet>& runs, const std::vector<std::string>& ranking, std::size_t top_k = 5,
                std::size_t threshold = 3, std::string run_id = "ensemble");

/// Run ids by descending micro-F1 on `selection`, ties broken by id.
std::vector<std::string> rank_by_score(const std::vector<RunSet>& runs, const Dataset& selection);

/// One run id per line; blank lines and '#' comments ignored.
std::vector<std::string> read_ranking(const std::filesystem::path& path);

}  // namespace gtexpand
