#include "gtexpand/ensembler.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include "gtexpand/evaluator.hpp"

namespace gtexpand {

RunSet ensemble(const std::vector<RunSet>& runs, const std::vector<std::string>& ranking, std::size_t top_k,
                std::size_t threshold, std::string run_id) {
  if (top_k == 0) throw Error("top-k must be at least 1");
  if (threshold == 0) throw Error("vote threshold must be at least 1");
  if (runs.size() < top_k) {
    throw Error("ensemble needs at least " + std::to_string(top_k) + " runs, got " + std::to_string(runs.size()));
  }
  std::map<std::string, const RunSet*> by_id;
  for (const auto& r : runs) {
    if (!by_id.emplace(r.run_id, &r).second) throw Error("duplicate run id '" + r.run_id + "'");
  }
  std::set<std::string> ranked;
  for (const auto& id : ranking) {
    if (!by_id.count(id)) throw Error("ranking names unknown run '" + id + "'");
    if (!ranked.insert(id).second) throw Error("ranking lists run '" + id + "' twice");
  }
  for (const auto& [id, _] : by_id) {
    if (!ranked.count(id)) throw Error("ranking is missing run '" + id + "'");
  }

  std::map<std::string, std::map<Quadruple, std::size_t>> votes;
  for (std::size_t i = 0; i < top_k; ++i) {
    for (const auto& [ex, preds] : by_id.at(ranking[i])->predictions) {
      auto& v = votes[ex];
      for (const auto& q : preds.quads) ++v[q];
    }
  }
  RunSet out;
  out.run_id = std::move(run_id);
  for (const auto& [ex, counts] : votes) {
    auto& set = out.predictions[ex];
    for (const auto& [q, n] : counts) {
      if (n >= threshold) set.quads.insert(q);
    }
  }
  return out;
}

std::vector<std::string> rank_by_score(const std::vector<RunSet>& runs, const Dataset& selection) {
  std::vector<std::pair<double, std::string>> scored;
  for (const auto& r : runs) scored.emplace_back(score_corpus(r, selection).f1, r.run_id);
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::string> out;
  for (auto& [f, id] : scored) out.push_back(std::move(id));
  return out;
}

std::vector<std::string> read_ranking(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open ranking " + path.string());
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    auto last = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(first, last - first + 1));
  }
  return out;
}

}  // namespace gtexpand
