#include "gtexpand/evaluator.hpp"

#include <functional>
#include <iomanip>
#include <sstream>

namespace gtexpand {

Prf prf(std::size_t tp, std::size_t fp, std::size_t fn) {
  Prf r;
  if (tp + fp) r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn) r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

Matching match_example(const std::vector<Quadruple>& preds, const std::vector<GtGroup>& groups) {
  const std::size_t np = preds.size(), ng = groups.size();
  std::vector<std::vector<std::size_t>> adj(np);
  for (std::size_t p = 0; p < np; ++p) {
    for (std::size_t g = 0; g < ng; ++g) {
      if (groups[g].contains(preds[p])) adj[p].push_back(g);
    }
  }
  // Kuhn's augmenting paths; sizes here are tiny.
  std::vector<long> owner(ng, -1);
  std::vector<char> visited;
  std::function<bool(std::size_t)> augment = [&](std::size_t p) {
    for (std::size_t g : adj[p]) {
      if (visited[g]) continue;
      visited[g] = 1;
      if (owner[g] < 0 || augment(static_cast<std::size_t>(owner[g]))) {
        owner[g] = static_cast<long>(p);
        return true;
      }
    }
    return false;
  };
  Matching m;
  for (std::size_t p = 0; p < np; ++p) {
    visited.assign(ng, 0);
    if (augment(p)) ++m.tp;
  }
  for (std::size_t g = 0; g < ng; ++g) {
    if (owner[g] >= 0) m.pairs.emplace_back(static_cast<std::size_t>(owner[g]), g);
  }
  return m;
}

Matching match_example(const std::set<Quadruple>& preds, const std::vector<GtGroup>& groups) {
  return match_example(std::vector<Quadruple>(preds.begin(), preds.end()), groups);
}

ScoreReport score_corpus(const RunSet& run, const Dataset& gt) {
  for (const auto& [id, _] : run.predictions) {
    if (!gt.find(id)) throw Error("run '" + run.run_id + "' has example id '" + id + "' unknown to the GT");
  }
  ScoreReport r;
  r.run_id = run.run_id;
  static const PredictionSet kEmpty;
  for (const auto& ex : gt.examples) {
    auto it = run.predictions.find(ex.id);
    if (it == run.predictions.end()) ++r.missing;
    const PredictionSet& preds = it == run.predictions.end() ? kEmpty : it->second;
    const std::size_t tp = match_example(preds.quads, ex.groups).tp;
    ExampleScore s{ex.id, tp, preds.quads.size() - tp + preds.malformed, ex.groups.size() - tp};
    r.tp += s.tp;
    r.fp += s.fp;
    r.fn += s.fn;
    r.examples.push_back(std::move(s));
  }
  const Prf m = prf(r.tp, r.fp, r.fn);
  r.precision = m.precision;
  r.recall = m.recall;
  r.f1 = m.f1;
  return r;
}

nlohmann::ordered_json ScoreReport::to_json() const {
  nlohmann::ordered_json j;
  j["run_id"] = run_id;
  j["tp"] = tp;
  j["fp"] = fp;
  j["fn"] = fn;
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["missing"] = missing;
  j["examples"] = nlohmann::ordered_json::array();
  for (const auto& e : examples) {
    j["examples"].push_back({{"id", e.id}, {"tp", e.tp}, {"fp", e.fp}, {"fn", e.fn}});
  }
  return j;
}

std::string ScoreReport::table() const {
  std::ostringstream os;
  os << std::left << std::setw(16) << "run" << std::right << std::setw(8) << "tp" << std::setw(8) << "fp"
     << std::setw(8) << "fn" << std::setw(11) << "precision" << std::setw(9) << "recall" << std::setw(9) << "F1"
     << "\n";
  os << std::left << std::setw(16) << run_id << std::right << std::setw(8) << tp << std::setw(8) << fp
     << std::setw(8) << fn << std::fixed << std::setprecision(4) << std::setw(11) << precision << std::setw(9)
     << recall << std::setw(9) << f1 << "\n";
  return os.str();
}

}  // namespace gtexpand
