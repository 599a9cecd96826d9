#include "gtexpand/agreement.hpp"

#include <array>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace gtexpand {

namespace {

void check_labels(const JudgmentVector& v) {
  for (const auto& [item, l] : v.labels) {
    if (l != 0 && l != 1) throw Error("rater '" + v.rater_id + "' gives non-binary label on '" + item + "'");
  }
}

void same_universe(const JudgmentVector& a, const JudgmentVector& b) {
  check_labels(a);
  check_labels(b);
  if (a.labels.size() != b.labels.size()) {
    throw Error("raters '" + a.rater_id + "' and '" + b.rater_id + "' judged different item sets (" +
                std::to_string(a.labels.size()) + " vs " + std::to_string(b.labels.size()) + " items)");
  }
  for (auto ia = a.labels.begin(), ib = b.labels.begin(); ia != a.labels.end(); ++ia, ++ib) {
    if (ia->first != ib->first) {
      throw Error("raters '" + a.rater_id + "' and '" + b.rater_id + "' judged different item sets ('" +
                  ia->first + "' vs '" + ib->first + "')");
    }
  }
}

// 2x2 contingency counts: n[x][y] = items with a = x, b = y.
std::array<std::array<double, 2>, 2> contingency(const JudgmentVector& a, const JudgmentVector& b) {
  same_universe(a, b);
  if (a.labels.empty()) throw Error("no items to compare");
  std::array<std::array<double, 2>, 2> n{};
  for (auto ia = a.labels.begin(), ib = b.labels.begin(); ia != a.labels.end(); ++ia, ++ib) {
    n[ia->second][ib->second] += 1;
  }
  return n;
}

std::string fmt(const std::optional<double>& v) {
  if (!v) return "undef";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << *v;
  return os.str();
}

}  // namespace

JudgmentVector majority_vote(const std::vector<JudgmentVector>& vectors) {
  if (vectors.size() != 3) throw Error("majority vote needs exactly 3 raters, got " + std::to_string(vectors.size()));
  same_universe(vectors[0], vectors[1]);
  same_universe(vectors[0], vectors[2]);
  JudgmentVector out{"majority", {}};
  for (const auto& [item, l] : vectors[0].labels) {
    const int ones = l + vectors[1].labels.at(item) + vectors[2].labels.at(item);
    out.labels[item] = ones >= 2 ? 1 : 0;
  }
  return out;
}

double cohen_kappa(const JudgmentVector& a, const JudgmentVector& b) {
  const auto n = contingency(a, b);
  const double total = n[0][0] + n[0][1] + n[1][0] + n[1][1];
  const double po = (n[0][0] + n[1][1]) / total;
  const double a1 = (n[1][0] + n[1][1]) / total, b1 = (n[0][1] + n[1][1]) / total;
  const double pe = a1 * b1 + (1 - a1) * (1 - b1);
  if (pe >= 1.0) return po >= 1.0 ? 1.0 : 0.0;
  return (po - pe) / (1 - pe);
}

double kendall_tau_b(const JudgmentVector& a, const JudgmentVector& b) {
  const auto n = contingency(a, b);
  // Concordant pairs differ on both raters in the same direction.
  const double c = n[1][1] * n[0][0], d = n[1][0] * n[0][1];
  auto pairs = [](double k) { return k * (k - 1) / 2; };
  const double total = n[0][0] + n[0][1] + n[1][0] + n[1][1];
  const double n0 = pairs(total);
  const double n1 = pairs(n[0][0] + n[0][1]) + pairs(n[1][0] + n[1][1]);
  const double n2 = pairs(n[0][0] + n[1][0]) + pairs(n[0][1] + n[1][1]);
  const double denom = (n0 - n1) * (n0 - n2);
  if (denom <= 0) {
    throw Error("Kendall tau-b undefined: rater '" + ((n0 - n1) <= 0 ? a.rater_id : b.rater_id) +
                "' gives the same label to every item");
  }
  return (c - d) / std::sqrt(denom);
}

double fleiss_kappa(const std::vector<JudgmentVector>& vectors) {
  if (vectors.size() < 3) throw Error("Fleiss' kappa needs at least 3 raters, got " + std::to_string(vectors.size()));
  for (std::size_t i = 1; i < vectors.size(); ++i) same_universe(vectors[0], vectors[i]);
  const auto& items = vectors[0].labels;
  if (items.empty()) throw Error("no items to compare");
  const double raters = static_cast<double>(vectors.size());
  const double N = static_cast<double>(items.size());
  double ones_total = 0, p_bar = 0;
  for (const auto& [item, _] : items) {
    double ones = 0;
    for (const auto& v : vectors) ones += v.labels.at(item);
    const double zeros = raters - ones;
    ones_total += ones;
    p_bar += (ones * ones + zeros * zeros - raters) / (raters * (raters - 1));
  }
  p_bar /= N;
  const double p1 = ones_total / (N * raters);
  const double pe = p1 * p1 + (1 - p1) * (1 - p1);
  if (pe >= 1.0) throw Error("Fleiss' kappa undefined: every rater used a single category");
  return (p_bar - pe) / (1 - pe);
}

std::string prediction_item_id(const std::string& example_id, const Quadruple& q) {
  return example_id + "|" + q.aspect.text() + "|" + q.category.value() + "|" + std::string(to_string(q.sentiment)) +
         "|" + q.opinion.text();
}

JudgmentVector gt_as_rater(const RunSet& run, const Dataset& gt, std::string rater_id) {
  JudgmentVector out{std::move(rater_id), {}};
  for (const auto& [id, preds] : run.predictions) {
    const Example* ex = gt.find(id);
    if (!ex) throw Error("run '" + run.run_id + "' has example id '" + id + "' unknown to the GT");
    for (const auto& q : preds.quads) {
      bool hit = false;
      for (const auto& g : ex->groups) hit = hit || g.contains(q);
      out.labels[prediction_item_id(id, q)] = hit ? 1 : 0;
    }
  }
  return out;
}

JudgmentVector restrict_to(const JudgmentVector& v, const JudgmentVector& universe) {
  JudgmentVector out{v.rater_id, {}};
  for (const auto& [item, _] : universe.labels) {
    auto it = v.labels.find(item);
    if (it == v.labels.end()) throw Error("item '" + item + "' is not among rater '" + v.rater_id + "' items");
    out.labels[item] = it->second;
  }
  return out;
}

AgreementTable agreement_table(const std::vector<JudgmentVector>& humans, const RunSet& run,
                               const ExpandedDataset& expanded) {
  AgreementTable t;
  const JudgmentVector majority = majority_vote(humans);
  t.items = majority.labels.size();
  for (View v : {View::kOrig, View::kZoomIn, View::kZoomOut, View::kOurs}) {
    AgreementRow row{std::string(to_string(v)), std::nullopt, std::nullopt, ""};
    const auto rater = restrict_to(gt_as_rater(run, ablation_view(expanded, v), std::string(to_string(v))), majority);
    row.kappa = 100 * cohen_kappa(rater, majority);
    try {
      row.tau = 100 * kendall_tau_b(rater, majority);
    } catch (const Error& e) {
      row.note = e.what();
    }
    t.rows.push_back(std::move(row));
  }
  try {
    t.fleiss = 100 * fleiss_kappa(humans);
  } catch (const Error& e) {
    t.fleiss_note = e.what();
  }
  return t;
}

std::string AgreementTable::table() const {
  std::ostringstream os;
  os << std::left << std::setw(12) << "GT view" << std::right << std::setw(10) << "kappa" << std::setw(10) << "tau"
     << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(12) << r.label << std::right << std::setw(10) << fmt(r.kappa) << std::setw(10)
       << fmt(r.tau);
    if (!r.note.empty()) os << "  (" << r.note << ")";
    os << "\n";
  }
  os << "Fleiss kappa among raters: " << fmt(fleiss);
  if (!fleiss_note.empty()) os << "  (" << fleiss_note << ")";
  os << "\nitems: " << items << "\n";
  return os.str();
}

}  // namespace gtexpand
