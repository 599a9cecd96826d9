#pragma once

// Binary-label agreement statistics between raters, and GT sets used as
// raters over predicted quadruples.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gtexpand/expander.hpp"
#include "gtexpand/model.hpp"

namespace gtexpand {

struct JudgmentVector {
  std::string rater_id;
  /// item id -> 1 (valid / correct) or 0
  std::map<std::string, int> labels;
};

/// Per item, 1 iff at least two of exactly three raters said 1.
JudgmentVector majority_vote(const std::vector<JudgmentVector>& vectors);

/// Cohen's kappa on two raters. p_e = 1 gives 1 when p_o = 1, else 0.
double cohen_kappa(const JudgmentVector& a, const JudgmentVector& b);

/// Kendall tau-b. Throws Error if either vector is constant.
double kendall_tau_b(const JudgmentVector& a, const JudgmentVector& b);

/// Fleiss' kappa over three or more raters with two categories. Throws Error
/// when expected agreement is 1.
double fleiss_kappa(const std::vector<JudgmentVector>& vectors);

/// "{example id}|{aspect}|{category}|{sentiment}|{opinion}".
std::string prediction_item_id(const std::string& example_id, const Quadruple& q);

/// Label 1 iff the prediction belongs to some group's variants (membership,
/// each prediction judged on its own).
JudgmentVector gt_as_rater(const RunSet& run, const Dataset& gt, std::string rater_id = "gt");

/// Restricts `v` to the items of `universe`. Throws Error if an item of the
/// universe is missing from `v`.
JudgmentVector restrict_to(const JudgmentVector& v, const JudgmentVector& universe);

struct AgreementRow {
  std::string label;
  std::optional<double> kappa;  // x100
  std::optional<double> tau;    // x100
  std::string note;             // why a cell is undefined
};

struct AgreementTable {
  std::vector<AgreementRow> rows;
  std::optional<double> fleiss;  // x100
  std::string fleiss_note;
  std::size_t items = 0;

  std::string table() const;
};

/// Each ablation view of `expanded`, used as a rater on `run`, against the
/// majority vote of `humans` (exactly three).
AgreementTable agreement_table(const std::vector<JudgmentVector>& humans, const RunSet& run,
                               const ExpandedDataset& expanded);

}  // namespace gtexpand
