#pragma once

// Zoom-in, zoom-out and judge over each explicit GT term, followed by the
// rule filter and the aspect x opinion combination into a GtGroup.

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "gtexpand/llm_gateway.hpp"
#include "gtexpand/model.hpp"
#include "gtexpand/prompt_kit.hpp"

namespace gtexpand {

struct ExpansionConfig {
  std::string model = "gpt-4o-2024-05-13";
  double temperature = 0.3;
  int samples_per_step = 3;
  bool judge_enabled = true;
  bool zoom_in = true;
  bool zoom_out = true;
  /// Examples expanded concurrently. Output order never depends on it.
  std::size_t workers = 4;

  void validate() const;
};

struct AcceptedTerm {
  Term term;
  Origin origin;
  Verdict verdict;
};

struct ElementExpansion {
  /// Original first, then surviving candidates in order of first appearance.
  std::vector<AcceptedTerm> accepted;
  std::vector<RejectedTerm> rejected;
};

// ---------------------------------------------------------------------------
// Rule filter

/// Sentence tokens with contractions canonicalized: "n't" and "n ' t" read
/// as "not"; possessive "'s" / "' s" dropped.
std::vector<std::string> canonical_tokens(std::string_view text);

/// True if `term` occurs as a contiguous token run of `sentence` after
/// canonicalization.
bool extractable(std::string_view term, std::string_view sentence);

struct FilterResult {
  std::vector<Term> kept;
  std::vector<std::pair<Term, RejectReason>> removed;
};

/// Drops duplicates, whole-sentence terms, terms not locatable in the
/// sentence, and terms containing the paired original element (an aspect
/// candidate containing the GT opinion, or vice versa).
FilterResult rule_filter(const std::vector<Term>& candidates, std::string_view sentence,
                         const Quadruple& gt, Element element);

// ---------------------------------------------------------------------------

class Expander {
 public:
  Expander(Gateway& gateway, const PromptLibrary& prompts, ExpansionConfig config);

  /// Implicit targets return the original alone without any LLM call.
  ElementExpansion expand_element(std::string_view sentence, const Quadruple& gt, Element element) const;

  /// One group per original GT, variants = accepted aspects x accepted opinions.
  Example expand_example(const Example& example) const;

  using Progress = std::function<void(std::size_t done, std::size_t total)>;
  ExpandedDataset expand_dataset(const Dataset& dataset, const Progress& progress = {}) const;

 private:
  std::vector<Term> run_zoom(Step step, Element element, std::string_view sentence, const Quadruple& gt,
                             const std::vector<Term>& collected) const;
  Verdict run_judge(Element element, std::string_view sentence, const Quadruple& gt, const Term& candidate) const;

  Gateway& gateway_;
  const PromptLibrary& prompts_;
  ExpansionConfig config_;
};

/// Builds a group from per-element expansions.
GtGroup combine(const Quadruple& original, const ElementExpansion& aspects, const ElementExpansion& opinions);

// ---------------------------------------------------------------------------
// Ablation views

enum class View { kOrig, kZoomIn, kZoomOut, kOurs };
std::string_view to_string(View v);
View parse_view(std::string_view raw);

/// orig: originals only. zoom_in / zoom_out: every candidate produced up to
/// that step, whatever the judge or rule filter said. ours: the stored final
/// groups.
ExpandedDataset ablation_view(const ExpandedDataset& expanded, View upto);
GtGroup ablation_group(const GtGroup& group, View upto);

}  // namespace gtexpand
