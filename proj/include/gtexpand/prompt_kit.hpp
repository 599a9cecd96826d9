#pragma once

// Prompt templates for the zoom-in, zoom-out, judge and prediction calls, and
// the parsers that turn model output back into terms, verdicts and
// quadruples.

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "gtexpand/llm_gateway.hpp"
#include "gtexpand/model.hpp"

namespace gtexpand {

enum class Step { kZoomIn, kZoomOut, kJudge, kPredict };
std::string_view to_string(Step s);
Step parse_step(std::string_view raw);

/// Permutation of the four tags [A], [O], [S], [C].
class ElementOrder {
 public:
  /// Parses "AOSC" (case-insensitive). Throws ParseError unless a permutation.
  explicit ElementOrder(std::string_view code);

  /// All 24 permutations in lexicographic order of their codes.
  static std::vector<ElementOrder> all();

  const std::string& code() const { return code_; }
  /// "[A] [O] [S] [C]" for the prediction system prompt.
  std::string tag_sequence() const;
  char at(std::size_t i) const { return code_[i]; }

  friend bool operator==(const ElementOrder&, const ElementOrder&) = default;
  friend auto operator<=>(const ElementOrder&, const ElementOrder&) = default;

 private:
  std::string code_;
};

std::vector<ElementOrder> all_orders();

struct Demonstration {
  std::string user;
  std::string assistant;
};

struct PromptTemplate {
  Step step;
  std::optional<Element> element;
  std::string system_text;
  std::vector<Demonstration> demonstrations;
};

inline constexpr std::size_t kZoomShots = 5;
inline constexpr std::size_t kJudgeShots = 5;
inline constexpr std::size_t kPredictShots = 20;

/// Loads a template asset. Zoom and judge templates must carry exactly five
/// demonstrations; the prediction template carries none (shots are bound at
/// render time).
PromptTemplate load_template(const std::filesystem::path& path);

/// The seven templates for one taxonomy.
///
/// Layout under `asset_dir/prompts/`: a file is looked up in
/// `<taxonomy>/` first, then in `common/`.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::filesystem::path& asset_dir, const std::string& taxonomy);
  /// Compiled-in asset directory of this build.
  static std::filesystem::path default_asset_dir();

  const PromptTemplate& zoom(Step step, Element element) const;
  const PromptTemplate& judge(Element element) const;
  const PromptTemplate& predict() const { return predict_; }

 private:
  PromptTemplate zoom_in_aspect_, zoom_in_opinion_, zoom_out_aspect_, zoom_out_opinion_;
  PromptTemplate judge_aspect_, judge_opinion_;
  PromptTemplate predict_;
};

// ---------------------------------------------------------------------------
// User-turn formatting, shared by demonstrations and live requests

std::string format_zoom_user(Element target, std::string_view sentence, const Quadruple& gt,
                             const std::vector<Term>& collected);
std::string format_judge_user(Element target, std::string_view sentence, const Quadruple& gt,
                              const Term& candidate);
/// "[A] a [C] c [S] s [O] o" laid out in `order`.
std::string format_tagged(const Quadruple& q, const ElementOrder& order);

// ---------------------------------------------------------------------------
// Rendering

struct SamplingParams {
  std::string model;
  double temperature = 0.0;
  int sample_index = 0;
};

/// Zoom-in / zoom-out request for the `element` of `gt`. `collected` is the
/// accumulated term set threaded through the steps; the original term stays
/// the target. Throws Error if the target term is implicit.
ChatRequest render_zoom(const PromptTemplate& tmpl, std::string_view sentence,
                        const Quadruple& gt, const std::vector<Term>& collected,
                        const SamplingParams& params);

/// Judge request for one candidate. Throws Error if the candidate is implicit.
ChatRequest render_judge(const PromptTemplate& tmpl, std::string_view sentence,
                         const Quadruple& gt, const Term& candidate, const SamplingParams& params);

struct Shot {
  std::string sentence;
  std::vector<Quadruple> quads;
};

/// Prediction request: the system prompt with its ORDER slot filled, the 20
/// shots as user/assistant turns in `order`, then `sentence`.
ChatRequest render_prediction(const PromptTemplate& tmpl, std::string_view sentence,
                              const ElementOrder& order, const std::vector<Shot>& shots,
                              const SamplingParams& params);

/// Quadruples joined by " #### " in `order`. Order of quadruples follows the
/// set order.
std::string render_as_text(const std::set<Quadruple>& quads, const ElementOrder& order);

// ---------------------------------------------------------------------------
// Parsing

/// Candidate terms from a zoom response. Quoted strings win; otherwise
/// bulleted or numbered lines; otherwise every non-empty line.
std::vector<Term> parse_candidates(std::string_view response);

struct VerdictParse {
  Verdict verdict;  // kValid or kInvalid
  std::optional<std::string> diagnostic;
};

/// Valid iff the clause after the last "Judgment:" mentions "valid" and not
/// "invalid". No such clause gives invalid plus a diagnostic.
VerdictParse parse_verdict(std::string_view response);

struct TaggedParse {
  std::set<Quadruple> quads;
  std::size_t malformed = 0;
  std::vector<std::string> diagnostics;
  /// Non-empty text from which nothing usable was parsed.
  bool unparseable = false;
};

/// Splits on "####" and reads the four tags from each chunk in whatever order
/// they appear. Chunks missing a tag are dropped; chunks with an unknown
/// category or sentiment count as malformed.
TaggedParse parse_tagged(std::string_view response, const ElementOrder& order,
                         const Taxonomy& taxonomy);

}  // namespace gtexpand
