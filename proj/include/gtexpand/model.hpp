#pragma once

// Domain types shared by the expansion pipeline, the scorers and the
// annotation tooling. Everything here is immutable once constructed.

#include <compare>
#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gtexpand {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line` is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A structurally valid record that violates a domain invariant.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Sentiment

enum class Sentiment { kPositive, kNeutral, kNegative };

Sentiment parse_sentiment(std::string_view raw);
std::string_view to_string(Sentiment s);

// ---------------------------------------------------------------------------
// Category taxonomy

/// A closed set of category labels. Labels are stored normalized
/// (lowercase, single spaces).
class Taxonomy {
 public:
  Taxonomy(std::string name, std::vector<std::string> labels,
           std::map<std::string, std::string> aliases = {},
           bool entity_level = false);

  /// SemEval-2016 restaurant entity#attribute pairs (13 labels).
  static const Taxonomy& restaurant();
  /// ACOS laptop entity-level labels (23 labels).
  static const Taxonomy& laptop();
  /// "restaurant", "laptop", or a path to a newline-separated label file.
  static std::shared_ptr<const Taxonomy> resolve(const std::string& name_or_path);

  const std::string& name() const { return name_; }
  const std::vector<std::string>& labels() const { return labels_; }

  /// Normalizes `raw` and maps aliases; nullopt if not a member.
  std::optional<std::string> canonical(std::string_view raw) const;
  bool contains(std::string_view raw) const { return canonical(raw).has_value(); }

 private:
  std::string name_;
  std::vector<std::string> labels_;
  std::set<std::string> members_;
  std::map<std::string, std::string> aliases_;
  bool entity_level_;
};

class Category {
 public:
  /// Throws ParseError if `raw` is not in `taxonomy`.
  Category(std::string_view raw, const Taxonomy& taxonomy);

  const std::string& value() const { return value_; }
  const std::string& taxonomy() const { return taxonomy_; }

  friend bool operator==(const Category& a, const Category& b) { return a.value_ == b.value_; }
  friend auto operator<=>(const Category& a, const Category& b) { return a.value_ <=> b.value_; }

 private:
  std::string value_;
  std::string taxonomy_;
};

// ---------------------------------------------------------------------------
// Terms

/// An aspect or opinion span, normalized. "null" marks an implicit term.
class Term {
 public:
  explicit Term(std::string_view raw);

  const std::string& text() const { return text_; }
  bool implicit() const { return text_ == kImplicit; }

  friend bool operator==(const Term&, const Term&) = default;
  friend auto operator<=>(const Term&, const Term&) = default;

  static constexpr std::string_view kImplicit = "null";

 private:
  std::string text_;
};

/// Lowercase, collapse whitespace runs, trim. Throws ParseError if empty.
Term normalize_term(std::string_view raw);

/// The same normalization without the non-empty check.
std::string normalize_text(std::string_view raw);

// ---------------------------------------------------------------------------
// Quadruples

enum class Element { kAspect, kOpinion };
std::string_view to_string(Element e);
Element parse_element(std::string_view raw);

struct Quadruple {
  Term aspect;
  Category category;
  Sentiment sentiment;
  Term opinion;

  const Term& term(Element e) const { return e == Element::kAspect ? aspect : opinion; }
  Quadruple with_term(Element e, Term t) const;

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
  friend auto operator<=>(const Quadruple&, const Quadruple&) = default;
};

bool quad_equal(const Quadruple& a, const Quadruple& b);

/// Builds a quadruple from raw (aspect, category, sentiment, opinion) strings.
Quadruple make_quadruple(std::string_view aspect, std::string_view category,
                         std::string_view sentiment, std::string_view opinion,
                         const Taxonomy& taxonomy);

/// "(aspect, category, sentiment, opinion)" for messages and tables.
std::string describe(const Quadruple& q);

struct QuadrupleHash {
  std::size_t operator()(const Quadruple& q) const noexcept;
};

// ---------------------------------------------------------------------------
// Expanded ground truth

enum class Origin { kOriginal, kZoomIn, kZoomOut };
enum class Verdict { kNotJudged, kValid, kInvalid };

std::string_view to_string(Origin o);
std::string_view to_string(Verdict v);
Origin parse_origin(std::string_view raw);
Verdict parse_verdict_label(std::string_view raw);

struct Variant {
  Quadruple quadruple;
  Origin aspect_origin = Origin::kOriginal;
  Origin opinion_origin = Origin::kOriginal;
  Verdict judge_aspect = Verdict::kNotJudged;
  Verdict judge_opinion = Verdict::kNotJudged;

  friend bool operator==(const Variant&, const Variant&) = default;
};

/// Why a generated candidate term did not make it into the group.
enum class RejectReason { kJudgeInvalid, kWholeSentence, kNotExtractable, kContainsPairedTerm };
std::string_view to_string(RejectReason r);
RejectReason parse_reject_reason(std::string_view raw);

struct RejectedTerm {
  Element element;
  Term term;
  Origin origin;
  RejectReason reason;

  friend bool operator==(const RejectedTerm&, const RejectedTerm&) = default;
};

/// One original GT quadruple and every accepted surface-form variant of it.
class GtGroup {
 public:
  /// Validates: original present with original origins, shared category and
  /// sentiment, no duplicate quadruples. Throws SchemaError.
  GtGroup(Quadruple original, std::vector<Variant> variants,
          std::vector<RejectedTerm> rejected = {});

  /// A group holding only the original.
  static GtGroup singleton(const Quadruple& original);

  const Quadruple& original() const { return original_; }
  const std::vector<Variant>& variants() const { return variants_; }
  const std::vector<RejectedTerm>& rejected() const { return rejected_; }

  bool contains(const Quadruple& q) const;
  /// True if no variant carries an invalid judge verdict.
  bool is_final() const;

  friend bool operator==(const GtGroup&, const GtGroup&) = default;

 private:
  Quadruple original_;
  std::vector<Variant> variants_;
  std::vector<RejectedTerm> rejected_;
};

struct Example {
  std::string id;
  std::string sentence;
  std::vector<GtGroup> groups;

  friend bool operator==(const Example&, const Example&) = default;
};

/// "{dataset}:{zero-based line index}".
std::string example_id(std::string_view dataset, std::size_t index);

/// A source or expanded dataset. Source datasets hold singleton groups.
struct Dataset {
  std::string name;
  std::shared_ptr<const Taxonomy> taxonomy;
  std::vector<Example> examples;

  const Example* find(std::string_view id) const;
};

using ExpandedDataset = Dataset;

// ---------------------------------------------------------------------------
// Predictions

struct PredictionSet {
  std::set<Quadruple> quads;
  /// Tagged outputs with all four fields present but an unknown category or
  /// sentiment. They cannot match any GT and score as false positives.
  std::size_t malformed = 0;

  friend bool operator==(const PredictionSet&, const PredictionSet&) = default;
};

struct RunSet {
  std::string run_id;
  std::map<std::string, PredictionSet> predictions;

  friend bool operator==(const RunSet&, const RunSet&) = default;
};

}  // namespace gtexpand
