#include "gtexpand/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <sstream>

namespace gtexpand {

ParseError::ParseError(const std::string& what, std::size_t line)
    : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

Sentiment parse_sentiment(std::string_view raw) {
  const std::string s = normalize_text(raw);
  if (s == "positive") return Sentiment::kPositive;
  if (s == "neutral") return Sentiment::kNeutral;
  if (s == "negative") return Sentiment::kNegative;
  throw ParseError("unknown sentiment '" + std::string(raw) + "'");
}

std::string_view to_string(Sentiment s) {
  switch (s) {
    case Sentiment::kPositive: return "positive";
    case Sentiment::kNeutral: return "neutral";
    case Sentiment::kNegative: return "negative";
  }
  return "?";
}

// ---------------------------------------------------------------------------

Taxonomy::Taxonomy(std::string name, std::vector<std::string> labels,
                   std::map<std::string, std::string> aliases, bool entity_level)
    : name_(std::move(name)), aliases_(std::move(aliases)), entity_level_(entity_level) {
  for (auto& l : labels) {
    std::string n = normalize_text(l);
    if (n.empty()) continue;
    if (members_.insert(n).second) labels_.push_back(n);
  }
  if (labels_.empty()) throw SchemaError("taxonomy '" + name_ + "' has no labels");
}

const Taxonomy& Taxonomy::restaurant() {
  static const Taxonomy t(
      "restaurant",
      {"location general", "food prices", "food quality", "food general",
       "food style&options", "ambience general", "service general", "restaurant general",
       "restaurant prices", "restaurant miscellaneous", "drinks prices", "drinks quality",
       "drinks style&options"},
      // ASQP files spell the attribute "style_options".
      {{"food style_options", "food style&options"},
       {"drinks style_options", "drinks style&options"}});
  return t;
}

const Taxonomy& Taxonomy::laptop() {
  static const Taxonomy t(
      "laptop",
      {"laptop", "display", "keyboard", "mouse", "motherboard", "cpu", "fans_cooling",
       "ports", "memory", "power_supply", "optical_drives", "battery", "graphics",
       "hard_disk", "multimedia_devices", "hardware", "software", "os", "warranty",
       "shipping", "support", "company", "out_of_scope"},
      {}, /*entity_level=*/true);
  return t;
}

std::shared_ptr<const Taxonomy> Taxonomy::resolve(const std::string& name_or_path) {
  if (name_or_path == "restaurant") return {std::shared_ptr<const Taxonomy>{}, &restaurant()};
  if (name_or_path == "laptop") return {std::shared_ptr<const Taxonomy>{}, &laptop()};
  std::ifstream in(name_or_path);
  if (!in) throw Error("unknown taxonomy '" + name_or_path + "' (not a builtin name or readable file)");
  std::vector<std::string> labels;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.front() == '#') continue;
    labels.push_back(line);
  }
  return std::make_shared<const Taxonomy>(name_or_path, std::move(labels));
}

std::optional<std::string> Taxonomy::canonical(std::string_view raw) const {
  std::string n = normalize_text(raw);
  if (entity_level_) {
    // ACOS laptop labels are ENTITY#ATTRIBUTE; only the entity is kept.
    if (auto hash = n.find('#'); hash != std::string::npos) n = n.substr(0, hash);
  }
  if (auto it = aliases_.find(n); it != aliases_.end()) n = it->second;
  if (members_.count(n)) return n;
  return std::nullopt;
}

Category::Category(std::string_view raw, const Taxonomy& taxonomy) : taxonomy_(taxonomy.name()) {
  auto c = taxonomy.canonical(raw);
  if (!c) {
    throw ParseError("category '" + std::string(raw) + "' is not in taxonomy '" +
                     taxonomy.name() + "'");
  }
  value_ = std::move(*c);
}

// ---------------------------------------------------------------------------

std::string normalize_text(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (unsigned char c : raw) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

Term::Term(std::string_view raw) : text_(normalize_text(raw)) {
  if (text_.empty()) throw ParseError("empty term");
}

Term normalize_term(std::string_view raw) { return Term(raw); }

// ---------------------------------------------------------------------------

std::string_view to_string(Element e) { return e == Element::kAspect ? "aspect" : "opinion"; }

Element parse_element(std::string_view raw) {
  const std::string s = lower(raw);
  if (s == "aspect" || s == "a") return Element::kAspect;
  if (s == "opinion" || s == "o") return Element::kOpinion;
  throw ParseError("unknown element '" + std::string(raw) + "'");
}

Quadruple Quadruple::with_term(Element e, Term t) const {
  Quadruple q = *this;
  (e == Element::kAspect ? q.aspect : q.opinion) = std::move(t);
  return q;
}

bool quad_equal(const Quadruple& a, const Quadruple& b) { return a == b; }

Quadruple make_quadruple(std::string_view aspect, std::string_view category,
                         std::string_view sentiment, std::string_view opinion,
                         const Taxonomy& taxonomy) {
  return Quadruple{Term(aspect), Category(category, taxonomy), parse_sentiment(sentiment),
                   Term(opinion)};
}

std::string describe(const Quadruple& q) {
  std::ostringstream os;
  os << "('" << q.aspect.text() << "', " << q.category.value() << ", " << to_string(q.sentiment)
     << ", '" << q.opinion.text() << "')";
  return os.str();
}

std::size_t QuadrupleHash::operator()(const Quadruple& q) const noexcept {
  std::hash<std::string> h;
  std::size_t seed = h(q.aspect.text());
  auto mix = [&seed](std::size_t v) { seed ^= v + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2); };
  mix(h(q.category.value()));
  mix(static_cast<std::size_t>(q.sentiment));
  mix(h(q.opinion.text()));
  return seed;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::kOriginal: return "original";
    case Origin::kZoomIn: return "zoom_in";
    case Origin::kZoomOut: return "zoom_out";
  }
  return "?";
}

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::kNotJudged: return "not_judged";
    case Verdict::kValid: return "valid";
    case Verdict::kInvalid: return "invalid";
  }
  return "?";
}

Origin parse_origin(std::string_view raw) {
  if (raw == "original") return Origin::kOriginal;
  if (raw == "zoom_in") return Origin::kZoomIn;
  if (raw == "zoom_out") return Origin::kZoomOut;
  throw ParseError("unknown origin '" + std::string(raw) + "'");
}

Verdict parse_verdict_label(std::string_view raw) {
  if (raw == "not_judged") return Verdict::kNotJudged;
  if (raw == "valid") return Verdict::kValid;
  if (raw == "invalid") return Verdict::kInvalid;
  throw ParseError("unknown judge verdict '" + std::string(raw) + "'");
}

std::string_view to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kJudgeInvalid: return "judge_invalid";
    case RejectReason::kWholeSentence: return "whole_sentence";
    case RejectReason::kNotExtractable: return "not_extractable";
    case RejectReason::kContainsPairedTerm: return "contains_paired_term";
  }
  return "?";
}

RejectReason parse_reject_reason(std::string_view raw) {
  if (raw == "judge_invalid") return RejectReason::kJudgeInvalid;
  if (raw == "whole_sentence") return RejectReason::kWholeSentence;
  if (raw == "not_extractable") return RejectReason::kNotExtractable;
  if (raw == "contains_paired_term") return RejectReason::kContainsPairedTerm;
  throw ParseError("unknown reject reason '" + std::string(raw) + "'");
}

// ---------------------------------------------------------------------------

GtGroup::GtGroup(Quadruple original, std::vector<Variant> variants,
                 std::vector<RejectedTerm> rejected)
    : original_(std::move(original)), variants_(std::move(variants)), rejected_(std::move(rejected)) {
  bool has_original = false;
  std::set<Quadruple> seen;
  for (const auto& v : variants_) {
    const auto& q = v.quadruple;
    if (q.category != original_.category || q.sentiment != original_.sentiment) {
      throw SchemaError("variant " + describe(q) + " changes category or sentiment of " +
                        describe(original_));
    }
    if (!seen.insert(q).second) throw SchemaError("duplicate variant " + describe(q));
    if (q == original_) {
      if (v.aspect_origin != Origin::kOriginal || v.opinion_origin != Origin::kOriginal) {
        throw SchemaError("original quadruple " + describe(q) + " tagged with a generated origin");
      }
      has_original = true;
    }
  }
  if (!has_original) throw SchemaError("group is missing its original " + describe(original_));
}

GtGroup GtGroup::singleton(const Quadruple& original) {
  return GtGroup(original, {Variant{original}});
}

bool GtGroup::contains(const Quadruple& q) const {
  return std::any_of(variants_.begin(), variants_.end(),
                     [&](const Variant& v) { return v.quadruple == q; });
}

bool GtGroup::is_final() const {
  return std::none_of(variants_.begin(), variants_.end(), [](const Variant& v) {
    return v.judge_aspect == Verdict::kInvalid || v.judge_opinion == Verdict::kInvalid;
  });
}

std::string example_id(std::string_view dataset, std::size_t index) {
  return std::string(dataset) + ":" + std::to_string(index);
}

const Example* Dataset::find(std::string_view id) const {
  for (const auto& e : examples) {
    if (e.id == id) return &e;
  }
  return nullptr;
}

}  // namespace gtexpand
