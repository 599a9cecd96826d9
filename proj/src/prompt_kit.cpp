#include "gtexpand/prompt_kit.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <sstream>

#include <json.hpp>

#ifndef GTEXPAND_ASSET_DIR
#define GTEXPAND_ASSET_DIR "assets"
#endif

namespace gtexpand {

namespace {

struct Fields {
  std::string aspect, category, sentiment, opinion;

  const std::string& term(Element e) const { return e == Element::kAspect ? aspect : opinion; }
};

Fields fields_of(const Quadruple& q) {
  return {q.aspect.text(), q.category.value(), std::string(to_string(q.sentiment)), q.opinion.text()};
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string quoted(std::string_view s) { return "\"" + std::string(s) + "\""; }

std::string element_title(Element e) { return e == Element::kAspect ? "Aspect" : "Opinion"; }

std::string zoom_user(Element target, std::string_view sentence, const Fields& gt,
                      const std::vector<std::string>& collected) {
  std::ostringstream os;
  os << "Input sentence: " << quoted(sentence) << "\n";
  if (target == Element::kOpinion) {
    os << "- Category term: " << quoted(gt.category) << "\n"
       << "- Aspect term: " << quoted(gt.aspect) << "\n"
       << "- Sentiment term: " << quoted(gt.sentiment) << "\n"
       << "- Target Opinion term: " << quoted(gt.opinion) << "\n";
  } else {
    os << "- Sentiment term: " << quoted(gt.sentiment) << "\n"
       << "- Opinion term: " << quoted(gt.opinion) << "\n"
       << "- Category term: " << quoted(gt.category) << "\n"
       << "- Target Aspect term: " << quoted(gt.aspect) << "\n";
  }
  // Terms gathered by earlier steps, listed only when there is more than the
  // target itself.
  const bool extra = std::any_of(collected.begin(), collected.end(),
                                 [&](const std::string& t) { return t != gt.term(target); });
  if (extra) {
    os << "- Collected " << element_title(target) << " terms: ";
    for (std::size_t i = 0; i < collected.size(); ++i) os << (i ? ", " : "") << quoted(collected[i]);
    os << "\n";
  }
  return os.str();
}

std::string tagged(const Fields& f, const ElementOrder& order) {
  std::string out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) out += ' ';
    switch (order.at(i)) {
      case 'A': out += "[A] " + f.aspect; break;
      case 'O': out += "[O] " + f.opinion; break;
      case 'S': out += "[S] " + f.sentiment; break;
      case 'C': out += "[C] " + f.category; break;
    }
  }
  return out;
}

std::string judge_user(Element target, std::string_view sentence, const Fields& gt,
                       std::string_view candidate) {
  std::ostringstream os;
  os << "Input sentence: " << sentence << "\n"
     << "GT: " << tagged(gt, ElementOrder("ACSO")) << "\n"
     << "New " << element_title(target) << " term: " << candidate << "\n";
  return os.str();
}

std::string join_lines(const nlohmann::json& j) {
  if (j.is_string()) return j.get<std::string>();
  std::string out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (i) out += '\n';
    out += j[i].get<std::string>();
  }
  return out;
}

Fields fields_from_json(const nlohmann::json& q) {
  if (!q.is_array() || q.size() != 4) throw ParseError("demonstration quad must have 4 fields");
  return {normalize_text(q[0].get<std::string>()), normalize_text(q[1].get<std::string>()),
          normalize_text(q[2].get<std::string>()), normalize_text(q[3].get<std::string>())};
}

void require_explicit(const Term& t, std::string_view what) {
  if (t.implicit()) {
    throw Error(std::string(what) + " is implicit (\"null\"); expansion is undefined for implicit terms");
  }
}

ChatRequest base_request(const PromptTemplate& tmpl, const SamplingParams& params) {
  ChatRequest r;
  r.model = params.model;
  r.system = tmpl.system_text;
  r.temperature = params.temperature;
  r.sample_index = params.sample_index;
  r.step = std::string(to_string(tmpl.step));
  r.element = tmpl.element ? std::string(to_string(*tmpl.element)) : "";
  for (const auto& d : tmpl.demonstrations) {
    r.messages.push_back({"user", d.user});
    r.messages.push_back({"assistant", d.assistant});
  }
  return r;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string_view to_string(Step s) {
  switch (s) {
    case Step::kZoomIn: return "zoom_in";
    case Step::kZoomOut: return "zoom_out";
    case Step::kJudge: return "judge";
    case Step::kPredict: return "predict";
  }
  return "?";
}

Step parse_step(std::string_view raw) {
  if (raw == "zoom_in") return Step::kZoomIn;
  if (raw == "zoom_out") return Step::kZoomOut;
  if (raw == "judge") return Step::kJudge;
  if (raw == "predict") return Step::kPredict;
  throw ParseError("unknown step '" + std::string(raw) + "'");
}

ElementOrder::ElementOrder(std::string_view code) {
  std::string up;
  for (char c : code) up += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  std::string sorted = up;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != "ACOS") throw ParseError("element order '" + std::string(code) + "' is not a permutation of AOSC");
  code_ = std::move(up);
}

std::vector<ElementOrder> ElementOrder::all() {
  std::vector<ElementOrder> out;
  std::string code = "ACOS";
  do {
    out.emplace_back(code);
  } while (std::next_permutation(code.begin(), code.end()));
  return out;
}

std::vector<ElementOrder> all_orders() { return ElementOrder::all(); }

std::string ElementOrder::tag_sequence() const {
  std::string out;
  for (std::size_t i = 0; i < 4; ++i) {
    if (i) out += ' ';
    out += '[';
    out += code_[i];
    out += ']';
  }
  return out;
}

// ---------------------------------------------------------------------------

PromptTemplate load_template(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open prompt template " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  try {
    PromptTemplate t;
    t.step = parse_step(j.at("step").get<std::string>());
    if (j.contains("element")) t.element = parse_element(j["element"].get<std::string>());
    t.system_text = join_lines(j.at("system"));
    const auto demos = j.value("demonstrations", nlohmann::json::array());
    for (const auto& d : demos) {
      const Fields gt = fields_from_json(d.at("quad"));
      const std::string output = join_lines(d.at("output"));
      switch (t.step) {
        case Step::kZoomIn:
        case Step::kZoomOut: {
          std::vector<std::string> collected;
          for (const auto& c : d.value("collected", nlohmann::json::array())) {
            collected.push_back(normalize_text(c.get<std::string>()));
          }
          t.demonstrations.push_back(
              {zoom_user(*t.element, normalize_text(d.at("sentence").get<std::string>()), gt, collected),
               output});
          break;
        }
        case Step::kJudge:
          t.demonstrations.push_back(
              {judge_user(*t.element, normalize_text(d.at("sentence").get<std::string>()), gt,
                          normalize_text(d.at("candidate").get<std::string>())),
               output});
          break;
        case Step::kPredict:
          throw ParseError("prediction templates take their shots at render time");
      }
    }
    std::size_t expected = 0;
    if (t.step == Step::kZoomIn || t.step == Step::kZoomOut) expected = kZoomShots;
    if (t.step == Step::kJudge) expected = kJudgeShots;
    if (t.step != Step::kPredict && !t.element) throw ParseError("template needs an element");
    if (t.demonstrations.size() != expected) {
      throw ParseError(path.string() + ": expected " + std::to_string(expected) +
                       " demonstrations, found " + std::to_string(t.demonstrations.size()));
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

std::filesystem::path PromptLibrary::default_asset_dir() { return GTEXPAND_ASSET_DIR; }

PromptLibrary PromptLibrary::load(const std::filesystem::path& asset_dir, const std::string& taxonomy) {
  const auto root = asset_dir / "prompts";
  auto pick = [&](const std::string& file) {
    auto specific = root / taxonomy / file;
    if (std::filesystem::exists(specific)) return load_template(specific);
    auto common = root / "common" / file;
    if (std::filesystem::exists(common)) return load_template(common);
    throw Error("no prompt template " + file + " for taxonomy '" + taxonomy + "' under " + root.string());
  };
  PromptLibrary lib;
  lib.zoom_in_aspect_ = pick("zoom_in_aspect.json");
  lib.zoom_in_opinion_ = pick("zoom_in_opinion.json");
  lib.zoom_out_aspect_ = pick("zoom_out_aspect.json");
  lib.zoom_out_opinion_ = pick("zoom_out_opinion.json");
  lib.judge_aspect_ = pick("judge_aspect.json");
  lib.judge_opinion_ = pick("judge_opinion.json");
  lib.predict_ = pick("predict.json");
  return lib;
}

const PromptTemplate& PromptLibrary::zoom(Step step, Element element) const {
  if (step == Step::kZoomIn) return element == Element::kAspect ? zoom_in_aspect_ : zoom_in_opinion_;
  if (step == Step::kZoomOut) return element == Element::kAspect ? zoom_out_aspect_ : zoom_out_opinion_;
  throw Error("not a zoom step: " + std::string(to_string(step)));
}

const PromptTemplate& PromptLibrary::judge(Element element) const {
  return element == Element::kAspect ? judge_aspect_ : judge_opinion_;
}

// ---------------------------------------------------------------------------

std::string format_zoom_user(Element target, std::string_view sentence, const Quadruple& gt,
                             const std::vector<Term>& collected) {
  std::vector<std::string> texts;
  for (const auto& t : collected) texts.push_back(t.text());
  return zoom_user(target, normalize_text(sentence), fields_of(gt), texts);
}

std::string format_judge_user(Element target, std::string_view sentence, const Quadruple& gt,
                              const Term& candidate) {
  return judge_user(target, normalize_text(sentence), fields_of(gt), candidate.text());
}

std::string format_tagged(const Quadruple& q, const ElementOrder& order) {
  return tagged(fields_of(q), order);
}

ChatRequest render_zoom(const PromptTemplate& tmpl, std::string_view sentence, const Quadruple& gt,
                        const std::vector<Term>& collected, const SamplingParams& params) {
  if (tmpl.step != Step::kZoomIn && tmpl.step != Step::kZoomOut) {
    throw Error("render_zoom needs a zoom template");
  }
  const Element target = *tmpl.element;
  require_explicit(gt.term(target), "target " + std::string(to_string(target)));
  ChatRequest r = base_request(tmpl, params);
  r.messages.push_back({"user", format_zoom_user(target, sentence, gt, collected)});
  return r;
}

ChatRequest render_judge(const PromptTemplate& tmpl, std::string_view sentence, const Quadruple& gt,
                         const Term& candidate, const SamplingParams& params) {
  if (tmpl.step != Step::kJudge) throw Error("render_judge needs a judge template");
  require_explicit(candidate, "candidate");
  ChatRequest r = base_request(tmpl, params);
  r.messages.push_back({"user", format_judge_user(*tmpl.element, sentence, gt, candidate)});
  return r;
}

ChatRequest render_prediction(const PromptTemplate& tmpl, std::string_view sentence,
                              const ElementOrder& order, const std::vector<Shot>& shots,
                              const SamplingParams& params) {
  if (tmpl.step != Step::kPredict) throw Error("render_prediction needs the prediction template");
  if (shots.size() != kPredictShots) {
    throw Error("prediction prompt needs exactly " + std::to_string(kPredictShots) + " shots, got " +
                std::to_string(shots.size()));
  }
  ChatRequest r = base_request(tmpl, params);
  std::string system = tmpl.system_text;
  const std::string slot = "ORDER";
  for (auto pos = system.find(slot); pos != std::string::npos; pos = system.find(slot, pos)) {
    system.replace(pos, slot.size(), order.tag_sequence());
    pos += order.tag_sequence().size();
  }
  r.system = std::move(system);
  for (const auto& shot : shots) {
    std::string answer;
    for (std::size_t i = 0; i < shot.quads.size(); ++i) {
      if (i) answer += " #### ";
      answer += format_tagged(shot.quads[i], order);
    }
    r.messages.push_back({"user", normalize_text(shot.sentence)});
    r.messages.push_back({"assistant", answer});
  }
  r.messages.push_back({"user", normalize_text(sentence)});
  return r;
}

std::string render_as_text(const std::set<Quadruple>& quads, const ElementOrder& order) {
  std::string out;
  bool first = true;
  for (const auto& q : quads) {
    if (!first) out += " #### ";
    first = false;
    out += format_tagged(q, order);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<Term> parse_candidates(std::string_view response) {
  std::vector<std::string> raw;
  const std::string text(response);

  static const std::regex kQuoted(R"re("([^"\n]+)"|\xE2\x80\x9C([^\n]+?)\xE2\x80\x9D)re");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kQuoted); it != std::sregex_iterator(); ++it) {
    raw.push_back((*it)[1].matched ? (*it)[1].str() : (*it)[2].str());
  }

  if (raw.empty()) {
    static const std::regex kBullet(R"(^\s*(?:[-*]|\xE2\x80\xA2|\d+[.)])\s+(.*)$)");
    std::vector<std::string> bullets, lines;
    std::istringstream is(text);
    for (std::string line; std::getline(is, line);) {
      std::smatch m;
      if (std::regex_match(line, m, kBullet)) bullets.push_back(m[1].str());
      if (!trim(line).empty()) lines.emplace_back(trim(line));
    }
    raw = bullets.empty() ? lines : bullets;
  }

  std::vector<Term> out;
  for (auto& r : raw) {
    std::string_view v = trim(r);
    while (!v.empty() && (v.back() == ',' || v.back() == ';')) v = trim(v.substr(0, v.size() - 1));
    const std::string n = normalize_text(v);
    if (n.empty() || n == Term::kImplicit) continue;
    Term t(n);
    if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
  }
  return out;
}

VerdictParse parse_verdict(std::string_view response) {
  const std::string text = lower(response);
  std::size_t pos = std::string::npos;
  std::size_t len = 0;
  for (const std::string anchor : {"judgment:", "judgement:"}) {
    auto p = text.rfind(anchor);
    if (p != std::string::npos && (pos == std::string::npos || p > pos)) {
      pos = p;
      len = anchor.size();
    }
  }
  if (pos == std::string::npos) {
    return {Verdict::kInvalid, "no \"Judgment:\" clause in judge output"};
  }
  const std::string clause = text.substr(pos + len);
  if (clause.find("invalid") != std::string::npos) return {Verdict::kInvalid, std::nullopt};
  if (clause.find("valid") != std::string::npos) return {Verdict::kValid, std::nullopt};
  return {Verdict::kInvalid, "\"Judgment:\" clause names no verdict"};
}

TaggedParse parse_tagged(std::string_view response, const ElementOrder& order, const Taxonomy& taxonomy) {
  TaggedParse result;
  const std::string text(response);
  if (trim(text).empty()) return result;

  std::vector<std::string> chunks;
  for (std::size_t start = 0;;) {
    auto sep = text.find("####", start);
    chunks.push_back(text.substr(start, sep == std::string::npos ? std::string::npos : sep - start));
    if (sep == std::string::npos) break;
    start = sep + 4;
  }

  for (std::size_t ci = 0; ci < chunks.size(); ++ci) {
    const std::string chunk(trim(chunks[ci]));
    if (chunk.empty()) continue;
    const std::string where = "quadruple " + std::to_string(ci + 1);

    struct Found {
      char tag;
      std::size_t pos;
    };
    std::vector<Found> found;
    for (std::size_t i = 0; i + 2 < chunk.size(); ++i) {
      if (chunk[i] != '[' || chunk[i + 2] != ']') continue;
      const char t = static_cast<char>(std::toupper(static_cast<unsigned char>(chunk[i + 1])));
      if (t == 'A' || t == 'C' || t == 'S' || t == 'O') found.push_back({t, i});
    }
    std::string seen;
    for (const auto& f : found) seen += f.tag;
    std::string sorted = seen;
    std::sort(sorted.begin(), sorted.end());
    if (sorted != "ACOS") {
      result.diagnostics.push_back(where + ": expected one each of [A] [C] [S] [O], found '" + seen + "'");
      continue;
    }
    if (seen != order.code()) {
      result.diagnostics.push_back(where + ": tags in order " + seen + ", prompted " + order.code());
    }

    std::string values[4];  // A C S O
    auto slot = [](char t) { return t == 'A' ? 0 : t == 'C' ? 1 : t == 'S' ? 2 : 3; };
    for (std::size_t i = 0; i < found.size(); ++i) {
      const std::size_t begin = found[i].pos + 3;
      const std::size_t end = i + 1 < found.size() ? found[i + 1].pos : chunk.size();
      std::string_view v(chunk.data() + begin, end - begin);
      if (auto nl = v.find('\n'); nl != std::string_view::npos) v = v.substr(0, nl);
      values[slot(found[i].tag)] = normalize_text(v);
    }
    if (values[0].empty() || values[3].empty()) {
      result.diagnostics.push_back(where + ": empty aspect or opinion");
      continue;
    }
    auto category = taxonomy.canonical(values[1]);
    std::optional<Sentiment> sentiment;
    try {
      sentiment = parse_sentiment(values[2]);
    } catch (const ParseError&) {
    }
    if (!category || !sentiment) {
      ++result.malformed;
      result.diagnostics.push_back(where + ": unknown " + (category ? "sentiment '" + values[2] + "'"
                                                                    : "category '" + values[1] + "'"));
      continue;
    }
    result.quads.insert(Quadruple{Term(values[0]), Category(*category, taxonomy), *sentiment, Term(values[3])});
  }
  result.unparseable = result.quads.empty() && result.malformed == 0;
  if (result.unparseable && result.diagnostics.empty()) result.diagnostics.push_back("no tagged quadruple found");
  return result;
}

}  // namespace gtexpand
