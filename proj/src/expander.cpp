#include "gtexpand/expander.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace gtexpand {

void ExpansionConfig::validate() const {
  if (samples_per_step < 1) throw Error("samples per step must be at least 1");
  if (temperature < 0.0 || temperature > 2.0) throw Error("temperature must lie in [0, 2]");
  if (workers < 1) throw Error("workers must be at least 1");
}

// ---------------------------------------------------------------------------

namespace {

bool is_apostrophe(std::string_view t) { return t == "'" || t == "\xE2\x80\x99"; }

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool contains_run(const std::vector<std::string>& hay, const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > hay.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

bool is_punct_token(std::string_view t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::ispunct(c); });
}

}  // namespace

std::vector<std::string> canonical_tokens(std::string_view text) {
  std::vector<std::string> raw;
  std::istringstream is{normalize_text(text)};
  for (std::string t; is >> t;) raw.push_back(t);

  std::vector<std::string> out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const std::string& t = raw[i];
    // "n ' t" split across three tokens
    if (t == "n" && i + 2 < raw.size() && is_apostrophe(raw[i + 1]) && raw[i + 2] == "t") {
      out.push_back("not");
      i += 2;
      continue;
    }
    // possessive split as "' s"
    if (is_apostrophe(t) && i + 1 < raw.size() && raw[i + 1] == "s") {
      ++i;
      continue;
    }
    if (t == "'s" || t == "\xE2\x80\x99s") continue;
    if (t == "n't" || t == "n\xE2\x80\x99t") {
      out.push_back("not");
      continue;
    }
    for (std::string_view suffix : {"n't", "n\xE2\x80\x99t"}) {
      if (ends_with(t, suffix) && t.size() > suffix.size()) {
        out.push_back(t.substr(0, t.size() - suffix.size()));
        out.push_back("not");
        goto next;
      }
    }
    for (std::string_view suffix : {"'s", "\xE2\x80\x99s"}) {
      if (ends_with(t, suffix) && t.size() > suffix.size()) {
        out.push_back(t.substr(0, t.size() - suffix.size()));
        goto next;
      }
    }
    out.push_back(t);
  next:;
  }
  return out;
}

bool extractable(std::string_view term, std::string_view sentence) {
  return contains_run(canonical_tokens(sentence), canonical_tokens(term));
}

FilterResult rule_filter(const std::vector<Term>& candidates, std::string_view sentence, const Quadruple& gt,
                         Element element) {
  FilterResult out;
  const auto sent = canonical_tokens(sentence);
  auto bare = sent;
  while (!bare.empty() && is_punct_token(bare.back())) bare.pop_back();
  const Term& paired = gt.term(element == Element::kAspect ? Element::kOpinion : Element::kAspect);
  const auto paired_tokens = paired.implicit() ? std::vector<std::string>{} : canonical_tokens(paired.text());

  std::set<Term> seen;
  for (const auto& c : candidates) {
    if (!seen.insert(c).second) continue;
    const auto toks = canonical_tokens(c.text());
    if (toks == sent || (!bare.empty() && toks == bare)) {
      out.removed.emplace_back(c, RejectReason::kWholeSentence);
    } else if (!contains_run(sent, toks)) {
      out.removed.emplace_back(c, RejectReason::kNotExtractable);
    } else if (contains_run(toks, paired_tokens)) {
      out.removed.emplace_back(c, RejectReason::kContainsPairedTerm);
    } else {
      out.kept.push_back(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Expander::Expander(Gateway& gateway, const PromptLibrary& prompts, ExpansionConfig config)
    : gateway_(gateway), prompts_(prompts), config_(std::move(config)) {
  config_.validate();
}

std::vector<Term> Expander::run_zoom(Step step, Element element, std::string_view sentence, const Quadruple& gt,
                                     const std::vector<Term>& collected) const {
  const PromptTemplate& tmpl = prompts_.zoom(step, element);
  std::vector<Term> out;
  for (int k = 0; k < config_.samples_per_step; ++k) {
    auto req = render_zoom(tmpl, sentence, gt, collected, {config_.model, config_.temperature, k});
    for (auto& t : parse_candidates(gateway_.complete(req))) {
      if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(std::move(t));
    }
  }
  return out;
}

Verdict Expander::run_judge(Element element, std::string_view sentence, const Quadruple& gt,
                            const Term& candidate) const {
  auto req = render_judge(prompts_.judge(element), sentence, gt, candidate, {config_.model, 0.0, 0});
  return parse_verdict(gateway_.complete(req)).verdict;
}

ElementExpansion Expander::expand_element(std::string_view sentence, const Quadruple& gt, Element element) const {
  ElementExpansion out;
  const Term& original = gt.term(element);
  out.accepted.push_back({original, Origin::kOriginal, Verdict::kNotJudged});
  if (original.implicit()) return out;

  // E threads through the steps: each step sees everything collected so far.
  std::vector<Term> collected{original};
  std::vector<std::pair<Term, Origin>> fresh;
  auto absorb = [&](Step step, Origin origin) {
    for (auto& t : run_zoom(step, element, sentence, gt, collected)) {
      if (std::find(collected.begin(), collected.end(), t) != collected.end()) continue;
      collected.push_back(t);
      fresh.emplace_back(std::move(t), origin);
    }
  };
  if (config_.zoom_in) absorb(Step::kZoomIn, Origin::kZoomIn);
  if (config_.zoom_out) absorb(Step::kZoomOut, Origin::kZoomOut);

  std::vector<Term> candidates;
  for (const auto& [t, o] : fresh) candidates.push_back(t);
  const FilterResult filtered = rule_filter(candidates, sentence, gt, element);
  auto origin_of = [&](const Term& t) {
    for (const auto& [ft, o] : fresh) {
      if (ft == t) return o;
    }
    return Origin::kOriginal;
  };
  std::set<Term> removed;
  for (const auto& [t, reason] : filtered.removed) removed.insert(t);

  // Walk candidates in production order so accepted and rejected lists keep
  // the order the steps emitted them.
  for (const auto& [t, origin] : fresh) {
    if (removed.count(t)) {
      for (const auto& [rt, reason] : filtered.removed) {
        if (rt == t) out.rejected.push_back({element, t, origin, reason});
      }
      continue;
    }
    Verdict v = Verdict::kNotJudged;
    if (config_.judge_enabled) {
      v = run_judge(element, sentence, gt, t);
      if (v == Verdict::kInvalid) {
        out.rejected.push_back({element, t, origin, RejectReason::kJudgeInvalid});
        continue;
      }
    }
    out.accepted.push_back({t, origin_of(t), v});
  }
  return out;
}

GtGroup combine(const Quadruple& original, const ElementExpansion& aspects, const ElementExpansion& opinions) {
  std::vector<Variant> variants;
  std::set<Quadruple> seen;
  for (const auto& a : aspects.accepted) {
    for (const auto& o : opinions.accepted) {
      Quadruple q = original.with_term(Element::kAspect, a.term).with_term(Element::kOpinion, o.term);
      if (!seen.insert(q).second) continue;
      variants.push_back(Variant{std::move(q), a.origin, o.origin, a.verdict, o.verdict});
    }
  }
  std::vector<RejectedTerm> rejected = aspects.rejected;
  rejected.insert(rejected.end(), opinions.rejected.begin(), opinions.rejected.end());
  return GtGroup(original, std::move(variants), std::move(rejected));
}

Example Expander::expand_example(const Example& example) const {
  Example out{example.id, example.sentence, {}};
  for (const auto& g : example.groups) {
    const Quadruple& y = g.original();
    out.groups.push_back(combine(y, expand_element(example.sentence, y, Element::kAspect),
                                 expand_element(example.sentence, y, Element::kOpinion)));
  }
  return out;
}

ExpandedDataset Expander::expand_dataset(const Dataset& dataset, const Progress& progress) const {
  ExpandedDataset out{dataset.name, dataset.taxonomy, {}};
  const std::size_t n = dataset.examples.size();
  std::vector<std::optional<Example>> results(n);
  std::atomic<std::size_t> next{0}, done{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      {
        std::lock_guard lock(failure_mutex);
        if (failure) return;
      }
      try {
        results[i] = expand_example(dataset.examples[i]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        return;
      }
      const std::size_t d = ++done;
      if (progress) {
        std::lock_guard lock(failure_mutex);
        progress(d, n);
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t workers = std::min(config_.workers, std::max<std::size_t>(n, 1));
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  for (auto& r : results) out.examples.push_back(std::move(*r));
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(View v) {
  switch (v) {
    case View::kOrig: return "orig";
    case View::kZoomIn: return "zoom_in";
    case View::kZoomOut: return "zoom_out";
    case View::kOurs: return "ours";
  }
  return "?";
}

View parse_view(std::string_view raw) {
  if (raw == "orig") return View::kOrig;
  if (raw == "zoom_in") return View::kZoomIn;
  if (raw == "zoom_out") return View::kZoomOut;
  if (raw == "ours") return View::kOurs;
  throw ParseError("unknown view '" + std::string(raw) + "' (orig, zoom_in, zoom_out, ours)");
}

GtGroup ablation_group(const GtGroup& group, View upto) {
  if (upto == View::kOurs) return group;
  if (upto == View::kOrig) return GtGroup::singleton(group.original());

  auto admitted = [upto](Origin o) {
    return o == Origin::kOriginal || o == Origin::kZoomIn || (upto == View::kZoomOut && o == Origin::kZoomOut);
  };
  ElementExpansion per[2];
  for (Element e : {Element::kAspect, Element::kOpinion}) {
    auto& acc = per[static_cast<int>(e)].accepted;
    auto add = [&acc](const Term& t, Origin o, Verdict v) {
      for (const auto& a : acc) {
        if (a.term == t) return;
      }
      acc.push_back({t, o, v});
    };
    add(group.original().term(e), Origin::kOriginal, Verdict::kNotJudged);
    for (const auto& v : group.variants()) {
      const Origin o = e == Element::kAspect ? v.aspect_origin : v.opinion_origin;
      const Verdict j = e == Element::kAspect ? v.judge_aspect : v.judge_opinion;
      if (admitted(o)) add(v.quadruple.term(e), o, j);
    }
    for (const auto& r : group.rejected()) {
      if (r.element != e || !admitted(r.origin)) continue;
      add(r.term, r.origin, r.reason == RejectReason::kJudgeInvalid ? Verdict::kInvalid : Verdict::kNotJudged);
    }
  }
  return combine(group.original(), per[0], per[1]);
}

ExpandedDataset ablation_view(const ExpandedDataset& expanded, View upto) {
  ExpandedDataset out{expanded.name, expanded.taxonomy, {}};
  for (const auto& ex : expanded.examples) {
    Example e{ex.id, ex.sentence, {}};
    for (const auto& g : ex.groups) e.groups.push_back(ablation_group(g, upto));
    out.examples.push_back(std::move(e));
  }
  return out;
}

}  // namespace gtexpand
