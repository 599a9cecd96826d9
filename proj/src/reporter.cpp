#include "gtexpand/reporter.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

namespace gtexpand {

namespace {

std::set<Term> group_terms(const GtGroup& g, Element e) {
  std::set<Term> out;
  for (const auto& v : g.variants()) {
    if (!v.quadruple.term(e).implicit()) out.insert(v.quadruple.term(e));
  }
  return out;
}

std::size_t words(const std::string& s) {
  std::istringstream is(s);
  std::size_t n = 0;
  for (std::string w; is >> w;) ++n;
  return n;
}

}  // namespace

std::vector<StepDelta> step_deltas(const Dataset& expanded) {
  std::vector<StepDelta> rows;
  for (Element e : {Element::kAspect, Element::kOpinion}) {
    StepDelta d{expanded.name, e};
    for (const auto& ex : expanded.examples) {
      for (const auto& g : ex.groups) {
        if (g.original().term(e).implicit()) continue;
        ++d.orig;
        const auto kept = group_terms(g, e);
        d.final += kept.size();
        // Accepted new terms, by origin.
        std::set<Term> counted;
        for (const auto& v : g.variants()) {
          const Origin o = e == Element::kAspect ? v.aspect_origin : v.opinion_origin;
          const Term& t = v.quadruple.term(e);
          if (o == Origin::kOriginal || !counted.insert(t).second) continue;
          (o == Origin::kZoomIn ? d.zoom_in : d.zoom_out) += 1;
        }
        for (const auto& r : g.rejected()) {
          if (r.element != e) continue;
          (r.origin == Origin::kZoomIn ? d.zoom_in : d.zoom_out) += 1;
          ++d.removed;
          (r.reason == RejectReason::kJudgeInvalid ? d.judge_invalid : d.rule_filtered) += 1;
        }
      }
    }
    rows.push_back(d);
  }
  return rows;
}

std::string step_delta_table(const std::vector<StepDelta>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "Dataset" << std::setw(9) << "Element" << std::right << std::setw(8) << "Orig."
     << std::setw(9) << "Zoom-In" << std::setw(10) << "Zoom-Out" << std::setw(9) << "Filter*" << std::setw(8)
     << "Ours" << "\n";
  for (const auto& r : rows) {
    os << std::left << std::setw(16) << r.dataset << std::setw(9) << to_string(r.element) << std::right
       << std::setw(8) << r.orig << std::setw(9) << ("+" + std::to_string(r.zoom_in)) << std::setw(10)
       << ("+" + std::to_string(r.zoom_out)) << std::setw(9) << ("-" + std::to_string(r.removed)) << std::setw(8)
       << r.final << "\n";
  }
  return os.str();
}

std::vector<WordCountStats> word_count_stats(const Dataset& dataset) {
  std::vector<WordCountStats> out;
  for (Element e : {Element::kAspect, Element::kOpinion}) {
    std::vector<double> counts;
    for (const auto& ex : dataset.examples) {
      for (const auto& g : ex.groups) {
        for (const auto& t : group_terms(g, e)) counts.push_back(static_cast<double>(words(t.text())));
      }
    }
    WordCountStats s{e, counts.size()};
    if (!counts.empty()) {
      double sum = 0;
      for (double c : counts) sum += c;
      s.mean = sum / static_cast<double>(counts.size());
      double var = 0;
      for (double c : counts) var += (c - s.mean) * (c - s.mean);
      s.stddev = std::sqrt(var / static_cast<double>(counts.size()));
    }
    out.push_back(s);
  }
  return out;
}

std::string word_count_table(const std::vector<WordCountStats>& orig, const std::vector<WordCountStats>& ours) {
  std::ostringstream os;
  os << std::left << std::setw(9) << "Element" << std::setw(6) << "View" << std::right << std::setw(8) << "terms"
     << std::setw(8) << "mean" << std::setw(8) << "std" << "\n";
  auto emit = [&](const std::vector<WordCountStats>& rows, const char* view) {
    for (const auto& r : rows) {
      os << std::left << std::setw(9) << to_string(r.element) << std::setw(6) << view << std::right << std::setw(8)
         << r.count << std::fixed << std::setprecision(3) << std::setw(8) << r.mean << std::setw(8) << r.stddev
         << "\n";
    }
  };
  emit(orig, "orig");
  emit(ours, "ours");
  return os.str();
}

nlohmann::ordered_json to_json(const std::vector<StepDelta>& rows) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"dataset", r.dataset},
                 {"element", to_string(r.element)},
                 {"orig", r.orig},
                 {"zoom_in", r.zoom_in},
                 {"zoom_out", r.zoom_out},
                 {"removed", r.removed},
                 {"judge_invalid", r.judge_invalid},
                 {"rule_filtered", r.rule_filtered},
                 {"final", r.final}});
  }
  return j;
}

nlohmann::ordered_json to_json(const std::vector<WordCountStats>& rows) {
  auto j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"element", to_string(r.element)}, {"count", r.count}, {"mean", r.mean}, {"stddev", r.stddev}});
  }
  return j;
}

}  // namespace gtexpand
