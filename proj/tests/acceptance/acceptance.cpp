// One PASS/FAIL line per acceptance criterion. Exit status is the number of
// failures, so ctest reports any regression.

#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "gtexpand/agreement.hpp"
#include "gtexpand/corpus_io.hpp"
#include "gtexpand/ensembler.hpp"
#include "gtexpand/evaluator.hpp"
#include "gtexpand/expander.hpp"
#include "gtexpand/prompt_kit.hpp"
#include "support.hpp"

using namespace gtexpand;
namespace t = gtexpand::testing;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool ok = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 3) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

std::set<Quadruple> quads_of(const GtGroup& g) {
  std::set<Quadruple> out;
  for (const auto& v : g.variants()) out.insert(v.quadruple);
  return out;
}

bool subset(const std::set<Quadruple>& a, const std::set<Quadruple>& b) {
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

// ---------------------------------------------------------------------------

Outcome steak_replay() {
  t::TempDir dir;
  const auto start = Clock::now();
  auto r = t::run_cli({"expand", "--dataset", t::fixture("steak/dataset.txt").string(), "--name", "steak",
                       "--provider", "mock:" + t::fixture("steak/mock.json").string(), "--out",
                       (dir / "out.jsonl").string()});
  const double elapsed = seconds_since(start);
  if (r.exit_code != 0) return {false, "expand failed: " + r.output};
  const auto ds = read_expanded(dir / "out.jsonl");
  if (ds.examples.size() != 1 || ds.examples[0].groups.size() != 1) return {false, "expected one group"};
  const GtGroup& g = ds.examples[0].groups[0];

  std::set<Quadruple> expected;
  for (const char* o : {"n't worth", "not worth", "n't worth waiting", "not worth waiting"}) {
    expected.insert(t::quad("9 oz steak", "food quality", "negative", o));
  }
  std::set<std::string> rejected;
  for (const auto& rj : g.rejected()) {
    if (rj.reason == RejectReason::kJudgeInvalid) rejected.insert(rj.term.text());
  }
  const bool sets_ok = quads_of(g) == expected && g.variants().size() == 4;
  const bool rejected_ok = rejected == std::set<std::string>{"worth", "worth waiting"};
  const bool fast = elapsed < 1.0;
  return {sets_ok && rejected_ok && fast, "variants=" + std::to_string(g.variants().size()) +
                                              " exact=" + (sets_ok ? "yes" : "no") +
                                              " rejected=" + (rejected_ok ? "worth,worth waiting" : "wrong") +
                                              " time=" + fmt(elapsed) + "s"};
}

Outcome matcher_oracle() {
  std::mt19937_64 rng(20240605);
  const auto start = Clock::now();
  std::size_t divergences = 0, overlapping = 0, instances = 0;
  for (; instances < 5000; ++instances) {
    std::vector<GtGroup> groups;
    const int ng = std::uniform_int_distribution<int>(0, 5)(rng);
    for (int g = 0; g < ng; ++g) groups.push_back(t::random_group(rng, 4, 2));
    std::vector<Quadruple> pool;
    for (const auto& g : groups) {
      for (const auto& v : g.variants()) pool.push_back(v.quadruple);
    }
    std::set<Quadruple> distinct(pool.begin(), pool.end());
    if (distinct.size() < pool.size()) ++overlapping;
    std::set<Quadruple> preds;
    const int np = std::uniform_int_distribution<int>(0, 6)(rng);
    while (static_cast<int>(preds.size()) < np) {
      if (!pool.empty() && rng() % 3 != 0) preds.insert(pool[rng() % pool.size()]);
      else preds.insert(t::random_quad(rng, 2));
    }
    const std::vector<Quadruple> pv(preds.begin(), preds.end());
    if (match_example(pv, groups).tp != t::brute_force_tp(pv, groups)) ++divergences;
  }
  const double elapsed = seconds_since(start);
  return {divergences == 0 && elapsed < 30.0 && overlapping > 0,
          std::to_string(instances) + " instances (" + std::to_string(overlapping) +
              " with overlapping variants), divergences=" + std::to_string(divergences) + " time=" + fmt(elapsed) +
              "s"};
}

JudgmentVector as_vector(const std::string& id, const std::vector<int>& labels) {
  JudgmentVector v{id, {}};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::string k = std::to_string(i);
    v.labels[std::string(6 - k.size(), '0') + k] = labels[i];
  }
  return v;
}

Outcome metric_oracles() {
  const double kappa = cohen_kappa(as_vector("a", {1, 1, 0, 0, 1}), as_vector("b", {1, 0, 0, 0, 1}));
  // p_o = 0.8, p_e = 0.48: exactly 8/13, printed as 0.615385 at six decimals.
  const bool kappa_ok = std::abs(kappa - 8.0 / 13.0) <= 1e-9 && fmt(kappa, 6) == "0.615385";

  std::mt19937_64 rng(99);
  double tau_err = 0;
  int tau_pairs = 0;
  while (tau_pairs < 1000) {
    const int n = std::uniform_int_distribution<int>(2, 60)(rng);
    std::vector<int> a(n), b(n);
    for (int i = 0; i < n; ++i) {
      a[i] = static_cast<int>(rng() & 1);
      b[i] = static_cast<int>(rng() & 1);
    }
    const auto ca = std::count(a.begin(), a.end(), 1), cb = std::count(b.begin(), b.end(), 1);
    if (ca == 0 || ca == n || cb == 0 || cb == n) continue;  // tau-b undefined
    const double tau = kendall_tau_b(as_vector("a", a), as_vector("b", b));
    tau_err = std::max({tau_err, std::abs(tau - t::pearson(a, b)), std::abs(tau - t::brute_force_tau_b(a, b))});
    ++tau_pairs;
  }

  double fleiss_err = 0;
  int tables = 0;
  while (tables < 100) {
    const int items = std::uniform_int_distribution<int>(2, 30)(rng);
    std::vector<std::vector<int>> raters(3, std::vector<int>(items));
    std::vector<std::array<int, 2>> counts(items, {0, 0});
    for (int i = 0; i < items; ++i) {
      for (auto& r : raters) {
        r[i] = static_cast<int>(rng() % 4 != 0);
        counts[i][r[i]] += 1;
      }
    }
    int ones = 0;
    for (const auto& c : counts) ones += c[1];
    if (ones == 0 || ones == 3 * items) continue;  // P-bar_e = 1
    const double got =
        fleiss_kappa({as_vector("r1", raters[0]), as_vector("r2", raters[1]), as_vector("r3", raters[2])});
    fleiss_err = std::max(fleiss_err, std::abs(got - t::fleiss_by_hand(counts)));
    ++tables;
  }
  const bool ok = kappa_ok && tau_err <= 1e-9 && fleiss_err <= 1e-9;
  std::ostringstream d;
  d << "kappa=" << fmt(kappa, 6) << " tau-b vs Pearson/pairs max err=" << tau_err << " over " << tau_pairs
    << " pairs; Fleiss max err=" << fleiss_err << " over " << tables << " tables";
  return {ok, d.str()};
}

// Candidate answers drawn from the sentence words plus junk, keyed on the
// request so reruns are stable.
std::shared_ptr<MockProvider> noisy_provider() {
  return std::make_shared<MockProvider>([](const ChatRequest& r) -> std::optional<std::string> {
    std::mt19937_64 rng(std::hash<std::string>{}(r.canonical()));
    if (r.step == "judge") return rng() % 3 == 0 ? "Judgment: deemed invalid." : "Judgment: deemed valid.";
    static const std::vector<std::string> pool{"the steak", "steak was", "was great", "great", "very slow",
                                               "slow", "the service", "service was very", "cheap wine", "the"};
    std::string out;
    const int k = static_cast<int>(rng() % 4);
    for (int i = 0; i < k; ++i) out += "- \"" + pool[rng() % pool.size()] + "\"\n";
    return out;
  });
}

Outcome monotonicity() {
  const auto lib = PromptLibrary::load(PromptLibrary::default_asset_dir(), "restaurant");
  const std::vector<Quadruple> gold{t::quad("steak", "food quality", "positive", "great"),
                                    t::quad("service", "service general", "negative", "slow"),
                                    t::quad("null", "drinks prices", "positive", "cheap"),
                                    t::quad("wine", "drinks prices", "positive", "null")};
  const std::string sentence = "the steak was great but the service was very slow ; cheap wine .";
  std::mt19937_64 rng(5);
  std::size_t corpora = 0, runs = 0, groups_checked = 0, violations = 0;
  for (; corpora < 20; ++corpora) {
    Dataset src{"m", Taxonomy::resolve("restaurant"), {}};
    for (int i = 0; i < 8; ++i) {
      Example ex{example_id("m", i), sentence, {}};
      for (const auto& q : gold) {
        if (rng() % 2) ex.groups.push_back(GtGroup::singleton(q));
      }
      src.examples.push_back(ex);
    }
    Gateway gw(noisy_provider(), std::make_shared<ExchangeCache>());
    ExpansionConfig cfg;
    cfg.samples_per_step = 1 + static_cast<int>(corpora % 3);
    const Dataset ours = Expander(gw, lib, cfg).expand_dataset(src);
    const Dataset orig = ablation_view(ours, View::kOrig);
    const Dataset zin = ablation_view(ours, View::kZoomIn);
    const Dataset zout = ablation_view(ours, View::kZoomOut);

    for (std::size_t e = 0; e < ours.examples.size(); ++e) {
      for (std::size_t g = 0; g < ours.examples[e].groups.size(); ++g) {
        const auto o = quads_of(orig.examples[e].groups[g]), i = quads_of(zin.examples[e].groups[g]),
                   z = quads_of(zout.examples[e].groups[g]), f = quads_of(ours.examples[e].groups[g]);
        ++groups_checked;
        if (!(subset(o, i) && subset(i, z) && subset(f, z) && subset(o, f))) ++violations;
      }
    }

    // Runs sample from every variant the zoom-out view knows plus noise.
    for (int k = 0; k < 10; ++k, ++runs) {
      RunSet run{"r", {}};
      for (const auto& ex : zout.examples) {
        auto& preds = run.predictions[ex.id];
        for (const auto& g : ex.groups) {
          for (const auto& v : g.variants()) {
            if (rng() % 4 == 0) preds.quads.insert(v.quadruple);
          }
        }
        if (rng() % 3 == 0) preds.quads.insert(t::random_quad(rng));
        if (rng() % 10 == 0) preds.malformed = 1;
      }
      const auto so = score_corpus(run, orig), sf = score_corpus(run, ours);
      if (sf.f1 + 1e-12 < so.f1 || sf.tp + sf.fn != so.tp + so.fn || sf.tp < so.tp) ++violations;
    }
  }
  return {violations == 0, std::to_string(corpora) + " expanded corpora, " + std::to_string(runs) + " runs, " +
                               std::to_string(groups_checked) + " groups; violations=" + std::to_string(violations)};
}

Outcome ensemble_rule() {
  std::mt19937_64 rng(17);
  std::size_t mismatches = 0, anti = 0, fixtures = 0;
  const std::vector<std::string> ranking{"r3", "r1", "r5", "r2", "r4", "r6"};
  for (; fixtures < 300; ++fixtures) {
    std::vector<RunSet> runs;
    for (int r = 1; r <= 6; ++r) {
      RunSet run{"r" + std::to_string(r), {}};
      for (int e = 0; e < 4; ++e) {
        auto& preds = run.predictions["d:" + std::to_string(e)];
        for (int q = 0; q < 4; ++q) {
          if (rng() % 2) preds.quads.insert(t::random_quad(rng, 2));
        }
      }
      runs.push_back(std::move(run));
    }
    // Independent vote count over the five best runs.
    std::map<std::string, std::map<Quadruple, int>> votes;
    for (int i = 0; i < 5; ++i) {
      for (const auto& run : runs) {
        if (run.run_id != ranking[i]) continue;
        for (const auto& [id, preds] : run.predictions) {
          for (const auto& q : preds.quads) ++votes[id][q];
        }
      }
    }
    const RunSet got = ensemble(runs, ranking, 5, 3);
    for (const auto& [id, counts] : votes) {
      std::set<Quadruple> expected;
      for (const auto& [q, n] : counts) {
        if (n >= 3) expected.insert(q);
      }
      auto it = got.predictions.find(id);
      const std::set<Quadruple> actual = it == got.predictions.end() ? std::set<Quadruple>{} : it->second.quads;
      if (actual != expected) ++mismatches;
    }
    for (std::size_t th = 1; th < 5; ++th) {
      const RunSet lo = ensemble(runs, ranking, 5, th), hi = ensemble(runs, ranking, 5, th + 1);
      for (const auto& [id, preds] : hi.predictions) {
        if (!subset(preds.quads, lo.predictions.at(id).quads)) ++anti;
      }
    }
  }
  return {mismatches == 0 && anti == 0, std::to_string(fixtures) + " five-of-six fixtures; vote mismatches=" +
                                            std::to_string(mismatches) + " anti-monotonicity violations=" +
                                            std::to_string(anti)};
}

Outcome determinism() {
  t::TempDir dir;
  // 150 steak-style sentences so the 80-example sample is a proper subset.
  std::string lines;
  for (int i = 0; i < 150; ++i) {
    lines += "the 9 oz steak number " + std::to_string(i) +
             " was n't worth waiting for .####[[\"9 oz steak\", \"food quality\", \"negative\", \"n't worth\"]]\n";
  }
  t::spit(dir / "corpus.txt", lines);
  const std::string cache = (dir / "cache.jsonl").string();
  auto expand = [&](const std::string& provider, const std::string& out) {
    return t::run_cli({"expand", "--dataset", (dir / "corpus.txt").string(), "--provider", provider, "--cache",
                       cache, "--out", (dir / out).string()});
  };
  if (auto r = expand("mock:" + t::fixture("steak/mock.json").string(), "cold.jsonl"); r.exit_code != 0) {
    return {false, "cold expand failed: " + r.output};
  }
  auto w1 = expand("replay", "warm1.jsonl");
  auto w2 = expand("replay", "warm2.jsonl");
  if (w1.exit_code != 0 || w2.exit_code != 0) return {false, "warm expand failed: " + w1.output + w2.output};
  const std::string a = t::slurp(dir / "warm1.jsonl"), b = t::slurp(dir / "warm2.jsonl");
  const bool expand_same = !a.empty() && a == b && a == t::slurp(dir / "cold.jsonl");

  auto exported = [&](const std::string& out) {
    auto r = t::run_cli({"annotate", "export", "--gt", (dir / "warm1.jsonl").string(), "--seed", "42",
                         "--sample-size", "80", "--out", (dir / out).string()});
    return r.exit_code == 0 ? t::slurp(dir / out) : std::string();
  };
  const std::string e1 = exported("tasks1.jsonl"), e2 = exported("tasks2.jsonl");
  const auto tasks = std::count(e1.begin(), e1.end(), '\n');
  const bool export_same = !e1.empty() && e1 == e2;
  return {expand_same && export_same, std::string("expand warm runs byte-identical=") + (expand_same ? "yes" : "no") +
                                          " (" + std::to_string(a.size()) + " bytes); export seed 42 size 80 " +
                                          "byte-identical=" + (export_same ? "yes" : "no") + " (" +
                                          std::to_string(tasks) + " tasks)"};
}

Outcome parser_round_trips() {
  const auto& tax = Taxonomy::restaurant();
  static const std::vector<std::string> words{"steak", "9 oz", "n't worth", "rip - off", "null", "the wine list",
                                              "sake \xE2\x80\x99 s", "not", "great", "well priced", "food"};
  std::mt19937_64 rng(12);
  std::size_t checked = 0, failures = 0;
  for (const auto& order : ElementOrder::all()) {
    for (int k = 0; k < 50; ++k) {
      std::set<Quadruple> quads;
      const int n = 1 + static_cast<int>(rng() % 4);
      for (int i = 0; i < n; ++i) {
        const auto& cat = tax.labels()[rng() % tax.labels().size()];
        static const char* sents[] = {"positive", "neutral", "negative"};
        quads.insert(make_quadruple(words[rng() % words.size()], cat, sents[rng() % 3], words[rng() % words.size()],
                                    tax));
      }
      const auto parsed = parse_tagged(render_as_text(quads, order), order, tax);
      ++checked;
      if (parsed.quads != quads || !parsed.diagnostics.empty()) ++failures;
    }
  }

  const auto shots = read_shots(PromptLibrary::default_asset_dir() / "shots/restaurant_20shot.txt", tax);
  std::ifstream printed(t::fixture("shot_outputs.txt"));
  std::size_t lines = 0, line_failures = 0;
  for (std::string line; std::getline(printed, line); ++lines) {
    if (lines >= shots.size()) {
      ++line_failures;
      continue;
    }
    const auto p = parse_tagged(line, ElementOrder("ACSO"), tax);
    const std::set<Quadruple> from_line(shots[lines].quads.begin(), shots[lines].quads.end());
    if (p.quads != from_line || p.malformed != 0) ++line_failures;
  }
  if (lines != shots.size()) ++line_failures;

  int arity_rejected = 0;
  for (const char* bad : {"x .####[[\"a\", \"food quality\", \"positive\"]]",
                          "x .####[[\"a\", \"food quality\", \"positive\", \"b\", \"c\"]]",
                          "x .####[[\"a\", \"food quality\", \"positive\", \"b\"], [\"c\"]]"}) {
    try {
      parse_dataset_line(bad, tax);
    } catch (const ParseError&) {
      ++arity_rejected;
    }
  }
  const bool ok = failures == 0 && line_failures == 0 && arity_rejected == 3;
  return {ok, std::to_string(checked) + " render/parse round-trips (24 orders x 50), failures=" +
                  std::to_string(failures) + "; " + std::to_string(lines) + " printed demonstration lines, " +
                  "mismatches=" + std::to_string(line_failures) + "; arity violations rejected " +
                  std::to_string(arity_rejected) + "/3"};
}

Outcome judge_transcripts() {
  const auto valid = parse_verdict(t::slurp(t::fixture("judge/failed_to_work.txt")));
  const auto invalid = parse_verdict(t::slurp(t::fixture("judge/great_place.txt")));
  const bool ok = valid.verdict == Verdict::kValid && invalid.verdict == Verdict::kInvalid && !valid.diagnostic &&
                  !invalid.diagnostic;
  return {ok, std::string("\"failed to work\" -> ") + std::string(to_string(valid.verdict)) + ", \"great place\" -> " +
                  std::string(to_string(invalid.verdict))};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"steak-end-to-end-replay", steak_replay},
      {"matcher-oracle-equivalence", matcher_oracle},
      {"metric-oracles", metric_oracles},
      {"monotonicity-and-view-inclusion", monotonicity},
      {"ensemble-vote-rule", ensemble_rule},
      {"determinism", determinism},
      {"parser-round-trips", parser_round_trips},
      {"judge-verdict-transcripts", judge_transcripts},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.ok) ++failures;
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (criteria.size() - failures) << "/" << criteria.size() << " criteria passed" << std::endl;
  return failures;
}
