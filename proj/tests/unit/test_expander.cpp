#include <gtest/gtest.h>

#include <mutex>

#include "gtexpand/corpus_io.hpp"
#include "gtexpand/expander.hpp"
#include "support.hpp"

using namespace gtexpand;
using gtexpand::testing::quad;

namespace {

const Quadruple kSteak = quad("9 oz steak", "food quality", "negative", "n't worth");
const std::string kSteakSentence = "the 9 oz steak was n't worth waiting for .";

const PromptLibrary& library() {
  static const PromptLibrary lib = PromptLibrary::load(PromptLibrary::default_asset_dir(), "restaurant");
  return lib;
}

std::set<std::string> opinions_of(const GtGroup& g) {
  std::set<std::string> out;
  for (const auto& v : g.variants()) out.insert(v.quadruple.opinion.text());
  return out;
}

std::set<Quadruple> quads_of(const GtGroup& g) {
  std::set<Quadruple> out;
  for (const auto& v : g.variants()) out.insert(v.quadruple);
  return out;
}

struct Harness {
  std::shared_ptr<MockProvider> mock;
  Gateway gateway;
  Expander expander;

  explicit Harness(std::shared_ptr<MockProvider> m, ExpansionConfig cfg = {})
      : mock(m), gateway(m, std::make_shared<ExchangeCache>()), expander(gateway, library(), cfg) {}
};

std::shared_ptr<MockProvider> steak_mock() { return MockProvider::from_file(gtexpand::testing::fixture("steak/mock.json")); }

GtGroup steak_group() {
  Harness h(steak_mock());
  return h.expander.expand_example(Example{"steak:0", kSteakSentence, {GtGroup::singleton(kSteak)}}).groups.at(0);
}

}  // namespace

TEST(CanonicalTokens, Contractions) {
  EXPECT_EQ(canonical_tokens("was n't worth"), (std::vector<std::string>{"was", "not", "worth"}));
  EXPECT_EQ(canonical_tokens("do n ' t get"), (std::vector<std::string>{"do", "not", "get"}));
  EXPECT_EQ(canonical_tokens("wasn't"), (std::vector<std::string>{"was", "not"}));
  EXPECT_EQ(canonical_tokens("the sake \xE2\x80\x99 s"), (std::vector<std::string>{"the", "sake"}));
  EXPECT_EQ(canonical_tokens("joe's pizza"), (std::vector<std::string>{"joe", "pizza"}));
}

TEST(Extractable, ContiguousTokenRuns) {
  EXPECT_TRUE(extractable("not worth", kSteakSentence));
  EXPECT_TRUE(extractable("n't worth waiting", kSteakSentence));
  EXPECT_FALSE(extractable("worth the wait", kSteakSentence));
  EXPECT_FALSE(extractable("oz", "the 9oz steak"));
  EXPECT_FALSE(extractable("steak worth", kSteakSentence));
}

TEST(RuleFilter, Criteria) {
  const auto place = quad("place", "ambience general", "positive", "great");
  const std::string s = "great place to relax and enjoy your dinner";
  const auto r = rule_filter({Term("great place"), Term("place to relax"), Term(s), Term("cozy place"),
                              Term("place to relax")},
                             s, place, Element::kAspect);
  EXPECT_EQ(r.kept, (std::vector<Term>{Term("place to relax")}));
  ASSERT_EQ(r.removed.size(), 3u);
  EXPECT_EQ(r.removed[0], (std::pair{Term("great place"), RejectReason::kContainsPairedTerm}));
  EXPECT_EQ(r.removed[1], (std::pair{Term(s), RejectReason::kWholeSentence}));
  EXPECT_EQ(r.removed[2], (std::pair{Term("cozy place"), RejectReason::kNotExtractable}));
}

TEST(RuleFilter, WholeSentenceIgnoresFinalPunctuation) {
  const auto r = rule_filter({Term("the 9 oz steak was n't worth waiting for")}, kSteakSentence, kSteak,
                             Element::kOpinion);
  ASSERT_EQ(r.removed.size(), 1u);
  EXPECT_EQ(r.removed[0].second, RejectReason::kWholeSentence);
}

TEST(RuleFilter, ContractionEquivalenceKeepsNotWorth) {
  const auto r = rule_filter({Term("not worth"), Term("not worth waiting")}, kSteakSentence, kSteak, Element::kOpinion);
  EXPECT_EQ(r.kept.size(), 2u);
  EXPECT_TRUE(r.removed.empty());
}

TEST(Expander, SteakSurvivors) {
  const GtGroup g = steak_group();
  EXPECT_EQ(g.original(), kSteak);
  EXPECT_EQ(opinions_of(g), (std::set<std::string>{"n't worth", "not worth", "n't worth waiting", "not worth waiting"}));
  for (const auto& v : g.variants()) EXPECT_EQ(v.quadruple.aspect.text(), "9 oz steak");
  std::map<std::string, Origin> origin;
  for (const auto& v : g.variants()) origin[v.quadruple.opinion.text()] = v.opinion_origin;
  EXPECT_EQ(origin["not worth"], Origin::kZoomIn);
  EXPECT_EQ(origin["n't worth waiting"], Origin::kZoomOut);
  EXPECT_EQ(origin["not worth waiting"], Origin::kZoomOut);
  ASSERT_EQ(g.rejected().size(), 2u);
  EXPECT_EQ(g.rejected()[0], (RejectedTerm{Element::kOpinion, Term("worth"), Origin::kZoomIn,
                                           RejectReason::kJudgeInvalid}));
  EXPECT_EQ(g.rejected()[1], (RejectedTerm{Element::kOpinion, Term("worth waiting"), Origin::kZoomOut,
                                           RejectReason::kJudgeInvalid}));
  EXPECT_TRUE(g.is_final());
}

TEST(Expander, CallBudgetAndThreading) {
  std::mutex m;
  std::vector<ChatRequest> seen;
  auto inner = steak_mock();
  auto recording = std::make_shared<MockProvider>([&](const ChatRequest& r) -> std::optional<std::string> {
    {
      std::lock_guard lock(m);
      seen.push_back(r);
    }
    return inner->send(r).text;
  });
  Harness h(recording);
  h.expander.expand_element(kSteakSentence, kSteak, Element::kOpinion);
  // 3 zoom-in + 3 zoom-out samples, then one judge call per new candidate.
  ASSERT_EQ(seen.size(), 3u + 3u + 5u);
  for (int k = 0; k < 3; ++k) {
    EXPECT_EQ(seen[k].step, "zoom_in");
    EXPECT_EQ(seen[k].sample_index, k);
    EXPECT_DOUBLE_EQ(seen[k].temperature, 0.3);
  }
  const std::string& zoom_out_user = seen[3].messages.back().content;
  EXPECT_EQ(seen[3].step, "zoom_out");
  EXPECT_NE(zoom_out_user.find("Collected Opinion terms: \"n't worth\", \"not worth\", \"worth\""), std::string::npos)
      << zoom_out_user;
  EXPECT_EQ(seen[6].step, "judge");
  EXPECT_DOUBLE_EQ(seen[6].temperature, 0.0);
}

TEST(Expander, SakeZoomInAspect) {
  const auto y = quad("sake \xE2\x80\x99 s", "drinks quality", "positive", "successfully");
  const std::string s = "the sake \xE2\x80\x99 s complimented the courses very well and is successfully easing me "
                        "into the sake world .";
  auto mock = std::make_shared<MockProvider>(std::vector<MockProvider::Rule>{
      {"zoom_in", "aspect", {}, "- \"sake\""},
      {"zoom_out", "opinion", {}, "- \"successfully easing\""},
      {"judge", std::nullopt, {}, "Judgment: deemed valid."},
      {std::nullopt, std::nullopt, {}, "none"}});
  Harness h(mock);
  const auto g = h.expander.expand_example(Example{"r:0", s, {GtGroup::singleton(y)}}).groups.at(0);
  EXPECT_TRUE(g.contains(y.with_term(Element::kAspect, Term("sake"))));
  EXPECT_TRUE(g.contains(y.with_term(Element::kAspect, Term("sake")).with_term(Element::kOpinion,
                                                                                 Term("successfully easing"))));
  EXPECT_EQ(g.variants().size(), 4u);
}

TEST(Expander, ImplicitElementsMakeNoCalls) {
  auto mock = steak_mock();
  Harness h(mock);
  const auto both = quad("null", "food quality", "negative", "null");
  const auto g = h.expander.expand_example(Example{"x:0", "meh .", {GtGroup::singleton(both)}}).groups.at(0);
  EXPECT_EQ(g.variants().size(), 1u);
  EXPECT_EQ(mock->calls(), 0u);

  const auto aspect_only = quad("null", "food quality", "negative", "n't worth");
  const auto e = h.expander.expand_element(kSteakSentence, aspect_only, Element::kAspect);
  ASSERT_EQ(e.accepted.size(), 1u);
  EXPECT_EQ(e.accepted[0].origin, Origin::kOriginal);
  EXPECT_EQ(mock->calls(), 0u);
}

TEST(Expander, JudgeDisabledKeepsRuleSurvivors) {
  ExpansionConfig cfg;
  cfg.judge_enabled = false;
  Harness h(steak_mock(), cfg);
  const auto e = h.expander.expand_element(kSteakSentence, kSteak, Element::kOpinion);
  EXPECT_EQ(e.accepted.size(), 6u);
  for (std::size_t i = 1; i < e.accepted.size(); ++i) EXPECT_EQ(e.accepted[i].verdict, Verdict::kNotJudged);
}

TEST(Expander, StepsCanBeDisabled) {
  ExpansionConfig cfg;
  cfg.zoom_out = false;
  Harness h(steak_mock(), cfg);
  const auto e = h.expander.expand_element(kSteakSentence, kSteak, Element::kOpinion);
  ASSERT_EQ(e.accepted.size(), 2u);
  EXPECT_EQ(e.accepted[1].term, Term("not worth"));
}

TEST(Expander, ConfigValidation) {
  ExpansionConfig cfg;
  cfg.samples_per_step = 0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.temperature = -1;
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(Expander, ProviderFailurePropagates) {
  auto empty = std::make_shared<MockProvider>(std::vector<MockProvider::Rule>{});
  Harness h(empty);
  Dataset ds{"d", Taxonomy::resolve("restaurant"), {Example{"d:0", kSteakSentence, {GtGroup::singleton(kSteak)}}}};
  EXPECT_THROW(h.expander.expand_dataset(ds), ProviderError);
}

TEST(Expander, DatasetOrderIndependentOfWorkers) {
  Dataset ds{"d", Taxonomy::resolve("restaurant"), {}};
  for (int i = 0; i < 12; ++i) {
    ds.examples.push_back(Example{example_id("d", i), kSteakSentence, {GtGroup::singleton(kSteak)}});
  }
  ExpansionConfig one, many;
  one.workers = 1;
  many.workers = 6;
  Harness a(steak_mock(), one), b(steak_mock(), many);
  std::size_t last = 0;
  const auto ra = a.expander.expand_dataset(ds, [&](std::size_t done, std::size_t) { last = done; });
  const auto rb = b.expander.expand_dataset(ds);
  EXPECT_EQ(last, 12u);
  EXPECT_EQ(ra.examples, rb.examples);
  EXPECT_EQ(rb.examples[7].id, "d:7");
}

TEST(Combine, CartesianProduct) {
  const auto y = quad("a1", "food quality", "positive", "o1");
  ElementExpansion aspects{{{Term("a1"), Origin::kOriginal, Verdict::kNotJudged},
                            {Term("a2"), Origin::kZoomOut, Verdict::kValid}},
                           {}};
  ElementExpansion opinions{{{Term("o1"), Origin::kOriginal, Verdict::kNotJudged}}, {}};
  const auto g = combine(y, aspects, opinions);
  EXPECT_EQ(g.variants().size(), 2u);
  EXPECT_EQ(g.variants()[1].aspect_origin, Origin::kZoomOut);
  EXPECT_EQ(g.variants()[1].judge_aspect, Verdict::kValid);
}

TEST(Views, SteakNesting) {
  const GtGroup g = steak_group();
  const auto orig = ablation_group(g, View::kOrig);
  const auto zin = ablation_group(g, View::kZoomIn);
  const auto zout = ablation_group(g, View::kZoomOut);
  const auto ours = ablation_group(g, View::kOurs);
  EXPECT_EQ(orig.variants().size(), 1u);
  EXPECT_EQ(opinions_of(zin), (std::set<std::string>{"n't worth", "not worth", "worth"}));
  EXPECT_EQ(zout.variants().size(), 6u);
  EXPECT_EQ(ours, g);
  auto subset = [](const std::set<Quadruple>& a, const std::set<Quadruple>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  EXPECT_TRUE(subset(quads_of(orig), quads_of(zin)));
  EXPECT_TRUE(subset(quads_of(zin), quads_of(zout)));
  EXPECT_TRUE(subset(quads_of(ours), quads_of(zout)));
  EXPECT_TRUE(subset(quads_of(orig), quads_of(ours)));
}

TEST(Views, ParseAndDatasetLevel) {
  EXPECT_EQ(parse_view("zoom_out"), View::kZoomOut);
  EXPECT_EQ(to_string(View::kOurs), "ours");
  EXPECT_THROW(parse_view("all"), ParseError);
  Dataset ds{"d", Taxonomy::resolve("restaurant"), {Example{"d:0", kSteakSentence, {steak_group()}}}};
  const auto v = ablation_view(ds, View::kOrig);
  EXPECT_EQ(v.examples[0].groups[0].variants().size(), 1u);
  EXPECT_EQ(v.examples[0].id, "d:0");
}
