#include <algorithm>
#include <string>
#include <vector>

#include "cpikw/error.hpp"
#include "cpikw/keywords.hpp"
#include "cpikw/random.hpp"
#include "doctest.h"
#include "memorize.hpp"

using namespace cpikw;

namespace {

using Words = std::vector<std::string>;

bool subset(Words a, Words b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

}  // namespace

TEST_CASE("prompt template") {
  CHECK(build_prompt("X") == "Keyword Extraction: \nAbstract: X\nKeywords: ");
  CHECK_THROWS_AS(build_prompt(""), Error);

  PromptTemplate custom;
  custom.task_label = "\xe5\x85\xb3\xe9\x94\xae\xe8\xaf\x8d\xe6\x8a\xbd\xe5\x8f\x96: ";
  custom.keywords_label = "KW: ";
  const PromptTemplate back = parse_template(serialize_template(custom));
  CHECK(back == custom);
  CHECK(build_prompt("t", back) == custom.task_label + "\nAbstract: t\nKW: ");
  CHECK_THROWS_AS(parse_template("{"), Error);

  const Document tagged = make_document("pork", "s", "pork rose", LengthUnit::kCharacters, {"pork-prices", "feed"});
  CHECK(render_training_text(tagged) == "Keyword Extraction: \nAbstract: pork rose\nKeywords: pork-prices, feed\n");
  CHECK(render_training_text(make_document("pork", "s", "pork rose")) == "pork rose");
}

TEST_CASE("parse_keywords") {
  CHECK(parse_keywords("tax, trade\nignored") == Words{"tax", "trade"});
  CHECK(parse_keywords("a,,a , b") == Words{"a", "b"});
  CHECK(parse_keywords("").empty());
  CHECK(parse_keywords("\nx").empty());
  CHECK(parse_keywords("x\xe3\x80\x81y;z  w") == Words{"x", "y", "z", "w"});
}

TEST_CASE("keyword sets") {
  KeywordSet s = make_keyword_set("k", KeywordTag::kImportant, Perspective::kMicro, {" tax", "", "trade", "tax", "cpi"});
  CHECK(s.words == Words{"cpi", "tax", "trade"});
  CHECK(s.contains("tax"));
  CHECK_FALSE(s.contains("ta"));
  CHECK(parse_keyword_set(serialize_keyword_set(s)) == s);
  CHECK(parse_tag(tag_name(KeywordTag::kGenerated)) == KeywordTag::kGenerated);
  CHECK_THROWS_AS(parse_tag("other"), Error);
  CHECK_THROWS_AS(parse_keyword_set("{}"), Error);
}

TEST_CASE("intersect_runs") {
  CHECK(intersect_runs({{"a", "b"}, {"a", "c"}}) == Words{"a"});
  CHECK(intersect_runs({{"a", "b"}, {}, {"a"}}).empty());
  CHECK(intersect_runs({}).empty());
  CHECK(intersect_runs({{"b", "a"}, {"a", "b"}}) == Words{"b", "a"});

  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<Words> runs;
    const int n = 1 + static_cast<int>(rng.below(10));
    for (int r = 0; r < n; ++r) {
      Words w;
      for (const char* c : {"a", "b", "c", "d", "e", "f"}) {
        if (rng.uniform() < 0.7) w.push_back(c);
      }
      runs.push_back(w);
    }
    Words prev;
    for (int k = 1; k <= n; ++k) {
      const Words a = intersect_runs(std::vector<Words>(runs.begin(), runs.begin() + k));
      for (int r = 0; r < k; ++r) CHECK(subset(a, runs[static_cast<std::size_t>(r)]));
      if (k > 1) CHECK(subset(a, prev));
      prev = a;
    }
  }
}

TEST_CASE("expand") {
  const auto sim = make_keyword_set("s", KeywordTag::kSimilar, Perspective::kMacro, {"price", "tax"});
  const auto imp = make_keyword_set("i", KeywordTag::kImportant, Perspective::kMacro, {"tax", "trade"});
  const KeywordSet g = expand(sim, imp);
  CHECK(g.words == Words{"tax"});
  CHECK(g.tag == KeywordTag::kGenerated);
  CHECK(expand(imp, sim).words == g.words);
  CHECK(expand(sim, sim).words == sim.words);

  Words warnings;
  const auto other = make_keyword_set("o", KeywordTag::kImportant, Perspective::kMacro, {"zinc"});
  CHECK(expand(sim, other, "g", &warnings).words.empty());
  CHECK(warnings.size() == 1);

  const auto micro = make_keyword_set("m", KeywordTag::kImportant, Perspective::kMicro, {"tax"});
  CHECK_THROWS_AS(expand(sim, micro), Error);
}

TEST_CASE("extraction on a memorized model") {
  const auto m = testing_support::memorize(4, 300);
  RobustnessConfig cfg;
  cfg.max_new = 24;
  int recovered = 0;
  for (const Document& doc : m.fixtures) {
    lm::GenerateOptions g;
    g.max_new = 24;
    const Words once = extract_keywords(doc, m.state.weights, m.vocab, PromptTemplate{}, g);
    CHECK(once == extract_keywords(doc, m.state.weights, m.vocab, PromptTemplate{}, g));
    if (once == doc.tags) ++recovered;
    const RobustExtraction r = robust_extract(doc, m.state.weights, m.vocab, PromptTemplate{}, cfg);
    CHECK(r.runs.size() == 10);
    CHECK(r.keywords == once);
  }
  CHECK(recovered == 4);

  // importance_select: union over documents, seeds excluded, long prompts skipped.
  Corpus corpus;
  for (const Document& d : m.fixtures) corpus.add(d);
  corpus.add(make_document("k", "long", std::string(200, 'a')));
  const Words excluded{m.fixtures[0].tags[0]};
  ExtractionReport report;
  const KeywordSet set = importance_select(corpus, m.state.weights, m.vocab, PromptTemplate{}, cfg, excluded,
                                           "important_macro", Perspective::kMacro, &report);
  CHECK_FALSE(set.contains(excluded[0]));
  for (const Document& d : m.fixtures) {
    for (const auto& t : d.tags) {
      if (t != excluded[0]) CHECK(set.contains(t));
    }
  }
  REQUIRE(report.documents.size() == 5);
  CHECK(report.documents.back().skipped);
  CHECK(report.warnings.size() == 1);
  CHECK_THROWS_AS(importance_select(Corpus{}, m.state.weights, m.vocab, PromptTemplate{}, cfg, {}, "x",
                                    Perspective::kMacro),
                  Error);
}
