#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "cpikw/error.hpp"
#include "cpikw/random.hpp"
#include "cpikw/similarity.hpp"
#include "doctest.h"
#include "lm_oracle.hpp"

using namespace cpikw;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

Eigen::VectorXd random_vec(Rng& rng, int n) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v(i) = rng.gaussian();
  return v;
}

struct TinyModel {
  lm::Vocabulary vocab;
  lm::DecoderWeights weights;
};

TinyModel tiny_model(const std::vector<std::string>& texts) {
  TinyModel m;
  m.vocab = lm::Vocabulary::build(texts);
  lm::ModelConfig c;
  c.n_layers = 2;
  c.d_model = 8;
  c.n_heads = 2;
  c.d_ff = 16;
  c.vocab_size = static_cast<int>(m.vocab.size());
  c.max_seq_len = 64;
  c.rng_seed = 5;
  m.weights = lm::init_weights(c, 0.3);
  return m;
}

std::vector<int> ids_of(const std::string& s, const lm::Vocabulary& vocab) {
  std::vector<int> out;
  for (unsigned char c : s) out.push_back(vocab.id(static_cast<char32_t>(c)));
  return out;
}

std::map<std::string, WordVector> as_vectors(const std::vector<std::pair<std::string, Eigen::VectorXd>>& items) {
  std::map<std::string, WordVector> out;
  for (const auto& [w, v] : items) out.emplace(w, WordVector{w, v, 1});
  return out;
}

}  // namespace

TEST_CASE("segment") {
  SUBCASE("whitespace and punctuation") {
    CHECK(segment("pork price rises") == std::vector<std::string>{"pork", "price", "rises"});
    CHECK(segment("  pork, price;  rises. ") == std::vector<std::string>{"pork", "price", "rises"});
    CHECK(segment("men's pork-prices") == std::vector<std::string>{"men's", "pork-prices"});
    CHECK(segment("...").empty());
  }
  SUBCASE("greedy longest match") {
    const std::vector<std::string> a{"ab", "c"};
    const Lexicon lex_a(a);
    CHECK(segment("abc", &lex_a) == std::vector<std::string>{"ab", "c"});
    const std::vector<std::string> b{"a", "ab"};
    const Lexicon lex_b(b);
    CHECK(segment("aba", &lex_b) == std::vector<std::string>{"ab", "a"});
    CHECK(segment("abx ab", &lex_b) == std::vector<std::string>{"ab", "x", "ab"});
  }
  SUBCASE("lexicon over CJK text falls back to single characters") {
    const Lexicon lex = Lexicon::parse("\xe7\x8c\xaa\xe8\x82\x89\n\n");  // pork
    const auto words = segment("\xe7\x8c\xaa\xe8\x82\x89\xe4\xbb\xb7\xe3\x80\x82", &lex);  // pork price + full stop
    REQUIRE(words.size() == 2);
    CHECK(words[0] == "\xe7\x8c\xaa\xe8\x82\x89");
    CHECK(words[1] == "\xe4\xbb\xb7");
  }
}

TEST_CASE("cosine") {
  CHECK(cosine(vec({1, 0}), vec({0, 1})) == doctest::Approx(0.0));
  CHECK(cosine(vec({3, -1, 2}), vec({-3, 1, -2})) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(cosine(vec({0, 0}), vec({1, 0})), Error);
  CHECK_THROWS_AS(cosine(vec({1, 0}), vec({1, 0, 0})), Error);

  Rng rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::VectorXd u = random_vec(rng, 7);
    const Eigen::VectorXd v = random_vec(rng, 7);
    const double a = 1e-3 + 1e3 * rng.uniform();
    CHECK(std::abs(cosine(u, u) - 1.0) < 1e-12);
    CHECK(std::abs(cosine(u, v) - cosine(v, u)) < 1e-12);
    CHECK(std::abs(cosine(a * u, v) - cosine(u, v)) < 1e-9);
    const double c = cosine(u, v);
    CHECK(c >= -1.0);
    CHECK(c <= 1.0);
  }
}

TEST_CASE("similarity config") {
  SimilarityConfig cfg;
  CHECK(cfg.threshold == 0.9);
  CHECK(cfg.pooling == Pooling::kContextual);
  CHECK(cfg.candidates == CandidateSource::kCorpusVocabulary);
  cfg.threshold = 1.5;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.threshold = -1.0;
  CHECK_NOTHROW(cfg.validate());
  CHECK(parse_pooling(pooling_name(Pooling::kStatic)) == Pooling::kStatic);
  CHECK_THROWS_AS(parse_pooling("max"), Error);
  CHECK(parse_candidate_source("extracted") == CandidateSource::kExtractedKeywords);
}

TEST_CASE("vectorize") {
  const std::vector<std::string> texts{"pork and rent rose", "rent fell in rural towns", "fuel"};
  const TinyModel m = tiny_model(texts);
  std::vector<Document> docs;
  for (std::size_t i = 0; i < texts.size(); ++i) docs.push_back(make_document("k", std::to_string(i), texts[i]));

  SUBCASE("static mode averages embedding rows") {
    const WordVector r = vectorize("r", docs, m.weights, m.vocab, Pooling::kStatic);
    CHECK((r.vector - m.weights.token_embedding.row(m.vocab.id(U'r')).transpose()).norm() == 0.0);
    const WordVector pr = vectorize("pr", docs, m.weights, m.vocab, Pooling::kStatic);
    const Eigen::VectorXd expect =
        0.5 * (m.weights.token_embedding.row(m.vocab.id(U'p')) + m.weights.token_embedding.row(m.vocab.id(U'r'))).transpose();
    CHECK((pr.vector - expect).norm() < 1e-15);
  }
  SUBCASE("contextual mode matches the oracle") {
    const WordVector pork = vectorize("pork", docs, m.weights, m.vocab, Pooling::kContextual);
    CHECK(pork.source_count == 1);
    REQUIRE(pork.vector.size() == 8);
    const oracle::Grid h = oracle::hidden(ids_of(texts[0], m.vocab), m.weights);
    for (int j = 0; j < 8; ++j) {
      double mean = 0.0;
      for (int p = 0; p < 4; ++p) mean += h[static_cast<std::size_t>(p)][static_cast<std::size_t>(j)];
      CHECK(std::abs(pork.vector(j) - mean / 4.0) < 1e-10);
    }

    // "rent" occurs at offset 9 of text 0 and offset 0 of text 1.
    const WordVector rent = vectorize("rent", docs, m.weights, m.vocab, Pooling::kContextual);
    CHECK(rent.source_count == 2);
    const oracle::Grid h1 = oracle::hidden(ids_of(texts[1], m.vocab), m.weights);
    for (int j = 0; j < 8; ++j) {
      double sum = 0.0;
      for (int p = 0; p < 4; ++p) {
        sum += h[static_cast<std::size_t>(9 + p)][static_cast<std::size_t>(j)];
        sum += h1[static_cast<std::size_t>(p)][static_cast<std::size_t>(j)];
      }
      CHECK(std::abs(rent.vector(j) - sum / 8.0) < 1e-10);
    }
  }
  SUBCASE("identical contexts do not change the mean") {
    const std::vector<Document> one{docs[0]};
    const std::vector<Document> two{docs[0], docs[0]};
    const WordVector a = vectorize("pork", one, m.weights, m.vocab, Pooling::kContextual);
    const WordVector b = vectorize("pork", two, m.weights, m.vocab, Pooling::kContextual);
    CHECK(b.source_count == 2);
    CHECK((a.vector - b.vector).norm() < 1e-12);
  }
  SUBCASE("occurrences respect word boundaries") {
    // "ent" only ever appears inside "rent".
    const std::vector<std::string> words{"in", "ent", "fuel", "absent"};
    auto all = vectorize_all(words, docs, m.weights, m.vocab, Pooling::kContextual);
    REQUIRE(all.count("in"));
    CHECK(all.at("in").source_count == 1);
    CHECK_FALSE(all.count("ent"));
    CHECK(all.at("fuel").source_count == 1);
    CHECK_FALSE(all.count("absent"));
    CHECK_THROWS_AS(vectorize("absent", docs, m.weights, m.vocab, Pooling::kContextual), Error);
  }
}

TEST_CASE("similar_select") {
  const std::vector<std::string> seeds{"pork", "rent"};
  const auto vectors = as_vectors({{"pork", vec({1, 0, 0})},
                                   {"rent", vec({0, 1, 0})},
                                   {"pig", vec({1, 0, 0})},
                                   {"lease", vec({0.1, 1, 0})},
                                   {"news", vec({0, 0, 1})},
                                   {"mix", vec({1, 1, 0.2})}});

  SUBCASE("seed exclusion, order and best seed") {
    const std::vector<std::string> cands{"pork", "pig", "lease", "news", "mix", "pig"};
    SimilarityConfig cfg;
    const auto sel = similar_select(seeds, cands, vectors, cfg, "similar_micro", Perspective::kMicro);
    REQUIRE(sel.matches.size() == 2);
    CHECK(sel.matches[0].word == "pig");
    CHECK(sel.matches[0].best_seed == "pork");
    CHECK(sel.matches[0].score == doctest::Approx(1.0));
    CHECK(sel.matches[1].word == "lease");
    CHECK(sel.matches[1].best_seed == "rent");
    CHECK(sel.set.words == std::vector<std::string>{"lease", "pig"});
    CHECK(sel.set.tag == KeywordTag::kSimilar);
    CHECK(sel.set.perspective == Perspective::kMicro);
  }
  SUBCASE("ties break lexicographically") {
    const std::vector<std::string> cands{"pig", "hog"};
    auto v = vectors;
    v.emplace("hog", WordVector{"hog", vec({2, 0, 0}), 1});
    const auto sel = similar_select(seeds, cands, v, SimilarityConfig{});
    REQUIRE(sel.matches.size() == 2);
    CHECK(sel.matches[0].word == "hog");
  }
  SUBCASE("threshold -1 keeps every non-seed candidate") {
    const std::vector<std::string> cands{"pork", "pig", "lease", "news", "mix"};
    SimilarityConfig cfg;
    cfg.threshold = -1.0;
    CHECK(similar_select(seeds, cands, vectors, cfg).set.words.size() == 4);
    cfg.threshold = 1.5;
    CHECK_THROWS_AS(similar_select(seeds, cands, vectors, cfg), Error);
  }
  SUBCASE("missing vectors") {
    const std::vector<std::string> cands{"ghost"};
    CHECK_THROWS_AS(similar_select(seeds, cands, vectors, SimilarityConfig{}), Error);
  }
  SUBCASE("raising the threshold never grows the set") {
    Rng rng(8);
    std::map<std::string, WordVector> v;
    std::vector<std::string> s, cands;
    for (int i = 0; i < 3; ++i) s.push_back("s" + std::to_string(i));
    for (int i = 0; i < 40; ++i) cands.push_back("c" + std::to_string(i));
    for (const auto& w : s) v.emplace(w, WordVector{w, random_vec(rng, 5), 1});
    for (const auto& w : cands) v.emplace(w, WordVector{w, random_vec(rng, 5), 1});
    std::vector<std::string> prev;
    for (int step = 0; step <= 20; ++step) {
      SimilarityConfig cfg;
      cfg.threshold = -1.0 + 0.1 * step;
      const auto words = similar_select(s, cands, v, cfg).set.words;
      if (step > 0) CHECK(std::includes(prev.begin(), prev.end(), words.begin(), words.end()));
      prev = words;
    }
  }
}

TEST_CASE("vector cache round trip") {
  const auto vectors = as_vectors({{"pork", vec({0.1, -2.5e-7, 3.0})}, {"rent", vec({1.0 / 3.0, 0, 1e300})}});
  const std::string bytes = serialize_vectors(vectors);
  const auto back = parse_vectors(bytes);
  REQUIRE(back.size() == 2);
  CHECK(back.at("rent").vector == vectors.at("rent").vector);
  CHECK(serialize_vectors(back) == bytes);
  CHECK_THROWS_AS(parse_vectors("{\"word\":\"x\"}\n"), Error);
}
