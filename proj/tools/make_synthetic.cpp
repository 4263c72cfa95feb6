// Writes the bundled synthetic dataset: a tagged encyclopedia-style corpus,
// seed keywords, a daily search index, a monthly CPI series, a plain LM
// training corpus and a pipeline config.
//
// A latent AR(1) factor drives the CPI change. Planted keywords ("generated"
// in the pipeline's terms) are compounds of a seed, as in "pork-prices", and
// have search volumes whose monthly growth leads the factor closely; seed
// keywords lead it with much more noise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpikw/digest.hpp"
#include "cpikw/random.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;
using cpikw::Rng;

struct Keyword {
  std::string word;
  std::string perspective;
  bool seed = false;
  int lead = 1;          // months by which search growth leads the factor
  double loading = 1.0;  // factor loading on monthly growth
  double noise = 0.3;    // idiosyncratic growth noise (in factor units)
  std::vector<std::string> partners;  // planted words its documents mention
};

const std::vector<Keyword>& keywords() {
  static const std::vector<Keyword> k{
      {"inflation", "macro", true, 2, 0.5, 1.0, {"inflation-rate", "export-orders"}},
      {"wages", "macro", true, 1, 0.5, 1.0, {"wage-bill"}},
      {"exports", "macro", true, 3, 0.5, 1.0, {"export-orders"}},
      {"pork", "micro", true, 2, 0.5, 1.0, {"pork-prices"}},
      {"rent", "micro", true, 1, 0.5, 1.0, {"rental"}},
      {"fuel", "micro", true, 3, 0.5, 1.0, {"fuel-prices"}},
      {"inflation-rate", "macro", false, 2, 1.0, 0.35, {}},
      {"export-orders", "macro", false, 1, 1.0, 0.35, {}},
      {"wage-bill", "macro", false, 3, 1.0, 0.35, {}},
      {"pork-prices", "micro", false, 1, 1.0, 0.35, {}},
      {"rental", "micro", false, 2, 1.0, 0.35, {}},
      {"fuel-prices", "micro", false, 3, 1.0, 0.35, {}},
  };
  return k;
}

std::string pick(Rng& rng, const std::vector<std::string>& options) {
  return options[rng.below(options.size())];
}

std::string capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
  return s;
}

// One sentence about seed `s`, mentioning planted word `g` (may be empty).
std::string sentence(Rng& rng, const std::string& s, const std::string& g) {
  const std::string year = std::to_string(2011 + rng.below(11));
  const std::string pct = std::to_string(1 + rng.below(9));
  const std::vector<std::string> verbs{"rose", "fell", "moved", "eased", "climbed"};
  const std::vector<std::string> places{"the north", "coastal cities", "the capital", "rural towns", "the west"};
  if (g.empty()) {
    switch (rng.below(4)) {
      case 0: return capitalize(s) + " is tracked by the statistics bureau each month.";
      case 1: return "In " + year + " " + s + " " + pick(rng, verbs) + " by " + pct + " percent in " + pick(rng, places) + ".";
      case 2: return "The " + s + " series is a common input for price forecasts.";
      default: return "Households in " + pick(rng, places) + " follow " + s + " news closely.";
    }
  }
  switch (rng.below(4)) {
    case 0: return "In " + year + " the " + g + " index " + pick(rng, verbs) + " before " + s + " did.";
    case 1: return "Analysts link " + g + " to " + s + " in " + pick(rng, places) + ".";
    case 2: return "Searches for " + g + " often lead " + s + " by a few months.";
    default: return "Reports on " + s + " cite " + g + " as an early signal.";
  }
}

struct CorpusRecord {
  std::string keyword;
  std::string text;
  std::vector<std::string> tags;
};

std::vector<CorpusRecord> tagged_corpus(Rng& rng, int docs_per_seed) {
  std::vector<CorpusRecord> out;
  for (const Keyword& k : keywords()) {
    if (!k.seed) continue;
    for (int d = 0; d < docs_per_seed; ++d) {
      // Every document mentions at least one partner; the tags list the
      // partners in order of first mention.
      std::vector<std::string> mentioned;
      for (const auto& p : k.partners) {
        if (mentioned.empty() || rng.uniform() < 0.6) mentioned.push_back(p);
      }
      if (mentioned.size() > 1 && rng.uniform() < 0.5) std::swap(mentioned[0], mentioned[1]);
      // Planted words appear both in the seed's own sentence frames and in a
      // sentence linking them to the seed.
      std::string text = sentence(rng, k.word, "");
      for (const auto& p : mentioned) {
        text += " " + (rng.uniform() < 0.5 ? sentence(rng, p, "") : sentence(rng, k.word, p));
      }
      if (text.size() < 90) text += " " + sentence(rng, k.word, "");
      out.push_back({k.word, text, mentioned});
    }
  }
  return out;
}

std::string lm_corpus(Rng& rng, std::size_t target_bytes) {
  std::string out;
  int line = 0;
  while (out.size() < target_bytes) {
    const Keyword& a = keywords()[rng.below(keywords().size())];
    const Keyword& b = keywords()[rng.below(keywords().size())];
    std::string text = sentence(rng, a.word, "") + " " + sentence(rng, a.word, b.seed ? "" : b.word) + " " +
                       sentence(rng, b.word, "");
    nlohmann::ordered_json rec{{"keyword", a.word}, {"source_id", "lm:" + std::to_string(++line)}, {"text", text}};
    out += rec.dump() + "\n";
  }
  return out;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the synthetic CPI keyword dataset"};
  std::string out_dir = "data/synthetic";
  std::uint64_t seed = 20220131;
  int docs_per_seed = 4;
  app.add_option("-o,--out", out_dir, "output directory");
  app.add_option("--seed", seed, "generator seed");
  app.add_option("--docs-per-seed", docs_per_seed, "tagged documents per seed keyword");
  CLI11_PARSE(app, argc, argv);

  using namespace std::chrono;
  const year_month first_month{year{2011}, month{1}};
  const int n_months = 133;  // 2011-01 .. 2022-01
  const int max_lead = 3;

  Rng rng(cpikw::derive_seed(seed, "factor", 0));
  std::vector<double> factor(n_months + max_lead);
  double f = 0.0;
  for (int burn = 0; burn < 50; ++burn) f = 0.6 * f + rng.gaussian();
  for (auto& v : factor) v = f = 0.6 * f + rng.gaussian();

  // CPI, month-on-month with last month = 100.
  std::string cpi = "month,value\n";
  for (int t = 0; t < n_months; ++t) {
    year_month ym = first_month + months{t};
    double value = 100.0 + 0.2 * factor[t] + 0.1 * rng.gaussian();
    char label[16];
    std::snprintf(label, sizeof label, "%04d-%02u", static_cast<int>(ym.year()), static_cast<unsigned>(ym.month()));
    cpi += std::string(label) + "," + fixed(value, 2) + "\n";
  }

  // Daily search index: monthly level follows growth a*f(t+lead) + noise.
  std::string daily = "date,keyword,value\n";
  for (const Keyword& k : keywords()) {
    Rng krng(cpikw::derive_seed(seed, k.word, 0));
    double level = 800.0 + 400.0 * krng.uniform();
    for (int t = 0; t < n_months; ++t) {
      if (t > 0) {
        double growth = 0.04 * (k.loading * factor[t + k.lead] + k.noise * krng.gaussian());
        level *= 1.0 + growth;
      }
      year_month ym = first_month + months{t};
      const unsigned days = static_cast<unsigned>((year_month_day_last{ym.year(), month_day_last{ym.month()}}).day());
      for (unsigned d = 1; d <= days; ++d) {
        double value = std::max(1.0, level * (1.0 + 0.02 * krng.gaussian()));
        char date[16];
        std::snprintf(date, sizeof date, "%04d-%02u-%02u", static_cast<int>(ym.year()), static_cast<unsigned>(ym.month()), d);
        daily += std::string(date) + "," + k.word + "," + fixed(value, 1) + "\n";
      }
    }
  }

  Rng text_rng(cpikw::derive_seed(seed, "corpus", 0));
  std::string corpus;
  int id = 0;
  for (const auto& rec : tagged_corpus(text_rng, docs_per_seed)) {
    nlohmann::ordered_json j{{"keyword", rec.keyword}, {"source_id", "syn:" + std::to_string(++id)}, {"text", rec.text}};
    j["tags"] = rec.tags;
    corpus += j.dump() + "\n";
  }

  nlohmann::ordered_json seeds{{"macro", nlohmann::json::array()}, {"micro", nlohmann::json::array()}};
  for (const Keyword& k : keywords()) {
    if (k.seed) seeds[k.perspective].push_back(k.word);
  }

  nlohmann::ordered_json config{
      {"paths.corpus", "corpus.jsonl"},
      {"paths.seeds", "seeds.json"},
      {"paths.daily_index", "daily_index.csv"},
      {"paths.target", "cpi.csv"},
      {"paths.output_dir", "out"},
      {"corpus.min_length", 60},
      {"corpus.max_length", 180},
      {"model.max_seq_len", 288},
      {"train.steps", 1200},
      {"train.learning_rate", 0.3},
      {"robustness.max_new", 40},
      {"similarity.threshold", 0.2},
  };

  Rng lm_rng(cpikw::derive_seed(seed, "lm", 0));
  const fs::path dir(out_dir);
  cpikw::write_file(dir / "cpi.csv", cpi);
  cpikw::write_file(dir / "daily_index.csv", daily);
  cpikw::write_file(dir / "corpus.jsonl", corpus);
  cpikw::write_file(dir / "seeds.json", seeds.dump(2) + "\n");
  cpikw::write_file(dir / "lm_corpus.jsonl", lm_corpus(lm_rng, 50 * 1024));
  cpikw::write_file(dir / "config.json", config.dump(2) + "\n");
  std::cout << "wrote synthetic dataset to " << dir.string() << "\n";
  return 0;
}
