// Command-line driver for the keyword-expansion pipeline.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cpikw/error.hpp"
#include "cpikw/pipeline.hpp"

namespace {

struct Common {
  std::string config_path;
  bool force = false;
  bool strict = false;
  std::vector<std::string> overrides;
};

cpikw::PipelineConfig load(const Common& opts) {
  cpikw::PipelineConfig cfg =
      opts.config_path.empty() ? cpikw::parse_config("", ".") : cpikw::validate_config(opts.config_path);
  std::vector<std::string> assignments = opts.overrides;
  if (opts.strict) assignments.push_back("corpus.strict=true");
  if (!assignments.empty()) cpikw::apply_overrides(cfg, assignments);
  return cfg;
}

void print_result(const cpikw::StageResult& r) {
  std::string files;
  for (const auto& f : r.outputs) files += (files.empty() ? "" : ", ") + f;
  std::cout << cpikw::stage_name(r.stage) << ": wrote " << files << "\n";
  for (const auto& w : r.warnings) std::cerr << "warning[" << cpikw::stage_name(r.stage) << "]: " << w << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CPI keyword expansion: language-model keyword extraction and principal component regression"};
  app.require_subcommand(1);
  Common opts;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", opts.config_path, "pipeline config (flat JSON, dotted keys)");
    sub->add_flag("--force", opts.force, "run even if upstream artifacts are stale");
    sub->add_flag("--strict", opts.strict, "fail on malformed corpus records");
    sub->add_option("--set", opts.overrides, "override a config key, e.g. --set stats.n_components=4");
  };

  std::vector<std::pair<CLI::App*, cpikw::Stage>> stage_cmds;
  const char* descriptions[] = {
      "load the corpus and seeds, apply the length filter",
      "train the character-level language model",
      "select keywords similar to the seeds by cosine of hidden states",
      "extract important keywords by prompting the model",
      "intersect similar and important keywords",
      "build lagged, correlation-screened feature matrices",
      "run PCA and regression for both keyword sets",
      "write the comparison report",
  };
  for (std::size_t i = 0; i < cpikw::all_stages().size(); ++i) {
    cpikw::Stage s = cpikw::all_stages()[i];
    CLI::App* sub = app.add_subcommand(std::string(cpikw::stage_name(s)), descriptions[i]);
    add_common(sub);
    stage_cmds.emplace_back(sub, s);
  }
  CLI::App* run_all = app.add_subcommand("run-all", "run every stage in order");
  add_common(run_all);
  CLI::App* show = app.add_subcommand("config", "validate a config and print the effective values");
  add_common(show);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    cpikw::PipelineConfig cfg = load(opts);
    cpikw::RunOptions run{opts.force};
    if (show->parsed()) {
      std::cout << cfg.to_json();
      return 0;
    }
    if (run_all->parsed()) {
      for (const auto& r : cpikw::run_all(cfg, run)) print_result(r);
      std::cout << "report: " << (cfg.output_dir() / "report.md").string() << "\n";
      return 0;
    }
    for (const auto& [sub, stage] : stage_cmds) {
      if (sub->parsed()) print_result(cpikw::run_stage(stage, cfg, run));
    }
    return 0;
  } catch (const cpikw::Error& e) {
    std::cerr << "error[" << cpikw::category_name(e.category()) << "]: " << e.what() << "\n";
    return cpikw::exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return cpikw::exit_code(cpikw::ErrorCategory::kInternal);
  }
}
