// fixthresh command-line interface. Links only the C API.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fixthresh/fixthresh.h"

namespace {

// 0 success, 2 validation error, 3 pipeline-stage failure.
int exit_code_for(ft_status st) {
  switch (st) {
    case FT_OK:
      return 0;
    case FT_ERR_INVALID_ARGUMENT:
    case FT_ERR_FORMAT:
    case FT_ERR_METRIC_DOMAIN:
      return 2;
    default:
      return 3;
  }
}

int finish(ft_status st) {
  if (st != FT_OK) std::fprintf(stderr, "fixthresh: error: %s\n", ft_last_error());
  return exit_code_for(st);
}

const char* opt_cstr(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ",";
    out += parts[i];
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-threshold robustness evaluation for AI-image detectors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ft_version()));

  // gen
  std::string gen_spec, gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic cue dataset");
  gen->add_option("--spec", gen_spec, "CueSpec JSON file (defaults when omitted)");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();

  // degrade
  std::string deg_in, deg_out;
  std::vector<std::string> deg_grid;
  auto* deg = app.add_subcommand("degrade", "Apply the degradation grid to a directory");
  deg->add_option("--in", deg_in, "Input image directory")->required();
  deg->add_option("--out", deg_out, "Output directory (one subdirectory per condition)")
      ->required();
  deg->add_option("--grid", deg_grid,
                  "Condition names (default: the full grid); 'default' keeps the default grid");

  // train
  std::string tr_config, tr_data, tr_out;
  auto* tr = app.add_subcommand("train", "Train a detector");
  tr->add_option("--config", tr_config, "Model/train config JSON");
  tr->add_option("--data", tr_data, "Dataset directory (train/ and val/, or manifest.csv)")
      ->required();
  tr->add_option("--out", tr_out, "Checkpoint output path")->required();

  // score
  std::string sc_ckpt, sc_data, sc_out;
  std::vector<std::string> sc_grid;
  auto* sc = app.add_subcommand("score", "Score a labeled directory under the grid");
  sc->add_option("--ckpt", sc_ckpt, "Checkpoint path")->required();
  sc->add_option("--data", sc_data, "Labeled image directory")->required();
  sc->add_option("--grid", sc_grid, "Condition names (default: the full grid)");
  sc->add_option("--out", sc_out, "Output scores CSV")->required();

  // eval
  std::string ev_scores, ev_mode = "both", ev_out, ev_val;
  auto* ev = app.add_subcommand("eval", "Evaluate scores under the fixed-threshold protocol");
  ev->add_option("--scores", ev_scores, "Scores CSV (id,label,score[,seed][,condition])")
      ->required();
  ev->add_option("--mode", ev_mode, "fixed | retuned | both (default both)");
  ev->add_option("--out", ev_out, "Report directory")->required();
  ev->add_option("--val-scores", ev_val,
                 "Validation scores CSV for threshold selection (default: clean "
                 "condition of --scores)");

  // aggregate
  std::vector<std::string> ag_runs;
  std::string ag_out;
  auto* ag = app.add_subcommand("aggregate", "Aggregate per-seed robustness CSVs");
  ag->add_option("--runs", ag_runs, "Per-seed robustness.csv files")
      ->required()
      ->expected(-2);
  ag->add_option("--out", ag_out, "Output summary CSV")->required();

  // plot
  std::string pl_dir;
  auto* pl = app.add_subcommand("plot", "Render SVG charts for a report directory");
  pl->add_option("--report", pl_dir, "Report directory containing robustness.csv")
      ->required();

  // reproduce-spectrum
  std::string rs_config, rs_out;
  std::vector<int> rs_seeds;
  auto* rs = app.add_subcommand(
      "reproduce-spectrum",
      "Full pipeline: generate, train, score, evaluate, aggregate, plot");
  rs->add_option("--config", rs_config, "Spectrum config JSON (defaults when omitted)");
  rs->add_option("--out", rs_out, "Report directory")->required();
  rs->add_option("--seed", rs_seeds, "Seed list override");

  CLI11_PARSE(app, argc, argv);

  auto grid_arg = [](std::vector<std::string> g) -> std::string {
    if (g.size() == 1 && g[0] == "default") g.clear();
    return join(g);
  };

  if (*gen) return finish(ft_run_gen(opt_cstr(gen_spec), gen_out.c_str()));
  if (*deg) {
    const std::string grid = grid_arg(deg_grid);
    return finish(ft_run_degrade(deg_in.c_str(), deg_out.c_str(), opt_cstr(grid)));
  }
  if (*tr)
    return finish(ft_run_train(opt_cstr(tr_config), tr_data.c_str(), tr_out.c_str()));
  if (*sc) {
    const std::string grid = grid_arg(sc_grid);
    return finish(ft_run_score(sc_ckpt.c_str(), sc_data.c_str(), opt_cstr(grid),
                               sc_out.c_str()));
  }
  if (*ev)
    return finish(ft_run_eval(ev_scores.c_str(), ev_mode.c_str(), ev_out.c_str(),
                              opt_cstr(ev_val)));
  if (*ag) {
    std::vector<const char*> ptrs;
    for (const auto& r : ag_runs) ptrs.push_back(r.c_str());
    return finish(ft_run_aggregate(ptrs.data(), ptrs.size(), ag_out.c_str()));
  }
  if (*pl) return finish(ft_run_plot(pl_dir.c_str()));
  if (*rs)
    return finish(ft_run_reproduce_spectrum(opt_cstr(rs_config), rs_out.c_str(),
                                            rs_seeds.empty() ? nullptr : rs_seeds.data(),
                                            rs_seeds.size()));
  return 2;
}
