#ifndef FIXTHRESH_PIPELINE_HPP
#define FIXTHRESH_PIPELINE_HPP

#include <map>
#include <string>
#include <vector>

#include "fixthresh/detector.hpp"
#include "fixthresh/protocol.hpp"
#include "fixthresh/synthgen.hpp"

namespace fixthresh::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

// Caps OpenMP parallelism from FIXTHRESH_THREADS when set.
void apply_thread_cap();

// Configuration for the end-to-end spectrum reproduction. A JSON config file
// may override any subset of fields; CLI flags override the file.
struct SpectrumConfig {
  synthgen::CueSpec dataset;
  double train_frac = 2.0 / 3.0;
  double val_frac = 1.0 / 6.0;
  double test_frac = 1.0 / 6.0;
  detector::HybridConfig model;   // branch_mode/freq_enabled set per architecture
  detector::TrainConfig train;
  std::vector<int> seeds = {1, 2, 3};
  std::vector<std::string> grid;  // empty = default degradation grid

  std::string to_json() const;
};

// Desk-scale defaults: the nets train from scratch, so the backbone group
// uses the same rate as the new layers here.
SpectrumConfig default_spectrum_config();
SpectrumConfig load_spectrum_config(const std::string& json_path);

// Parsed score rows grouped by seed and condition (grid order of first
// appearance). Seed -1 marks files without a seed column.
using ScoresBySeed = std::map<int, protocol::ConditionScoreMap>;
ScoresBySeed ingest_scores(const std::string& csv_path);

void cmd_gen(const std::string& spec_json_path, const std::string& out_dir);
void cmd_degrade(const std::string& in_dir, const std::string& out_dir,
                 const std::vector<std::string>& grid_names);
void cmd_train(const std::string& config_json_path, const std::string& data_dir,
               const std::string& out_ckpt);
void cmd_score(const std::string& ckpt_path, const std::string& data_dir,
               const std::vector<std::string>& grid_names,
               const std::string& out_csv);
void cmd_eval(const std::string& scores_csv, const std::string& mode,
              const std::string& out_dir, const std::string& val_scores_csv);
void cmd_aggregate(const std::vector<std::string>& run_csvs,
                   const std::string& out_csv);
void cmd_plot(const std::string& report_dir);
void cmd_reproduce_spectrum(const std::string& config_json_path,
                            const std::string& out_dir,
                            const std::vector<int>& seeds_override);

}  // namespace fixthresh::pipeline

#endif
