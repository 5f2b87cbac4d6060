#include "fixthresh/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>
#include <tuple>
#include <unordered_map>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <json.hpp>

#include "fixthresh/csv.hpp"
#include "fixthresh/dataset.hpp"
#include "fixthresh/error.hpp"
#include "fixthresh/plot.hpp"
#include "fixthresh/stats.hpp"

namespace fixthresh::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void apply_thread_cap() {
#ifdef _OPENMP
  if (const char* env = std::getenv("FIXTHRESH_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) omp_set_num_threads(n);
  }
#endif
}

namespace {

std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 0xCBF29CE484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

transforms::ConditionGrid grid_from(const std::vector<std::string>& names) {
  return names.empty() ? transforms::ConditionGrid::default_grid()
                       : transforms::ConditionGrid::from_names(names);
}

// External score files may carry condition names outside the built-in grid.
std::string display_condition(const std::string& name) {
  try {
    return transforms::Condition::from_name(name).display_name();
  } catch (const Error&) {
    return name;
  }
}

// ---- config (de)serialization ----------------------------------------------

json model_to_json(const detector::HybridConfig& c) {
  return json{{"input_size", c.input_size},
              {"in_channels", c.in_channels},
              {"embed_dim", c.embed_dim},
              {"conv_channels", c.conv_channels},
              {"patch_size", c.patch_size},
              {"vit_dim", c.vit_dim},
              {"attn_blocks", c.attn_blocks},
              {"attn_heads", c.attn_heads},
              {"mlp_ratio", c.mlp_ratio},
              {"gate_hidden", c.gate_hidden},
              {"freq_enabled", c.freq_enabled},
              {"freq_cutoff", c.freq_cutoff},
              {"branch_mode", detector::branch_mode_str(c.branch_mode)}};
}

void model_from_json(const json& j, detector::HybridConfig& c) {
  c.input_size = j.value("input_size", c.input_size);
  c.in_channels = j.value("in_channels", c.in_channels);
  c.embed_dim = j.value("embed_dim", c.embed_dim);
  c.conv_channels = j.value("conv_channels", c.conv_channels);
  c.patch_size = j.value("patch_size", c.patch_size);
  c.vit_dim = j.value("vit_dim", c.vit_dim);
  c.attn_blocks = j.value("attn_blocks", c.attn_blocks);
  c.attn_heads = j.value("attn_heads", c.attn_heads);
  c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  c.gate_hidden = j.value("gate_hidden", c.gate_hidden);
  c.freq_enabled = j.value("freq_enabled", c.freq_enabled);
  c.freq_cutoff = j.value("freq_cutoff", c.freq_cutoff);
  if (j.contains("branch_mode"))
    c.branch_mode = detector::branch_mode_from_str(j.at("branch_mode").get<std::string>());
}

json train_to_json(const detector::TrainConfig& t) {
  return json{{"lr_new", t.lr_new},
              {"lr_backbone", t.lr_backbone},
              {"weight_decay", t.weight_decay},
              {"max_epochs", t.max_epochs},
              {"patience", t.patience},
              {"batch_size", t.batch_size},
              {"lit_freeze_epochs", t.lit_freeze_epochs},
              {"seed", t.seed}};
}

void train_from_json(const json& j, detector::TrainConfig& t) {
  t.lr_new = j.value("lr_new", t.lr_new);
  t.lr_backbone = j.value("lr_backbone", t.lr_backbone);
  t.weight_decay = j.value("weight_decay", t.weight_decay);
  t.max_epochs = j.value("max_epochs", t.max_epochs);
  t.patience = j.value("patience", t.patience);
  t.batch_size = j.value("batch_size", t.batch_size);
  t.lit_freeze_epochs = j.value("lit_freeze_epochs", t.lit_freeze_epochs);
  t.seed = j.value("seed", t.seed);
}

json dataset_to_json(const synthgen::CueSpec& s) {
  return json{{"forensic_strength", s.forensic_strength},
              {"forensic_period", s.forensic_period},
              {"semantic_strength", s.semantic_strength},
              {"image_size", s.image_size},
              {"n_per_class", s.n_per_class},
              {"seed", s.seed}};
}

void dataset_from_json(const json& j, synthgen::CueSpec& s) {
  s.forensic_strength = j.value("forensic_strength", s.forensic_strength);
  s.forensic_period = j.value("forensic_period", s.forensic_period);
  s.semantic_strength = j.value("semantic_strength", s.semantic_strength);
  s.image_size = j.value("image_size", s.image_size);
  s.n_per_class = j.value("n_per_class", s.n_per_class);
  s.seed = j.value("seed", s.seed);
}

json spectrum_to_json(const SpectrumConfig& c) {
  json j;
  j["dataset"] = dataset_to_json(c.dataset);
  j["dataset"]["train_frac"] = c.train_frac;
  j["dataset"]["val_frac"] = c.val_frac;
  j["dataset"]["test_frac"] = c.test_frac;
  j["model"] = model_to_json(c.model);
  j["train"] = train_to_json(c.train);
  j["seeds"] = c.seeds;
  j["grid"] = c.grid;
  return j;
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(csv::read_text_file(path));
  } catch (const json::exception& e) {
    raise(ErrorCode::format, path + ": JSON parse error: " + e.what());
  }
}

}  // namespace

std::string SpectrumConfig::to_json() const { return spectrum_to_json(*this).dump(2); }

SpectrumConfig default_spectrum_config() {
  SpectrumConfig c;
  // From-scratch desk nets need larger steps than the fine-tuning defaults,
  // and both parameter groups train at the same rate; early stopping keeps
  // runs short.
  c.train.lr_new = 2e-3;
  c.train.lr_backbone = 2e-3;
  c.train.max_epochs = 25;
  return c;
}

SpectrumConfig load_spectrum_config(const std::string& json_path) {
  SpectrumConfig c = default_spectrum_config();
  const json j = parse_json_file(json_path);
  if (j.contains("dataset")) {
    dataset_from_json(j.at("dataset"), c.dataset);
    c.train_frac = j.at("dataset").value("train_frac", c.train_frac);
    c.val_frac = j.at("dataset").value("val_frac", c.val_frac);
    c.test_frac = j.at("dataset").value("test_frac", c.test_frac);
  }
  if (j.contains("model")) model_from_json(j.at("model"), c.model);
  if (j.contains("train")) train_from_json(j.at("train"), c.train);
  if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<int>>();
  if (j.contains("grid")) c.grid = j.at("grid").get<std::vector<std::string>>();
  return c;
}

// ---- score file ingest ------------------------------------------------------

ScoresBySeed ingest_scores(const std::string& csv_path) {
  const csv::Table t = csv::read_file(csv_path);
  const int id_col = t.require_column("id");
  const int label_col = t.require_column("label");
  const int score_col = t.require_column("score");
  const int seed_col = t.column("seed");
  const int cond_col = t.column("condition");

  ScoresBySeed by_seed;
  std::map<int, std::vector<std::string>> order;  // condition order per seed
  std::set<std::tuple<int, std::string, std::string>> seen;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const std::string where = csv_path + " row " + std::to_string(r + 2);
    const auto& row = t.rows[r];
    const std::string& id = row[id_col];
    require(!id.empty(), ErrorCode::format, where + ": empty id");
    const long label = csv::parse_long(row[label_col], where);
    require(label == 0 || label == 1, ErrorCode::format,
            where + ": label must be 0 or 1, got '" + row[label_col] + "'");
    const double score = csv::parse_double(row[score_col], where);
    require(std::isfinite(score), ErrorCode::format, where + ": non-finite score");
    const int seed = seed_col >= 0
        ? static_cast<int>(csv::parse_long(row[seed_col], where)) : -1;
    const std::string cond = cond_col >= 0 ? row[cond_col] : std::string("clean");
    require(!cond.empty(), ErrorCode::format, where + ": empty condition");

    require(seen.insert({seed, cond, id}).second, ErrorCode::format,
            where + ": duplicate (id, condition) pair: " + id + ", " + cond);

    auto& cmap = by_seed[seed];
    auto it = std::find_if(cmap.begin(), cmap.end(),
                           [&](const auto& cs) { return cs.condition == cond; });
    if (it == cmap.end()) {
      cmap.push_back({cond, {}});
      it = cmap.end() - 1;
    }
    it->scores.scores.push_back(score);
    it->scores.labels.push_back(static_cast<int>(label));
    it->scores.ids.push_back(id);
  }
  require(!by_seed.empty(), ErrorCode::format, csv_path + ": no score rows");
  return by_seed;
}

// ---- simple commands --------------------------------------------------------

void cmd_gen(const std::string& spec_json_path, const std::string& out_dir) {
  apply_thread_cap();
  synthgen::CueSpec spec;
  double train_frac = 2.0 / 3.0, val_frac = 1.0 / 6.0, test_frac = 1.0 / 6.0;
  if (!spec_json_path.empty()) {
    const json j = parse_json_file(spec_json_path);
    dataset_from_json(j, spec);
    train_frac = j.value("train_frac", train_frac);
    val_frac = j.value("val_frac", val_frac);
    test_frac = j.value("test_frac", test_frac);
  }
  synthgen::write_dataset(out_dir, spec, train_frac, val_frac, test_frac);
}

void cmd_degrade(const std::string& in_dir, const std::string& out_dir,
                 const std::vector<std::string>& grid_names) {
  apply_thread_cap();
  require(fs::is_directory(in_dir), ErrorCode::io, "not a directory: " + in_dir);
  const transforms::ConditionGrid grid = grid_from(grid_names);
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char ch) { return std::tolower(ch); });
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg")
      names.push_back(e.path().filename().string());
  }
  std::sort(names.begin(), names.end());
  require(!names.empty(), ErrorCode::io, "no images under " + in_dir);

  for (const auto& cond : grid.conditions)
    fs::create_directories(fs::path(out_dir) / cond.name());

  #pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(names.size()); ++i) {
    const auto unit = imaging::to_unit(imaging::load_image(
        (fs::path(in_dir) / names[i]).string()));
    // Degraded pixels are stored losslessly; the stem is preserved so files
    // correspond across condition directories.
    const std::string stem = fs::path(names[i]).stem().string();
    for (const auto& cond : grid.conditions) {
      const auto degraded = transforms::apply_condition(unit, cond);
      imaging::save_png((fs::path(out_dir) / cond.name() / (stem + ".png")).string(),
                        imaging::to_u8(degraded));
    }
  }
}

namespace {

std::vector<detector::Sample> make_samples(
    const std::vector<detector::LabeledImage>& images,
    const detector::HybridConfig& config) {
  std::vector<detector::Sample> samples(images.size());
  #pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(images.size()); ++i)
    samples[i] = detector::make_sample(images[i].image, images[i].label, config);
  return samples;
}

void log_history(const std::string& tag, const detector::TrainResult& result) {
  for (const auto& h : result.history)
    std::cerr << "[" << tag << "] epoch " << h.epoch << " loss "
              << csv::format_fixed(h.train_loss, 4) << " val_auroc "
              << csv::format_fixed(h.val_auroc, 4) << "\n";
  std::cerr << "[" << tag << "] best epoch " << result.best_epoch << "\n";
}

}  // namespace

void cmd_train(const std::string& config_json_path, const std::string& data_dir,
               const std::string& out_ckpt) {
  apply_thread_cap();
  detector::HybridConfig model;
  detector::TrainConfig tc;
  if (!config_json_path.empty()) {
    const json j = parse_json_file(config_json_path);
    if (j.contains("model")) model_from_json(j.at("model"), model);
    if (j.contains("train")) train_from_json(j.at("train"), tc);
  }
  model.validate();

  std::vector<detector::LabeledImage> train_imgs, val_imgs;
  if (fs::is_directory(fs::path(data_dir) / "train") &&
      fs::is_directory(fs::path(data_dir) / "val")) {
    train_imgs = dataset::load_labeled_dir((fs::path(data_dir) / "train").string());
    val_imgs = dataset::load_labeled_dir((fs::path(data_dir) / "val").string());
  } else {
    const auto entries = dataset::list_labeled_dir(data_dir);
    const auto splits = synthgen::split(entries, 0.8, 0.2, 0.0, tc.seed);
    require(!splits.train.empty() && !splits.val.empty(), ErrorCode::pipeline,
            "train: 80/20 split produced an empty side");
    for (const auto& e : splits.train)
      train_imgs.push_back(dataset::load_entry(data_dir, e));
    for (const auto& e : splits.val)
      val_imgs.push_back(dataset::load_entry(data_dir, e));
  }

  const auto train_samples = make_samples(train_imgs, model);
  const auto val_samples = make_samples(val_imgs, model);
  const auto result = detector::train(train_samples, val_samples, model, tc);
  log_history("train", result);
  detector::save_checkpoint(out_ckpt, result.params, tc.seed);
}

namespace {

csv::Table score_table() {
  csv::Table t;
  t.header = {"id", "label", "score", "seed", "condition"};
  return t;
}

void append_scores(csv::Table& t,
                   const std::vector<std::pair<std::string, metrics::ScoreSet>>& scored,
                   std::uint64_t seed) {
  for (const auto& [cond, set] : scored) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      t.rows.push_back({set.ids[i], std::to_string(set.labels[i]),
                        csv::format_double(set.scores[i]),
                        std::to_string(seed), cond});
    }
  }
}

}  // namespace

void cmd_score(const std::string& ckpt_path, const std::string& data_dir,
               const std::vector<std::string>& grid_names,
               const std::string& out_csv) {
  apply_thread_cap();
  std::uint64_t seed = 0;
  const detector::HybridParams params = detector::load_checkpoint(ckpt_path, &seed);
  const auto images = dataset::load_labeled_dir(data_dir);
  const auto scored = detector::score_dataset(params, images, grid_from(grid_names));
  csv::Table t = score_table();
  append_scores(t, scored, seed);
  csv::write_file(out_csv, t);
}

// ---- evaluation and reports -------------------------------------------------

namespace {

struct ModelRun {
  std::string model;
  int seed = 0;
  protocol::RobustnessTable fixed;
  protocol::RobustnessTable retuned;
  protocol::InflationReport inflation;
  bool has_fixed = false;
  bool has_retuned = false;
};

const std::vector<std::string> kMetricFields = {
    "accuracy", "precision", "recall", "f1", "tnr", "auroc", "best_accuracy"};

csv::Table robustness_table_header() {
  csv::Table t;
  t.header = {"model", "seed", "mode", "condition", "operating_point",
              "threshold", "accuracy", "precision", "recall", "f1", "tnr",
              "auroc", "best_accuracy", "tp", "fp", "tn", "fn"};
  return t;
}

void append_table(csv::Table& t, const protocol::RobustnessTable& table, int seed) {
  const char* mode = table.mode == protocol::EvalMode::fixed ? "fixed" : "retuned";
  for (const auto& row : table.rows) {
    for (protocol::OpName op : protocol::kAllOps) {
      const auto& cell = row.cells[static_cast<int>(op)];
      t.rows.push_back({table.model_id, std::to_string(seed), mode, row.condition,
                        protocol::op_name_str(op), csv::format_double(cell.threshold),
                        csv::format_double(cell.bundle.accuracy),
                        csv::format_double(cell.bundle.precision),
                        csv::format_double(cell.bundle.recall),
                        csv::format_double(cell.bundle.f1),
                        csv::format_double(cell.bundle.tnr),
                        csv::format_double(row.auroc),
                        csv::format_double(row.best_accuracy),
                        std::to_string(cell.counts.tp), std::to_string(cell.counts.fp),
                        std::to_string(cell.counts.tn), std::to_string(cell.counts.fn)});
    }
  }
}

csv::Table inflation_header() {
  csv::Table t;
  t.header = {"model", "seed", "condition", "fixed_accuracy",
              "retuned_best_accuracy", "delta"};
  return t;
}

void append_inflation(csv::Table& t, const protocol::InflationReport& rep, int seed) {
  for (const auto& row : rep.rows)
    t.rows.push_back({rep.model_id, std::to_string(seed), row.condition,
                      csv::format_double(row.fixed_accuracy),
                      csv::format_double(row.retuned_best_accuracy),
                      csv::format_double(row.delta)});
}

// Per (model, condition, metric) values across seeds for fixed tables.
struct SummaryKey {
  std::string model, condition, metric;
  bool operator<(const SummaryKey& o) const {
    return std::tie(model, condition, metric) < std::tie(o.model, o.condition, o.metric);
  }
};

std::map<SummaryKey, std::vector<double>> collect_fixed_metrics(
    const std::vector<ModelRun>& runs) {
  std::map<SummaryKey, std::vector<double>> values;
  for (const auto& run : runs) {
    if (!run.has_fixed) continue;
    for (const auto& row : run.fixed.rows) {
      values[{run.model, row.condition, "acc_low_fpr"}].push_back(
          row.cells[0].bundle.accuracy);
      values[{run.model, row.condition, "acc_roc_optimal"}].push_back(
          row.cells[1].bundle.accuracy);
      values[{run.model, row.condition, "acc_best_f1"}].push_back(
          row.cells[2].bundle.accuracy);
      values[{run.model, row.condition, "auroc"}].push_back(row.auroc);
    }
  }
  return values;
}

void write_summary_csv(const std::string& path, const std::vector<ModelRun>& runs) {
  const auto values = collect_fixed_metrics(runs);
  csv::Table t;
  t.header = {"model", "condition", "metric", "mean", "std", "ci_lo", "ci_hi", "n"};
  for (const auto& [key, vals] : values) {
    if (vals.size() < 2) continue;
    const auto row = stats::summarize(vals);
    t.rows.push_back({key.model, key.condition, key.metric,
                      csv::format_double(row.mean), csv::format_double(row.stddev),
                      csv::format_double(row.ci_lo), csv::format_double(row.ci_hi),
                      std::to_string(row.n)});
  }
  csv::write_file(path, t);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

// Conditions as rows, models as columns; one section per operating point.
void write_markdown(const std::string& path, const std::vector<ModelRun>& runs,
                    const std::vector<std::string>& conditions,
                    const std::vector<std::string>& models) {
  std::string md = "# Fixed-threshold robustness\n\n";
  md += "Accuracy per condition at thresholds selected once on clean "
        "validation data. Values are mean";
  bool multi_seed = false;
  {
    std::set<int> seeds;
    for (const auto& r : runs) seeds.insert(r.seed);
    multi_seed = seeds.size() > 1;
  }
  md += multi_seed ? " +- sample std over seeds.\n" : " of a single seed.\n";

  for (protocol::OpName op : protocol::kAllOps) {
    md += "\n## Operating point: " + std::string(protocol::op_name_str(op)) + "\n\n";
    md += "| Condition |";
    for (const auto& m : models) md += " " + m + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < models.size(); ++i) md += "---|";
    md += "\n";
    for (const auto& cond : conditions) {
      md += "| " + display_condition(cond) + " |";
      for (const auto& model : models) {
        std::vector<double> vals;
        for (const auto& run : runs)
          if (run.has_fixed && run.model == model)
            vals.push_back(run.fixed.row(cond).cells[static_cast<int>(op)].bundle.accuracy);
        if (vals.empty()) {
          md += " - |";
        } else if (vals.size() == 1) {
          md += " " + csv::format_fixed(vals[0], 3) + " |";
        } else {
          md += " " + csv::format_fixed(mean_of(vals), 3) + " +- " +
                csv::format_fixed(stddev_of(vals), 3) + " |";
        }
      }
      md += "\n";
    }
  }
  csv::write_text_file(path, md);
}

void write_plots(const std::string& dir, const std::vector<ModelRun>& runs,
                 const std::vector<std::string>& conditions,
                 const std::vector<std::string>& models) {
  for (protocol::OpName op : protocol::kAllOps) {
    plot::LineChart chart;
    chart.title = "Fixed-threshold accuracy (" +
                  std::string(protocol::op_name_str(op)) + ")";
    chart.y_label = "accuracy";
    for (const auto& c : conditions)
      chart.x_labels.push_back(display_condition(c));
    for (const auto& model : models) {
      plot::Series s;
      s.label = model;
      for (const auto& cond : conditions) {
        std::vector<double> vals;
        for (const auto& run : runs)
          if (run.has_fixed && run.model == model)
            vals.push_back(run.fixed.row(cond).cells[static_cast<int>(op)].bundle.accuracy);
        if (vals.empty()) continue;
        s.values.push_back(mean_of(vals));
        if (vals.size() >= 2) {
          const auto row = stats::summarize(vals);
          s.ci_lo.push_back(row.ci_lo);
          s.ci_hi.push_back(row.ci_hi);
        }
      }
      if (!s.ci_lo.empty() && s.ci_lo.size() != s.values.size()) {
        s.ci_lo.clear();
        s.ci_hi.clear();
      }
      if (!s.values.empty()) chart.series.push_back(std::move(s));
    }
    const std::string svg = plot::render_svg(chart);
    csv::write_text_file(
        (fs::path(dir) / ("robustness_" + std::string(protocol::op_name_str(op)) + ".svg"))
            .string(), svg);
  }
}

std::vector<std::string> model_order(const std::vector<ModelRun>& runs) {
  std::vector<std::string> models;
  for (const auto& r : runs)
    if (std::find(models.begin(), models.end(), r.model) == models.end())
      models.push_back(r.model);
  return models;
}

std::vector<std::string> condition_order(const std::vector<ModelRun>& runs) {
  for (const auto& r : runs) {
    if (!r.has_fixed) continue;
    std::vector<std::string> conds;
    for (const auto& row : r.fixed.rows) conds.push_back(row.condition);
    return conds;
  }
  raise(ErrorCode::pipeline, "no fixed-mode results to report");
}

void write_reports(const std::string& out_dir, const std::vector<ModelRun>& runs) {
  fs::create_directories(out_dir);
  csv::Table rob = robustness_table_header();
  csv::Table infl = inflation_header();
  bool any_inflation = false;
  std::set<int> seeds;
  for (const auto& run : runs) {
    seeds.insert(run.seed);
    if (run.has_fixed) append_table(rob, run.fixed, run.seed);
    if (run.has_retuned) append_table(rob, run.retuned, run.seed);
    if (run.has_fixed && run.has_retuned) {
      append_inflation(infl, run.inflation, run.seed);
      any_inflation = true;
    }
  }
  csv::write_file((fs::path(out_dir) / "robustness.csv").string(), rob);
  if (any_inflation)
    csv::write_file((fs::path(out_dir) / "inflation.csv").string(), infl);

  // Per-seed robustness files feed the aggregate command.
  if (seeds.size() > 1) {
    for (int seed : seeds) {
      csv::Table per = robustness_table_header();
      for (const auto& run : runs) {
        if (run.seed != seed) continue;
        if (run.has_fixed) append_table(per, run.fixed, run.seed);
        if (run.has_retuned) append_table(per, run.retuned, run.seed);
      }
      csv::write_file(
          (fs::path(out_dir) / ("robustness_seed" + std::to_string(seed) + ".csv"))
              .string(), per);
    }
    write_summary_csv((fs::path(out_dir) / "summary.csv").string(), runs);
  }

  const bool any_fixed =
      std::any_of(runs.begin(), runs.end(), [](const ModelRun& r) { return r.has_fixed; });
  if (any_fixed) {
    const auto conds = condition_order(runs);
    const auto models = model_order(runs);
    write_markdown((fs::path(out_dir) / "robustness.md").string(), runs, conds, models);
    write_plots(out_dir, runs, conds, models);
  }
}

}  // namespace

void cmd_eval(const std::string& scores_csv, const std::string& mode,
              const std::string& out_dir, const std::string& val_scores_csv) {
  apply_thread_cap();
  require(mode == "fixed" || mode == "retuned" || mode == "both",
          ErrorCode::invalid_argument, "eval: mode must be fixed|retuned|both");
  const ScoresBySeed by_seed = ingest_scores(scores_csv);
  ScoresBySeed val_by_seed;
  if (!val_scores_csv.empty()) val_by_seed = ingest_scores(val_scores_csv);

  const std::string model_id = fs::path(scores_csv).stem().string();
  std::vector<ModelRun> runs;
  for (const auto& [seed, cmap] : by_seed) {
    ModelRun run;
    run.model = model_id;
    run.seed = seed;
    if (mode == "fixed" || mode == "both") {
      const metrics::ScoreSet* val_clean = nullptr;
      if (!val_by_seed.empty()) {
        auto it = val_by_seed.find(seed);
        if (it == val_by_seed.end() && val_by_seed.size() == 1)
          it = val_by_seed.begin();
        require(it != val_by_seed.end(), ErrorCode::protocol,
                "eval: validation scores missing seed " + std::to_string(seed));
        for (const auto& cs : it->second)
          if (cs.condition == "clean") val_clean = &cs.scores;
        require(val_clean != nullptr, ErrorCode::protocol,
                "eval: validation scores lack a clean condition");
      } else {
        // No separate validation file: thresholds come from the clean
        // condition of the evaluated scores.
        for (const auto& cs : cmap)
          if (cs.condition == "clean") val_clean = &cs.scores;
        require(val_clean != nullptr, ErrorCode::protocol,
                "eval: scores lack a clean condition");
      }
      const auto ops = protocol::select_operating_points(*val_clean);
      run.fixed = protocol::evaluate_fixed(cmap, ops, model_id);
      run.has_fixed = true;
    }
    if (mode == "retuned" || mode == "both") {
      run.retuned = protocol::evaluate_retuned(cmap, model_id);
      run.has_retuned = true;
    }
    if (run.has_fixed && run.has_retuned)
      run.inflation = protocol::inflation_report(run.fixed, run.retuned);
    runs.push_back(std::move(run));
  }
  write_reports(out_dir, runs);
}

void cmd_aggregate(const std::vector<std::string>& run_csvs,
                   const std::string& out_csv) {
  apply_thread_cap();
  require(run_csvs.size() >= 2, ErrorCode::invalid_argument,
          "aggregate: need at least two run files");
  std::map<std::string, std::vector<double>> values;
  for (std::size_t f = 0; f < run_csvs.size(); ++f) {
    const csv::Table t = csv::read_file(run_csvs[f]);
    const int model_col = t.require_column("model");
    const int mode_col = t.require_column("mode");
    const int cond_col = t.require_column("condition");
    const int op_col = t.require_column("operating_point");
    std::map<std::string, double> file_values;
    for (const auto& row : t.rows) {
      for (const auto& field : kMetricFields) {
        const int col = t.require_column(field);
        const std::string key = row[model_col] + "/" + row[mode_col] + "/" +
                                row[cond_col] + "/" + row[op_col] + "/" + field;
        file_values[key] = csv::parse_double(row[col], run_csvs[f]);
      }
    }
    if (f == 0) {
      for (const auto& [k, v] : file_values) values[k].push_back(v);
    } else {
      require(file_values.size() == values.size(), ErrorCode::stats,
              "aggregate: run files have mismatched shapes");
      for (const auto& [k, v] : file_values) {
        auto it = values.find(k);
        require(it != values.end(), ErrorCode::stats,
                "aggregate: run files have mismatched keys: " + k);
        it->second.push_back(v);
      }
    }
  }
  csv::Table out;
  out.header = {"metric", "mean", "std", "ci_lo", "ci_hi", "n"};
  for (const auto& [key, vals] : values) {
    const auto row = stats::summarize(vals);
    out.rows.push_back({key, csv::format_double(row.mean),
                        csv::format_double(row.stddev), csv::format_double(row.ci_lo),
                        csv::format_double(row.ci_hi), std::to_string(row.n)});
  }
  csv::write_file(out_csv, out);
}

void cmd_plot(const std::string& report_dir) {
  apply_thread_cap();
  const fs::path rob_path = fs::path(report_dir) / "robustness.csv";
  require(fs::exists(rob_path), ErrorCode::io,
          "plot: missing " + rob_path.string());
  const csv::Table t = csv::read_file(rob_path.string());
  const int model_col = t.require_column("model");
  const int seed_col = t.require_column("seed");
  const int mode_col = t.require_column("mode");
  const int cond_col = t.require_column("condition");
  const int op_col = t.require_column("operating_point");
  const int acc_col = t.require_column("accuracy");

  // Rebuild per-op series from the CSV: conditions keep first-seen order.
  std::vector<std::string> conditions;
  std::vector<std::string> models;
  for (const auto& row : t.rows) {
    if (row[mode_col] != "fixed") continue;
    if (std::find(conditions.begin(), conditions.end(), row[cond_col]) == conditions.end())
      conditions.push_back(row[cond_col]);
    if (std::find(models.begin(), models.end(), row[model_col]) == models.end())
      models.push_back(row[model_col]);
  }
  require(!conditions.empty(), ErrorCode::format,
          "plot: no fixed-mode rows in robustness.csv");

  for (protocol::OpName op : protocol::kAllOps) {
    plot::LineChart chart;
    chart.title = "Fixed-threshold accuracy (" +
                  std::string(protocol::op_name_str(op)) + ")";
    chart.y_label = "accuracy";
    for (const auto& c : conditions)
      chart.x_labels.push_back(display_condition(c));
    for (const auto& model : models) {
      plot::Series s;
      s.label = model;
      bool complete = true;
      bool multi = true;
      for (const auto& cond : conditions) {
        std::vector<double> vals;
        for (const auto& row : t.rows) {
          if (row[mode_col] != "fixed" || row[model_col] != model ||
              row[cond_col] != cond || row[op_col] != protocol::op_name_str(op))
            continue;
          (void)seed_col;
          vals.push_back(csv::parse_double(row[acc_col], "robustness.csv"));
        }
        if (vals.empty()) { complete = false; break; }
        s.values.push_back(mean_of(vals));
        if (vals.size() >= 2) {
          const auto sum = stats::summarize(vals);
          s.ci_lo.push_back(sum.ci_lo);
          s.ci_hi.push_back(sum.ci_hi);
        } else {
          multi = false;
        }
      }
      if (!multi) { s.ci_lo.clear(); s.ci_hi.clear(); }
      if (complete) chart.series.push_back(std::move(s));
    }
    csv::write_text_file(
        (fs::path(report_dir) /
         ("robustness_" + std::string(protocol::op_name_str(op)) + ".svg")).string(),
        plot::render_svg(chart));
  }
}

// ---- the full desk-scale pipeline ------------------------------------------

void cmd_reproduce_spectrum(const std::string& config_json_path,
                            const std::string& out_dir,
                            const std::vector<int>& seeds_override) {
  apply_thread_cap();
  SpectrumConfig cfg = config_json_path.empty()
                           ? default_spectrum_config()
                           : load_spectrum_config(config_json_path);
  if (!seeds_override.empty()) cfg.seeds = seeds_override;
  require(!cfg.seeds.empty(), ErrorCode::invalid_argument,
          "reproduce-spectrum: need at least one seed");
  cfg.model.validate();
  const transforms::ConditionGrid grid = grid_from(cfg.grid);
  fs::create_directories(out_dir);

  std::cerr << "[gen] synthesizing " << 2 * cfg.dataset.n_per_class
            << " images (size " << cfg.dataset.image_size << ")\n";
  const auto items = synthgen::generate(cfg.dataset);
  std::unordered_map<std::string, std::size_t> by_name;
  std::vector<synthgen::ManifestEntry> entries;
  for (std::size_t i = 0; i < items.size(); ++i) {
    by_name[items[i].name] = i;
    entries.push_back({items[i].name, items[i].label});
  }
  std::string manifest_bytes;
  for (const auto& e : entries)
    manifest_bytes += e.path + "," + std::to_string(e.label) + "\n";
  const std::string dataset_hash = hex64(fnv1a(manifest_bytes));

  const auto splits =
      synthgen::split(entries, cfg.train_frac, cfg.val_frac, cfg.test_frac,
                      cfg.dataset.seed);
  require(!splits.train.empty() && !splits.val.empty() && !splits.test.empty(),
          ErrorCode::pipeline, "reproduce-spectrum: a split came out empty");

  auto to_images = [&](const std::vector<synthgen::ManifestEntry>& list) {
    std::vector<detector::LabeledImage> out(list.size());
    #pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(list.size()); ++i) {
      const auto& item = items[by_name.at(list[i].path)];
      out[i] = {imaging::to_unit(item.image), item.label, item.name};
    }
    return out;
  };
  const auto train_images = to_images(splits.train);
  const auto val_images = to_images(splits.val);
  const auto test_images = to_images(splits.test);

  struct Arch {
    const char* id;
    detector::BranchMode mode;
    bool freq;
  };
  const Arch archs[] = {
      {"cnn_freq", detector::BranchMode::cnn_only, true},
      {"vit_freq", detector::BranchMode::vit_only, true},
      {"hybrid", detector::BranchMode::hybrid, false},
  };

  std::vector<ModelRun> runs;
  for (int seed : cfg.seeds) {
    for (const Arch& arch : archs) {
      detector::HybridConfig mcfg = cfg.model;
      mcfg.branch_mode = arch.mode;
      mcfg.freq_enabled = arch.freq;
      detector::TrainConfig tc = cfg.train;
      tc.seed = static_cast<std::uint64_t>(seed);

      const std::string tag = arch.id + std::string("/seed") + std::to_string(seed);
      std::cerr << "[" << tag << "] training\n";
      const auto train_samples = make_samples(train_images, mcfg);
      const auto val_samples = make_samples(val_images, mcfg);
      const auto result = detector::train(train_samples, val_samples, mcfg, tc);
      log_history(tag, result);

      // Clean validation scores select the operating points.
      metrics::ScoreSet val_scores;
      val_scores.scores.resize(val_samples.size());
      val_scores.labels.resize(val_samples.size());
      val_scores.ids.resize(val_samples.size());
      #pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < static_cast<std::int64_t>(val_samples.size()); ++i) {
        val_scores.scores[i] = detector::forward(result.params, val_samples[i]);
        val_scores.labels[i] = val_samples[i].label;
        val_scores.ids[i] = val_images[i].id;
      }
      const auto ops = protocol::select_operating_points(
          val_scores, tag + "/clean_val");

      std::cerr << "[" << tag << "] scoring test set under "
                << grid.conditions.size() << " conditions\n";
      const auto scored = detector::score_dataset(result.params, test_images, grid);

      csv::Table score_csv = score_table();
      append_scores(score_csv, scored, tc.seed);
      csv::write_file((fs::path(out_dir) / ("scores_" + std::string(arch.id) +
                                            "_seed" + std::to_string(seed) + ".csv"))
                          .string(), score_csv);

      protocol::ConditionScoreMap cmap;
      for (const auto& [cond, set] : scored) cmap.push_back({cond, set});

      ModelRun run;
      run.model = arch.id;
      run.seed = seed;
      run.fixed = protocol::evaluate_fixed(cmap, ops, arch.id);
      run.retuned = protocol::evaluate_retuned(cmap, arch.id);
      run.inflation = protocol::inflation_report(run.fixed, run.retuned);
      run.has_fixed = run.has_retuned = true;
      runs.push_back(std::move(run));
    }
  }

  write_reports(out_dir, runs);

  // Spectrum table: the clean -> JPEG Q60 accuracy drop at the fixed
  // ROC-optimal point, averaged over seeds, per architecture.
  {
    csv::Table t;
    t.header = {"model", "clean_acc_mean", "jpeg_q60_acc_mean", "drop_pp"};
    for (const Arch& arch : archs) {
      std::vector<double> clean_vals, q60_vals;
      for (const auto& run : runs) {
        if (run.model != arch.id) continue;
        clean_vals.push_back(run.fixed.row("clean").cells[1].bundle.accuracy);
        q60_vals.push_back(run.fixed.row("jpeg_q60").cells[1].bundle.accuracy);
      }
      if (clean_vals.empty()) continue;
      const double clean_mean = mean_of(clean_vals);
      const double q60_mean = mean_of(q60_vals);
      t.rows.push_back({arch.id, csv::format_double(clean_mean),
                        csv::format_double(q60_mean),
                        csv::format_double((clean_mean - q60_mean) * 100.0)});
    }
    csv::write_file((fs::path(out_dir) / "spectrum.csv").string(), t);
  }

  // Run manifest: deterministic id, config snapshot, output inventory.
  {
    json manifest;
    const json cfg_json = spectrum_to_json(cfg);
    manifest["manifest_id"] =
        hex64(fnv1a(cfg_json.dump() + dataset_hash));
    manifest["tool_version"] = kToolVersion;
    std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    manifest["created_utc"] = stamp;
    manifest["config"] = cfg_json;
    manifest["dataset_hash"] = dataset_hash;
    json outputs = json::array();
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(out_dir))
      if (e.is_regular_file() && e.path().filename() != "manifest.json")
        files.push_back(e.path().filename().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      outputs.push_back({{"path", f},
                         {"fnv1a", hex64(fnv1a(csv::read_text_file(
                             (fs::path(out_dir) / f).string())))}});
    }
    manifest["outputs"] = outputs;
    csv::write_text_file((fs::path(out_dir) / "manifest.json").string(),
                         manifest.dump(2) + "\n");
  }
  std::cerr << "[done] reports written to " << out_dir << "\n";
}

}  // namespace fixthresh::pipeline
