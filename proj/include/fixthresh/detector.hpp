#ifndef FIXTHRESH_DETECTOR_HPP
#define FIXTHRESH_DETECTOR_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fixthresh/image.hpp"
#include "fixthresh/metrics.hpp"
#include "fixthresh/transforms.hpp"

namespace fixthresh::detector {

enum class BranchMode { cnn_only, vit_only, hybrid };
const char* branch_mode_str(BranchMode m);
BranchMode branch_mode_from_str(const std::string& s);

// Desk-scale gated dual-branch detector. The convolutional branch is a stack
// of conv3x3-ReLU-avgpool stages with global average pooling; the attention
// branch is a patch embedding with learned positions and pre-norm
// self-attention blocks, mean-pooled over tokens. Branch features are
// projected to a shared embed_dim space, combined by a softmax gate, and fed
// to a sigmoid head.
struct HybridConfig {
  int input_size = 64;
  int in_channels = 3;
  int embed_dim = 32;                     // shared projection space d
  std::vector<int> conv_channels = {6, 12, 24};
  int patch_size = 8;
  int vit_dim = 24;
  int attn_blocks = 1;
  int attn_heads = 2;
  int mlp_ratio = 2;
  int gate_hidden = 32;
  bool freq_enabled = false;
  double freq_cutoff = 0.06;
  BranchMode branch_mode = BranchMode::hybrid;

  int tokens_per_side() const { return input_size / patch_size; }
  int num_tokens() const { return tokens_per_side() * tokens_per_side(); }
  int patch_dim() const { return patch_size * patch_size * in_channels; }
  int mlp_hidden() const { return mlp_ratio * vit_dim; }
  int conv_out_dim() const { return conv_channels.back(); }
  bool has_cnn() const { return branch_mode != BranchMode::vit_only; }
  bool has_vit() const { return branch_mode != BranchMode::cnn_only; }
  void validate() const;

  // Reference dimensions of the full-scale architecture (224px inputs,
  // 2048-d CNN features, 768-d ViT features, 512-d shared space). Not meant
  // for CPU training; kept for documentation parity.
  static HybridConfig full_scale();
};

// One named parameter block inside the flat value vector.
struct ParamInfo {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  bool trunk = false;  // branch trunk (LIT freeze group) vs new layer
};

struct HybridParams {
  HybridConfig config;
  std::vector<ParamInfo> infos;
  std::vector<double> values;

  std::span<double> view(const std::string& name);
  std::span<const double> view(const std::string& name) const;
  const ParamInfo& info(const std::string& name) const;
};

// Zero-filled parameter container with the layout implied by the config.
HybridParams make_params(const HybridConfig& config);

// He-uniform weights, zero biases, zero gate output layer (neutral fusion),
// unit LayerNorm gains. Deterministic in seed.
HybridParams init_params(const HybridConfig& config, std::uint64_t seed);

// A preprocessed model input (CHW, standardized) with its label.
struct Sample {
  std::vector<float> input;
  int label = 0;
};

// Preprocessing for a unit-range image at native resolution: bicubic resize
// to input_size, optional FFT high-pass, ImageNet standardization, CHW.
Sample make_sample(const imaging::ImageTensor& unit_img, int label,
                   const HybridConfig& config);

std::vector<double> cnn_branch(const HybridParams& params,
                               std::span<const double> input_chw);
std::vector<double> vit_branch(const HybridParams& params,
                               std::span<const double> input_chw);

// z = P h (no bias). P is row-major rows x cols.
std::vector<double> project(std::span<const double> P, int rows, int cols,
                            std::span<const double> h);

struct GateOutput {
  double w_c = 0.5;
  double w_v = 0.5;
};

GateOutput gate(const HybridParams& params, std::span<const double> z_c,
                std::span<const double> z_v);

std::vector<double> fuse(std::span<const double> z_c,
                         std::span<const double> z_v, const GateOutput& w);

double forward(const HybridParams& params, const Sample& sample);
double forward_logit(const HybridParams& params, const Sample& sample);

// Mean binary cross-entropy from probabilities (clamped away from 0/1).
double loss(std::span<const double> scores, std::span<const int> labels);

// Mean BCE over the batch in stable logit form, plus exact gradients with
// respect to every parameter (accumulated into grad, resized to match).
double batch_loss_and_gradients(const HybridParams& params,
                                std::span<const Sample> batch,
                                std::vector<double>& grad);

struct TrainConfig {
  double lr_new = 2e-4;
  double lr_backbone = 2e-5;
  double weight_decay = 1e-4;
  int max_epochs = 50;
  int patience = 5;
  int batch_size = 64;
  int lit_freeze_epochs = 2;
  std::uint64_t seed = 1;
};

struct EpochStats {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_auroc = 0.0;
};

struct TrainResult {
  HybridParams params;  // best-validation checkpoint
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

// Early-stopping bookkeeping: stop after `patience` consecutive epochs
// without strict improvement; the best epoch's checkpoint is returned.
class EarlyStopper {
 public:
  explicit EarlyStopper(int patience) : patience_(patience) {}
  // Returns true when this epoch strictly improved the best metric.
  bool observe(double metric);
  bool should_stop() const { return since_best_ >= patience_; }
  int best_epoch() const { return best_epoch_; }
  double best_metric() const { return best_metric_; }

 private:
  int patience_;
  int epoch_ = 0;
  int best_epoch_ = 0;
  int since_best_ = 0;
  double best_metric_ = -1.0;
};

// AdamW with decoupled weight decay, two learning-rate groups (new layers vs
// branch trunks), trunk freeze for the first lit_freeze_epochs epochs, and
// early stopping on validation AUROC. Deterministic in seed.
TrainResult train(const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set,
                  const HybridConfig& config, const TrainConfig& tc);

// Images at native resolution (unit range) scored under each condition:
// condition -> resize -> optional high-pass -> standardize -> forward.
struct LabeledImage {
  imaging::ImageTensor image;  // unit range, native resolution
  int label = 0;
  std::string id;
};

std::vector<std::pair<std::string, metrics::ScoreSet>> score_dataset(
    const HybridParams& params, const std::vector<LabeledImage>& images,
    const transforms::ConditionGrid& grid);

// Versioned JSON checkpoint (config + flat weights).
void save_checkpoint(const std::string& path, const HybridParams& params,
                     std::uint64_t train_seed);
HybridParams load_checkpoint(const std::string& path,
                             std::uint64_t* train_seed = nullptr);

}  // namespace fixthresh::detector

#endif
