#include "fixthresh/detector.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "fixthresh/error.hpp"

namespace fixthresh::detector {

using imaging::ImageTensor;
using imaging::Range;

const char* branch_mode_str(BranchMode m) {
  switch (m) {
    case BranchMode::cnn_only: return "cnn_only";
    case BranchMode::vit_only: return "vit_only";
    case BranchMode::hybrid: return "hybrid";
  }
  return "unknown";
}

BranchMode branch_mode_from_str(const std::string& s) {
  if (s == "cnn_only") return BranchMode::cnn_only;
  if (s == "vit_only") return BranchMode::vit_only;
  if (s == "hybrid") return BranchMode::hybrid;
  raise(ErrorCode::invalid_argument, "unknown branch mode: " + s);
}

void HybridConfig::validate() const {
  require(input_size >= 2, ErrorCode::invalid_argument, "config: input_size too small");
  require(in_channels >= 1, ErrorCode::invalid_argument, "config: in_channels");
  require(embed_dim >= 2, ErrorCode::invalid_argument, "config: embed_dim must be >= 2");
  if (has_cnn()) {
    require(!conv_channels.empty(), ErrorCode::invalid_argument,
            "config: conv_channels empty");
    int s = input_size;
    for (std::size_t i = 0; i < conv_channels.size(); ++i) {
      require(conv_channels[i] >= 1, ErrorCode::invalid_argument,
              "config: conv channel count");
      require(s % 2 == 0, ErrorCode::invalid_argument,
              "config: input_size must halve through every conv stage");
      s /= 2;
    }
  }
  if (has_vit()) {
    require(patch_size >= 1 && input_size % patch_size == 0,
            ErrorCode::invalid_argument,
            "config: input_size must be divisible by patch_size");
    require(vit_dim >= 2 && attn_heads >= 1 && vit_dim % attn_heads == 0,
            ErrorCode::invalid_argument,
            "config: vit_dim must be divisible by attn_heads");
    require(attn_blocks >= 1 && mlp_ratio >= 1, ErrorCode::invalid_argument,
            "config: attention block shape");
  }
  require(gate_hidden >= 1, ErrorCode::invalid_argument, "config: gate_hidden");
  require(freq_cutoff > 0.0 && freq_cutoff < 0.5, ErrorCode::invalid_argument,
          "config: freq_cutoff outside (0,0.5)");
}

HybridConfig HybridConfig::full_scale() {
  HybridConfig c;
  c.input_size = 224;
  c.embed_dim = 512;
  c.conv_channels = {256, 1024, 2048};
  c.patch_size = 16;
  c.vit_dim = 768;
  c.attn_blocks = 2;
  c.attn_heads = 12;
  c.mlp_ratio = 4;
  c.gate_hidden = 512;
  return c;
}

namespace {

struct Registry {
  std::vector<ParamInfo> infos;
  std::size_t total = 0;
  void add(const std::string& name, std::size_t size, bool trunk) {
    infos.push_back({name, total, size, trunk});
    total += size;
  }
};

Registry build_registry(const HybridConfig& c) {
  Registry r;
  if (c.has_cnn()) {
    int in = c.in_channels;
    for (std::size_t i = 0; i < c.conv_channels.size(); ++i) {
      const int out = c.conv_channels[i];
      const std::string p = "conv" + std::to_string(i);
      r.add(p + ".w", static_cast<std::size_t>(out) * in * 9, true);
      r.add(p + ".b", out, true);
      in = out;
    }
  }
  if (c.has_vit()) {
    r.add("embed.w", static_cast<std::size_t>(c.vit_dim) * c.patch_dim(), true);
    r.add("embed.b", c.vit_dim, true);
    r.add("pos", static_cast<std::size_t>(c.num_tokens()) * c.vit_dim, true);
    for (int b = 0; b < c.attn_blocks; ++b) {
      const std::string p = "blk" + std::to_string(b);
      r.add(p + ".ln1.g", c.vit_dim, true);
      r.add(p + ".ln1.b", c.vit_dim, true);
      r.add(p + ".qkv.w", static_cast<std::size_t>(3 * c.vit_dim) * c.vit_dim, true);
      r.add(p + ".qkv.b", 3 * c.vit_dim, true);
      r.add(p + ".attn.w", static_cast<std::size_t>(c.vit_dim) * c.vit_dim, true);
      r.add(p + ".attn.b", c.vit_dim, true);
      r.add(p + ".ln2.g", c.vit_dim, true);
      r.add(p + ".ln2.b", c.vit_dim, true);
      r.add(p + ".mlp1.w", static_cast<std::size_t>(c.mlp_hidden()) * c.vit_dim, true);
      r.add(p + ".mlp1.b", c.mlp_hidden(), true);
      r.add(p + ".mlp2.w", static_cast<std::size_t>(c.vit_dim) * c.mlp_hidden(), true);
      r.add(p + ".mlp2.b", c.vit_dim, true);
    }
  }
  if (c.has_cnn())
    r.add("proj_c.w", static_cast<std::size_t>(c.embed_dim) * c.conv_out_dim(), false);
  if (c.has_vit())
    r.add("proj_v.w", static_cast<std::size_t>(c.embed_dim) * c.vit_dim, false);
  if (c.branch_mode == BranchMode::hybrid) {
    r.add("gate1.w", static_cast<std::size_t>(c.gate_hidden) * 2 * c.embed_dim, false);
    r.add("gate1.b", c.gate_hidden, false);
    r.add("gate2.w", static_cast<std::size_t>(2) * c.gate_hidden, false);
    r.add("gate2.b", 2, false);
  }
  r.add("head.w", c.embed_dim, false);
  r.add("head.b", 1, false);
  return r;
}

struct SplitMix64 {
  std::uint64_t state;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}
  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  // [0,1)
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  // [-limit, limit)
  double uniform_signed(double limit) { return (2.0 * uniform() - 1.0) * limit; }
  std::uint64_t below(std::uint64_t n) { return next() % n; }
};

int fan_in_for(const HybridConfig& c, const std::string& name) {
  if (name.rfind("conv", 0) == 0) {
    const int stage = std::atoi(name.c_str() + 4);
    return (stage == 0 ? c.in_channels : c.conv_channels[stage - 1]) * 9;
  }
  if (name == "embed.w") return c.patch_dim();
  if (name.find(".qkv.w") != std::string::npos) return c.vit_dim;
  if (name.find(".attn.w") != std::string::npos) return c.vit_dim;
  if (name.find(".mlp1.w") != std::string::npos) return c.vit_dim;
  if (name.find(".mlp2.w") != std::string::npos) return c.mlp_hidden();
  if (name == "proj_c.w") return c.conv_out_dim();
  if (name == "proj_v.w") return c.vit_dim;
  if (name == "gate1.w") return 2 * c.embed_dim;
  if (name == "head.w") return c.embed_dim;
  return 0;
}

constexpr double kLnEps = 1e-5;

inline double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2));
}

inline double gelu_deriv(double x) {
  return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) +
         x * std::exp(-0.5 * x * x) * 0.3989422804014326779;
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// y = W x + b, W row-major [out][in]
void linear(std::span<const double> W, const double* b, int out_dim, int in_dim,
            const double* x, double* y) {
  for (int o = 0; o < out_dim; ++o) {
    double acc = b ? b[o] : 0.0;
    const double* row = W.data() + static_cast<std::size_t>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) acc += row[i] * x[i];
    y[o] = acc;
  }
}

// Accumulates dW += dy (x)T, db += dy, dx += W^T dy.
void linear_backward(std::span<const double> W, int out_dim, int in_dim,
                     const double* x, const double* dy, double* dW, double* db,
                     double* dx) {
  for (int o = 0; o < out_dim; ++o) {
    const double g = dy[o];
    if (db) db[o] += g;
    double* dWrow = dW + static_cast<std::size_t>(o) * in_dim;
    const double* Wrow = W.data() + static_cast<std::size_t>(o) * in_dim;
    for (int i = 0; i < in_dim; ++i) {
      dWrow[i] += g * x[i];
      if (dx) dx[i] += Wrow[i] * g;
    }
  }
}

void conv3x3_same(const double* in, int C_in, int H, int W,
                  std::span<const double> weight, const double* bias, int C_out,
                  double* out) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int oc = 0; oc < C_out; ++oc) {
    double* out_plane = out + oc * plane;
    for (std::size_t i = 0; i < plane; ++i) out_plane[i] = bias[oc];
    for (int ic = 0; ic < C_in; ++ic) {
      const double* in_plane = in + ic * plane;
      const double* w = weight.data() + (static_cast<std::size_t>(oc) * C_in + ic) * 9;
      for (int ky = -1; ky <= 1; ++ky) {
        for (int kx = -1; kx <= 1; ++kx) {
          const double wv = w[(ky + 1) * 3 + (kx + 1)];
          const int y0 = std::max(0, -ky), y1 = std::min(H, H - ky);
          const int x0 = std::max(0, -kx), x1 = std::min(W, W - kx);
          for (int y = y0; y < y1; ++y) {
            double* orow = out_plane + static_cast<std::size_t>(y) * W;
            const double* irow = in_plane + static_cast<std::size_t>(y + ky) * W + kx;
            for (int x = x0; x < x1; ++x) orow[x] += wv * irow[x];
          }
        }
      }
    }
  }
}

// dOut -> (dW, dB, dIn); dIn may be null for the first stage.
void conv3x3_same_backward(const double* in, int C_in, int H, int W,
                           std::span<const double> weight, int C_out,
                           const double* dout, double* dW, double* dB,
                           double* din) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  for (int oc = 0; oc < C_out; ++oc) {
    const double* dout_plane = dout + oc * plane;
    double acc_b = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc_b += dout_plane[i];
    dB[oc] += acc_b;
    for (int ic = 0; ic < C_in; ++ic) {
      const double* in_plane = in + ic * plane;
      double* din_plane = din ? din + ic * plane : nullptr;
      const double* w = weight.data() + (static_cast<std::size_t>(oc) * C_in + ic) * 9;
      double* dw = dW + (static_cast<std::size_t>(oc) * C_in + ic) * 9;
      for (int ky = -1; ky <= 1; ++ky) {
        for (int kx = -1; kx <= 1; ++kx) {
          const double wv = w[(ky + 1) * 3 + (kx + 1)];
          double acc_w = 0.0;
          const int y0 = std::max(0, -ky), y1 = std::min(H, H - ky);
          const int x0 = std::max(0, -kx), x1 = std::min(W, W - kx);
          for (int y = y0; y < y1; ++y) {
            const double* grow = dout_plane + static_cast<std::size_t>(y) * W;
            const double* irow = in_plane + static_cast<std::size_t>(y + ky) * W + kx;
            double* drow = din_plane
                ? din_plane + static_cast<std::size_t>(y + ky) * W + kx : nullptr;
            for (int x = x0; x < x1; ++x) {
              acc_w += grow[x] * irow[x];
              if (drow) drow[x] += wv * grow[x];
            }
          }
          dw[(ky + 1) * 3 + (kx + 1)] += acc_w;
        }
      }
    }
  }
}

void avgpool2(const double* in, int C, int H, int W, double* out) {
  const int Ho = H / 2, Wo = W / 2;
  for (int c = 0; c < C; ++c) {
    const double* ip = in + static_cast<std::size_t>(c) * H * W;
    double* op = out + static_cast<std::size_t>(c) * Ho * Wo;
    for (int y = 0; y < Ho; ++y) {
      for (int x = 0; x < Wo; ++x) {
        const double* r0 = ip + static_cast<std::size_t>(2 * y) * W + 2 * x;
        const double* r1 = r0 + W;
        op[static_cast<std::size_t>(y) * Wo + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
    }
  }
}

void avgpool2_backward(const double* dout, int C, int H, int W, double* din) {
  const int Ho = H / 2, Wo = W / 2;
  for (int c = 0; c < C; ++c) {
    const double* gp = dout + static_cast<std::size_t>(c) * Ho * Wo;
    double* dp = din + static_cast<std::size_t>(c) * H * W;
    for (int y = 0; y < Ho; ++y) {
      for (int x = 0; x < Wo; ++x) {
        const double g = 0.25 * gp[static_cast<std::size_t>(y) * Wo + x];
        double* r0 = dp + static_cast<std::size_t>(2 * y) * W + 2 * x;
        double* r1 = r0 + W;
        r0[0] += g; r0[1] += g; r1[0] += g; r1[1] += g;
      }
    }
  }
}

// Per-token LayerNorm with biased variance.
void layer_norm(const double* x, int T, int D, const double* gamma,
                const double* beta, double* xhat, double* invstd, double* y) {
  for (int t = 0; t < T; ++t) {
    const double* xt = x + static_cast<std::size_t>(t) * D;
    double* xh = xhat + static_cast<std::size_t>(t) * D;
    double* yt = y + static_cast<std::size_t>(t) * D;
    double mean = 0.0;
    for (int i = 0; i < D; ++i) mean += xt[i];
    mean /= D;
    double var = 0.0;
    for (int i = 0; i < D; ++i) var += (xt[i] - mean) * (xt[i] - mean);
    var /= D;
    const double is = 1.0 / std::sqrt(var + kLnEps);
    invstd[t] = is;
    for (int i = 0; i < D; ++i) {
      xh[i] = (xt[i] - mean) * is;
      yt[i] = gamma[i] * xh[i] + beta[i];
    }
  }
}

void layer_norm_backward(const double* dy, int T, int D, const double* gamma,
                         const double* xhat, const double* invstd,
                         double* dgamma, double* dbeta, double* dx) {
  for (int t = 0; t < T; ++t) {
    const double* dyt = dy + static_cast<std::size_t>(t) * D;
    const double* xh = xhat + static_cast<std::size_t>(t) * D;
    double* dxt = dx + static_cast<std::size_t>(t) * D;
    double m1 = 0.0, m2 = 0.0;
    for (int i = 0; i < D; ++i) {
      const double g = dyt[i] * gamma[i];
      m1 += g;
      m2 += g * xh[i];
      dgamma[i] += dyt[i] * xh[i];
      dbeta[i] += dyt[i];
    }
    m1 /= D;
    m2 /= D;
    for (int i = 0; i < D; ++i) {
      const double g = dyt[i] * gamma[i];
      dxt[i] += invstd[t] * (g - m1 - xh[i] * m2);
    }
  }
}

struct BlockTrace {
  std::vector<double> x_in;        // [T,D]
  std::vector<double> ln1_xhat, ln1_invstd, ln1_out;
  std::vector<double> qkv;         // [T,3D]
  std::vector<double> attn;        // [heads,T,T] softmax weights
  std::vector<double> concat;      // [T,D] attention output before projection
  std::vector<double> attn_out;    // [T,D]
  std::vector<double> x_mid;       // [T,D]
  std::vector<double> ln2_xhat, ln2_invstd, ln2_out;
  std::vector<double> mlp_pre;     // [T,H] pre-GELU
  std::vector<double> mlp_act;     // [T,H]
  std::vector<double> x_out;       // [T,D]
};

struct Trace {
  std::vector<double> x0;                       // [C,S,S]
  std::vector<std::vector<double>> relu_out;    // per stage [C,H,W]
  std::vector<std::vector<double>> pool_out;    // per stage [C,H/2,W/2]
  std::vector<double> h_c, z_c;
  std::vector<double> patches;                  // [T,patch_dim]
  std::vector<double> tokens0;                  // [T,D] embed + pos
  std::vector<BlockTrace> blocks;
  std::vector<double> h_v, z_v;
  std::vector<double> cat, gate_hidden, gate_logits;
  GateOutput w;
  std::vector<double> fused;
  double logit = 0.0;
};

void run_cnn(const HybridParams& p, const double* x, Trace& tr) {
  const auto& c = p.config;
  tr.relu_out.resize(c.conv_channels.size());
  tr.pool_out.resize(c.conv_channels.size());
  int C_in = c.in_channels;
  int S = c.input_size;
  const double* in = x;
  for (std::size_t i = 0; i < c.conv_channels.size(); ++i) {
    const int C_out = c.conv_channels[i];
    auto w = p.view("conv" + std::to_string(i) + ".w");
    auto b = p.view("conv" + std::to_string(i) + ".b");
    tr.relu_out[i].assign(static_cast<std::size_t>(C_out) * S * S, 0.0);
    conv3x3_same(in, C_in, S, S, w, b.data(), C_out, tr.relu_out[i].data());
    for (double& v : tr.relu_out[i]) v = v > 0.0 ? v : 0.0;
    tr.pool_out[i].assign(static_cast<std::size_t>(C_out) * (S / 2) * (S / 2), 0.0);
    avgpool2(tr.relu_out[i].data(), C_out, S, S, tr.pool_out[i].data());
    in = tr.pool_out[i].data();
    C_in = C_out;
    S /= 2;
  }
  // Global average pool.
  tr.h_c.assign(C_in, 0.0);
  const std::size_t plane = static_cast<std::size_t>(S) * S;
  for (int ch = 0; ch < C_in; ++ch) {
    double acc = 0.0;
    const double* pl = tr.pool_out.back().data() + ch * plane;
    for (std::size_t i = 0; i < plane; ++i) acc += pl[i];
    tr.h_c[ch] = acc / static_cast<double>(plane);
  }
}

void run_vit(const HybridParams& p, const double* x, Trace& tr) {
  const auto& c = p.config;
  const int T = c.num_tokens(), D = c.vit_dim, P = c.patch_size;
  const int side = c.tokens_per_side(), pd = c.patch_dim();
  const int S = c.input_size;

  tr.patches.assign(static_cast<std::size_t>(T) * pd, 0.0);
  for (int ty = 0; ty < side; ++ty) {
    for (int tx = 0; tx < side; ++tx) {
      double* patch = tr.patches.data() + (static_cast<std::size_t>(ty) * side + tx) * pd;
      int k = 0;
      for (int ch = 0; ch < c.in_channels; ++ch)
        for (int py = 0; py < P; ++py)
          for (int px = 0; px < P; ++px)
            patch[k++] = x[(static_cast<std::size_t>(ch) * S + ty * P + py) * S + tx * P + px];
    }
  }

  auto ew = p.view("embed.w");
  auto eb = p.view("embed.b");
  auto pos = p.view("pos");
  tr.tokens0.assign(static_cast<std::size_t>(T) * D, 0.0);
  for (int t = 0; t < T; ++t) {
    linear(ew, eb.data(), D, pd, tr.patches.data() + static_cast<std::size_t>(t) * pd,
           tr.tokens0.data() + static_cast<std::size_t>(t) * D);
    for (int i = 0; i < D; ++i)
      tr.tokens0[static_cast<std::size_t>(t) * D + i] += pos[static_cast<std::size_t>(t) * D + i];
  }

  const int H = c.attn_heads, hd = D / H;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  tr.blocks.resize(c.attn_blocks);
  const std::vector<double>* cur = &tr.tokens0;
  for (int b = 0; b < c.attn_blocks; ++b) {
    BlockTrace& bt = tr.blocks[b];
    const std::string pre = "blk" + std::to_string(b);
    bt.x_in = *cur;
    bt.ln1_xhat.assign(static_cast<std::size_t>(T) * D, 0.0);
    bt.ln1_invstd.assign(T, 0.0);
    bt.ln1_out.assign(static_cast<std::size_t>(T) * D, 0.0);
    layer_norm(bt.x_in.data(), T, D, p.view(pre + ".ln1.g").data(),
               p.view(pre + ".ln1.b").data(), bt.ln1_xhat.data(),
               bt.ln1_invstd.data(), bt.ln1_out.data());

    bt.qkv.assign(static_cast<std::size_t>(T) * 3 * D, 0.0);
    auto qkvw = p.view(pre + ".qkv.w");
    auto qkvb = p.view(pre + ".qkv.b");
    for (int t = 0; t < T; ++t)
      linear(qkvw, qkvb.data(), 3 * D, D, bt.ln1_out.data() + static_cast<std::size_t>(t) * D,
             bt.qkv.data() + static_cast<std::size_t>(t) * 3 * D);

    bt.attn.assign(static_cast<std::size_t>(H) * T * T, 0.0);
    bt.concat.assign(static_cast<std::size_t>(T) * D, 0.0);
    for (int h = 0; h < H; ++h) {
      for (int ti = 0; ti < T; ++ti) {
        const double* q = bt.qkv.data() + static_cast<std::size_t>(ti) * 3 * D + h * hd;
        double* arow = bt.attn.data() + (static_cast<std::size_t>(h) * T + ti) * T;
        double mx = -1e300;
        for (int tj = 0; tj < T; ++tj) {
          const double* k = bt.qkv.data() + static_cast<std::size_t>(tj) * 3 * D + D + h * hd;
          double s = 0.0;
          for (int e = 0; e < hd; ++e) s += q[e] * k[e];
          arow[tj] = s * scale;
          mx = std::max(mx, arow[tj]);
        }
        double denom = 0.0;
        for (int tj = 0; tj < T; ++tj) {
          arow[tj] = std::exp(arow[tj] - mx);
          denom += arow[tj];
        }
        for (int tj = 0; tj < T; ++tj) arow[tj] /= denom;
        double* out = bt.concat.data() + static_cast<std::size_t>(ti) * D + h * hd;
        for (int tj = 0; tj < T; ++tj) {
          const double* v = bt.qkv.data() + static_cast<std::size_t>(tj) * 3 * D + 2 * D + h * hd;
          const double a = arow[tj];
          for (int e = 0; e < hd; ++e) out[e] += a * v[e];
        }
      }
    }

    bt.attn_out.assign(static_cast<std::size_t>(T) * D, 0.0);
    auto aw = p.view(pre + ".attn.w");
    auto ab = p.view(pre + ".attn.b");
    bt.x_mid.assign(static_cast<std::size_t>(T) * D, 0.0);
    for (int t = 0; t < T; ++t) {
      linear(aw, ab.data(), D, D, bt.concat.data() + static_cast<std::size_t>(t) * D,
             bt.attn_out.data() + static_cast<std::size_t>(t) * D);
      for (int i = 0; i < D; ++i) {
        const std::size_t idx = static_cast<std::size_t>(t) * D + i;
        bt.x_mid[idx] = bt.x_in[idx] + bt.attn_out[idx];
      }
    }

    bt.ln2_xhat.assign(static_cast<std::size_t>(T) * D, 0.0);
    bt.ln2_invstd.assign(T, 0.0);
    bt.ln2_out.assign(static_cast<std::size_t>(T) * D, 0.0);
    layer_norm(bt.x_mid.data(), T, D, p.view(pre + ".ln2.g").data(),
               p.view(pre + ".ln2.b").data(), bt.ln2_xhat.data(),
               bt.ln2_invstd.data(), bt.ln2_out.data());

    const int MH = c.mlp_hidden();
    bt.mlp_pre.assign(static_cast<std::size_t>(T) * MH, 0.0);
    bt.mlp_act.assign(static_cast<std::size_t>(T) * MH, 0.0);
    bt.x_out.assign(static_cast<std::size_t>(T) * D, 0.0);
    auto m1w = p.view(pre + ".mlp1.w");
    auto m1b = p.view(pre + ".mlp1.b");
    auto m2w = p.view(pre + ".mlp2.w");
    auto m2b = p.view(pre + ".mlp2.b");
    for (int t = 0; t < T; ++t) {
      double* pre_t = bt.mlp_pre.data() + static_cast<std::size_t>(t) * MH;
      double* act_t = bt.mlp_act.data() + static_cast<std::size_t>(t) * MH;
      linear(m1w, m1b.data(), MH, D, bt.ln2_out.data() + static_cast<std::size_t>(t) * D, pre_t);
      for (int i = 0; i < MH; ++i) act_t[i] = gelu(pre_t[i]);
      double* out_t = bt.x_out.data() + static_cast<std::size_t>(t) * D;
      linear(m2w, m2b.data(), D, MH, act_t, out_t);
      for (int i = 0; i < D; ++i) out_t[i] += bt.x_mid[static_cast<std::size_t>(t) * D + i];
    }
    cur = &bt.x_out;
  }

  tr.h_v.assign(D, 0.0);
  for (int t = 0; t < T; ++t)
    for (int i = 0; i < D; ++i) tr.h_v[i] += (*cur)[static_cast<std::size_t>(t) * D + i];
  for (int i = 0; i < D; ++i) tr.h_v[i] /= static_cast<double>(T);
}

double run_forward(const HybridParams& p, const Sample& sample, Trace& tr) {
  const auto& c = p.config;
  require(sample.input.size() ==
              static_cast<std::size_t>(c.in_channels) * c.input_size * c.input_size,
          ErrorCode::model, "forward: sample size does not match config");
  tr.x0.assign(sample.input.begin(), sample.input.end());
  const int d = c.embed_dim;

  if (c.has_cnn()) {
    run_cnn(p, tr.x0.data(), tr);
    tr.z_c = project(p.view("proj_c.w"), d, c.conv_out_dim(), tr.h_c);
  }
  if (c.has_vit()) {
    run_vit(p, tr.x0.data(), tr);
    tr.z_v = project(p.view("proj_v.w"), d, c.vit_dim, tr.h_v);
  }

  if (c.branch_mode == BranchMode::hybrid) {
    tr.cat.assign(2 * d, 0.0);
    std::copy(tr.z_c.begin(), tr.z_c.end(), tr.cat.begin());
    std::copy(tr.z_v.begin(), tr.z_v.end(), tr.cat.begin() + d);
    tr.gate_hidden.assign(c.gate_hidden, 0.0);
    linear(p.view("gate1.w"), p.view("gate1.b").data(), c.gate_hidden, 2 * d,
           tr.cat.data(), tr.gate_hidden.data());
    for (double& v : tr.gate_hidden) v = v > 0.0 ? v : 0.0;
    tr.gate_logits.assign(2, 0.0);
    linear(p.view("gate2.w"), p.view("gate2.b").data(), 2, c.gate_hidden,
           tr.gate_hidden.data(), tr.gate_logits.data());
    const double mx = std::max(tr.gate_logits[0], tr.gate_logits[1]);
    const double e0 = std::exp(tr.gate_logits[0] - mx);
    const double e1 = std::exp(tr.gate_logits[1] - mx);
    tr.w.w_c = e0 / (e0 + e1);
    tr.w.w_v = e1 / (e0 + e1);
    tr.fused.assign(d, 0.0);
    for (int i = 0; i < d; ++i)
      tr.fused[i] = tr.w.w_c * tr.z_c[i] + tr.w.w_v * tr.z_v[i];
  } else if (c.branch_mode == BranchMode::cnn_only) {
    tr.w = {1.0, 0.0};
    tr.fused = tr.z_c;
  } else {
    tr.w = {0.0, 1.0};
    tr.fused = tr.z_v;
  }

  auto hw = p.view("head.w");
  auto hb = p.view("head.b");
  double logit = hb[0];
  for (int i = 0; i < d; ++i) logit += hw[i] * tr.fused[i];
  tr.logit = logit;
  return logit;
}

// Accumulates parameter gradients for one sample given dLoss/dlogit.
void run_backward(const HybridParams& p, const Trace& tr, double dlogit,
                  std::vector<double>& grad) {
  const auto& c = p.config;
  const int d = c.embed_dim;
  auto g = [&](const std::string& name) {
    return grad.data() + p.info(name).offset;
  };

  // Head.
  std::vector<double> dfused(d, 0.0);
  {
    auto hw = p.view("head.w");
    double* dhw = g("head.w");
    for (int i = 0; i < d; ++i) {
      dhw[i] += dlogit * tr.fused[i];
      dfused[i] = dlogit * hw[i];
    }
    g("head.b")[0] += dlogit;
  }

  std::vector<double> dz_c, dz_v;
  if (c.branch_mode == BranchMode::hybrid) {
    dz_c.assign(d, 0.0);
    dz_v.assign(d, 0.0);
    double dw_c = 0.0, dw_v = 0.0;
    for (int i = 0; i < d; ++i) {
      dz_c[i] = tr.w.w_c * dfused[i];
      dz_v[i] = tr.w.w_v * dfused[i];
      dw_c += tr.z_c[i] * dfused[i];
      dw_v += tr.z_v[i] * dfused[i];
    }
    // Softmax backward on the two gate weights.
    const double inner = tr.w.w_c * dw_c + tr.w.w_v * dw_v;
    double dlogits[2] = {tr.w.w_c * (dw_c - inner), tr.w.w_v * (dw_v - inner)};

    std::vector<double> dhidden(c.gate_hidden, 0.0);
    linear_backward(p.view("gate2.w"), 2, c.gate_hidden, tr.gate_hidden.data(),
                    dlogits, g("gate2.w"), g("gate2.b"), dhidden.data());
    for (int i = 0; i < c.gate_hidden; ++i)
      if (tr.gate_hidden[i] <= 0.0) dhidden[i] = 0.0;
    std::vector<double> dcat(2 * d, 0.0);
    linear_backward(p.view("gate1.w"), c.gate_hidden, 2 * d, tr.cat.data(),
                    dhidden.data(), g("gate1.w"), g("gate1.b"), dcat.data());
    for (int i = 0; i < d; ++i) {
      dz_c[i] += dcat[i];
      dz_v[i] += dcat[d + i];
    }
  } else if (c.branch_mode == BranchMode::cnn_only) {
    dz_c = dfused;
  } else {
    dz_v = dfused;
  }

  // CNN branch.
  if (c.has_cnn()) {
    const int hc_dim = c.conv_out_dim();
    std::vector<double> dh_c(hc_dim, 0.0);
    linear_backward(p.view("proj_c.w"), d, hc_dim, tr.h_c.data(), dz_c.data(),
                    g("proj_c.w"), nullptr, dh_c.data());

    const int stages = static_cast<int>(c.conv_channels.size());
    int S_last = c.input_size >> stages;
    const std::size_t plane_last = static_cast<std::size_t>(S_last) * S_last;
    std::vector<double> dpool(static_cast<std::size_t>(hc_dim) * plane_last, 0.0);
    for (int ch = 0; ch < hc_dim; ++ch) {
      const double gch = dh_c[ch] / static_cast<double>(plane_last);
      for (std::size_t i = 0; i < plane_last; ++i) dpool[ch * plane_last + i] = gch;
    }

    for (int i = stages - 1; i >= 0; --i) {
      const int C_out = c.conv_channels[i];
      const int C_in = i == 0 ? c.in_channels : c.conv_channels[i - 1];
      const int S = c.input_size >> i;  // spatial size entering stage i
      std::vector<double> drelu(static_cast<std::size_t>(C_out) * S * S, 0.0);
      avgpool2_backward(dpool.data(), C_out, S, S, drelu.data());
      const auto& relu = tr.relu_out[i];
      for (std::size_t k = 0; k < drelu.size(); ++k)
        if (relu[k] <= 0.0) drelu[k] = 0.0;
      const double* in = i == 0 ? tr.x0.data() : tr.pool_out[i - 1].data();
      const std::string pre = "conv" + std::to_string(i);
      if (i == 0) {
        conv3x3_same_backward(in, C_in, S, S, p.view(pre + ".w"), C_out,
                              drelu.data(), g(pre + ".w"), g(pre + ".b"), nullptr);
      } else {
        std::vector<double> din(static_cast<std::size_t>(C_in) * S * S, 0.0);
        conv3x3_same_backward(in, C_in, S, S, p.view(pre + ".w"), C_out,
                              drelu.data(), g(pre + ".w"), g(pre + ".b"), din.data());
        dpool = std::move(din);
      }
    }
  }

  // ViT branch.
  if (c.has_vit()) {
    const int D = c.vit_dim, T = c.num_tokens();
    std::vector<double> dh_v(D, 0.0);
    linear_backward(p.view("proj_v.w"), d, D, tr.h_v.data(), dz_v.data(),
                    g("proj_v.w"), nullptr, dh_v.data());

    std::vector<double> dtok(static_cast<std::size_t>(T) * D, 0.0);
    for (int t = 0; t < T; ++t)
      for (int i = 0; i < D; ++i)
        dtok[static_cast<std::size_t>(t) * D + i] = dh_v[i] / static_cast<double>(T);

    const int H = c.attn_heads, hd = D / H, MH = c.mlp_hidden();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
    for (int b = c.attn_blocks - 1; b >= 0; --b) {
      const BlockTrace& bt = tr.blocks[b];
      const std::string pre = "blk" + std::to_string(b);

      // x_out = x_mid + mlp2(gelu(mlp1(ln2(x_mid))))
      std::vector<double> dx_mid = dtok;  // residual path
      std::vector<double> dact(static_cast<std::size_t>(T) * MH, 0.0);
      for (int t = 0; t < T; ++t)
        linear_backward(p.view(pre + ".mlp2.w"), D, MH,
                        bt.mlp_act.data() + static_cast<std::size_t>(t) * MH,
                        dtok.data() + static_cast<std::size_t>(t) * D,
                        g(pre + ".mlp2.w"), g(pre + ".mlp2.b"),
                        dact.data() + static_cast<std::size_t>(t) * MH);
      for (std::size_t k = 0; k < dact.size(); ++k)
        dact[k] *= gelu_deriv(bt.mlp_pre[k]);
      std::vector<double> dln2(static_cast<std::size_t>(T) * D, 0.0);
      for (int t = 0; t < T; ++t)
        linear_backward(p.view(pre + ".mlp1.w"), MH, D,
                        bt.ln2_out.data() + static_cast<std::size_t>(t) * D,
                        dact.data() + static_cast<std::size_t>(t) * MH,
                        g(pre + ".mlp1.w"), g(pre + ".mlp1.b"),
                        dln2.data() + static_cast<std::size_t>(t) * D);
      layer_norm_backward(dln2.data(), T, D, p.view(pre + ".ln2.g").data(),
                          bt.ln2_xhat.data(), bt.ln2_invstd.data(),
                          g(pre + ".ln2.g"), g(pre + ".ln2.b"), dx_mid.data());

      // x_mid = x_in + attn_proj(concat)
      std::vector<double> dx_in = dx_mid;  // residual path
      std::vector<double> dconcat(static_cast<std::size_t>(T) * D, 0.0);
      for (int t = 0; t < T; ++t)
        linear_backward(p.view(pre + ".attn.w"), D, D,
                        bt.concat.data() + static_cast<std::size_t>(t) * D,
                        dx_mid.data() + static_cast<std::size_t>(t) * D,
                        g(pre + ".attn.w"), g(pre + ".attn.b"),
                        dconcat.data() + static_cast<std::size_t>(t) * D);

      std::vector<double> dqkv(static_cast<std::size_t>(T) * 3 * D, 0.0);
      std::vector<double> da(T), ds(T);
      for (int h = 0; h < H; ++h) {
        for (int ti = 0; ti < T; ++ti) {
          const double* arow = bt.attn.data() + (static_cast<std::size_t>(h) * T + ti) * T;
          const double* dout = dconcat.data() + static_cast<std::size_t>(ti) * D + h * hd;
          // dv and da.
          double inner = 0.0;
          for (int tj = 0; tj < T; ++tj) {
            const double* v = bt.qkv.data() + static_cast<std::size_t>(tj) * 3 * D + 2 * D + h * hd;
            double acc = 0.0;
            for (int e = 0; e < hd; ++e) acc += dout[e] * v[e];
            da[tj] = acc;
            inner += arow[tj] * acc;
            double* dv = dqkv.data() + static_cast<std::size_t>(tj) * 3 * D + 2 * D + h * hd;
            for (int e = 0; e < hd; ++e) dv[e] += arow[tj] * dout[e];
          }
          // Softmax backward, then q/k.
          const double* q = bt.qkv.data() + static_cast<std::size_t>(ti) * 3 * D + h * hd;
          double* dq = dqkv.data() + static_cast<std::size_t>(ti) * 3 * D + h * hd;
          for (int tj = 0; tj < T; ++tj) {
            ds[tj] = arow[tj] * (da[tj] - inner) * scale;
            const double* k = bt.qkv.data() + static_cast<std::size_t>(tj) * 3 * D + D + h * hd;
            double* dk = dqkv.data() + static_cast<std::size_t>(tj) * 3 * D + D + h * hd;
            for (int e = 0; e < hd; ++e) {
              dq[e] += ds[tj] * k[e];
              dk[e] += ds[tj] * q[e];
            }
          }
        }
      }

      std::vector<double> dln1(static_cast<std::size_t>(T) * D, 0.0);
      for (int t = 0; t < T; ++t)
        linear_backward(p.view(pre + ".qkv.w"), 3 * D, D,
                        bt.ln1_out.data() + static_cast<std::size_t>(t) * D,
                        dqkv.data() + static_cast<std::size_t>(t) * 3 * D,
                        g(pre + ".qkv.w"), g(pre + ".qkv.b"),
                        dln1.data() + static_cast<std::size_t>(t) * D);
      layer_norm_backward(dln1.data(), T, D, p.view(pre + ".ln1.g").data(),
                          bt.ln1_xhat.data(), bt.ln1_invstd.data(),
                          g(pre + ".ln1.g"), g(pre + ".ln1.b"), dx_in.data());
      dtok = std::move(dx_in);
    }

    // Embedding and positions.
    const int pd = c.patch_dim();
    double* dpos = g("pos");
    for (int t = 0; t < T; ++t) {
      linear_backward(p.view("embed.w"), D, pd,
                      tr.patches.data() + static_cast<std::size_t>(t) * pd,
                      dtok.data() + static_cast<std::size_t>(t) * D,
                      g("embed.w"), g("embed.b"), nullptr);
      for (int i = 0; i < D; ++i)
        dpos[static_cast<std::size_t>(t) * D + i] += dtok[static_cast<std::size_t>(t) * D + i];
    }
  }
}

}  // namespace

std::span<double> HybridParams::view(const std::string& name) {
  const ParamInfo& pi = info(name);
  return {values.data() + pi.offset, pi.size};
}

std::span<const double> HybridParams::view(const std::string& name) const {
  const ParamInfo& pi = info(name);
  return {values.data() + pi.offset, pi.size};
}

const ParamInfo& HybridParams::info(const std::string& name) const {
  for (const auto& pi : infos)
    if (pi.name == name) return pi;
  raise(ErrorCode::model, "unknown parameter block: " + name);
}

HybridParams make_params(const HybridConfig& config) {
  config.validate();
  HybridParams p;
  p.config = config;
  Registry r = build_registry(config);
  p.infos = std::move(r.infos);
  p.values.assign(r.total, 0.0);
  return p;
}

HybridParams init_params(const HybridConfig& config, std::uint64_t seed) {
  HybridParams p = make_params(config);
  SplitMix64 rng(seed ^ 0xA2B4C6D8E0F10325ULL);
  for (const auto& pi : p.infos) {
    double* v = p.values.data() + pi.offset;
    const bool is_weight = pi.name.size() >= 2 &&
                           pi.name.compare(pi.name.size() - 2, 2, ".w") == 0;
    if (pi.name.find(".ln") != std::string::npos) {
      const bool gain = pi.name.back() == 'g';
      for (std::size_t i = 0; i < pi.size; ++i) v[i] = gain ? 1.0 : 0.0;
    } else if (pi.name == "gate2.w" || pi.name == "gate2.b") {
      // zeros: neutral gate start, w = [0.5, 0.5]
    } else if (pi.name == "pos") {
      // Small random positions so token location is usable from step one.
      for (std::size_t i = 0; i < pi.size; ++i) v[i] = rng.uniform_signed(0.1);
    } else if (is_weight) {
      const int fan_in = fan_in_for(config, pi.name);
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
      for (std::size_t i = 0; i < pi.size; ++i) v[i] = rng.uniform_signed(limit);
    }
    // biases stay zero
  }
  return p;
}

Sample make_sample(const ImageTensor& unit_img, int label,
                   const HybridConfig& config) {
  require(unit_img.range_tag == Range::unit, ErrorCode::invalid_argument,
          "make_sample: image must be unit-range");
  ImageTensor img = unit_img;
  if (img.height != config.input_size || img.width != config.input_size)
    img = imaging::resize_bicubic(img, config.input_size, config.input_size);
  // Frequency enhancement replaces the RGB input: the filtered signal feeds
  // the branches. It is already zero-mean, so only the per-channel std
  // scaling applies (a constant image still becomes an all-zero input).
  const bool freq = config.freq_enabled;
  if (freq) img = transforms::highpass_fft(img, config.freq_cutoff);

  const imaging::NormStats stats = imaging::imagenet_stats();
  const int S = config.input_size;
  Sample s;
  s.label = label;
  s.input.resize(static_cast<std::size_t>(config.in_channels) * S * S);
  require(config.in_channels == 3, ErrorCode::invalid_argument,
          "make_sample: image samples are 3-channel");
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < S; ++y)
      for (int x = 0; x < S; ++x) {
        const double v = freq ? img.at(y, x, c) / stats.std[c]
                              : (img.at(y, x, c) - stats.mean[c]) / stats.std[c];
        s.input[(static_cast<std::size_t>(c) * S + y) * S + x] =
            static_cast<float>(v);
      }
  return s;
}

std::vector<double> cnn_branch(const HybridParams& params,
                               std::span<const double> input_chw) {
  Trace tr;
  tr.x0.assign(input_chw.begin(), input_chw.end());
  run_cnn(params, tr.x0.data(), tr);
  return tr.h_c;
}

std::vector<double> vit_branch(const HybridParams& params,
                               std::span<const double> input_chw) {
  Trace tr;
  tr.x0.assign(input_chw.begin(), input_chw.end());
  run_vit(params, tr.x0.data(), tr);
  return tr.h_v;
}

std::vector<double> project(std::span<const double> P, int rows, int cols,
                            std::span<const double> h) {
  require(P.size() == static_cast<std::size_t>(rows) * cols &&
              h.size() == static_cast<std::size_t>(cols),
          ErrorCode::model, "project: dimension mismatch");
  std::vector<double> z(rows, 0.0);
  linear(P, nullptr, rows, cols, h.data(), z.data());
  return z;
}

GateOutput gate(const HybridParams& params, std::span<const double> z_c,
                std::span<const double> z_v) {
  const auto& c = params.config;
  require(c.branch_mode == BranchMode::hybrid, ErrorCode::model,
          "gate: only defined in hybrid mode");
  require(z_c.size() == static_cast<std::size_t>(c.embed_dim) &&
              z_v.size() == static_cast<std::size_t>(c.embed_dim),
          ErrorCode::model, "gate: dimension mismatch");
  std::vector<double> cat(2 * c.embed_dim);
  std::copy(z_c.begin(), z_c.end(), cat.begin());
  std::copy(z_v.begin(), z_v.end(), cat.begin() + c.embed_dim);
  std::vector<double> hidden(c.gate_hidden);
  linear(params.view("gate1.w"), params.view("gate1.b").data(), c.gate_hidden,
         2 * c.embed_dim, cat.data(), hidden.data());
  for (double& v : hidden) v = v > 0.0 ? v : 0.0;
  double logits[2];
  linear(params.view("gate2.w"), params.view("gate2.b").data(), 2,
         c.gate_hidden, hidden.data(), logits);
  const double mx = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - mx), e1 = std::exp(logits[1] - mx);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

std::vector<double> fuse(std::span<const double> z_c,
                         std::span<const double> z_v, const GateOutput& w) {
  require(z_c.size() == z_v.size(), ErrorCode::model, "fuse: dimension mismatch");
  std::vector<double> out(z_c.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = w.w_c * z_c[i] + w.w_v * z_v[i];
  return out;
}

double forward_logit(const HybridParams& params, const Sample& sample) {
  Trace tr;
  return run_forward(params, sample, tr);
}

double forward(const HybridParams& params, const Sample& sample) {
  return sigmoid(forward_logit(params, sample));
}

double loss(std::span<const double> scores, std::span<const int> labels) {
  require(scores.size() == labels.size() && !scores.empty(),
          ErrorCode::invalid_argument, "loss: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = std::clamp(scores[i], 1e-12, 1.0 - 1e-12);
    total += labels[i] == 1 ? -std::log(p) : -std::log1p(-p);
  }
  return total / static_cast<double>(scores.size());
}

double batch_loss_and_gradients(const HybridParams& params,
                                std::span<const Sample> batch,
                                std::vector<double>& grad) {
  require(!batch.empty(), ErrorCode::invalid_argument, "gradients: empty batch");
  grad.assign(params.values.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  Trace tr;
  for (const Sample& s : batch) {
    const double logit = run_forward(params, s, tr);
    const double y = static_cast<double>(s.label);
    // Stable BCE from the logit.
    total += std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::fabs(logit)));
    const double dlogit = (sigmoid(logit) - y) * inv_n;
    run_backward(params, tr, dlogit, grad);
  }
  return total * inv_n;
}

bool EarlyStopper::observe(double metric) {
  ++epoch_;
  if (metric > best_metric_) {
    best_metric_ = metric;
    best_epoch_ = epoch_;
    since_best_ = 0;
    return true;
  }
  ++since_best_;
  return false;
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  long step_new = 0;
  long step_trunk = 0;
};

void adamw_step(HybridParams& params, const std::vector<double>& grad,
                AdamState& st, const TrainConfig& tc, bool trunk_frozen) {
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (!trunk_frozen) ++st.step_trunk;
  ++st.step_new;
  for (const auto& pi : params.infos) {
    if (pi.trunk && trunk_frozen) continue;
    const double lr = pi.trunk ? tc.lr_backbone : tc.lr_new;
    const long t = pi.trunk ? st.step_trunk : st.step_new;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(t));
    for (std::size_t i = pi.offset; i < pi.offset + pi.size; ++i) {
      const double gi = grad[i];
      st.m[i] = b1 * st.m[i] + (1.0 - b1) * gi;
      st.v[i] = b2 * st.v[i] + (1.0 - b2) * gi * gi;
      const double mhat = st.m[i] / bc1;
      const double vhat = st.v[i] / bc2;
      params.values[i] -= lr * (mhat / (std::sqrt(vhat) + eps) +
                                tc.weight_decay * params.values[i]);
    }
  }
}

}  // namespace

TrainResult train(const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set,
                  const HybridConfig& config, const TrainConfig& tc) {
  require(!train_set.empty() && !val_set.empty(), ErrorCode::model,
          "train: empty split");
  require(tc.patience >= 1 && tc.patience <= tc.max_epochs,
          ErrorCode::invalid_argument, "train: patience must be in [1, max_epochs]");
  require(tc.batch_size >= 1, ErrorCode::invalid_argument, "train: batch_size");

  HybridParams params = init_params(config, tc.seed);
  AdamState st;
  st.m.assign(params.values.size(), 0.0);
  st.v.assign(params.values.size(), 0.0);

  SplitMix64 shuffler(tc.seed ^ 0x5851F42D4C957F2DULL);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);

  metrics::ScoreSet val_scores;
  val_scores.scores.resize(val_set.size());
  val_scores.labels.resize(val_set.size());
  for (std::size_t i = 0; i < val_set.size(); ++i)
    val_scores.labels[i] = val_set[i].label;

  TrainResult result;
  result.params = params;
  EarlyStopper stopper(tc.patience);
  std::vector<double> grad;
  std::vector<Sample> batch;

  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const bool frozen = epoch <= tc.lit_freeze_epochs;
    // Pinned Fisher-Yates keeps the batch order reproducible everywhere.
    for (std::size_t i = order.size() - 1; i > 0; --i) {
      const std::size_t j = shuffler.below(i + 1);
      std::swap(order[i], order[j]);
    }
    double epoch_loss = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t start = 0; start < order.size(); start += tc.batch_size) {
      const std::size_t end = std::min(order.size(), start + tc.batch_size);
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(train_set[order[k]]);
      epoch_loss += batch_loss_and_gradients(params, batch, grad);
      adamw_step(params, grad, st, tc, frozen);
      ++n_batches;
    }
    epoch_loss /= static_cast<double>(n_batches);

    for (std::size_t i = 0; i < val_set.size(); ++i)
      val_scores.scores[i] = forward(params, val_set[i]);
    const double val_auroc = metrics::auroc(val_scores);
    result.history.push_back({epoch, epoch_loss, val_auroc});
    if (stopper.observe(val_auroc)) {
      result.params = params;
      result.best_epoch = epoch;
    }
    if (stopper.should_stop()) break;
  }
  return result;
}

std::vector<std::pair<std::string, metrics::ScoreSet>> score_dataset(
    const HybridParams& params, const std::vector<LabeledImage>& images,
    const transforms::ConditionGrid& grid) {
  grid.validate();
  require(!images.empty(), ErrorCode::invalid_argument, "score_dataset: no images");
  std::vector<std::pair<std::string, metrics::ScoreSet>> out;
  out.reserve(grid.conditions.size());
  for (const auto& cond : grid.conditions) {
    metrics::ScoreSet set;
    set.scores.resize(images.size());
    set.labels.resize(images.size());
    set.ids.resize(images.size());
    #pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < static_cast<std::int64_t>(images.size()); ++i) {
      const ImageTensor degraded = transforms::apply_condition(images[i].image, cond);
      const Sample s = make_sample(degraded, images[i].label, params.config);
      set.scores[i] = forward(params, s);
      set.labels[i] = images[i].label;
      set.ids[i] = images[i].id;
    }
    out.emplace_back(cond.name(), std::move(set));
  }
  return out;
}

void save_checkpoint(const std::string& path, const HybridParams& params,
                     std::uint64_t train_seed) {
  nlohmann::json j;
  j["format"] = "fixthresh-checkpoint";
  j["version"] = 1;
  j["train_seed"] = train_seed;
  const auto& c = params.config;
  j["config"] = {
      {"input_size", c.input_size},
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
      {"branch_mode", branch_mode_str(c.branch_mode)},
  };
  j["values"] = params.values;
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::io, "cannot write checkpoint: " + path);
  out << j.dump();
  require(out.good(), ErrorCode::io, "checkpoint write failed: " + path);
}

HybridParams load_checkpoint(const std::string& path, std::uint64_t* train_seed) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::io, "cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    raise(ErrorCode::format, std::string("checkpoint parse error: ") + e.what());
  }
  require(j.value("format", "") == "fixthresh-checkpoint", ErrorCode::format,
          "not a fixthresh checkpoint: " + path);
  require(j.value("version", 0) == 1, ErrorCode::format,
          "unsupported checkpoint version");
  const auto& jc = j.at("config");
  HybridConfig c;
  c.input_size = jc.at("input_size").get<int>();
  c.in_channels = jc.at("in_channels").get<int>();
  c.embed_dim = jc.at("embed_dim").get<int>();
  c.conv_channels = jc.at("conv_channels").get<std::vector<int>>();
  c.patch_size = jc.at("patch_size").get<int>();
  c.vit_dim = jc.at("vit_dim").get<int>();
  c.attn_blocks = jc.at("attn_blocks").get<int>();
  c.attn_heads = jc.at("attn_heads").get<int>();
  c.mlp_ratio = jc.at("mlp_ratio").get<int>();
  c.gate_hidden = jc.at("gate_hidden").get<int>();
  c.freq_enabled = jc.at("freq_enabled").get<bool>();
  c.freq_cutoff = jc.at("freq_cutoff").get<double>();
  c.branch_mode = branch_mode_from_str(jc.at("branch_mode").get<std::string>());
  HybridParams p = make_params(c);
  const auto values = j.at("values").get<std::vector<double>>();
  require(values.size() == p.values.size(), ErrorCode::format,
          "checkpoint weight count does not match config");
  p.values = values;
  if (train_seed) *train_seed = j.value("train_seed", 0ULL);
  return p;
}

}  // namespace fixthresh::detector
