#pragma once

#include <fstream>
#include <memory>
#include <vector>

#include "thermopose/nn/autograd.hpp"

namespace thermopose::nn {

struct Conv2d {
  Parameter w, b;
  int stride = 1;

  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int k, int stride_ = 1)
      : w({out_ch, in_ch, k, k}), b({out_ch}), stride(stride_) {}

  void init(std::mt19937_64& rng) { he_normal_init(w.value, w.value.shape[1] * w.value.shape[2] * w.value.shape[3], rng); }

  NodePtr operator()(const NodePtr& x) {
    return conv2d(x, param_node(w), param_node(b), stride);
  }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

struct Linear {
  Parameter w, b;

  Linear() = default;
  Linear(int in_dim, int out_dim) : w({out_dim, in_dim}), b({out_dim}) {}

  void init(std::mt19937_64& rng) { he_normal_init(w.value, w.value.shape[1], rng); }

  NodePtr operator()(const NodePtr& x) { return linear(x, param_node(w), param_node(b)); }

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

/// Single-conv residual unit: relu(x + conv3(x)).
struct ResUnit {
  Conv2d conv;

  ResUnit() = default;
  explicit ResUnit(int ch) : conv(ch, ch, 3) {}
  void init(std::mt19937_64& rng) { conv.init(rng); }
  NodePtr operator()(const NodePtr& x) { return relu(add(x, conv(x))); }
  void collect(std::vector<Parameter*>& out) { conv.collect(out); }
};

/// Recursive hourglass level: skip path plus a pooled inner level, merged by
/// addition on the way back up.
struct HourglassLevel {
  Conv2d skip;  // 1x1
  Conv2d down;  // 3x3 after pooling
  std::unique_ptr<HourglassLevel> inner;
  Conv2d bottom;  // 3x3 at the deepest level (only when inner == nullptr)
  Conv2d up;      // 3x3 after merging

  HourglassLevel(int ch, int depth) : skip(ch, ch, 1), down(ch, ch, 3), up(ch, ch, 3) {
    if (depth > 1)
      inner = std::make_unique<HourglassLevel>(ch, depth - 1);
    else
      bottom = Conv2d(ch, ch, 3);
  }

  void init(std::mt19937_64& rng) {
    skip.init(rng);
    down.init(rng);
    up.init(rng);
    if (inner)
      inner->init(rng);
    else
      bottom.init(rng);
  }

  NodePtr operator()(const NodePtr& x) {
    NodePtr s = skip(x);
    NodePtr low = relu(down(avg_pool2d(x, 2)));
    if (inner) low = (*inner)(low);
    else low = relu(bottom(low));
    NodePtr merged = relu(add(s, upsample_nearest2(low)));
    return relu(up(merged));
  }

  void collect(std::vector<Parameter*>& out) {
    skip.collect(out);
    down.collect(out);
    if (inner)
      inner->collect(out);
    else
      bottom.collect(out);
    up.collect(out);
  }
};

struct EncDecConfig {
  int width = 32;
  int blocks = 1;  // stacked hourglass cores
  int depth = 2;   // pooling levels inside each core
};

/// Hourglass-style encoder-decoder emitting per-cell logits at 72x96.
/// Input is the assembled [N,C,72,96] stack (the 288x384 channels are
/// reduced 4x by the input assembler).
struct EncDecNet {
  EncDecConfig cfg;
  int in_ch = 0, out_ch = 0;
  Conv2d entry;      // 3x3 at 72x96
  Conv2d to_core;    // 3x3 at 36x48
  std::vector<std::unique_ptr<HourglassLevel>> cores;  // at 36x48
  Conv2d entry_skip;  // 1x1 at 72x96
  Conv2d head1;       // 3x3 at 72x96, width -> width/2
  Conv2d head2;       // 1x1, width/2 -> out_ch

  EncDecNet() = default;
  EncDecNet(int in_channels, int out_channels, EncDecConfig c, uint64_t seed)
      : cfg(c), in_ch(in_channels), out_ch(out_channels) {
    if (cfg.depth < 1 || cfg.depth > 2)
      throw ParamError("EncDecNet: depth must be 1 or 2 for the 72x96 grid");
    const int w = cfg.width;
    entry = Conv2d(in_ch, w, 3);
    to_core = Conv2d(w, w, 3);
    for (int i = 0; i < cfg.blocks; ++i)
      cores.push_back(std::make_unique<HourglassLevel>(w, cfg.depth));
    entry_skip = Conv2d(w, w, 1);
    head1 = Conv2d(w, std::max(8, w / 2), 3);
    head2 = Conv2d(std::max(8, w / 2), out_ch, 1);
    auto rng = make_rng(seed);
    entry.init(rng);
    to_core.init(rng);
    for (auto& core : cores) core->init(rng);
    entry_skip.init(rng);
    head1.init(rng);
    head2.init(rng);
  }

  /// Per-channel spatial log-probabilities [N,out_ch,72,96].
  NodePtr forward_logp(const NodePtr& x) {
    NodePtr e = relu(entry(x));
    NodePtr f = relu(to_core(avg_pool2d(e, 2)));
    for (auto& core : cores) f = (*core)(f);
    NodePtr merged = relu(add(entry_skip(e), upsample_nearest2(f)));
    NodePtr h = relu(head1(merged));
    return spatial_log_softmax(head2(h));
  }

  void collect(std::vector<Parameter*>& out) {
    entry.collect(out);
    to_core.collect(out);
    for (auto& core : cores) core->collect(out);
    entry_skip.collect(out);
    head1.collect(out);
    head2.collect(out);
  }
};

struct ClassifierConfig {
  int width = 32;
  int blocks = 4;  // residual units, one per downsampling stage then tail
};

/// Residual classifier over the assembled [N,C,72,96] stack.
struct ClassifierNet {
  ClassifierConfig cfg;
  int in_ch = 0, classes = 0;
  Conv2d entry;
  std::vector<ResUnit> units;
  std::vector<Conv2d> widen;  // 1x1 between stages
  Linear fc;
  std::vector<int> stage_width;

  ClassifierNet() = default;
  ClassifierNet(int in_channels, int num_classes, ClassifierConfig c, uint64_t seed)
      : cfg(c), in_ch(in_channels), classes(num_classes) {
    auto rng = make_rng(seed);
    int w = cfg.width;
    entry = Conv2d(in_ch, w, 3);
    entry.init(rng);
    for (int i = 0; i < cfg.blocks; ++i) {
      units.emplace_back(w);
      units.back().init(rng);
      stage_width.push_back(w);
      // double once midway, mirroring the widening of the reference nets
      const int next_w = (i == cfg.blocks / 2 - 1) ? w * 2 : w;
      widen.emplace_back(w, next_w, 1);
      widen.back().init(rng);
      w = next_w;
    }
    fc = Linear(w, classes);
    fc.init(rng);
  }

  /// Class logits [N,classes]; pooling halves the grid after each unit down
  /// to 9x12.
  NodePtr forward_logits(const NodePtr& x) {
    NodePtr f = relu(entry(x));
    int h = 72;
    for (size_t i = 0; i < units.size(); ++i) {
      f = units[i](f);
      f = relu(widen[i](f));
      if (h > 9) {
        f = avg_pool2d(f, 2);
        h /= 2;
      }
    }
    return fc(global_avg_pool(f));
  }

  NodePtr forward_logp(const NodePtr& x) { return log_softmax_rows(forward_logits(x)); }

  void collect(std::vector<Parameter*>& out) {
    entry.collect(out);
    for (size_t i = 0; i < units.size(); ++i) {
      units[i].collect(out);
      widen[i].collect(out);
    }
    fc.collect(out);
  }
};

// ---------------------------------------------------------------------------
// parameter blobs

inline void save_parameters(std::ostream& os, const std::vector<Parameter*>& params) {
  const uint32_t count = uint32_t(params.size());
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const Parameter* p : params) {
    const uint32_t ndim = uint32_t(p->value.shape.size());
    os.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
    for (int d : p->value.shape) {
      const int32_t v = d;
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    os.write(reinterpret_cast<const char*>(p->value.data.data()),
             std::streamsize(p->value.data.size() * sizeof(float)));
  }
}

inline void load_parameters(std::istream& is, const std::vector<Parameter*>& params) {
  uint32_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (count != params.size()) throw DataError("checkpoint: parameter count mismatch");
  for (Parameter* p : params) {
    uint32_t ndim = 0;
    is.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
    std::vector<int> shape(ndim);
    for (auto& d : shape) {
      int32_t v = 0;
      is.read(reinterpret_cast<char*>(&v), sizeof(v));
      d = v;
    }
    if (shape != p->value.shape) throw DataError("checkpoint: parameter shape mismatch");
    is.read(reinterpret_cast<char*>(p->value.data.data()),
            std::streamsize(p->value.data.size() * sizeof(float)));
    if (!is) throw DataError("checkpoint: truncated parameter data");
  }
}

// ---------------------------------------------------------------------------
// optimizer

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // classic L2-into-gradient
};

struct Adam {
  AdamConfig cfg;
  int64_t t = 0;

  explicit Adam(AdamConfig c = {}) : cfg(c) {}

  void step(const std::vector<Parameter*>& params) {
    ++t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (Parameter* p : params) {
      if (p->m.shape != p->value.shape) {
        p->m = Tensor::zeros(p->value.shape);
        p->v = Tensor::zeros(p->value.shape);
      }
      for (size_t i = 0; i < p->value.data.size(); ++i) {
        double g = p->grad.data[i];
        if (cfg.weight_decay > 0) g += cfg.weight_decay * p->value.data[i];
        const double m = cfg.beta1 * p->m.data[i] + (1 - cfg.beta1) * g;
        const double v = cfg.beta2 * p->v.data[i] + (1 - cfg.beta2) * g * g;
        p->m.data[i] = float(m);
        p->v.data[i] = float(v);
        p->value.data[i] -= float(cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps));
      }
      p->zero_grad();
    }
  }
};

}  // namespace thermopose::nn
