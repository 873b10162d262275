#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include <Eigen/Dense>

#include "thermopose/nn/tensor.hpp"

namespace thermopose::nn {

using MatrixRM = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

/// One vertex of the per-forward tape. Gradients accumulate into `grad`
/// (lazily sized); parameter leaves additionally push into Parameter::grad.
struct Node {
  Tensor value;
  Tensor grad;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_op;
  Parameter* param = nullptr;
  bool needs_grad = false;

  Tensor& ensure_grad() {
    if (grad.shape != value.shape) grad = Tensor::zeros(value.shape);
    return grad;
  }
};

using NodePtr = std::shared_ptr<Node>;

inline NodePtr constant(Tensor v) {
  auto n = std::make_shared<Node>();
  n->value = std::move(v);
  n->needs_grad = false;
  return n;
}

inline NodePtr param_node(Parameter& p) {
  auto n = std::make_shared<Node>();
  n->value = p.value;  // copy keeps the tape immutable during the step
  n->param = &p;
  n->needs_grad = true;
  n->backward_op = [](Node& self) {
    for (size_t i = 0; i < self.grad.data.size(); ++i)
      self.param->grad.data[i] += self.grad.data[i];
  };
  return n;
}

inline NodePtr make_op(Tensor value, std::vector<NodePtr> parents,
                       std::function<void(Node&)> backward) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) n->needs_grad = n->needs_grad || p->needs_grad;
  if (n->needs_grad) n->backward_op = std::move(backward);
  return n;
}

/// Reverse-mode sweep from a scalar root.
inline void backward(const NodePtr& root) {
  if (root->value.numel() != 1) throw ParamError("backward: root must be scalar");
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack{{root.get(), 0}};
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next == 0 && seen.count(node)) {
      stack.pop_back();
      continue;
    }
    if (next < node->parents.size()) {
      Node* child = node->parents[next++].get();
      if (!seen.count(child)) stack.push_back({child, 0});
    } else {
      seen.insert(node);
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad().data[0] = 1.f;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->needs_grad && n->backward_op && n->grad.shape == n->value.shape) n->backward_op(*n);
  }
}

// ---------------------------------------------------------------------------
// elementwise and shape ops

inline NodePtr relu(const NodePtr& x) {
  Tensor out = x->value;
  for (auto& v : out.data) v = std::max(v, 0.f);
  return make_op(std::move(out), {x}, [](Node& self) {
    NodePtr x = self.parents[0];
    if (!x->needs_grad) return;
    auto& gx = x->ensure_grad();
    for (size_t i = 0; i < gx.data.size(); ++i)
      if (x->value.data[i] > 0.f) gx.data[i] += self.grad.data[i];
  });
}

inline NodePtr add(const NodePtr& a, const NodePtr& b) {
  if (!a->value.same_shape(b->value)) throw ParamError("add: shape mismatch");
  Tensor out = a->value;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->value.data[i];
  return make_op(std::move(out), {a, b}, [](Node& self) {
    for (int p = 0; p < 2; ++p) {
      NodePtr par = self.parents[p];
      if (!par->needs_grad) continue;
      auto& g = par->ensure_grad();
      for (size_t i = 0; i < g.data.size(); ++i) g.data[i] += self.grad.data[i];
    }
  });
}

// ---------------------------------------------------------------------------
// conv2d (im2col + GEMM)

namespace detail {

inline void im2col(const float* x, int c_in, int h, int w, int k, int stride, int pad,
                   int out_h, int out_w, float* col) {
  // col is [c_in*k*k, out_h*out_w]
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        float* row = col + ((size_t(c) * k + ky) * k + kx) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride + ky - pad;
          float* dst = row + size_t(oy) * out_w;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + out_w, 0.f);
            continue;
          }
          const float* src = x + (size_t(c) * h + iy) * w;
          if (stride == 1) {
            // contiguous span; only the borders need zeroing
            const int shift = kx - pad;
            const int ox0 = std::max(0, -shift);
            const int ox1 = std::min(out_w, w - shift);
            std::fill(dst, dst + ox0, 0.f);
            if (ox1 > ox0) std::copy(src + ox0 + shift, src + ox1 + shift, dst + ox0);
            std::fill(dst + std::max(ox0, ox1), dst + out_w, 0.f);
          } else {
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride + kx - pad;
              dst[ox] = (ix >= 0 && ix < w) ? src[ix] : 0.f;
            }
          }
        }
      }
}

inline void col2im_add(const float* col, int c_in, int h, int w, int k, int stride, int pad,
                       int out_h, int out_w, float* x) {
  for (int c = 0; c < c_in; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const float* row = col + ((size_t(c) * k + ky) * k + kx) * out_h * out_w;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          float* dst = x + (size_t(c) * h + iy) * w;
          const float* src = row + size_t(oy) * out_w;
          if (stride == 1) {
            const int shift = kx - pad;
            const int ox0 = std::max(0, -shift);
            const int ox1 = std::min(out_w, w - shift);
            for (int ox = ox0; ox < ox1; ++ox) dst[ox + shift] += src[ox];
          } else {
            for (int ox = 0; ox < out_w; ++ox) {
              const int ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < w) dst[ix] += src[ox];
            }
          }
        }
      }
}

/// Reusable per-thread scratch: conv cols are hot-loop temporaries and their
/// repeated multi-MB allocation dominates otherwise.
inline std::vector<float>& scratch(int slot, size_t n) {
  thread_local std::vector<float> buffers[2];
  auto& buf = buffers[slot];
  if (buf.size() < n) buf.resize(n);
  return buf;
}

}  // namespace detail

/// 2D convolution: x [N,Ci,H,W], w [Co,Ci,k,k], b [Co] -> [N,Co,Ho,Wo].
inline NodePtr conv2d(const NodePtr& x, const NodePtr& w, const NodePtr& b, int stride = 1,
                      int pad = -1) {
  const auto& xs = x->value.shape;
  const auto& ws = w->value.shape;
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1])
    throw ParamError("conv2d: shape mismatch");
  const int n = xs[0], c_in = xs[1], h = xs[2], wd = xs[3];
  const int c_out = ws[0], k = ws[2];
  if (pad < 0) pad = k / 2;
  const int out_h = (h + 2 * pad - k) / stride + 1;
  const int out_w = (wd + 2 * pad - k) / stride + 1;
  const int kk = c_in * k * k;

  const bool pointwise = (k == 1 && stride == 1 && pad == 0);
  Tensor out({n, c_out, out_h, out_w});
  ConstMapRM wm(w->value.data.data(), c_out, kk);
  for (int i = 0; i < n; ++i) {
    const float* xi = x->value.data.data() + size_t(i) * c_in * h * wd;
    MapRM om(out.data.data() + size_t(i) * c_out * out_h * out_w, c_out, out_h * out_w);
    if (pointwise) {
      // 1x1 conv: the input already has the im2col layout
      ConstMapRM cm(xi, kk, out_h * out_w);
      om.noalias() = wm * cm;
    } else {
      auto& col = detail::scratch(0, size_t(kk) * out_h * out_w);
      detail::im2col(xi, c_in, h, wd, k, stride, pad, out_h, out_w, col.data());
      ConstMapRM cm(col.data(), kk, out_h * out_w);
      om.noalias() = wm * cm;
    }
    for (int c = 0; c < c_out; ++c) om.row(c).array() += b->value.data[c];
  }

  const int stride_c = stride, pad_c = pad;
  return make_op(std::move(out), {x, w, b}, [=](Node& self) {
    NodePtr xp = self.parents[0], wp = self.parents[1], bp = self.parents[2];
    const int oh = self.value.shape[2], ow = self.value.shape[3];
    ConstMapRM wm(wp->value.data.data(), c_out, kk);
    for (int i = 0; i < n; ++i) {
      ConstMapRM gm(self.grad.data.data() + size_t(i) * c_out * oh * ow, c_out, oh * ow);
      const float* xi = xp->value.data.data() + size_t(i) * c_in * h * wd;
      if (wp->needs_grad) {
        MapRM dwm(wp->ensure_grad().data.data(), c_out, kk);
        if (pointwise) {
          ConstMapRM cm(xi, kk, oh * ow);
          dwm.noalias() += gm * cm.transpose();
        } else {
          auto& col = detail::scratch(0, size_t(kk) * oh * ow);
          detail::im2col(xi, c_in, h, wd, k, stride_c, pad_c, oh, ow, col.data());
          ConstMapRM cm(col.data(), kk, oh * ow);
          dwm.noalias() += gm * cm.transpose();
        }
      }
      if (bp->needs_grad) {
        auto& gb = bp->ensure_grad();
        for (int c = 0; c < c_out; ++c) gb.data[c] += gm.row(c).sum();
      }
      if (xp->needs_grad) {
        float* dxi = xp->ensure_grad().data.data() + size_t(i) * c_in * h * wd;
        if (pointwise) {
          MapRM dxm(dxi, kk, oh * ow);
          dxm.noalias() += wm.transpose() * gm;
        } else {
          auto& dcol = detail::scratch(1, size_t(kk) * oh * ow);
          MapRM dcm(dcol.data(), kk, oh * ow);
          dcm.noalias() = wm.transpose() * gm;
          detail::col2im_add(dcol.data(), c_in, h, wd, k, stride_c, pad_c, oh, ow, dxi);
        }
      }
    }
  });
}

/// x [N,D], w [O,D], b [O] -> [N,O]
inline NodePtr linear(const NodePtr& x, const NodePtr& w, const NodePtr& b) {
  const int n = x->value.shape[0], d = x->value.shape[1];
  const int o = w->value.shape[0];
  if (w->value.shape[1] != d) throw ParamError("linear: shape mismatch");
  Tensor out({n, o});
  ConstMapRM xm(x->value.data.data(), n, d);
  ConstMapRM wm(w->value.data.data(), o, d);
  MapRM om(out.data.data(), n, o);
  om.noalias() = xm * wm.transpose();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < o; ++j) om(i, j) += b->value.data[j];
  return make_op(std::move(out), {x, w, b}, [=](Node& self) {
    NodePtr xp = self.parents[0], wp = self.parents[1], bp = self.parents[2];
    ConstMapRM gm(self.grad.data.data(), n, o);
    if (wp->needs_grad) {
      ConstMapRM xm(xp->value.data.data(), n, d);
      MapRM dwm(wp->ensure_grad().data.data(), o, d);
      dwm.noalias() += gm.transpose() * xm;
    }
    if (bp->needs_grad) {
      auto& gb = bp->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < o; ++j) gb.data[j] += gm(i, j);
    }
    if (xp->needs_grad) {
      ConstMapRM wm(wp->value.data.data(), o, d);
      MapRM dxm(xp->ensure_grad().data.data(), n, d);
      dxm.noalias() += gm * wm;
    }
  });
}

// ---------------------------------------------------------------------------
// pooling / resampling

inline NodePtr avg_pool2d(const NodePtr& x, int k) {
  const auto& s = x->value.shape;
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  if (h % k || w % k) throw ParamError("avg_pool2d: size not divisible by kernel");
  const int oh = h / k, ow = w / k;
  Tensor out({n, c, oh, ow});
  const float inv = 1.f / (k * k);
  for (int i = 0; i < n * c; ++i) {
    const float* src = x->value.data.data() + size_t(i) * h * w;
    float* dst = out.data.data() + size_t(i) * oh * ow;
    for (int oy = 0; oy < oh; ++oy)
      for (int ox = 0; ox < ow; ++ox) {
        float sum = 0;
        for (int dy = 0; dy < k; ++dy)
          for (int dx = 0; dx < k; ++dx) sum += src[(oy * k + dy) * w + ox * k + dx];
        dst[oy * ow + ox] = sum * inv;
      }
  }
  return make_op(std::move(out), {x}, [=](Node& self) {
    NodePtr xp = self.parents[0];
    if (!xp->needs_grad) return;
    auto& gx = xp->ensure_grad();
    for (int i = 0; i < n * c; ++i) {
      const float* g = self.grad.data.data() + size_t(i) * oh * ow;
      float* dst = gx.data.data() + size_t(i) * h * w;
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const float v = g[oy * ow + ox] * inv;
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) dst[(oy * k + dy) * w + ox * k + dx] += v;
        }
    }
  });
}

inline NodePtr upsample_nearest2(const NodePtr& x) {
  const auto& s = x->value.shape;
  const int n = s[0], c = s[1], h = s[2], w = s[3];
  Tensor out({n, c, h * 2, w * 2});
  for (int i = 0; i < n * c; ++i) {
    const float* src = x->value.data.data() + size_t(i) * h * w;
    float* dst = out.data.data() + size_t(i) * h * w * 4;
    for (int y = 0; y < h; ++y) {
      const float* srow = src + size_t(y) * w;
      float* drow = dst + size_t(2 * y) * 2 * w;
      for (int xx = 0; xx < w; ++xx) {
        drow[2 * xx] = srow[xx];
        drow[2 * xx + 1] = srow[xx];
      }
      std::copy(drow, drow + 2 * w, drow + 2 * w);
    }
  }
  return make_op(std::move(out), {x}, [=](Node& self) {
    NodePtr xp = self.parents[0];
    if (!xp->needs_grad) return;
    auto& gx = xp->ensure_grad();
    for (int i = 0; i < n * c; ++i) {
      const float* g = self.grad.data.data() + size_t(i) * h * w * 4;
      float* dst = gx.data.data() + size_t(i) * h * w;
      for (int y = 0; y < h; ++y) {
        const float* g0 = g + size_t(2 * y) * 2 * w;
        const float* g1 = g0 + 2 * w;
        float* drow = dst + size_t(y) * w;
        for (int xx = 0; xx < w; ++xx)
          drow[xx] += g0[2 * xx] + g0[2 * xx + 1] + g1[2 * xx] + g1[2 * xx + 1];
      }
    }
  });
}

inline NodePtr global_avg_pool(const NodePtr& x) {
  const auto& s = x->value.shape;
  const int n = s[0], c = s[1], hw = s[2] * s[3];
  Tensor out({n, c});
  for (int i = 0; i < n * c; ++i) {
    const float* src = x->value.data.data() + size_t(i) * hw;
    double sum = 0;
    for (int j = 0; j < hw; ++j) sum += src[j];
    out.data[i] = float(sum / hw);
  }
  return make_op(std::move(out), {x}, [=](Node& self) {
    NodePtr xp = self.parents[0];
    if (!xp->needs_grad) return;
    auto& gx = xp->ensure_grad();
    for (int i = 0; i < n * c; ++i) {
      const float v = self.grad.data[i] / hw;
      float* dst = gx.data.data() + size_t(i) * hw;
      for (int j = 0; j < hw; ++j) dst[j] += v;
    }
  });
}

// ---------------------------------------------------------------------------
// softmax heads and losses

/// log-softmax over the H*W cells of each (n,c) plane.
inline NodePtr spatial_log_softmax(const NodePtr& x) {
  const auto& s = x->value.shape;
  const int planes = s[0] * s[1], hw = s[2] * s[3];
  Tensor out = x->value;
  for (int i = 0; i < planes; ++i) {
    float* v = out.data.data() + size_t(i) * hw;
    float mx = v[0];
    for (int j = 1; j < hw; ++j) mx = std::max(mx, v[j]);
    double sum = 0;
    for (int j = 0; j < hw; ++j) sum += std::exp(v[j] - mx);
    const float lse = mx + float(std::log(sum));
    for (int j = 0; j < hw; ++j) v[j] -= lse;
  }
  return make_op(std::move(out), {x}, [=](Node& self) {
    NodePtr xp = self.parents[0];
    if (!xp->needs_grad) return;
    auto& gx = xp->ensure_grad();
    for (int i = 0; i < planes; ++i) {
      const float* g = self.grad.data.data() + size_t(i) * hw;
      const float* lp = self.value.data.data() + size_t(i) * hw;
      float* dst = gx.data.data() + size_t(i) * hw;
      double gsum = 0;
      for (int j = 0; j < hw; ++j) gsum += g[j];
      for (int j = 0; j < hw; ++j) dst[j] += g[j] - std::exp(lp[j]) * float(gsum);
    }
  });
}

/// log-softmax over the last dimension of [N,K].
inline NodePtr log_softmax_rows(const NodePtr& x) {
  const int n = x->value.shape[0], k = x->value.shape[1];
  Tensor out = x->value;
  for (int i = 0; i < n; ++i) {
    float* v = out.data.data() + size_t(i) * k;
    float mx = v[0];
    for (int j = 1; j < k; ++j) mx = std::max(mx, v[j]);
    double sum = 0;
    for (int j = 0; j < k; ++j) sum += std::exp(v[j] - mx);
    const float lse = mx + float(std::log(sum));
    for (int j = 0; j < k; ++j) v[j] -= lse;
  }
  return make_op(std::move(out), {x}, [=](Node& self) {
    NodePtr xp = self.parents[0];
    if (!xp->needs_grad) return;
    auto& gx = xp->ensure_grad();
    for (int i = 0; i < n; ++i) {
      const float* g = self.grad.data.data() + size_t(i) * k;
      const float* lp = self.value.data.data() + size_t(i) * k;
      float* dst = gx.data.data() + size_t(i) * k;
      double gsum = 0;
      for (int j = 0; j < k; ++j) gsum += g[j];
      for (int j = 0; j < k; ++j) dst[j] += g[j] - std::exp(lp[j]) * float(gsum);
    }
  });
}

/// Mean over the batch of the summed per-channel negative log-probability at
/// the target cells. logp is [N,C,H,W]; targets[n*C+c] is a flat cell index.
inline NodePtr nll_cells(const NodePtr& logp, std::vector<int> targets) {
  const auto& s = logp->value.shape;
  const int n = s[0], c = s[1], hw = s[2] * s[3];
  if (int(targets.size()) != n * c) throw ParamError("nll_cells: target count mismatch");
  double loss = 0;
  for (int i = 0; i < n * c; ++i) loss -= logp->value.data[size_t(i) * hw + targets[i]];
  Tensor out({1});
  out.data[0] = float(loss / n);
  return make_op(std::move(out), {logp}, [=, t = std::move(targets)](Node& self) {
    NodePtr lp = self.parents[0];
    if (!lp->needs_grad) return;
    auto& g = lp->ensure_grad();
    const float scale = self.grad.data[0] / n;
    for (int i = 0; i < n * c; ++i) g.data[size_t(i) * hw + t[i]] -= scale;
  });
}

/// Mean class NLL for [N,K] log-probabilities.
inline NodePtr nll_classes(const NodePtr& logp, std::vector<int> targets) {
  const int n = logp->value.shape[0], k = logp->value.shape[1];
  if (int(targets.size()) != n) throw ParamError("nll_classes: target count mismatch");
  double loss = 0;
  for (int i = 0; i < n; ++i) loss -= logp->value.data[size_t(i) * k + targets[i]];
  Tensor out({1});
  out.data[0] = float(loss / n);
  return make_op(std::move(out), {logp}, [=, t = std::move(targets)](Node& self) {
    NodePtr lp = self.parents[0];
    if (!lp->needs_grad) return;
    auto& g = lp->ensure_grad();
    const float scale = self.grad.data[0] / n;
    for (int i = 0; i < n; ++i) g.data[size_t(i) * k + t[i]] -= scale;
  });
}

/// Numerically stable mean binary cross-entropy on logits [N] or [N,1].
inline NodePtr bce_with_logits(const NodePtr& logits, std::vector<float> labels) {
  const int n = int(logits->value.numel());
  if (int(labels.size()) != n) throw ParamError("bce_with_logits: label count mismatch");
  double loss = 0;
  for (int i = 0; i < n; ++i) {
    const double z = logits->value.data[i], y = labels[i];
    loss += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  Tensor out({1});
  out.data[0] = float(loss / n);
  return make_op(std::move(out), {logits}, [=, y = std::move(labels)](Node& self) {
    NodePtr lp = self.parents[0];
    if (!lp->needs_grad) return;
    auto& g = lp->ensure_grad();
    const float scale = self.grad.data[0] / n;
    for (int i = 0; i < n; ++i) {
      const double z = lp->value.data[i];
      const double sig = 1.0 / (1.0 + std::exp(-z));
      g.data[i] += scale * float(sig - y[i]);
    }
  });
}

}  // namespace thermopose::nn
