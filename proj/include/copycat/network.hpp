#pragma once

#include <cmath>
#include <cstring>
#include <vector>

#include "copycat/common.hpp"
#include "copycat/kernels.hpp"
#include "copycat/model.hpp"

namespace copycat {

// Resolved per-layer shapes and parameter offsets for a validated spec.
struct LayerPlan {
  LayerDesc desc;
  int in_c = 0, in_h = 0, in_w = 0;
  int out_c = 0, out_h = 0, out_w = 0;
  size_t w_off = 0, b_off = 0;
  size_t w_count = 0, b_count = 0;

  size_t in_size() const { return size_t(in_c) * in_h * in_w; }
  size_t out_size() const { return size_t(out_c) * out_h * out_w; }
};

std::vector<LayerPlan> plan_layers(const ModelSpec& spec);

// Index of the last ReLU layer preceding the final dense layer; -1 if none.
int feature_layer_index(const std::vector<LayerPlan>& plan);

template <typename T>
void softmax(const std::vector<T>& logits, std::vector<T>& probs) {
  probs.resize(logits.size());
  T mx = logits[0];
  for (const T v : logits)
    if (v > mx) mx = v;
  T sum = 0;
  for (size_t i = 0; i < logits.size(); ++i) {
    probs[i] = std::exp(logits[i] - mx);
    sum += probs[i];
  }
  for (auto& p : probs) p /= sum;
}

// Per-sample activation record. act[0] is the (mean-adjusted) input and
// act[i+1] the output of layer i. cols keeps conv im2col buffers for the
// weight gradient; pool_argmax keeps flat input indices of each pool winner.
template <typename T>
struct Trace {
  std::vector<std::vector<T>> act;
  std::vector<std::vector<T>> cols;
  std::vector<std::vector<int>> pool_argmax;
};

// Inference and backprop engine over a flat parameter vector. Instantiated
// with float for production (SIMD-dispatched kernels) and double for the
// finite-difference gradient oracle (scalar kernels).
template <typename T>
class Network {
 public:
  explicit Network(const ModelSpec& spec)
      : spec_(spec), plan_(plan_layers(spec)), feature_layer_(feature_layer_index(plan_)) {
    size_t total = 0;
    for (const auto& l : plan_) total += l.w_count + l.b_count;
    params_.assign(total, T(0));
  }

  Network(const ModelSpec& spec, const std::vector<float>& blob, size_t mean_size)
      : Network(spec) {
    if (blob.size() != params_.size() + mean_size)
      throw ValidationError("checkpoint blob size does not match the architecture");
    for (size_t i = 0; i < params_.size(); ++i) params_[i] = T(blob[i]);
    mean_.assign(blob.begin() + params_.size(), blob.end());
  }

  const ModelSpec& spec() const { return spec_; }
  const std::vector<LayerPlan>& plan() const { return plan_; }
  int feature_layer() const { return feature_layer_; }
  std::vector<T>& params() { return params_; }
  const std::vector<T>& params() const { return params_; }
  const std::vector<float>& mean() const { return mean_; }

  std::vector<T> input_from(const ImageTensor& image) const {
    const auto& shp = spec_.input_shape;
    if (image.height != shp.height || image.width != shp.width || image.channels != shp.channels)
      throw ValidationError("image shape does not match the model input shape");
    std::vector<T> x(image.values.size());
    for (size_t i = 0; i < x.size(); ++i) x[i] = T(image.values[i]);
    if (!mean_.empty())
      for (size_t i = 0; i < x.size(); ++i) x[i] -= T(mean_[i]);
    return x;
  }

  // Fills the trace and returns the logits (last activation).
  const std::vector<T>& forward(std::vector<T> input, Trace<T>& trace) const {
    trace.act.assign(plan_.size() + 1, {});
    trace.cols.assign(plan_.size(), {});
    trace.pool_argmax.assign(plan_.size(), {});
    trace.act[0] = std::move(input);
    for (size_t li = 0; li < plan_.size(); ++li) {
      const LayerPlan& l = plan_[li];
      const std::vector<T>& x = trace.act[li];
      std::vector<T>& y = trace.act[li + 1];
      y.assign(l.out_size(), T(0));
      switch (l.desc.kind) {
        case LayerKind::kConv: {
          std::vector<T>& cols = trace.cols[li];
          im2col(x.data(), l, cols);
          const int hw = l.out_h * l.out_w;
          kernels::gemm_nn(params_.data() + l.w_off, cols.data(), y.data(), l.out_c,
                           l.in_c * 9, hw, false);
          const T* b = params_.data() + l.b_off;
          for (int o = 0; o < l.out_c; ++o) {
            T* row = y.data() + size_t(o) * hw;
            for (int i = 0; i < hw; ++i) row[i] += b[o];
          }
          break;
        }
        case LayerKind::kRelu:
          kernels::relu_forward(x.data(), y.data(), x.size());
          break;
        case LayerKind::kMaxPool: {
          std::vector<int>& arg = trace.pool_argmax[li];
          arg.assign(l.out_size(), 0);
          maxpool_forward(x.data(), l, y.data(), arg.data());
          break;
        }
        case LayerKind::kDense: {
          kernels::gemm_nn(params_.data() + l.w_off, x.data(), y.data(), l.desc.out,
                           l.desc.in, 1, false);
          const T* b = params_.data() + l.b_off;
          for (int o = 0; o < l.desc.out; ++o) y[o] += b[o];
          break;
        }
      }
    }
    return trace.act.back();
  }

  std::vector<T> logits(const ImageTensor& image) const {
    Trace<T> trace;
    return forward(input_from(image), trace);
  }

  // Accumulates parameter gradients into `grads` (same layout as params)
  // and returns nothing; `dlogits` is the loss gradient at the output.
  void backward(const Trace<T>& trace, const std::vector<T>& dlogits,
                std::vector<T>& grads) const {
    if (grads.size() != params_.size())
      throw ValidationError("gradient buffer size mismatch");
    std::vector<T> dy = dlogits;
    for (size_t li = plan_.size(); li-- > 0;) {
      const LayerPlan& l = plan_[li];
      const std::vector<T>& x = trace.act[li];
      std::vector<T> dx(x.size(), T(0));
      switch (l.desc.kind) {
        case LayerKind::kConv: {
          const int hw = l.out_h * l.out_w;
          const std::vector<T>& cols = trace.cols[li];
          kernels::gemm_nt(dy.data(), cols.data(), grads.data() + l.w_off, l.out_c, hw,
                           l.in_c * 9, true);
          T* db = grads.data() + l.b_off;
          for (int o = 0; o < l.out_c; ++o) {
            const T* row = dy.data() + size_t(o) * hw;
            T s = 0;
            for (int i = 0; i < hw; ++i) s += row[i];
            db[o] += s;
          }
          std::vector<T> dcols(size_t(l.in_c) * 9 * hw, T(0));
          kernels::gemm_tn(params_.data() + l.w_off, dy.data(), dcols.data(), l.in_c * 9,
                           l.out_c, hw, false);
          col2im(dcols.data(), l, dx.data());
          break;
        }
        case LayerKind::kRelu:
          kernels::relu_backward(x.data(), dy.data(), dx.data(), x.size());
          break;
        case LayerKind::kMaxPool: {
          const std::vector<int>& arg = trace.pool_argmax[li];
          for (size_t i = 0; i < dy.size(); ++i) dx[arg[i]] += dy[i];
          break;
        }
        case LayerKind::kDense: {
          kernels::gemm_nn(dy.data(), x.data(), grads.data() + l.w_off, l.desc.out, 1,
                           l.desc.in, true);
          T* db = grads.data() + l.b_off;
          for (int o = 0; o < l.desc.out; ++o) db[o] += dy[o];
          kernels::gemm_tn(params_.data() + l.w_off, dy.data(), dx.data(), l.desc.in,
                           l.desc.out, 1, false);
          break;
        }
      }
      dy = std::move(dx);
    }
  }

  SoftLabel predict_soft(const ImageTensor& image) const {
    const std::vector<T> z = logits(image);
    std::vector<T> p;
    softmax(z, p);
    SoftLabel out;
    out.probabilities.assign(p.begin(), p.end());
    return out;
  }

  std::vector<float> extract_features(const ImageTensor& image) const {
    if (feature_layer_ < 0)
      throw ValidationError("architecture has no ReLU before the final dense layer");
    Trace<T> trace;
    forward(input_from(image), trace);
    const std::vector<T>& f = trace.act[size_t(feature_layer_) + 1];
    return std::vector<float>(f.begin(), f.end());
  }

 private:
  // cols is [in_c*9 x out_h*out_w]; zero padding of one pixel on each side.
  void im2col(const T* x, const LayerPlan& l, std::vector<T>& cols) const {
    const int hw = l.out_h * l.out_w;
    cols.assign(size_t(l.in_c) * 9 * hw, T(0));
    for (int c = 0; c < l.in_c; ++c) {
      const T* plane = x + size_t(c) * l.in_h * l.in_w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T* row = cols.data() + (size_t(c) * 9 + size_t(ky) * 3 + kx) * hw;
          for (int y = 0; y < l.out_h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= l.in_h) continue;
            for (int xo = 0; xo < l.out_w; ++xo) {
              const int sx = xo + kx - 1;
              if (sx < 0 || sx >= l.in_w) continue;
              row[size_t(y) * l.out_w + xo] = plane[size_t(sy) * l.in_w + sx];
            }
          }
        }
      }
    }
  }

  void col2im(const T* dcols, const LayerPlan& l, T* dx) const {
    const int hw = l.out_h * l.out_w;
    for (int c = 0; c < l.in_c; ++c) {
      T* plane = dx + size_t(c) * l.in_h * l.in_w;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T* row = dcols + (size_t(c) * 9 + size_t(ky) * 3 + kx) * hw;
          for (int y = 0; y < l.out_h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= l.in_h) continue;
            for (int xo = 0; xo < l.out_w; ++xo) {
              const int sx = xo + kx - 1;
              if (sx < 0 || sx >= l.in_w) continue;
              plane[size_t(sy) * l.in_w + sx] += row[size_t(y) * l.out_w + xo];
            }
          }
        }
      }
    }
  }

  // Window 2, stride 2; ties go to the first cell in scan order, which is
  // also the winner LRP credits.
  void maxpool_forward(const T* x, const LayerPlan& l, T* y, int* argmax) const {
    for (int c = 0; c < l.out_c; ++c) {
      const T* plane = x + size_t(c) * l.in_h * l.in_w;
      for (int oy = 0; oy < l.out_h; ++oy) {
        for (int ox = 0; ox < l.out_w; ++ox) {
          int best_idx = -1;
          T best = 0;
          for (int dy2 = 0; dy2 < 2; ++dy2) {
            for (int dx2 = 0; dx2 < 2; ++dx2) {
              const int iy = oy * 2 + dy2, ix = ox * 2 + dx2;
              const int idx = iy * l.in_w + ix;
              if (best_idx < 0 || plane[idx] > best) {
                best = plane[idx];
                best_idx = idx;
              }
            }
          }
          const size_t o = (size_t(c) * l.out_h + oy) * l.out_w + ox;
          y[o] = best;
          argmax[o] = int(size_t(c) * l.in_h * l.in_w) + best_idx;
        }
      }
    }
  }

  ModelSpec spec_;
  std::vector<LayerPlan> plan_;
  int feature_layer_;
  std::vector<T> params_;
  std::vector<float> mean_;
};

}  // namespace copycat
