// Copyright 2026 The Autocam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "autocam/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace autocam::engine {

namespace {

std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << ")";
  return os.str();
}

int64_t numel_of(const std::vector<int>& shape) {
  int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw std::invalid_argument("tensor dims must be positive, got " + shape_str(shape));
    n *= d;
  }
  return n;
}

// C (M,N) = A (M,K) * B (K,N), accumulating when acc. The inner j loop keeps
// per-element accumulation order fixed, so results do not depend on thread
// count or schedule.
void gemm_nn(int64_t M, int64_t N, int64_t K, const double* A, const double* B, double* C,
             bool acc) {
#pragma omp parallel for schedule(static) if (M * N * K > 32768)
  for (int64_t i = 0; i < M; ++i) {
    double* c = C + i * N;
    if (!acc) std::fill(c, c + N, 0.0);
    const double* a = A + i * K;
    for (int64_t k = 0; k < K; ++k) {
      const double av = a[k];
      const double* b = B + k * N;
      for (int64_t j = 0; j < N; ++j) c[j] += av * b[j];
    }
  }
}

std::vector<double> transposed(int64_t rows, int64_t cols, const double* src) {
  std::vector<double> out(static_cast<size_t>(rows * cols));
  for (int64_t i = 0; i < rows; ++i) {
    for (int64_t j = 0; j < cols; ++j) out[j * rows + i] = src[i * cols + j];
  }
  return out;
}

bool track(Graph& g, std::initializer_list<const Tensor*> ins) {
  if (!g.recording()) return false;
  for (const Tensor* t : ins) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

void mark_output(Graph& g, Tensor& out) {
  out.set_requires_grad(true);
  out.ensure_grad();
  g.track_output(out);
}

void expect_rank(const Tensor& t, int rank, const char* what) {
  if (!t.defined() || t.rank() != rank) {
    throw std::invalid_argument(std::string(what) + ": expected rank " + std::to_string(rank) +
                                " tensor, got " + (t.defined() ? shape_str(t.shape()) : "undefined"));
  }
}

double smooth_l1_value(double r) { return std::abs(r) < 1.0 ? 0.5 * r * r : std::abs(r) - 0.5; }
double smooth_l1_slope(double r) {
  return std::abs(r) < 1.0 ? r : (r > 0.0 ? 1.0 : -1.0);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  if (shape.empty() || shape.size() > 4) {
    throw std::invalid_argument("tensor rank must be 1..4, got " + shape_str(shape));
  }
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = std::move(shape);
  t.s_->v.assign(static_cast<size_t>(numel_of(t.s_->shape)), 0.0);
  t.s_->requires_grad = requires_grad;
  return t;
}

Tensor Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  std::fill(t.s_->v.begin(), t.s_->v.end(), value);
  return t;
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> values,
                           bool requires_grad) {
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  if (shape.empty() || shape.size() > 4) {
    throw std::invalid_argument("tensor rank must be 1..4, got " + shape_str(shape));
  }
  if (numel_of(shape) != static_cast<int64_t>(values.size())) {
    throw std::invalid_argument("value count " + std::to_string(values.size()) +
                                " does not match shape " + shape_str(shape));
  }
  t.s_->shape = std::move(shape);
  t.s_->v = std::move(values);
  t.s_->requires_grad = requires_grad;
  return t;
}

void Tensor::ensure_grad() {
  if (s_->g.empty()) s_->g.assign(s_->v.size(), 0.0);
}

void Tensor::zero_grad() {
  if (s_->g.empty()) {
    s_->g.assign(s_->v.size(), 0.0);
  } else {
    std::fill(s_->g.begin(), s_->g.end(), 0.0);
  }
}

double Tensor::value() const {
  if (!defined() || numel() != 1) {
    throw std::invalid_argument("Tensor::value() requires a scalar tensor");
  }
  return s_->v[0];
}

Tensor Tensor::clone() const {
  Tensor t;
  t.s_ = std::make_shared<Storage>();
  t.s_->shape = s_->shape;
  t.s_->v = s_->v;
  t.s_->requires_grad = s_->requires_grad;
  return t;
}

// ---------------------------------------------------------------------------
// Graph
// ---------------------------------------------------------------------------

void Graph::record(std::function<void()> backward_step) {
  if (enabled_) steps_.push_back(std::move(backward_step));
}

void Graph::track_output(const Tensor& t) {
  if (enabled_) outputs_.push_back(t);
}

void Graph::backward(Tensor loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar tensor");
  }
  // Intermediates restart from zero each call; leaf gradients accumulate.
  for (Tensor& t : outputs_) t.zero_grad();
  loss.ensure_grad();
  loss.grad()[0] += 1.0;
  for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
}

// ---------------------------------------------------------------------------
// conv2d
// ---------------------------------------------------------------------------

namespace {

struct ConvDims {
  int batch, cin, h, w, cout, kh, kw, ho, wo;
  int64_t cols_k;  // cin*kh*kw
  int64_t cols_n;  // batch*ho*wo
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int padding) {
  expect_rank(x, 4, "conv2d input");
  expect_rank(w, 4, "conv2d weight");
  if (stride < 1) throw std::invalid_argument("conv2d: stride must be >= 1");
  if (padding < 0) throw std::invalid_argument("conv2d: padding must be >= 0");
  ConvDims d;
  d.batch = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = w.dim(0);
  d.kh = w.dim(2);
  d.kw = w.dim(3);
  if (w.dim(1) != d.cin) {
    throw std::invalid_argument("conv2d: channel mismatch, input " + shape_str(x.shape()) +
                                " vs weight " + shape_str(w.shape()));
  }
  const int eh = d.h + 2 * padding, ew = d.w + 2 * padding;
  if (eh < d.kh || ew < d.kw) throw std::invalid_argument("conv2d: kernel larger than padded input");
  d.ho = (eh - d.kh) / stride + 1;
  d.wo = (ew - d.kw) / stride + 1;
  d.cols_k = static_cast<int64_t>(d.cin) * d.kh * d.kw;
  d.cols_n = static_cast<int64_t>(d.batch) * d.ho * d.wo;
  return d;
}

// col: (cols_k, cols_n), column index n = (b*ho + oy)*wo + ox.
std::shared_ptr<std::vector<double>> im2col(const Tensor& x, const ConvDims& d, int stride,
                                            int padding) {
  auto col = std::make_shared<std::vector<double>>(
      static_cast<size_t>(d.cols_k * d.cols_n), 0.0);
  const double* xv = x.data();
#pragma omp parallel for schedule(static) if (d.cols_k * d.cols_n > 32768)
  for (int64_t k = 0; k < d.cols_k; ++k) {
    const int c = static_cast<int>(k / (d.kh * d.kw));
    const int ky = static_cast<int>((k / d.kw) % d.kh);
    const int kx = static_cast<int>(k % d.kw);
    double* row = col->data() + k * d.cols_n;
    for (int b = 0; b < d.batch; ++b) {
      const double* xc = xv + (static_cast<int64_t>(b) * d.cin + c) * d.h * d.w;
      for (int oy = 0; oy < d.ho; ++oy) {
        const int iy = oy * stride - padding + ky;
        double* dst = row + (static_cast<int64_t>(b) * d.ho + oy) * d.wo;
        if (iy < 0 || iy >= d.h) continue;  // stays zero
        for (int ox = 0; ox < d.wo; ++ox) {
          const int ix = ox * stride - padding + kx;
          if (ix >= 0 && ix < d.w) dst[ox] = xc[static_cast<int64_t>(iy) * d.w + ix];
        }
      }
    }
  }
  return col;
}

// Inverse of im2col: scatter-add dcol into dx.
void col2im_add(const std::vector<double>& dcol, const ConvDims& d, int stride, int padding,
                double* dx) {
  for (int64_t k = 0; k < d.cols_k; ++k) {
    const int c = static_cast<int>(k / (d.kh * d.kw));
    const int ky = static_cast<int>((k / d.kw) % d.kh);
    const int kx = static_cast<int>(k % d.kw);
    const double* row = dcol.data() + k * d.cols_n;
    for (int b = 0; b < d.batch; ++b) {
      double* xc = dx + (static_cast<int64_t>(b) * d.cin + c) * d.h * d.w;
      for (int oy = 0; oy < d.ho; ++oy) {
        const int iy = oy * stride - padding + ky;
        if (iy < 0 || iy >= d.h) continue;
        const double* src = row + (static_cast<int64_t>(b) * d.ho + oy) * d.wo;
        for (int ox = 0; ox < d.wo; ++ox) {
          const int ix = ox * stride - padding + kx;
          if (ix >= 0 && ix < d.w) xc[static_cast<int64_t>(iy) * d.w + ix] += src[ox];
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(Graph& g, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int padding) {
  const ConvDims d = conv_dims(x, w, stride, padding);
  if (bias.defined() && (bias.rank() != 1 || bias.dim(0) != d.cout)) {
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) +
                                " does not match out channels " + std::to_string(d.cout));
  }
  auto col = im2col(x, d, stride, padding);

  // y (cout, cols_n) = w (cout, cols_k) * col
  std::vector<double> y(static_cast<size_t>(d.cout) * d.cols_n);
  gemm_nn(d.cout, d.cols_n, d.cols_k, w.data(), col->data(), y.data(), false);

  Tensor out = Tensor::zeros({d.batch, d.cout, d.ho, d.wo});
  double* ov = out.data();
  const int64_t plane = static_cast<int64_t>(d.ho) * d.wo;
  for (int b = 0; b < d.batch; ++b) {
    for (int o = 0; o < d.cout; ++o) {
      const double* src = y.data() + o * d.cols_n + b * plane;
      double* dst = ov + (static_cast<int64_t>(b) * d.cout + o) * plane;
      const double bo = bias.defined() ? bias.data()[o] : 0.0;
      for (int64_t i = 0; i < plane; ++i) dst[i] = src[i] + bo;
    }
  }

  if (track(g, {&x, &w, &bias})) {
    mark_output(g, out);
    Tensor xc = x, wc = w, bc = bias, oc = out;
    g.record([xc, wc, bc, oc, col, d, stride, padding]() mutable {
      const int64_t plane = static_cast<int64_t>(d.ho) * d.wo;
      // gather dY to (cout, cols_n)
      std::vector<double> dy(static_cast<size_t>(d.cout) * d.cols_n);
      const double* og = oc.grad();
      for (int b = 0; b < d.batch; ++b) {
        for (int o = 0; o < d.cout; ++o) {
          const double* src = og + (static_cast<int64_t>(b) * d.cout + o) * plane;
          double* dst = dy.data() + o * d.cols_n + b * plane;
          std::memcpy(dst, src, sizeof(double) * plane);
        }
      }
      if (wc.requires_grad()) {
        wc.ensure_grad();
        // dW^T (cols_k, cout) = col (cols_k, cols_n) * dY^T (cols_n, cout)
        std::vector<double> dyt = transposed(d.cout, d.cols_n, dy.data());
        std::vector<double> dwt(static_cast<size_t>(d.cols_k) * d.cout);
        gemm_nn(d.cols_k, d.cout, d.cols_n, col->data(), dyt.data(), dwt.data(), false);
        double* wg = wc.grad();
        for (int64_t k = 0; k < d.cols_k; ++k) {
          for (int o = 0; o < d.cout; ++o) wg[o * d.cols_k + k] += dwt[k * d.cout + o];
        }
      }
      if (bc.defined() && bc.requires_grad()) {
        bc.ensure_grad();
        double* bg = bc.grad();
        for (int o = 0; o < d.cout; ++o) {
          double s = 0.0;
          const double* row = dy.data() + o * d.cols_n;
          for (int64_t n = 0; n < d.cols_n; ++n) s += row[n];
          bg[o] += s;
        }
      }
      if (xc.requires_grad()) {
        xc.ensure_grad();
        // dcol (cols_k, cols_n) = W^T (cols_k, cout) * dY (cout, cols_n)
        std::vector<double> wt = transposed(d.cout, d.cols_k, wc.data());
        std::vector<double> dcol(static_cast<size_t>(d.cols_k) * d.cols_n);
        gemm_nn(d.cols_k, d.cols_n, d.cout, wt.data(), dy.data(), dcol.data(), false);
        col2im_add(dcol, d, stride, padding, xc.grad());
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise and pooling ops
// ---------------------------------------------------------------------------

Tensor relu(Graph& g, const Tensor& x) {
  if (!x.defined()) throw std::invalid_argument("relu: undefined input");
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) ov[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  if (track(g, {&x})) {
    mark_output(g, out);
    Tensor xc = x, oc = out;
    g.record([xc, oc]() mutable {
      xc.ensure_grad();
      const double* xv = xc.data();
      const double* og = oc.grad();
      double* xg = xc.grad();
      const int64_t n = xc.numel();
      for (int64_t i = 0; i < n; ++i) {
        if (xv[i] > 0.0) xg[i] += og[i];
      }
    });
  }
  return out;
}

Tensor residual_add(Graph& g, const Tensor& x, const Tensor& fx) {
  if (!x.defined() || !fx.defined() || x.shape() != fx.shape()) {
    throw std::invalid_argument("residual_add: shape mismatch " +
                                (x.defined() ? shape_str(x.shape()) : "undefined") + " vs " +
                                (fx.defined() ? shape_str(fx.shape()) : "undefined"));
  }
  Tensor out = Tensor::zeros(x.shape());
  const double* a = x.data();
  const double* b = fx.data();
  double* ov = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) ov[i] = a[i] + b[i];
  if (track(g, {&x, &fx})) {
    mark_output(g, out);
    Tensor xc = x, fc = fx, oc = out;
    g.record([xc, fc, oc]() mutable {
      const double* og = oc.grad();
      const int64_t n = oc.numel();
      if (xc.requires_grad()) {
        xc.ensure_grad();
        double* xg = xc.grad();
        for (int64_t i = 0; i < n; ++i) xg[i] += og[i];
      }
      if (fc.requires_grad()) {
        fc.ensure_grad();
        double* fg = fc.grad();
        for (int64_t i = 0; i < n; ++i) fg[i] += og[i];
      }
    });
  }
  return out;
}

Tensor avg_pool(Graph& g, const Tensor& x, int k) {
  expect_rank(x, 4, "avg_pool");
  if (k < 1) throw std::invalid_argument("avg_pool: k must be >= 1");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (H % k != 0 || W % k != 0) {
    throw std::invalid_argument("avg_pool: spatial dims " + shape_str(x.shape()) +
                                " not divisible by k=" + std::to_string(k));
  }
  const int HO = H / k, WO = W / k;
  Tensor out = Tensor::zeros({B, C, HO, WO});
  const double inv = 1.0 / (k * k);
  const double* xv = x.data();
  double* ov = out.data();
  for (int bc = 0; bc < B * C; ++bc) {
    const double* xp = xv + static_cast<int64_t>(bc) * H * W;
    double* op = ov + static_cast<int64_t>(bc) * HO * WO;
    for (int oy = 0; oy < HO; ++oy) {
      for (int ox = 0; ox < WO; ++ox) {
        double s = 0.0;
        for (int dy = 0; dy < k; ++dy) {
          for (int dx = 0; dx < k; ++dx) s += xp[(oy * k + dy) * W + ox * k + dx];
        }
        op[oy * WO + ox] = s * inv;
      }
    }
  }
  if (track(g, {&x})) {
    mark_output(g, out);
    Tensor xc = x, oc = out;
    g.record([xc, oc, k]() mutable {
      xc.ensure_grad();
      const int B = xc.dim(0), C = xc.dim(1), H = xc.dim(2), W = xc.dim(3);
      const int HO = H / k, WO = W / k;
      const double inv = 1.0 / (k * k);
      const double* og = oc.grad();
      double* xg = xc.grad();
      for (int bc = 0; bc < B * C; ++bc) {
        const double* op = og + static_cast<int64_t>(bc) * HO * WO;
        double* xp = xg + static_cast<int64_t>(bc) * H * W;
        for (int oy = 0; oy < HO; ++oy) {
          for (int ox = 0; ox < WO; ++ox) {
            const double v = op[oy * WO + ox] * inv;
            for (int dy = 0; dy < k; ++dy) {
              for (int dx = 0; dx < k; ++dx) xp[(oy * k + dy) * W + ox * k + dx] += v;
            }
          }
        }
      }
    });
  }
  return out;
}

Tensor global_avg_pool(Graph& g, const Tensor& x) {
  expect_rank(x, 4, "global_avg_pool");
  const int B = x.dim(0), C = x.dim(1);
  const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  Tensor out = Tensor::zeros({B, C});
  const double* xv = x.data();
  double* ov = out.data();
  for (int64_t bc = 0; bc < static_cast<int64_t>(B) * C; ++bc) {
    double s = 0.0;
    const double* xp = xv + bc * hw;
    for (int64_t i = 0; i < hw; ++i) s += xp[i];
    ov[bc] = s / static_cast<double>(hw);
  }
  if (track(g, {&x})) {
    mark_output(g, out);
    Tensor xc = x, oc = out;
    g.record([xc, oc, hw]() mutable {
      xc.ensure_grad();
      const double* og = oc.grad();
      double* xg = xc.grad();
      const int64_t bcn = oc.numel();
      for (int64_t bc = 0; bc < bcn; ++bc) {
        const double v = og[bc] / static_cast<double>(hw);
        double* xp = xg + bc * hw;
        for (int64_t i = 0; i < hw; ++i) xp[i] += v;
      }
    });
  }
  return out;
}

Tensor linear(Graph& g, const Tensor& x, const Tensor& w, const Tensor& b) {
  expect_rank(x, 2, "linear input");
  expect_rank(w, 2, "linear weight");
  const int N = x.dim(0), IN = x.dim(1), OUT = w.dim(0);
  if (w.dim(1) != IN) {
    throw std::invalid_argument("linear: input " + shape_str(x.shape()) + " vs weight " +
                                shape_str(w.shape()));
  }
  if (b.defined() && (b.rank() != 1 || b.dim(0) != OUT)) {
    throw std::invalid_argument("linear: bias shape " + shape_str(b.shape()) +
                                " does not match out features " + std::to_string(OUT));
  }
  Tensor out = Tensor::zeros({N, OUT});
  std::vector<double> wt = transposed(OUT, IN, w.data());
  gemm_nn(N, OUT, IN, x.data(), wt.data(), out.data(), false);
  if (b.defined()) {
    double* ov = out.data();
    const double* bv = b.data();
    for (int i = 0; i < N; ++i) {
      for (int o = 0; o < OUT; ++o) ov[static_cast<int64_t>(i) * OUT + o] += bv[o];
    }
  }
  if (track(g, {&x, &w, &b})) {
    mark_output(g, out);
    Tensor xc = x, wc = w, bc = b, oc = out;
    g.record([xc, wc, bc, oc]() mutable {
      const int N = xc.dim(0), IN = xc.dim(1), OUT = wc.dim(0);
      const double* og = oc.grad();
      if (xc.requires_grad()) {
        xc.ensure_grad();
        gemm_nn(N, IN, OUT, og, wc.data(), xc.grad(), true);
      }
      if (wc.requires_grad()) {
        wc.ensure_grad();
        std::vector<double> dyt = transposed(N, OUT, og);
        gemm_nn(OUT, IN, N, dyt.data(), xc.data(), wc.grad(), true);
      }
      if (bc.defined() && bc.requires_grad()) {
        bc.ensure_grad();
        double* bg = bc.grad();
        for (int i = 0; i < N; ++i) {
          for (int o = 0; o < OUT; ++o) bg[o] += og[static_cast<int64_t>(i) * OUT + o];
        }
      }
    });
  }
  return out;
}

namespace {

struct AxisDims {
  int64_t outer, n, inner;
};

AxisDims axis_dims(const Tensor& x, int axis, const char* what) {
  if (!x.defined()) throw std::invalid_argument(std::string(what) + ": undefined input");
  if (axis < 0 || axis >= x.rank()) {
    throw std::invalid_argument(std::string(what) + ": axis " + std::to_string(axis) +
                                " out of range for rank " + std::to_string(x.rank()));
  }
  AxisDims d{1, x.dim(axis), 1};
  for (int i = 0; i < axis; ++i) d.outer *= x.dim(i);
  for (int i = axis + 1; i < x.rank(); ++i) d.inner *= x.dim(i);
  return d;
}

}  // namespace

Tensor softmax(Graph& g, const Tensor& x, int axis) {
  const AxisDims d = axis_dims(x, axis, "softmax");
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  for (int64_t o = 0; o < d.outer; ++o) {
    for (int64_t i = 0; i < d.inner; ++i) {
      const int64_t base = o * d.n * d.inner + i;
      double mx = xv[base];
      for (int64_t j = 1; j < d.n; ++j) mx = std::max(mx, xv[base + j * d.inner]);
      double sum = 0.0;
      for (int64_t j = 0; j < d.n; ++j) {
        const double e = std::exp(xv[base + j * d.inner] - mx);
        ov[base + j * d.inner] = e;
        sum += e;
      }
      const double inv = 1.0 / sum;
      for (int64_t j = 0; j < d.n; ++j) ov[base + j * d.inner] *= inv;
    }
  }
  if (track(g, {&x})) {
    mark_output(g, out);
    Tensor xc = x, oc = out;
    g.record([xc, oc, d]() mutable {
      xc.ensure_grad();
      const double* p = oc.data();
      const double* og = oc.grad();
      double* xg = xc.grad();
      for (int64_t o = 0; o < d.outer; ++o) {
        for (int64_t i = 0; i < d.inner; ++i) {
          const int64_t base = o * d.n * d.inner + i;
          double dot = 0.0;
          for (int64_t j = 0; j < d.n; ++j) {
            dot += og[base + j * d.inner] * p[base + j * d.inner];
          }
          for (int64_t j = 0; j < d.n; ++j) {
            const int64_t k = base + j * d.inner;
            xg[k] += p[k] * (og[k] - dot);
          }
        }
      }
    });
  }
  return out;
}

Tensor concat(Graph& g, const std::vector<Tensor>& xs, int axis) {
  if (xs.empty()) throw std::invalid_argument("concat: no inputs");
  const int rank = xs[0].rank();
  if (axis < 0 || axis >= rank) {
    throw std::invalid_argument("concat: axis " + std::to_string(axis) +
                                " out of range for rank " + std::to_string(rank));
  }
  std::vector<int> out_shape = xs[0].shape();
  int axis_total = 0;
  for (const Tensor& t : xs) {
    if (t.rank() != rank) throw std::invalid_argument("concat: rank mismatch");
    for (int i = 0; i < rank; ++i) {
      if (i != axis && t.dim(i) != xs[0].dim(i)) {
        throw std::invalid_argument("concat: shape mismatch " + shape_str(t.shape()) + " vs " +
                                    shape_str(xs[0].shape()));
      }
    }
    axis_total += t.dim(axis);
  }
  out_shape[axis] = axis_total;
  Tensor out = Tensor::zeros(out_shape);

  AxisDims od = axis_dims(out, axis, "concat");
  double* ov = out.data();
  int64_t offset = 0;  // in axis units
  for (const Tensor& t : xs) {
    const AxisDims td = axis_dims(t, axis, "concat");
    const double* tv = t.data();
    for (int64_t o = 0; o < td.outer; ++o) {
      std::memcpy(ov + (o * od.n + offset) * od.inner, tv + o * td.n * td.inner,
                  sizeof(double) * td.n * td.inner);
    }
    offset += td.n;
  }

  bool any = false;
  for (const Tensor& t : xs) any = any || t.requires_grad();
  if (g.recording() && any) {
    mark_output(g, out);
    std::vector<Tensor> inputs = xs;
    Tensor oc = out;
    g.record([inputs, oc, axis]() mutable {
      const AxisDims od = axis_dims(oc, axis, "concat");
      const double* og = oc.grad();
      int64_t offset = 0;
      for (Tensor& t : inputs) {
        const AxisDims td = axis_dims(t, axis, "concat");
        if (t.requires_grad()) {
          t.ensure_grad();
          double* tg = t.grad();
          for (int64_t o = 0; o < td.outer; ++o) {
            const double* src = og + (o * od.n + offset) * od.inner;
            double* dst = tg + o * td.n * td.inner;
            for (int64_t i = 0; i < td.n * td.inner; ++i) dst[i] += src[i];
          }
        }
        offset += td.n;
      }
    });
  }
  return out;
}

Tensor select_channel(Graph& g, const Tensor& x, int channel) {
  expect_rank(x, 4, "select_channel");
  if (channel < 0 || channel >= x.dim(1)) {
    throw std::invalid_argument("select_channel: channel " + std::to_string(channel) +
                                " out of range for " + shape_str(x.shape()));
  }
  const int B = x.dim(0), C = x.dim(1);
  const int64_t hw = static_cast<int64_t>(x.dim(2)) * x.dim(3);
  Tensor out = Tensor::zeros({B, 1, x.dim(2), x.dim(3)});
  for (int b = 0; b < B; ++b) {
    std::memcpy(out.data() + b * hw, x.data() + (static_cast<int64_t>(b) * C + channel) * hw,
                sizeof(double) * hw);
  }
  if (track(g, {&x})) {
    mark_output(g, out);
    Tensor xc = x, oc = out;
    g.record([xc, oc, channel, hw]() mutable {
      xc.ensure_grad();
      const int B = xc.dim(0), C = xc.dim(1);
      for (int b = 0; b < B; ++b) {
        const double* src = oc.grad() + b * hw;
        double* dst = xc.grad() + (static_cast<int64_t>(b) * C + channel) * hw;
        for (int64_t i = 0; i < hw; ++i) dst[i] += src[i];
      }
    });
  }
  return out;
}

Tensor sigmoid(Graph& g, const Tensor& x) {
  if (!x.defined()) throw std::invalid_argument("sigmoid: undefined input");
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) {
    const double v = xv[i];
    if (v >= 0.0) {
      ov[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      ov[i] = e / (1.0 + e);
    }
  }
  if (track(g, {&x})) {
    mark_output(g, out);
    Tensor xc = x, oc = out;
    g.record([xc, oc]() mutable {
      xc.ensure_grad();
      const double* y = oc.data();
      const double* og = oc.grad();
      double* xg = xc.grad();
      const int64_t n = xc.numel();
      for (int64_t i = 0; i < n; ++i) xg[i] += og[i] * y[i] * (1.0 - y[i]);
    });
  }
  return out;
}

Tensor affine(Graph& g, const Tensor& x, double k, double c) {
  if (!x.defined()) throw std::invalid_argument("affine: undefined input");
  Tensor out = Tensor::zeros(x.shape());
  const double* xv = x.data();
  double* ov = out.data();
  const int64_t n = x.numel();
  for (int64_t i = 0; i < n; ++i) ov[i] = k * xv[i] + c;
  if (track(g, {&x})) {
    mark_output(g, out);
    Tensor xc = x, oc = out;
    g.record([xc, oc, k]() mutable {
      xc.ensure_grad();
      const double* og = oc.grad();
      double* xg = xc.grad();
      const int64_t n = xc.numel();
      for (int64_t i = 0; i < n; ++i) xg[i] += k * og[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss heads
// ---------------------------------------------------------------------------

Tensor weighted_nll(Graph& g, const Tensor& probs, const Tensor& weights) {
  expect_rank(probs, 2, "weighted_nll probs");
  expect_rank(weights, 2, "weighted_nll weights");
  if (probs.shape() != weights.shape()) {
    throw std::invalid_argument("weighted_nll: shape mismatch " + shape_str(probs.shape()) +
                                " vs " + shape_str(weights.shape()));
  }
  const int64_t n = probs.numel();
  const int N = probs.dim(0);
  const double* p = probs.data();
  const double* w = weights.data();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc -= w[i] * std::log(std::max(p[i], kProbFloor));
  Tensor out = Tensor::from_values({1}, {acc / N});
  if (track(g, {&probs})) {
    mark_output(g, out);
    Tensor pc = probs, wc = weights, oc = out;
    g.record([pc, wc, oc]() mutable {
      pc.ensure_grad();
      const double scale = oc.grad()[0] / pc.dim(0);
      const double* p = pc.data();
      const double* w = wc.data();
      double* pg = pc.grad();
      const int64_t n = pc.numel();
      for (int64_t i = 0; i < n; ++i) {
        if (p[i] > kProbFloor) pg[i] -= scale * w[i] / p[i];
      }
    });
  }
  return out;
}

Tensor expectation_consistency(Graph& g, const Tensor& probs, const std::vector<double>& bins,
                               const std::vector<double>& gt_iso) {
  expect_rank(probs, 2, "expectation_consistency probs");
  const int N = probs.dim(0), M = probs.dim(1);
  if (static_cast<int>(bins.size()) != M || static_cast<int>(gt_iso.size()) != N) {
    throw std::invalid_argument("expectation_consistency: bins/labels size mismatch");
  }
  const double ln2 = std::log(2.0);
  const double* p = probs.data();
  std::vector<double> y(N), err(N);
  double acc = 0.0;
  for (int i = 0; i < N; ++i) {
    double yi = 0.0;
    for (int j = 0; j < M; ++j) yi += p[static_cast<int64_t>(i) * M + j] * bins[j];
    yi = std::max(yi, 1e-12);
    y[i] = yi;
    err[i] = std::log(yi / gt_iso[i]) / ln2;
    acc += smooth_l1_value(err[i]);
  }
  Tensor out = Tensor::from_values({1}, {acc / N});
  if (track(g, {&probs})) {
    mark_output(g, out);
    Tensor pc = probs, oc = out;
    g.record([pc, oc, bins, y, err, ln2]() mutable {
      pc.ensure_grad();
      const int N = pc.dim(0), M = pc.dim(1);
      const double scale = oc.grad()[0] / N;
      double* pg = pc.grad();
      for (int i = 0; i < N; ++i) {
        const double k = scale * smooth_l1_slope(err[i]) / (y[i] * ln2);
        for (int j = 0; j < M; ++j) pg[static_cast<int64_t>(i) * M + j] += k * bins[j];
      }
    });
  }
  return out;
}

Tensor smooth_l1(Graph& g, const Tensor& pred, const std::vector<double>& target, double scale) {
  if (!pred.defined() || (pred.rank() != 1 && !(pred.rank() == 2 && pred.dim(1) == 1))) {
    throw std::invalid_argument("smooth_l1: pred must be (N) or (N,1)");
  }
  if (!(scale > 0.0)) throw std::invalid_argument("smooth_l1: scale must be positive");
  const int N = pred.dim(0);
  if (static_cast<int>(target.size()) != N) {
    throw std::invalid_argument("smooth_l1: target size mismatch");
  }
  const double* pv = pred.data();
  double acc = 0.0;
  for (int i = 0; i < N; ++i) acc += smooth_l1_value((pv[i] - target[i]) / scale);
  Tensor out = Tensor::from_values({1}, {acc / N});
  if (track(g, {&pred})) {
    mark_output(g, out);
    Tensor pc = pred, oc = out;
    std::vector<double> tgt = target;
    g.record([pc, oc, tgt, scale]() mutable {
      pc.ensure_grad();
      const int N = pc.dim(0);
      const double k = oc.grad()[0] / (N * scale);
      const double* pv = pc.data();
      double* pg = pc.grad();
      for (int i = 0; i < N; ++i) pg[i] += k * smooth_l1_slope((pv[i] - tgt[i]) / scale);
    });
  }
  return out;
}

Tensor sum_squares(Graph& g, const Tensor& x) {
  if (!x.defined()) throw std::invalid_argument("sum_squares: undefined input");
  const double* xv = x.data();
  const int64_t n = x.numel();
  double acc = 0.0;
  for (int64_t i = 0; i < n; ++i) acc += xv[i] * xv[i];
  Tensor out = Tensor::from_values({1}, {acc});
  if (track(g, {&x})) {
    mark_output(g, out);
    Tensor xc = x, oc = out;
    g.record([xc, oc]() mutable {
      xc.ensure_grad();
      const double k = 2.0 * oc.grad()[0];
      const double* xv = xc.data();
      double* xg = xc.grad();
      const int64_t n = xc.numel();
      for (int64_t i = 0; i < n; ++i) xg[i] += k * xv[i];
    });
  }
  return out;
}

Tensor scale_add(Graph& g, const std::vector<Tensor>& terms, const std::vector<double>& coeffs) {
  if (terms.empty() || terms.size() != coeffs.size()) {
    throw std::invalid_argument("scale_add: need matching nonempty terms and coefficients");
  }
  double acc = 0.0;
  bool any = false;
  for (size_t i = 0; i < terms.size(); ++i) {
    acc += coeffs[i] * terms[i].value();  // throws if not scalar
    any = any || terms[i].requires_grad();
  }
  Tensor out = Tensor::from_values({1}, {acc});
  if (g.recording() && any) {
    mark_output(g, out);
    std::vector<Tensor> tc = terms;
    std::vector<double> cc = coeffs;
    Tensor oc = out;
    g.record([tc, cc, oc]() mutable {
      const double og = oc.grad()[0];
      for (size_t i = 0; i < tc.size(); ++i) {
        if (tc[i].requires_grad()) {
          tc[i].ensure_grad();
          tc[i].grad()[0] += cc[i] * og;
        }
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Init and gradient check
// ---------------------------------------------------------------------------

void kaiming_uniform(Tensor& w, int fan_in, Rng& rng) {
  if (fan_in <= 0) throw std::invalid_argument("kaiming_uniform: fan_in must be positive");
  const double bound = std::sqrt(6.0 / fan_in);
  double* v = w.data();
  const int64_t n = w.numel();
  for (int64_t i = 0; i < n; ++i) v[i] = rng.uniform(-bound, bound);
}

GradCheckReport grad_check(const std::function<Tensor(Graph&)>& make_loss,
                           const std::vector<std::pair<std::string, Tensor>>& params, double h,
                           double tol, int max_per_tensor, uint64_t seed) {
  GradCheckReport report;
  for (const auto& [name, p] : params) {
    Tensor t = p;
    t.zero_grad();
  }
  Graph g(true);
  Tensor loss = make_loss(g);
  g.backward(loss);

  Rng rng(seed);
  for (const auto& [name, p] : params) {
    Tensor t = p;
    GradCheckEntry entry;
    entry.name = name;
    const int64_t n = t.numel();
    std::vector<int64_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (n > max_per_tensor) {
      rng.shuffle(idx);
      idx.resize(static_cast<size_t>(max_per_tensor));
    }
    for (int64_t i : idx) {
      const double analytic = t.grad()[i];
      const double old = t.data()[i];
      Graph off(false);
      t.data()[i] = old + h;
      const double lp = make_loss(off).value();
      t.data()[i] = old - h;
      const double lm = make_loss(off).value();
      t.data()[i] = old;
      const double numeric = (lp - lm) / (2.0 * h);
      const double denom = std::max(std::abs(analytic), std::abs(numeric));
      const double rel = denom < 1e-10 ? 0.0 : std::abs(analytic - numeric) / denom;
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
      ++entry.checked;
    }
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.entries.push_back(std::move(entry));
  }
  report.pass = report.max_rel_err < tol;
  return report;
}

}  // namespace autocam::engine
