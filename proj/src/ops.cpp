/*
 * Copyright 2026 The pdgan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "pdgan/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "pdgan/errors.hpp"

namespace pdgan {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

MatMap as_mat(Tensor& t, int rows, int cols) { return MatMap(t.data(), rows, cols); }
ConstMatMap as_mat(const Tensor& t, int rows, int cols) {
  return ConstMatMap(t.data(), rows, cols);
}

void require_rank(const Var& x, int rank, const char* op) {
  if (x.value().ndim() != rank) {
    throw ShapeError(std::string(op) + " expects rank " + std::to_string(rank) + ", got " +
                     shape_str(x.shape()));
  }
}

void require_same(const Var& a, const Var& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + " shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  }
}

// Applies f(x) elementwise; df(x, y) gives the local derivative from input
// and output.
template <typename F, typename DF>
Var unary(const Var& x, F f, DF df) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = f(xv[i]);
  return x.tape().record(std::move(out), {x}, [x, df](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < xv.size(); ++i) (*gx)[i] += g[i] * df(xv[i]);
  });
}

int spatial_size(const Shape& s) {
  int n = 1;
  for (std::size_t i = 1; i < s.size(); ++i) n *= s[i];
  return n;
}

// Collapses shape to (outer, axis extent, inner) around axis.
struct AxisSplit {
  int outer = 1;
  int extent = 1;
  int inner = 1;
};

AxisSplit split_axis(const Shape& s, int axis) {
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  AxisSplit a;
  for (int i = 0; i < axis; ++i) a.outer *= s[i];
  a.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) a.inner *= s[i];
  return a;
}

struct ConvGeometry {
  int c_in, h, w, c_out, k, stride, pad, h_out, w_out;
};

ConvGeometry conv_geometry(const Shape& xs, const Shape& ws, int stride) {
  if (xs.size() != 3 || ws.size() != 4) {
    throw ShapeError("conv2d expects x: C×H×W and w: Co×Ci×k×k, got " + shape_str(xs) + " and " +
                     shape_str(ws));
  }
  const int k = ws[2];
  if ((k != 1 && k != 3) || ws[3] != k) {
    throw ShapeError("conv2d supports 1×1 and 3×3 kernels only, got " + shape_str(ws));
  }
  if (ws[1] != xs[0]) {
    throw ShapeError("conv2d channel mismatch: input " + shape_str(xs) + ", weight " +
                     shape_str(ws));
  }
  if (stride != 1 && stride != 2) throw ShapeError("conv2d stride must be 1 or 2");
  ConvGeometry g{xs[0], xs[1], xs[2], ws[0], k, stride, (k - 1) / 2, 0, 0};
  g.h_out = (g.h + 2 * g.pad - k) / stride + 1;
  g.w_out = (g.w + 2 * g.pad - k) / stride + 1;
  return g;
}

bool is_pointwise(const ConvGeometry& g) { return g.k == 1 && g.stride == 1; }

// col: (c_in·k·k) × (h_out·w_out)
void im2col(const ConvGeometry& g, const double* x, double* col) {
  const int n_out = g.h_out * g.w_out;
  for (int c = 0; c < g.c_in; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        double* row = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * n_out;
        for (int oi = 0; oi < g.h_out; ++oi) {
          const int ii = oi * g.stride + ki - g.pad;
          double* dst = row + oi * g.w_out;
          if (ii < 0 || ii >= g.h) {
            std::fill(dst, dst + g.w_out, 0.0);
            continue;
          }
          const double* src = x + (static_cast<std::size_t>(c) * g.h + ii) * g.w;
          for (int oj = 0; oj < g.w_out; ++oj) {
            const int jj = oj * g.stride + kj - g.pad;
            dst[oj] = (jj >= 0 && jj < g.w) ? src[jj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const ConvGeometry& g, const double* col, double* x) {
  const int n_out = g.h_out * g.w_out;
  for (int c = 0; c < g.c_in; ++c) {
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        const double* row = col + static_cast<std::size_t>((c * g.k + ki) * g.k + kj) * n_out;
        for (int oi = 0; oi < g.h_out; ++oi) {
          const int ii = oi * g.stride + ki - g.pad;
          if (ii < 0 || ii >= g.h) continue;
          double* dst = x + (static_cast<std::size_t>(c) * g.h + ii) * g.w;
          const double* src = row + oi * g.w_out;
          for (int oj = 0; oj < g.w_out; ++oj) {
            const int jj = oj * g.stride + kj - g.pad;
            if (jj >= 0 && jj < g.w) dst[jj] += src[oj];
          }
        }
      }
    }
  }
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw ShapeError("matmul inner dimension mismatch: " + shape_str(a.shape()) + " · " +
                     shape_str(b.shape()));
  }
  Tensor out({m, n});
  as_mat(out, m, n).noalias() = as_mat(a.value(), m, k) * as_mat(b.value(), k, n);
  return a.tape().record(std::move(out), {a, b}, [a, b, m, k, n](Tape& tape, const Tensor& g, const Tensor&) {
    const auto gm = as_mat(g, m, n);
    if (Tensor* ga = tape.grad_sink(a)) {
      as_mat(*ga, m, k).noalias() += gm * as_mat(b.value(), k, n).transpose();
    }
    if (Tensor* gb = tape.grad_sink(b)) {
      as_mat(*gb, k, n).noalias() += as_mat(a.value(), m, k).transpose() * gm;
    }
  });
}

Var transpose(const Var& a) {
  require_rank(a, 2, "transpose");
  const int m = a.dim(0), n = a.dim(1);
  Tensor out({n, m});
  as_mat(out, n, m) = as_mat(a.value(), m, n).transpose();
  return a.tape().record(std::move(out), {a}, [a, m, n](Tape& tape, const Tensor& g, const Tensor&) {
    if (Tensor* ga = tape.grad_sink(a)) as_mat(*ga, m, n) += as_mat(g, n, m).transpose();
  });
}

Var add_row_bias(const Var& x, const Var& bias) {
  require_rank(x, 2, "add_row_bias");
  const int m = x.dim(0), n = x.dim(1);
  if (bias.size() != static_cast<std::size_t>(n)) {
    throw ShapeError("add_row_bias: bias " + shape_str(bias.shape()) + " for rows of " +
                     shape_str(x.shape()));
  }
  Tensor out = x.value();
  const Tensor& bv = bias.value();
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < n; ++j) out.at(i, j) += bv[j];
  }
  return x.tape().record(std::move(out), {x, bias}, [x, bias, m, n](Tape& tape, const Tensor& g, const Tensor&) {
    if (Tensor* gx = tape.grad_sink(x)) *gx += g;
    if (Tensor* gb = tape.grad_sink(bias)) {
      for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) (*gb)[j] += g.at(i, j);
      }
    }
  });
}

Var add(const Var& a, const Var& b) {
  require_same(a, b, "add");
  Tensor out = a.value();
  out += b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g, const Tensor&) {
    if (Tensor* ga = tape.grad_sink(a)) *ga += g;
    if (Tensor* gb = tape.grad_sink(b)) *gb += g;
  });
}

Var sub(const Var& a, const Var& b) {
  require_same(a, b, "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g, const Tensor&) {
    if (Tensor* ga = tape.grad_sink(a)) *ga += g;
    if (Tensor* gb = tape.grad_sink(b)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] -= g[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same(a, b, "mul");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g, const Tensor&) {
    if (Tensor* ga = tape.grad_sink(a)) {
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * bv[i];
    }
    if (Tensor* gb = tape.grad_sink(b)) {
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) (*gb)[i] += g[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  Tensor out = a.value();
  out *= s;
  return a.tape().record(std::move(out), {a}, [a, s](Tape& tape, const Tensor& g, const Tensor&) {
    if (Tensor* ga = tape.grad_sink(a)) {
      for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += s * g[i];
    }
  });
}

Var add_scalar(const Var& a, double s) {
  Tensor out = a.value();
  for (double& v : out.values()) v += s;
  return a.tape().record(std::move(out), {a}, [a](Tape& tape, const Tensor& g, const Tensor&) {
    if (Tensor* ga = tape.grad_sink(a)) *ga += g;
  });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  auto sig = [](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  };
  return unary(x, sig, [sig](double v) {
    const double s = sig(v);
    return s * (1.0 - s);
  });
}

Var abs(const Var& x) {
  return unary(
      x, [](double v) { return std::abs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var square(const Var& x) {
  return unary(x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Var softplus(const Var& x) {
  return unary(
      x, [](double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); },
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      });
}

Var sum(const Var& x) {
  const Tensor& xv = x.value();
  double s = 0.0;
  for (double v : xv.values()) s += v;
  return x.tape().record(Tensor::scalar(s), {x}, [x](Tape& tape, const Tensor& g, const Tensor&) {
    if (Tensor* gx = tape.grad_sink(x)) {
      for (double& v : gx->values()) v += g[0];
    }
  });
}

Var mean(const Var& x) { return scale(sum(x), 1.0 / static_cast<double>(x.size())); }

Var softmax(const Var& x, int axis) {
  const AxisSplit s = split_axis(x.shape(), axis);
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (int o = 0; o < s.outer; ++o) {
    for (int in = 0; in < s.inner; ++in) {
      const std::size_t base = static_cast<std::size_t>(o) * s.extent * s.inner + in;
      double mx = xv[base];
      for (int a = 1; a < s.extent; ++a) mx = std::max(mx, xv[base + a * s.inner]);
      double z = 0.0;
      for (int a = 0; a < s.extent; ++a) {
        const double e = std::exp(xv[base + a * s.inner] - mx);
        out[base + a * s.inner] = e;
        z += e;
      }
      for (int a = 0; a < s.extent; ++a) out[base + a * s.inner] /= z;
    }
  }
  return x.tape().record(std::move(out), {x}, [x, s](Tape& tape, const Tensor& g, const Tensor& yv) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    for (int o = 0; o < s.outer; ++o) {
      for (int in = 0; in < s.inner; ++in) {
        const std::size_t base = static_cast<std::size_t>(o) * s.extent * s.inner + in;
        double dot = 0.0;
        for (int a = 0; a < s.extent; ++a) dot += g[base + a * s.inner] * yv[base + a * s.inner];
        for (int a = 0; a < s.extent; ++a) {
          const std::size_t i = base + a * s.inner;
          (*gx)[i] += yv[i] * (g[i] - dot);
        }
      }
    }
  });
}

Var instance_norm(const Var& x, double eps) {
  if (x.value().ndim() < 2) throw ShapeError("instance_norm expects C×spatial, got " + shape_str(x.shape()));
  const int c = x.dim(0);
  const int n = spatial_size(x.shape());
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  std::vector<double> inv_std(c);
  for (int ch = 0; ch < c; ++ch) {
    const double* src = xv.data() + static_cast<std::size_t>(ch) * n;
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += src[i];
    mu /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (src[i] - mu) * (src[i] - mu);
    var /= n;
    inv_std[ch] = 1.0 / std::sqrt(var + eps);
    double* dst = out.data() + static_cast<std::size_t>(ch) * n;
    for (int i = 0; i < n; ++i) dst[i] = (src[i] - mu) * inv_std[ch];
  }
  return x.tape().record(std::move(out), {x},
                         [x, c, n, inv_std](Tape& tape, const Tensor& g, const Tensor& y) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    // dx = (dy - mean(dy) - y * mean(dy * y)) / std
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = static_cast<std::size_t>(ch) * n;
      double mg = 0.0, mgy = 0.0;
      for (int i = 0; i < n; ++i) {
        mg += g[off + i];
        mgy += g[off + i] * y[off + i];
      }
      mg /= n;
      mgy /= n;
      for (int i = 0; i < n; ++i) {
        (*gx)[off + i] += inv_std[ch] * (g[off + i] - mg - y[off + i] * mgy);
      }
    }
  });
}

Var channel_affine(const Var& x, const Var& gamma, const Var& beta) {
  const int c = x.value().ndim() >= 1 ? x.dim(0) : 0;
  if (gamma.size() != static_cast<std::size_t>(c) || beta.size() != static_cast<std::size_t>(c)) {
    throw ShapeError("channel_affine: " + std::to_string(c) + " channels but gamma " +
                     shape_str(gamma.shape()) + ", beta " + shape_str(beta.shape()));
  }
  const int n = spatial_size(x.shape());
  const Tensor& xv = x.value();
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor out(xv.shape());
  for (int ch = 0; ch < c; ++ch) {
    const std::size_t off = static_cast<std::size_t>(ch) * n;
    for (int i = 0; i < n; ++i) out[off + i] = gv[ch] * xv[off + i] + bv[ch];
  }
  return x.tape().record(std::move(out), {x, gamma, beta},
                         [x, gamma, beta, c, n](Tape& tape, const Tensor& g, const Tensor&) {
    const Tensor& xv = x.value();
    const Tensor& gv = gamma.value();
    Tensor* gx = tape.grad_sink(x);
    Tensor* gg = tape.grad_sink(gamma);
    Tensor* gb = tape.grad_sink(beta);
    for (int ch = 0; ch < c; ++ch) {
      const std::size_t off = static_cast<std::size_t>(ch) * n;
      double sg = 0.0, sgx = 0.0;
      for (int i = 0; i < n; ++i) {
        sg += g[off + i];
        sgx += g[off + i] * xv[off + i];
        if (gx) (*gx)[off + i] += gv[ch] * g[off + i];
      }
      if (gg) (*gg)[ch] += sgx;
      if (gb) (*gb)[ch] += sg;
    }
  });
}

Var adain(const Var& content, const Var& gamma, const Var& beta, double eps) {
  if (content.value().ndim() < 2 || gamma.size() != static_cast<std::size_t>(content.dim(0))) {
    throw ShapeError("adain channel mismatch: content " + shape_str(content.shape()) +
                     ", gamma " + shape_str(gamma.shape()));
  }
  return channel_affine(instance_norm(content, eps), gamma, beta);
}

Var reshape(const Var& x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [x](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    for (std::size_t i = 0; i < g.size(); ++i) (*gx)[i] += g[i];
  });
}

Var concat(const std::vector<Var>& xs, int axis) {
  if (xs.empty()) throw ShapeError("concat of an empty list");
  const Shape& first = xs.front().shape();
  Shape out_shape = first;
  split_axis(first, axis);
  out_shape[axis] = 0;
  for (const Var& x : xs) {
    const Shape& s = x.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) {
      if (static_cast<int>(d) != axis && s[d] != first[d]) ok = false;
    }
    if (!ok) {
      throw ShapeError("concat shape mismatch " + shape_str(first) + " vs " + shape_str(s) +
                       " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  const AxisSplit os = split_axis(out_shape, axis);
  Tensor out(out_shape);
  std::vector<int> offsets;
  int offset = 0;
  for (const Var& x : xs) {
    const AxisSplit s = split_axis(x.shape(), axis);
    const Tensor& xv = x.value();
    const std::size_t chunk = static_cast<std::size_t>(s.extent) * s.inner;
    for (int o = 0; o < s.outer; ++o) {
      std::copy_n(xv.data() + o * chunk, chunk,
                  out.data() + (static_cast<std::size_t>(o) * os.extent + offset) * os.inner);
    }
    offsets.push_back(offset);
    offset += s.extent;
  }
  return xs.front().tape().record(
      std::move(out), xs, [xs, axis, offsets, os](Tape& tape, const Tensor& g, const Tensor&) {
        for (std::size_t k = 0; k < xs.size(); ++k) {
          Tensor* gx = tape.grad_sink(xs[k]);
          if (!gx) continue;
          const AxisSplit s = split_axis(xs[k].shape(), axis);
          const std::size_t chunk = static_cast<std::size_t>(s.extent) * s.inner;
          for (int o = 0; o < s.outer; ++o) {
            const double* src =
                g.data() + (static_cast<std::size_t>(o) * os.extent + offsets[k]) * os.inner;
            double* dst = gx->data() + o * chunk;
            for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
          }
        }
      });
}

Var slice(const Var& x, int axis, int begin, int end) {
  const AxisSplit s = split_axis(x.shape(), axis);
  if (begin < 0 || end > s.extent || begin >= end) {
    throw ShapeError("slice [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of range for " + shape_str(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = end - begin;
  const int len = end - begin;
  Tensor out(out_shape);
  const Tensor& xv = x.value();
  const std::size_t chunk = static_cast<std::size_t>(len) * s.inner;
  for (int o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + (static_cast<std::size_t>(o) * s.extent + begin) * s.inner, chunk,
                out.data() + o * chunk);
  }
  return x.tape().record(std::move(out), {x},
                         [x, s, begin, chunk](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    for (int o = 0; o < s.outer; ++o) {
      double* dst = gx->data() + (static_cast<std::size_t>(o) * s.extent + begin) * s.inner;
      const double* src = g.data() + o * chunk;
      for (std::size_t i = 0; i < chunk; ++i) dst[i] += src[i];
    }
  });
}

Var concat_channels(const std::vector<Var>& xs) {
  for (const Var& x : xs) require_rank(x, 3, "concat_channels");
  return concat(xs, 0);
}

Var conv2d(const Var& x, const Var& w, const std::optional<Var>& bias, int stride) {
  const ConvGeometry geo = conv_geometry(x.shape(), w.shape(), stride);
  if (bias && bias->size() != static_cast<std::size_t>(geo.c_out)) {
    throw ShapeError("conv2d bias " + shape_str(bias->shape()) + " for " +
                     std::to_string(geo.c_out) + " output channels");
  }
  const int n_out = geo.h_out * geo.w_out;
  const int inner = geo.c_in * geo.k * geo.k;
  Tensor out({geo.c_out, geo.h_out, geo.w_out});
  const auto wm = as_mat(w.value(), geo.c_out, inner);
  if (is_pointwise(geo)) {
    as_mat(out, geo.c_out, n_out).noalias() = wm * as_mat(x.value(), inner, n_out);
  } else {
    Tensor col({inner, n_out});
    im2col(geo, x.value().data(), col.data());
    as_mat(out, geo.c_out, n_out).noalias() = wm * as_mat(col, inner, n_out);
  }
  if (bias) {
    const Tensor& bv = bias->value();
    for (int c = 0; c < geo.c_out; ++c) {
      double* row = out.data() + static_cast<std::size_t>(c) * n_out;
      for (int i = 0; i < n_out; ++i) row[i] += bv[c];
    }
  }
  std::vector<Var> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  return x.tape().record(std::move(out), inputs,
                         [x, w, bias, geo, n_out, inner](Tape& tape, const Tensor& g, const Tensor&) {
    const auto gm = as_mat(g, geo.c_out, n_out);
    Tensor* gx = tape.grad_sink(x);
    Tensor* gw = tape.grad_sink(w);
    if (is_pointwise(geo)) {
      if (gw) as_mat(*gw, geo.c_out, inner).noalias() += gm * as_mat(x.value(), inner, n_out).transpose();
      if (gx) as_mat(*gx, inner, n_out).noalias() += as_mat(w.value(), geo.c_out, inner).transpose() * gm;
    } else {
      if (gw) {
        Tensor col({inner, n_out});
        im2col(geo, x.value().data(), col.data());
        as_mat(*gw, geo.c_out, inner).noalias() += gm * as_mat(col, inner, n_out).transpose();
      }
      if (gx) {
        Tensor dcol({inner, n_out});
        as_mat(dcol, inner, n_out).noalias() = as_mat(w.value(), geo.c_out, inner).transpose() * gm;
        col2im_add(geo, dcol.data(), gx->data());
      }
    }
    if (bias) {
      if (Tensor* gb = tape.grad_sink(*bias)) {
        for (int c = 0; c < geo.c_out; ++c) {
          const double* row = g.data() + static_cast<std::size_t>(c) * n_out;
          double s = 0.0;
          for (int i = 0; i < n_out; ++i) s += row[i];
          (*gb)[c] += s;
        }
      }
    }
  });
}

Var upsample_nearest2x(const Var& x) {
  require_rank(x, 3, "upsample_nearest2x");
  const int c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const Tensor& xv = x.value();
  Tensor out({c, 2 * h, 2 * w});
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < 2 * h; ++i) {
      for (int j = 0; j < 2 * w; ++j) out.at(ch, i, j) = xv.at(ch, i / 2, j / 2);
    }
  }
  return x.tape().record(std::move(out), {x}, [x, c, h, w](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < 2 * h; ++i) {
        for (int j = 0; j < 2 * w; ++j) gx->at(ch, i / 2, j / 2) += g.at(ch, i, j);
      }
    }
  });
}

Var avg_pool2x(const Var& x) {
  require_rank(x, 3, "avg_pool2x");
  const int c = x.dim(0), h = x.dim(1) / 2, w = x.dim(2) / 2;
  if (h == 0 || w == 0) throw ShapeError("avg_pool2x input too small: " + shape_str(x.shape()));
  const Tensor& xv = x.value();
  Tensor out({c, h, w});
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < h; ++i) {
      for (int j = 0; j < w; ++j) {
        out.at(ch, i, j) = 0.25 * (xv.at(ch, 2 * i, 2 * j) + xv.at(ch, 2 * i, 2 * j + 1) +
                                   xv.at(ch, 2 * i + 1, 2 * j) + xv.at(ch, 2 * i + 1, 2 * j + 1));
      }
    }
  }
  return x.tape().record(std::move(out), {x}, [x, c, h, w](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
          const double q = 0.25 * g.at(ch, i, j);
          gx->at(ch, 2 * i, 2 * j) += q;
          gx->at(ch, 2 * i, 2 * j + 1) += q;
          gx->at(ch, 2 * i + 1, 2 * j) += q;
          gx->at(ch, 2 * i + 1, 2 * j + 1) += q;
        }
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  require_rank(x, 3, "global_avg_pool");
  const int c = x.dim(0);
  const int n = x.dim(1) * x.dim(2);
  const Tensor& xv = x.value();
  Tensor out({c});
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += xv[static_cast<std::size_t>(ch) * n + i];
    out[ch] = s / n;
  }
  return x.tape().record(std::move(out), {x}, [x, c, n](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < n; ++i) (*gx)[static_cast<std::size_t>(ch) * n + i] += g[ch] / n;
    }
  });
}

namespace {

// Source sample positions for one output axis: two taps and their weights.
struct Taps {
  std::vector<int> lo, hi;
  std::vector<double> w_hi;
};

Taps bilinear_taps(int in_size, int out_size, int origin) {
  Taps t;
  const double step = static_cast<double>(in_size) / out_size;
  for (int o = 0; o < out_size; ++o) {
    double src = (o + 0.5) * step - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in_size - 1);
    t.lo.push_back(origin + lo);
    t.hi.push_back(origin + hi);
    t.w_hi.push_back(src - lo);
  }
  return t;
}

}  // namespace

Var crop_resize(const Var& x, const CropBox& box, int out_h, int out_w) {
  require_rank(x, 3, "crop_resize");
  const int c = x.dim(0);
  if (box.height <= 0 || box.width <= 0 || box.top < 0 || box.left < 0 ||
      box.top + box.height > x.dim(1) || box.left + box.width > x.dim(2)) {
    throw ShapeError("crop box outside image " + shape_str(x.shape()));
  }
  const Taps rows = bilinear_taps(box.height, out_h, box.top);
  const Taps cols = bilinear_taps(box.width, out_w, box.left);
  const Tensor& xv = x.value();
  Tensor out({c, out_h, out_w});
  for (int ch = 0; ch < c; ++ch) {
    for (int i = 0; i < out_h; ++i) {
      const double wr = rows.w_hi[i];
      for (int j = 0; j < out_w; ++j) {
        const double wc = cols.w_hi[j];
        out.at(ch, i, j) = (1 - wr) * ((1 - wc) * xv.at(ch, rows.lo[i], cols.lo[j]) +
                                       wc * xv.at(ch, rows.lo[i], cols.hi[j])) +
                           wr * ((1 - wc) * xv.at(ch, rows.hi[i], cols.lo[j]) +
                                 wc * xv.at(ch, rows.hi[i], cols.hi[j]));
      }
    }
  }
  return x.tape().record(std::move(out), {x},
                         [x, c, rows, cols, out_h, out_w](Tape& tape, const Tensor& g, const Tensor&) {
    Tensor* gx = tape.grad_sink(x);
    if (!gx) return;
    for (int ch = 0; ch < c; ++ch) {
      for (int i = 0; i < out_h; ++i) {
        const double wr = rows.w_hi[i];
        for (int j = 0; j < out_w; ++j) {
          const double wc = cols.w_hi[j];
          const double gv = g.at(ch, i, j);
          gx->at(ch, rows.lo[i], cols.lo[j]) += (1 - wr) * (1 - wc) * gv;
          gx->at(ch, rows.lo[i], cols.hi[j]) += (1 - wr) * wc * gv;
          gx->at(ch, rows.hi[i], cols.lo[j]) += wr * (1 - wc) * gv;
          gx->at(ch, rows.hi[i], cols.hi[j]) += wr * wc * gv;
        }
      }
    }
  });
}

}  // namespace pdgan
