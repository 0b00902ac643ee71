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

#include "pdgan/metrics.hpp"

#include <cmath>
#include <limits>

#include "pdgan/errors.hpp"

namespace pdgan::metrics {
namespace {

void require_square(const Tensor& a, const char* what) {
  if (a.ndim() != 2 || a.dim(0) != a.dim(1)) {
    throw ShapeError(std::string(what) + " expects a square matrix, got " + shape_str(a.shape()));
  }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  const int n = a.dim(0), k = a.dim(1), m = b.dim(1);
  Tensor out({n, m});
  for (int i = 0; i < n; ++i)
    for (int t = 0; t < k; ++t) {
      const double av = a.at(i, t);
      for (int j = 0; j < m; ++j) out.at(i, j) += av * b.at(t, j);
    }
  return out;
}

double trace(const Tensor& a) {
  double t = 0.0;
  for (int i = 0; i < a.dim(0); ++i) t += a.at(i, i);
  return t;
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b, double max_val) {
  if (!a.same_shape(b)) {
    throw ShapeError("psnr: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (!(max_val > 0.0)) throw UsageError("psnr max_val must be positive");
  double se = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_val * max_val / mse);
}

GaussianStats fit_gaussian(const Tensor& features) {
  if (features.ndim() != 2) throw ShapeError("fit_gaussian expects n×F features");
  const int n = features.dim(0), f = features.dim(1);
  if (n < 2) {
    throw DataError("fit_gaussian needs at least 2 samples for an unbiased covariance, got " +
                    std::to_string(n));
  }
  GaussianStats s;
  s.count = n;
  s.mean = Tensor({f});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < f; ++j) s.mean[j] += features.at(i, j);
  for (int j = 0; j < f; ++j) s.mean[j] /= n;
  s.cov = Tensor({f, f});
  for (int i = 0; i < n; ++i)
    for (int a = 0; a < f; ++a) {
      const double da = features.at(i, a) - s.mean[a];
      for (int b = a; b < f; ++b) s.cov.at(a, b) += da * (features.at(i, b) - s.mean[b]);
    }
  for (int a = 0; a < f; ++a)
    for (int b = a; b < f; ++b) {
      s.cov.at(a, b) /= (n - 1);
      s.cov.at(b, a) = s.cov.at(a, b);
    }
  return s;
}

SymmetricEigen jacobi_eigen(const Tensor& input, int max_sweeps) {
  require_square(input, "jacobi_eigen");
  const int n = input.dim(0);
  Tensor a = input;
  Tensor v({n, n});
  for (int i = 0; i < n; ++i) v.at(i, i) = 1.0;

  double scale = 0.0;
  for (double x : a.values()) scale = std::max(scale, std::abs(x));
  const double tol = 1e-15 * std::max(scale, 1e-300);

  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(a.at(p, q)));
    if (off <= tol) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a.at(p, q);
        if (std::abs(apq) <= tol * 1e-3) continue;
        // Rotation angle zeroing a(p,q), in the stable tangent form.
        const double theta = (a.at(q, q) - a.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a.at(k, p), akq = a.at(k, q);
          a.at(k, p) = c * akp - s * akq;
          a.at(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a.at(p, k), aqk = a.at(q, k);
          a.at(p, k) = c * apk - s * aqk;
          a.at(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v.at(k, p), vkq = v.at(k, q);
          v.at(k, p) = c * vkp - s * vkq;
          v.at(k, q) = s * vkp + c * vkq;
        }
      }
  }
  SymmetricEigen out{Tensor({n}), std::move(v)};
  for (int i = 0; i < n; ++i) out.values[i] = a.at(i, i);
  return out;
}

Tensor matrix_sqrt_psd(const Tensor& a) {
  require_square(a, "matrix_sqrt_psd");
  const int n = a.dim(0);
  double scale = 0.0, asym = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      scale = std::max(scale, std::abs(a.at(i, j)));
      asym = std::max(asym, std::abs(a.at(i, j) - a.at(j, i)));
    }
  if (asym > 1e-8 * std::max(scale, 1.0)) {
    throw NumericError("matrix_sqrt_psd: input is not symmetric (max |a_ij - a_ji| = " +
                       std::to_string(asym) + ")");
  }
  SymmetricEigen e = jacobi_eigen(a);
  Tensor out({n, n});
  for (int k = 0; k < n; ++k) {
    const double r = std::sqrt(std::max(0.0, e.values[k]));
    if (r == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double vi = e.vectors.at(i, k) * r;
      for (int j = 0; j < n; ++j) out.at(i, j) += vi * e.vectors.at(j, k);
    }
  }
  // Exact symmetry for downstream products.
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) out.at(i, j) = out.at(j, i) = 0.5 * (out.at(i, j) + out.at(j, i));
  return out;
}

double fid(const GaussianStats& s1, const GaussianStats& s2) {
  if (s1.mean.size() != s2.mean.size() || !s1.cov.same_shape(s2.cov)) {
    throw ShapeError("fid: feature dimensions differ (" + std::to_string(s1.mean.size()) + " vs " +
                     std::to_string(s2.mean.size()) + ")");
  }
  double dmu = 0.0;
  for (std::size_t i = 0; i < s1.mean.size(); ++i) {
    dmu += (s1.mean[i] - s2.mean[i]) * (s1.mean[i] - s2.mean[i]);
  }
  const Tensor r1 = matrix_sqrt_psd(s1.cov);
  Tensor inner = matmul(matmul(r1, s2.cov), r1);
  const int n = inner.dim(0);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      inner.at(i, j) = inner.at(j, i) = 0.5 * (inner.at(i, j) + inner.at(j, i));
  const double cross = trace(matrix_sqrt_psd(inner));
  return dmu + trace(s1.cov) + trace(s2.cov) - 2.0 * cross;
}

double perceptual_distance(const Tensor& a, const Tensor& b, const losses::FrozenFeatureNet& net) {
  if (!a.same_shape(b)) {
    throw ShapeError("perceptual_distance: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  const std::vector<Tensor> fa = net.features(a), fb = net.features(b);
  double total = 0.0;
  for (std::size_t s = 0; s < fa.size(); ++s) {
    const int c = fa[s].dim(0), hw = fa[s].dim(1) * fa[s].dim(2);
    double acc = 0.0;
    for (int p = 0; p < hw; ++p) {
      double na = 0.0, nb = 0.0;
      for (int k = 0; k < c; ++k) {
        na += fa[s][k * hw + p] * fa[s][k * hw + p];
        nb += fb[s][k * hw + p] * fb[s][k * hw + p];
      }
      // All-zero positions (possible after ReLU) stay zero.
      const double ia = na > 0.0 ? 1.0 / std::sqrt(na) : 0.0;
      const double ib = nb > 0.0 ? 1.0 / std::sqrt(nb) : 0.0;
      for (int k = 0; k < c; ++k) {
        const double d = fa[s][k * hw + p] * ia - fb[s][k * hw + p] * ib;
        acc += d * d;
      }
    }
    total += acc / (static_cast<double>(c) * hw);
  }
  return total;
}

Tensor pooled_features(const Tensor& image, const losses::FrozenFeatureNet& net) {
  const Tensor last = net.features(image).back();
  const int c = last.dim(0), hw = last.dim(1) * last.dim(2);
  Tensor out({c});
  for (int k = 0; k < c; ++k) {
    double acc = 0.0;
    for (int p = 0; p < hw; ++p) acc += last[k * hw + p];
    out[k] = acc / hw;
  }
  return out;
}

MetricReport evaluate_set(const std::vector<ImagePair>& pairs, const losses::FrozenFeatureNet& net) {
  if (pairs.empty()) throw DataError("evaluate_set: no image pairs");
  MetricReport r;
  r.backbone = "frozen-feature-net(seed=" + std::to_string(net.seed()) + ")";
  const int n = static_cast<int>(pairs.size());
  Tensor gen_feats, truth_feats;
  for (int i = 0; i < n; ++i) {
    const ImagePair& p = pairs[i];
    r.stems.push_back(p.stem);
    r.psnr.push_back(psnr(p.generated, p.truth));
    r.perceptual.push_back(perceptual_distance(p.generated, p.truth, net));
    const Tensor fg = pooled_features(p.generated, net), ft = pooled_features(p.truth, net);
    if (i == 0) {
      gen_feats = Tensor({n, static_cast<int>(fg.size())});
      truth_feats = Tensor({n, static_cast<int>(ft.size())});
    }
    std::copy(fg.data(), fg.data() + fg.size(), gen_feats.data() + i * fg.size());
    std::copy(ft.data(), ft.data() + ft.size(), truth_feats.data() + i * ft.size());
  }
  for (int i = 0; i < n; ++i) {
    r.psnr_mean += r.psnr[i];
    r.perceptual_mean += r.perceptual[i];
  }
  r.psnr_mean /= n;
  r.perceptual_mean /= n;
  if (n < 2) {
    r.fid_note = "FID needs at least 2 pairs for an unbiased covariance; got " + std::to_string(n);
  } else {
    r.fid = fid(fit_gaussian(gen_feats), fit_gaussian(truth_feats));
  }
  return r;
}

}  // namespace pdgan::metrics
