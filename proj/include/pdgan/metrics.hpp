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

#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pdgan/losses.hpp"
#include "pdgan/tensor.hpp"

namespace pdgan::metrics {

/// 10·log10(max²/MSE); +infinity when the images are identical.
double psnr(const Tensor& a, const Tensor& b, double max_val = 1.0);

struct GaussianStats {
  Tensor mean;  // F
  Tensor cov;   // F×F, unbiased
  int count = 0;
};

/// features: n×F, n ≥ 2.
GaussianStats fit_gaussian(const Tensor& features);

struct SymmetricEigen {
  Tensor values;   // n
  Tensor vectors;  // n×n, column k pairs with values[k]
};

/// Cyclic Jacobi rotations on a symmetric matrix.
SymmetricEigen jacobi_eigen(const Tensor& a, int max_sweeps = 100);

/// Principal square root of a symmetric PSD matrix; eigenvalues below zero
/// are clamped. Throws NumericError when asymmetry exceeds 1e-8 (relative
/// to the largest entry).
Tensor matrix_sqrt_psd(const Tensor& a);

/// ‖μ1−μ2‖² + Tr(Σ1 + Σ2 − 2·sqrt(Σ1^½ Σ2 Σ1^½)).
double fid(const GaussianStats& s1, const GaussianStats& s2);

/// Sum over frozen-net stages of the mean squared difference between
/// per-position unit-normalized feature vectors.
double perceptual_distance(const Tensor& a, const Tensor& b, const losses::FrozenFeatureNet& net);

struct MetricReport {
  std::vector<std::string> stems;
  std::vector<double> psnr;
  std::vector<double> perceptual;
  double psnr_mean = 0.0;
  double perceptual_mean = 0.0;
  std::optional<double> fid;
  std::string fid_note;  // why FID is absent
  std::string backbone;
  std::string dataset;
  std::string config_hash;
};

struct ImagePair {
  std::string stem;
  Tensor generated;
  Tensor truth;
};

/// Per-pair PSNR and perceptual distance, and FID between the stage-4
/// pooled features of the generated and truth sets (omitted below two pairs).
MetricReport evaluate_set(const std::vector<ImagePair>& pairs, const losses::FrozenFeatureNet& net);

/// Stage-4 features, globally average-pooled.
Tensor pooled_features(const Tensor& image, const losses::FrozenFeatureNet& net);

}  // namespace pdgan::metrics
