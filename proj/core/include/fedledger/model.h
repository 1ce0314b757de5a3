//
// Copyright 2026 The fedledger Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef FEDLEDGER_MODEL_H_
#define FEDLEDGER_MODEL_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace fedledger {

// Lower bound applied to probabilities inside log(); keeps the loss finite.
inline constexpr double kProbabilityFloor = 1e-12;

struct Layer {
  std::string name;
  std::size_t offset = 0;
  std::size_t length = 0;

  friend bool operator==(const Layer&, const Layer&) = default;
};

// Named, contiguous partition of a flat parameter vector.
class LayerLayout {
 public:
  // Empty layout with no layers.
  LayerLayout() = default;

  // Layers are laid out in the given order starting at offset 0. Every
  // length must be positive.
  static absl::StatusOr<LayerLayout> Create(
      const std::vector<std::pair<std::string, std::size_t>>& layers);

  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t total_dim() const { return total_dim_; }
  std::size_t num_layers() const { return layers_.size(); }

  friend bool operator==(const LayerLayout&, const LayerLayout&) = default;

 private:
  std::vector<Layer> layers_;
  std::size_t total_dim_ = 0;
};

using LayoutPtr = std::shared_ptr<const LayerLayout>;

// Flat model parameters (or an update / gradient) tied to a layout.
class ParameterVector {
 public:
  // Zero-length vector over an empty layout.
  ParameterVector();

  static ParameterVector Zeros(LayoutPtr layout);
  static absl::StatusOr<ParameterVector> FromValues(LayoutPtr layout,
                                                    std::vector<double> values);

  const LayerLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::span<const double> values() const { return values_; }
  std::span<double> mutable_values() { return values_; }
  std::size_t size() const { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  // Layouts compare by value, so vectors built from equal layouts match.
  bool SameLayout(const ParameterVector& other) const;
  bool AllFinite() const;
  double L2Norm() const;

  // Bit-level equality of values and layout.
  friend bool operator==(const ParameterVector& a, const ParameterVector& b);

 private:
  ParameterVector(LayoutPtr layout, std::vector<double> values)
      : layout_(std::move(layout)), values_(std::move(values)) {}

  LayoutPtr layout_;
  std::vector<double> values_;
};

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  std::span<const double> Row(std::size_t r) const {
    return std::span<const double>(data).subspan(r * cols, cols);
  }
  std::span<double> MutableRow(std::size_t r) {
    return std::span<double>(data).subspan(r * cols, cols);
  }
};

struct Batch {
  Matrix inputs;                // n x input_dim
  std::vector<int32_t> labels;  // n entries in [0, num_classes)
};

// input_dim -> hidden (tanh) -> num_classes (softmax).
struct MlpShape {
  std::size_t input_dim = 0;
  std::size_t hidden_units = 32;
  std::size_t num_classes = 0;

  friend bool operator==(const MlpShape&, const MlpShape&) = default;
};

// Layer names, in order: hidden.weight (hidden x input), hidden.bias,
// output.weight (classes x hidden), output.bias.
absl::StatusOr<LayoutPtr> MakeMlpLayout(const MlpShape& shape);
absl::StatusOr<MlpShape> ShapeFromLayout(const LayerLayout& layout);

// Uniform in [-0.05, 0.05] drawn from the experiment seed.
ParameterVector InitializeParameters(LayoutPtr layout, uint64_t seed);

// Softmax probabilities, one row per sample.
absl::StatusOr<Matrix> Forward(const ParameterVector& params,
                               const Batch& batch);

// Mean cross-entropy with probabilities floored at kProbabilityFloor.
absl::StatusOr<double> Loss(const ParameterVector& params, const Batch& batch);

// Exact gradient of Loss().
absl::StatusOr<ParameterVector> Gradient(const ParameterVector& params,
                                         const Batch& batch);

// Loss and gradient from one forward/backward pass.
absl::StatusOr<std::pair<double, ParameterVector>> LossAndGradient(
    const ParameterVector& params, const Batch& batch);

// Fraction of rows whose argmax (lowest index on ties) equals the label.
absl::StatusOr<double> Accuracy(const ParameterVector& params,
                                const Batch& batch);

}  // namespace fedledger

#endif  // FEDLEDGER_MODEL_H_
