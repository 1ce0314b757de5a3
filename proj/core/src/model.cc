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

#include "fedledger/model.h"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "absl/strings/str_cat.h"
#include "fedledger/rng.h"

namespace fedledger {
namespace {

constexpr double kInitRange = 0.05;

struct Views {
  MlpShape shape;
  std::span<const double> w1;  // hidden x input
  std::span<const double> b1;
  std::span<const double> w2;  // classes x hidden
  std::span<const double> b2;
};

absl::StatusOr<Views> Validate(const ParameterVector& params,
                               const Batch& batch) {
  absl::StatusOr<MlpShape> shape = ShapeFromLayout(params.layout());
  if (!shape.ok()) return shape.status();
  if (batch.labels.empty() || batch.inputs.rows == 0) {
    return absl::InvalidArgumentError("empty batch");
  }
  if (batch.inputs.rows != batch.labels.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("batch has ", batch.inputs.rows, " rows but ",
                     batch.labels.size(), " labels"));
  }
  if (batch.inputs.cols != shape->input_dim) {
    return absl::FailedPreconditionError(
        absl::StrCat("batch input_dim ", batch.inputs.cols,
                     " does not match model input_dim ", shape->input_dim));
  }
  for (int32_t y : batch.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= shape->num_classes) {
      return absl::OutOfRangeError(absl::StrCat("label ", y, " outside [0, ",
                                                shape->num_classes, ")"));
    }
  }
  if (!params.AllFinite()) {
    return absl::InvalidArgumentError("parameters contain non-finite values");
  }
  for (double x : batch.inputs.data) {
    if (!std::isfinite(x)) {
      return absl::InvalidArgumentError("batch contains non-finite inputs");
    }
  }
  const auto& layers = params.layout().layers();
  std::span<const double> v = params.values();
  return Views{*shape, v.subspan(layers[0].offset, layers[0].length),
               v.subspan(layers[1].offset, layers[1].length),
               v.subspan(layers[2].offset, layers[2].length),
               v.subspan(layers[3].offset, layers[3].length)};
}

// Hidden activations and class probabilities for one sample.
void ForwardSample(const Views& m, std::span<const double> x,
                   std::span<double> hidden, std::span<double> probs) {
  const std::size_t in = m.shape.input_dim;
  const std::size_t hid = m.shape.hidden_units;
  const std::size_t out = m.shape.num_classes;
  for (std::size_t j = 0; j < hid; ++j) {
    double a = m.b1[j];
    const double* row = &m.w1[j * in];
    for (std::size_t i = 0; i < in; ++i) a += row[i] * x[i];
    hidden[j] = std::tanh(a);
  }
  double max_logit = -INFINITY;
  for (std::size_t c = 0; c < out; ++c) {
    double z = m.b2[c];
    const double* row = &m.w2[c * hid];
    for (std::size_t j = 0; j < hid; ++j) z += row[j] * hidden[j];
    probs[c] = z;
    max_logit = std::max(max_logit, z);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < out; ++c) {
    probs[c] = std::exp(probs[c] - max_logit);
    total += probs[c];
  }
  for (std::size_t c = 0; c < out; ++c) probs[c] /= total;
}

}  // namespace

absl::StatusOr<LayerLayout> LayerLayout::Create(
    const std::vector<std::pair<std::string, std::size_t>>& layers) {
  if (layers.empty()) {
    return absl::InvalidArgumentError("layout needs at least one layer");
  }
  LayerLayout layout;
  for (const auto& [name, length] : layers) {
    if (length == 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("layer '", name, "' has zero length"));
    }
    layout.layers_.push_back(Layer{name, layout.total_dim_, length});
    layout.total_dim_ += length;
  }
  return layout;
}

ParameterVector::ParameterVector()
    : layout_(std::make_shared<const LayerLayout>()) {}

ParameterVector ParameterVector::Zeros(LayoutPtr layout) {
  const std::size_t d = layout->total_dim();
  return ParameterVector(std::move(layout), std::vector<double>(d, 0.0));
}

absl::StatusOr<ParameterVector> ParameterVector::FromValues(
    LayoutPtr layout, std::vector<double> values) {
  if (layout == nullptr) return absl::InvalidArgumentError("null layout");
  if (values.size() != layout->total_dim()) {
    return absl::FailedPreconditionError(
        absl::StrCat("got ", values.size(), " values for a layout of dim ",
                     layout->total_dim()));
  }
  return ParameterVector(std::move(layout), std::move(values));
}

bool ParameterVector::SameLayout(const ParameterVector& other) const {
  return layout_ == other.layout_ || *layout_ == *other.layout_;
}

bool ParameterVector::AllFinite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double ParameterVector::L2Norm() const {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return std::sqrt(sum);
}

bool operator==(const ParameterVector& a, const ParameterVector& b) {
  if (!a.SameLayout(b)) return false;
  return std::memcmp(a.values_.data(), b.values_.data(),
                     a.values_.size() * sizeof(double)) == 0;
}

absl::StatusOr<LayoutPtr> MakeMlpLayout(const MlpShape& shape) {
  if (shape.input_dim == 0 || shape.hidden_units == 0 ||
      shape.num_classes < 2) {
    return absl::InvalidArgumentError(
        "MLP needs input_dim >= 1, hidden_units >= 1 and num_classes >= 2");
  }
  absl::StatusOr<LayerLayout> layout = LayerLayout::Create({
      {"hidden.weight", shape.hidden_units * shape.input_dim},
      {"hidden.bias", shape.hidden_units},
      {"output.weight", shape.num_classes * shape.hidden_units},
      {"output.bias", shape.num_classes},
  });
  if (!layout.ok()) return layout.status();
  return std::make_shared<const LayerLayout>(*std::move(layout));
}

absl::StatusOr<MlpShape> ShapeFromLayout(const LayerLayout& layout) {
  const auto& l = layout.layers();
  if (l.size() != 4 || l[0].name != "hidden.weight" ||
      l[1].name != "hidden.bias" || l[2].name != "output.weight" ||
      l[3].name != "output.bias") {
    return absl::FailedPreconditionError("layout is not an MLP layout");
  }
  MlpShape shape;
  shape.hidden_units = l[1].length;
  shape.num_classes = l[3].length;
  shape.input_dim = l[0].length / shape.hidden_units;
  if (shape.input_dim * shape.hidden_units != l[0].length ||
      shape.num_classes * shape.hidden_units != l[2].length) {
    return absl::FailedPreconditionError("inconsistent MLP layer sizes");
  }
  return shape;
}

ParameterVector InitializeParameters(LayoutPtr layout, uint64_t seed) {
  ParameterVector params = ParameterVector::Zeros(std::move(layout));
  RngStream rng(seed, 0, 0, StreamPurpose::kInit);
  for (double& v : params.mutable_values()) {
    v = (2.0 * rng.Uniform() - 1.0) * kInitRange;
  }
  return params;
}

absl::StatusOr<Matrix> Forward(const ParameterVector& params,
                               const Batch& batch) {
  absl::StatusOr<Views> m = Validate(params, batch);
  if (!m.ok()) return m.status();
  Matrix probs(batch.inputs.rows, m->shape.num_classes);
  std::vector<double> hidden(m->shape.hidden_units);
  for (std::size_t r = 0; r < batch.inputs.rows; ++r) {
    ForwardSample(*m, batch.inputs.Row(r), hidden, probs.MutableRow(r));
  }
  return probs;
}

absl::StatusOr<double> Loss(const ParameterVector& params, const Batch& batch) {
  absl::StatusOr<Matrix> probs = Forward(params, batch);
  if (!probs.ok()) return probs.status();
  double total = 0.0;
  for (std::size_t r = 0; r < probs->rows; ++r) {
    total -= std::log(std::max((*probs)(r, batch.labels[r]), kProbabilityFloor));
  }
  return total / static_cast<double>(probs->rows);
}

absl::StatusOr<std::pair<double, ParameterVector>> LossAndGradient(
    const ParameterVector& params, const Batch& batch) {
  absl::StatusOr<Views> m = Validate(params, batch);
  if (!m.ok()) return m.status();
  const std::size_t in = m->shape.input_dim;
  const std::size_t hid = m->shape.hidden_units;
  const std::size_t out = m->shape.num_classes;
  const std::size_t n = batch.inputs.rows;
  const double inv_n = 1.0 / static_cast<double>(n);

  ParameterVector grad = ParameterVector::Zeros(params.layout_ptr());
  const auto& layers = params.layout().layers();
  std::span<double> g = grad.mutable_values();
  double* gw1 = &g[layers[0].offset];
  double* gb1 = &g[layers[1].offset];
  double* gw2 = &g[layers[2].offset];
  double* gb2 = &g[layers[3].offset];

  std::vector<double> hidden(hid);
  std::vector<double> probs(out);
  std::vector<double> dlogit(out);
  std::vector<double> dpre(hid);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    std::span<const double> x = batch.inputs.Row(r);
    ForwardSample(*m, x, hidden, probs);
    const std::size_t y = static_cast<std::size_t>(batch.labels[r]);
    if (probs[y] < kProbabilityFloor) {
      // The floored term is constant in the parameters.
      total -= std::log(kProbabilityFloor);
      continue;
    }
    total -= std::log(probs[y]);
    for (std::size_t c = 0; c < out; ++c) {
      dlogit[c] = (probs[c] - (c == y ? 1.0 : 0.0)) * inv_n;
    }
    std::fill(dpre.begin(), dpre.end(), 0.0);
    for (std::size_t c = 0; c < out; ++c) {
      const double dz = dlogit[c];
      gb2[c] += dz;
      double* grow = gw2 + c * hid;
      const double* wrow = &m->w2[c * hid];
      for (std::size_t j = 0; j < hid; ++j) {
        grow[j] += dz * hidden[j];
        dpre[j] += dz * wrow[j];
      }
    }
    for (std::size_t j = 0; j < hid; ++j) {
      const double da = dpre[j] * (1.0 - hidden[j] * hidden[j]);
      gb1[j] += da;
      double* grow = gw1 + j * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += da * x[i];
    }
  }
  return std::make_pair(total * inv_n, std::move(grad));
}

absl::StatusOr<ParameterVector> Gradient(const ParameterVector& params,
                                         const Batch& batch) {
  auto result = LossAndGradient(params, batch);
  if (!result.ok()) return result.status();
  return std::move(result->second);
}

absl::StatusOr<double> Accuracy(const ParameterVector& params,
                                const Batch& batch) {
  absl::StatusOr<Matrix> probs = Forward(params, batch);
  if (!probs.ok()) return probs.status();
  std::size_t correct = 0;
  for (std::size_t r = 0; r < probs->rows; ++r) {
    std::span<const double> row = probs->Row(r);
    // max_element returns the first maximum, i.e. the lowest class index.
    const auto best = std::max_element(row.begin(), row.end()) - row.begin();
    if (best == batch.labels[r]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs->rows);
}

}  // namespace fedledger
