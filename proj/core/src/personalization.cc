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

#include "fedledger/personalization.h"

#include <algorithm>
#include <cmath>

#include "absl/strings/str_cat.h"

namespace fedledger {

PersonalizationMask::PersonalizationMask(LayoutPtr layout,
                                         std::vector<bool> flags, double tau)
    : layout_(std::move(layout)), layer_flags_(std::move(flags)), tau_(tau) {
  bits_.assign(layout_->total_dim(), 0);
  const auto& layers = layout_->layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (!layer_flags_[l]) continue;
    std::fill_n(bits_.begin() + static_cast<std::ptrdiff_t>(layers[l].offset),
                layers[l].length, uint8_t{1});
  }
}

PersonalizationMask PersonalizationMask::AllShared(LayoutPtr layout) {
  const std::size_t n = layout->num_layers();
  return PersonalizationMask(std::move(layout), std::vector<bool>(n, false),
                             1.0);
}

PersonalizationMask PersonalizationMask::AllPersonalized(LayoutPtr layout) {
  const std::size_t n = layout->num_layers();
  return PersonalizationMask(std::move(layout), std::vector<bool>(n, true),
                             0.0);
}

absl::StatusOr<PersonalizationMask> PersonalizationMask::FromLayerFlags(
    LayoutPtr layout, const std::vector<bool>& personalized, double tau) {
  if (layout == nullptr) return absl::InvalidArgumentError("null layout");
  if (personalized.size() != layout->num_layers()) {
    return absl::FailedPreconditionError(
        absl::StrCat("expected ", layout->num_layers(), " layer flags, got ",
                     personalized.size()));
  }
  return PersonalizationMask(std::move(layout), personalized, tau);
}

std::size_t PersonalizationMask::num_personalized() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

absl::StatusOr<std::vector<double>> FisherDiagonal(const ParameterVector& params,
                                                   const Batch& shard) {
  const std::size_t n = shard.labels.size();
  if (n == 0 || shard.inputs.rows == 0) {
    return absl::InvalidArgumentError("Fisher estimate needs a non-empty shard");
  }
  if (shard.inputs.rows != n) {
    return absl::InvalidArgumentError("shard rows and labels disagree");
  }
  std::vector<double> fisher(params.size(), 0.0);
  Batch one;
  one.inputs = Matrix(1, shard.inputs.cols);
  one.labels.resize(1);
  for (std::size_t i = 0; i < n; ++i) {
    std::span<const double> row = shard.inputs.Row(i);
    std::copy(row.begin(), row.end(), one.inputs.data.begin());
    one.labels[0] = shard.labels[i];
    // Gradient of the single-sample loss is -d log p(y|x,w); its square is
    // the same.
    absl::StatusOr<ParameterVector> g = Gradient(params, one);
    if (!g.ok()) return g.status();
    std::span<const double> gv = g->values();
    for (std::size_t j = 0; j < fisher.size(); ++j) fisher[j] += gv[j] * gv[j];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (double& f : fisher) f *= inv_n;
  return fisher;
}

absl::StatusOr<ImportanceProfile> LayerImportance(std::span<const double> fisher,
                                                  LayoutPtr layout) {
  if (layout == nullptr) return absl::InvalidArgumentError("null layout");
  if (fisher.size() != layout->total_dim()) {
    return absl::FailedPreconditionError(
        absl::StrCat("fisher has ", fisher.size(), " entries, layout has ",
                     layout->total_dim()));
  }
  std::vector<double> per_layer;
  double total = 0.0;
  for (const Layer& layer : layout->layers()) {
    double sum = 0.0;
    for (std::size_t j = layer.offset; j < layer.offset + layer.length; ++j) {
      if (!(fisher[j] >= 0.0) || !std::isfinite(fisher[j])) {
        return absl::InvalidArgumentError(
            "fisher entries must be finite and non-negative");
      }
      sum += fisher[j];
    }
    per_layer.push_back(sum);
    total += sum;
  }
  if (!(total > 0.0)) {
    return absl::FailedPreconditionError(
        "degenerate model: Fisher information is zero everywhere");
  }
  ImportanceProfile profile;
  profile.layout = layout;
  for (std::size_t l = 0; l < per_layer.size(); ++l) {
    profile.per_layer.emplace_back(layout->layers()[l].name,
                                   per_layer[l] / total);
  }
  return profile;
}

absl::StatusOr<PersonalizationMask> BuildMask(const ImportanceProfile& profile,
                                              double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    return absl::InvalidArgumentError("tau must be in (0, 1)");
  }
  std::vector<bool> flags;
  flags.reserve(profile.per_layer.size());
  for (const auto& [name, share] : profile.per_layer) {
    flags.push_back(share >= tau);
  }
  return PersonalizationMask::FromLayerFlags(profile.layout, flags, tau);
}

absl::StatusOr<ParameterVector> MergeModels(const ParameterVector& prev_local,
                                            const ParameterVector& global,
                                            const PersonalizationMask& mask) {
  if (!prev_local.SameLayout(global) ||
      !(prev_local.layout() == mask.layout())) {
    return absl::FailedPreconditionError("layout mismatch in MergeModels");
  }
  ParameterVector merged = global;
  std::span<double> out = merged.mutable_values();
  std::span<const double> local = prev_local.values();
  std::span<const uint8_t> bits = mask.bits();
  for (std::size_t j = 0; j < out.size(); ++j) {
    if (bits[j]) out[j] = local[j];
  }
  return merged;
}

}  // namespace fedledger
