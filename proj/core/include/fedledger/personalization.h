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

#ifndef FEDLEDGER_PERSONALIZATION_H_
#define FEDLEDGER_PERSONALIZATION_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/statusor.h"
#include "fedledger/model.h"

namespace fedledger {

// Per-layer shares of the Fisher trace. Shares are non-negative and sum to 1.
struct ImportanceProfile {
  LayoutPtr layout;
  std::vector<std::pair<std::string, double>> per_layer;
};

// Layer-granular selector: bit j is 1 when coordinate j stays personalized
// (kept from the client's previous local model), 0 when it is shared.
class PersonalizationMask {
 public:
  static PersonalizationMask AllShared(LayoutPtr layout);
  static PersonalizationMask AllPersonalized(LayoutPtr layout);
  // One flag per layer of `layout`.
  static absl::StatusOr<PersonalizationMask> FromLayerFlags(
      LayoutPtr layout, const std::vector<bool>& personalized, double tau);

  const LayerLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::span<const uint8_t> bits() const { return bits_; }
  bool personalized(std::size_t j) const { return bits_[j] != 0; }
  bool layer_personalized(std::size_t layer) const {
    return layer_flags_[layer];
  }
  const std::vector<bool>& layer_flags() const { return layer_flags_; }
  double tau() const { return tau_; }
  std::size_t num_personalized() const;

 private:
  PersonalizationMask(LayoutPtr layout, std::vector<bool> flags, double tau);

  LayoutPtr layout_;
  std::vector<bool> layer_flags_;
  std::vector<uint8_t> bits_;
  double tau_ = 0.0;
};

// Empirical diagonal Fisher information: entry j is the mean over samples of
// (d log p(y_i | x_i, w) / d w_j)^2, using the observed labels.
absl::StatusOr<std::vector<double>> FisherDiagonal(const ParameterVector& params,
                                                   const Batch& shard);

// Share of the Fisher trace that falls in each layer.
absl::StatusOr<ImportanceProfile> LayerImportance(std::span<const double> fisher,
                                                  LayoutPtr layout);

// A layer is personalized iff its share is >= tau.
absl::StatusOr<PersonalizationMask> BuildMask(const ImportanceProfile& profile,
                                              double tau);

// Masked coordinates come from prev_local, the rest from global.
absl::StatusOr<ParameterVector> MergeModels(const ParameterVector& prev_local,
                                            const ParameterVector& global,
                                            const PersonalizationMask& mask);

}  // namespace fedledger

#endif  // FEDLEDGER_PERSONALIZATION_H_
