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

#ifndef FEDLEDGER_DATA_H_
#define FEDLEDGER_DATA_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "fedledger/model.h"

namespace fedledger {

struct Dataset {
  Matrix inputs;
  std::vector<int32_t> labels;
  std::size_t num_classes = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t input_dim() const { return inputs.cols; }

  // Copies the given rows into a batch, in order.
  Batch Gather(std::span<const std::size_t> indices) const;
  Batch AsBatch() const;
  Dataset Subset(std::span<const std::size_t> indices) const;
};

// K disjoint shards of row indices into one dataset.
struct ClientPartition {
  std::vector<std::vector<std::size_t>> shards;

  std::size_t num_clients() const { return shards.size(); }
  std::size_t shard_size(std::size_t k) const { return shards[k].size(); }
  std::size_t total_size() const;
};

// Gaussian class clusters in input_dim dimensions with unit within-class
// variance. Each class mean is a random direction scaled so that the expected
// distance between two means equals class_separation. Labels are balanced
// (counts differ by at most one) and shuffled.
absl::StatusOr<Dataset> GenerateSynthetic(std::size_t num_samples,
                                          std::size_t num_classes,
                                          std::size_t input_dim,
                                          double class_separation,
                                          uint64_t seed);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

// Seeded shuffle, then the first `train_fraction` of rows become train.
absl::StatusOr<TrainTestSplit> SplitTrainTest(const Dataset& dataset,
                                              double train_fraction,
                                              uint64_t seed);

// Label-skewed shards: every class is split across clients with
// Dirichlet(beta) proportions. Empty shards are then topped up with one
// sample each from the largest shard.
absl::StatusOr<ClientPartition> Partition(const Dataset& dataset,
                                          std::size_t num_clients,
                                          double dirichlet_beta, uint64_t seed);

// CSV with header "f0,...,f{m-1},label". When num_classes is given, labels
// outside [0, num_classes) are rejected; otherwise num_classes = max label + 1.
absl::StatusOr<Dataset> LoadCsv(const std::string& path,
                                std::optional<std::size_t> num_classes = {});
absl::Status WriteCsv(const Dataset& dataset, const std::string& path);

}  // namespace fedledger

#endif  // FEDLEDGER_DATA_H_
