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

#ifndef FEDLEDGER_TESTS_FEDAVG_ORACLE_H_
#define FEDLEDGER_TESTS_FEDAVG_ORACLE_H_

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "fedledger/data.h"
#include "fedledger/federation.h"
#include "fedledger/model.h"
#include "fedledger/rng.h"

namespace fedledger::testing {

// Centralized FedAvg without privacy or personalization: every client trains
// from the current global model, updates are averaged, the average is added.
// Shuffling follows the same per-client streams as the protocol.
inline std::vector<double> FedAvgOracle(const Dataset& train,
                                        const ClientPartition& partition,
                                        const TrainingConfig& config) {
  LayoutPtr layout =
      *MakeMlpLayout({train.input_dim(), config.hidden_units, train.num_classes});
  ParameterVector global = InitializeParameters(layout, config.seed);
  const std::size_t k_count = partition.num_clients();
  std::vector<double> weights(k_count, 1.0 / static_cast<double>(k_count));
  if (config.aggregation == Aggregation::kWeighted) {
    for (std::size_t k = 0; k < k_count; ++k) {
      weights[k] = static_cast<double>(partition.shard_size(k)) /
                   static_cast<double>(partition.total_size());
    }
  }
  for (uint32_t round = 1; round <= config.global_rounds; ++round) {
    std::vector<double> delta(global.size(), 0.0);
    for (std::size_t k = 0; k < k_count; ++k) {
      ParameterVector w = global;
      std::vector<std::size_t> order = partition.shards[k];
      const RngStream base(config.seed, k, round, StreamPurpose::kShuffle);
      for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
        RngStream rng = base.Fork(epoch);
        Shuffle(order, rng);
        for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
          const std::size_t n = std::min(config.batch_size, order.size() - b);
          ParameterVector g =
              *Gradient(w, train.Gather(std::span<const std::size_t>(order).subspan(b, n)));
          for (std::size_t j = 0; j < w.size(); ++j) {
            w[j] -= config.learning_rate * (g[j] + config.lambda2 * (w[j] - global[j]));
          }
        }
      }
      for (std::size_t j = 0; j < w.size(); ++j) delta[j] += weights[k] * (w[j] - global[j]);
    }
    for (std::size_t j = 0; j < global.size(); ++j) global[j] += delta[j];
  }
  return {global.values().begin(), global.values().end()};
}

// Single-model SGD over the whole shard for rounds * epochs epochs, with no
// per-round re-anchoring.
inline std::vector<double> CentralizedSgd(const Dataset& train,
                                          std::span<const std::size_t> rows,
                                          const TrainingConfig& config) {
  LayoutPtr layout =
      *MakeMlpLayout({train.input_dim(), config.hidden_units, train.num_classes});
  ParameterVector w = InitializeParameters(layout, config.seed);
  for (uint32_t round = 1; round <= config.global_rounds; ++round) {
    std::vector<std::size_t> order(rows.begin(), rows.end());
    const RngStream base(config.seed, 0, round, StreamPurpose::kShuffle);
    for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
      RngStream rng = base.Fork(epoch);
      Shuffle(order, rng);
      for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
        const std::size_t n = std::min(config.batch_size, order.size() - b);
        ParameterVector g =
            *Gradient(w, train.Gather(std::span<const std::size_t>(order).subspan(b, n)));
        for (std::size_t j = 0; j < w.size(); ++j) w[j] -= config.learning_rate * g[j];
      }
    }
  }
  return {w.values().begin(), w.values().end()};
}

}  // namespace fedledger::testing

#endif  // FEDLEDGER_TESTS_FEDAVG_ORACLE_H_
