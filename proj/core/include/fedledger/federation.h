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

#ifndef FEDLEDGER_FEDERATION_H_
#define FEDLEDGER_FEDERATION_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedledger/cas.h"
#include "fedledger/data.h"
#include "fedledger/ledger.h"
#include "fedledger/model.h"
#include "fedledger/personalization.h"
#include "fedledger/privacy.h"

namespace fedledger {

enum class Aggregation {
  kUniform,   // 1/K per client
  kWeighted,  // n_k / n
};

struct TrainingConfig {
  std::size_t global_rounds = 15;
  std::size_t local_epochs = 3;
  double learning_rate = 1e-3;
  // Proximal weights: personalized coordinates are pulled towards the
  // client's previous values, shared ones towards the received global model.
  double lambda1 = 0.05;
  double lambda2 = 0.05;
  double tau = 0.1;
  std::size_t batch_size = 32;
  std::size_t hidden_units = 32;
  // Shard samples used for the Fisher estimate each round.
  std::size_t fisher_samples = 256;
  Aggregation aggregation = Aggregation::kUniform;
  uint64_t seed = 0;

  absl::Status Validate() const;
};

struct ClientState {
  uint32_t id = 0;
  std::vector<std::size_t> shard;  // rows of the training set
  // Model after the client's last local training; empty before round 1.
  std::optional<ParameterVector> prev_local;
};

struct LocalTrainResult {
  ParameterVector start;    // merged model training started from
  ParameterVector trained;  // model after E_l epochs
  ParameterVector update;   // trained - start
};

// E_l epochs of mini-batch SGD on the client's shard plus the proximal terms,
// starting from MergeModels(prev_local, global, mask).
absl::StatusOr<LocalTrainResult> LocalTrain(const ClientState& client,
                                            const Dataset& train,
                                            const ParameterVector& global,
                                            const PersonalizationMask& mask,
                                            const TrainingConfig& config,
                                            uint32_t round);

// Coordinate-wise weighted sum of the vectors, accumulated in list order.
// Weights must sum to 1 within 1e-9.
absl::StatusOr<ParameterVector> Aggregate(
    std::span<const ParameterVector> updates, std::span<const double> weights);

struct MetricsRecord {
  uint32_t round = 0;
  double epsilon_target = 0.0;
  uint64_t seed = 0;
  // Mean over clients of the personalized model (local personalized layers,
  // global shared layers) evaluated on the test split.
  double mean_accuracy = 0.0;
  double mean_loss = 0.0;
  // Cumulative epsilon after this round.
  double epsilon_spent = 0.0;
  // Cumulative gas of the clients' update transactions.
  uint64_t gas_total = 0;
  // Mean confirmation latency of this round's update transactions.
  double mean_latency_s = 0.0;
  std::size_t store_total_bytes = 0;
  // Accuracy of the aggregated global model alone.
  double global_accuracy = 0.0;
};

struct RoundResult {
  uint32_t round = 0;
  ParameterVector global_params;
  MetricsRecord metrics;
  std::vector<Receipt> receipts;  // update receipts, then the global model's
  std::vector<PersonalizationMask> masks;
};

struct RunOptions {
  std::size_t threads = 1;
  // Test hooks.
  bool disable_privacy = false;  // no clipping, no noise, no accounting
  bool force_shared_masks = false;
};

struct TrainingRun {
  std::vector<RoundResult> rounds;
  ParameterVector final_global;
  std::vector<ClientState> clients;
  std::optional<NoiseCalibration> calibration;
};

// Runs the full federated protocol for config.global_rounds rounds. Unless
// keys are already registered, registers one deterministic key per client and
// one for the aggregator.
absl::StatusOr<TrainingRun> RunTraining(const Dataset& train,
                                        const Dataset& test,
                                        const ClientPartition& partition,
                                        const PrivacySpec& privacy,
                                        const TrainingConfig& config,
                                        Ledger& ledger, ContentStore& store,
                                        const RunOptions& options = {});

// Key used for client `id` (or kAggregatorId) under `seed`.
Bytes DeriveClientKey(uint64_t seed, uint32_t id);

}  // namespace fedledger

#endif  // FEDLEDGER_FEDERATION_H_
