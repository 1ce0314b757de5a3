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

#include "fedledger/federation.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <thread>

#include "absl/strings/str_cat.h"
#include "fedledger/rng.h"

namespace fedledger {
namespace {

struct ClientRoundOutput {
  std::optional<LocalTrainResult> local;
  std::optional<PersonalizationMask> mask;
  Bytes blob;
  absl::Status status;
};

// Runs fn(k) for k in [0, n) on up to `threads` workers. Work is split by
// index, so the result of each k does not depend on the thread count.
void ParallelFor(std::size_t n, std::size_t threads,
                 const std::function<void(std::size_t)>& fn) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t k = 0; k < n; ++k) fn(k);
    return;
  }
  std::vector<std::jthread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t k = w; k < n; k += threads) fn(k);
    });
  }
}

absl::StatusOr<PersonalizationMask> ComputeMask(const ClientState& client,
                                                const Dataset& train,
                                                const ParameterVector& global,
                                                const TrainingConfig& config,
                                                uint32_t round,
                                                const RunOptions& options) {
  if (options.force_shared_masks || !client.prev_local.has_value()) {
    return PersonalizationMask::AllShared(global.layout_ptr());
  }
  std::vector<std::size_t> sample = client.shard;
  if (sample.size() > config.fisher_samples) {
    RngStream rng(config.seed, client.id, round, StreamPurpose::kFisherSample);
    Shuffle(sample, rng);
    sample.resize(config.fisher_samples);
    std::sort(sample.begin(), sample.end());
  }
  absl::StatusOr<std::vector<double>> fisher =
      FisherDiagonal(*client.prev_local, train.Gather(sample));
  if (!fisher.ok()) return fisher.status();
  absl::StatusOr<ImportanceProfile> profile =
      LayerImportance(*fisher, global.layout_ptr());
  if (!profile.ok()) {
    // A model with no Fisher information anywhere has nothing worth keeping.
    if (absl::IsFailedPrecondition(profile.status())) {
      return PersonalizationMask::AllShared(global.layout_ptr());
    }
    return profile.status();
  }
  return BuildMask(*profile, config.tau);
}

absl::Status Diverged(uint32_t round, uint32_t client_id) {
  return absl::InternalError(absl::StrCat("training diverged in round ", round,
                                          " on client ", client_id));
}

absl::Status RegisterKeys(Ledger& ledger, std::size_t num_clients,
                          uint64_t seed) {
  if (ledger.keys().empty()) {
    for (uint32_t k = 0; k < num_clients; ++k) {
      absl::Status s = ledger.RegisterClient(k, DeriveClientKey(seed, k));
      if (!s.ok()) return s;
    }
    return ledger.RegisterClient(kAggregatorId,
                                 DeriveClientKey(seed, kAggregatorId));
  }
  bool consistent = ledger.keys().size() == num_clients + 1 &&
                    ledger.keys().contains(kAggregatorId);
  for (uint32_t k = 0; consistent && k < num_clients; ++k) {
    consistent = ledger.keys().contains(k);
  }
  if (!consistent) {
    return absl::FailedPreconditionError(absl::StrCat(
        "ledger registrations do not match the ", num_clients, " clients"));
  }
  return absl::OkStatus();
}

absl::StatusOr<Receipt> SubmitSigned(Ledger& ledger, TxKind kind, uint32_t round,
                                     uint32_t client_id,
                                     const ContentAddress& address,
                                     std::size_t payload_bytes) {
  UpdateTransaction tx;
  tx.kind = kind;
  tx.round = round;
  tx.client_id = client_id;
  tx.update_address = address;
  tx.payload_bytes = payload_bytes;
  SignTransaction(tx, ledger.keys().at(client_id));
  return ledger.SubmitUpdate(std::move(tx));
}

}  // namespace

absl::Status TrainingConfig::Validate() const {
  if (local_epochs > 0 && !(learning_rate > 0.0 && std::isfinite(learning_rate))) {
    return absl::InvalidArgumentError("learning_rate must be > 0");
  }
  if (!(lambda1 >= 0.0) || !(lambda2 >= 0.0)) {
    return absl::InvalidArgumentError("lambda1 and lambda2 must be >= 0");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    return absl::InvalidArgumentError("tau must be in (0, 1)");
  }
  if (batch_size == 0) return absl::InvalidArgumentError("batch_size must be >= 1");
  if (hidden_units == 0) return absl::InvalidArgumentError("hidden_units must be >= 1");
  if (fisher_samples == 0) {
    return absl::InvalidArgumentError("fisher_samples must be >= 1");
  }
  return absl::OkStatus();
}

Bytes DeriveClientKey(uint64_t seed, uint32_t id) {
  RngStream rng(seed, id, 0, StreamPurpose::kKeys);
  Bytes key(32);
  for (std::size_t i = 0; i < key.size(); i += 8) {
    const uint64_t word = rng.NextU64();
    for (std::size_t b = 0; b < 8; ++b) key[i + b] = static_cast<uint8_t>(word >> (8 * b));
  }
  return key;
}

absl::StatusOr<LocalTrainResult> LocalTrain(const ClientState& client,
                                            const Dataset& train,
                                            const ParameterVector& global,
                                            const PersonalizationMask& mask,
                                            const TrainingConfig& config,
                                            uint32_t round) {
  if (!(global.layout() == mask.layout())) {
    return absl::FailedPreconditionError("mask layout does not match model");
  }
  if (client.shard.empty()) {
    return absl::FailedPreconditionError(
        absl::StrCat("client ", client.id, " has an empty shard"));
  }
  ParameterVector start = global;
  if (client.prev_local.has_value()) {
    absl::StatusOr<ParameterVector> merged =
        MergeModels(*client.prev_local, global, mask);
    if (!merged.ok()) return merged.status();
    start = *std::move(merged);
  }

  ParameterVector w = start;
  std::span<const double> anchor = start.values();
  std::span<const uint8_t> bits = mask.bits();
  std::vector<std::size_t> order = client.shard;
  const RngStream shuffle_base(config.seed, client.id, round,
                               StreamPurpose::kShuffle);
  for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
    RngStream rng = shuffle_base.Fork(epoch);
    Shuffle(order, rng);
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      Batch batch = train.Gather(std::span<const std::size_t>(order).subspan(
          begin, end - begin));
      auto lg = LossAndGradient(w, batch);
      if (!lg.ok()) return lg.status();
      if (!std::isfinite(lg->first)) return Diverged(round, client.id);
      std::span<double> wv = w.mutable_values();
      std::span<const double> g = lg->second.values();
      for (std::size_t j = 0; j < wv.size(); ++j) {
        const double lambda = bits[j] ? config.lambda1 : config.lambda2;
        wv[j] -= config.learning_rate * (g[j] + lambda * (wv[j] - anchor[j]));
      }
      if (!w.AllFinite()) return Diverged(round, client.id);
    }
  }

  ParameterVector update = ParameterVector::Zeros(w.layout_ptr());
  std::span<double> u = update.mutable_values();
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = w[j] - start[j];
  return LocalTrainResult{std::move(start), std::move(w), std::move(update)};
}

absl::StatusOr<ParameterVector> Aggregate(
    std::span<const ParameterVector> updates, std::span<const double> weights) {
  if (updates.empty()) return absl::InvalidArgumentError("no updates to aggregate");
  if (updates.size() != weights.size()) {
    return absl::InvalidArgumentError("one weight per update is required");
  }
  double weight_sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w)) return absl::InvalidArgumentError("non-finite weight");
    weight_sum += w;
  }
  if (std::fabs(weight_sum - 1.0) > 1e-9) {
    return absl::InvalidArgumentError(
        absl::StrCat("aggregation weights sum to ", weight_sum, ", not 1"));
  }
  ParameterVector out = ParameterVector::Zeros(updates[0].layout_ptr());
  std::span<double> acc = out.mutable_values();
  for (std::size_t k = 0; k < updates.size(); ++k) {
    if (!updates[k].SameLayout(updates[0])) {
      return absl::FailedPreconditionError("updates have different layouts");
    }
    std::span<const double> u = updates[k].values();
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += weights[k] * u[j];
  }
  return out;
}

absl::StatusOr<TrainingRun> RunTraining(const Dataset& train,
                                        const Dataset& test,
                                        const ClientPartition& partition,
                                        const PrivacySpec& privacy,
                                        const TrainingConfig& config,
                                        Ledger& ledger, ContentStore& store,
                                        const RunOptions& options) {
  if (absl::Status s = config.Validate(); !s.ok()) return s;
  const std::size_t num_clients = partition.num_clients();
  if (num_clients == 0) return absl::InvalidArgumentError("no clients");
  for (std::size_t k = 0; k < num_clients; ++k) {
    if (partition.shards[k].empty()) {
      return absl::FailedPreconditionError(absl::StrCat("client ", k, " has no data"));
    }
    for (std::size_t i : partition.shards[k]) {
      if (i >= train.size()) {
        return absl::OutOfRangeError("partition index outside the training set");
      }
    }
  }
  absl::StatusOr<LayoutPtr> layout = MakeMlpLayout(
      {train.input_dim(), config.hidden_units, train.num_classes});
  if (!layout.ok()) return layout.status();
  if (test.size() == 0 || test.input_dim() != train.input_dim()) {
    return absl::InvalidArgumentError("test split is empty or has the wrong width");
  }
  if (absl::Status s = RegisterKeys(ledger, num_clients, config.seed); !s.ok()) {
    return s;
  }

  TrainingRun run{{}, InitializeParameters(*layout, config.seed), {}, {}};
  for (uint32_t k = 0; k < num_clients; ++k) {
    run.clients.push_back(ClientState{k, partition.shards[k], std::nullopt});
  }
  if (config.global_rounds == 0) return run;

  if (!options.disable_privacy) {
    PrivacySpec spec = privacy;
    spec.rounds = config.global_rounds;
    absl::StatusOr<NoiseCalibration> cal = CalibrateNoise(spec);
    if (!cal.ok()) return cal.status();
    run.calibration = *cal;
  }

  std::vector<double> weights(num_clients, 1.0 / static_cast<double>(num_clients));
  if (config.aggregation == Aggregation::kWeighted) {
    const double n = static_cast<double>(partition.total_size());
    for (std::size_t k = 0; k < num_clients; ++k) {
      weights[k] = static_cast<double>(partition.shard_size(k)) / n;
    }
  }

  const Batch test_batch = test.AsBatch();
  AccountantState accountant;
  uint64_t gas_total = 0;

  for (uint32_t round = 1; round <= config.global_rounds; ++round) {
    ParameterVector& global = run.final_global;
    std::vector<ClientRoundOutput> outputs(num_clients);

    ParallelFor(num_clients, options.threads, [&](std::size_t k) {
      ClientRoundOutput& out = outputs[k];
      const ClientState& client = run.clients[k];
      absl::StatusOr<PersonalizationMask> mask =
          ComputeMask(client, train, global, config, round, options);
      if (!mask.ok()) {
        out.status = mask.status();
        return;
      }
      absl::StatusOr<LocalTrainResult> local =
          LocalTrain(client, train, global, *mask, config, round);
      if (!local.ok()) {
        out.status = local.status();
        return;
      }
      // Clients release a model: the trained one, or the merged start plus
      // the clipped and noised update.
      ParameterVector released = local->trained;
      if (!options.disable_privacy) {
        absl::StatusOr<ParameterVector> clipped =
            ClipUpdate(local->update, privacy.clip_norm);
        if (!clipped.ok()) {
          out.status = clipped.status();
          return;
        }
        RngStream noise_rng(config.seed, client.id, round, StreamPurpose::kNoise);
        absl::StatusOr<ParameterVector> noisy =
            AdaptiveNoise(*clipped, *mask, run.calibration->sigma_u,
                          run.calibration->sigma_v, noise_rng);
        if (!noisy.ok()) {
          out.status = noisy.status();
          return;
        }
        std::span<double> rv = released.mutable_values();
        for (std::size_t j = 0; j < rv.size(); ++j) rv[j] = local->start[j] + (*noisy)[j];
      }
      out.blob = EncodeUpdateBlob(round, client.id, released.values());
      out.local = *std::move(local);
      out.mask = *std::move(mask);
    });

    RoundResult result;
    result.round = round;
    // Store and submit in client-id order.
    for (std::size_t k = 0; k < num_clients; ++k) {
      if (!outputs[k].status.ok()) return outputs[k].status;
      absl::StatusOr<ContentAddress> addr = store.Put(outputs[k].blob);
      if (!addr.ok()) return addr.status();
      absl::StatusOr<Receipt> receipt =
          SubmitSigned(ledger, TxKind::kLocalUpdate, round, static_cast<uint32_t>(k),
                       *addr, outputs[k].blob.size());
      if (!receipt.ok()) return receipt.status();
      result.receipts.push_back(*receipt);
      result.masks.push_back(*outputs[k].mask);
    }

    // The aggregator reads the released models back through the ledger.
    std::vector<ParameterVector> models;
    for (const UpdateTransaction& tx : ledger.pending()) {
      if (tx.kind != TxKind::kLocalUpdate) continue;
      absl::StatusOr<Bytes> blob = store.Get(tx.update_address);
      if (!blob.ok()) return blob.status();
      absl::StatusOr<UpdateBlob> decoded = DecodeUpdateBlob(*blob);
      if (!decoded.ok()) return decoded.status();
      if (decoded->round != round || decoded->client_id != tx.client_id ||
          tx.client_id != models.size()) {
        return absl::DataLossError("stored update does not match its transaction");
      }
      absl::StatusOr<ParameterVector> model =
          ParameterVector::FromValues(global.layout_ptr(), std::move(decoded->values));
      if (!model.ok()) return model.status();
      models.push_back(*std::move(model));
    }
    absl::StatusOr<ParameterVector> averaged = Aggregate(models, weights);
    if (!averaged.ok()) return averaged.status();
    global = *std::move(averaged);

    const Bytes global_blob = EncodeUpdateBlob(round, kAggregatorId, global.values());
    absl::StatusOr<ContentAddress> global_addr = store.Put(global_blob);
    if (!global_addr.ok()) return global_addr.status();
    absl::StatusOr<Receipt> global_receipt =
        SubmitSigned(ledger, TxKind::kGlobalModel, round, kAggregatorId,
                     *global_addr, global_blob.size());
    if (!global_receipt.ok()) return global_receipt.status();
    result.receipts.push_back(*global_receipt);
    if (absl::StatusOr<Block> block = ledger.SealBlock(); !block.ok()) {
      return block.status();
    }
    if (ChainReport report = ledger.VerifyChain(); !report.valid) {
      return absl::DataLossError(absl::StrCat(
          "ledger verification failed after round ", round, ": ", report.reason));
    }

    double epsilon_spent = std::numeric_limits<double>::infinity();
    if (!options.disable_privacy) {
      if (absl::Status s = accountant.ComposeGaussian(run.calibration->noise_multiplier);
          !s.ok()) {
        return s;
      }
      absl::StatusOr<DpGuarantee> dp = RdpToDp(accountant, privacy.delta);
      if (!dp.ok()) return dp.status();
      epsilon_spent = dp->epsilon;
    }

    for (std::size_t k = 0; k < num_clients; ++k) {
      run.clients[k].prev_local = outputs[k].local->trained;
    }

    // Evaluate each client's personalized model on the test split.
    std::vector<double> acc(num_clients);
    std::vector<double> loss(num_clients);
    std::vector<absl::Status> eval_status(num_clients);
    ParallelFor(num_clients, options.threads, [&](std::size_t k) {
      absl::StatusOr<ParameterVector> personal =
          MergeModels(*run.clients[k].prev_local, global, *outputs[k].mask);
      if (!personal.ok()) {
        eval_status[k] = personal.status();
        return;
      }
      absl::StatusOr<double> a = Accuracy(*personal, test_batch);
      absl::StatusOr<double> l = Loss(*personal, test_batch);
      if (!a.ok() || !l.ok()) {
        eval_status[k] = a.ok() ? l.status() : a.status();
        return;
      }
      acc[k] = *a;
      loss[k] = *l;
    });
    for (const absl::Status& s : eval_status) {
      if (!s.ok()) return s;
    }
    absl::StatusOr<double> global_acc = Accuracy(global, test_batch);
    if (!global_acc.ok()) return global_acc.status();

    MetricsRecord& m = result.metrics;
    m.round = round;
    m.epsilon_target = privacy.epsilon_target;
    m.seed = config.seed;
    m.mean_accuracy = std::accumulate(acc.begin(), acc.end(), 0.0) / num_clients;
    m.mean_loss = std::accumulate(loss.begin(), loss.end(), 0.0) / num_clients;
    m.epsilon_spent = epsilon_spent;
    double latency_sum = 0.0;
    for (std::size_t k = 0; k < num_clients; ++k) {
      gas_total += result.receipts[k].gas_used;
      latency_sum += result.receipts[k].latency_s;
    }
    m.gas_total = gas_total;
    m.mean_latency_s = latency_sum / static_cast<double>(num_clients);
    m.store_total_bytes = store.TotalSize();
    m.global_accuracy = *global_acc;
    result.global_params = global;
    run.rounds.push_back(std::move(result));
  }
  return run;
}

}  // namespace fedledger
