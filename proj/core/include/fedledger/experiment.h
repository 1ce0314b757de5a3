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

#ifndef FEDLEDGER_EXPERIMENT_H_
#define FEDLEDGER_EXPERIMENT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedledger/federation.h"

namespace fedledger {

// Everything one sweep needs. Plain-text config files use one `key = value`
// per line (`#` starts a comment); list values are comma separated. See
// README.md for the key reference.
struct ExperimentConfig {
  TrainingConfig training;

  // Data. An empty data_csv means synthetic data.
  std::string data_csv;
  std::size_t num_samples = 5000;
  std::size_t num_classes = 10;
  std::size_t input_dim = 16;
  double class_separation = 3.0;
  double train_fraction = 0.8;
  std::size_t clients = 10;
  double dirichlet_beta = 0.5;

  // Privacy. delta defaults to 1 / clients.
  double clip_norm = 0.05;
  double noise_split_rho = 2.0;
  std::optional<double> delta;
  std::vector<double> epsilon_sweep = {1.0, 2.0, 4.0, 8.0};

  // Ledger and store.
  uint64_t base_gas = 22152;
  double gas_price_gwei = 20.0;
  double latency_mean_s = 6.0;
  double latency_jitter_s = 1.0;
  bool cas_directory = false;  // spill blobs to <output_dir>/blobs_...

  std::vector<uint64_t> seeds = {0};
  std::string output_dir = "out";
  std::size_t threads = 1;

  double EffectiveDelta() const {
    return delta.value_or(1.0 / static_cast<double>(clients));
  }
  absl::Status Validate() const;
};

// Applies one `key = value` setting. Unknown keys are an error.
absl::Status ApplySetting(ExperimentConfig& config, std::string_view key,
                          std::string_view value);
absl::StatusOr<ExperimentConfig> ParseConfig(std::string_view text);
absl::StatusOr<ExperimentConfig> LoadConfigFile(const std::string& path);

// Fixed CSV header of a metrics file.
std::string_view MetricsHeader();
std::string FormatMetricsCsv(const std::vector<MetricsRecord>& records);
absl::StatusOr<std::vector<MetricsRecord>> ParseMetricsCsv(std::string_view text);

struct SweepEntry {
  double epsilon = 0.0;
  uint64_t seed = 0;
  absl::Status status;
  std::vector<MetricsRecord> metrics;
  std::string metrics_file;
};

struct ExperimentResult {
  std::vector<SweepEntry> entries;
  std::string summary_file;
};

// Runs every (epsilon, seed) pair and writes, under output_dir:
//   metrics_eps<e>_seed<s>.csv   one row per round
//   chain_eps<e>_seed<s>.txt     chain audit export
//   keys_eps<e>_seed<s>.txt      client keys for verify-chain
//   summary.csv                  final-round means across seeds per epsilon
// A failing entry (e.g. an infeasible budget) is recorded in the summary and
// the sweep continues.
absl::StatusOr<ExperimentResult> RunExperiment(const ExperimentConfig& config);

// Reads every metrics_*.csv in metrics_dir and writes plot_accuracy.csv,
// plot_loss.csv, plot_latency.csv and plot_gas.csv to out_dir, each with
// columns epsilon_target,round,mean,num_seeds.
absl::Status EmitPlotData(const std::string& metrics_dir,
                          const std::string& out_dir);

// Writes to a temp file and renames it into place.
absl::Status WriteFileAtomic(const std::string& path, std::string_view contents);
absl::StatusOr<std::string> ReadFile(const std::string& path);

}  // namespace fedledger

#endif  // FEDLEDGER_EXPERIMENT_H_
