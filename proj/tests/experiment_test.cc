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

#include "fedledger/experiment.h"

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "absl/strings/str_split.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fedledger {
namespace {

using ::fedledger::testing::ScratchDir;

std::vector<std::vector<std::string>> ReadCsv(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  std::string text = *ReadFile(path);
  for (absl::string_view line : absl::StrSplit(text, '\n', absl::SkipEmpty())) {
    rows.push_back(absl::StrSplit(line, ','));
  }
  return rows;
}

ExperimentConfig TinyConfig(const std::string& out) {
  ExperimentConfig c;
  c.training.global_rounds = 3;
  c.training.local_epochs = 1;
  c.training.learning_rate = 0.1;
  c.training.hidden_units = 8;
  c.training.fisher_samples = 32;
  c.num_samples = 400;
  c.num_classes = 3;
  c.input_dim = 4;
  c.clients = 3;
  c.epsilon_sweep = {1.0, 8.0};
  c.seeds = {0};
  c.output_dir = out;
  return c;
}

TEST(ConfigTest, ParsesSettingsAndComments) {
  ExperimentConfig c = *ParseConfig(
      "# sweep\n"
      "rounds = 7\n"
      "learning_rate=0.1   # trailing comment\n"
      "\n"
      "epsilons = 1, 2.5\n"
      "seeds = 3,4\n"
      "aggregation = weighted\n"
      "cas_directory = true\n"
      "delta = 0.01\n");
  EXPECT_EQ(c.training.global_rounds, 7u);
  EXPECT_EQ(c.training.learning_rate, 0.1);
  EXPECT_EQ(c.epsilon_sweep, (std::vector<double>{1.0, 2.5}));
  EXPECT_EQ(c.seeds, (std::vector<uint64_t>{3, 4}));
  EXPECT_EQ(c.training.aggregation, Aggregation::kWeighted);
  EXPECT_TRUE(c.cas_directory);
  EXPECT_EQ(c.EffectiveDelta(), 0.01);
}

TEST(ConfigTest, Defaults) {
  ExperimentConfig c = *ParseConfig("");
  EXPECT_EQ(c.training.global_rounds, 15u);
  EXPECT_EQ(c.training.local_epochs, 3u);
  EXPECT_EQ(c.training.batch_size, 32u);
  EXPECT_EQ(c.clients, 10u);
  EXPECT_EQ(c.EffectiveDelta(), 0.1);
  EXPECT_EQ(c.epsilon_sweep, (std::vector<double>{1, 2, 4, 8}));
  EXPECT_EQ(c.base_gas, 22152u);
  EXPECT_EQ(c.clip_norm, 0.05);
  EXPECT_TRUE(c.Validate().ok());
}

TEST(ConfigTest, ErrorsNameTheLine) {
  absl::StatusOr<ExperimentConfig> c = ParseConfig("rounds = 2\nbogus_key = 1\n");
  ASSERT_FALSE(c.ok());
  EXPECT_NE(std::string(c.status().message()).find("line 2"), std::string::npos);
  EXPECT_FALSE(ParseConfig("rounds = x\n").ok());
  EXPECT_FALSE(ParseConfig("rounds\n").ok());
  EXPECT_FALSE(ParseConfig("aggregation = median\n").ok());
  EXPECT_FALSE(ParseConfig("epsilons = 1,,2\n").ok());
}

TEST(ConfigTest, ValidateRejectsBadValues) {
  ExperimentConfig c;
  c.training.tau = 0.0;
  EXPECT_FALSE(c.Validate().ok());
  c = ExperimentConfig();
  c.delta = 1.5;
  EXPECT_FALSE(c.Validate().ok());
  c = ExperimentConfig();
  c.epsilon_sweep = {1.0, -1.0};
  EXPECT_FALSE(c.Validate().ok());
  c = ExperimentConfig();
  c.seeds.clear();
  EXPECT_FALSE(c.Validate().ok());
}

TEST(MetricsCsvTest, RoundTrip) {
  MetricsRecord m;
  m.round = 2;
  m.epsilon_target = 4;
  m.seed = 9;
  m.mean_accuracy = 0.125;
  m.mean_loss = 1.5;
  m.epsilon_spent = 2.25;
  m.gas_total = 443040;
  m.mean_latency_s = 6.0625;
  m.store_total_bytes = 1234;
  m.global_accuracy = 0.5;
  const std::string text = FormatMetricsCsv({m, m});
  EXPECT_EQ(text.substr(0, text.find('\n')), MetricsHeader());
  std::vector<MetricsRecord> back = *ParseMetricsCsv(text);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].round, 2u);
  EXPECT_EQ(back[0].gas_total, 443040u);
  EXPECT_EQ(back[0].mean_latency_s, 6.0625);
  EXPECT_EQ(back[0].store_total_bytes, 1234u);
  EXPECT_EQ(FormatMetricsCsv(back), text);
  EXPECT_FALSE(ParseMetricsCsv("round\n1\n").ok());
}

TEST(RunExperimentTest, ZeroRoundsWritesHeaderOnly) {
  const std::string dir = ScratchDir("exp_zero");
  ExperimentConfig c = TinyConfig(dir);
  c.training.global_rounds = 0;
  c.epsilon_sweep = {8.0};
  ExperimentResult r = *RunExperiment(c);
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(*ReadFile(r.entries[0].metrics_file), std::string(MetricsHeader()) + "\n");
  auto summary = ReadCsv(dir + "/summary.csv");
  ASSERT_EQ(summary.size(), 2u);
  EXPECT_EQ(summary[1].back(), "no rounds");
}

TEST(RunExperimentTest, WritesOneSetOfFilesPerEntry) {
  const std::string dir = ScratchDir("exp_files");
  ExperimentConfig c = TinyConfig(dir);
  c.epsilon_sweep = {1, 2, 4, 8};
  c.seeds = {0, 1};
  ExperimentResult r = *RunExperiment(c);
  ASSERT_EQ(r.entries.size(), 8u);
  std::size_t metrics = 0, chains = 0, keys = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    metrics += name.starts_with("metrics_");
    chains += name.starts_with("chain_");
    keys += name.starts_with("keys_");
  }
  EXPECT_EQ(metrics, 8u);
  EXPECT_EQ(chains, 8u);
  EXPECT_EQ(keys, 8u);
  EXPECT_TRUE(std::filesystem::exists(dir + "/metrics_eps4_seed1.csv"));
  auto summary = ReadCsv(dir + "/summary.csv");
  ASSERT_EQ(summary.size(), 5u);
  for (std::size_t i = 1; i < summary.size(); ++i) {
    EXPECT_EQ(summary[i][1], "2");
    EXPECT_EQ(summary[i].back(), "ok");
  }
}

TEST(RunExperimentTest, MetricsInvariants) {
  const std::string dir = ScratchDir("exp_invariants");
  ExperimentConfig c = TinyConfig(dir);
  c.training.global_rounds = 4;
  ExperimentResult r = *RunExperiment(c);
  for (const SweepEntry& e : r.entries) {
    ASSERT_TRUE(e.status.ok());
    std::vector<MetricsRecord> rows = *ParseMetricsCsv(*ReadFile(e.metrics_file));
    ASSERT_EQ(rows.size(), 4u);
    double previous = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      EXPECT_EQ(rows[i].round, i + 1);
      EXPECT_EQ(rows[i].gas_total, (i + 1) * c.clients * c.base_gas);
      EXPECT_GE(rows[i].epsilon_spent, previous);
      EXPECT_LE(rows[i].epsilon_spent, e.epsilon + 1e-9);
      previous = rows[i].epsilon_spent;
    }
  }
  // Entries are ordered by epsilon.
  EXPECT_LE(r.entries[0].epsilon, r.entries[1].epsilon);
}

TEST(RunExperimentTest, RerunIsByteIdentical) {
  const std::string a = ScratchDir("exp_rerun_a");
  const std::string b = ScratchDir("exp_rerun_b");
  ExperimentConfig ca = TinyConfig(a);
  ExperimentConfig cb = TinyConfig(b);
  cb.threads = 3;
  ASSERT_TRUE(RunExperiment(ca).ok());
  ASSERT_TRUE(RunExperiment(cb).ok());
  for (const char* name : {"metrics_eps1_seed0.csv", "metrics_eps8_seed0.csv",
                           "chain_eps8_seed0.txt", "summary.csv"}) {
    EXPECT_EQ(*ReadFile(a + "/" + name), *ReadFile(b + "/" + name)) << name;
  }
}

TEST(RunExperimentTest, InfeasibleEntryRecordedAndSweepContinues) {
  const std::string dir = ScratchDir("exp_infeasible");
  ExperimentConfig c = TinyConfig(dir);
  c.training.global_rounds = 15;
  c.epsilon_sweep = {1e-4, 8.0};
  ExperimentResult r = *RunExperiment(c);
  ASSERT_EQ(r.entries.size(), 2u);
  EXPECT_EQ(r.entries[0].status.code(), absl::StatusCode::kResourceExhausted);
  EXPECT_TRUE(r.entries[1].status.ok());
  auto summary = ReadCsv(dir + "/summary.csv");
  ASSERT_EQ(summary.size(), 3u);
  EXPECT_TRUE(summary[1].back().starts_with("failed: "));
  EXPECT_EQ(summary[2].back(), "ok");
}

TEST(PlotDataTest, SeriesPerEpsilonAndRound) {
  const std::string dir = ScratchDir("plot_sweep");
  ExperimentConfig c = TinyConfig(dir);
  c.epsilon_sweep = {1, 2, 4, 8};
  ASSERT_TRUE(RunExperiment(c).ok());
  ASSERT_TRUE(EmitPlotData(dir, dir + "/plots").ok());
  for (const char* name : {"accuracy", "loss", "latency", "gas"}) {
    auto rows = ReadCsv(dir + "/plots/plot_" + std::string(name) + ".csv");
    ASSERT_EQ(rows.size(), 1u + 4 * 3) << name;
    EXPECT_EQ(rows[0], (std::vector<std::string>{"epsilon_target", "round", "mean",
                                                 "num_seeds"}));
  }
  // With one seed the series equals the raw metrics.
  auto plot = ReadCsv(dir + "/plots/plot_accuracy.csv");
  auto raw = ReadCsv(dir + "/metrics_eps2_seed0.csv");
  for (std::size_t r = 1; r <= 3; ++r) {
    EXPECT_EQ(plot[3 + r][0], "2");
    EXPECT_EQ(plot[3 + r][1], raw[r][0]);
    EXPECT_EQ(plot[3 + r][2], raw[r][3]);
    EXPECT_EQ(plot[3 + r][3], "1");
  }
}

TEST(PlotDataTest, MeansAcrossSeeds) {
  const std::string dir = ScratchDir("plot_fixture");
  MetricsRecord m;
  m.epsilon_target = 2;
  m.round = 1;
  m.mean_accuracy = 0.25;
  m.gas_total = 100;
  MetricsRecord n = m;
  n.seed = 1;
  n.mean_accuracy = 0.75;
  n.gas_total = 300;
  ASSERT_TRUE(WriteFileAtomic(dir + "/metrics_eps2_seed0.csv", FormatMetricsCsv({m})).ok());
  ASSERT_TRUE(WriteFileAtomic(dir + "/metrics_eps2_seed1.csv", FormatMetricsCsv({n})).ok());
  ASSERT_TRUE(EmitPlotData(dir, dir).ok());
  auto acc = ReadCsv(dir + "/plot_accuracy.csv");
  ASSERT_EQ(acc.size(), 2u);
  EXPECT_EQ(acc[1], (std::vector<std::string>{"2", "1", "0.5", "2"}));
  auto gas = ReadCsv(dir + "/plot_gas.csv");
  EXPECT_EQ(gas[1], (std::vector<std::string>{"2", "1", "200", "2"}));
}

TEST(PlotDataTest, EmptyDirectoryIsNotFound) {
  const std::string dir = ScratchDir("plot_empty");
  EXPECT_EQ(EmitPlotData(dir, dir).code(), absl::StatusCode::kNotFound);
}

TEST(FileTest, AtomicWriteReplacesContents) {
  const std::string path = ScratchDir("atomic") + "/f.txt";
  ASSERT_TRUE(WriteFileAtomic(path, "first").ok());
  ASSERT_TRUE(WriteFileAtomic(path, "second").ok());
  EXPECT_EQ(*ReadFile(path), "second");
  EXPECT_FALSE(std::filesystem::exists(path + ".tmp"));
  EXPECT_EQ(ReadFile(path + ".missing").status().code(), absl::StatusCode::kNotFound);
}

}  // namespace
}  // namespace fedledger
