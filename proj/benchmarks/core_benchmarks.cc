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

#include <cstdint>
#include <vector>

#include "benchmark/benchmark.h"
#include "fedledger/cas.h"
#include "fedledger/data.h"
#include "fedledger/model.h"
#include "fedledger/personalization.h"
#include "fedledger/privacy.h"
#include "fedledger/rng.h"

namespace fedledger {
namespace {

struct Fixture {
  ParameterVector params;
  Batch batch;
};

Fixture MakeFixture(std::size_t rows) {
  Dataset data = *GenerateSynthetic(rows, 10, 16, 3.0, 1);
  LayoutPtr layout = *MakeMlpLayout({16, 32, 10});
  return {InitializeParameters(layout, 1), data.AsBatch()};
}

void BM_Gradient(benchmark::State& state) {
  Fixture f = MakeFixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(Gradient(f.params, f.batch));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Gradient)->Arg(32)->Arg(256);

void BM_FisherDiagonal(benchmark::State& state) {
  Fixture f = MakeFixture(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(FisherDiagonal(f.params, f.batch));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FisherDiagonal)->Arg(256);

void BM_Sha256(benchmark::State& state) {
  std::vector<uint8_t> data(static_cast<std::size_t>(state.range(0)), 0xab);
  for (auto _ : state) benchmark::DoNotOptimize(Sha256(data));
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(1 << 10)->Arg(1 << 20);

void BM_StorePutUpdate(benchmark::State& state) {
  std::vector<double> values(static_cast<std::size_t>(state.range(0)));
  RngStream rng(0, 0, 0, StreamPurpose::kTest);
  for (double& v : values) v = rng.Gaussian();
  uint32_t round = 0;
  ContentStore store;
  for (auto _ : state) {
    Bytes blob = EncodeUpdateBlob(++round, 0, values);
    benchmark::DoNotOptimize(store.Put(blob));
  }
}
BENCHMARK(BM_StorePutUpdate)->Arg(1000)->Arg(100000);

void BM_CalibrateNoise(benchmark::State& state) {
  PrivacySpec spec;
  spec.epsilon_target = 1.0;
  spec.delta = 0.1;
  spec.clip_norm = 0.05;
  spec.rounds = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(CalibrateNoise(spec));
}
BENCHMARK(BM_CalibrateNoise)->Arg(15)->Arg(1000);

}  // namespace
}  // namespace fedledger

BENCHMARK_MAIN();
