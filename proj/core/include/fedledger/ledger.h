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

#ifndef FEDLEDGER_LEDGER_H_
#define FEDLEDGER_LEDGER_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fedledger/cas.h"

namespace fedledger {

// Simulated single-validator chain. Serialization is canonical: fields in a
// fixed order, integers big-endian, floats as their IEEE-754 bit pattern,
// byte strings prefixed with a u32 length.
//
//   signing payload = "FCTX" kind:u8 round:u32 client:u32 str(address)
//                     payload_bytes:u64
//   transaction     = kind:u8 round:u32 client:u32 str(address)
//                     payload_bytes:u64 gas_used:u64 timestamp:f64
//                     str(signature)
//   block body      = "FCBK" index:u64 prev_hash:32 timestamp:f64
//                     tx_count:u32 str(transaction)*
//   block           = block body || block_hash:32
//
// block_hash = SHA-256(block body). A signature is HMAC-SHA256 over the
// signing payload with the client's registered key.

enum class TxKind : uint8_t {
  kLocalUpdate = 1,
  kGlobalModel = 2,
};

// Identity used by the aggregator when it records the global model.
inline constexpr uint32_t kAggregatorId = 0xFFFFFFFFu;

struct UpdateTransaction {
  TxKind kind = TxKind::kLocalUpdate;
  uint32_t round = 0;
  uint32_t client_id = 0;
  ContentAddress update_address;
  uint64_t payload_bytes = 0;
  // Filled in by the ledger on submission.
  uint64_t gas_used = 0;
  double sim_timestamp = 0.0;
  Bytes signature;
};

Bytes SigningPayload(const UpdateTransaction& tx);
Bytes SerializeTransaction(const UpdateTransaction& tx);
void SignTransaction(UpdateTransaction& tx, std::span<const uint8_t> key);

struct Block {
  uint64_t index = 0;
  Digest prev_hash{};
  std::vector<UpdateTransaction> transactions;
  double sim_timestamp = 0.0;
  Digest block_hash{};
};

Bytes SerializeBlockBody(const Block& block);
Digest ComputeBlockHash(const Block& block);
Bytes SerializeBlock(const Block& block);
absl::StatusOr<Block> ParseBlock(std::span<const uint8_t> bytes);

struct Receipt {
  Digest tx_digest{};
  uint64_t gas_used = 0;
  double latency_s = 0.0;
  uint64_t block_index = 0;
};

struct LedgerConfig {
  uint64_t base_gas = 22152;
  double latency_mean_s = 6.0;
  double latency_jitter_s = 1.0;
  uint64_t seed = 0;
};

struct ChainReport {
  bool valid = true;
  std::optional<uint64_t> block_index;  // first failing block
  std::string reason;
};

using KeyRegistry = std::map<uint32_t, Bytes>;

// Checks indices, hash linkage, recomputed hashes and, when `keys` is given,
// every transaction signature. Stops at the first failure.
ChainReport VerifyBlocks(std::span<const Block> blocks, const KeyRegistry* keys);

// Audit export: a "fedledger-chain v1" header line, then one line per block
// holding the lowercase hex of SerializeBlock().
std::string ExportChain(std::span<const Block> blocks);
// Parses and verifies an export. A block line that does not parse is reported
// as a failure at that block's index.
ChainReport VerifyExportedChain(std::string_view text, const KeyRegistry* keys);
absl::StatusOr<std::vector<Block>> ImportChain(std::string_view text);

// One "<client_id> <hex key>" line per client.
std::string ExportKeys(const KeyRegistry& keys);
absl::StatusOr<KeyRegistry> ParseKeys(std::string_view text);

struct TxCost {
  double gwei = 0.0;
  double eth = 0.0;
};

// cost = gas * price; 1 Gwei = 1e-9 ETH.
TxCost ComputeTxCost(uint64_t gas_used, double gas_price_gwei);

class Ledger {
 public:
  explicit Ledger(LedgerConfig config = {});

  absl::Status RegisterClient(uint32_t client_id, Bytes key);

  // Verifies the signature and round, charges base gas, draws a confirmation
  // latency and advances the simulated clock.
  absl::StatusOr<Receipt> SubmitUpdate(UpdateTransaction tx);

  // Appends the pending transactions as a new block.
  absl::StatusOr<Block> SealBlock();

  ChainReport VerifyChain() const;

  // Round accepted by SubmitUpdate: one block per round, rounds start at 1.
  uint32_t open_round() const {
    return static_cast<uint32_t>(blocks_.size() + 1);
  }
  const std::vector<Block>& blocks() const { return blocks_; }
  const std::vector<UpdateTransaction>& pending() const { return pending_; }
  const KeyRegistry& keys() const { return keys_; }
  const LedgerConfig& config() const { return config_; }
  double clock_s() const { return clock_s_; }

  std::vector<Block>& mutable_blocks_for_testing() { return blocks_; }

 private:
  LedgerConfig config_;
  KeyRegistry keys_;
  std::vector<Block> blocks_;
  std::vector<UpdateTransaction> pending_;
  double clock_s_ = 0.0;
};

}  // namespace fedledger

#endif  // FEDLEDGER_LEDGER_H_
