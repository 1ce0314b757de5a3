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

#include "fedledger/ledger.h"

#include <algorithm>
#include <bit>
#include <cstring>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "fedledger/rng.h"
#include "text_util.h"

namespace fedledger {
namespace {

constexpr std::string_view kChainHeader = "fedledger-chain v1";
constexpr double kMinLatency = 0.001;

class Writer {
 public:
  void Raw(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }
  void Raw(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void U8(uint8_t v) { out_.push_back(v); }
  void U32(uint32_t v) { BigEndian(v); }
  void U64(uint64_t v) { BigEndian(v); }
  void F64(double v) { BigEndian(std::bit_cast<uint64_t>(v)); }
  void Str(std::span<const uint8_t> b) {
    U32(static_cast<uint32_t>(b.size()));
    Raw(b);
  }
  void Str(std::string_view s) {
    U32(static_cast<uint32_t>(s.size()));
    Raw(s);
  }
  Bytes Take() { return std::move(out_); }

 private:
  template <typename T>
  void BigEndian(T v) {
    for (int i = sizeof(T) - 1; i >= 0; --i) {
      out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
    }
  }
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> in) : in_(in) {}

  bool Raw(std::size_t n, std::span<const uint8_t>& out) {
    if (in_.size() - pos_ < n) return false;
    out = in_.subspan(pos_, n);
    pos_ += n;
    return true;
  }
  bool U8(uint8_t& v) { return BigEndian(v); }
  bool U32(uint32_t& v) { return BigEndian(v); }
  bool U64(uint64_t& v) { return BigEndian(v); }
  bool F64(double& v) {
    uint64_t bits;
    if (!BigEndian(bits)) return false;
    v = std::bit_cast<double>(bits);
    return true;
  }
  bool Str(std::span<const uint8_t>& out) {
    uint32_t n;
    return U32(n) && Raw(n, out);
  }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  template <typename T>
  bool BigEndian(T& v) {
    if (in_.size() - pos_ < sizeof(T)) return false;
    v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v = (v << 8) | in_[pos_ + i];
    pos_ += sizeof(T);
    return true;
  }
  std::span<const uint8_t> in_;
  std::size_t pos_ = 0;
};

absl::StatusOr<UpdateTransaction> ParseTransaction(std::span<const uint8_t> b) {
  Reader r(b);
  UpdateTransaction tx;
  uint8_t kind;
  std::span<const uint8_t> address;
  std::span<const uint8_t> signature;
  if (!r.U8(kind) || !r.U32(tx.round) || !r.U32(tx.client_id) ||
      !r.Str(address) || !r.U64(tx.payload_bytes) || !r.U64(tx.gas_used) ||
      !r.F64(tx.sim_timestamp) || !r.Str(signature) || r.remaining() != 0) {
    return absl::InvalidArgumentError("malformed transaction");
  }
  if (kind != static_cast<uint8_t>(TxKind::kLocalUpdate) &&
      kind != static_cast<uint8_t>(TxKind::kGlobalModel)) {
    return absl::InvalidArgumentError("unknown transaction kind");
  }
  tx.kind = static_cast<TxKind>(kind);
  absl::StatusOr<ContentAddress> addr = ContentAddress::Parse(std::string_view(
      reinterpret_cast<const char*>(address.data()), address.size()));
  if (!addr.ok()) return addr.status();
  tx.update_address = *addr;
  tx.signature.assign(signature.begin(), signature.end());
  return tx;
}

bool SignatureValid(const UpdateTransaction& tx, const KeyRegistry& keys) {
  auto it = keys.find(tx.client_id);
  if (it == keys.end()) return false;
  const Digest expected = HmacSha256(it->second, SigningPayload(tx));
  return tx.signature.size() == expected.size() &&
         std::equal(expected.begin(), expected.end(), tx.signature.begin());
}

ChainReport Failure(uint64_t index, std::string reason) {
  return ChainReport{false, index, std::move(reason)};
}

}  // namespace

Bytes SigningPayload(const UpdateTransaction& tx) {
  Writer w;
  w.Raw(std::string_view("FCTX"));
  w.U8(static_cast<uint8_t>(tx.kind));
  w.U32(tx.round);
  w.U32(tx.client_id);
  w.Str(tx.update_address.ToString());
  w.U64(tx.payload_bytes);
  return w.Take();
}

Bytes SerializeTransaction(const UpdateTransaction& tx) {
  Writer w;
  w.U8(static_cast<uint8_t>(tx.kind));
  w.U32(tx.round);
  w.U32(tx.client_id);
  w.Str(tx.update_address.ToString());
  w.U64(tx.payload_bytes);
  w.U64(tx.gas_used);
  w.F64(tx.sim_timestamp);
  w.Str(tx.signature);
  return w.Take();
}

void SignTransaction(UpdateTransaction& tx, std::span<const uint8_t> key) {
  const Digest mac = HmacSha256(key, SigningPayload(tx));
  tx.signature.assign(mac.begin(), mac.end());
}

Bytes SerializeBlockBody(const Block& block) {
  Writer w;
  w.Raw(std::string_view("FCBK"));
  w.U64(block.index);
  w.Raw(block.prev_hash);
  w.F64(block.sim_timestamp);
  w.U32(static_cast<uint32_t>(block.transactions.size()));
  for (const UpdateTransaction& tx : block.transactions) {
    w.Str(SerializeTransaction(tx));
  }
  return w.Take();
}

Digest ComputeBlockHash(const Block& block) {
  return Sha256(SerializeBlockBody(block));
}

Bytes SerializeBlock(const Block& block) {
  Bytes out = SerializeBlockBody(block);
  out.insert(out.end(), block.block_hash.begin(), block.block_hash.end());
  return out;
}

absl::StatusOr<Block> ParseBlock(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  Block block;
  std::span<const uint8_t> magic;
  std::span<const uint8_t> prev;
  uint32_t count;
  if (!r.Raw(4, magic) || std::memcmp(magic.data(), "FCBK", 4) != 0) {
    return absl::InvalidArgumentError("missing block magic");
  }
  if (!r.U64(block.index) || !r.Raw(32, prev) || !r.F64(block.sim_timestamp) ||
      !r.U32(count)) {
    return absl::InvalidArgumentError("truncated block header");
  }
  std::copy(prev.begin(), prev.end(), block.prev_hash.begin());
  if (count > r.remaining()) {
    return absl::InvalidArgumentError("transaction count exceeds block size");
  }
  for (uint32_t i = 0; i < count; ++i) {
    std::span<const uint8_t> tx_bytes;
    if (!r.Str(tx_bytes)) return absl::InvalidArgumentError("truncated transaction");
    absl::StatusOr<UpdateTransaction> tx = ParseTransaction(tx_bytes);
    if (!tx.ok()) return tx.status();
    block.transactions.push_back(*std::move(tx));
  }
  std::span<const uint8_t> hash;
  if (!r.Raw(32, hash) || r.remaining() != 0) {
    return absl::InvalidArgumentError("bad block trailer");
  }
  std::copy(hash.begin(), hash.end(), block.block_hash.begin());
  return block;
}

ChainReport VerifyBlocks(std::span<const Block> blocks, const KeyRegistry* keys) {
  Digest expected_prev{};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = blocks[i];
    if (b.index != i) {
      return Failure(i, absl::StrCat("index ", b.index, " at position ", i));
    }
    if (b.prev_hash != expected_prev) return Failure(i, "prev_hash mismatch");
    if (ComputeBlockHash(b) != b.block_hash) return Failure(i, "hash mismatch");
    if (b.transactions.empty()) return Failure(i, "empty block");
    if (keys != nullptr) {
      for (std::size_t t = 0; t < b.transactions.size(); ++t) {
        if (!SignatureValid(b.transactions[t], *keys)) {
          return Failure(i, absl::StrCat("bad signature on transaction ", t));
        }
      }
    }
    expected_prev = b.block_hash;
  }
  return ChainReport{};
}

std::string ExportChain(std::span<const Block> blocks) {
  std::string out = absl::StrCat(internal::ToAbsl(kChainHeader), "\n");
  for (const Block& b : blocks) absl::StrAppend(&out, HexEncode(SerializeBlock(b)), "\n");
  return out;
}

namespace {

// Splits an export into block lines. Returns an error only for a bad header.
absl::StatusOr<std::vector<std::string_view>> BlockLines(std::string_view text) {
  std::vector<std::string_view> lines = internal::Split(text, '\n');
  while (!lines.empty() && internal::StripWhitespace(lines.back()).empty()) {
    lines.pop_back();
  }
  if (lines.empty() || internal::StripWhitespace(lines[0]) != kChainHeader) {
    return absl::InvalidArgumentError("missing chain export header");
  }
  lines.erase(lines.begin());
  for (auto& l : lines) l = internal::StripWhitespace(l);
  return lines;
}

}  // namespace

ChainReport VerifyExportedChain(std::string_view text, const KeyRegistry* keys) {
  absl::StatusOr<std::vector<std::string_view>> lines = BlockLines(text);
  if (!lines.ok()) return ChainReport{false, std::nullopt, std::string(lines.status().message())};
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < lines->size(); ++i) {
    absl::StatusOr<Bytes> raw = HexDecode((*lines)[i]);
    if (!raw.ok()) return Failure(i, absl::StrCat("bad hex: ", raw.status().message()));
    absl::StatusOr<Block> block = ParseBlock(*raw);
    if (!block.ok()) return Failure(i, std::string(block.status().message()));
    blocks.push_back(*std::move(block));
    // Verify incrementally so a parse failure further down never masks an
    // earlier one.
    ChainReport report = VerifyBlocks(blocks, keys);
    if (!report.valid) return report;
  }
  return ChainReport{};
}

absl::StatusOr<std::vector<Block>> ImportChain(std::string_view text) {
  absl::StatusOr<std::vector<std::string_view>> lines = BlockLines(text);
  if (!lines.ok()) return lines.status();
  std::vector<Block> blocks;
  for (std::size_t i = 0; i < lines->size(); ++i) {
    absl::StatusOr<Bytes> raw = HexDecode((*lines)[i]);
    if (!raw.ok()) return raw.status();
    absl::StatusOr<Block> block = ParseBlock(*raw);
    if (!block.ok()) {
      return absl::InvalidArgumentError(
          absl::StrCat("block ", i, ": ", block.status().message()));
    }
    blocks.push_back(*std::move(block));
  }
  return blocks;
}

std::string ExportKeys(const KeyRegistry& keys) {
  std::string out;
  for (const auto& [id, key] : keys) absl::StrAppend(&out, id, " ", HexEncode(key), "\n");
  return out;
}

absl::StatusOr<KeyRegistry> ParseKeys(std::string_view text) {
  KeyRegistry keys;
  std::size_t line_no = 0;
  for (std::string_view line : internal::Split(text, '\n')) {
    ++line_no;
    line = internal::StripWhitespace(line);
    if (line.empty()) continue;
    std::vector<std::string_view> parts;
    for (std::string_view p : internal::Split(line, ' ')) {
      if (!p.empty()) parts.push_back(p);
    }
    uint32_t id;
    if (parts.size() != 2 || !absl::SimpleAtoi(internal::ToAbsl(parts[0]), &id)) {
      return absl::InvalidArgumentError(absl::StrCat("key file line ", line_no, ": malformed"));
    }
    absl::StatusOr<Bytes> key = HexDecode(parts[1]);
    if (!key.ok()) return key.status();
    keys[id] = *std::move(key);
  }
  return keys;
}

TxCost ComputeTxCost(uint64_t gas_used, double gas_price_gwei) {
  const double gwei = static_cast<double>(gas_used) * gas_price_gwei;
  return TxCost{gwei, gwei * 1e-9};
}

Ledger::Ledger(LedgerConfig config) : config_(config) {}

absl::Status Ledger::RegisterClient(uint32_t client_id, Bytes key) {
  if (keys_.contains(client_id)) {
    return absl::AlreadyExistsError(
        absl::StrCat("client ", client_id, " is already registered"));
  }
  if (key.empty()) return absl::InvalidArgumentError("empty client key");
  keys_.emplace(client_id, std::move(key));
  return absl::OkStatus();
}

absl::StatusOr<Receipt> Ledger::SubmitUpdate(UpdateTransaction tx) {
  if (!keys_.contains(tx.client_id)) {
    return absl::PermissionDeniedError(
        absl::StrCat("client ", tx.client_id, " is not registered"));
  }
  if (!SignatureValid(tx, keys_)) {
    return absl::UnauthenticatedError(
        absl::StrCat("signature verification failed for client ", tx.client_id));
  }
  if (tx.round != open_round()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "transaction for round ", tx.round, " but round ", open_round(), " is open"));
  }
  if (config_.base_gas == 0) return absl::FailedPreconditionError("base gas must be > 0");

  RngStream rng(config_.seed, tx.client_id, tx.round, StreamPurpose::kLatency);
  const double u = 2.0 * rng.Uniform() - 1.0;
  const double latency =
      std::max(kMinLatency, config_.latency_mean_s + config_.latency_jitter_s * u);
  clock_s_ += latency;

  tx.gas_used = config_.base_gas;
  tx.sim_timestamp = clock_s_;
  Receipt receipt;
  receipt.tx_digest = Sha256(SerializeTransaction(tx));
  receipt.gas_used = tx.gas_used;
  receipt.latency_s = latency;
  receipt.block_index = blocks_.size();
  pending_.push_back(std::move(tx));
  return receipt;
}

absl::StatusOr<Block> Ledger::SealBlock() {
  if (pending_.empty()) {
    return absl::FailedPreconditionError("no pending transactions to seal");
  }
  Block block;
  block.index = blocks_.size();
  if (!blocks_.empty()) block.prev_hash = blocks_.back().block_hash;
  block.transactions = std::move(pending_);
  pending_.clear();
  block.sim_timestamp = clock_s_;
  block.block_hash = ComputeBlockHash(block);
  blocks_.push_back(block);
  return block;
}

ChainReport Ledger::VerifyChain() const { return VerifyBlocks(blocks_, &keys_); }

}  // namespace fedledger
