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

#ifndef FEDLEDGER_CAS_H_
#define FEDLEDGER_CAS_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace fedledger {

using Digest = std::array<uint8_t, 32>;
using Bytes = std::vector<uint8_t>;

Digest Sha256(std::span<const uint8_t> data);
Digest HmacSha256(std::span<const uint8_t> key, std::span<const uint8_t> data);

std::string HexEncode(std::span<const uint8_t> data);
absl::StatusOr<Bytes> HexDecode(std::string_view hex);

// "sha256:<64 lowercase hex chars>".
struct ContentAddress {
  Digest digest{};

  static ContentAddress Of(std::span<const uint8_t> data);
  static absl::StatusOr<ContentAddress> Parse(std::string_view text);
  std::string ToString() const;
  std::string Hex() const;

  friend auto operator<=>(const ContentAddress&, const ContentAddress&) = default;
};

// Immutable blob store keyed by SHA-256. Safe for concurrent use; concurrent
// puts of identical content store one blob.
class ContentStore {
 public:
  // In-memory only.
  ContentStore() = default;
  // Also writes every new blob to `directory`/<hex digest>.
  static absl::StatusOr<ContentStore> WithDirectory(std::string directory);

  ContentStore(ContentStore&& other) noexcept;
  ContentStore& operator=(ContentStore&&) = delete;
  ContentStore(const ContentStore&) = delete;
  ContentStore& operator=(const ContentStore&) = delete;

  absl::StatusOr<ContentAddress> Put(std::span<const uint8_t> data);
  // Returns the stored bytes after re-checking their digest.
  absl::StatusOr<Bytes> Get(const ContentAddress& address) const;
  bool Contains(const ContentAddress& address) const;

  // Sum of the sizes of unique blobs.
  std::size_t TotalSize() const;
  std::size_t BlobCount() const;
  std::vector<std::size_t> BlobSizes() const;

 private:
  mutable std::mutex mu_;
  std::map<ContentAddress, Bytes> blobs_;
  std::size_t total_size_ = 0;
  std::optional<std::string> directory_;
};

// Serialized model update:
//   "FCUP" | u16 version | u32 round | u32 client_id | u64 dim | dim x f64
// All integers and floats little-endian.
inline constexpr uint16_t kUpdateBlobVersion = 1;

struct UpdateBlob {
  uint32_t round = 0;
  uint32_t client_id = 0;
  std::vector<double> values;
};

Bytes EncodeUpdateBlob(uint32_t round, uint32_t client_id,
                       std::span<const double> values);
absl::StatusOr<UpdateBlob> DecodeUpdateBlob(std::span<const uint8_t> blob);

}  // namespace fedledger

#endif  // FEDLEDGER_CAS_H_
