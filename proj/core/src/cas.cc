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

#include "fedledger/cas.h"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "absl/strings/str_cat.h"
#include "text_util.h"

namespace fedledger {
namespace {

constexpr std::string_view kScheme = "sha256:";
constexpr char kHexDigits[] = "0123456789abcdef";

template <typename T>
void AppendLittleEndian(Bytes& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<uint8_t>(value >> (8 * i)));
  }
}

template <typename T>
T ReadLittleEndian(std::span<const uint8_t> in, std::size_t offset) {
  T value = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    value |= static_cast<T>(in[offset + i]) << (8 * i);
  }
  return value;
}

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  return -1;
}

absl::Status WriteFileAtomically(const std::filesystem::path& path,
                                 std::span<const uint8_t> data) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size()));
    if (!out) return absl::DataLossError(absl::StrCat("cannot write ", tmp.string()));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) return absl::DataLossError(absl::StrCat("rename failed: ", ec.message()));
  return absl::OkStatus();
}

}  // namespace

Digest Sha256(std::span<const uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr);
  return out;
}

Digest HmacSha256(std::span<const uint8_t> key, std::span<const uint8_t> data) {
  Digest out{};
  unsigned int len = 0;
  HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(),
       data.size(), out.data(), &len);
  return out;
}

std::string HexEncode(std::span<const uint8_t> data) {
  std::string hex;
  hex.reserve(data.size() * 2);
  for (uint8_t b : data) {
    hex.push_back(kHexDigits[b >> 4]);
    hex.push_back(kHexDigits[b & 0xf]);
  }
  return hex;
}

absl::StatusOr<Bytes> HexDecode(std::string_view hex) {
  if (hex.size() % 2 != 0) return absl::InvalidArgumentError("odd hex length");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = HexValue(hex[2 * i]);
    const int lo = HexValue(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      return absl::InvalidArgumentError("invalid (or uppercase) hex digit");
    }
    out[i] = static_cast<uint8_t>((hi << 4) | lo);
  }
  return out;
}

ContentAddress ContentAddress::Of(std::span<const uint8_t> data) {
  return ContentAddress{Sha256(data)};
}

absl::StatusOr<ContentAddress> ContentAddress::Parse(std::string_view text) {
  if (!text.starts_with(kScheme)) {
    return absl::InvalidArgumentError("content address must start with sha256:");
  }
  text.remove_prefix(kScheme.size());
  if (text.size() != 64) {
    return absl::InvalidArgumentError("content address needs 64 hex digits");
  }
  absl::StatusOr<Bytes> raw = HexDecode(text);
  if (!raw.ok()) return raw.status();
  ContentAddress addr;
  std::copy(raw->begin(), raw->end(), addr.digest.begin());
  return addr;
}

std::string ContentAddress::ToString() const {
  return absl::StrCat(internal::ToAbsl(kScheme), Hex());
}

std::string ContentAddress::Hex() const { return HexEncode(digest); }

absl::StatusOr<ContentStore> ContentStore::WithDirectory(std::string directory) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) {
    return absl::UnavailableError(
        absl::StrCat("cannot create ", directory, ": ", ec.message()));
  }
  ContentStore store;
  store.directory_ = std::move(directory);
  return store;
}

ContentStore::ContentStore(ContentStore&& other) noexcept {
  std::lock_guard<std::mutex> lock(other.mu_);
  blobs_ = std::move(other.blobs_);
  total_size_ = other.total_size_;
  directory_ = std::move(other.directory_);
}

absl::StatusOr<ContentAddress> ContentStore::Put(std::span<const uint8_t> data) {
  const ContentAddress address = ContentAddress::Of(data);
  std::lock_guard<std::mutex> lock(mu_);
  if (blobs_.contains(address)) return address;
  if (directory_) {
    absl::Status s = WriteFileAtomically(
        std::filesystem::path(*directory_) / address.Hex(), data);
    if (!s.ok()) return s;
  }
  blobs_.emplace(address, Bytes(data.begin(), data.end()));
  total_size_ += data.size();
  return address;
}

absl::StatusOr<Bytes> ContentStore::Get(const ContentAddress& address) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = blobs_.find(address);
  if (it == blobs_.end()) {
    return absl::NotFoundError(absl::StrCat("no blob ", address.ToString()));
  }
  if (Sha256(it->second) != address.digest) {
    return absl::DataLossError(
        absl::StrCat("blob ", address.ToString(), " failed its digest check"));
  }
  return it->second;
}

bool ContentStore::Contains(const ContentAddress& address) const {
  std::lock_guard<std::mutex> lock(mu_);
  return blobs_.contains(address);
}

std::size_t ContentStore::TotalSize() const {
  std::lock_guard<std::mutex> lock(mu_);
  return total_size_;
}

std::size_t ContentStore::BlobCount() const {
  std::lock_guard<std::mutex> lock(mu_);
  return blobs_.size();
}

std::vector<std::size_t> ContentStore::BlobSizes() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<std::size_t> sizes;
  sizes.reserve(blobs_.size());
  for (const auto& [addr, bytes] : blobs_) sizes.push_back(bytes.size());
  return sizes;
}

Bytes EncodeUpdateBlob(uint32_t round, uint32_t client_id,
                       std::span<const double> values) {
  Bytes out = {'F', 'C', 'U', 'P'};
  out.reserve(22 + 8 * values.size());
  AppendLittleEndian<uint16_t>(out, kUpdateBlobVersion);
  AppendLittleEndian<uint32_t>(out, round);
  AppendLittleEndian<uint32_t>(out, client_id);
  AppendLittleEndian<uint64_t>(out, values.size());
  for (double v : values) AppendLittleEndian<uint64_t>(out, std::bit_cast<uint64_t>(v));
  return out;
}

absl::StatusOr<UpdateBlob> DecodeUpdateBlob(std::span<const uint8_t> blob) {
  constexpr std::size_t kHeader = 4 + 2 + 4 + 4 + 8;
  if (blob.size() < kHeader || std::memcmp(blob.data(), "FCUP", 4) != 0) {
    return absl::InvalidArgumentError("not an FCUP update blob");
  }
  if (ReadLittleEndian<uint16_t>(blob, 4) != kUpdateBlobVersion) {
    return absl::InvalidArgumentError("unsupported update blob version");
  }
  UpdateBlob out;
  out.round = ReadLittleEndian<uint32_t>(blob, 6);
  out.client_id = ReadLittleEndian<uint32_t>(blob, 10);
  const uint64_t dim = ReadLittleEndian<uint64_t>(blob, 14);
  if (dim > (blob.size() - kHeader) / 8 || blob.size() != kHeader + 8 * dim) {
    return absl::InvalidArgumentError("update blob length does not match dim");
  }
  out.values.resize(dim);
  for (uint64_t i = 0; i < dim; ++i) {
    out.values[i] =
        std::bit_cast<double>(ReadLittleEndian<uint64_t>(blob, kHeader + 8 * i));
  }
  return out;
}

}  // namespace fedledger
