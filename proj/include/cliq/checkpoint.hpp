#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cliq/tensor.hpp"

namespace cliq::checkpoint {

// Tensor payload  format: a fixed 16-byte header followed by the row-major
// float32 data, everything little-endian.
//   bytes  0..3   magic "CLQT"
//   bytes  4..7   rank, u32 (0..4)
//   bytes  8..15  dims, u16 x 4 (unused trailing dims stored as 1)
// Dims above 65535 are rejected at encode time.
std::vector<std::uint8_t> encode_tensor(const Tensor& t);
Tensor decode_tensor(std::span<const std::uint8_t> bytes);  // CheckpointError

// A named payload set stored as payloads/<file>.bin next to a manifest that
// records a SHA-256 per payload. This is the storage layer; the harness
// decides what goes in it.
class PayloadStore {
 public:
  void put(const std::string& name, const Tensor& t);
  const Tensor& get(const std::string& name) const;  // invalid_argument if absent
  bool has(const std::string& name) const;
  const std::vector<std::string>& names() const { return order_; }
  std::size_t payload_bytes(const std::string& name) const;

 private:
  std::vector<std::string> order_;
  std::map<std::string, Tensor> tensors_;
};

// Writes payloads plus the serialized manifest JSON text (which must embed
// the payload index produced by manifest_index). Read back with read_store.
void write_payloads(const std::filesystem::path& dir, const PayloadStore& store);

// Payload index rows for the manifest: name, file, byte count, sha256 hex.
struct PayloadIndexEntry {
  std::string name;
  std::string file;
  std::uint64_t bytes = 0;
  std::string sha256;
};
std::vector<PayloadIndexEntry> manifest_index(const PayloadStore& store);

// Loads and checksum-verifies the payloads named by the index. Throws
// CheckpointError: truncated / checksum_mismatch / malformed.
PayloadStore read_payloads(const std::filesystem::path& dir,
                           const std::vector<PayloadIndexEntry>& index);

}  // namespace cliq::checkpoint
