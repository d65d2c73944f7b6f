#include "cliq/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

#include "cliq/errors.hpp"
#include "cliq/sha256.hpp"

namespace cliq::checkpoint {

namespace {

constexpr char kMagic[4] = {'C', 'L', 'Q', 'T'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xff));
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint32_t>(b[off]) | (static_cast<std::uint32_t>(b[off + 1]) << 8) |
         (static_cast<std::uint32_t>(b[off + 2]) << 16) |
         (static_cast<std::uint32_t>(b[off + 3]) << 24);
}

std::uint16_t get_u16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>(static_cast<std::uint16_t>(b[off]) |
                                    (static_cast<std::uint16_t>(b[off + 1]) << 8));
}

std::string file_name_for(const std::string& payload_name) {
  std::string f = payload_name;
  for (char& c : f) {
    if (c == '/') c = '_';
  }
  return f + ".bin";
}

}  // namespace

std::vector<std::uint8_t> encode_tensor(const Tensor& t) {
  if (t.rank() > 4) throw std::invalid_argument("encode_tensor: rank > 4");
  std::vector<std::uint8_t> out;
  out.reserve(16 + t.size() * 4);
  for (const char c : kMagic) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (int i = 0; i < 4; ++i) {
    std::uint32_t d = 1;
    if (i < t.rank()) {
      if (t.dim(i) > 0xffff) throw std::invalid_argument("encode_tensor: dim > 65535");
      d = static_cast<std::uint32_t>(t.dim(i));
    }
    put_u16(out, static_cast<std::uint16_t>(d));
  }
  for (const float v : t.flat()) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
  }
  return out;
}

Tensor decode_tensor(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 16) {
    throw CheckpointError(CheckpointError::Kind::truncated, "tensor payload shorter than header");
  }
  if (std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::malformed, "tensor payload magic mismatch");
  }
  const std::uint32_t rank = get_u32(bytes, 4);
  if (rank > 4) {
    throw CheckpointError(CheckpointError::Kind::malformed, "tensor payload rank > 4");
  }
  std::vector<int> shape;
  std::size_t numel = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    const std::uint16_t d = get_u16(bytes, 8 + 2 * i);
    if (d == 0) {
      throw CheckpointError(CheckpointError::Kind::malformed, "tensor payload zero dim");
    }
    shape.push_back(static_cast<int>(d));
    numel *= d;
  }
  if (bytes.size() != 16 + numel * 4) {
    throw CheckpointError(CheckpointError::Kind::truncated,
                          "tensor payload length does not match dims");
  }
  std::vector<float> data(numel);
  for (std::size_t i = 0; i < numel; ++i) {
    const std::uint32_t bits = get_u32(bytes, 16 + 4 * i);
    std::memcpy(&data[i], &bits, 4);
  }
  return Tensor(std::move(shape), std::move(data));
}

void PayloadStore::put(const std::string& name, const Tensor& t) {
  if (tensors_.count(name)) {
    throw std::invalid_argument("payload store: duplicate payload '" + name + "'");
  }
  order_.push_back(name);
  tensors_.emplace(name, t);
}

const Tensor& PayloadStore::get(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) {
    throw std::invalid_argument("payload store: missing payload '" + name + "'");
  }
  return it->second;
}

bool PayloadStore::has(const std::string& name) const { return tensors_.count(name) > 0; }

std::size_t PayloadStore::payload_bytes(const std::string& name) const {
  return 16 + get(name).size() * 4;
}

std::vector<PayloadIndexEntry> manifest_index(const PayloadStore& store) {
  std::vector<PayloadIndexEntry> index;
  index.reserve(store.names().size());
  for (const std::string& name : store.names()) {
    const std::vector<std::uint8_t> bytes = encode_tensor(store.get(name));
    PayloadIndexEntry e;
    e.name = name;
    e.file = file_name_for(name);
    e.bytes = bytes.size();
    e.sha256 = sha256_hex(bytes.data(), bytes.size());
    index.push_back(std::move(e));
  }
  return index;
}

void write_payloads(const std::filesystem::path& dir, const PayloadStore& store) {
  std::filesystem::create_directories(dir / "payloads");
  for (const std::string& name : store.names()) {
    const std::vector<std::uint8_t> bytes = encode_tensor(store.get(name));
    const std::filesystem::path path = dir / "payloads" / file_name_for(name);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
}

PayloadStore read_payloads(const std::filesystem::path& dir,
                           const std::vector<PayloadIndexEntry>& index) {
  PayloadStore store;
  for (const PayloadIndexEntry& e : index) {
    const std::filesystem::path path = dir / "payloads" / e.file;
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      throw CheckpointError(CheckpointError::Kind::truncated,
                            "missing payload file " + path.string());
    }
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    if (bytes.size() != e.bytes) {
      throw CheckpointError(CheckpointError::Kind::truncated,
                            "payload " + e.name + " has unexpected length");
    }
    if (sha256_hex(bytes.data(), bytes.size()) != e.sha256) {
      throw CheckpointError(CheckpointError::Kind::checksum_mismatch,
                            "payload " + e.name + " failed its checksum");
    }
    store.put(e.name, decode_tensor(bytes));
  }
  return store;
}

}  // namespace cliq::checkpoint
