#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include "cliq/checkpoint.hpp"
#include "cliq/errors.hpp"
#include "cliq/rng.hpp"
#include "cliq/sha256.hpp"
#include "oracles.hpp"

using namespace cliq;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  const fs::path dir = fs::temp_directory_path() / (std::string("cliq_ckpt_") + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("sha256 known answers") {
  CHECK(sha256_hex(nullptr, 0) ==
        "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  const char* abc = "abc";
  CHECK(sha256_hex(reinterpret_cast<const std::uint8_t*>(abc), 3) ==
        "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  // 56 bytes forces the two-block padding path.
  const std::string s(56, 'a');
  CHECK(sha256_hex(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()) ==
        "b35439a4ac6f0948b6d6f9e3c6af0f5f590ce20f1bde7090ef7970686ec6738a");
  const std::string long_s(200, 'x');
  CHECK(sha256_hex(reinterpret_cast<const std::uint8_t*>(long_s.data()), long_s.size()) ==
        "aa20c23e3201834050679e1d88941b9a6fed0557c9a705cb2c315e2e63fd486d");
}

TEST_CASE("tensor payload round trip is bit-identical across ranks") {
  Rng rng(3);
  const std::vector<std::vector<int>> shapes = {{7}, {3, 5}, {2, 3, 4}, {2, 2, 3, 3}};
  for (const auto& shape : shapes) {
    Tensor t(shape);
    oracles::fill_random(t, rng, 5.0);
    t[0] = -0.0f;  // signed zero must survive
    const std::vector<std::uint8_t> bytes = checkpoint::encode_tensor(t);
    CHECK(bytes.size() == 16 + t.size() * 4);
    const Tensor back = checkpoint::decode_tensor(bytes);
    CHECK(back.bit_equal(t));
  }
}

TEST_CASE("tensor payload header is validated") {
  Tensor t({2, 2});
  t.at(0, 0) = 1.5f;
  std::vector<std::uint8_t> bytes = checkpoint::encode_tensor(t);

  std::vector<std::uint8_t> short_bytes(bytes.begin(), bytes.begin() + 10);
  CHECK_THROWS_AS(checkpoint::decode_tensor(short_bytes), CheckpointError);

  std::vector<std::uint8_t> bad_magic = bytes;
  bad_magic[0] = 'X';
  try {
    (void)checkpoint::decode_tensor(bad_magic);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::malformed);
  }

  std::vector<std::uint8_t> truncated = bytes;
  truncated.pop_back();
  try {
    (void)checkpoint::decode_tensor(truncated);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::truncated);
  }
}

TEST_CASE("payload store writes, indexes, and verifies checksums") {
  const fs::path dir = temp_dir("store");
  checkpoint::PayloadStore store;
  Rng rng(9);
  Tensor a({4, 3});
  Tensor b({8});
  oracles::fill_random(a, rng);
  oracles::fill_random(b, rng);
  store.put("bank/x/gamma", a);
  store.put("head/x/weight", b);
  CHECK_THROWS_AS(store.put("bank/x/gamma", a), std::invalid_argument);
  CHECK(store.payload_bytes("head/x/weight") == 16 + 8 * 4);

  const auto index = checkpoint::manifest_index(store);
  REQUIRE(index.size() == 2);
  CHECK(index[0].name == "bank/x/gamma");
  CHECK(index[0].file == "bank_x_gamma.bin");
  checkpoint::write_payloads(dir, store);

  const checkpoint::PayloadStore back = checkpoint::read_payloads(dir, index);
  CHECK(back.get("bank/x/gamma").bit_equal(a));
  CHECK(back.get("head/x/weight").bit_equal(b));

  // Flip one byte in a payload: the checksum must catch it.
  {
    std::fstream f(dir / "payloads" / "bank_x_gamma.bin",
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(20);
    char c;
    f.seekg(20);
    f.get(c);
    c = static_cast<char>(c ^ 0x01);
    f.seekp(20);
    f.put(c);
  }
  try {
    (void)checkpoint::read_payloads(dir, index);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::checksum_mismatch);
  }

  // Truncate the other payload.
  fs::resize_file(dir / "payloads" / "head_x_weight.bin", 8);
  std::vector<checkpoint::PayloadIndexEntry> tail = {index[1]};
  try {
    (void)checkpoint::read_payloads(dir, tail);
    FAIL("expected CheckpointError");
  } catch (const CheckpointError& e) {
    CHECK(e.kind() == CheckpointError::Kind::truncated);
  }
  fs::remove_all(dir);
}
