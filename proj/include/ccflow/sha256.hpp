#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ccflow {

// Incremental SHA-256 (FIPS 180-4).
class Sha256 {
 public:
  Sha256() { reset(); }
  void reset();
  void update(const void* data, size_t len);
  std::string hex_digest();  // finalizes

  static std::string of_bytes(const void* data, size_t len);
  static std::string of_string(const std::string& s);
  static std::string of_file(const std::string& path);

 private:
  void process_block(const std::uint8_t* block);
  std::uint32_t state_[8];
  std::uint64_t bit_len_ = 0;
  std::uint8_t buffer_[64];
  size_t buffer_len_ = 0;
};

}  // namespace ccflow
