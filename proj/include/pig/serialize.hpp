// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pig {

// Little-endian binary writer used by every persisted format (checkpoints,
// datasets, indexes). Everything goes through an in-memory buffer so files
// can be compared and hashed byte-for-byte.
class ByteWriter {
 public:
  void u8(uint8_t v) { buf_.push_back(v); }
  void u32(uint32_t v);
  void u64(uint64_t v);
  void f32(float v);
  void f64(double v);
  void magic(const char tag[4]);
  void str(const std::string& s);  // u32 length + raw bytes
  void f64_array(const std::vector<double>& v);
  void f32_array(const std::vector<float>& v);
  void u64_array(const std::vector<uint64_t>& v);

  const std::vector<uint8_t>& bytes() const { return buf_; }
  void write_file(const std::string& path) const;

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<uint8_t> bytes) : buf_(std::move(bytes)) {}
  static ByteReader from_file(const std::string& path);

  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  void expect_magic(const char tag[4], const std::string& what);
  std::string str();
  std::vector<double> f64_array();
  std::vector<float> f32_array();
  std::vector<uint64_t> u64_array();

  size_t remaining() const { return buf_.size() - pos_; }
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(size_t n, const char* what);
  std::vector<uint8_t> buf_;
  size_t pos_ = 0;
};

// FNV-1a 64-bit; stable content hashing for configs and parameter blobs.
uint64_t fnv1a64(const void* data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL);
uint64_t fnv1a64(const std::string& s);
uint64_t fnv1a64(const std::vector<uint8_t>& v);

std::string hash_hex(uint64_t h);

}  // namespace pig
