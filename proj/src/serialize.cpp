// SPDX-License-Identifier: Apache-2.0

#include "pig/serialize.hpp"

#include <cstring>
#include <fstream>

#include "pig/errors.hpp"

namespace pig {

void ByteWriter::u32(uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  u32(bits);
}

void ByteWriter::f64(double v) {
  uint64_t bits;
  std::memcpy(&bits, &v, 8);
  u64(bits);
}

void ByteWriter::magic(const char tag[4]) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>(tag[i]));
}

void ByteWriter::str(const std::string& s) {
  u32(static_cast<uint32_t>(s.size()));
  buf_.insert(buf_.end(), s.begin(), s.end());
}

void ByteWriter::f64_array(const std::vector<double>& v) {
  u64(v.size());
  for (double x : v) f64(x);
}

void ByteWriter::f32_array(const std::vector<float>& v) {
  u64(v.size());
  for (float x : v) f32(x);
}

void ByteWriter::u64_array(const std::vector<uint64_t>& v) {
  u64(v.size());
  for (uint64_t x : v) u64(x);
}

void ByteWriter::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw FormatError("short write: " + path);
}

ByteReader ByteReader::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ByteReader(std::move(bytes));
}

void ByteReader::need(size_t n, const char* what) {
  if (pos_ + n > buf_.size()) throw FormatError(std::string("truncated input while reading ") + what);
}

uint8_t ByteReader::u8() {
  need(1, "u8");
  return buf_[pos_++];
}

uint32_t ByteReader::u32() {
  need(4, "u32");
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf_[pos_++]) << (8 * i);
  return v;
}

uint64_t ByteReader::u64() {
  need(8, "u64");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(buf_[pos_++]) << (8 * i);
  return v;
}

float ByteReader::f32() {
  uint32_t bits = u32();
  float v;
  std::memcpy(&v, &bits, 4);
  return v;
}

double ByteReader::f64() {
  uint64_t bits = u64();
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void ByteReader::expect_magic(const char tag[4], const std::string& what) {
  need(4, "magic");
  for (int i = 0; i < 4; ++i) {
    if (buf_[pos_ + static_cast<size_t>(i)] != static_cast<uint8_t>(tag[i])) {
      throw FormatError("bad magic for " + what + " (expected " + std::string(tag, 4) + ")");
    }
  }
  pos_ += 4;
}

std::string ByteReader::str() {
  uint32_t len = u32();
  need(len, "string");
  std::string s(reinterpret_cast<const char*>(buf_.data() + pos_), len);
  pos_ += len;
  return s;
}

std::vector<double> ByteReader::f64_array() {
  uint64_t n = u64();
  need(n * 8, "f64 array");
  std::vector<double> v(n);
  for (uint64_t i = 0; i < n; ++i) v[i] = f64();
  return v;
}

std::vector<float> ByteReader::f32_array() {
  uint64_t n = u64();
  need(n * 4, "f32 array");
  std::vector<float> v(n);
  for (uint64_t i = 0; i < n; ++i) v[i] = f32();
  return v;
}

std::vector<uint64_t> ByteReader::u64_array() {
  uint64_t n = u64();
  need(n * 8, "u64 array");
  std::vector<uint64_t> v(n);
  for (uint64_t i = 0; i < n; ++i) v[i] = u64();
  return v;
}

uint64_t fnv1a64(const void* data, size_t len, uint64_t seed) {
  const auto* p = static_cast<const uint8_t*>(data);
  uint64_t h = seed;
  for (size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

uint64_t fnv1a64(const std::vector<uint8_t>& v) { return fnv1a64(v.data(), v.size()); }

std::string hash_hex(uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

}  // namespace pig
