#include "expressml/binary_io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "expressml/error.hpp"

namespace expressml {

static_assert(std::endian::native == std::endian::little, "containers assume a little-endian host");

void ByteWriter::magic(std::string_view tag) {
  for (char c : tag) buffer_.push_back(static_cast<std::uint8_t>(c));
}

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buffer_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buffer_.insert(buffer_.end(), s.begin(), s.end());
}

void ByteWriter::seal() { u32(crc32_of(buffer_)); }

void ByteReader::open_sealed(std::string_view magic) {
  const std::size_t head = std::min(data_.size(), magic.size());
  if (head == 0 || std::memcmp(data_.data(), magic.data(), head) != 0) {
    throw Error(ErrorCode::BadMagic, "expected container magic '" + std::string(magic) + "'");
  }
  if (head < magic.size()) throw Error(ErrorCode::TruncatedFile, "container ends inside its magic");
  if (data_.size() < magic.size() + 4) throw Error(ErrorCode::TruncatedFile, "container too short");
  const std::size_t body = data_.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(data_[body + i]) << (8 * i);
  checksum_failed_ = crc32_of(data_.first(body)) != stored;
  data_ = data_.first(body);
  pos_ = magic.size();
}

const std::uint8_t* ByteReader::take(std::size_t n) {
  if (n > data_.size() - pos_) {
    throw Error(ErrorCode::TruncatedFile, "container ends before its declared payload");
  }
  const std::uint8_t* p = data_.data() + pos_;
  pos_ += n;
  return p;
}

std::uint8_t ByteReader::u8() { return *take(1); }

std::uint32_t ByteReader::u32() {
  const std::uint8_t* p = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  const std::uint8_t* p = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

float ByteReader::f32() { return std::bit_cast<float>(u32()); }

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const std::uint32_t n = u32();
  const std::uint8_t* p = take(n);
  return std::string(reinterpret_cast<const char*>(p), n);
}

void ByteReader::f32_array(std::span<float> out) {
  const std::uint8_t* p = take(out.size() * sizeof(float));
  std::memcpy(out.data(), p, out.size() * sizeof(float));
}

void ByteReader::check_checksum() const {
  if (checksum_failed_) throw Error(ErrorCode::ChecksumMismatch, "CRC32 does not match container contents");
}

void ByteReader::expect_end() const {
  check_checksum();
  if (pos_ != data_.size()) throw Error(ErrorCode::ChecksumMismatch, "trailing bytes after payload");
}

std::uint32_t crc32_of(std::span<const std::uint8_t> data) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  std::size_t offset = 0;
  while (offset < data.size()) {
    const std::size_t chunk = std::min<std::size_t>(data.size() - offset, 1u << 30);
    crc = ::crc32(crc, data.data() + offset, static_cast<uInt>(chunk));
    offset += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : data) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for reading");
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), {});
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw Error(ErrorCode::Io, "short write to '" + path.string() + "'");
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  write_file(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

}  // namespace expressml
