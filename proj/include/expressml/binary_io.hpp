#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace expressml {

/// Little-endian serializer for the versioned containers (datasets, models).
class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> data) { buffer_.insert(buffer_.end(), data.begin(), data.end()); }
  void magic(std::string_view tag);
  void u8(std::uint8_t v) { buffer_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v);
  void f64(double v);
  /// u32 length prefix followed by the UTF-8 bytes.
  void str(std::string_view s);

  /// Appends the CRC32 of everything written so far.
  void seal();

  const std::vector<std::uint8_t>& data() const noexcept { return buffer_; }
  std::vector<std::uint8_t> take() noexcept { return std::move(buffer_); }

 private:
  std::vector<std::uint8_t> buffer_;
};

/// Bounds-checked reader; overruns raise TruncatedFile.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  /// Validates the 4-byte magic (BadMagic) and restricts reads to the payload.
  /// The trailing CRC32 is verified by expect_end(), after the structure has
  /// been walked, so a short file reports TruncatedFile first.
  void open_sealed(std::string_view magic);

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32();
  double f64();
  std::string str();
  void f32_array(std::span<float> out);

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  /// Raises ChecksumMismatch on a CRC failure or unread trailing payload.
  void expect_end() const;
  void check_checksum() const;
  bool checksum_ok() const noexcept { return !checksum_failed_; }

 private:
  const std::uint8_t* take(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  bool checksum_failed_ = false;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> data) noexcept;

/// 64-bit FNV-1a, used for dataset fingerprints and artifact hashes.
std::uint64_t fnv1a64(std::span<const std::uint8_t> data) noexcept;

std::string hex64(std::uint64_t value);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace expressml
