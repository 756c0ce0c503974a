#pragma once

// Little-endian byte (de)serialization shared by the EVT1, VOX1 and RWT1 formats.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evikit::io {

class ByteWriter {
public:
  void bytes(std::string_view raw);
  void u8(std::uint8_t v);
  void i8(std::int8_t v) { u8(static_cast<std::uint8_t>(v)); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }

private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; every failure is reported as a FormatError at the
/// offset where the read started.
class ByteReader {
public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::string bytes(std::size_t n, std::string_view what);
  std::uint8_t u8(std::string_view what);
  std::int8_t i8(std::string_view what) { return static_cast<std::int8_t>(u8(what)); }
  std::uint16_t u16(std::string_view what);
  std::uint32_t u32(std::string_view what);
  std::uint64_t u64(std::string_view what);
  float f32(std::string_view what);
  double f64(std::string_view what);

  std::uint64_t offset() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  bool at_end() const noexcept { return pos_ == data_.size(); }

private:
  void need(std::size_t n, std::string_view what) const;
  std::uint64_t uint_le(std::size_t n, std::string_view what);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> data);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

} // namespace evikit::io
