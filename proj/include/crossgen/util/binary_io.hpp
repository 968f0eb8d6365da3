#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>

namespace crossgen {

// Little-endian writer that keeps a running CRC32 of everything written.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void bytes(std::span<const std::uint8_t> data);
  void u8(std::uint8_t v) { bytes({&v, 1}); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f32s(std::span<const float> values);
  // u32 length prefix followed by the raw bytes.
  void str(const std::string& s);
  // Appends the CRC32 of all preceding bytes (not itself included).
  void crc_trailer();

  std::uint32_t crc() const { return crc_; }

 private:
  std::ostream& out_;
  std::uint32_t crc_ = 0;
};

// Counterpart of BinaryWriter. Every short read raises ParseError naming
// `context` and the field being read.
class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string context) : in_(in), context_(std::move(context)) {}

  void bytes(std::span<std::uint8_t> out, const char* what);
  std::uint8_t u8(const char* what);
  std::uint16_t u16(const char* what);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  void f32s(std::span<float> out, const char* what);
  std::string str(const char* what, std::uint32_t max_len = 1u << 24);
  // Reads the trailing CRC and compares it with the running value.
  void verify_crc_trailer();
  // Raises unless the stream is exhausted.
  void expect_eof();

  std::uint32_t crc() const { return crc_; }

 private:
  std::istream& in_;
  std::string context_;
  std::uint32_t crc_ = 0;
};

std::uint32_t crc32_of(std::span<const std::uint8_t> data);

// Writes through a temporary sibling file and renames it into place, so a
// reader never observes a half-written file.
void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& writer);

}  // namespace crossgen
