#include "crossgen/util/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <vector>

#include "crossgen/util/errors.hpp"

namespace crossgen {

namespace {

std::uint32_t crc_update(std::uint32_t crc, const std::uint8_t* data, std::size_t n) {
  // zlib takes uInt lengths; feed large buffers in slices.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = static_cast<std::uint32_t>(::crc32(crc, data, chunk));
    data += chunk;
    n -= chunk;
  }
  return crc;
}

template <typename T>
void store_le(std::uint8_t* dst, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) dst[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

template <typename T>
T load_le(const std::uint8_t* src) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(src[i]) << (8 * i));
  return v;
}

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> data) {
  return crc_update(0, data.data(), data.size());
}

void BinaryWriter::bytes(std::span<const std::uint8_t> data) {
  out_.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out_) throw IoError("write failed");
  crc_ = crc_update(crc_, data.data(), data.size());
}

void BinaryWriter::u16(std::uint16_t v) {
  std::uint8_t b[2];
  store_le(b, v);
  bytes(b);
}

void BinaryWriter::u32(std::uint32_t v) {
  std::uint8_t b[4];
  store_le(b, v);
  bytes(b);
}

void BinaryWriter::u64(std::uint64_t v) {
  std::uint8_t b[8];
  store_le(b, v);
  bytes(b);
}

void BinaryWriter::f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }

void BinaryWriter::f32s(std::span<const float> values) {
  std::vector<std::uint8_t> buf(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i)
    store_le(buf.data() + 4 * i, std::bit_cast<std::uint32_t>(values[i]));
  bytes(buf);
}

void BinaryWriter::str(const std::string& s) {
  u32(static_cast<std::uint32_t>(s.size()));
  bytes({reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

void BinaryWriter::crc_trailer() {
  const std::uint32_t value = crc_;
  std::uint8_t b[4];
  store_le(b, value);
  out_.write(reinterpret_cast<const char*>(b), 4);
  if (!out_) throw IoError("write failed");
}

void BinaryReader::bytes(std::span<std::uint8_t> out, const char* what) {
  in_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (static_cast<std::size_t>(in_.gcount()) != out.size())
    throw ParseError(context_ + ": truncated while reading " + what);
  crc_ = crc_update(crc_, out.data(), out.size());
}

std::uint8_t BinaryReader::u8(const char* what) {
  std::uint8_t b;
  bytes({&b, 1}, what);
  return b;
}

std::uint16_t BinaryReader::u16(const char* what) {
  std::uint8_t b[2];
  bytes(b, what);
  return load_le<std::uint16_t>(b);
}

std::uint32_t BinaryReader::u32(const char* what) {
  std::uint8_t b[4];
  bytes(b, what);
  return load_le<std::uint32_t>(b);
}

std::uint64_t BinaryReader::u64(const char* what) {
  std::uint8_t b[8];
  bytes(b, what);
  return load_le<std::uint64_t>(b);
}

void BinaryReader::f32s(std::span<float> out, const char* what) {
  std::vector<std::uint8_t> buf(out.size() * 4);
  bytes(buf, what);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = std::bit_cast<float>(load_le<std::uint32_t>(buf.data() + 4 * i));
}

std::string BinaryReader::str(const char* what, std::uint32_t max_len) {
  const std::uint32_t n = u32(what);
  if (n > max_len) throw ParseError(context_ + ": implausible length for " + what);
  std::string s(n, '\0');
  bytes({reinterpret_cast<std::uint8_t*>(s.data()), n}, what);
  return s;
}

void BinaryReader::verify_crc_trailer() {
  const std::uint32_t expected = crc_;
  std::uint8_t b[4];
  in_.read(reinterpret_cast<char*>(b), 4);
  if (in_.gcount() != 4) throw ParseError(context_ + ": truncated while reading CRC32 trailer");
  if (load_le<std::uint32_t>(b) != expected) throw ParseError(context_ + ": checksum mismatch");
}

void BinaryReader::expect_eof() {
  if (in_.peek() != std::char_traits<char>::eof())
    throw ParseError(context_ + ": trailing bytes after CRC32 trailer");
}

void write_file_atomically(const std::filesystem::path& path,
                           const std::function<void(std::ostream&)>& writer) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    writer(out);
    out.flush();
    if (!out) throw IoError("write failed: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
  }
}

}  // namespace crossgen
