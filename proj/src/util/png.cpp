#include "crossgen/util/png.hpp"

#include <zlib.h>

#include <array>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iterator>

#include "crossgen/util/binary_io.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen {

namespace {

constexpr std::array<std::uint8_t, 8> kSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

std::uint32_t get_be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

void put_chunk(std::vector<std::uint8_t>& out, const char type[4], std::span<const std::uint8_t> payload) {
  put_be32(out, static_cast<std::uint32_t>(payload.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), payload.begin(), payload.end());
  put_be32(out, crc32_of({out.data() + start, out.size() - start}));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  return pb <= pc ? b : c;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const GrayImage& image) {
  if (image.width == 0 || image.height == 0 ||
      image.pixels.size() != std::size_t{image.width} * image.height)
    throw Error("encode_png: pixel buffer does not match dimensions");

  std::vector<std::uint8_t> raw;
  raw.reserve((image.width + 1) * std::size_t{image.height});
  for (std::uint32_t y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const auto* row = image.pixels.data() + std::size_t{y} * image.width;
    raw.insert(raw.end(), row, row + image.width);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
    throw Error("encode_png: deflate failed");
  packed.resize(packed_size);

  std::vector<std::uint8_t> out(kSignature.begin(), kSignature.end());
  std::vector<std::uint8_t> header;
  put_be32(header, image.width);
  put_be32(header, image.height);
  header.insert(header.end(), {8, 0, 0, 0, 0});  // depth 8, grayscale, deflate, filter 0, no interlace
  put_chunk(out, "IHDR", header);
  put_chunk(out, "IDAT", packed);
  put_chunk(out, "IEND", {});
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& image) {
  const auto bytes = encode_png(image);
  write_file_atomically(path, [&](std::ostream& out) {
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  });
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || !std::equal(kSignature.begin(), kSignature.end(), bytes.begin()))
    throw ParseError("png: bad signature");
  GrayImage image;
  std::vector<std::uint8_t> packed;
  std::size_t pos = 8;
  bool seen_end = false;
  while (pos + 12 <= bytes.size() && !seen_end) {
    const std::uint32_t len = get_be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw ParseError("png: truncated chunk");
    const std::string type(reinterpret_cast<const char*>(&bytes[pos + 4]), 4);
    const std::uint8_t* payload = &bytes[pos + 8];
    if (get_be32(payload + len) != crc32_of({&bytes[pos + 4], len + 4}))
      throw ParseError("png: CRC mismatch in " + type);
    if (type == "IHDR") {
      if (len != 13) throw ParseError("png: bad IHDR");
      image.width = get_be32(payload);
      image.height = get_be32(payload + 4);
      if (payload[8] != 8 || payload[9] != 0 || payload[12] != 0)
        throw ParseError("png: only 8-bit non-interlaced grayscale is supported");
    } else if (type == "IDAT") {
      packed.insert(packed.end(), payload, payload + len);
    } else if (type == "IEND") {
      seen_end = true;
    }
    pos += 12 + len;
  }
  if (!seen_end || image.width == 0) throw ParseError("png: missing IHDR or IEND");

  const std::size_t stride = image.width + 1;
  std::vector<std::uint8_t> raw(stride * image.height);
  uLongf raw_size = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_size, packed.data(), static_cast<uLong>(packed.size())) != Z_OK ||
      raw_size != raw.size())
    throw ParseError("png: inflate failed");

  image.pixels.resize(std::size_t{image.width} * image.height);
  for (std::uint32_t y = 0; y < image.height; ++y) {
    const std::uint8_t filter = raw[y * stride];
    const std::uint8_t* src = &raw[y * stride + 1];
    std::uint8_t* dst = &image.pixels[std::size_t{y} * image.width];
    const std::uint8_t* up = y > 0 ? dst - image.width : nullptr;
    for (std::uint32_t x = 0; x < image.width; ++x) {
      const int a = x > 0 ? dst[x - 1] : 0;
      const int b = up ? up[x] : 0;
      const int c = (up && x > 0) ? up[x - 1] : 0;
      int pred = 0;
      switch (filter) {
        case 0: pred = 0; break;
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: pred = paeth(a, b, c); break;
        default: throw ParseError("png: unknown row filter");
      }
      dst[x] = static_cast<std::uint8_t>(src[x] + pred);
    }
  }
  return image;
}

GrayImage read_png(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(bytes);
}

}  // namespace crossgen
