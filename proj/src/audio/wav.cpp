#include "crossgen/audio/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <optional>

#include "crossgen/util/errors.hpp"

namespace crossgen::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

std::uint16_t le16(const std::uint8_t* p) { return static_cast<std::uint16_t>(p[0] | (p[1] << 8)); }
std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

struct Format {
  std::uint16_t tag;
  std::uint16_t channels;
  std::uint32_t sample_rate;
  std::uint16_t bits;
};

Format parse_fmt(std::span<const std::uint8_t> body, const std::string& id) {
  if (body.size() < 16) throw ParseError(id + ": 'fmt ' chunk shorter than 16 bytes");
  Format f{le16(&body[0]), le16(&body[2]), le32(&body[4]), le16(&body[14])};
  if (f.tag == kFormatExtensible) {
    if (body.size() < 26) throw ParseError(id + ": extensible 'fmt ' chunk truncated");
    f.tag = le16(&body[24]);  // first two bytes of the subformat GUID
  }
  if (f.channels == 0) throw ParseError(id + ": 'fmt ' chunk declares zero channels");
  if (f.sample_rate == 0) throw ParseError(id + ": 'fmt ' chunk declares zero sample rate");
  const bool pcm16 = f.tag == kFormatPcm && f.bits == 16;
  const bool float32 = f.tag == kFormatFloat && f.bits == 32;
  if (!pcm16 && !float32) {
    throw ParseError(id + ": 'fmt ' chunk has unsupported codec (format " + std::to_string(f.tag) +
                     ", " + std::to_string(f.bits) + " bits)");
  }
  return f;
}

void append_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}
void append_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}
void append_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::vector<std::uint8_t> encode(std::uint16_t format, std::uint16_t bits, std::size_t data_bytes,
                                 int sample_rate) {
  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  append_tag(out, "RIFF");
  append_le32(out, static_cast<std::uint32_t>(36 + data_bytes));
  append_tag(out, "WAVE");
  append_tag(out, "fmt ");
  append_le32(out, 16);
  append_le16(out, format);
  append_le16(out, 1);
  append_le32(out, static_cast<std::uint32_t>(sample_rate));
  append_le32(out, static_cast<std::uint32_t>(sample_rate) * bits / 8);
  append_le16(out, bits / 8);
  append_le16(out, bits);
  append_tag(out, "data");
  append_le32(out, static_cast<std::uint32_t>(data_bytes));
  return out;
}

}  // namespace

AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source_id) {
  const std::string id = source_id.empty() ? "wav" : source_id;
  if (bytes.size() < 12) throw ParseError(id + ": RIFF header truncated");
  if (std::memcmp(bytes.data(), "RIFF", 4) != 0) throw ParseError(id + ": missing 'RIFF' chunk");
  if (std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) throw ParseError(id + ": RIFF form type is not 'WAVE'");

  std::optional<Format> fmt;
  std::optional<std::span<const std::uint8_t>> data;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::string tag(reinterpret_cast<const char*>(&bytes[pos]), 4);
    const std::size_t size = le32(&bytes[pos + 4]);
    pos += 8;
    if (size > bytes.size() - pos) throw ParseError(id + ": '" + tag + "' chunk truncated");
    auto body = bytes.subspan(pos, size);
    if (tag == "fmt ") {
      fmt = parse_fmt(body, id);
    } else if (tag == "data") {
      data = body;
    }
    pos += size + (size & 1);
  }
  if (!fmt) throw ParseError(id + ": missing 'fmt ' chunk");
  if (!data) throw ParseError(id + ": missing 'data' chunk");

  const std::size_t bytes_per_sample = fmt->bits / 8;
  const std::size_t frame_bytes = bytes_per_sample * fmt->channels;
  const std::size_t frames = data->size() / frame_bytes;
  if (frames == 0) throw ParseError(id + ": 'data' chunk holds no samples");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(fmt->sample_rate);
  clip.source_id = std::move(source_id);
  clip.samples.resize(frames);
  const std::uint8_t* p = data->data();
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fmt->channels; ++c, p += bytes_per_sample) {
      if (fmt->tag == kFormatPcm) {
        acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        acc += std::bit_cast<float>(le32(p));
      }
    }
    const double v = acc / fmt->channels;
    if (!std::isfinite(v)) throw ParseError(id + ": 'data' chunk holds a non-finite sample");
    clip.samples[f] = static_cast<float>(v);
  }
  return clip;
}

AudioClip read_wav(const std::filesystem::path& path, std::string source_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, source_id.empty() ? path.filename().string() : std::move(source_id));
}

std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate) {
  auto out = encode(kFormatPcm, 16, samples.size() * 2, sample_rate);
  for (float s : samples) {
    const double scaled = std::nearbyint(std::clamp(static_cast<double>(s), -1.0, 1.0) * 32768.0);
    append_le16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::min(scaled, 32767.0))));
  }
  return out;
}

std::vector<std::uint8_t> encode_wav_float32(std::span<const float> samples, int sample_rate) {
  auto out = encode(kFormatFloat, 32, samples.size() * 4, sample_rate);
  for (float s : samples) append_le32(out, std::bit_cast<std::uint32_t>(s));
  return out;
}

}  // namespace crossgen::audio
