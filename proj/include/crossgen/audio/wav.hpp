#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace crossgen::audio {

struct AudioClip {
  std::vector<float> samples;  // mono, in [-1, 1]
  int sample_rate = 0;
  std::string source_id;
  int label = -1;
};

// Parses a RIFF/WAVE container holding 16-bit PCM or 32-bit IEEE float
// samples. Multi-channel audio is averaged to mono; int16 is divided by 32768.
AudioClip decode_wav(std::span<const std::uint8_t> bytes, std::string source_id = {});
AudioClip read_wav(const std::filesystem::path& path, std::string source_id = {});

// Mono 16-bit PCM writer, used for fixtures and tests.
std::vector<std::uint8_t> encode_wav_pcm16(std::span<const float> samples, int sample_rate);
std::vector<std::uint8_t> encode_wav_float32(std::span<const float> samples, int sample_rate);

}  // namespace crossgen::audio
