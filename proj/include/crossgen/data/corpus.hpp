#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossgen/audio/mel.hpp"
#include "crossgen/audio/wav.hpp"

namespace crossgen::data {

struct FsddName {
  int digit;
  std::string speaker;
  int index;
};

// Parses "{digit}_{speaker}_{index}.wav".
std::optional<FsddName> parse_fsdd_name(const std::string& filename);

// All FSDD recordings in `dir` (recursively), sorted by file name. Files whose
// names do not parse are skipped with a warning.
std::vector<audio::AudioClip> load_fsdd(const std::filesystem::path& dir);

inline constexpr const char* kDigitWords[10] = {"zero", "one", "two",   "three", "four",
                                                "five", "six", "seven", "eight", "nine"};

// Digit-word folders of a Speech Commands tree; source ids are "word/file.wav".
std::vector<audio::AudioClip> load_scd_digits(const std::filesystem::path& dir);

// Spectrograms in input order.
std::vector<audio::Spectrogram> make_spectrograms(const std::vector<audio::AudioClip>& clips,
                                                  const audio::DspConfig& cfg = {});

}  // namespace crossgen::data
