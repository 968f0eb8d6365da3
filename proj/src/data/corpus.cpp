#include "crossgen/data/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>

#include "crossgen/util/errors.hpp"
#include "crossgen/util/log.hpp"

namespace crossgen::data {
namespace fs = std::filesystem;

namespace {

bool parse_int(std::string_view s, int& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool is_wav(const fs::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".wav";
}

}  // namespace

std::optional<FsddName> parse_fsdd_name(const std::string& filename) {
  const fs::path p(filename);
  if (!is_wav(p)) return std::nullopt;
  const std::string stem = p.stem().string();
  const auto first = stem.find('_');
  const auto last = stem.rfind('_');
  if (first == std::string::npos || first == last) return std::nullopt;
  FsddName name;
  name.speaker = stem.substr(first + 1, last - first - 1);
  if (!parse_int(std::string_view(stem).substr(0, first), name.digit) || name.digit < 0 || name.digit > 9 ||
      name.speaker.empty() || !parse_int(std::string_view(stem).substr(last + 1), name.index)) {
    return std::nullopt;
  }
  return name;
}

std::vector<audio::AudioClip> load_fsdd(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("FSDD directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file() || !is_wav(entry.path())) continue;
    if (!parse_fsdd_name(entry.path().filename().string())) {
      log_warning("skipping FSDD file with unparsable name: " + entry.path().string());
      continue;
    }
    files.push_back(entry.path());
  }
  if (files.empty()) throw Error("no clips found in " + dir.string());
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
  std::vector<audio::AudioClip> clips;
  clips.reserve(files.size());
  for (const auto& f : files) {
    const auto name = f.filename().string();
    auto clip = audio::read_wav(f, name);
    clip.label = parse_fsdd_name(name)->digit;
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::vector<audio::AudioClip> load_scd_digits(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("SCD directory not found: " + dir.string());
  std::vector<std::string> missing;
  for (const char* word : kDigitWords) {
    if (!fs::is_directory(dir / word)) missing.emplace_back(word);
  }
  if (!missing.empty()) throw Error(fmt::format("SCD is missing digit folders: {}", fmt::join(missing, ", ")));

  std::vector<audio::AudioClip> clips;
  for (int digit = 0; digit < 10; ++digit) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir / kDigitWords[digit])) {
      if (entry.is_regular_file() && is_wav(entry.path())) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      auto clip = audio::read_wav(f, std::string(kDigitWords[digit]) + "/" + f.filename().string());
      clip.label = digit;
      clips.push_back(std::move(clip));
    }
  }
  if (clips.empty()) throw Error("no clips found in " + dir.string());
  return clips;
}

std::vector<audio::Spectrogram> make_spectrograms(const std::vector<audio::AudioClip>& clips,
                                                  const audio::DspConfig& cfg) {
  std::vector<audio::Spectrogram> out;
  out.reserve(clips.size());
  for (const auto& clip : clips) out.push_back(audio::make_spectrogram(clip, cfg));
  return out;
}

}  // namespace crossgen::data
