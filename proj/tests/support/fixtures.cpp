#include "fixtures.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <string>

#include "crossgen/audio/wav.hpp"
#include "crossgen/data/corpus.hpp"
#include "crossgen/util/rng.hpp"

namespace crossgen::fixtures {
namespace fs = std::filesystem;

TempDir::TempDir(const char* tag) {
  Rng rng(std::random_device{}());
  path_ = fs::temp_directory_path() / (std::string("crossgen-") + tag + "-" + std::to_string(rng.next_u64() % 1000000000));
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::vector<data::ImageSample> synthetic_digits(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<data::ImageSample> out;
  for (std::size_t n = 0; n < per_class; ++n) {
    for (int digit = 0; digit < 10; ++digit) {
      data::ImageSample s;
      s.label = digit;
      const double angle = digit * std::numbers::pi / 10.0 + rng.uniform(-0.15, 0.15);
      const double radius = 4.0 + digit * 0.8 + rng.uniform(-0.5, 0.5);
      const double cx = 14 + rng.uniform(-1.5, 1.5), cy = 14 + rng.uniform(-1.5, 1.5);
      for (std::size_t y = 0; y < 28; ++y) {
        for (std::size_t x = 0; x < 28; ++x) {
          const double dx = x - cx, dy = y - cy;
          // A ring of class-dependent radius crossed by a class-dependent bar.
          const double ring = std::exp(-std::pow(std::hypot(dx, dy) - radius, 2) / 2.0);
          const double bar = std::exp(-std::pow(dx * std::sin(angle) - dy * std::cos(angle), 2) / 1.5) *
                             (std::hypot(dx, dy) < radius ? 1.0 : 0.0);
          const double v = std::min(1.0, (digit % 2 ? ring : 0.6 * ring) + bar);
          s.pixels[y * 28 + x] = static_cast<std::uint8_t>(std::lround(v * 255));
        }
      }
      out.push_back(s);
    }
  }
  return out;
}

void write_mnist_dir(const fs::path& dir, std::size_t train_per_class, std::size_t test_per_class,
                     std::uint64_t seed) {
  fs::create_directories(dir);
  data::write_mnist_idx(synthetic_digits(train_per_class, seed), dir / "train-images-idx3-ubyte",
                        dir / "train-labels-idx1-ubyte");
  data::write_mnist_idx(synthetic_digits(test_per_class, seed + 1), dir / "t10k-images-idx3-ubyte",
                        dir / "t10k-labels-idx1-ubyte");
}

std::vector<float> synthetic_utterance(int digit, int speaker, int take, int sample_rate) {
  const std::size_t n = static_cast<std::size_t>(sample_rate) * (3 + (take % 3)) / 10;
  const double f0 = 250.0 + 180.0 * digit + 20.0 * speaker;
  const double sweep = (digit % 3 - 1) * 300.0;
  std::vector<float> s(n);
  double phase = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    phase += 2.0 * std::numbers::pi * (f0 + sweep * t) / sample_rate;
    const double envelope = std::sin(std::numbers::pi * t);
    s[i] = static_cast<float>(0.6 * envelope * (std::sin(phase) + 0.3 * std::sin(2 * phase + take)));
  }
  return s;
}

namespace {

void write_bytes(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

void write_fsdd_dir(const fs::path& dir, int speakers, int takes) {
  fs::create_directories(dir);
  const char* names[] = {"jackson", "nicolas", "theo", "yweweler", "george", "lucas"};
  for (int digit = 0; digit < 10; ++digit) {
    for (int sp = 0; sp < speakers; ++sp) {
      for (int take = 0; take < takes; ++take) {
        const auto file = std::to_string(digit) + "_" + names[sp % 6] + "_" + std::to_string(take) + ".wav";
        write_bytes(dir / file, audio::encode_wav_pcm16(synthetic_utterance(digit, sp, take, 8000), 8000));
      }
    }
  }
}

void write_scd_dir(const fs::path& dir, int per_word) {
  for (int digit = 0; digit < 10; ++digit) {
    fs::create_directories(dir / data::kDigitWords[digit]);
    for (int i = 0; i < per_word; ++i) {
      const auto file = "spk" + std::to_string(i % 7) + "_nohash_" + std::to_string(i) + ".wav";
      write_bytes(dir / data::kDigitWords[digit] / file,
                  audio::encode_wav_pcm16(synthetic_utterance(digit, i % 7, i, 16000), 16000));
    }
  }
  fs::create_directories(dir / "yes");
  write_bytes(dir / "yes" / "a_nohash_0.wav", audio::encode_wav_pcm16(synthetic_utterance(3, 0, 0, 16000), 16000));
}

data::PairSet small_pairset(std::size_t images_per_class, std::size_t clips_per_class, data::MappingKind kind,
                            std::uint64_t seed) {
  std::vector<audio::Spectrogram> specs;
  for (std::size_t take = 0; take < clips_per_class; ++take) {
    for (int digit = 0; digit < 10; ++digit) {
      audio::AudioClip clip{synthetic_utterance(digit, static_cast<int>(take % 4), static_cast<int>(take), 8000), 8000,
                            std::to_string(digit) + "_fixture_" + std::to_string(take) + ".wav", digit};
      specs.push_back(audio::make_spectrogram(clip));
    }
  }
  auto images = synthetic_digits(images_per_class, seed);
  return kind == data::MappingKind::many_to_one ? data::align_many_to_one(images, specs, seed, data::Split::train)
                                                : data::align_one_to_one(images, specs, seed, data::Split::train);
}

}  // namespace crossgen::fixtures
