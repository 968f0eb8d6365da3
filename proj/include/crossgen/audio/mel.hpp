#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "crossgen/audio/wav.hpp"
#include "crossgen/tensor/tensor.hpp"

namespace crossgen::audio {

struct DspConfig {
  std::size_t window = 512;
  std::size_t hop = 128;
  std::size_t n_mels = 64;
  std::size_t out_size = 48;
};

inline constexpr std::size_t kSpectrogramSide = 48;
inline constexpr std::size_t kSpectrogramPixels = kSpectrogramSide * kSpectrogramSide;

struct Spectrogram {
  tensor::Tensor pixels;  // [48, 48], values in [0, 1]; row 0 is the lowest mel band
  int label = -1;
  std::string source_id;
};

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Center frequencies of the n_mels triangles, evenly spaced on the mel scale
// between 0 Hz and Nyquist.
std::vector<double> mel_center_frequencies(std::size_t n_mels, int sample_rate);

// Triangular filters with unit peak, [n_mels, window/2 + 1].
tensor::Tensor64 mel_filterbank(std::size_t n_mels, std::size_t window, int sample_rate);

// |STFT|^2 with a periodic Hann window, [n_frames, window/2 + 1]. Inputs
// shorter than one window are zero-padded to one window.
tensor::Tensor64 power_spectrogram(std::span<const float> samples, const DspConfig& cfg);

// log(1 + mel power), [n_mels, n_frames].
tensor::Tensor64 mel_spectrogram(const AudioClip& clip, const DspConfig& cfg);

// Bilinear resize with corner-aligned sampling: output corners sample input
// corners exactly.
tensor::Tensor64 resize_bilinear(const tensor::Tensor64& img, std::size_t out_h, std::size_t out_w);

// (x - min) / (max - min); a constant image maps to zeros.
tensor::Tensor64 normalize01(const tensor::Tensor64& img);

// Full pipeline: mel spectrogram, resize to out_size square, normalize.
Spectrogram make_spectrogram(const AudioClip& clip, const DspConfig& cfg = {});

}  // namespace crossgen::audio
