#include "crossgen/audio/mel.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "crossgen/util/errors.hpp"

namespace crossgen::audio {

using tensor::Tensor64;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

namespace {

// n_mels + 2 edge frequencies; filter m spans edges[m]..edges[m + 2].
std::vector<double> mel_edges(std::size_t n_mels, int sample_rate) {
  const double top = hz_to_mel(sample_rate / 2.0);
  std::vector<double> edges(n_mels + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = mel_to_hz(top * static_cast<double>(i) / static_cast<double>(n_mels + 1));
  }
  return edges;
}

// FFTW planning touches global state.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace

std::vector<double> mel_center_frequencies(std::size_t n_mels, int sample_rate) {
  auto edges = mel_edges(n_mels, sample_rate);
  return {edges.begin() + 1, edges.end() - 1};
}

Tensor64 mel_filterbank(std::size_t n_mels, std::size_t window, int sample_rate) {
  if (n_mels == 0 || window < 2 || sample_rate <= 0) throw Error("mel_filterbank: invalid configuration");
  const std::size_t n_bins = window / 2 + 1;
  const auto edges = mel_edges(n_mels, sample_rate);
  Tensor64 bank({n_mels, n_bins});
  for (std::size_t m = 0; m < n_mels; ++m) {
    const double lo = edges[m], mid = edges[m + 1], hi = edges[m + 2];
    for (std::size_t b = 0; b < n_bins; ++b) {
      const double f = static_cast<double>(b) * sample_rate / static_cast<double>(window);
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      bank[m * n_bins + b] = w;
    }
  }
  return bank;
}

Tensor64 power_spectrogram(std::span<const float> samples, const DspConfig& cfg) {
  if (cfg.window < 2 || cfg.hop == 0) throw Error("power_spectrogram: invalid window/hop");
  const std::size_t n = cfg.window;
  const std::size_t n_bins = n / 2 + 1;
  const std::size_t length = std::max(samples.size(), n);
  const std::size_t n_frames = 1 + (length - n) / cfg.hop;

  std::vector<double> hann(n);
  for (std::size_t i = 0; i < n; ++i) {
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
  }

  auto* frame = static_cast<double*>(fftw_malloc(sizeof(double) * n));
  auto* spectrum = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_bins));
  std::unique_ptr<void, decltype(&fftw_free)> frame_guard(frame, fftw_free);
  std::unique_ptr<void, decltype(&fftw_free)> spectrum_guard(spectrum, fftw_free);
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard lock(planner_mutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n), frame, spectrum, FFTW_ESTIMATE));
  }
  if (!plan) throw Error("power_spectrogram: FFT planning failed");

  Tensor64 out({n_frames, n_bins});
  for (std::size_t t = 0; t < n_frames; ++t) {
    const std::size_t start = t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = start + i < samples.size() ? samples[start + i] : 0.0;
      frame[i] = s * hann[i];
    }
    fftw_execute(plan.get());
    for (std::size_t b = 0; b < n_bins; ++b) {
      out[t * n_bins + b] = spectrum[b][0] * spectrum[b][0] + spectrum[b][1] * spectrum[b][1];
    }
  }
  return out;
}

Tensor64 mel_spectrogram(const AudioClip& clip, const DspConfig& cfg) {
  if (clip.samples.empty()) throw Error("mel_spectrogram: empty clip " + clip.source_id);
  const auto power = power_spectrogram(clip.samples, cfg);
  const auto bank = mel_filterbank(cfg.n_mels, cfg.window, clip.sample_rate);
  const std::size_t n_frames = power.dim(0), n_bins = power.dim(1);
  Tensor64 out({cfg.n_mels, n_frames});
  for (std::size_t m = 0; m < cfg.n_mels; ++m) {
    for (std::size_t t = 0; t < n_frames; ++t) {
      double acc = 0.0;
      for (std::size_t b = 0; b < n_bins; ++b) acc += bank[m * n_bins + b] * power[t * n_bins + b];
      out[m * n_frames + t] = std::log1p(acc);
    }
  }
  return out;
}

Tensor64 resize_bilinear(const Tensor64& img, std::size_t out_h, std::size_t out_w) {
  if (img.rank() != 2) throw DimensionError("resize_bilinear: expected a 2-D image, got " + tensor::to_string(img.shape()));
  const std::size_t h = img.dim(0), w = img.dim(1);
  auto coord = [](std::size_t i, std::size_t in, std::size_t out) {
    if (out == 1 || in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  };
  Tensor64 out({out_h, out_w});
  for (std::size_t y = 0; y < out_h; ++y) {
    const double sy = coord(y, h, out_h);
    const std::size_t y0 = std::min(static_cast<std::size_t>(sy), h - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < out_w; ++x) {
      const double sx = coord(x, w, out_w);
      const std::size_t x0 = std::min(static_cast<std::size_t>(sx), w - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      const double top = img[y0 * w + x0] + fx * (img[y0 * w + x1] - img[y0 * w + x0]);
      const double bottom = img[y1 * w + x0] + fx * (img[y1 * w + x1] - img[y1 * w + x0]);
      out[y * out_w + x] = top + fy * (bottom - top);
    }
  }
  return out;
}

Tensor64 normalize01(const Tensor64& img) {
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  Tensor64 out(img.shape());
  if (!(*hi > *lo)) return out;
  const double range = *hi - *lo;
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = (img[i] - *lo) / range;
  return out;
}

Spectrogram make_spectrogram(const AudioClip& clip, const DspConfig& cfg) {
  auto img = normalize01(resize_bilinear(mel_spectrogram(clip, cfg), cfg.out_size, cfg.out_size));
  Spectrogram s;
  s.pixels = img.cast<float>();
  s.label = clip.label;
  s.source_id = clip.source_id;
  return s;
}

}  // namespace crossgen::audio
