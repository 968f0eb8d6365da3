#include "crossgen/eval/report.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "crossgen/util/binary_io.hpp"
#include "crossgen/util/errors.hpp"

namespace crossgen::eval {

GrayImage make_image_grid(const Tensor& images, std::size_t cols) {
  if (images.rank() != 4 || images.shape()[1] != 1)
    throw DimensionError("image grid: expected [N,1,h,w] images, got " + tensor::to_string(images.shape()));
  const std::size_t n = images.shape()[0], h = images.shape()[2], w = images.shape()[3];
  if (n == 0) throw Error("image grid: no images");
  if (cols == 0) throw Error("image grid: cols must be positive");
  cols = std::min(cols, n);
  const std::size_t rows = (n + cols - 1) / cols;

  GrayImage grid;
  grid.width = static_cast<std::uint32_t>(cols * w + (cols - 1) * kGridSeparator);
  grid.height = static_cast<std::uint32_t>(rows * h + (rows - 1) * kGridSeparator);
  grid.pixels.assign(static_cast<std::size_t>(grid.width) * grid.height, kSeparatorValue);
  const auto values = images.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t top = (i / cols) * (h + kGridSeparator), left = (i % cols) * (w + kGridSeparator);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const float v = std::clamp(values[(i * h + y) * w + x], 0.0f, 1.0f);
        grid.pixels[(top + y) * grid.width + left + x] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
      }
    }
  }
  // Unused cells of a partial last row stay black.
  for (std::size_t i = n; i < rows * cols; ++i) {
    const std::size_t top = (i / cols) * (h + kGridSeparator), left = (i % cols) * (w + kGridSeparator);
    for (std::size_t y = 0; y < h; ++y)
      std::fill_n(grid.pixels.begin() + static_cast<std::ptrdiff_t>((top + y) * grid.width + left), w, 0);
  }
  return grid;
}

void emit_image_grid(const Tensor& images, std::size_t cols, const std::filesystem::path& path) {
  write_png(path, make_image_grid(images, cols));
}

Tensor interleave_rows(const Tensor& top, const Tensor& bottom, std::size_t cols) {
  if (top.shape() != bottom.shape() || top.rank() != 4)
    throw DimensionError("interleave_rows: mismatched image batches " + tensor::to_string(top.shape()) + " and " +
                         tensor::to_string(bottom.shape()));
  if (cols == 0) throw Error("interleave_rows: cols must be positive");
  const std::size_t n = top.shape()[0], image = top.size() / std::max<std::size_t>(n, 1);
  tensor::Shape shape = top.shape();
  shape[0] = 2 * n;
  std::vector<float> out;
  out.reserve(2 * top.size());
  for (std::size_t start = 0; start < n; start += cols) {
    const std::size_t count = std::min(cols, n - start);
    for (const Tensor* src : {&top, &bottom}) {
      const auto span = src->data().subspan(start * image, count * image);
      out.insert(out.end(), span.begin(), span.end());
    }
  }
  return Tensor(std::move(shape), std::move(out));
}

std::string format_eval_report(const EvalReport& report) {
  std::string out;
  out += fmt::format("dataset: {}\n", report.dataset);
  out += fmt::format("model: {}\n", report.model);
  if (report.alpha) out += fmt::format("alpha: {}\n", *report.alpha);
  out += fmt::format("accuracy: {}\n", report.accuracy);
  out += fmt::format("n_examples: {}\n", report.n_examples);
  out += fmt::format("seed: {}\n", report.seed);
  if (report.intra_class_variance) out += fmt::format("intra_class_variance: {}\n", *report.intra_class_variance);
  for (std::size_t c = 0; c < 10; ++c) out += fmt::format("confusion.{}: {}\n", c, fmt::join(report.confusion[c], " "));
  return out;
}

std::string format_sweep_table(const MaskSweepResult& result) {
  std::string out = "k\taccuracy\n";
  for (std::size_t i = 0; i < result.k.size(); ++i) out += fmt::format("{}\t{}\n", result.k[i], result.accuracy[i]);
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  write_file_atomically(path, [&](std::ostream& out) { out.write(text.data(), static_cast<std::streamsize>(text.size())); });
}

}  // namespace crossgen::eval
