#pragma once

#include <filesystem>
#include <string>

#include "crossgen/eval/evaluate.hpp"
#include "crossgen/util/png.hpp"

namespace crossgen::eval {

inline constexpr std::uint32_t kGridSeparator = 2;
inline constexpr std::uint8_t kSeparatorValue = 128;

// Row-major grid of [N, 1, h, w] images in [0, 1], `cols` per row, with
// 2-pixel mid-gray separators. Values are clamped and scaled to 0..255.
GrayImage make_image_grid(const Tensor& images, std::size_t cols);
void emit_image_grid(const Tensor& images, std::size_t cols, const std::filesystem::path& path);

// Interleaves rows of `cols` images: first row from `top`, then from
// `bottom`, and so on, for side-by-side generated-vs-real grids.
Tensor interleave_rows(const Tensor& top, const Tensor& bottom, std::size_t cols);

// Line-oriented `key: value` text.
std::string format_eval_report(const EvalReport& report);
// Tab-separated k, accuracy table with a header row.
std::string format_sweep_table(const MaskSweepResult& result);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace crossgen::eval
