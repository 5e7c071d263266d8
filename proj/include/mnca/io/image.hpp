#pragma once

#include "mnca/tensor.hpp"
#include "mnca/tissue.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace mnca {

/// 8-bit image, row-major, `channels` interleaved values per pixel.
struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 4;
  std::vector<std::uint8_t> pixels;
};

Image8 read_png(const std::string& path);
void write_png(const std::string& path, const Image8& image);

/// RGBA in [0, 1] as a 4 x H x W grid. RGB inputs get alpha 1, grey inputs
/// are expanded. Nearest-neighbour resize to target_size x target_size
/// (0 keeps the original size), then `pad` pixels of `pad_value` on every
/// side.
Grid<float> ingest_image(const std::string& path, int target_size, int pad, float pad_value = 0.0f);
Grid<float> image_to_grid(const Image8& image, int target_size, int pad, float pad_value = 0.0f);

/// First four channels clamped to [0, 1] as RGBA.
Image8 render_rgba(const Grid<float>& grid);

/// Label colours: EMPTY white, then stem, int1, int2, diff1, diff2.
inline constexpr std::array<std::array<std::uint8_t, 3>, kCellLabels> kTissuePalette{{
    {255, 255, 255},
    {214, 39, 40},
    {255, 127, 14},
    {44, 160, 44},
    {31, 119, 180},
    {148, 103, 189},
}};

Image8 render_tissue(const CellGrid& grid, int scale = 1);

/// One row of values in [lo, hi] mapped to grey levels, as an H x W image.
Image8 render_heatmap(const std::vector<double>& values, int height, int width, double lo = 0.0, double hi = 1.0);

/// Procedural RGBA target: a smiling face on a transparent background,
/// `size` x `size` with a `margin` pixel transparent border.
Grid<float> procedural_target(int size, int margin = 4);

}  // namespace mnca
