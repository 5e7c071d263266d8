#include "mnca/io/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace mnca {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

Image8 read_png(const std::string& path) {
  std::unique_ptr<std::FILE, FileCloser> file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ConfigError("cannot open image " + path);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&image, file.get())) {
    throw ConfigError("unsupported or corrupt image " + path + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGBA;
  Image8 out;
  out.width = static_cast<int>(image.width);
  out.height = static_cast<int>(image.height);
  out.channels = 4;
  out.pixels.resize(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    png_image_free(&image);
    throw ConfigError("failed decoding image " + path + ": " + image.message);
  }
  return out;
}

void write_png(const std::string& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3 && img.channels != 4) throw UsageError("write_png: unsupported channel count");
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * img.height * img.channels) {
    throw UsageError("write_png: pixel buffer size mismatch");
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = img.channels == 4 ? PNG_FORMAT_RGBA : (img.channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY);
  if (!png_image_write_to_file(&image, path.c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw ConfigError("cannot write image " + path + ": " + image.message);
  }
}

Grid<float> image_to_grid(const Image8& img, int target_size, int pad, float pad_value) {
  if (img.width < 1 || img.height < 1) throw ConfigError("empty image");
  if (pad < 0 || target_size < 0) throw UsageError("ingest_image: size and padding must be >= 0");
  const int w = target_size > 0 ? target_size : img.width;
  const int h = target_size > 0 ? target_size : img.height;
  Grid<float> g(4, h + 2 * pad, w + 2 * pad);
  g.data.setConstant(pad_value);
  for (int y = 0; y < h; ++y) {
    const int sy = std::min(img.height - 1, static_cast<int>((static_cast<long long>(y) * img.height) / h));
    for (int x = 0; x < w; ++x) {
      const int sx = std::min(img.width - 1, static_cast<int>((static_cast<long long>(x) * img.width) / w));
      const std::uint8_t* px = &img.pixels[(static_cast<std::size_t>(sy) * img.width + sx) * img.channels];
      for (int c = 0; c < 4; ++c) {
        float v;
        if (img.channels >= 3) {
          v = c < 3 ? px[c] / 255.0f : (img.channels == 4 ? px[3] / 255.0f : 1.0f);
        } else {
          v = c < 3 ? px[0] / 255.0f : (img.channels == 2 ? px[1] / 255.0f : 1.0f);
        }
        g.at(c, y + pad, x + pad) = v;
      }
    }
  }
  return g;
}

Grid<float> ingest_image(const std::string& path, int target_size, int pad, float pad_value) {
  return image_to_grid(read_png(path), target_size, pad, pad_value);
}

Image8 render_rgba(const Grid<float>& grid) {
  if (grid.channels() < 4) throw UsageError("render_rgba: grid needs four channels");
  Image8 img;
  img.width = grid.width;
  img.height = grid.height;
  img.channels = 4;
  img.pixels.resize(static_cast<std::size_t>(grid.pixels()) * 4);
  for (Index p = 0; p < grid.pixels(); ++p) {
    for (int c = 0; c < 4; ++c) {
      const float v = std::clamp(grid.data(c, p), 0.0f, 1.0f);
      img.pixels[static_cast<std::size_t>(p) * 4 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
    }
  }
  return img;
}

Image8 render_tissue(const CellGrid& grid, int scale) {
  if (scale < 1) throw UsageError("render_tissue: scale must be >= 1");
  Image8 img;
  img.width = grid.size * scale;
  img.height = grid.size * scale;
  img.channels = 3;
  img.pixels.resize(static_cast<std::size_t>(img.width) * img.height * 3);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const auto& colour = kTissuePalette.at(grid.at(y / scale, x / scale));
      std::copy(colour.begin(), colour.end(), &img.pixels[(static_cast<std::size_t>(y) * img.width + x) * 3]);
    }
  }
  return img;
}

Image8 render_heatmap(const std::vector<double>& values, int height, int width, double lo, double hi) {
  if (values.size() != static_cast<std::size_t>(height) * width) throw UsageError("render_heatmap: size mismatch");
  Image8 img;
  img.width = width;
  img.height = height;
  img.channels = 1;
  img.pixels.resize(values.size());
  const double span = hi > lo ? hi - lo : 1.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double t = std::clamp((values[i] - lo) / span, 0.0, 1.0);
    img.pixels[i] = static_cast<std::uint8_t>(std::lround(t * 255.0));
  }
  return img;
}

Grid<float> procedural_target(int size, int margin) {
  if (size < 8 || margin < 0 || 2 * margin >= size) throw UsageError("procedural_target: size too small");
  Grid<float> g(4, size, size);
  const double c = (size - 1) / 2.0;
  const double r = size / 2.0 - margin;
  auto put = [&](int y, int x, float red, float green, float blue) {
    g.at(0, y, x) = red;
    g.at(1, y, x) = green;
    g.at(2, y, x) = blue;
    g.at(3, y, x) = 1.0f;
  };
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dy = (y - c) / r;
      const double dx = (x - c) / r;
      const double d = std::sqrt(dx * dx + dy * dy);
      if (d > 1.0) continue;
      if (d > 0.9) {
        put(y, x, 0.55f, 0.35f, 0.05f);  // rim
        continue;
      }
      put(y, x, 1.0f, 0.8f, 0.2f);
      const double ex = std::abs(dx) - 0.35;
      const double ey = dy + 0.3;
      if (ex * ex + ey * ey < 0.025) put(y, x, 0.2f, 0.1f, 0.05f);  // eyes
      const double mouth = std::sqrt(dx * dx + (dy - 0.05) * (dy - 0.05));
      if (dy > 0.2 && mouth > 0.45 && mouth < 0.6) put(y, x, 0.75f, 0.15f, 0.1f);  // smile
    }
  }
  return g;
}

}  // namespace mnca
