#include "gwhp/render.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>

#include "gwhp/error.hpp"

namespace gwhp {

namespace {

constexpr int kMargin = 8;
constexpr int kBarGap = 4;
constexpr int kBarHeight = 10;
constexpr Rgb kOutline{128, 128, 128};

Rgb lerp(const Rgb& a, const Rgb& b, double f) {
  Rgb out;
  for (int c = 0; c < 3; ++c) {
    out[c] = static_cast<std::uint8_t>(std::lround(a[c] + (b[c] - a[c]) * f));
  }
  return out;
}

Rgb ramp(const std::vector<Rgb>& stops, double t) {
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * static_cast<double>(stops.size() - 1);
  const auto k = std::min(static_cast<std::size_t>(pos), stops.size() - 2);
  return lerp(stops[k], stops[k + 1], pos - static_cast<double>(k));
}

void draw_panel(Image& img, int ox, int oy, const ScalarField& f, int cp,
                const std::function<Rgb(double)>& color) {
  const Grid& g = f.grid();
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Rgb c = color(f(i, j));
      const int top = oy + (g.ny - 1 - j) * cp;
      for (int dy = 0; dy < cp; ++dy)
        for (int dx = 0; dx < cp; ++dx) img.set(ox + i * cp + dx, top + dy, c);
    }
  }
}

void draw_outline(Image& img, int ox, int oy, const ScalarField& f, double level, int cp) {
  const Grid& g = f.grid();
  auto inside = [&](int i, int j) {
    return i >= 0 && j >= 0 && i < g.nx && j < g.ny && f(i, j) >= level;
  };
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      if (!inside(i, j)) continue;
      const int left = ox + i * cp;
      const int top = oy + (g.ny - 1 - j) * cp;
      if (!inside(i - 1, j))
        for (int d = 0; d < cp; ++d) img.set(left, top + d, kOutline);
      if (!inside(i + 1, j))
        for (int d = 0; d < cp; ++d) img.set(left + cp - 1, top + d, kOutline);
      if (!inside(i, j + 1))
        for (int d = 0; d < cp; ++d) img.set(left + d, top, kOutline);
      if (!inside(i, j - 1))
        for (int d = 0; d < cp; ++d) img.set(left + d, top + cp - 1, kOutline);
    }
  }
}

void draw_bar(Image& img, int ox, int oy, int width, const std::function<Rgb(double)>& color) {
  for (int x = 0; x < width; ++x) {
    const Rgb c = color(width > 1 ? static_cast<double>(x) / (width - 1) : 0.0);
    for (int y = 0; y < kBarHeight; ++y) img.set(ox + x, oy + y, c);
  }
}

}  // namespace

Image::Image(int w, int h, Rgb fill) : width(w), height(h) {
  if (w < 1 || h < 1) throw ValidationError("image: dimensions must be positive");
  pixels.resize(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t k = 0; k < pixels.size(); k += 3) {
    pixels[k] = fill[0];
    pixels[k + 1] = fill[1];
    pixels[k + 2] = fill[2];
  }
}

void Image::set(int x, int y, Rgb c) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  const auto at = (static_cast<std::size_t>(y) * width + x) * 3;
  pixels[at] = c[0];
  pixels[at + 1] = c[1];
  pixels[at + 2] = c[2];
}

Rgb Image::get(int x, int y) const {
  const auto at = (static_cast<std::size_t>(y) * width + x) * 3;
  return {pixels[at], pixels[at + 1], pixels[at + 2]};
}

void write_png(const std::filesystem::path& path, const Image& image) {
  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw Error("cannot open " + path.string() + " for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (png == nullptr || info == nullptr) {
    png_destroy_write_struct(&png, &info);
    throw Error("libpng initialization failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw Error("failed writing PNG " + path.string());
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height),
               8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) {
    png_write_row(png, image.pixels.data() + static_cast<std::size_t>(y) * image.width * 3);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Rgb sequential_color(double t) {
  // dark purple -> blue -> green -> yellow, close to viridis
  static const std::vector<Rgb> stops{
      {68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  return ramp(stops, t);
}

Rgb diverging_color(double t) {
  static const std::vector<Rgb> stops{{33, 102, 172}, {247, 247, 247}, {178, 24, 43}};
  return ramp(stops, 0.5 * (std::clamp(t, -1.0, 1.0) + 1.0));
}

Image render_triptych(const ScalarField& predicted, const ScalarField& target,
                      const std::optional<ScalarField>& lahm, const TriptychStyle& style) {
  require_same_grid(predicted.grid(), target.grid(), "render_triptych");
  if (lahm) require_same_grid(predicted.grid(), lahm->grid(), "render_triptych");
  const Grid& g = predicted.grid();
  const int cp = style.cell_pixels;
  const int pw = g.nx * cp;
  const int ph = g.ny * cp;
  Image img(3 * pw + 4 * kMargin, ph + 2 * kMargin + kBarGap + kBarHeight);

  const auto temp = [&](double v) {
    return sequential_color((v - style.t_low) / (style.t_high - style.t_low));
  };
  const auto err = [&](double v) { return diverging_color(v / style.error_span); };

  std::vector<double> diff(predicted.size());
  for (std::size_t k = 0; k < diff.size(); ++k) diff[k] = predicted[k] - target[k];
  const ScalarField error(g, std::move(diff));

  const int bar_y = kMargin + ph + kBarGap;
  for (int p = 0; p < 3; ++p) {
    const int ox = kMargin + p * (pw + kMargin);
    if (p < 2) {
      draw_panel(img, ox, kMargin, p == 0 ? predicted : target, cp, temp);
      if (lahm) draw_outline(img, ox, kMargin, *lahm, style.ambient + style.outline_level, cp);
      draw_bar(img, ox, bar_y, pw, [&](double t) { return sequential_color(t); });
    } else {
      draw_panel(img, ox, kMargin, error, cp, err);
      draw_bar(img, ox, bar_y, pw, [&](double t) { return diverging_color(2.0 * t - 1.0); });
    }
  }
  return img;
}

Image render_field(const ScalarField& field, const TriptychStyle& style) {
  const Grid& g = field.grid();
  const int cp = style.cell_pixels;
  const int pw = g.nx * cp;
  const int ph = g.ny * cp;
  Image img(pw + 2 * kMargin, ph + 2 * kMargin + kBarGap + kBarHeight);
  draw_panel(img, kMargin, kMargin, field, cp, [&](double v) {
    return sequential_color((v - style.t_low) / (style.t_high - style.t_low));
  });
  draw_outline(img, kMargin, kMargin, field, style.ambient + style.outline_level, cp);
  draw_bar(img, kMargin, kMargin + ph + kBarGap, pw, [](double t) { return sequential_color(t); });
  return img;
}

}  // namespace gwhp
