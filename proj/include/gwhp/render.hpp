#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "gwhp/field.hpp"

namespace gwhp {

using Rgb = std::array<std::uint8_t, 3>;

/// 8-bit RGB raster, row 0 at the top.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height * 3

  Image(int w, int h, Rgb fill = {255, 255, 255});
  void set(int x, int y, Rgb c);
  [[nodiscard]] Rgb get(int x, int y) const;
};

void write_png(const std::filesystem::path& path, const Image& image);

/// Sequential map for temperatures; t in [0, 1], clamped.
Rgb sequential_color(double t);
/// Blue-white-red map for signed values; t in [-1, 1], clamped.
Rgb diverging_color(double t);

struct TriptychStyle {
  int cell_pixels = 4;
  double t_low = 10.0;   // C
  double t_high = 15.0;  // C
  double error_span = 2.0;  // K, error panel covers [-span, span]
  double outline_level = 1.0;  // K above ambient for the LAHM contour
  double ambient = 10.0;
};

/// Prediction | target | signed error, each with a scale bar underneath.
/// Cells of `lahm` at or above ambient + outline_level that touch a cell
/// below it are outlined in gray on the first two panels.
Image render_triptych(const ScalarField& predicted, const ScalarField& target,
                      const std::optional<ScalarField>& lahm, const TriptychStyle& style = {});

/// Single field with the temperature map, e.g. for the lahm command.
Image render_field(const ScalarField& field, const TriptychStyle& style = {});

}  // namespace gwhp
