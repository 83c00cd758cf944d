#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace gwhp {

/// Cell-centered structured 2D grid. Cell (i, j) covers
/// [i*dx, (i+1)*dx] x [j*dy, (j+1)*dy]; flat index is j*nx + i.
struct Grid {
  int nx = 64;
  int ny = 64;
  double dx = 2.0;
  double dy = 2.0;
  double thickness = 1.0;

  /// Throws ValidationError unless all invariants hold.
  void validate() const;

  [[nodiscard]] std::size_t cell_count() const {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny);
  }
  [[nodiscard]] std::size_t flat(int i, int j) const {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(i);
  }
  [[nodiscard]] std::pair<int, int> unflat(std::size_t k) const {
    return {static_cast<int>(k % static_cast<std::size_t>(nx)),
            static_cast<int>(k / static_cast<std::size_t>(nx))};
  }
  [[nodiscard]] double length_x() const { return nx * dx; }
  [[nodiscard]] double length_y() const { return ny * dy; }
  [[nodiscard]] double cell_volume() const { return dx * dy * thickness; }
  [[nodiscard]] bool is_square() const { return nx == ny && dx == dy; }

  friend bool operator==(const Grid&, const Grid&) = default;
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

struct CellIndex {
  int i = 0;
  int j = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Center of cell (i, j) in meters. Throws ValidationError for out-of-range indices.
Point2 cell_center(const Grid& grid, int i, int j);

/// The injection cell: (nx/2, ny/2) with integer division.
CellIndex center_cell_index(const Grid& grid);

/// Row-major cell-centered scalar values with a unit label.
class ScalarField {
 public:
  ScalarField() = default;
  /// Constant field.
  ScalarField(Grid grid, double value, std::string unit = {});
  /// Rejects length mismatches and non-finite values.
  ScalarField(Grid grid, std::vector<double> values, std::string unit = {});

  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] const std::string& unit() const { return unit_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  [[nodiscard]] double operator()(int i, int j) const { return values_[grid_.flat(i, j)]; }
  [[nodiscard]] double& operator()(int i, int j) { return values_[grid_.flat(i, j)]; }
  [[nodiscard]] double operator[](std::size_t k) const { return values_[k]; }
  [[nodiscard]] double& operator[](std::size_t k) { return values_[k]; }

  [[nodiscard]] double min() const;
  [[nodiscard]] double max() const;
  /// Throws ValidationError if any value is NaN or infinite.
  void check_finite() const;

 private:
  Grid grid_;
  std::vector<double> values_;
  std::string unit_;
};

/// Cell-centered vector field with separate x and y component arrays.
class VectorField {
 public:
  VectorField() = default;
  VectorField(Grid grid, std::vector<double> x_values, std::vector<double> y_values,
              std::string unit = {});
  /// Uniform vector everywhere.
  VectorField(Grid grid, double vx, double vy, std::string unit = {});

  [[nodiscard]] const Grid& grid() const { return grid_; }
  [[nodiscard]] const std::string& unit() const { return unit_; }
  [[nodiscard]] std::span<const double> x() const { return x_; }
  [[nodiscard]] std::span<const double> y() const { return y_; }
  [[nodiscard]] std::span<double> x() { return x_; }
  [[nodiscard]] std::span<double> y() { return y_; }

  [[nodiscard]] ScalarField x_component() const;
  [[nodiscard]] ScalarField y_component() const;
  void check_finite() const;

 private:
  Grid grid_;
  std::vector<double> x_;
  std::vector<double> y_;
  std::string unit_;
};

void to_json(nlohmann::json& j, const Grid& grid);
void from_json(const nlohmann::json& j, Grid& grid);

/// Throws ValidationError when the two grids differ.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

}  // namespace gwhp
