#include "gwhp/field.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <nlohmann/json.hpp>

#include "gwhp/error.hpp"

namespace gwhp {

void Grid::validate() const {
  if (nx < 1 || ny < 1) {
    throw ValidationError("grid: nx and ny must be >= 1 (got " + std::to_string(nx) + "x" +
                          std::to_string(ny) + ")");
  }
  if (!(dx > 0.0) || !(dy > 0.0) || !(thickness > 0.0)) {
    throw ValidationError("grid: dx, dy and thickness must be positive");
  }
}

Point2 cell_center(const Grid& grid, int i, int j) {
  if (i < 0 || i >= grid.nx || j < 0 || j >= grid.ny) {
    throw ValidationError("cell_center: index (" + std::to_string(i) + ", " + std::to_string(j) +
                          ") outside grid");
  }
  return {(i + 0.5) * grid.dx, (j + 0.5) * grid.dy};
}

CellIndex center_cell_index(const Grid& grid) { return {grid.nx / 2, grid.ny / 2}; }

ScalarField::ScalarField(Grid grid, double value, std::string unit)
    : grid_(grid), values_(grid.cell_count(), value), unit_(std::move(unit)) {
  grid_.validate();
  check_finite();
}

ScalarField::ScalarField(Grid grid, std::vector<double> values, std::string unit)
    : grid_(grid), values_(std::move(values)), unit_(std::move(unit)) {
  grid_.validate();
  if (values_.size() != grid_.cell_count()) {
    throw ValidationError("scalar field: expected " + std::to_string(grid_.cell_count()) +
                          " values, got " + std::to_string(values_.size()));
  }
  check_finite();
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

void ScalarField::check_finite() const {
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw ValidationError("scalar field: non-finite value at flat index " + std::to_string(k));
    }
  }
}

VectorField::VectorField(Grid grid, std::vector<double> x_values, std::vector<double> y_values,
                         std::string unit)
    : grid_(grid), x_(std::move(x_values)), y_(std::move(y_values)), unit_(std::move(unit)) {
  grid_.validate();
  if (x_.size() != grid_.cell_count() || y_.size() != grid_.cell_count()) {
    throw ValidationError("vector field: component length does not match grid");
  }
  check_finite();
}

VectorField::VectorField(Grid grid, double vx, double vy, std::string unit)
    : VectorField(grid, std::vector<double>(grid.cell_count(), vx),
                  std::vector<double>(grid.cell_count(), vy), std::move(unit)) {}

ScalarField VectorField::x_component() const { return {grid_, x_, unit_}; }
ScalarField VectorField::y_component() const { return {grid_, y_, unit_}; }

void VectorField::check_finite() const {
  for (std::size_t k = 0; k < x_.size(); ++k) {
    if (!std::isfinite(x_[k]) || !std::isfinite(y_[k])) {
      throw ValidationError("vector field: non-finite value at flat index " + std::to_string(k));
    }
  }
}

void to_json(nlohmann::json& j, const Grid& grid) {
  j = nlohmann::json{{"nx", grid.nx},
                     {"ny", grid.ny},
                     {"dx", grid.dx},
                     {"dy", grid.dy},
                     {"thickness", grid.thickness}};
}

void from_json(const nlohmann::json& j, Grid& grid) {
  for (const auto& [key, _] : j.items()) {
    if (key != "nx" && key != "ny" && key != "dx" && key != "dy" && key != "thickness") {
      throw ValidationError("grid: unknown key '" + key + "'");
    }
  }
  Grid out;
  out.nx = j.value("nx", out.nx);
  out.ny = j.value("ny", out.ny);
  out.dx = j.value("dx", out.dx);
  out.dy = j.value("dy", out.dy);
  out.thickness = j.value("thickness", out.thickness);
  out.validate();
  grid = out;
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) {
    throw ValidationError(std::string(what) + ": grid mismatch (" + std::to_string(a.nx) + "x" +
                          std::to_string(a.ny) + " vs " + std::to_string(b.nx) + "x" +
                          std::to_string(b.ny) + ")");
  }
}

}  // namespace gwhp
