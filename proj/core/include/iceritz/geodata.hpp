#pragma once

#include "iceritz/energy.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace iceritz {

/// Parse failure with the offending position in the input stream.
class GridParseError : public std::runtime_error {
 public:
  GridParseError(long line, long column, const std::string& message);
  long line() const { return line_; }
  long column() const { return column_; }

 private:
  long line_, column_;
};

/// ESRI-style ASCII raster: header keys (any order, case-insensitive)
/// ncols, nrows, xllcorner|xllcenter, yllcorner|yllcenter, cellsize,
/// NODATA_value (optional), followed by nrows*ncols whitespace-separated
/// values, first row north-most.
struct Grid {
  int ncols = 0, nrows = 0;
  double xll = 0.0, yll = 0.0;  // lower-left corner of the raster
  double cellsize = 0.0;
  double nodata = -9999.0;
  bool has_nodata = false;
  std::vector<double> values;  // row-major, row 0 = top row of the file
  std::vector<std::uint8_t> valid;  // 1 = data cell, 0 = masked

  double value(int row, int col) const { return values[static_cast<std::size_t>(row) * ncols + col]; }
  bool is_valid(int row, int col) const { return valid[static_cast<std::size_t>(row) * ncols + col] != 0; }
  long valid_count() const;
  double min_valid() const;
  double max_valid() const;
};

Grid parse_grid(std::istream& in);
Grid parse_grid_file(const std::string& path);
/// Values are written with enough digits to round-trip doubles exactly.
void write_grid(std::ostream& out, const Grid& grid);
void write_grid_file(const std::string& path, const Grid& grid);

/// Every k-th cell starting at the top-left corner; masks carried over.
Grid downsample(const Grid& grid, int factor);

/// Expected physical ranges, used to log sanity warnings on parsed data.
struct ValueRange {
  double lo, hi;
};
inline constexpr ValueRange kBedrockRange{-963.1, 3239.0};
inline constexpr ValueRange kThicknessRange{0.0, 3366.5};
inline constexpr ValueRange kSurfaceRange{-0.1, 3278.3};
/// Returns true when all valid cells are within [lo-slack, hi+slack]; logs a
/// warning to stderr otherwise.
bool check_range(const Grid& grid, const ValueRange& range, const std::string& label,
                 double slack = 1.0);

/// Grid field mapped onto the unit computational domain: an affine coordinate
/// map (aspect ratio preserved), a value scale, and a bilinear interpolant
/// over cell centers with analytic gradients. Masked cells are backed by
/// their nearest valid neighbour (flagged) so interpolation never reads them.
class NormalizedField {
 public:
  NormalizedField() = default;
  NormalizedField(const Grid& grid, double value_scale);

  const Domain& domain() const { return domain_; }
  double value_scale() const { return value_scale_; }
  long fallback_cells() const { return fallback_cells_; }

  double operator()(const Vector& x) const { return eval(x); }
  double eval(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  void eval_with_gradient(const Matrix& x, RowVector& values, Matrix& gradients) const;

  /// Unit-domain coordinates of a raster cell center and back.
  Vector to_unit(double easting, double northing) const;
  Vector to_grid(const Vector& unit) const;

  /// True if the (unit-domain) point falls in a masked cell of the source.
  bool masked_at(const Vector& unit) const;

 private:
  Domain domain_;
  int nx_ = 0, ny_ = 0;          // cell-center lattice dimensions
  double x0_ = 0, y0_ = 0;       // unit coords of the first cell center
  double dx_ = 0, dy_ = 0;       // lattice spacing in unit coords
  double coord_scale_ = 1.0;     // meters -> unit
  double east0_ = 0, north0_ = 0;
  double value_scale_ = 1.0;
  long fallback_cells_ = 0;
  Matrix values_;                // ny x nx, scaled, masked cells filled
  std::vector<std::uint8_t> valid_;
};

/// Default elevation scale: data are O(3000 m), network outputs stay O(1).
inline constexpr double kElevationScale = 1.0 / 3000.0;

struct GridProblemOptions {
  double value_scale = kElevationScale;
  int downsample_factor = 1;
  bool drift_from_bedrock_gradient = false;  // drift = grad(b) instead of zero
};

/// A ProblemSpec assembled from rasters plus the fields it was built from.
/// The solved variable is a surface-elevation-like field u with the bedrock
/// as the obstacle; thickness is u - bedrock.
struct GridProblem {
  ProblemSpec spec;
  NormalizedField bedrock;
  NormalizedField surface;  // bedrock + thickness; boundary data source
  Grid bed_grid;            // the (possibly downsampled) rasters behind the fields
  Grid thickness_grid;
  std::string description;
};

GridProblem build_problem(const Grid& bedrock, const Grid& thickness, double p, double alpha,
                          double beta, const GridProblemOptions& options = {});

/// The three loss terms with the measured data field standing in for the
/// network; the reference constants drawn as dashed lines on training plots.
LossBreakdown data_benchmark_losses(const ProblemSpec& spec, const NormalizedField& surface,
                                    const SampleBatch& batch);

/// CSV dump (x,value in 1D; x,y,value in 2D) shared by network evaluations
/// and oracle nodal solutions so outputs can be diffed directly.
void write_field_csv(std::ostream& out, const Matrix& points, const RowVector& values);

}  // namespace iceritz
