#include "iceritz/geodata.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <deque>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

namespace iceritz {

GridParseError::GridParseError(long line, long column, const std::string& message)
    : std::runtime_error("grid parse error at line " + std::to_string(line) + ", column " +
                         std::to_string(column) + ": " + message),
      line_(line),
      column_(column) {}

long Grid::valid_count() const {
  long n = 0;
  for (std::uint8_t v : valid) n += v;
  return n;
}

double Grid::min_valid() const {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (valid[i]) m = std::min(m, values[i]);
  return m;
}

double Grid::max_valid() const {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < values.size(); ++i)
    if (valid[i]) m = std::max(m, values[i]);
  return m;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

struct Tokenizer {
  std::istream& in;
  long line = 1;
  long column = 0;
  long tok_line = 1;
  long tok_column = 0;

  bool next(std::string& tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '\n') {
        ++line;
        column = 0;
      } else {
        ++column;
      }
      if (!std::isspace(c)) break;
    }
    if (c == EOF) return false;
    tok_line = line;
    tok_column = column;
    tok.push_back(static_cast<char>(c));
    while ((c = in.peek()) != EOF && !std::isspace(c)) {
      tok.push_back(static_cast<char>(in.get()));
      ++column;
    }
    return true;
  }
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

double parse_double(const Tokenizer& tz, const std::string& tok) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument("");
    return v;
  } catch (const std::exception&) {
    throw GridParseError(tz.tok_line, tz.tok_column, "unparseable number '" + tok + "'");
  }
}

}  // namespace

Grid parse_grid(std::istream& in) {
  Tokenizer tz{in};
  Grid grid;
  std::map<std::string, double> header;
  std::string tok;
  bool have_first_value = false;
  double first_value = 0.0;

  // header lines: <key> <number>, in any order, until the first bare number
  while (tz.next(tok)) {
    if (!std::isalpha(static_cast<unsigned char>(tok[0]))) {
      first_value = parse_double(tz, tok);
      have_first_value = true;
      break;
    }
    const std::string key = lower(tok);
    std::string val;
    if (!tz.next(val))
      throw GridParseError(tz.tok_line, tz.tok_column, "header key '" + tok + "' without a value");
    header[key] = parse_double(tz, val);
  }

  auto require = [&](const char* key) {
    auto it = header.find(key);
    if (it == header.end())
      throw GridParseError(tz.tok_line, tz.tok_column, std::string("missing header field '") + key + "'");
    return it->second;
  };

  grid.ncols = static_cast<int>(require("ncols"));
  grid.nrows = static_cast<int>(require("nrows"));
  if (grid.ncols < 1 || grid.nrows < 1)
    throw GridParseError(1, 0, "ncols/nrows must be positive");
  grid.cellsize = require("cellsize");
  if (!(grid.cellsize > 0.0)) throw GridParseError(1, 0, "cellsize must be positive");

  if (header.count("xllcorner")) {
    grid.xll = header["xllcorner"];
  } else if (header.count("xllcenter")) {
    grid.xll = header["xllcenter"] - 0.5 * grid.cellsize;
  } else {
    throw GridParseError(1, 0, "missing header field 'xllcorner'");
  }
  if (header.count("yllcorner")) {
    grid.yll = header["yllcorner"];
  } else if (header.count("yllcenter")) {
    grid.yll = header["yllcenter"] - 0.5 * grid.cellsize;
  } else {
    throw GridParseError(1, 0, "missing header field 'yllcorner'");
  }
  if (header.count("nodata_value")) {
    grid.nodata = header["nodata_value"];
    grid.has_nodata = true;
  }

  const std::size_t count = static_cast<std::size_t>(grid.ncols) * grid.nrows;
  grid.values.reserve(count);
  if (have_first_value) grid.values.push_back(first_value);
  while (grid.values.size() < count && tz.next(tok)) grid.values.push_back(parse_double(tz, tok));
  if (grid.values.size() != count)
    throw GridParseError(tz.line, tz.column,
                         "expected " + std::to_string(count) + " values, got " +
                             std::to_string(grid.values.size()));
  if (tz.next(tok))
    throw GridParseError(tz.tok_line, tz.tok_column, "trailing data after " +
                                                         std::to_string(count) + " values");

  grid.valid.assign(count, 1);
  if (grid.has_nodata)
    for (std::size_t i = 0; i < count; ++i)
      if (grid.values[i] == grid.nodata) grid.valid[i] = 0;
  return grid;
}

Grid parse_grid_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open grid file " + path);
  return parse_grid(in);
}

void write_grid(std::ostream& out, const Grid& grid) {
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "ncols " << grid.ncols << '\n';
  out << "nrows " << grid.nrows << '\n';
  out << "xllcorner " << fmt(grid.xll) << '\n';
  out << "yllcorner " << fmt(grid.yll) << '\n';
  out << "cellsize " << fmt(grid.cellsize) << '\n';
  if (grid.has_nodata) out << "NODATA_value " << fmt(grid.nodata) << '\n';
  for (int r = 0; r < grid.nrows; ++r) {
    for (int c = 0; c < grid.ncols; ++c) {
      if (c) out << ' ';
      out << fmt(grid.value(r, c));
    }
    out << '\n';
  }
}

void write_grid_file(const std::string& path, const Grid& grid) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_grid(out, grid);
}

Grid downsample(const Grid& grid, int factor) {
  if (factor < 1) throw std::invalid_argument("downsample factor must be >= 1");
  if (factor == 1) return grid;
  Grid out;
  out.ncols = (grid.ncols + factor - 1) / factor;
  out.nrows = (grid.nrows + factor - 1) / factor;
  out.cellsize = grid.cellsize * factor;
  // shift the origin so every retained sample keeps its true position:
  // coarse cell (r, c) is centered on fine cell (r*factor, c*factor)
  out.xll = grid.xll + 0.5 * grid.cellsize - 0.5 * out.cellsize;
  out.yll = grid.yll + (grid.nrows - 0.5) * grid.cellsize -
            (out.nrows - 0.5) * out.cellsize;
  out.nodata = grid.nodata;
  out.has_nodata = grid.has_nodata;
  out.values.resize(static_cast<std::size_t>(out.ncols) * out.nrows);
  out.valid.resize(out.values.size());
  for (int r = 0; r < out.nrows; ++r)
    for (int c = 0; c < out.ncols; ++c) {
      const int sr = r * factor, sc = c * factor;
      out.values[static_cast<std::size_t>(r) * out.ncols + c] = grid.value(sr, sc);
      out.valid[static_cast<std::size_t>(r) * out.ncols + c] = grid.is_valid(sr, sc);
    }
  return out;
}

bool check_range(const Grid& grid, const ValueRange& range, const std::string& label,
                 double slack) {
  if (grid.valid_count() == 0) return true;
  const double lo = grid.min_valid();
  const double hi = grid.max_valid();
  if (lo >= range.lo - slack && hi <= range.hi + slack) return true;
  std::cerr << "warning: " << label << " values [" << lo << ", " << hi
            << "] outside the expected range [" << range.lo << ", " << range.hi << "]\n";
  return false;
}

// ---------------------------------------------------------------------------
// NormalizedField

NormalizedField::NormalizedField(const Grid& grid, double value_scale) {
  if (grid.ncols < 2 || grid.nrows < 2)
    throw std::invalid_argument("normalized field needs at least a 2x2 grid");
  nx_ = grid.ncols;
  ny_ = grid.nrows;
  value_scale_ = value_scale;
  east0_ = grid.xll;
  north0_ = grid.yll;

  const double width = grid.ncols * grid.cellsize;
  const double height = grid.nrows * grid.cellsize;
  const double longest = std::max(width, height);
  coord_scale_ = 1.0 / longest;
  domain_ = Domain::box(0.0, width * coord_scale_, 0.0, height * coord_scale_);
  dx_ = grid.cellsize * coord_scale_;
  dy_ = dx_;
  x0_ = 0.5 * dx_;
  y0_ = 0.5 * dy_;

  // values stored bottom-up so the y axis points north
  values_.resize(ny_, nx_);
  valid_.assign(static_cast<std::size_t>(nx_) * ny_, 1);
  for (int j = 0; j < ny_; ++j)
    for (int i = 0; i < nx_; ++i) {
      const int src_row = ny_ - 1 - j;
      values_(j, i) = grid.value(src_row, i) * value_scale_;
      valid_[static_cast<std::size_t>(j) * nx_ + i] = grid.is_valid(src_row, i);
    }

  // back masked cells by their nearest valid neighbour (multi-source BFS)
  long masked = 0;
  for (std::uint8_t v : valid_)
    if (!v) ++masked;
  if (masked > 0) {
    if (masked == static_cast<long>(valid_.size()))
      throw std::invalid_argument("grid has no valid cells");
    std::deque<std::pair<int, int>> queue;
    std::vector<std::uint8_t> filled = valid_;
    for (int j = 0; j < ny_; ++j)
      for (int i = 0; i < nx_; ++i)
        if (filled[static_cast<std::size_t>(j) * nx_ + i]) queue.emplace_back(j, i);
    const int dj[4] = {-1, 1, 0, 0};
    const int di[4] = {0, 0, -1, 1};
    while (!queue.empty()) {
      auto [j, i] = queue.front();
      queue.pop_front();
      for (int k = 0; k < 4; ++k) {
        const int jj = j + dj[k], ii = i + di[k];
        if (jj < 0 || jj >= ny_ || ii < 0 || ii >= nx_) continue;
        std::uint8_t& f = filled[static_cast<std::size_t>(jj) * nx_ + ii];
        if (f) continue;
        values_(jj, ii) = values_(j, i);
        f = 1;
        queue.emplace_back(jj, ii);
      }
    }
    fallback_cells_ = masked;
    std::cerr << "note: " << masked << " masked cells backed by nearest valid neighbour\n";
  }
}

namespace {

// locate a coordinate on a cell-center lattice: cell index, fraction, and
// whether the point is inside the lattice span (gradients vanish outside)
inline void locate(double x, double x0, double dx, int n, int& cell, double& frac, bool& inside) {
  const double t = (x - x0) / dx;
  if (t <= 0.0) {
    cell = 0;
    frac = 0.0;
    inside = false;
  } else if (t >= n - 1) {
    cell = n - 2;
    frac = 1.0;
    inside = false;
  } else {
    cell = static_cast<int>(t);
    frac = t - cell;
    inside = true;
  }
}

}  // namespace

double NormalizedField::eval(const Vector& x) const {
  int ci, cj;
  double tx, ty;
  bool inx, iny;
  locate(x(0), x0_, dx_, nx_, ci, tx, inx);
  locate(x(1), y0_, dy_, ny_, cj, ty, iny);
  const double v00 = values_(cj, ci), v10 = values_(cj, ci + 1);
  const double v01 = values_(cj + 1, ci), v11 = values_(cj + 1, ci + 1);
  return (1 - tx) * (1 - ty) * v00 + tx * (1 - ty) * v10 + (1 - tx) * ty * v01 + tx * ty * v11;
}

Vector NormalizedField::gradient(const Vector& x) const {
  int ci, cj;
  double tx, ty;
  bool inx, iny;
  locate(x(0), x0_, dx_, nx_, ci, tx, inx);
  locate(x(1), y0_, dy_, ny_, cj, ty, iny);
  const double v00 = values_(cj, ci), v10 = values_(cj, ci + 1);
  const double v01 = values_(cj + 1, ci), v11 = values_(cj + 1, ci + 1);
  Vector g(2);
  g(0) = inx ? ((1 - ty) * (v10 - v00) + ty * (v11 - v01)) / dx_ : 0.0;
  g(1) = iny ? ((1 - tx) * (v01 - v00) + tx * (v11 - v10)) / dy_ : 0.0;
  return g;
}

void NormalizedField::eval_with_gradient(const Matrix& x, RowVector& values,
                                         Matrix& gradients) const {
  const int n = static_cast<int>(x.cols());
  values.resize(n);
  gradients.resize(2, n);
  for (int i = 0; i < n; ++i) {
    values(i) = eval(x.col(i));
    gradients.col(i) = gradient(x.col(i));
  }
}

Vector NormalizedField::to_unit(double easting, double northing) const {
  Vector u(2);
  u << (easting - east0_) * coord_scale_, (northing - north0_) * coord_scale_;
  return u;
}

Vector NormalizedField::to_grid(const Vector& unit) const {
  Vector g(2);
  g << east0_ + unit(0) / coord_scale_, north0_ + unit(1) / coord_scale_;
  return g;
}

bool NormalizedField::masked_at(const Vector& unit) const {
  const int i = std::clamp(static_cast<int>(std::floor(unit(0) / dx_)), 0, nx_ - 1);
  const int j = std::clamp(static_cast<int>(std::floor(unit(1) / dy_)), 0, ny_ - 1);
  return valid_[static_cast<std::size_t>(j) * nx_ + i] == 0;
}

// ---------------------------------------------------------------------------
// Problem assembly and benchmark losses

GridProblem build_problem(const Grid& bedrock, const Grid& thickness, double p, double alpha,
                          double beta, const GridProblemOptions& options) {
  if (bedrock.ncols != thickness.ncols || bedrock.nrows != thickness.nrows)
    throw std::invalid_argument("bedrock and thickness grids have different shapes");
  if (bedrock.cellsize != thickness.cellsize || bedrock.xll != thickness.xll ||
      bedrock.yll != thickness.yll)
    throw std::invalid_argument("bedrock and thickness grids are georeferenced differently");

  Grid bed = downsample(bedrock, options.downsample_factor);
  Grid thk = downsample(thickness, options.downsample_factor);

  Grid surface = bed;
  for (std::size_t i = 0; i < surface.values.size(); ++i) {
    surface.values[i] = bed.values[i] + thk.values[i];
    surface.valid[i] = bed.valid[i] && thk.valid[i];
    if (!surface.valid[i] && surface.has_nodata) surface.values[i] = surface.nodata;
  }

  GridProblem gp;
  gp.bedrock = NormalizedField(bed, options.value_scale);
  gp.surface = NormalizedField(surface, options.value_scale);

  const NormalizedField& bfield = gp.bedrock;
  const NormalizedField& sfield = gp.surface;
  gp.spec.domain = bfield.domain();
  gp.spec.p = p;
  gp.spec.alpha = alpha;
  gp.spec.beta = beta;
  gp.spec.obstacle = [bfield](const Vector& x) { return bfield.eval(x); };
  gp.spec.boundary_value = [sfield](const Vector& x) { return sfield.eval(x); };
  gp.spec.source = nullptr;  // no accumulation field supplied with the rasters
  if (options.drift_from_bedrock_gradient)
    gp.spec.drift = [bfield](const Vector& x) { return bfield.gradient(x); };
  if (bed.valid_count() != static_cast<long>(bed.values.size()) ||
      thk.valid_count() != static_cast<long>(thk.values.size())) {
    gp.spec.interior_mask = [bfield](const Vector& x) { return !bfield.masked_at(x); };
  }

  std::ostringstream desc;
  desc << bed.ncols << "x" << bed.nrows << " cells, " << bed.cellsize << " m spacing, scale "
       << options.value_scale;
  gp.description = desc.str();
  gp.bed_grid = std::move(bed);
  gp.thickness_grid = std::move(thk);
  return gp;
}

LossBreakdown data_benchmark_losses(const ProblemSpec& spec, const NormalizedField& surface,
                                    const SampleBatch& batch) {
  RowVector u_int;
  Matrix g_int;
  surface.eval_with_gradient(batch.interior, u_int, g_int);
  RowVector u_bnd(batch.boundary.cols());
  for (int j = 0; j < batch.boundary.cols(); ++j) u_bnd(j) = surface.eval(batch.boundary.col(j));
  return losses_from_fields(spec, batch, u_int, g_int, u_bnd);
}

void write_field_csv(std::ostream& out, const Matrix& points, const RowVector& values) {
  if (points.cols() != values.size())
    throw std::invalid_argument("points/values size mismatch");
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << (points.rows() == 1 ? "x,value\n" : "x,y,value\n");
  for (int i = 0; i < points.cols(); ++i) {
    for (int k = 0; k < points.rows(); ++k) out << fmt(points(k, i)) << ',';
    out << fmt(values(i)) << '\n';
  }
}

}  // namespace iceritz
