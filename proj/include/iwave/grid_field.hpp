#pragma once

#include <string>
#include <vector>

#include "iwave/common.hpp"
#include "iwave/geometry.hpp"

namespace iwave {

// Raster on the nodes x0 + i h, y0 + j h of a rectangular grid. Nodes with
// mask = 0 lie outside the domain and always hold exactly zero.
struct GridField {
  int nx = 0, ny = 0;
  double x0 = 0, y0 = 0, h = 0;
  bool complex = false;
  std::vector<unsigned char> mask;
  std::vector<cplx> values;

  size_t index(int i, int j) const { return static_cast<size_t>(j) * nx + i; }
  size_t size() const { return static_cast<size_t>(nx) * ny; }
  Vec2 point(int i, int j) const { return Vec2(x0 + i * h, y0 + j * h); }
  bool inside(int i, int j) const {
    return i >= 0 && j >= 0 && i < nx && j < ny && mask[index(i, j)] != 0;
  }
  cplx at(int i, int j) const { return inside(i, j) ? values[index(i, j)] : cplx(0); }
  long interior_count() const;
  bool same_grid(const GridField& other) const;
  // Zeroes values outside the mask and drops imaginary parts of real fields.
  void normalize();
};

// Grid covering the bounding box of the domain with spacing h; a node is
// inside when it lies strictly inside the domain.
GridField make_grid(const Domain& domain, double h, bool complex = false);

// Bit-exact text format: one JSON header line, then nx*ny rows "i,j,mask,re[,im]".
void write_grid_field(const GridField& field, const std::string& path);
// Throws ParseError with the offending line number.
GridField read_grid_field(const std::string& path);

// Discrete L2 norm (weight h^2) over masked nodes.
double l2_norm(const GridField& f);
// Relative L2 distance |a - b| / |b|; throws DomainError on incompatible grids.
double relative_l2(const GridField& a, const GridField& b);
double max_abs(const GridField& f);

}  // namespace iwave
