#include "iwave/grid_field.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <json.hpp>

#include "iwave/errors.hpp"

namespace iwave {

long GridField::interior_count() const {
  long n = 0;
  for (unsigned char m : mask) n += m != 0;
  return n;
}

bool GridField::same_grid(const GridField& o) const {
  return nx == o.nx && ny == o.ny && x0 == o.x0 && y0 == o.y0 && h == o.h && mask == o.mask;
}

void GridField::normalize() {
  for (size_t k = 0; k < values.size(); ++k) {
    if (!mask[k]) values[k] = 0;
    else if (!complex) values[k] = values[k].real();
  }
}

GridField make_grid(const Domain& domain, double h, bool complex) {
  if (!(h > 0)) throw DomainError("grid spacing must be positive");
  BoundingBox box = domain.bounding_box();
  GridField f;
  f.h = h;
  f.x0 = box.lo.x();
  f.y0 = box.lo.y();
  f.nx = static_cast<int>(std::ceil((box.hi.x() - box.lo.x()) / h)) + 1;
  f.ny = static_cast<int>(std::ceil((box.hi.y() - box.lo.y()) / h)) + 1;
  f.complex = complex;
  f.mask.assign(f.size(), 0);
  f.values.assign(f.size(), cplx(0));
  for (int j = 0; j < f.ny; ++j)
    for (int i = 0; i < f.nx; ++i) {
      // Nodes on the boundary itself count as outside.
      Vec2 p = f.point(i, j);
      f.mask[f.index(i, j)] = domain.contains(p) && domain.distance_to_boundary(p) > 1e-9 * h ? 1 : 0;
    }
  return f;
}

void write_grid_field(const GridField& f, const std::string& path) {
  std::string tmp = path + ".tmp";
  std::FILE* out = std::fopen(tmp.c_str(), "w");
  if (!out) throw Error("cannot open " + tmp + " for writing");
  nlohmann::ordered_json header = {{"nx", f.nx},   {"ny", f.ny},
                                   {"x0", f.x0},   {"y0", f.y0},
                                   {"h", f.h},     {"kind", f.complex ? "complex" : "real"},
                                   {"mask", "embedded"}};
  std::fprintf(out, "%s\n", header.dump().c_str());
  for (int j = 0; j < f.ny; ++j) {
    for (int i = 0; i < f.nx; ++i) {
      size_t k = f.index(i, j);
      if (f.complex)
        std::fprintf(out, "%d,%d,%d,%.17g,%.17g\n", i, j, f.mask[k], f.values[k].real(), f.values[k].imag());
      else
        std::fprintf(out, "%d,%d,%d,%.17g\n", i, j, f.mask[k], f.values[k].real());
    }
  }
  if (std::fclose(out) != 0) throw Error("failed writing " + tmp);
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename " + tmp + " to " + path);
}

GridField read_grid_field(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("missing header", 1);
  GridField f;
  try {
    auto hd = nlohmann::json::parse(line);
    f.nx = hd.at("nx").get<int>();
    f.ny = hd.at("ny").get<int>();
    f.x0 = hd.at("x0").get<double>();
    f.y0 = hd.at("y0").get<double>();
    f.h = hd.at("h").get<double>();
    std::string kind = hd.at("kind").get<std::string>();
    if (kind != "real" && kind != "complex") throw ParseError("unknown kind '" + kind + "'", 1);
    f.complex = kind == "complex";
    if (hd.at("mask").get<std::string>() != "embedded") throw ParseError("unsupported mask mode", 1);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed header: ") + e.what(), 1);
  }
  if (f.nx <= 0 || f.ny <= 0 || !(f.h > 0)) throw ParseError("invalid grid dimensions", 1);
  f.mask.assign(f.size(), 0);
  f.values.assign(f.size(), cplx(0));
  std::vector<char> seen(f.size(), 0);

  const int fields = f.complex ? 5 : 4;
  long lineno = 1, rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const char* p = line.c_str();
    char* end = nullptr;
    double num[5] = {0, 0, 0, 0, 0};
    for (int c = 0; c < fields; ++c) {
      num[c] = std::strtod(p, &end);
      if (end == p) throw ParseError("expected " + std::to_string(fields) + " numeric fields", lineno);
      p = end;
      if (c + 1 < fields) {
        if (*p != ',') throw ParseError("expected ','", lineno);
        ++p;
      }
    }
    if (*p != '\0') throw ParseError("trailing characters", lineno);
    int i = static_cast<int>(num[0]), j = static_cast<int>(num[1]), m = static_cast<int>(num[2]);
    if (i != num[0] || j != num[1] || i < 0 || j < 0 || i >= f.nx || j >= f.ny)
      throw ParseError("node index out of range", lineno);
    if (m != 0 && m != 1) throw ParseError("mask must be 0 or 1", lineno);
    size_t k = f.index(i, j);
    if (seen[k]) throw ParseError("duplicate node", lineno);
    seen[k] = 1;
    f.mask[k] = static_cast<unsigned char>(m);
    f.values[k] = cplx(num[3], num[4]);
    ++rows;
  }
  if (rows != static_cast<long>(f.size()))
    throw ParseError("expected " + std::to_string(f.size()) + " rows, found " + std::to_string(rows), lineno);
  return f;
}

double l2_norm(const GridField& f) {
  double s = 0;
  for (size_t k = 0; k < f.size(); ++k)
    if (f.mask[k]) s += std::norm(f.values[k]);
  return std::sqrt(s) * f.h;
}

double relative_l2(const GridField& a, const GridField& b) {
  if (!a.same_grid(b)) throw DomainError("grid fields live on different grids");
  double num = 0, den = 0;
  for (size_t k = 0; k < a.size(); ++k) {
    if (!a.mask[k]) continue;
    num += std::norm(a.values[k] - b.values[k]);
    den += std::norm(b.values[k]);
  }
  return den > 0 ? std::sqrt(num / den) : std::sqrt(num);
}

double max_abs(const GridField& f) {
  double m = 0;
  for (size_t k = 0; k < f.size(); ++k)
    if (f.mask[k]) m = std::max(m, std::abs(f.values[k]));
  return m;
}

}  // namespace iwave
