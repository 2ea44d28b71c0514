#pragma once

#include <cctype>
#include <cmath>
#include <string>

#include "perflod/dyadic.hpp"
#include "perflod/errors.hpp"

namespace perflod {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

enum class GeometryKind { Unperforated, PeriodicSquares, Dumbbell, Filament };

inline std::string to_string(GeometryKind kind) {
  switch (kind) {
  case GeometryKind::Unperforated: return "unperforated";
  case GeometryKind::PeriodicSquares: return "periodic_squares";
  case GeometryKind::Dumbbell: return "dumbbell";
  case GeometryKind::Filament: return "filament";
  }
  return "unknown";
}

inline GeometryKind parse_geometry_kind(std::string name) {
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  std::string key;
  for (char c : name)
    if (c != '_' && c != '-' && c != ' ') key.push_back(c);
  if (key == "unperforated" || key == "none") return GeometryKind::Unperforated;
  if (key == "periodicsquares" || key == "periodic") return GeometryKind::PeriodicSquares;
  if (key == "dumbbell") return GeometryKind::Dumbbell;
  if (key == "filament" || key == "filaments") return GeometryKind::Filament;
  throw ConfigError("unsupported geometry kind '" + name + "'");
}

/// Perforation pattern on the unit square. `eta` is the microstructure length
/// (cell period for square holes, strip width for filaments, neck width for
/// the dumbbell); `fixed_period` is the hole lattice period of the dumbbell.
struct GeometrySpec {
  GeometryKind kind = GeometryKind::Unperforated;
  double eta = 0.5;
  double fixed_period = 1.0 / 16.0;
};

/// Index of the last strip pair j of the filament pattern. The pair j
/// occupies x in [4 eta j, 4 eta j + 3 eta]; pairs that would reach x = 1 are
/// dropped so the right edge of the square stays free of solid.
inline int filament_last_index(double eta) {
  int n = static_cast<int>(std::floor(1.0 / (4.0 * eta)));
  while (n >= 0 && 4.0 * eta * n + 3.0 * eta >= 1.0) --n;
  return n;
}

inline void validate(const GeometrySpec& spec) {
  switch (spec.kind) {
  case GeometryKind::Unperforated: return;
  case GeometryKind::PeriodicSquares:
    if (!is_dyadic(spec.eta) || spec.eta > 0.5)
      throw ConfigError("periodic_squares: eta must be 2^-p with p >= 1");
    return;
  case GeometryKind::Filament:
    if (!is_dyadic(spec.eta) || spec.eta > 0.5)
      throw ConfigError("filament: eta must be 2^-p with p >= 1");
    if (filament_last_index(spec.eta) < 0)
      throw ConfigError("filament: eta too large, no strip fits inside the square");
    return;
  case GeometryKind::Dumbbell:
    if (!is_dyadic(spec.eta) || spec.eta >= 1.0)
      throw ConfigError("dumbbell: eta must be 2^-p with p >= 1");
    if (!is_dyadic(spec.fixed_period) || spec.fixed_period > 0.5)
      throw ConfigError("dumbbell: fixed_period must be 2^-p with p >= 1");
    return;
  }
  throw ConfigError("unsupported geometry kind");
}

/// Largest grid spacing for which every solid boundary lies on grid lines.
inline double alignment_unit(const GeometrySpec& spec) {
  switch (spec.kind) {
  case GeometryKind::Unperforated: return 1.0;
  case GeometryKind::PeriodicSquares: return spec.eta / 4.0;
  case GeometryKind::Filament: return spec.eta;
  case GeometryKind::Dumbbell:
    return std::fmin(std::fmin(spec.fixed_period / 4.0, spec.eta / 2.0), 1.0 / 8.0);
  }
  throw ConfigError("unsupported geometry kind");
}

namespace detail {

inline bool in_interval(double v, double lo, double hi) { return v >= lo && v <= hi; }

/// Closed hole eta*([1/4,3/4]^2 + k) of the square lattice containing p, if any.
inline bool in_lattice_hole(double period, Point2 p, int* kx = nullptr, int* ky = nullptr) {
  const double sx = p.x / period;
  const double sy = p.y / period;
  // Holes are closed and interior to each cell, so the floor cell is the only candidate.
  const double cx = std::floor(sx);
  const double cy = std::floor(sy);
  const double lx = sx - cx;
  const double ly = sy - cy;
  if (kx) *kx = static_cast<int>(cx);
  if (ky) *ky = static_cast<int>(cy);
  return in_interval(lx, 0.25, 0.75) && in_interval(ly, 0.25, 0.75);
}

inline bool in_dumbbell_strips(double eta, Point2 p) {
  if (!in_interval(p.x, 0.375, 0.625)) return false;
  return p.y <= (1.0 - eta) / 2.0 || p.y >= (1.0 + eta) / 2.0;
}

/// Whether the closed lattice hole with index (kx, ky) touches the dumbbell strips.
inline bool dumbbell_hole_hits_strips(double eta, double period, int kx, int ky) {
  const double x0 = period * (kx + 0.25), x1 = period * (kx + 0.75);
  const double y0 = period * (ky + 0.25), y1 = period * (ky + 0.75);
  if (x1 < 0.375 || x0 > 0.625) return false;
  return y0 <= (1.0 - eta) / 2.0 || y1 >= (1.0 + eta) / 2.0;
}

} // namespace detail

/// Membership of `p` in the closed solid set of the pattern.
inline bool is_solid(const GeometrySpec& spec, Point2 p) {
  switch (spec.kind) {
  case GeometryKind::Unperforated: return false;
  case GeometryKind::PeriodicSquares: return detail::in_lattice_hole(spec.eta, p);
  case GeometryKind::Dumbbell: {
    if (detail::in_dumbbell_strips(spec.eta, p)) return true;
    int kx = 0, ky = 0;
    if (!detail::in_lattice_hole(spec.fixed_period, p, &kx, &ky)) return false;
    return !detail::dumbbell_hole_hits_strips(spec.eta, spec.fixed_period, kx, ky);
  }
  case GeometryKind::Filament: {
    const double e = spec.eta;
    const int last = filament_last_index(e);
    for (int j = 0; j <= last; ++j) {
      const double x0 = 4.0 * e * j;
      if (detail::in_interval(p.x, x0, x0 + e) && detail::in_interval(p.y, 0.0, 1.0 - e)) return true;
      if (detail::in_interval(p.x, x0 + 2.0 * e, x0 + 3.0 * e) && detail::in_interval(p.y, e, 1.0))
        return true;
    }
    return false;
  }
  }
  throw ConfigError("unsupported geometry kind");
}

/// Exact area of the solid set inside the unit square.
inline double solid_area_fraction(const GeometrySpec& spec) {
  switch (spec.kind) {
  case GeometryKind::Unperforated: return 0.0;
  case GeometryKind::PeriodicSquares: return 0.25;
  case GeometryKind::Filament: {
    const int last = filament_last_index(spec.eta);
    return (last + 1) * 2.0 * spec.eta * (1.0 - spec.eta);
  }
  case GeometryKind::Dumbbell: {
    double area = 0.25 * (1.0 - spec.eta);
    const int cells = static_cast<int>(std::lround(1.0 / spec.fixed_period));
    const double hole = 0.25 * spec.fixed_period * spec.fixed_period;
    for (int ky = 0; ky < cells; ++ky)
      for (int kx = 0; kx < cells; ++kx)
        if (!detail::dumbbell_hole_hits_strips(spec.eta, spec.fixed_period, kx, ky)) area += hole;
    return area;
  }
  }
  throw ConfigError("unsupported geometry kind");
}

} // namespace perflod
