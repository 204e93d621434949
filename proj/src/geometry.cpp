#include "varpro/geometry.hpp"

#include <cmath>
#include <numbers>

namespace varpro {

std::string_view to_string(DomainKind kind) {
  return kind == DomainKind::Circle ? "circle" : "flat_torus";
}

DomainKind domain_kind_from_string(std::string_view name) {
  if (name == "circle") return DomainKind::Circle;
  if (name == "flat_torus" || name == "torus") return DomainKind::FlatTorus;
  throw InvalidInput("unknown domain kind: " + std::string(name));
}

Domain Domain::circle() { return Domain{DomainKind::Circle, 1, 2.0 * std::numbers::pi}; }

Domain Domain::flat_torus(int dim, double period) {
  Domain d{DomainKind::FlatTorus, dim, period};
  d.validate();
  return d;
}

void Domain::validate() const {
  if (!(period > 0.0) || !std::isfinite(period)) throw InvalidInput("domain period must be positive");
  if (dim < 1 || dim > kMaxDim) throw InvalidInput("domain dimension out of range");
  if (kind == DomainKind::Circle && dim != 1) throw InvalidInput("circle domain must be 1-dimensional");
}

double wrap_positive(double x, double period) {
  double y = std::fmod(x, period);
  if (y < 0.0) y += period;
  // fmod of a tiny negative number can round back up to exactly `period`.
  if (y >= period) y = 0.0;
  return y;
}

double wrap_centered(double x, double period) {
  const double half = 0.5 * period;
  double y = wrap_positive(x + half, period) - half;
  if (y >= half) y -= period;
  return y;
}

ManifoldPoint canonicalize(const Coords& raw, const Domain& d) {
  if (raw.size() != d.dim) throw InvalidInput("coordinate count does not match domain dimension");
  Coords c(raw.size());
  for (Eigen::Index k = 0; k < raw.size(); ++k) {
    if (!std::isfinite(raw[k])) throw InvalidInput("non-finite coordinate");
    c[k] = wrap_positive(raw[k], d.period);
  }
  return ManifoldPoint(std::move(c));
}

ManifoldPoint canonicalize(std::initializer_list<double> raw, const Domain& d) {
  Coords c(static_cast<Eigen::Index>(raw.size()));
  Eigen::Index k = 0;
  for (double v : raw) c[k++] = v;
  return canonicalize(c, d);
}

Coords displacement(const ManifoldPoint& a, const ManifoldPoint& b, const Domain& d) {
  if (a.dim() != d.dim || b.dim() != d.dim) throw InvalidInput("points do not belong to the domain");
  const double half = 0.5 * d.period;
  Coords z(d.dim);
  for (int k = 0; k < d.dim; ++k) {
    // Canonical coordinates differ by less than one period.
    double diff = a[k] - b[k];
    if (diff >= half) {
      diff -= d.period;
    } else if (diff < -half) {
      diff += d.period;
    }
    z[k] = diff;
  }
  return z;
}

ManifoldPoint retract(const ManifoldPoint& p, const Coords& step, const Domain& d) {
  if (step.size() != d.dim) throw InvalidInput("step dimension mismatch");
  if (!step.allFinite()) throw InvalidInput("non-finite step");
  return canonicalize(Coords(p.coords() + step), d);
}

double chordal_distance(const ManifoldPoint& a, const ManifoldPoint& b, const Domain& d) {
  if (d.kind == DomainKind::Circle) {
    if (a.dim() != 1 || b.dim() != 1) throw InvalidInput("points do not belong to the circle");
    const double dx = std::cos(a[0]) - std::cos(b[0]);
    const double dy = std::sin(a[0]) - std::sin(b[0]);
    return std::hypot(dx, dy);
  }
  return quotient_distance(a, b, d);
}

double quotient_distance(const ManifoldPoint& a, const ManifoldPoint& b, const Domain& d) {
  return displacement(a, b, d).norm();
}

}  // namespace varpro
