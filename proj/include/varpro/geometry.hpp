#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>
#include <string_view>

namespace varpro {

/// Thrown on malformed inputs (non-finite coordinates, bad shapes, invalid configs).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Largest supported parameter-space dimension. Points use inline storage so
/// the hot loops in feature assembly never allocate.
inline constexpr int kMaxDim = 4;

using Coords = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

enum class DomainKind { Circle, FlatTorus };

std::string_view to_string(DomainKind kind);
DomainKind domain_kind_from_string(std::string_view name);

/// Parameter space: the circle S^1 stored as an angle in [0, 2pi), or the flat
/// torus R^n / L Z^n.
struct Domain {
  DomainKind kind = DomainKind::Circle;
  int dim = 1;
  double period = 2.0 * 3.14159265358979323846;

  static Domain circle();
  static Domain flat_torus(int dim, double period);

  void validate() const;
  bool operator==(const Domain&) const = default;
};

/// A point of a Domain with every coordinate in [0, period).
class ManifoldPoint {
 public:
  ManifoldPoint() = default;

  int dim() const { return static_cast<int>(coords_.size()); }
  const Coords& coords() const { return coords_; }
  double operator[](int axis) const { return coords_[axis]; }

  bool operator==(const ManifoldPoint& other) const { return coords_ == other.coords_; }

 private:
  explicit ManifoldPoint(Coords c) : coords_(std::move(c)) {}
  Coords coords_;

  friend ManifoldPoint canonicalize(const Coords& raw, const Domain& d);
};

/// Wraps raw coordinates into [0, L) per axis. Throws InvalidInput on non-finite input
/// or a dimension mismatch.
ManifoldPoint canonicalize(const Coords& raw, const Domain& d);
ManifoldPoint canonicalize(std::initializer_list<double> raw, const Domain& d);

/// Shortest representative of a - b, each coordinate in [-L/2, L/2).
Coords displacement(const ManifoldPoint& a, const ManifoldPoint& b, const Domain& d);

/// Exponential map on the quotient: canonicalize(p + step).
ManifoldPoint retract(const ManifoldPoint& p, const Coords& step, const Domain& d);

/// Circle: chord length between the unit-vector embeddings. Torus: quotient distance.
double chordal_distance(const ManifoldPoint& a, const ManifoldPoint& b, const Domain& d);

/// Quotient (geodesic) distance, the norm of displacement().
double quotient_distance(const ManifoldPoint& a, const ManifoldPoint& b, const Domain& d);

/// Wraps a scalar into [-L/2, L/2).
double wrap_centered(double x, double period);

/// Wraps a scalar into [0, L).
double wrap_positive(double x, double period);

}  // namespace varpro
