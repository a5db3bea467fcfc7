#pragma once

#include <boost/rational.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace chanhom {

using Rational = boost::rational<std::int64_t>;

inline double to_double(const Rational& r) {
  return boost::rational_cast<double>(r);
}

/// Parses "p/q", "p" or a decimal such as "0.25" into an exact rational.
Rational parse_rational(const std::string& text);
/// "p/q", or "p" for integers.
std::string to_string(const Rational& r);

struct Point2 {
  double x = 0.0;  // horizontal coordinate (x-bar / y-bar)
  double y = 0.0;  // vertical coordinate (x_n / y_n)
};

/// Region of the microscopic domain a point or grid cell belongs to.
enum class Region : std::uint8_t { BulkPlus, BulkMinus, Channel, Void };

const char* region_name(Region r);

/// One piece of a channel width profile: on y_n in (y_lo, y_hi) the channel
/// occupies |y_bar - 1/2| < width / 2.
struct ChannelSegment {
  Rational y_lo;
  Rational y_hi;
  Rational width;
};

/// Centered, piecewise-constant width profile of the reference channel.
class ChannelProfile {
public:
  /// Validates the segments. `alignment == 0` derives the smallest admissible
  /// alignment from the breakpoint and wall denominators.
  static ChannelProfile create(std::vector<ChannelSegment> segments, std::int64_t alignment = 0);

  /// Rectangular channel of the given width spanning the whole cell height.
  static ChannelProfile rectangular(Rational width, std::int64_t alignment = 0);

  const std::vector<ChannelSegment>& segments() const noexcept { return segments_; }
  std::int64_t alignment() const noexcept { return alignment_; }

private:
  ChannelProfile() = default;
  std::vector<ChannelSegment> segments_;
  std::int64_t alignment_ = 1;
};

struct RectR {
  Rational x0, x1, y0, y1;
  Rational area() const { return (x1 - x0) * (y1 - y0); }
};

/// Axis-aligned boundary segment from (x0, y0) to (x1, y1).
struct SegmentR {
  Rational x0, y0, x1, y1;
  Rational length() const;
};

/// The reference cell Z = (0,1) x (-1,1) together with the channel Z* and its
/// boundary pieces S*+ (top), S*- (bottom) and the lateral boundary N.
class CellGeometry {
public:
  explicit CellGeometry(ChannelProfile profile);

  const ChannelProfile& profile() const noexcept { return profile_; }
  const std::vector<RectR>& rectangles() const noexcept { return rects_; }
  const SegmentR& top() const noexcept { return top_; }
  const SegmentR& bottom() const noexcept { return bottom_; }
  /// Ordered path: left wall bottom to top, then right wall bottom to top.
  const std::vector<SegmentR>& lateral() const noexcept { return lateral_; }

  Rational area() const noexcept { return area_; }
  Rational lateral_length() const noexcept { return lateral_length_; }
  Rational top_length() const { return top_.length(); }
  Rational bottom_length() const { return bottom_.length(); }
  /// Distance from N to the lateral boundary of Z.
  Rational lateral_clearance() const noexcept { return clearance_; }

  /// Index of the profile segment containing y_n (closed below, open above;
  /// y_n = 1 maps to the last segment).
  std::size_t segment_at(double yn) const;

  /// Open-set membership in Z*.
  bool contains(Point2 y) const;
  /// Membership in the closure of Z*, with tolerance.
  bool contains_closure(Point2 y, double tol = 1e-12) const;
  /// True if y lies on N (within tolerance).
  bool on_lateral(Point2 y, double tol = 1e-12) const;
  /// Arc-length position of a point of N along the lateral path.
  double arc_position(Point2 y, double tol = 1e-12) const;

private:
  ChannelProfile profile_;
  std::vector<RectR> rects_;
  SegmentR top_;
  SegmentR bottom_;
  std::vector<SegmentR> lateral_;
  Rational area_;
  Rational lateral_length_;
  Rational clearance_;
};

CellGeometry build_reference_cell(const ChannelProfile& profile);

/// The eps-periodic microscopic domain over Omega = (0,1) x (-H, H).
class MicroGeometry {
public:
  MicroGeometry(double eps, double height, std::shared_ptr<const CellGeometry> cell);

  double eps() const noexcept { return eps_; }
  /// Number of channel columns, 1/eps.
  std::int64_t columns() const noexcept { return columns_; }
  double height() const noexcept { return height_; }
  const CellGeometry& cell() const noexcept { return *cell_; }
  std::shared_ptr<const CellGeometry> cell_ptr() const noexcept { return cell_; }

  /// Index of the eps-cell column containing x_bar (clamped to the last column at x_bar = 1).
  std::int64_t column_of(double xbar) const;
  /// Microscopic coordinate y = (x_bar/eps - k, x_n/eps) of x relative to its column.
  Point2 to_cell(Point2 x) const;
  /// Inverse map for column k.
  Point2 from_cell(std::int64_t column, Point2 y) const;

  /// Total classifier on the closed domain; throws DomainError outside it.
  Region classify(Point2 x) const;

  bool on_interface(Point2 x, int side, double tol = 1e-12) const;
  bool on_lateral(Point2 x, double tol = 1e-12) const;

  /// |Omega*_eps^M| = eps |Z*|.
  double channel_area() const;
  /// |N_eps| = |N|.
  double lateral_length() const;
  /// |S*_eps^+-| = |S*+-|.
  double interface_length(int side) const;
  double bulk_area(int side) const;

private:
  double eps_;
  std::int64_t columns_;
  double height_;
  std::shared_ptr<const CellGeometry> cell_;
};

/// Validates eps^{-1} in N and 0 < eps < H, then builds the geometry.
MicroGeometry build_micro_geometry(double eps, double height, std::shared_ptr<const CellGeometry> cell);

/// Returns 1/eps when it is a positive integer (within 1e-9), otherwise nullopt.
std::optional<std::int64_t> inverse_scale(double eps);

}  // namespace chanhom
