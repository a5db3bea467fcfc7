#include "chanhom/geometry.hpp"

#include "chanhom/errors.hpp"

#include <boost/integer/common_factor.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace chanhom {

std::string to_string(const Rational& r) {
  std::ostringstream os;
  os << r.numerator();
  if (r.denominator() != 1) os << '/' << r.denominator();
  return os.str();
}

namespace {

std::int64_t parse_int(const std::string& s, const std::string& whole) {
  if (s.empty()) throw ValidationError("invalid rational '" + whole + "'");
  std::size_t pos = 0;
  long long v = 0;
  try {
    v = std::stoll(s, &pos);
  } catch (const std::exception&) {
    throw ValidationError("invalid rational '" + whole + "'");
  }
  if (pos != s.size()) throw ValidationError("invalid rational '" + whole + "'");
  return v;
}

}  // namespace

Rational parse_rational(const std::string& text) {
  std::string s;
  for (char c : text)
    if (!std::isspace(static_cast<unsigned char>(c))) s.push_back(c);
  if (auto slash = s.find('/'); slash != std::string::npos) {
    const auto num = parse_int(s.substr(0, slash), text);
    const auto den = parse_int(s.substr(slash + 1), text);
    if (den == 0) throw ValidationError("zero denominator in '" + text + "'");
    return Rational(num, den);
  }
  if (auto dot = s.find('.'); dot != std::string::npos) {
    const bool neg = !s.empty() && s[0] == '-';
    std::string ip = s.substr(neg ? 1 : 0, dot - (neg ? 1 : 0));
    std::string fp = s.substr(dot + 1);
    if (fp.size() > 15) throw ValidationError("too many decimals in '" + text + "'");
    std::int64_t scale = 1;
    for (std::size_t i = 0; i < fp.size(); ++i) scale *= 10;
    const std::int64_t ipart = ip.empty() ? 0 : parse_int(ip, text);
    const std::int64_t fpart = fp.empty() ? 0 : parse_int(fp, text);
    if (ipart < 0 || fpart < 0) throw ValidationError("invalid rational '" + text + "'");
    Rational r(ipart * scale + fpart, scale);
    return neg ? -r : r;
  }
  return Rational(parse_int(s, text));
}

const char* region_name(Region r) {
  switch (r) {
    case Region::BulkPlus: return "bulk+";
    case Region::BulkMinus: return "bulk-";
    case Region::Channel: return "channel";
    case Region::Void: return "void";
  }
  return "?";
}

ChannelProfile ChannelProfile::create(std::vector<ChannelSegment> segments, std::int64_t alignment) {
  if (segments.empty()) throw GeometryError("channel profile needs at least one segment");
  if (segments.front().y_lo != Rational(-1) || segments.back().y_hi != Rational(1))
    throw GeometryError("profile segments must partition [-1, 1]");
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (!(s.y_lo < s.y_hi)) throw GeometryError("profile segment " + std::to_string(i) + " is degenerate or reversed");
    if (i + 1 < segments.size() && s.y_hi != segments[i + 1].y_lo)
      throw GeometryError("profile segments must partition [-1, 1] (gap or overlap at segment " + std::to_string(i) + ")");
    if (s.width >= Rational(1)) throw GeometryError("channel touches lateral boundary (width " + to_string(s.width) + ")");
    if (s.width <= Rational(0)) throw GeometryError("channel width must be positive");
  }

  // Every breakpoint and wall offset must be a multiple of 1/alignment.
  std::vector<Rational> offsets;
  for (const auto& s : segments) {
    offsets.push_back(s.y_lo);
    offsets.push_back(s.y_hi);
    offsets.push_back(Rational(1, 2) - s.width / 2);
    offsets.push_back(Rational(1, 2) + s.width / 2);
  }
  std::int64_t needed = 1;
  for (const auto& o : offsets) needed = boost::integer::lcm(needed, o.denominator());
  if (alignment == 0) {
    alignment = needed;
  } else if (alignment < 0 || alignment % needed != 0) {
    throw GeometryError("declared alignment " + std::to_string(alignment) +
                        " does not resolve the profile (needs a multiple of " + std::to_string(needed) + ")");
  }

  ChannelProfile p;
  p.segments_ = std::move(segments);
  p.alignment_ = alignment;
  return p;
}

ChannelProfile ChannelProfile::rectangular(Rational width, std::int64_t alignment) {
  return create({ChannelSegment{Rational(-1), Rational(1), width}}, alignment);
}

Rational SegmentR::length() const {
  const Rational dx = x1 - x0;
  const Rational dy = y1 - y0;
  return (dx < 0 ? -dx : dx) + (dy < 0 ? -dy : dy);  // axis-aligned
}

CellGeometry::CellGeometry(ChannelProfile profile) : profile_(std::move(profile)) {
  const auto& segs = profile_.segments();
  const Rational half(1, 2);
  clearance_ = Rational(1);
  for (const auto& s : segs) {
    rects_.push_back(RectR{half - s.width / 2, half + s.width / 2, s.y_lo, s.y_hi});
    area_ += s.width * (s.y_hi - s.y_lo);
    clearance_ = std::min(clearance_, (Rational(1) - s.width) / 2);
  }
  const auto& last = segs.back();
  const auto& first = segs.front();
  top_ = SegmentR{half - last.width / 2, Rational(1), half + last.width / 2, Rational(1)};
  bottom_ = SegmentR{half - first.width / 2, Rational(-1), half + first.width / 2, Rational(-1)};

  for (int sign : {-1, +1}) {
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const Rational x = half + Rational(sign) * segs[i].width / 2;
      lateral_.push_back(SegmentR{x, segs[i].y_lo, x, segs[i].y_hi});
      if (i + 1 < segs.size() && segs[i].width != segs[i + 1].width) {
        const Rational xn = half + Rational(sign) * segs[i + 1].width / 2;
        lateral_.push_back(SegmentR{x, segs[i].y_hi, xn, segs[i].y_hi});
      }
    }
  }
  for (const auto& l : lateral_) lateral_length_ += l.length();
}

std::size_t CellGeometry::segment_at(double yn) const {
  const auto& segs = profile_.segments();
  for (std::size_t i = 0; i < segs.size(); ++i)
    if (yn < to_double(segs[i].y_hi)) return i;
  return segs.size() - 1;
}

bool CellGeometry::contains(Point2 y) const {
  if (!(y.y > -1.0 && y.y < 1.0)) return false;
  for (const auto& r : rects_) {
    if (y.y > to_double(r.y0) && y.y < to_double(r.y1) && y.x > to_double(r.x0) && y.x < to_double(r.x1)) return true;
  }
  // Points on an internal breakpoint line are interior if both adjacent widths cover them.
  const auto& segs = profile_.segments();
  for (std::size_t i = 0; i + 1 < segs.size(); ++i) {
    if (y.y == to_double(segs[i].y_hi)) {
      const double w = to_double(std::min(segs[i].width, segs[i + 1].width));
      return std::abs(y.x - 0.5) < w / 2;
    }
  }
  return false;
}

bool CellGeometry::contains_closure(Point2 y, double tol) const {
  for (const auto& r : rects_) {
    if (y.y >= to_double(r.y0) - tol && y.y <= to_double(r.y1) + tol && y.x >= to_double(r.x0) - tol &&
        y.x <= to_double(r.x1) + tol)
      return true;
  }
  return false;
}

namespace {
bool on_segment(const SegmentR& s, Point2 p, double tol) {
  const double x0 = to_double(std::min(s.x0, s.x1)), x1 = to_double(std::max(s.x0, s.x1));
  const double y0 = to_double(std::min(s.y0, s.y1)), y1 = to_double(std::max(s.y0, s.y1));
  return p.x >= x0 - tol && p.x <= x1 + tol && p.y >= y0 - tol && p.y <= y1 + tol;
}
}  // namespace

bool CellGeometry::on_lateral(Point2 y, double tol) const {
  return std::any_of(lateral_.begin(), lateral_.end(), [&](const SegmentR& s) { return on_segment(s, y, tol); });
}

double CellGeometry::arc_position(Point2 y, double tol) const {
  double s = 0.0;
  for (const auto& seg : lateral_) {
    if (on_segment(seg, y, tol)) {
      return s + std::abs(y.x - to_double(seg.x0)) + std::abs(y.y - to_double(seg.y0));
    }
    s += to_double(seg.length());
  }
  throw DomainError("point is not on the lateral channel boundary");
}

CellGeometry build_reference_cell(const ChannelProfile& profile) { return CellGeometry(profile); }

std::optional<std::int64_t> inverse_scale(double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) return std::nullopt;
  const double inv = 1.0 / eps;
  const double r = std::round(inv);
  if (r < 1.0 || std::abs(inv - r) > 1e-9 * std::max(1.0, r)) return std::nullopt;
  return static_cast<std::int64_t>(r);
}

MicroGeometry::MicroGeometry(double eps, double height, std::shared_ptr<const CellGeometry> cell)
    : eps_(eps), columns_(inverse_scale(eps).value_or(0)), height_(height), cell_(std::move(cell)) {}

MicroGeometry build_micro_geometry(double eps, double height, std::shared_ptr<const CellGeometry> cell) {
  const auto inv = inverse_scale(eps);
  if (!inv) throw GeometryError("eps^-1 must be a positive integer (eps = " + std::to_string(eps) + ")");
  if (!(eps < height)) throw GeometryError("eps must be smaller than the bulk height H");
  if (!cell) throw GeometryError("missing reference cell");
  // Store the exact reciprocal so that column arithmetic is consistent.
  return MicroGeometry(1.0 / static_cast<double>(*inv), height, std::move(cell));
}

std::int64_t MicroGeometry::column_of(double xbar) const {
  auto k = static_cast<std::int64_t>(std::floor(xbar / eps_));
  return std::clamp<std::int64_t>(k, 0, columns_ - 1);
}

Point2 MicroGeometry::to_cell(Point2 x) const {
  const auto k = column_of(x.x);
  return Point2{x.x / eps_ - static_cast<double>(k), x.y / eps_};
}

Point2 MicroGeometry::from_cell(std::int64_t column, Point2 y) const {
  return Point2{eps_ * (static_cast<double>(column) + y.x), eps_ * y.y};
}

Region MicroGeometry::classify(Point2 x) const {
  if (x.x < 0.0 || x.x > 1.0 || x.y < -height_ || x.y > height_)
    throw DomainError("point outside Omega = (0,1) x (-H,H)");
  if (x.y > eps_) return Region::BulkPlus;
  if (x.y < -eps_) return Region::BulkMinus;
  return cell_->contains(to_cell(x)) ? Region::Channel : Region::Void;
}

bool MicroGeometry::on_interface(Point2 x, int side, double tol) const {
  if (std::abs(x.y - side * eps_) > tol) return false;
  const auto y = to_cell(x);
  const auto& s = side > 0 ? cell_->top() : cell_->bottom();
  return y.x >= to_double(s.x0) - tol / eps_ && y.x <= to_double(s.x1) + tol / eps_;
}

bool MicroGeometry::on_lateral(Point2 x, double tol) const {
  if (std::abs(x.y) > eps_ + tol) return false;
  return cell_->on_lateral(to_cell(x), tol / eps_);
}

double MicroGeometry::channel_area() const { return eps_ * to_double(cell_->area()); }
double MicroGeometry::lateral_length() const { return to_double(cell_->lateral_length()); }
double MicroGeometry::interface_length(int side) const {
  return to_double(side > 0 ? cell_->top_length() : cell_->bottom_length());
}
double MicroGeometry::bulk_area(int) const { return height_ - eps_; }

}  // namespace chanhom
