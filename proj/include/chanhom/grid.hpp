#pragma once

#include "chanhom/geometry.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace chanhom {

enum class FaceKind : std::uint8_t {
  Interior,   // two active cells of the same compartment
  Interface,  // bulk/channel face (micro) or channel top/bottom S*+- (cell grid)
  Lateral,    // channel wall N (channel cell next to void)
  Outer,      // zero-flux boundary: x_bar = 0, 1 or a layer wall next to void
  Top,        // x_n = +H
  Bottom,     // x_n = -H
  Sigma,      // macro bulk cell touching the interface x_n = 0
};

const char* face_kind_name(FaceKind k);

/// A face of a rectilinear grid. `a` is always an active cell index. For
/// interior-type faces `b` is the neighbour on the positive side of `axis`;
/// boundary faces have `b == -1` and `outward` gives the sign of the outer
/// normal along `axis`.
struct Face {
  std::int32_t a = -1;
  std::int32_t b = -1;
  std::uint8_t axis = 0;  // 0: normal along x, 1: normal along y
  FaceKind kind = FaceKind::Interior;
  std::int8_t side = 0;     // +1/-1 for Interface and Sigma faces
  std::int8_t outward = 0;  // boundary faces only
  double length = 0.0;
  double dist_a = 0.0;
  double dist_b = 0.0;
  Point2 mid;

  bool internal() const noexcept { return b >= 0; }
};

enum class GridKind : std::uint8_t { Micro, MacroBulk, Cell };

/// Bulk grading: spacing starts at `first` next to the layer or interface,
/// grows by at most `ratio` per cell and is capped at `max_spacing`.
struct GridOptions {
  double grading_ratio = 1.2;
  double bulk_max_spacing = 0.125;
};

/// Tensor-product grid with region tags; only non-void cells carry unknowns.
class RectGrid {
public:
  RectGrid(GridKind kind, std::vector<double> xs, std::vector<double> ys, std::vector<Region> tags);

  GridKind kind() const noexcept { return kind_; }
  std::size_t nx() const noexcept { return xs_.size() - 1; }
  std::size_t ny() const noexcept { return ys_.size() - 1; }
  const std::vector<double>& xs() const noexcept { return xs_; }
  const std::vector<double>& ys() const noexcept { return ys_; }

  std::size_t active_count() const noexcept { return cell_of_active_.size(); }
  /// Active index of cell (i, j), or -1 for void cells.
  std::int32_t active(std::size_t i, std::size_t j) const { return active_of_cell_[j * nx() + i]; }
  std::array<std::size_t, 2> ij(std::size_t a) const {
    const auto c = cell_of_active_[a];
    return {c % nx(), c / nx()};
  }
  Region region(std::size_t a) const { return tags_[cell_of_active_[a]]; }
  Region tag(std::size_t i, std::size_t j) const { return tags_[j * nx() + i]; }
  Point2 center(std::size_t a) const;
  double width(std::size_t a) const;
  double height(std::size_t a) const;
  double volume(std::size_t a) const { return width(a) * height(a); }

  const std::vector<Face>& faces() const noexcept { return faces_; }
  /// Faces of active cell a in the order -x, +x, -y, +y.
  const std::array<std::int32_t, 4>& cell_faces(std::size_t a) const { return cell_faces_[a]; }

  // Metadata filled by the builders.
  double eps = 0.0;           // micro grids
  std::int64_t refinement = 0;  // k (micro) or m (cell grid)
  std::size_t layer_row_begin = 0;  // micro: first row inside the layer

private:
  void build_faces();

  GridKind kind_;
  std::vector<double> xs_, ys_;
  std::vector<Region> tags_;
  std::vector<std::int32_t> active_of_cell_;
  std::vector<std::size_t> cell_of_active_;
  std::vector<Face> faces_;
  std::vector<std::array<std::int32_t, 4>> cell_faces_;
};

/// Spacings of a graded partition of (0, length), starting next to 0.
/// The coarse partition is built from `first * sub` and every coarse interval
/// is split into `sub` equal parts, so doubling `sub` nests the grids.
std::vector<double> graded_spacings(double length, double first_coarse, std::int64_t sub, const GridOptions& opts);

/// Throws AlignmentError unless every wall and breakpoint of the profile is a
/// multiple of 1/k.
void check_alignment(const ChannelProfile& profile, std::int64_t k);

std::shared_ptr<const RectGrid> build_micro_grid(const MicroGeometry& geom, std::int64_t k,
                                                 const GridOptions& opts = {});

/// Grid over Omega+ and Omega- of the limit problem. The horizontal spacing
/// is 1/sigma_nodes; `sub` subdivides the graded coarse vertical partition.
std::shared_ptr<const RectGrid> build_macro_bulk_grid(double height, std::int64_t sigma_nodes, std::int64_t sub,
                                                      const GridOptions& opts = {});

/// Grid of the reference cell with spacing 1/m; active cells tile Z*.
std::shared_ptr<const RectGrid> build_cell_grid(const CellGeometry& cell, std::int64_t m);

/// Discrete carrier of a scalar field: one value per active cell.
struct Field {
  std::shared_ptr<const RectGrid> grid;
  std::vector<double> values;
  double time = 0.0;

  Field() = default;
  Field(std::shared_ptr<const RectGrid> g, std::vector<double> v, double t = 0.0);
  static Field constant(std::shared_ptr<const RectGrid> g, double c, double t = 0.0);
};

/// (u, v)_{L_eps}: bulk cells weight 1, channel cells weight 1/eps.
double inner_product_Leps(const Field& u, const Field& v);
double norm_Leps(const Field& u);

/// Face differences (u_b - u_a) / (dist_a + dist_b) on internal faces, 0 on boundary faces.
std::vector<double> face_gradients(const RectGrid& grid, std::span<const double> values);

/// Per-compartment squared gradient integrals. Each cell half along each axis
/// takes the gradient of the face on that side if it is internal, else the
/// gradient of the opposite face, else zero.
struct GradientParts {
  double bulk_plus = 0.0;
  double bulk_minus = 0.0;
  double channel = 0.0;
};

/// With `channel_only`, faces touching a non-channel cell count as boundary.
GradientParts gradient_parts(const RectGrid& grid, std::span<const double> grads, bool channel_only = false);

/// ||u||_{H_eps} from precomputed face gradients of u.
double norm_Heps(const Field& u, std::span<const double> grads);
double norm_Heps(const Field& u);

}  // namespace chanhom
