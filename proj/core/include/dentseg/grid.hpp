#pragma once

#include <array>
#include <cstdint>
#include <cstddef>
#include <string>
#include <unordered_set>
#include <vector>

namespace dentseg {

using Label = std::uint16_t;

struct Index3 {
  int x = 0, y = 0, z = 0;
  bool operator==(const Index3&) const = default;
};

struct Dims {
  int x = 0, y = 0, z = 0;
  std::size_t total() const { return std::size_t(x) * std::size_t(y) * std::size_t(z); }
  bool operator==(const Dims&) const = default;
};

struct Spacing {
  double x = 1.0, y = 1.0, z = 1.0;
  double voxel_volume_mm3() const { return x * y * z; }
  bool operator==(const Spacing&) const = default;
};

/// Axis-role convention for landmark logic. The declared roles are:
/// x runs left-right (lateral), y grows anterior->posterior, z grows
/// inferior->superior. Datasets with flipped headers can invert the
/// y/z senses; landmark code interprets axes through this tag only.
struct Orientation {
  bool y_increases_posteriorly = true;
  bool z_increases_superiorly = true;
  bool operator==(const Orientation&) const = default;
};

/// Voxel->mm affine carried through from a source file header. Written
/// back on save when present; never consulted by landmark logic.
struct HeaderAffine {
  bool present = false;
  short qform_code = 0, sform_code = 0;
  std::array<float, 4> srow_x{}, srow_y{}, srow_z{};
};

/// Inclusive axis-aligned voxel index range.
struct VoxelBox {
  Index3 lo, hi;

  int width_x() const { return hi.x - lo.x + 1; }
  int width_y() const { return hi.y - lo.y + 1; }
  int width_z() const { return hi.z - lo.z + 1; }
  Dims widths() const { return {width_x(), width_y(), width_z()}; }

  bool valid() const { return lo.x <= hi.x && lo.y <= hi.y && lo.z <= hi.z; }
  bool contains(const Index3& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y && p.z >= lo.z && p.z <= hi.z;
  }
  bool inside(const Dims& d) const {
    return lo.x >= 0 && lo.y >= 0 && lo.z >= 0 && hi.x < d.x && hi.y < d.y && hi.z < d.z;
  }
  VoxelBox clamped(const Dims& d) const;

  std::string to_string() const;               // "x0,y0,z0:x1,y1,z1"
  static VoxelBox parse(const std::string& s); // inverse of to_string

  bool operator==(const VoxelBox&) const = default;
};

/// Dense 3D voxel grid, x-fastest storage. Treat instances as immutable
/// once filled; operations return new grids.
template <typename T>
class Grid {
public:
  Grid() = default;
  Grid(Dims dims, Spacing spacing, T fill = T{});

  const Dims& dims() const { return dims_; }
  const Spacing& spacing() const { return spacing_; }
  Orientation& orientation() { return orientation_; }
  const Orientation& orientation() const { return orientation_; }
  HeaderAffine& header_affine() { return affine_; }
  const HeaderAffine& header_affine() const { return affine_; }

  std::size_t size() const { return data_.size(); }
  std::size_t index(int x, int y, int z) const {
    return std::size_t(x) + std::size_t(dims_.x) * (std::size_t(y) + std::size_t(dims_.y) * std::size_t(z));
  }
  Index3 unindex(std::size_t i) const {
    const int x = int(i % std::size_t(dims_.x));
    const std::size_t r = i / std::size_t(dims_.x);
    return {x, int(r % std::size_t(dims_.y)), int(r / std::size_t(dims_.y))};
  }

  T at(int x, int y, int z) const { return data_[index(x, y, z)]; }
  T& at(int x, int y, int z) { return data_[index(x, y, z)]; }
  T operator[](std::size_t i) const { return data_[i]; }
  T& operator[](std::size_t i) { return data_[i]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool same_geometry(const Grid& o, double spacing_tol = 1e-6) const;

private:
  Dims dims_{};
  Spacing spacing_{};
  Orientation orientation_{};
  HeaderAffine affine_{};
  std::vector<T> data_;
};

using ImageGrid = Grid<float>;
using LabelGrid = Grid<Label>;

/// Extract the subgrid covered by `box`. The box must lie within the
/// grid; spacing and orientation carry over. Throws on empty or
/// out-of-range boxes.
template <typename T>
Grid<T> crop(const Grid<T>& g, const VoxelBox& box);

/// Copy `src` over `dst` at `box`, replacing a dst voxel only when the
/// src label is in `overwrite`. Voxels outside the box are untouched.
LabelGrid paste(const LabelGrid& dst, const LabelGrid& src, const VoxelBox& box,
                const std::unordered_set<Label>& overwrite);

extern template class Grid<float>;
extern template class Grid<std::uint16_t>;
extern template Grid<float> crop(const Grid<float>&, const VoxelBox&);
extern template Grid<std::uint16_t> crop(const Grid<std::uint16_t>&, const VoxelBox&);

} // namespace dentseg
