#include "dentseg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace dentseg {

VoxelBox VoxelBox::clamped(const Dims& d) const {
  VoxelBox b = *this;
  b.lo.x = std::clamp(b.lo.x, 0, d.x - 1);
  b.lo.y = std::clamp(b.lo.y, 0, d.y - 1);
  b.lo.z = std::clamp(b.lo.z, 0, d.z - 1);
  b.hi.x = std::clamp(b.hi.x, 0, d.x - 1);
  b.hi.y = std::clamp(b.hi.y, 0, d.y - 1);
  b.hi.z = std::clamp(b.hi.z, 0, d.z - 1);
  return b;
}

std::string VoxelBox::to_string() const {
  std::ostringstream os;
  os << lo.x << ',' << lo.y << ',' << lo.z << ':' << hi.x << ',' << hi.y << ',' << hi.z;
  return os.str();
}

VoxelBox VoxelBox::parse(const std::string& s) {
  VoxelBox b;
  char c1, c2, sep, c3, c4;
  std::istringstream is(s);
  if (!(is >> b.lo.x >> c1 >> b.lo.y >> c2 >> b.lo.z >> sep >> b.hi.x >> c3 >> b.hi.y >> c4 >> b.hi.z) ||
      c1 != ',' || c2 != ',' || sep != ':' || c3 != ',' || c4 != ',')
    throw std::invalid_argument("bad box spec '" + s + "', expected x0,y0,z0:x1,y1,z1");
  return b;
}

template <typename T>
Grid<T>::Grid(Dims dims, Spacing spacing, T fill) : dims_(dims), spacing_(spacing) {
  if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
    throw std::invalid_argument("grid dims must be positive");
  if (spacing.x <= 0 || spacing.y <= 0 || spacing.z <= 0)
    throw std::invalid_argument("grid spacing must be positive");
  data_.assign(dims.total(), fill);
}

template <typename T>
bool Grid<T>::same_geometry(const Grid& o, double spacing_tol) const {
  return dims_ == o.dims_ &&
         std::abs(spacing_.x - o.spacing_.x) <= spacing_tol &&
         std::abs(spacing_.y - o.spacing_.y) <= spacing_tol &&
         std::abs(spacing_.z - o.spacing_.z) <= spacing_tol;
}

template <typename T>
Grid<T> crop(const Grid<T>& g, const VoxelBox& box) {
  if (!box.valid())
    throw std::invalid_argument("empty box");
  if (!box.inside(g.dims()))
    throw std::invalid_argument("crop box " + box.to_string() + " exceeds grid extent");

  Grid<T> out(box.widths(), g.spacing());
  out.orientation() = g.orientation();
  if (g.header_affine().present) {
    // Shift the affine translation by the crop offset so voxel->mm
    // positions are preserved.
    HeaderAffine a = g.header_affine();
    a.srow_x[3] += a.srow_x[0] * box.lo.x + a.srow_x[1] * box.lo.y + a.srow_x[2] * box.lo.z;
    a.srow_y[3] += a.srow_y[0] * box.lo.x + a.srow_y[1] * box.lo.y + a.srow_y[2] * box.lo.z;
    a.srow_z[3] += a.srow_z[0] * box.lo.x + a.srow_z[1] * box.lo.y + a.srow_z[2] * box.lo.z;
    out.header_affine() = a;
  }

  const int wx = box.width_x();
  for (int z = box.lo.z; z <= box.hi.z; ++z)
    for (int y = box.lo.y; y <= box.hi.y; ++y) {
      const T* src = g.data().data() + g.index(box.lo.x, y, z);
      T* dst = out.data().data() + out.index(0, y - box.lo.y, z - box.lo.z);
      std::copy(src, src + wx, dst);
    }
  return out;
}

LabelGrid paste(const LabelGrid& dst, const LabelGrid& src, const VoxelBox& box,
                const std::unordered_set<Label>& overwrite) {
  if (!box.valid())
    throw std::invalid_argument("empty box");
  if (!box.inside(dst.dims()))
    throw std::invalid_argument("paste box " + box.to_string() + " exceeds destination extent");
  if (!(src.dims() == box.widths()))
    throw std::invalid_argument("paste source dims do not match box widths");

  LabelGrid out = dst;
  for (int z = 0; z < src.dims().z; ++z)
    for (int y = 0; y < src.dims().y; ++y)
      for (int x = 0; x < src.dims().x; ++x) {
        const Label v = src.at(x, y, z);
        if (overwrite.count(v))
          out.at(box.lo.x + x, box.lo.y + y, box.lo.z + z) = v;
      }
  return out;
}

template class Grid<float>;
template class Grid<std::uint16_t>;
template Grid<float> crop(const Grid<float>&, const VoxelBox&);
template Grid<std::uint16_t> crop(const Grid<std::uint16_t>&, const VoxelBox&);

} // namespace dentseg
