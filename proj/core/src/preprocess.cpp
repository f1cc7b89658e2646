#include "dentseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dentseg {

namespace {

Dims output_dims(const Dims& in, const Spacing& sin, const Spacing& sout) {
  auto axis = [](int n, double si, double so) {
    return std::max(1, int(std::ceil(double(n) * si / so - 1e-9)));
  };
  return {axis(in.x, sin.x, sout.x), axis(in.y, sin.y, sout.y), axis(in.z, sin.z, sout.z)};
}

// Continuous input-voxel coordinate of an output voxel center, with
// both grids anchored at voxel centers.
inline double map_coord(int i_out, double s_out, double s_in) {
  return ((double(i_out) + 0.5) * s_out) / s_in - 0.5;
}

inline void scale_affine_column(std::array<float, 4>& row, int col, double f) {
  row[std::size_t(col)] = float(row[std::size_t(col)] * f);
}

template <typename T>
HeaderAffine resampled_affine(const Grid<T>& in, const Spacing& target, const Dims&) {
  if (!in.header_affine().present)
    return {};
  HeaderAffine a = in.header_affine();
  const double fx = target.x / in.spacing().x;
  const double fy = target.y / in.spacing().y;
  const double fz = target.z / in.spacing().z;
  // center-anchored sampling shifts voxel 0 by (f-1)/2 input voxels
  const double ox = map_coord(0, target.x, in.spacing().x);
  const double oy = map_coord(0, target.y, in.spacing().y);
  const double oz = map_coord(0, target.z, in.spacing().z);
  a.srow_x[3] += float(a.srow_x[0] * ox + a.srow_x[1] * oy + a.srow_x[2] * oz);
  a.srow_y[3] += float(a.srow_y[0] * ox + a.srow_y[1] * oy + a.srow_y[2] * oz);
  a.srow_z[3] += float(a.srow_z[0] * ox + a.srow_z[1] * oy + a.srow_z[2] * oz);
  for (auto* row : {&a.srow_x, &a.srow_y, &a.srow_z}) {
    scale_affine_column(*row, 0, fx);
    scale_affine_column(*row, 1, fy);
    scale_affine_column(*row, 2, fz);
  }
  return a;
}

template <typename T>
Grid<T> resample_nearest_impl(const Grid<T>& in, Dims out_dims, Spacing target) {
  Grid<T> out(out_dims, target);
  out.orientation() = in.orientation();
  out.header_affine() = resampled_affine(in, target, out_dims);
  const Dims& d = in.dims();
  std::vector<int> xs(out_dims.x), ys(out_dims.y), zs(out_dims.z);
  for (int x = 0; x < out_dims.x; ++x)
    xs[x] = std::clamp(int(std::floor(map_coord(x, target.x, in.spacing().x) + 0.5)), 0, d.x - 1);
  for (int y = 0; y < out_dims.y; ++y)
    ys[y] = std::clamp(int(std::floor(map_coord(y, target.y, in.spacing().y) + 0.5)), 0, d.y - 1);
  for (int z = 0; z < out_dims.z; ++z)
    zs[z] = std::clamp(int(std::floor(map_coord(z, target.z, in.spacing().z) + 0.5)), 0, d.z - 1);

  for (int z = 0; z < out_dims.z; ++z)
    for (int y = 0; y < out_dims.y; ++y) {
      T* row = out.data().data() + out.index(0, y, z);
      const T* src_plane = in.data().data() + in.index(0, ys[y], zs[z]);
      for (int x = 0; x < out_dims.x; ++x)
        row[x] = src_plane[xs[x]];
    }
  return out;
}

struct AxisTaps {
  std::vector<int> i0, i1;
  std::vector<double> f; // weight of i1
};

AxisTaps trilinear_taps(int n_out, int n_in, double s_out, double s_in) {
  AxisTaps t;
  t.i0.resize(std::size_t(n_out));
  t.i1.resize(std::size_t(n_out));
  t.f.resize(std::size_t(n_out));
  for (int i = 0; i < n_out; ++i) {
    const double u = map_coord(i, s_out, s_in);
    const double fl = std::floor(u);
    t.i0[std::size_t(i)] = std::clamp(int(fl), 0, n_in - 1);
    t.i1[std::size_t(i)] = std::clamp(int(fl) + 1, 0, n_in - 1);
    t.f[std::size_t(i)] = u - fl;
  }
  return t;
}

} // namespace

ImageGrid clip_intensity(const ImageGrid& img, float lo, float hi) {
  if (!(lo < hi))
    throw std::invalid_argument("clip bounds require lo < hi");
  ImageGrid out = img;
  for (auto& v : out.data())
    v = std::min(hi, std::max(lo, v));
  return out;
}

ImageGrid resample(const ImageGrid& img, Spacing target, Interp mode) {
  if (target.x <= 0 || target.y <= 0 || target.z <= 0)
    throw std::invalid_argument("target spacing must be positive");
  const Dims od = output_dims(img.dims(), img.spacing(), target);
  if (mode == Interp::Nearest)
    return resample_nearest_impl(img, od, target);

  ImageGrid out(od, target);
  out.orientation() = img.orientation();
  out.header_affine() = resampled_affine(img, target, od);
  const AxisTaps tx = trilinear_taps(od.x, img.dims().x, target.x, img.spacing().x);
  const AxisTaps ty = trilinear_taps(od.y, img.dims().y, target.y, img.spacing().y);
  const AxisTaps tz = trilinear_taps(od.z, img.dims().z, target.z, img.spacing().z);

  for (int z = 0; z < od.z; ++z) {
    const double fz = tz.f[std::size_t(z)];
    for (int y = 0; y < od.y; ++y) {
      const double fy = ty.f[std::size_t(y)];
      float* row = out.data().data() + out.index(0, y, z);
      const float* p00 = img.data().data() + img.index(0, ty.i0[std::size_t(y)], tz.i0[std::size_t(z)]);
      const float* p10 = img.data().data() + img.index(0, ty.i1[std::size_t(y)], tz.i0[std::size_t(z)]);
      const float* p01 = img.data().data() + img.index(0, ty.i0[std::size_t(y)], tz.i1[std::size_t(z)]);
      const float* p11 = img.data().data() + img.index(0, ty.i1[std::size_t(y)], tz.i1[std::size_t(z)]);
      for (int x = 0; x < od.x; ++x) {
        const int x0 = tx.i0[std::size_t(x)], x1 = tx.i1[std::size_t(x)];
        const double fx = tx.f[std::size_t(x)];
        const double c00 = p00[x0] + fx * (double(p00[x1]) - p00[x0]);
        const double c10 = p10[x0] + fx * (double(p10[x1]) - p10[x0]);
        const double c01 = p01[x0] + fx * (double(p01[x1]) - p01[x0]);
        const double c11 = p11[x0] + fx * (double(p11[x1]) - p11[x0]);
        const double c0 = c00 + fy * (c10 - c00);
        const double c1 = c01 + fy * (c11 - c01);
        row[x] = float(c0 + fz * (c1 - c0));
      }
    }
  }
  return out;
}

LabelGrid resample(const LabelGrid& lbl, Spacing target) {
  if (target.x <= 0 || target.y <= 0 || target.z <= 0)
    throw std::invalid_argument("target spacing must be positive");
  return resample_nearest_impl(lbl, output_dims(lbl.dims(), lbl.spacing(), target), target);
}

LabelGrid resample_labels_to_reference(const LabelGrid& lbl, Dims ref_dims, Spacing ref_spacing) {
  if (ref_dims.x <= 0 || ref_dims.y <= 0 || ref_dims.z <= 0)
    throw std::invalid_argument("reference dims must be positive");
  if (ref_spacing.x <= 0 || ref_spacing.y <= 0 || ref_spacing.z <= 0)
    throw std::invalid_argument("reference spacing must be positive");
  return resample_nearest_impl(lbl, ref_dims, ref_spacing);
}

ImageGrid preprocess_image(const ImageGrid& img, const PreprocessConfig& cfg) {
  ImageGrid clipped = clip_intensity(img, cfg.clip_lo, cfg.clip_hi);
  if (clipped.spacing() == cfg.target_spacing)
    return clipped;
  return resample(clipped, cfg.target_spacing, Interp::Trilinear);
}

} // namespace dentseg
