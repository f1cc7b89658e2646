#pragma once

#include "dentseg/grid.hpp"

namespace dentseg {

struct PreprocessConfig {
  float clip_lo = -1000.0f; // HU
  float clip_hi = 3800.0f;  // HU
  Spacing target_spacing{0.6, 0.6, 0.6};
};

/// Clamp every voxel into [lo, hi]. Geometry unchanged.
ImageGrid clip_intensity(const ImageGrid& img, float lo, float hi);

enum class Interp { Trilinear, Nearest };

/// Resample to a new isotropic or anisotropic spacing. Output dims are
/// ceil(dims_in * spacing_in / spacing_out) so no physical extent is
/// lost; samples are taken at output voxel centers mapped into input
/// physical space, clamping out-of-range samples to the border voxel.
ImageGrid resample(const ImageGrid& img, Spacing target, Interp mode);
LabelGrid resample(const LabelGrid& lbl, Spacing target); // nearest only

/// Nearest-neighbor resample onto an explicit reference geometry
/// (dims forced to the reference, not derived from the ceil rule).
LabelGrid resample_labels_to_reference(const LabelGrid& lbl, Dims ref_dims, Spacing ref_spacing);

/// clip then resample, the order applied before Phase-1 inference.
ImageGrid preprocess_image(const ImageGrid& img, const PreprocessConfig& cfg);

} // namespace dentseg
