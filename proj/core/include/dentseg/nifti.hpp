#pragma once

#include "dentseg/grid.hpp"

#include <optional>
#include <string>

namespace dentseg {

/// Subset of the NIfTI-1 header this toolkit reads and writes.
struct VolumeHeader {
  Dims dims;
  Spacing spacing;
  std::int16_t datatype = 0;
  float scl_slope = 1.0f;
  float scl_inter = 0.0f;
  HeaderAffine affine;
  bool gzipped = false;
};

// NIfTI-1 datatype codes used here.
enum : std::int16_t {
  kNiftiUInt8 = 2,
  kNiftiInt16 = 4,
  kNiftiInt32 = 8,
  kNiftiFloat32 = 16,
  kNiftiFloat64 = 64,
  kNiftiInt8 = 256,
  kNiftiUInt16 = 512,
  kNiftiUInt32 = 768,
};

/// Parse only the header of a .nii / .nii.gz file.
VolumeHeader read_volume_header(const std::string& path);

/// Read an intensity volume. Scales by scl_slope/scl_inter when set.
ImageGrid read_image(const std::string& path);

/// Read a label map. Rejects non-integer datatypes and any scaling,
/// negative values, or values above the 16-bit label range.
LabelGrid read_labels(const std::string& path);

/// Datatype selection for image writes. Labels always go out as uint16.
enum class ImageDataType { Int16, Float32 };

/// Write a volume as NIfTI-1. Compression defaults to "on iff the path
/// ends in .gz"; pass `compress` to override.
void write_image(const ImageGrid& img, const std::string& path,
                 std::optional<bool> compress = std::nullopt,
                 ImageDataType dtype = ImageDataType::Int16);
void write_labels(const LabelGrid& lbl, const std::string& path,
                  std::optional<bool> compress = std::nullopt);

} // namespace dentseg
