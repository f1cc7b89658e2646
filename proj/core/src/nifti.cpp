#include "dentseg/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace dentseg {

namespace {

// On-disk NIfTI-1 header, 348 bytes.
#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(Nifti1Header) == 348, "NIfTI-1 header must be 348 bytes");

template <typename T>
void byte_swap(T& v) {
  auto* p = reinterpret_cast<unsigned char*>(&v);
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i)
    std::swap(p[i], p[sizeof(T) - 1 - i]);
}

void swap_header(Nifti1Header& h) {
  byte_swap(h.sizeof_hdr);
  byte_swap(h.extents);
  byte_swap(h.session_error);
  for (auto& d : h.dim) byte_swap(d);
  byte_swap(h.intent_p1);
  byte_swap(h.intent_p2);
  byte_swap(h.intent_p3);
  byte_swap(h.intent_code);
  byte_swap(h.datatype);
  byte_swap(h.bitpix);
  byte_swap(h.slice_start);
  for (auto& p : h.pixdim) byte_swap(p);
  byte_swap(h.vox_offset);
  byte_swap(h.scl_slope);
  byte_swap(h.scl_inter);
  byte_swap(h.slice_end);
  byte_swap(h.cal_max);
  byte_swap(h.cal_min);
  byte_swap(h.slice_duration);
  byte_swap(h.toffset);
  byte_swap(h.glmax);
  byte_swap(h.glmin);
  byte_swap(h.qform_code);
  byte_swap(h.sform_code);
  byte_swap(h.quatern_b);
  byte_swap(h.quatern_c);
  byte_swap(h.quatern_d);
  byte_swap(h.qoffset_x);
  byte_swap(h.qoffset_y);
  byte_swap(h.qoffset_z);
  for (auto& v : h.srow_x) byte_swap(v);
  for (auto& v : h.srow_y) byte_swap(v);
  for (auto& v : h.srow_z) byte_swap(v);
}

bool is_gzip(const std::vector<char>& bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

std::vector<char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error(path + ": cannot open for reading");
  in.seekg(0, std::ios::end);
  const std::streamoff n = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> bytes(static_cast<std::size_t>(n));
  if (n > 0 && !in.read(bytes.data(), n))
    throw std::runtime_error(path + ": read failed");
  return bytes;
}

std::vector<char> gunzip(const std::vector<char>& in, const std::string& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK)
    throw std::runtime_error(path + ": inflateInit failed");
  std::vector<char> out;
  out.reserve(in.size() * 4);
  std::vector<char> buf(1 << 20);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  int rc = Z_OK;
  do {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw std::runtime_error(path + ": corrupt gzip stream");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
  } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
  inflateEnd(&zs);
  if (rc != Z_STREAM_END)
    throw std::runtime_error(path + ": truncated gzip stream");
  return out;
}

std::vector<char> gzip_bytes(const std::vector<char>& in, const std::string& path) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK)
    throw std::runtime_error(path + ": deflateInit failed");
  std::vector<char> out(deflateBound(&zs, static_cast<uLong>(in.size())));
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  if (rc != Z_STREAM_END) {
    deflateEnd(&zs);
    throw std::runtime_error(path + ": gzip compression failed");
  }
  out.resize(out.size() - zs.avail_out);
  deflateEnd(&zs);
  return out;
}

int bytes_per_voxel(std::int16_t datatype) {
  switch (datatype) {
    case kNiftiUInt8:
    case kNiftiInt8: return 1;
    case kNiftiInt16:
    case kNiftiUInt16: return 2;
    case kNiftiInt32:
    case kNiftiUInt32:
    case kNiftiFloat32: return 4;
    case kNiftiFloat64: return 8;
    default: return 0;
  }
}

bool integer_datatype(std::int16_t datatype) {
  switch (datatype) {
    case kNiftiUInt8:
    case kNiftiInt8:
    case kNiftiInt16:
    case kNiftiUInt16:
    case kNiftiInt32:
    case kNiftiUInt32: return true;
    default: return false;
  }
}

struct ParsedVolume {
  VolumeHeader header;
  std::vector<char> payload; // raw voxel bytes, native order after swap
  bool swapped = false;
};

template <typename T>
T payload_value(const std::vector<char>& payload, std::size_t i, bool swapped) {
  T v;
  std::memcpy(&v, payload.data() + i * sizeof(T), sizeof(T));
  if (swapped)
    byte_swap(v);
  return v;
}

ParsedVolume parse(const std::string& path) {
  std::vector<char> bytes = read_file(path);
  const bool gz = is_gzip(bytes);
  if (gz)
    bytes = gunzip(bytes, path);

  if (bytes.size() < sizeof(Nifti1Header))
    throw std::runtime_error(path + ": truncated NIfTI header");

  Nifti1Header h{};
  std::memcpy(&h, bytes.data(), sizeof(h));
  bool swapped = false;
  if (h.sizeof_hdr != 348) {
    swap_header(h);
    swapped = true;
    if (h.sizeof_hdr != 348)
      throw std::runtime_error(path + ": not a NIfTI-1 file (bad sizeof_hdr)");
  }
  if (std::strncmp(h.magic, "n+1", 3) != 0 && std::strncmp(h.magic, "ni1", 3) != 0)
    throw std::runtime_error(path + ": not a NIfTI-1 file (bad magic)");
  if (std::strncmp(h.magic, "ni1", 3) == 0)
    throw std::runtime_error(path + ": two-file (.hdr/.img) NIfTI is not supported");

  if (h.dim[0] < 3)
    throw std::runtime_error(path + ": expected a 3D volume");
  for (int d = 4; d <= h.dim[0] && d < 8; ++d)
    if (h.dim[d] > 1)
      throw std::runtime_error(path + ": volumes with >3 non-singleton dims are not supported");

  ParsedVolume pv;
  pv.swapped = swapped;
  pv.header.dims = {h.dim[1], h.dim[2], h.dim[3]};
  pv.header.spacing = {std::abs(double(h.pixdim[1])), std::abs(double(h.pixdim[2])),
                       std::abs(double(h.pixdim[3]))};
  pv.header.datatype = h.datatype;
  pv.header.scl_slope = h.scl_slope;
  pv.header.scl_inter = h.scl_inter;
  pv.header.gzipped = gz;
  if (h.sform_code > 0 || h.qform_code > 0) {
    pv.header.affine.present = true;
    pv.header.affine.qform_code = h.qform_code;
    pv.header.affine.sform_code = h.sform_code;
    std::memcpy(pv.header.affine.srow_x.data(), h.srow_x, sizeof(h.srow_x));
    std::memcpy(pv.header.affine.srow_y.data(), h.srow_y, sizeof(h.srow_y));
    std::memcpy(pv.header.affine.srow_z.data(), h.srow_z, sizeof(h.srow_z));
  }

  if (pv.header.dims.x <= 0 || pv.header.dims.y <= 0 || pv.header.dims.z <= 0)
    throw std::runtime_error(path + ": non-positive dimensions");
  if (pv.header.spacing.x <= 0 || pv.header.spacing.y <= 0 || pv.header.spacing.z <= 0)
    throw std::runtime_error(path + ": non-positive voxel spacing");

  const int bpv = bytes_per_voxel(h.datatype);
  if (bpv == 0)
    throw std::runtime_error(path + ": unsupported datatype code " + std::to_string(h.datatype));

  const std::size_t offset = static_cast<std::size_t>(h.vox_offset);
  const std::size_t need = pv.header.dims.total() * std::size_t(bpv);
  if (offset < sizeof(Nifti1Header) || bytes.size() < offset + need)
    throw std::runtime_error(path + ": truncated voxel data");
  pv.payload.assign(bytes.begin() + offset, bytes.begin() + offset + need);
  return pv;
}

template <typename Out, typename Fn>
void for_each_voxel(const ParsedVolume& pv, Out* out, Fn convert) {
  const std::size_t n = pv.header.dims.total();
  switch (pv.header.datatype) {
    case kNiftiUInt8:
      for (std::size_t i = 0; i < n; ++i) out[i] = convert(double(payload_value<std::uint8_t>(pv.payload, i, false)), i);
      break;
    case kNiftiInt8:
      for (std::size_t i = 0; i < n; ++i) out[i] = convert(double(payload_value<std::int8_t>(pv.payload, i, false)), i);
      break;
    case kNiftiInt16:
      for (std::size_t i = 0; i < n; ++i) out[i] = convert(double(payload_value<std::int16_t>(pv.payload, i, pv.swapped)), i);
      break;
    case kNiftiUInt16:
      for (std::size_t i = 0; i < n; ++i) out[i] = convert(double(payload_value<std::uint16_t>(pv.payload, i, pv.swapped)), i);
      break;
    case kNiftiInt32:
      for (std::size_t i = 0; i < n; ++i) out[i] = convert(double(payload_value<std::int32_t>(pv.payload, i, pv.swapped)), i);
      break;
    case kNiftiUInt32:
      for (std::size_t i = 0; i < n; ++i) out[i] = convert(double(payload_value<std::uint32_t>(pv.payload, i, pv.swapped)), i);
      break;
    case kNiftiFloat32:
      for (std::size_t i = 0; i < n; ++i) out[i] = convert(double(payload_value<float>(pv.payload, i, pv.swapped)), i);
      break;
    case kNiftiFloat64:
      for (std::size_t i = 0; i < n; ++i) out[i] = convert(payload_value<double>(pv.payload, i, pv.swapped), i);
      break;
    default:
      throw std::logic_error("unreachable datatype");
  }
}

Nifti1Header make_header(const Dims& dims, const Spacing& spacing, std::int16_t datatype,
                         int bitpix, const HeaderAffine& affine) {
  Nifti1Header h{};
  h.sizeof_hdr = 348;
  h.regular = 'r';
  h.dim[0] = 3;
  h.dim[1] = std::int16_t(dims.x);
  h.dim[2] = std::int16_t(dims.y);
  h.dim[3] = std::int16_t(dims.z);
  h.dim[4] = h.dim[5] = h.dim[6] = h.dim[7] = 1;
  h.datatype = datatype;
  h.bitpix = std::int16_t(bitpix);
  h.pixdim[0] = 1.0f;
  h.pixdim[1] = float(spacing.x);
  h.pixdim[2] = float(spacing.y);
  h.pixdim[3] = float(spacing.z);
  h.pixdim[4] = h.pixdim[5] = h.pixdim[6] = h.pixdim[7] = 1.0f;
  h.vox_offset = 352.0f;
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2; // NIFTI_UNITS_MM
  if (affine.present) {
    h.qform_code = affine.qform_code;
    h.sform_code = affine.sform_code > 0 ? affine.sform_code : 1;
    std::memcpy(h.srow_x, affine.srow_x.data(), sizeof(h.srow_x));
    std::memcpy(h.srow_y, affine.srow_y.data(), sizeof(h.srow_y));
    std::memcpy(h.srow_z, affine.srow_z.data(), sizeof(h.srow_z));
  } else {
    h.sform_code = 1;
    h.srow_x[0] = float(spacing.x);
    h.srow_y[1] = float(spacing.y);
    h.srow_z[2] = float(spacing.z);
  }
  std::memcpy(h.magic, "n+1", 4);
  return h;
}

void write_bytes(const std::string& path, const Nifti1Header& h, const std::vector<char>& voxels,
                 std::optional<bool> compress) {
  std::vector<char> bytes(352, 0);
  std::memcpy(bytes.data(), &h, sizeof(h));
  bytes.insert(bytes.end(), voxels.begin(), voxels.end());

  const bool gz = compress.value_or(path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0);
  if (gz)
    bytes = gzip_bytes(bytes, path);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw std::runtime_error(path + ": cannot open for writing");
  out.write(bytes.data(), std::streamsize(bytes.size()));
  if (!out)
    throw std::runtime_error(path + ": write failed");
}

} // namespace

VolumeHeader read_volume_header(const std::string& path) {
  return parse(path).header;
}

ImageGrid read_image(const std::string& path) {
  const ParsedVolume pv = parse(path);
  ImageGrid img(pv.header.dims, pv.header.spacing);
  img.header_affine() = pv.header.affine;
  // slope 0 means "no scaling" per the standard
  const double slope = pv.header.scl_slope == 0.0f ? 1.0 : double(pv.header.scl_slope);
  const double inter = pv.header.scl_slope == 0.0f ? 0.0 : double(pv.header.scl_inter);
  for_each_voxel(pv, img.data().data(),
                 [&](double v, std::size_t) { return float(v * slope + inter); });
  return img;
}

LabelGrid read_labels(const std::string& path) {
  const ParsedVolume pv = parse(path);
  if (!integer_datatype(pv.header.datatype))
    throw std::runtime_error(path + ": label volume has non-integer datatype " +
                             std::to_string(pv.header.datatype));
  if ((pv.header.scl_slope != 0.0f && pv.header.scl_slope != 1.0f) || pv.header.scl_inter != 0.0f)
    throw std::runtime_error(path + ": label volume must not carry intensity scaling");

  LabelGrid lbl(pv.header.dims, pv.header.spacing);
  lbl.header_affine() = pv.header.affine;
  for_each_voxel(pv, lbl.data().data(), [&](double v, std::size_t i) {
    if (v < 0.0 || v > double(std::numeric_limits<Label>::max()) || v != std::floor(v)) {
      const Index3 p = lbl.unindex(i);
      throw std::runtime_error(path + ": label value " + std::to_string(v) + " at voxel (" +
                               std::to_string(p.x) + "," + std::to_string(p.y) + "," +
                               std::to_string(p.z) + ") is out of range");
    }
    return Label(v);
  });
  return lbl;
}

void write_image(const ImageGrid& img, const std::string& path, std::optional<bool> compress,
                 ImageDataType dtype) {
  const std::size_t n = img.size();
  if (dtype == ImageDataType::Int16) {
    std::vector<char> voxels(n * 2);
    auto* out = reinterpret_cast<std::int16_t*>(voxels.data());
    for (std::size_t i = 0; i < n; ++i) {
      const float v = std::round(img[i]);
      const float lo = float(std::numeric_limits<std::int16_t>::min());
      const float hi = float(std::numeric_limits<std::int16_t>::max());
      out[i] = std::int16_t(std::clamp(v, lo, hi));
    }
    write_bytes(path, make_header(img.dims(), img.spacing(), kNiftiInt16, 16, img.header_affine()),
                voxels, compress);
  } else {
    std::vector<char> voxels(n * 4);
    std::memcpy(voxels.data(), img.data().data(), voxels.size());
    write_bytes(path, make_header(img.dims(), img.spacing(), kNiftiFloat32, 32, img.header_affine()),
                voxels, compress);
  }
}

void write_labels(const LabelGrid& lbl, const std::string& path, std::optional<bool> compress) {
  std::vector<char> voxels(lbl.size() * 2);
  std::memcpy(voxels.data(), lbl.data().data(), voxels.size());
  write_bytes(path, make_header(lbl.dims(), lbl.spacing(), kNiftiUInt16, 16, lbl.header_affine()),
              voxels, compress);
}

} // namespace dentseg
