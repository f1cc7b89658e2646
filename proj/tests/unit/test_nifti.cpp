#include "dentseg/nifti.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cstring>
#include <fstream>

using namespace dentseg;
using dentseg::testing::random_label_grid;
using dentseg::testing::TempDir;

TEST_CASE("label round trip is voxel-exact with spacing preserved") {
  const TempDir tmp("nifti_rt");
  LabelGrid g = random_label_grid({7, 6, 5}, 54, 9, {0.3, 0.3, 0.3});
  g.at(0, 0, 0) = 148; // max challenge id must survive
  g.at(1, 0, 0) = 53;

  for (const char* name : {"a.nii", "a.nii.gz"}) {
    write_labels(g, tmp.file(name));
    const LabelGrid back = read_labels(tmp.file(name));
    CHECK(back.dims() == g.dims());
    CHECK(back.data() == g.data());
    CHECK(back.spacing().x == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(back.spacing().y == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(back.spacing().z == doctest::Approx(0.3).epsilon(1e-6));
  }
}

TEST_CASE("gzipped and plain encodings read back identically") {
  const TempDir tmp("nifti_gz");
  const LabelGrid g = random_label_grid({9, 9, 9}, 47, 4, {0.6, 0.6, 0.6});
  write_labels(g, tmp.file("v.nii"), false);
  write_labels(g, tmp.file("v.nii.gz"), true);
  CHECK(read_labels(tmp.file("v.nii")).data() == read_labels(tmp.file("v.nii.gz")).data());
}

TEST_CASE("single voxel volume") {
  const TempDir tmp("nifti_one");
  LabelGrid g({1, 1, 1}, {1, 1, 1});
  g.at(0, 0, 0) = 7;
  write_labels(g, tmp.file("one.nii.gz"));
  CHECK(read_labels(tmp.file("one.nii.gz")).at(0, 0, 0) == 7);
}

TEST_CASE("image round trip keeps integral HU values") {
  const TempDir tmp("nifti_img");
  ImageGrid img({5, 4, 3}, {0.6, 0.6, 0.6});
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = float(int(i) * 37 % 4800 - 1000);
  write_image(img, tmp.file("img.nii.gz"));
  const ImageGrid back = read_image(tmp.file("img.nii.gz"));
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(back[i] == img[i]);
}

TEST_CASE("truncated files fail to parse") {
  const TempDir tmp("nifti_trunc");
  const LabelGrid g = random_label_grid({6, 6, 6}, 5, 2);
  write_labels(g, tmp.file("v.nii"), false);

  std::ifstream in(tmp.file("v.nii"), std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  SUBCASE("mid-header") {
    std::ofstream out(tmp.file("t.nii"), std::ios::binary);
    out.write(bytes.data(), 100);
    out.close();
    CHECK_THROWS_AS(read_labels(tmp.file("t.nii")), std::runtime_error);
  }
  SUBCASE("mid-payload") {
    std::ofstream out(tmp.file("t.nii"), std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size() - 10));
    out.close();
    CHECK_THROWS_AS(read_labels(tmp.file("t.nii")), std::runtime_error);
  }
  SUBCASE("bad magic") {
    bytes[344] = 'x';
    std::ofstream out(tmp.file("t.nii"), std::ios::binary);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    out.close();
    CHECK_THROWS_AS(read_labels(tmp.file("t.nii")), std::runtime_error);
  }
}

TEST_CASE("reader applies scl_slope and scl_inter to images") {
  const TempDir tmp("nifti_scl");
  ImageGrid img({3, 3, 3}, {1, 1, 1});
  for (std::size_t i = 0; i < img.size(); ++i)
    img[i] = float(i);
  write_image(img, tmp.file("v.nii"), false);

  // patch the header in place: scl_slope at 112, scl_inter at 116
  std::fstream f(tmp.file("v.nii"), std::ios::binary | std::ios::in | std::ios::out);
  const float slope = 2.0f, inter = 10.0f;
  f.seekp(112);
  f.write(reinterpret_cast<const char*>(&slope), 4);
  f.write(reinterpret_cast<const char*>(&inter), 4);
  f.close();

  const ImageGrid back = read_image(tmp.file("v.nii"));
  for (std::size_t i = 0; i < img.size(); ++i)
    CHECK(back[i] == doctest::Approx(float(i) * 2.0f + 10.0f));

  // a scaled volume is not a valid label map
  CHECK_THROWS_AS(read_labels(tmp.file("v.nii")), std::runtime_error);
}

TEST_CASE("label reads reject non-integer datatypes") {
  const TempDir tmp("nifti_float");
  ImageGrid img({3, 3, 3}, {1, 1, 1}, 1.0f);
  write_image(img, tmp.file("f.nii.gz"), std::nullopt, ImageDataType::Float32);
  CHECK_THROWS_AS(read_labels(tmp.file("f.nii.gz")), std::runtime_error);
  CHECK(read_image(tmp.file("f.nii.gz")).at(0, 0, 0) == 1.0f);
}

TEST_CASE("byte-swapped (opposite-endian) files read correctly") {
  const TempDir tmp("nifti_swap");
  const LabelGrid g = random_label_grid({5, 4, 3}, 40, 6, {0.3, 0.3, 0.3});
  write_labels(g, tmp.file("v.nii"), false);

  std::ifstream in(tmp.file("v.nii"), std::ios::binary);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  in.close();

  auto swap_at = [&](std::size_t off, std::size_t width) {
    for (std::size_t k = 0; k < width / 2; ++k)
      std::swap(bytes[off + k], bytes[off + width - 1 - k]);
  };
  swap_at(0, 4); // sizeof_hdr
  for (int k = 0; k < 8; ++k)
    swap_at(40 + 2 * std::size_t(k), 2); // dim
  swap_at(70, 2);                        // datatype
  swap_at(72, 2);                        // bitpix
  for (int k = 0; k < 8; ++k)
    swap_at(76 + 4 * std::size_t(k), 4); // pixdim
  swap_at(108, 4);                       // vox_offset
  swap_at(112, 4);                       // scl_slope
  swap_at(116, 4);                       // scl_inter
  for (std::size_t i = 352; i + 1 < bytes.size(); i += 2)
    swap_at(i, 2); // uint16 payload

  std::ofstream out(tmp.file("swapped.nii"), std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
  out.close();

  const LabelGrid back = read_labels(tmp.file("swapped.nii"));
  CHECK(back.dims() == g.dims());
  CHECK(back.data() == g.data());
  CHECK(back.spacing().x == doctest::Approx(0.3).epsilon(1e-6));
}

TEST_CASE("source affine survives a read-write cycle") {
  const TempDir tmp("nifti_affine");
  LabelGrid g = random_label_grid({4, 4, 4}, 3, 8, {0.5, 0.5, 0.5});
  g.header_affine().present = true;
  g.header_affine().sform_code = 2;
  g.header_affine().srow_x = {0.5f, 0, 0, -12.0f};
  g.header_affine().srow_y = {0, 0.5f, 0, 7.0f};
  g.header_affine().srow_z = {0, 0, 0.5f, 3.0f};
  write_labels(g, tmp.file("v.nii.gz"));
  const LabelGrid back = read_labels(tmp.file("v.nii.gz"));
  CHECK(back.header_affine().present);
  CHECK(back.header_affine().sform_code == 2);
  CHECK(back.header_affine().srow_x == g.header_affine().srow_x);
  CHECK(back.header_affine().srow_y == g.header_affine().srow_y);
  CHECK(back.header_affine().srow_z == g.header_affine().srow_z);
}
