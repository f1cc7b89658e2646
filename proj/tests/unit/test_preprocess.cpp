#include "dentseg/preprocess.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace dentseg;
using dentseg::testing::random_image_grid;
using dentseg::testing::random_label_grid;

TEST_CASE("clip pins values to the HU window") {
  ImageGrid img({3, 1, 1}, {1, 1, 1});
  img.at(0, 0, 0) = -2000.0f;
  img.at(1, 0, 0) = 500.0f;
  img.at(2, 0, 0) = 4000.0f;
  const ImageGrid out = clip_intensity(img, -1000.0f, 3800.0f);
  CHECK(out.at(0, 0, 0) == -1000.0f);
  CHECK(out.at(1, 0, 0) == 500.0f);
  CHECK(out.at(2, 0, 0) == 3800.0f);
  CHECK(out.dims() == img.dims());
}

TEST_CASE("clip is idempotent") {
  const ImageGrid img = random_image_grid({6, 5, 4}, -3000, 6000, 11);
  const ImageGrid once = clip_intensity(img, -1000, 3800);
  const ImageGrid twice = clip_intensity(once, -1000, 3800);
  CHECK(once.data() == twice.data());
}

TEST_CASE("clip rejects inverted bounds") {
  const ImageGrid img = random_image_grid({2, 2, 2}, 0, 1, 1);
  CHECK_THROWS_AS(clip_intensity(img, 100, -100), std::invalid_argument);
}

TEST_CASE("resample at the input spacing is the identity") {
  const LabelGrid lbl = random_label_grid({7, 6, 5}, 9, 21, {0.3, 0.3, 0.3});
  const LabelGrid out = resample(lbl, {0.3, 0.3, 0.3});
  CHECK(out.dims() == lbl.dims());
  CHECK(out.data() == lbl.data());

  const ImageGrid img = random_image_grid({7, 6, 5}, -1000, 3800, 22, {0.3, 0.3, 0.3});
  CHECK(resample(img, {0.3, 0.3, 0.3}, Interp::Trilinear).dims() == img.dims());
  const ImageGrid near = resample(img, {0.3, 0.3, 0.3}, Interp::Nearest);
  CHECK(near.data() == img.data());
}

TEST_CASE("output dims follow the ceil rule") {
  const ImageGrid img = random_image_grid({10, 11, 13}, 0, 100, 3, {0.3, 0.3, 0.3});
  const ImageGrid out = resample(img, {0.6, 0.6, 0.6}, Interp::Trilinear);
  // 10*0.5=5, 11*0.5=5.5->6, 13*0.5=6.5->7
  CHECK(out.dims() == Dims{5, 6, 7});
  CHECK(out.spacing() == Spacing{0.6, 0.6, 0.6});
}

TEST_CASE("constant volumes stay constant under resampling") {
  const ImageGrid img({9, 8, 7}, {0.3, 0.3, 0.3}, 123.0f);
  for (const Interp mode : {Interp::Trilinear, Interp::Nearest}) {
    const ImageGrid out = resample(img, {0.45, 0.5, 0.7}, mode);
    for (const float v : out.data())
      CHECK(v == 123.0f);
  }
}

TEST_CASE("trilinear output stays within the input range") {
  const ImageGrid img = random_image_grid({8, 8, 8}, -1000, 3800, 17, {0.3, 0.3, 0.3});
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  for (const Spacing target : {Spacing{0.2, 0.2, 0.2}, Spacing{0.45, 0.45, 0.45},
                               Spacing{0.7, 0.5, 0.9}}) {
    const ImageGrid out = resample(img, target, Interp::Trilinear);
    for (const float v : out.data()) {
      CHECK(v >= *lo);
      CHECK(v <= *hi);
    }
  }
}

TEST_CASE("nearest resampling never invents labels") {
  const LabelGrid lbl = random_label_grid({9, 9, 9}, 6, 31, {0.3, 0.3, 0.3});
  const std::set<Label> in_labels(lbl.data().begin(), lbl.data().end());
  for (const Spacing target : {Spacing{0.2, 0.2, 0.2}, Spacing{0.6, 0.6, 0.6},
                               Spacing{0.5, 0.7, 0.4}}) {
    const LabelGrid out = resample(lbl, target);
    for (const Label v : out.data())
      CHECK(in_labels.count(v) == 1);
  }
}

TEST_CASE("resample to reference geometry hits the reference dims") {
  const LabelGrid native = random_label_grid({37, 41, 29}, 4, 7, {0.3, 0.3, 0.3});
  const LabelGrid down = resample(native, {0.6, 0.6, 0.6});
  CHECK(down.dims() == Dims{19, 21, 15});
  const LabelGrid up = resample_labels_to_reference(down, native.dims(), native.spacing());
  CHECK(up.dims() == native.dims());
  CHECK(up.spacing() == native.spacing());

  SUBCASE("reference equal to the input is the identity") {
    const LabelGrid same = resample_labels_to_reference(native, native.dims(), native.spacing());
    CHECK(same.data() == native.data());
  }
  SUBCASE("single-label volumes stay single-label") {
    const LabelGrid solid({10, 10, 10}, {0.3, 0.3, 0.3}, 5);
    const LabelGrid out = resample_labels_to_reference(solid, {23, 9, 31}, {0.11, 0.5, 0.2});
    for (const Label v : out.data())
      CHECK(v == 5);
  }
}

TEST_CASE("thick structures survive a downsample-upsample cycle") {
  // cube and ball phantoms, both >= 4 output voxels thick at 2x
  LabelGrid lbl({64, 64, 64}, {0.3, 0.3, 0.3});
  for (int z = 20; z < 44; ++z)
    for (int y = 20; y < 44; ++y)
      for (int x = 20; x < 44; ++x)
        lbl.at(x, y, z) = 1;

  const LabelGrid down = resample(lbl, {0.6, 0.6, 0.6});
  const LabelGrid up = resample_labels_to_reference(down, lbl.dims(), lbl.spacing());
  std::size_t agree = 0;
  for (std::size_t i = 0; i < lbl.size(); ++i)
    agree += up[i] == lbl[i];
  CHECK(double(agree) / double(lbl.size()) >= 0.99);
}

TEST_CASE("clip and trilinear resample commute on in-range intensities") {
  // phantom-like HU values inside the clip window; trilinear outputs
  // are convex combinations, so both orders must agree there
  const ImageGrid img = random_image_grid({12, 11, 10}, -1000, 1500, 29, {0.3, 0.3, 0.3});
  const Spacing target{0.6, 0.6, 0.6};
  const ImageGrid clip_first = resample(clip_intensity(img, -1000, 3800), target, Interp::Trilinear);
  const ImageGrid clip_after = clip_intensity(resample(img, target, Interp::Trilinear), -1000, 3800);
  REQUIRE(clip_first.dims() == clip_after.dims());
  for (std::size_t i = 0; i < clip_first.size(); ++i)
    CHECK(std::abs(clip_first[i] - clip_after[i]) <= 1e-4f);

  // nearest mode commutes exactly for any values
  const ImageGrid wild = random_image_grid({12, 11, 10}, -3000, 6000, 30, {0.3, 0.3, 0.3});
  const ImageGrid n1 = resample(clip_intensity(wild, -1000, 3800), target, Interp::Nearest);
  const ImageGrid n2 = clip_intensity(resample(wild, target, Interp::Nearest), -1000, 3800);
  CHECK(n1.data() == n2.data());
}

TEST_CASE("preprocess clips then resamples") {
  ImageGrid img({10, 10, 10}, {0.3, 0.3, 0.3}, 500.0f);
  img.at(0, 0, 0) = 9000.0f;
  const ImageGrid out = preprocess_image(img, {});
  CHECK(out.dims() == Dims{5, 5, 5});
  CHECK(out.spacing() == Spacing{0.6, 0.6, 0.6});
  for (const float v : out.data())
    CHECK(v <= 3800.0f);
}

TEST_CASE("non-positive target spacing is rejected") {
  const ImageGrid img = random_image_grid({4, 4, 4}, 0, 1, 9);
  CHECK_THROWS_AS(resample(img, {0.0, 0.6, 0.6}, Interp::Trilinear), std::invalid_argument);
  const LabelGrid lbl = random_label_grid({4, 4, 4}, 3, 9);
  CHECK_THROWS_AS(resample(lbl, {-0.1, 0.6, 0.6}), std::invalid_argument);
}
