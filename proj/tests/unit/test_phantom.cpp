#include "dentseg/phantom.hpp"

#include "dentseg/metrics.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace dentseg;

TEST_CASE("the counter-based generator is a pure function of seed and counter") {
  CHECK(splitmix64_at(1, 0) == splitmix64_at(1, 0));
  CHECK(splitmix64_at(1, 0) != splitmix64_at(2, 0));
  CHECK(splitmix64_at(1, 0) != splitmix64_at(1, 1));
  const double u = rand_unit(9, 9);
  CHECK(u >= 0.0);
  CHECK(u < 1.0);
}

TEST_CASE("phantom generation is deterministic per spec") {
  PhantomSpec spec;
  spec.dims = {64, 64, 64};
  const Phantom a = generate_phantom(spec);
  const Phantom b = generate_phantom(spec);
  CHECK(a.labels.data() == b.labels.data());
  CHECK(a.image.data() == b.image.data());

  spec.seed = 2;
  const Phantom c = generate_phantom(spec);
  CHECK(a.labels.data() != c.labels.data()); // seed jitters placement
}

TEST_CASE("the phantom contains every requested structure") {
  PhantomSpec spec;
  spec.dims = {64, 64, 64};
  spec.num_teeth = 4;
  const Phantom ph = generate_phantom(spec);
  const std::set<Label> present(ph.labels.data().begin(), ph.labels.data().end());
  for (const Label id : {Label(0), Label(1), Label(7), Label(11), Label(12), Label(13), Label(14),
                         Label(50), Label(51), Label(52), Label(53)})
    CHECK(present.count(id) == 1);
}

TEST_CASE("phantom intensities sit in the HU window") {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  const Phantom ph = generate_phantom(spec);
  for (const float v : ph.image.data()) {
    CHECK(v >= -1000.0f);
    CHECK(v <= 3800.0f);
  }
  // mandible voxels carry bone intensity
  for (std::size_t i = 0; i < ph.labels.size(); ++i)
    if (ph.labels[i] == 1)
      CHECK(ph.image[i] == 1500.0f);
}

TEST_CASE("mandible voxelization tracks the analytic volume") {
  PhantomSpec spec;
  spec.dims = {96, 96, 80};
  const Phantom ph = generate_phantom(spec);
  // nerves are carved out of mandible voxels, so count them back in
  double carved = class_volume_mm3(ph.labels, 1);
  for (const Label nerve : {Label(51), Label(52), Label(53)})
    carved += class_volume_mm3(ph.labels, nerve);
  const double analytic = mandible_analytic_volume_mm3(spec);
  CHECK(carved > 0.8 * analytic);
  CHECK(carved < 1.2 * analytic);
}

TEST_CASE("undersized phantoms are rejected") {
  PhantomSpec spec;
  spec.dims = {20, 64, 64};
  CHECK_THROWS_AS(generate_phantom(spec), std::invalid_argument);
}

TEST_CASE("noiseless raters equal the reference") {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  const Phantom ph = generate_phantom(spec);
  RaterNoise none;
  none.flip_rate = 0.0;
  none.boundary_steps = 0;
  CHECK(simulate_rater(ph.labels, none).data() == ph.labels.data());
}

TEST_CASE("rater noise is deterministic per seed and differs across seeds") {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  const Phantom ph = generate_phantom(spec);
  RaterNoise noise;
  noise.flip_rate = 0.05;
  noise.seed = 3;
  const LabelGrid a = simulate_rater(ph.labels, noise);
  const LabelGrid b = simulate_rater(ph.labels, noise);
  CHECK(a.data() == b.data());
  noise.seed = 4;
  CHECK(simulate_rater(ph.labels, noise).data() != a.data());
}

TEST_CASE("the flip fraction matches the configured rate within 3 sigma") {
  PhantomSpec spec;
  spec.dims = {64, 64, 64};
  const Phantom ph = generate_phantom(spec);
  for (const double rate : {0.02, 0.08}) {
    RaterNoise noise;
    noise.flip_rate = rate;
    noise.seed = 11;
    const LabelGrid noisy = simulate_rater(ph.labels, noise);
    std::size_t diff = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i)
      diff += noisy[i] != ph.labels[i];
    const double n = double(noisy.size());
    const double sigma = std::sqrt(rate * (1.0 - rate) / n);
    CHECK(std::abs(double(diff) / n - rate) <= 3.0 * sigma);
  }
}

TEST_CASE("moderate flip noise keeps large structures in the expected dice band") {
  PhantomSpec spec;
  spec.dims = {64, 64, 64};
  const Phantom ph = generate_phantom(spec);
  for (const std::uint64_t seed : {1ULL, 2ULL}) {
    RaterNoise noise;
    noise.flip_rate = 0.05;
    noise.seed = seed;
    const LabelGrid noisy = simulate_rater(ph.labels, noise);
    std::set<Label> classes(ph.labels.data().begin(), ph.labels.data().end());
    for (const Label cls : classes) {
      if (cls == 0)
        continue;
      std::uint64_t count = 0;
      for (const Label v : ph.labels.data())
        count += v == cls;
      if (count < 1000)
        continue;
      const double d = dice(noisy, ph.labels, cls).value;
      CHECK(d >= 0.85);
      CHECK(d <= 0.999);
    }
  }
}

TEST_CASE("boundary steps perturb only the shell") {
  PhantomSpec spec;
  spec.dims = {48, 48, 48};
  const Phantom ph = generate_phantom(spec);
  RaterNoise noise;
  noise.flip_rate = 0.0;
  noise.boundary_steps = 1;
  noise.seed = 5;
  const LabelGrid out = simulate_rater(ph.labels, noise);
  CHECK(out.data() != ph.labels.data());
  // interior mandible voxels (all 6 neighbors mandible) must be intact
  const Dims d = ph.labels.dims();
  for (int z = 1; z < d.z - 1; ++z)
    for (int y = 1; y < d.y - 1; ++y)
      for (int x = 1; x < d.x - 1; ++x) {
        if (ph.labels.at(x, y, z) != 1)
          continue;
        const bool interior = ph.labels.at(x - 1, y, z) == 1 && ph.labels.at(x + 1, y, z) == 1 &&
                              ph.labels.at(x, y - 1, z) == 1 && ph.labels.at(x, y + 1, z) == 1 &&
                              ph.labels.at(x, y, z - 1) == 1 && ph.labels.at(x, y, z + 1) == 1;
        if (interior)
          CHECK(out.at(x, y, z) == 1);
      }
}

TEST_CASE("invalid noise settings are rejected") {
  const LabelGrid g({4, 4, 4}, {1, 1, 1});
  RaterNoise bad;
  bad.flip_rate = 0.5;
  CHECK_THROWS_AS(simulate_rater(g, bad), std::invalid_argument);
  bad.flip_rate = 0.1;
  bad.boundary_steps = -1;
  CHECK_THROWS_AS(simulate_rater(g, bad), std::invalid_argument);
}
