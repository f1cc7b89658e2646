#pragma once

#include "dentseg/grid.hpp"

#include <cstdint>

namespace dentseg {

/// splitmix64 evaluated as a counter-based generator: the n-th draw of
/// a stream is a pure function of (seed, n), identical on every
/// platform.
std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t counter);
/// Uniform double in [0, 1) from the same stream.
double rand_unit(std::uint64_t seed, std::uint64_t counter);

/// Toy jaw with the consolidated label ids the pipeline consumes:
/// horseshoe mandible slab (1), pharynx column (7), tooth spheres
/// (11, 12, ...) with pulp cores (50), and incisive/lingual nerve
/// tubes (51, 52, 53) embedded in the mandible. The seed jitters tooth
/// and nerve placement slightly; geometry is otherwise closed-form.
struct PhantomSpec {
  Dims dims{96, 96, 80};
  Spacing spacing{0.3, 0.3, 0.3};
  std::uint64_t seed = 1;
  int num_teeth = 6;
};

struct Phantom {
  ImageGrid image;  // air -1000, soft tissue 40, bone 1500, pulp 300
  LabelGrid labels;
};

Phantom generate_phantom(const PhantomSpec& spec);

/// Closed-form mandible volume (half annulus times slab height) for
/// checking the voxelization.
double mandible_analytic_volume_mm3(const PhantomSpec& spec);

/// Independent per-voxel label flips at `flip_rate` (a flipped voxel
/// takes a random other label from the reference's label set), after
/// optional whole-boundary dilate/erode passes. Deterministic per seed.
struct RaterNoise {
  double flip_rate = 0.05;
  int boundary_steps = 0;
  std::uint64_t seed = 1;
};

LabelGrid simulate_rater(const LabelGrid& ref, const RaterNoise& noise);

} // namespace dentseg
