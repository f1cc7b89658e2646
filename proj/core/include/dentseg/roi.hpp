#pragma once

#include "dentseg/grid.hpp"

#include <unordered_set>

namespace dentseg {

/// Expansion of the mandible anchor into the Phase-2 crop, in voxels.
struct RoiExpansion {
  int lateral_minus = 110;
  int lateral_plus = 110;
  int posterior = 100;
  int superior = 90;
};

/// Mandible-anchored Phase-2 crop box. Anchored at the most anterior
/// mandible voxel A (ties resolved toward inferior z then minimal x)
/// and the most inferior mandible extent z_inf:
///   x in [A.x - lateral_minus, A.x + lateral_plus]
///   y in [A.y, A.y + posterior]
///   z in [z_inf, z_inf + superior]
/// clamped to the grid; unclamped widths are [221, 101, 91] at the
/// defaults. Anterior/inferior senses follow the grid orientation tag.
/// Throws when no mandible voxel exists.
VoxelBox compute_phase2_box(const LabelGrid& lbl, Label mandible_id, const RoiExpansion& exp);

struct MergePolicy {
  std::unordered_set<Label> nerve_ids{51, 52, 53};
  bool clear_phase1_nerves = true;   // wipe nerve labels everywhere first
  bool override_all_in_box = true;   // nerve voxels replace any label in the box
};

/// Write Phase-2 nerve predictions back into the Phase-1 result. With
/// the default policy Phase 2 is authoritative for nerves: Phase-1
/// nerve voxels are cleared globally and every nerve voxel of the crop
/// replaces whatever Phase 1 put there. Non-nerve Phase-2 labels are
/// ignored. With override_all_in_box off, nerve voxels only land on
/// background or nerve voxels of the Phase-1 result.
LabelGrid merge_phase2(const LabelGrid& phase1, const LabelGrid& phase2_crop, const VoxelBox& box,
                       const MergePolicy& policy);

} // namespace dentseg
