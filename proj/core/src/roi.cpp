#include "dentseg/roi.hpp"

#include <stdexcept>

namespace dentseg {

VoxelBox compute_phase2_box(const LabelGrid& lbl, Label mandible_id, const RoiExpansion& exp) {
  if (exp.lateral_minus < 0 || exp.lateral_plus < 0 || exp.posterior < 0 || exp.superior < 0)
    throw std::invalid_argument("roi expansions must be non-negative");

  const Dims d = lbl.dims();
  const Orientation orient = lbl.orientation();
  // anterior = decreasing y when y grows posteriorly, else increasing;
  // inferior likewise for z
  const bool ant_is_min_y = orient.y_increases_posteriorly;
  const bool inf_is_min_z = orient.z_increases_superiorly;

  bool found = false;
  Index3 anchor{};
  int z_inf = 0;
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        if (lbl.at(x, y, z) != mandible_id)
          continue;
        if (!found) {
          anchor = {x, y, z};
          z_inf = z;
          found = true;
          continue;
        }
        // anterior-most, ties toward inferior z then minimal x
        const int ay = ant_is_min_y ? anchor.y : -anchor.y;
        const int vy = ant_is_min_y ? y : -y;
        const int az = inf_is_min_z ? anchor.z : -anchor.z;
        const int vz = inf_is_min_z ? z : -z;
        if (vy < ay || (vy == ay && (vz < az || (vz == az && x < anchor.x))))
          anchor = {x, y, z};
        if (inf_is_min_z ? z < z_inf : z > z_inf)
          z_inf = z;
      }
  if (!found)
    throw std::runtime_error("mandible absent: no voxel carries label " +
                             std::to_string(mandible_id));

  VoxelBox box;
  box.lo.x = anchor.x - exp.lateral_minus;
  box.hi.x = anchor.x + exp.lateral_plus;
  if (ant_is_min_y) {
    box.lo.y = anchor.y;
    box.hi.y = anchor.y + exp.posterior;
  } else {
    box.lo.y = anchor.y - exp.posterior;
    box.hi.y = anchor.y;
  }
  if (inf_is_min_z) {
    box.lo.z = z_inf;
    box.hi.z = z_inf + exp.superior;
  } else {
    box.lo.z = z_inf - exp.superior;
    box.hi.z = z_inf;
  }
  return box.clamped(d);
}

LabelGrid merge_phase2(const LabelGrid& phase1, const LabelGrid& phase2_crop, const VoxelBox& box,
                       const MergePolicy& policy) {
  if (policy.nerve_ids.empty())
    throw std::invalid_argument("merge policy requires at least one nerve id");
  if (!box.valid())
    throw std::invalid_argument("empty box");
  if (!box.inside(phase1.dims()))
    throw std::invalid_argument("merge box " + box.to_string() + " exceeds phase-1 extent");
  if (!(phase2_crop.dims() == box.widths()))
    throw std::invalid_argument("phase-2 crop dims do not match box widths");

  LabelGrid out = phase1;
  if (policy.clear_phase1_nerves)
    for (auto& v : out.data())
      if (policy.nerve_ids.count(v))
        v = 0;

  for (int z = 0; z < phase2_crop.dims().z; ++z)
    for (int y = 0; y < phase2_crop.dims().y; ++y)
      for (int x = 0; x < phase2_crop.dims().x; ++x) {
        const Label v = phase2_crop.at(x, y, z);
        if (!policy.nerve_ids.count(v))
          continue;
        Label& dst = out.at(box.lo.x + x, box.lo.y + y, box.lo.z + z);
        if (policy.override_all_in_box || dst == 0 || policy.nerve_ids.count(dst))
          dst = v;
      }
  return out;
}

} // namespace dentseg
