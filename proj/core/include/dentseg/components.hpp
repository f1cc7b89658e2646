#pragma once

#include "dentseg/grid.hpp"

#include <cstdint>
#include <vector>

namespace dentseg {

enum class Connectivity { Six = 6, Eighteen = 18, TwentySix = 26 };

Connectivity connectivity_from_int(int n);

/// One maximal connected set of equal-label voxels.
struct Component {
  Label class_id = 0;
  std::uint64_t voxel_count = 0;
  std::vector<std::uint32_t> voxels; // linear indices, ascending
  VoxelBox bbox;
};

/// Components of one class, ordered by descending size then ascending
/// minimum linear index. Empty class yields an empty list.
std::vector<Component> connected_components(const LabelGrid& lbl, Label class_id,
                                            Connectivity connectivity);

enum class AberrancyPolicy { NonLargestTouching, AnyTouching };

struct PostprocessConfig {
  Connectivity connectivity = Connectivity::TwentySix;
  Label pharynx_id = 7;
  Label mandible_id = 1;
  std::uint64_t min_mandible_voxels = 200000;
  AberrancyPolicy policy = AberrancyPolicy::NonLargestTouching;
};

/// Rewrite aberrant components that touch (26-adjacency) the pharynx to
/// the pharynx id. Under the default policy each class keeps its
/// largest component regardless; AnyTouching drops that exemption.
/// Pharynx and background voxels are never changed.
LabelGrid relabel_touching_pharynx(const LabelGrid& lbl, const PostprocessConfig& cfg);

/// Zero out mandible components smaller than the configured voxel
/// threshold (strictly less; a component of exactly the threshold
/// survives).
LabelGrid filter_small_mandible(const LabelGrid& lbl, const PostprocessConfig& cfg);

} // namespace dentseg
