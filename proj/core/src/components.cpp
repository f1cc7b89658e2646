#include "dentseg/components.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace dentseg {

namespace {

struct Offset {
  int dx, dy, dz;
};

// Backward half of each neighborhood: every neighbor that precedes the
// voxel in x-fastest scan order.
std::vector<Offset> backward_offsets(Connectivity c) {
  std::vector<Offset> off;
  for (int dz = -1; dz <= 0; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0)))
          continue;
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0)
          continue;
        if (c == Connectivity::Six && manhattan > 1)
          continue;
        if (c == Connectivity::Eighteen && manhattan > 2)
          continue;
        off.push_back({dx, dy, dz});
      }
  return off;
}

std::vector<Offset> all_offsets(Connectivity c) {
  std::vector<Offset> off;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0)
          continue;
        if (c == Connectivity::Six && manhattan > 1)
          continue;
        if (c == Connectivity::Eighteen && manhattan > 2)
          continue;
        off.push_back({dx, dy, dz});
      }
  return off;
}

class UnionFind {
public:
  std::uint32_t make() {
    parent_.push_back(std::uint32_t(parent_.size()));
    return std::uint32_t(parent_.size() - 1);
  }
  std::uint32_t find(std::uint32_t a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]]; // path halving
      a = parent_[a];
    }
    return a;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a != b)
      parent_[std::max(a, b)] = std::min(a, b);
  }

private:
  std::vector<std::uint32_t> parent_;
};

struct ComponentInfo {
  Label class_id = 0;
  std::uint64_t voxel_count = 0;
  std::uint64_t min_index = 0;
  Index3 min_corner{}, max_corner{};
};

// Two-pass labeling over every class at once. comp_of[i] is the final
// component id of voxel i, kNone for background.
constexpr std::uint32_t kNone = std::numeric_limits<std::uint32_t>::max();

struct LabelingResult {
  std::vector<std::uint32_t> comp_of;
  std::vector<ComponentInfo> comps;
};

LabelingResult label_all(const LabelGrid& lbl, Connectivity connectivity) {
  const Dims d = lbl.dims();
  const auto off = backward_offsets(connectivity);
  const auto& data = lbl.data();

  std::vector<std::uint32_t> provisional(data.size(), kNone);
  UnionFind uf;

  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        const std::size_t i = lbl.index(x, y, z);
        const Label v = data[i];
        if (v == 0)
          continue;
        std::uint32_t assigned = kNone;
        for (const auto& o : off) {
          const int nx = x + o.dx, ny = y + o.dy, nz = z + o.dz;
          if (nx < 0 || ny < 0 || nz < 0 || nx >= d.x || ny >= d.y || nz >= d.z)
            continue;
          const std::size_t ni = lbl.index(nx, ny, nz);
          if (data[ni] != v)
            continue;
          if (assigned == kNone)
            assigned = provisional[ni];
          else
            uf.unite(assigned, provisional[ni]);
        }
        if (assigned == kNone)
          assigned = uf.make();
        provisional[i] = assigned;
      }

  // Resolve roots to dense component ids in root order, then gather
  // per-component stats in a single scan.
  LabelingResult r;
  r.comp_of.assign(data.size(), kNone);
  std::vector<std::uint32_t> root_to_comp;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (provisional[i] == kNone)
      continue;
    const std::uint32_t root = uf.find(provisional[i]);
    if (root >= root_to_comp.size())
      root_to_comp.resize(root + 1, kNone);
    if (root_to_comp[root] == kNone) {
      root_to_comp[root] = std::uint32_t(r.comps.size());
      ComponentInfo info;
      info.class_id = data[i];
      info.min_index = i;
      info.min_corner = info.max_corner = lbl.unindex(i);
      r.comps.push_back(info);
    }
    const std::uint32_t comp = root_to_comp[root];
    r.comp_of[i] = comp;
    ComponentInfo& info = r.comps[comp];
    ++info.voxel_count;
    const Index3 p = lbl.unindex(i);
    info.min_corner.x = std::min(info.min_corner.x, p.x);
    info.min_corner.y = std::min(info.min_corner.y, p.y);
    info.min_corner.z = std::min(info.min_corner.z, p.z);
    info.max_corner.x = std::max(info.max_corner.x, p.x);
    info.max_corner.y = std::max(info.max_corner.y, p.y);
    info.max_corner.z = std::max(info.max_corner.z, p.z);
  }
  return r;
}

// Deterministic rank: descending size, ties by ascending first voxel.
bool component_before(const ComponentInfo& a, const ComponentInfo& b) {
  if (a.voxel_count != b.voxel_count)
    return a.voxel_count > b.voxel_count;
  return a.min_index < b.min_index;
}

} // namespace

Connectivity connectivity_from_int(int n) {
  switch (n) {
    case 6: return Connectivity::Six;
    case 18: return Connectivity::Eighteen;
    case 26: return Connectivity::TwentySix;
    default: throw std::invalid_argument("connectivity must be 6, 18 or 26");
  }
}

std::vector<Component> connected_components(const LabelGrid& lbl, Label class_id,
                                            Connectivity connectivity) {
  const LabelingResult r = label_all(lbl, connectivity);

  std::vector<std::uint32_t> ids;
  for (std::uint32_t c = 0; c < r.comps.size(); ++c)
    if (r.comps[c].class_id == class_id)
      ids.push_back(c);
  std::sort(ids.begin(), ids.end(),
            [&](std::uint32_t a, std::uint32_t b) { return component_before(r.comps[a], r.comps[b]); });

  std::vector<std::uint32_t> rank(r.comps.size(), kNone);
  for (std::uint32_t k = 0; k < ids.size(); ++k)
    rank[ids[k]] = k;

  std::vector<Component> out(ids.size());
  for (std::uint32_t k = 0; k < ids.size(); ++k) {
    const ComponentInfo& info = r.comps[ids[k]];
    out[k].class_id = class_id;
    out[k].voxel_count = info.voxel_count;
    out[k].bbox = {info.min_corner, info.max_corner};
    out[k].voxels.reserve(info.voxel_count);
  }
  for (std::size_t i = 0; i < r.comp_of.size(); ++i) {
    const std::uint32_t c = r.comp_of[i];
    if (c != kNone && rank[c] != kNone)
      out[rank[c]].voxels.push_back(std::uint32_t(i));
  }
  return out;
}

LabelGrid relabel_touching_pharynx(const LabelGrid& lbl, const PostprocessConfig& cfg) {
  const Dims d = lbl.dims();
  const LabelingResult r = label_all(lbl, cfg.connectivity);

  // largest component id per class (count, then min index)
  std::vector<std::uint32_t> largest; // indexed by class id
  for (std::uint32_t c = 0; c < r.comps.size(); ++c) {
    const Label cls = r.comps[c].class_id;
    if (cls >= largest.size())
      largest.resize(cls + 1, kNone);
    if (largest[cls] == kNone || component_before(r.comps[c], r.comps[largest[cls]]))
      largest[cls] = c;
  }

  auto convertible = [&](std::uint32_t c) {
    const Label cls = r.comps[c].class_id;
    if (cls == cfg.pharynx_id)
      return false;
    return cfg.policy == AberrancyPolicy::AnyTouching || largest[cls] != c;
  };

  // "touching" is always 26-adjacency, independent of the component
  // connectivity. Converted components become pharynx themselves, so
  // sweep until no further component touches it; this makes the
  // operation its own fixed point.
  const auto touch_off = all_offsets(Connectivity::TwentySix);
  LabelGrid out = lbl;
  std::vector<char> converted(r.comps.size(), 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (int z = 0; z < d.z; ++z)
      for (int y = 0; y < d.y; ++y)
        for (int x = 0; x < d.x; ++x) {
          const std::size_t i = lbl.index(x, y, z);
          const std::uint32_t c = r.comp_of[i];
          if (c == kNone || converted[c] || !convertible(c))
            continue;
          for (const auto& o : touch_off) {
            const int nx = x + o.dx, ny = y + o.dy, nz = z + o.dz;
            if (nx < 0 || ny < 0 || nz < 0 || nx >= d.x || ny >= d.y || nz >= d.z)
              continue;
            if (out[out.index(nx, ny, nz)] == cfg.pharynx_id) {
              converted[c] = 1;
              changed = true;
              break;
            }
          }
        }
    if (changed)
      for (std::size_t i = 0; i < out.size(); ++i)
        if (r.comp_of[i] != kNone && converted[r.comp_of[i]])
          out[i] = cfg.pharynx_id;
  }
  return out;
}

LabelGrid filter_small_mandible(const LabelGrid& lbl, const PostprocessConfig& cfg) {
  if (cfg.min_mandible_voxels == 0)
    throw std::invalid_argument("mandible voxel threshold must be positive");
  const LabelingResult r = label_all(lbl, cfg.connectivity);
  LabelGrid out = lbl;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint32_t c = r.comp_of[i];
    if (c == kNone)
      continue;
    const ComponentInfo& info = r.comps[c];
    if (info.class_id == cfg.mandible_id && info.voxel_count < cfg.min_mandible_voxels)
      out[i] = 0;
  }
  return out;
}

} // namespace dentseg
