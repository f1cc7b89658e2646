#include "floodfill_reference.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

namespace dentseg::testing {

namespace {

bool adjacent(int dx, int dy, int dz, int connectivity) {
  const int m = std::abs(dx) + std::abs(dy) + std::abs(dz);
  if (m == 0 || std::abs(dx) > 1 || std::abs(dy) > 1 || std::abs(dz) > 1)
    return false;
  switch (connectivity) {
    case 6: return m == 1;
    case 18: return m <= 2;
    case 26: return true;
    default: throw std::invalid_argument("connectivity must be 6, 18 or 26");
  }
}

} // namespace

std::vector<std::vector<std::uint32_t>> floodfill_components(const LabelGrid& lbl, Label class_id,
                                                             int connectivity) {
  const Dims d = lbl.dims();
  std::vector<char> visited(lbl.size(), 0);
  std::vector<std::vector<std::uint32_t>> comps;

  for (std::size_t start = 0; start < lbl.size(); ++start) {
    if (visited[start] || lbl[start] != class_id)
      continue;
    std::vector<std::uint32_t> comp;
    std::queue<std::uint32_t> frontier;
    frontier.push(std::uint32_t(start));
    visited[start] = 1;
    while (!frontier.empty()) {
      const std::uint32_t i = frontier.front();
      frontier.pop();
      comp.push_back(i);
      const Index3 p = lbl.unindex(i);
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (!adjacent(dx, dy, dz, connectivity))
              continue;
            const int nx = p.x + dx, ny = p.y + dy, nz = p.z + dz;
            if (nx < 0 || ny < 0 || nz < 0 || nx >= d.x || ny >= d.y || nz >= d.z)
              continue;
            const std::size_t ni = lbl.index(nx, ny, nz);
            if (!visited[ni] && lbl[ni] == class_id) {
              visited[ni] = 1;
              frontier.push(std::uint32_t(ni));
            }
          }
    }
    std::sort(comp.begin(), comp.end());
    comps.push_back(std::move(comp));
  }

  std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size())
      return a.size() > b.size();
    return a.front() < b.front();
  });
  return comps;
}

} // namespace dentseg::testing
