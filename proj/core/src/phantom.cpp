#include "dentseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>
#include <vector>

namespace dentseg {

std::uint64_t splitmix64_at(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t x = seed + (counter + 1) * 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

double rand_unit(std::uint64_t seed, std::uint64_t counter) {
  return double(splitmix64_at(seed, counter) >> 11) * 0x1.0p-53;
}

namespace {

constexpr double kPi = 3.14159265358979323846;

struct JawGeometry {
  double cx, cy;          // arch center (mandible opens toward +y)
  double r_inner, r_outer;
  int z_lo, z_hi;         // mandible slab, inclusive
  double tooth_radius;
  double pulp_radius;
  double tooth_z;
  double pharynx_y, pharynx_radius;
  int pharynx_z_hi;
  double nerve_radius;
};

JawGeometry jaw_geometry(const PhantomSpec& spec) {
  const Dims d = spec.dims;
  const double m = double(std::min(d.x, d.y));
  JawGeometry g;
  g.cx = (d.x - 1) / 2.0;
  g.cy = d.y * 0.45;
  g.r_outer = 0.36 * m;
  g.r_inner = 0.22 * m;
  g.z_lo = int(std::floor(d.z * 0.15));
  g.z_hi = int(std::floor(d.z * 0.40));
  g.tooth_radius = std::max(2.0, 0.045 * m);
  g.pulp_radius = std::max(1.0, g.tooth_radius / 2.5);
  g.tooth_z = g.z_hi + g.tooth_radius + 1.5;
  g.pharynx_radius = 0.08 * m;
  g.pharynx_y = g.cy + (d.y - 1 - g.cy) * 0.5;
  g.pharynx_z_hi = std::min(d.z - 2, int(std::floor(d.z * 0.85)));
  g.nerve_radius = 1.5;
  return g;
}

void check_fits(const PhantomSpec& spec, const JawGeometry& g) {
  const Dims d = spec.dims;
  if (d.x < 32 || d.y < 32 || d.z < 32)
    throw std::invalid_argument("phantom dims must be at least 32 voxels per axis");
  if (spec.num_teeth < 0 || spec.num_teeth > 16)
    throw std::invalid_argument("phantom supports 0-16 teeth");
  if (g.cy - g.r_outer < 1.0 || g.cx - g.r_outer < 1.0 || g.cx + g.r_outer > d.x - 2)
    throw std::invalid_argument("mandible arch exceeds phantom dims");
  if (g.tooth_z + g.tooth_radius >= d.z - 1)
    throw std::invalid_argument("tooth spheres exceed phantom dims");
  if (g.pharynx_y + g.pharynx_radius >= d.y - 1)
    throw std::invalid_argument("pharynx column exceeds phantom dims");
}

// consolidated ids the phantom emits
constexpr Label kMandible = 1;
constexpr Label kPharynx = 7;
constexpr Label kPulp = 50;
constexpr Label kNerve[3] = {51, 52, 53}; // left incisive, right incisive, lingual

void paint_sphere(LabelGrid& lbl, double cx, double cy, double cz, double r, Label id) {
  const Dims d = lbl.dims();
  const int x0 = std::max(0, int(std::floor(cx - r))), x1 = std::min(d.x - 1, int(std::ceil(cx + r)));
  const int y0 = std::max(0, int(std::floor(cy - r))), y1 = std::min(d.y - 1, int(std::ceil(cy + r)));
  const int z0 = std::max(0, int(std::floor(cz - r))), z1 = std::min(d.z - 1, int(std::ceil(cz + r)));
  const double r2 = r * r;
  for (int z = z0; z <= z1; ++z)
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx, dy = y - cy, dz = z - cz;
        if (dx * dx + dy * dy + dz * dz <= r2)
          lbl.at(x, y, z) = id;
      }
}

// Tube along an arch arc, restricted to voxels already carrying the
// mandible label so nerves stay embedded in bone.
std::size_t paint_nerve_arc(LabelGrid& lbl, const JawGeometry& g, double radius, double a0,
                            double a1, double z, Label id) {
  std::size_t painted = 0;
  const int steps = 64;
  for (int k = 0; k <= steps; ++k) {
    const double a = a0 + (a1 - a0) * double(k) / steps;
    const double px = g.cx + radius * std::sin(a);
    const double py = g.cy - radius * std::cos(a);
    const Dims d = lbl.dims();
    const double r = g.nerve_radius;
    for (int zz = std::max(0, int(z - r)); zz <= std::min(d.z - 1, int(z + r) + 1); ++zz)
      for (int yy = std::max(0, int(py - r)); yy <= std::min(d.y - 1, int(py + r) + 1); ++yy)
        for (int xx = std::max(0, int(px - r)); xx <= std::min(d.x - 1, int(px + r) + 1); ++xx) {
          const double dx = xx - px, dy = yy - py, dz = zz - z;
          if (dx * dx + dy * dy + dz * dz > r * r)
            continue;
          Label& v = lbl.at(xx, yy, zz);
          if (v == kMandible) {
            v = id;
            ++painted;
          } else if (v == id) {
            ++painted;
          }
        }
  }
  return painted;
}

} // namespace

Phantom generate_phantom(const PhantomSpec& spec) {
  const JawGeometry g = jaw_geometry(spec);
  check_fits(spec, g);
  const Dims d = spec.dims;

  LabelGrid lbl(d, spec.spacing);

  // mandible: anterior half annulus slab
  for (int z = g.z_lo; z <= g.z_hi; ++z)
    for (int y = 0; y < d.y; ++y) {
      if (double(y) > g.cy)
        continue;
      for (int x = 0; x < d.x; ++x) {
        const double dx = x - g.cx, dy = y - g.cy;
        const double r = std::sqrt(dx * dx + dy * dy);
        if (r >= g.r_inner && r <= g.r_outer)
          lbl.at(x, y, z) = kMandible;
      }
    }

  // teeth along the arch with pulp cores; seed jitters the angles
  const double arch_mid = (g.r_inner + g.r_outer) / 2.0;
  for (int t = 0; t < spec.num_teeth; ++t) {
    const double span = 140.0 * kPi / 180.0;
    const double base = spec.num_teeth > 1
                            ? -span / 2 + span * double(t) / double(spec.num_teeth - 1)
                            : 0.0;
    const double jitter = (rand_unit(spec.seed, 1000 + std::uint64_t(t)) - 0.5) * (4.0 * kPi / 180.0);
    const double a = base + jitter;
    const double cx = g.cx + arch_mid * std::sin(a);
    const double cy = g.cy - arch_mid * std::cos(a);
    const Label id = Label(t < 8 ? 11 + t : 21 + (t - 8));
    paint_sphere(lbl, cx, cy, g.tooth_z, g.tooth_radius, id);
    paint_sphere(lbl, cx, cy, g.tooth_z, g.pulp_radius, kPulp);
  }

  // pharynx column in the horseshoe opening
  for (int z = g.z_lo; z <= g.pharynx_z_hi; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        const double dx = x - g.cx, dy = y - g.pharynx_y;
        if (dx * dx + dy * dy <= g.pharynx_radius * g.pharynx_radius)
          lbl.at(x, y, z) = kPharynx;
      }

  // nerve tubes inside the mandible
  const double zmid = (g.z_lo + g.z_hi) / 2.0;
  const double deg = kPi / 180.0;
  const auto phase = [&](int i) {
    return (rand_unit(spec.seed, 2000 + std::uint64_t(i)) - 0.5) * (6.0 * deg);
  };
  struct Arc {
    double radius, a0, a1, z;
    Label id;
  };
  const Arc arcs[3] = {
      {arch_mid, 10 * deg + phase(0), 60 * deg + phase(0), zmid, kNerve[0]},
      {arch_mid, -60 * deg + phase(1), -10 * deg + phase(1), zmid, kNerve[1]},
      {g.r_inner + (g.r_outer - g.r_inner) * 0.3, -25 * deg + phase(2), 25 * deg + phase(2),
       zmid + 2.0, kNerve[2]},
  };
  for (const Arc& arc : arcs)
    if (paint_nerve_arc(lbl, g, arc.radius, arc.a0, arc.a1, arc.z, arc.id) == 0)
      throw std::invalid_argument("nerve tube fell outside the mandible; enlarge phantom dims");

  // intensities
  ImageGrid img(d, spec.spacing, -1000.0f);
  const double bx = (d.x - 1) / 2.0, by = (d.y - 1) / 2.0;
  const double ax = 0.48 * d.x, ay = 0.48 * d.y;
  for (int z = 0; z < d.z; ++z)
    for (int y = 0; y < d.y; ++y)
      for (int x = 0; x < d.x; ++x) {
        const double ex = (x - bx) / ax, ey = (y - by) / ay;
        float v = ex * ex + ey * ey <= 1.0 ? 40.0f : -1000.0f; // soft tissue inside the head
        const Label lab = lbl.at(x, y, z);
        if (lab == kMandible || (lab >= 11 && lab <= 48))
          v = 1500.0f; // bone
        else if (lab == kPulp)
          v = 300.0f;
        else if (lab == kPharynx)
          v = -1000.0f; // airway
        img.at(x, y, z) = v;
      }

  return {std::move(img), std::move(lbl)};
}

double mandible_analytic_volume_mm3(const PhantomSpec& spec) {
  const JawGeometry g = jaw_geometry(spec);
  const double slices = double(g.z_hi - g.z_lo + 1);
  const double area = 0.5 * kPi * (g.r_outer * g.r_outer - g.r_inner * g.r_inner);
  return area * slices * spec.spacing.voxel_volume_mm3();
}

LabelGrid simulate_rater(const LabelGrid& ref, const RaterNoise& noise) {
  if (noise.flip_rate < 0.0 || noise.flip_rate >= 0.5)
    throw std::invalid_argument("flip rate must lie in [0, 0.5)");
  if (noise.boundary_steps < 0)
    throw std::invalid_argument("boundary steps must be non-negative");

  LabelGrid out = ref;
  const Dims d = ref.dims();

  // whole-boundary perturbation: each step either dilates every
  // foreground class into background or erodes its boundary shell
  static constexpr int kFace[6][3] = {{-1, 0, 0}, {1, 0, 0},  {0, -1, 0},
                                      {0, 1, 0},  {0, 0, -1}, {0, 0, 1}};
  constexpr std::uint64_t kBoundaryStream = 0x8000000000000000ULL;
  for (int step = 0; step < noise.boundary_steps; ++step) {
    const bool dilate = (splitmix64_at(noise.seed, kBoundaryStream + std::uint64_t(step)) & 1) == 0;
    const LabelGrid src = out;
    for (int z = 0; z < d.z; ++z)
      for (int y = 0; y < d.y; ++y)
        for (int x = 0; x < d.x; ++x) {
          const Label v = src.at(x, y, z);
          if (dilate && v == 0) {
            Label take = 0;
            for (const auto& o : kFace) {
              const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
              if (nx < 0 || ny < 0 || nz < 0 || nx >= d.x || ny >= d.y || nz >= d.z)
                continue;
              const Label nb = src.at(nx, ny, nz);
              if (nb != 0 && (take == 0 || nb < take))
                take = nb;
            }
            if (take != 0)
              out.at(x, y, z) = take;
          } else if (!dilate && v != 0) {
            for (const auto& o : kFace) {
              const int nx = x + o[0], ny = y + o[1], nz = z + o[2];
              if (nx < 0 || ny < 0 || nz < 0 || nx >= d.x || ny >= d.y || nz >= d.z)
                continue;
              if (src.at(nx, ny, nz) != v) {
                out.at(x, y, z) = 0;
                break;
              }
            }
          }
        }
  }

  // independent per-voxel flips to a random other label of the
  // reference palette
  std::set<Label> palette_set(ref.data().begin(), ref.data().end());
  const std::vector<Label> palette(palette_set.begin(), palette_set.end());
  if (palette.size() > 1 && noise.flip_rate > 0.0) {
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (rand_unit(noise.seed, 2 * i) >= noise.flip_rate)
        continue;
      const std::size_t pick =
          std::size_t(splitmix64_at(noise.seed, 2 * i + 1) % (palette.size() - 1));
      std::size_t k = 0;
      for (const Label cand : palette) {
        if (cand == out[i])
          continue;
        if (k++ == pick) {
          out[i] = cand;
          break;
        }
      }
    }
  }
  return out;
}

} // namespace dentseg
