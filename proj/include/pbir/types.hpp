#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace pbir {

// Water attenuation reference used for HU conversion throughout.
inline constexpr double kMuWater = 0.02;              // mm^-1
inline constexpr double kHuPerMu = 1000.0 / kMuWater; // HU per mm^-1
inline constexpr double kMuPerHu = kMuWater / 1000.0; // mm^-1 per HU

enum class PixelUnit : std::uint8_t { HU = 0, Mu = 1 };

/// Regular 2D pixel grid centered on the isocenter.
struct ImageGrid {
    int nx = 0;
    int ny = 0;
    double dx = 1.0; // mm
    double dy = 1.0; // mm

    // Center coordinate of pixel (ix, iy); the grid midpoint is the isocenter.
    double x_center(int ix) const { return (ix - 0.5 * (nx - 1)) * dx; }
    double y_center(int iy) const { return (iy - 0.5 * (ny - 1)) * dy; }

    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }

    bool operator==(const ImageGrid&) const = default;

    void validate() const {
        if (nx < 1 || ny < 1) throw std::invalid_argument("ImageGrid: nx, ny must be >= 1");
        if (dx <= 0.0 || dy <= 0.0) throw std::invalid_argument("ImageGrid: dx, dy must be > 0");
    }
};

/// 2D image with physical spacing. Values are attenuation in mm^-1 or HU,
/// tagged by `unit`. Storage is row-major with y as the outer index.
struct ImageVolume {
    ImageGrid grid;
    PixelUnit unit = PixelUnit::Mu;
    std::vector<double> values;

    ImageVolume() = default;
    ImageVolume(ImageGrid g, PixelUnit u, double fill = 0.0)
        : grid(g), unit(u), values(g.size(), fill) {}

    double& at(int ix, int iy) { return values[static_cast<std::size_t>(iy) * grid.nx + ix]; }
    double at(int ix, int iy) const { return values[static_cast<std::size_t>(iy) * grid.nx + ix]; }

    bool same_shape(const ImageVolume& other) const { return grid == other.grid; }
};

/// Value conversion helpers (grid-preserving).
double hu_to_mu(double hu);
double mu_to_hu(double mu);
ImageVolume hu_to_mu(const ImageVolume& img);
ImageVolume mu_to_hu(const ImageVolume& img);

/// Convert a per-pixel value of `img` to HU regardless of the stored unit.
inline double pixel_as_hu(const ImageVolume& img, std::size_t i) {
    return img.unit == PixelUnit::HU ? img.values[i] : mu_to_hu(img.values[i]);
}

/// L2 norm of the difference a-b over all pixels, measured in HU.
double l2_diff_hu(const ImageVolume& a, const ImageVolume& b);

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

} // namespace pbir
