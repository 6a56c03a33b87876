#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pbir/simulate.hpp"
#include "pbir/types.hpp"

namespace pbir {

/// Creation metadata stored in every artifact header. No timestamps: runs
/// with identical config and seed must be byte-identical.
struct FileMeta {
    std::string command;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
};

/// Raw float32 image format ("PBIR1"): fixed little-endian header (magic,
/// dtype, unit tag, nx, ny, dx, dy, hash, seed, command string), then the
/// payload row-major with y as the outer index. Sinograms share the header
/// scheme and carry three planes: counts, l, w.
void write_image(const std::string& path, const ImageVolume& img, const FileMeta& meta);
ImageVolume read_image(const std::string& path, FileMeta* meta = nullptr);

void write_sinogram(const std::string& path, const Sinogram& sino, const FileMeta& meta);
Sinogram read_sinogram(const std::string& path, const ScanGeometry& geom,
                       FileMeta* meta = nullptr);

/// Throws if `path` has a header hash different from `expected`.
void check_config_hash(const std::string& path, std::uint64_t expected);

/// Optional 16-bit PGM export for quick viewing (window/level in HU).
void write_pgm16(const std::string& path, const ImageVolume& img, double window_hu,
                 double level_hu);

/// Deterministic number formatting for CSV output ('.' decimal separator).
std::string format_num(double v);

/// Refuses to overwrite an existing file unless force is set.
void ensure_writable(const std::string& path, bool force);

std::uint64_t fnv1a64(const std::string& s);

} // namespace pbir
