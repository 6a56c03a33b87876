#include "pbir/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace pbir {

namespace {

constexpr char kMagic[5] = {'P', 'B', 'I', 'R', '1'};
constexpr std::uint8_t kDtypeFloat32 = 0;
constexpr std::uint8_t kUnitSino = 2;

template <typename T>
void put(std::ostream& out, T v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    return v;
}

struct Header {
    std::uint8_t dtype = kDtypeFloat32;
    std::uint8_t unit = 0;
    std::uint8_t flags = 0;
    std::int32_t nx = 0, ny = 0;
    double dx = 0.0, dy = 0.0;
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    double i0 = 0.0;
    std::int64_t n_clamped = 0;
    std::string command;
};

void write_header(std::ostream& out, const Header& h) {
    out.write(kMagic, sizeof(kMagic));
    put(out, h.dtype);
    put(out, h.unit);
    put(out, h.flags);
    put(out, h.nx);
    put(out, h.ny);
    put(out, h.dx);
    put(out, h.dy);
    put(out, h.config_hash);
    put(out, h.seed);
    put(out, h.i0);
    put(out, h.n_clamped);
    put(out, static_cast<std::uint32_t>(h.command.size()));
    out.write(h.command.data(), static_cast<std::streamsize>(h.command.size()));
}

Header read_header(std::istream& in, const std::string& path) {
    char magic[5];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a PBIR1 file: " + path);
    Header h;
    h.dtype = get<std::uint8_t>(in);
    h.unit = get<std::uint8_t>(in);
    h.flags = get<std::uint8_t>(in);
    h.nx = get<std::int32_t>(in);
    h.ny = get<std::int32_t>(in);
    h.dx = get<double>(in);
    h.dy = get<double>(in);
    h.config_hash = get<std::uint64_t>(in);
    h.seed = get<std::uint64_t>(in);
    h.i0 = get<double>(in);
    h.n_clamped = get<std::int64_t>(in);
    const auto len = get<std::uint32_t>(in);
    h.command.resize(len);
    in.read(h.command.data(), len);
    if (h.dtype != kDtypeFloat32) throw std::runtime_error("unsupported dtype in " + path);
    if (!in) throw std::runtime_error("truncated header in " + path);
    return h;
}

void write_plane(std::ostream& out, const std::vector<double>& values) {
    std::vector<float> buf(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) buf[i] = static_cast<float>(values[i]);
    out.write(reinterpret_cast<const char*>(buf.data()),
              static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

std::vector<double> read_plane(std::istream& in, std::size_t n, const std::string& path) {
    std::vector<float> buf(n);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n * sizeof(float)));
    if (!in) throw std::runtime_error("truncated payload in " + path);
    return {buf.begin(), buf.end()};
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path);
    return in;
}

} // namespace

void write_image(const std::string& path, const ImageVolume& img, const FileMeta& meta) {
    auto out = open_out(path);
    Header h;
    h.unit = static_cast<std::uint8_t>(img.unit == PixelUnit::HU ? 0 : 1);
    h.nx = img.grid.nx;
    h.ny = img.grid.ny;
    h.dx = img.grid.dx;
    h.dy = img.grid.dy;
    h.config_hash = meta.config_hash;
    h.seed = meta.seed;
    h.command = meta.command;
    write_header(out, h);
    write_plane(out, img.values);
}

ImageVolume read_image(const std::string& path, FileMeta* meta) {
    auto in = open_in(path);
    const Header h = read_header(in, path);
    if (h.unit > 1) throw std::runtime_error("not an image file: " + path);
    ImageVolume img;
    img.grid = {h.nx, h.ny, h.dx, h.dy};
    img.unit = h.unit == 0 ? PixelUnit::HU : PixelUnit::Mu;
    img.values = read_plane(in, img.grid.size(), path);
    if (meta) *meta = {h.command, h.config_hash, h.seed};
    return img;
}

void write_sinogram(const std::string& path, const Sinogram& sino, const FileMeta& meta) {
    auto out = open_out(path);
    Header h;
    h.unit = kUnitSino;
    h.flags = sino.noiseless ? 1 : 0;
    h.nx = sino.geom.n_dets;
    h.ny = sino.geom.n_views;
    h.dx = sino.geom.det_spacing;
    h.dy = 0.0;
    h.config_hash = meta.config_hash;
    h.seed = meta.seed;
    h.i0 = sino.I0;
    h.n_clamped = sino.n_clamped;
    h.command = meta.command;
    write_header(out, h);
    write_plane(out, sino.counts);
    write_plane(out, sino.l);
    write_plane(out, sino.w);
}

Sinogram read_sinogram(const std::string& path, const ScanGeometry& geom, FileMeta* meta) {
    auto in = open_in(path);
    const Header h = read_header(in, path);
    if (h.unit != kUnitSino) throw std::runtime_error("not a sinogram file: " + path);
    if (h.nx != geom.n_dets || h.ny != geom.n_views || h.dx != geom.det_spacing)
        throw std::runtime_error("sinogram layout does not match the configured geometry: " + path);
    Sinogram sino;
    sino.geom = geom;
    sino.noiseless = (h.flags & 1) != 0;
    sino.I0 = h.i0;
    sino.n_clamped = h.n_clamped;
    const std::size_t n = geom.n_rays();
    sino.counts = read_plane(in, n, path);
    sino.l = read_plane(in, n, path);
    sino.w = read_plane(in, n, path);
    if (meta) *meta = {h.command, h.config_hash, h.seed};
    return sino;
}

void check_config_hash(const std::string& path, std::uint64_t expected) {
    auto in = open_in(path);
    const Header h = read_header(in, path);
    if (h.config_hash != expected) {
        char buf[128];
        std::snprintf(buf, sizeof(buf), " (file %016llx vs config %016llx)",
                      static_cast<unsigned long long>(h.config_hash),
                      static_cast<unsigned long long>(expected));
        throw std::runtime_error("config hash mismatch for " + path + buf);
    }
}

void write_pgm16(const std::string& path, const ImageVolume& img, double window_hu,
                 double level_hu) {
    if (!(window_hu > 0.0)) throw std::invalid_argument("write_pgm16: window must be > 0");
    auto out = open_out(path);
    out << "P5\n" << img.grid.nx << " " << img.grid.ny << "\n65535\n";
    const double lo = level_hu - 0.5 * window_hu;
    for (std::size_t i = 0; i < img.values.size(); ++i) {
        const double hu = pixel_as_hu(img, i);
        const double t = std::clamp((hu - lo) / window_hu, 0.0, 1.0);
        const auto v = static_cast<std::uint16_t>(std::lround(t * 65535.0));
        const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
        out.write(bytes, 2); // big-endian per PGM convention
    }
}

std::string format_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void ensure_writable(const std::string& path, bool force) {
    if (!force && std::filesystem::exists(path))
        throw std::runtime_error("output exists (use --force to overwrite): " + path);
    const auto dir = std::filesystem::path(path).parent_path();
    if (!dir.empty()) std::filesystem::create_directories(dir);
}

std::uint64_t fnv1a64(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

} // namespace pbir
