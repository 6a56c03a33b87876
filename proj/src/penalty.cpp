#include "pbir/penalty.hpp"

#include <cmath>
#include <stdexcept>

namespace pbir {

std::vector<NeighborOffset> HuberPenalty::forward_offsets() const {
    std::vector<NeighborOffset> offs = {{1, 0, weight_scale}, {0, 1, weight_scale}};
    if (eight_neighbor) {
        const double wd = weight_scale / std::sqrt(2.0);
        offs.push_back({1, 1, wd});
        offs.push_back({1, -1, wd});
    }
    return offs;
}

double HuberPenalty::curvature_bound_hu() const {
    double sum = 0.0;
    for (const auto& o : forward_offsets()) sum += 2.0 * o.weight; // both pair directions
    return 2.0 * sum;
}

void HuberPenalty::validate() const {
    if (!(delta_hu > 0.0)) throw std::invalid_argument("HuberPenalty: delta must be > 0");
    if (!(weight_scale > 0.0)) throw std::invalid_argument("HuberPenalty: weights must be > 0");
}

double huber(double t, double delta) {
    const double a = std::abs(t);
    return a <= delta ? 0.5 * t * t : delta * a - 0.5 * delta * delta;
}

double huber_deriv(double t, double delta) {
    if (t > delta) return delta;
    if (t < -delta) return -delta;
    return t;
}

double penalty_value(const HuberPenalty& pen, const ImageVolume& img) {
    pen.validate();
    const double scale = img.unit == PixelUnit::HU ? 1.0 : kHuPerMu;
    const auto offs = pen.forward_offsets();
    const int nx = img.grid.nx, ny = img.grid.ny;
    double acc = 0.0;
    for (const auto& o : offs) {
        for (int iy = std::max(0, -o.dy); iy < ny - std::max(0, o.dy); ++iy) {
            for (int ix = std::max(0, -o.dx); ix < nx - std::max(0, o.dx); ++ix) {
                const double d = (img.at(ix, iy) - img.at(ix + o.dx, iy + o.dy)) * scale;
                acc += o.weight * huber(d, pen.delta_hu);
            }
        }
    }
    return acc;
}

ImageVolume penalty_gradient(const HuberPenalty& pen, const ImageVolume& img) {
    pen.validate();
    const double scale = img.unit == PixelUnit::HU ? 1.0 : kHuPerMu;
    const auto offs = pen.forward_offsets();
    const int nx = img.grid.nx, ny = img.grid.ny;
    ImageVolume grad(img.grid, img.unit, 0.0);
    for (const auto& o : offs) {
        for (int iy = std::max(0, -o.dy); iy < ny - std::max(0, o.dy); ++iy) {
            for (int ix = std::max(0, -o.dx); ix < nx - std::max(0, o.dx); ++ix) {
                const double d = (img.at(ix, iy) - img.at(ix + o.dx, iy + o.dy)) * scale;
                const double g = o.weight * huber_deriv(d, pen.delta_hu) * scale;
                grad.at(ix, iy) += g;
                grad.at(ix + o.dx, iy + o.dy) -= g;
            }
        }
    }
    return grad;
}

void penalty_gradient_and_curvature(const HuberPenalty& pen, const ImageVolume& img,
                                    ImageVolume& grad, ImageVolume& curv) {
    pen.validate();
    const double scale = img.unit == PixelUnit::HU ? 1.0 : kHuPerMu;
    const auto offs = pen.forward_offsets();
    const int nx = img.grid.nx, ny = img.grid.ny;
    grad = ImageVolume(img.grid, img.unit, 0.0);
    curv = ImageVolume(img.grid, img.unit, 0.0);
    for (const auto& o : offs) {
        for (int iy = std::max(0, -o.dy); iy < ny - std::max(0, o.dy); ++iy) {
            for (int ix = std::max(0, -o.dx); ix < nx - std::max(0, o.dx); ++ix) {
                const double d = (img.at(ix, iy) - img.at(ix + o.dx, iy + o.dy)) * scale;
                const double g = o.weight * huber_deriv(d, pen.delta_hu) * scale;
                const double c = 2.0 * o.weight * scale * scale *
                                 (std::abs(d) <= pen.delta_hu ? 1.0 : pen.delta_hu / std::abs(d));
                grad.at(ix, iy) += g;
                grad.at(ix + o.dx, iy + o.dy) -= g;
                curv.at(ix, iy) += c;
                curv.at(ix + o.dx, iy + o.dy) += c;
            }
        }
    }
}

double penalty_curvature(const HuberPenalty& pen, PixelUnit unit) {
    const double scale = unit == PixelUnit::HU ? 1.0 : kHuPerMu;
    return pen.curvature_bound_hu() * scale * scale;
}

} // namespace pbir
