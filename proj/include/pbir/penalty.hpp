#pragma once

#include <vector>

#include "pbir/types.hpp"

namespace pbir {

struct NeighborOffset {
    int dx = 0;
    int dy = 0;
    double weight = 1.0;
};

/// Edge-preserving Huber roughness penalty on neighboring pixel differences.
/// Differences are taken in HU regardless of the image unit, so delta keeps
/// its Hounsfield meaning; gradients are returned with respect to the image's
/// native values (chain rule applied for mm^-1 images).
struct HuberPenalty {
    double delta_hu = 5.0;
    bool eight_neighbor = false;
    double weight_scale = 1.0;

    // Ordered offsets so each unordered neighbor pair is visited once.
    std::vector<NeighborOffset> forward_offsets() const;
    // Curvature bound 2 * sum of full neighbor-set weights (HU convention).
    double curvature_bound_hu() const;

    void validate() const;
};

double huber(double t, double delta);       // t^2/2 below delta, linear above
double huber_deriv(double t, double delta); // t below delta, delta*sign(t) above

double penalty_value(const HuberPenalty& pen, const ImageVolume& img);
ImageVolume penalty_gradient(const HuberPenalty& pen, const ImageVolume& img);

/// Gradient together with the per-pixel separable majorizer curvature taken
/// at the current image, 2 * sum_k w_k * min(1, delta/|diff|). Sharper than
/// the constant bound once differences leave the quadratic zone, which is
/// what keeps descent steps useful on noisy images at strong regularization.
void penalty_gradient_and_curvature(const HuberPenalty& pen, const ImageVolume& img,
                                    ImageVolume& grad, ImageVolume& curv);

/// Constant worst-case curvature bound (quadratic zone everywhere) for
/// beta * h with respect to the image's native unit.
double penalty_curvature(const HuberPenalty& pen, PixelUnit unit);

} // namespace pbir
