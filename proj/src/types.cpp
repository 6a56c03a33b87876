#include "pbir/types.hpp"

#include <cmath>

namespace pbir {

double hu_to_mu(double hu) { return kMuWater * (1.0 + hu / 1000.0); }
double mu_to_hu(double mu) { return 1000.0 * (mu - kMuWater) / kMuWater; }

ImageVolume hu_to_mu(const ImageVolume& img) {
    if (img.unit == PixelUnit::Mu) return img;
    ImageVolume out = img;
    out.unit = PixelUnit::Mu;
    for (auto& v : out.values) v = hu_to_mu(v);
    return out;
}

ImageVolume mu_to_hu(const ImageVolume& img) {
    if (img.unit == PixelUnit::HU) return img;
    ImageVolume out = img;
    out.unit = PixelUnit::HU;
    for (auto& v : out.values) v = mu_to_hu(v);
    return out;
}

double l2_diff_hu(const ImageVolume& a, const ImageVolume& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("l2_diff_hu: grid mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        const double d = pixel_as_hu(a, i) - pixel_as_hu(b, i);
        acc += d * d;
    }
    return std::sqrt(acc);
}

} // namespace pbir
