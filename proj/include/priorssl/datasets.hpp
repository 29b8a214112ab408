#ifndef PRIORSSL_DATASETS_HPP
#define PRIORSSL_DATASETS_HPP

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

#include "priorssl/matrix.hpp"
#include "priorssl/rng.hpp"

namespace priorssl {

// Two interleaving half-circles of unit radius. The upper moon is the arc
// (cos t, sin t), t in [0, pi]; the lower moon is the same arc rotated half a
// turn and offset so it bottoms out at (1.0, -0.5) (circle center (1.0, 0.5)).
// Points are spaced evenly along each arc, then perturbed with isotropic
// Gaussian noise of std noise_std. First n/2 rows are moon 0.
inline std::pair<SampleMatrix, LabelVector> gen_two_moons(std::size_t n, double noise_std,
                                                          std::uint64_t rng_seed) {
    if (n < 2 || n % 2 != 0)
        throw std::invalid_argument("gen_two_moons: n must be even and >= 2");
    if (noise_std < 0.0)
        throw std::invalid_argument("gen_two_moons: noise_std must be >= 0");

    const std::size_t half = n / 2;
    SampleMatrix x(n, 2);
    LabelVector y;
    y.num_classes = 2;
    y.labels.assign(n, 0);

    const double pi = std::numbers::pi;
    for (std::size_t i = 0; i < half; ++i) {
        const double t = half == 1 ? 0.0 : pi * static_cast<double>(i) / static_cast<double>(half - 1);
        x.at(i, 0) = std::cos(t);
        x.at(i, 1) = std::sin(t);
        x.at(half + i, 0) = 1.0 - std::cos(t);
        x.at(half + i, 1) = 0.5 - std::sin(t);
        y.labels[half + i] = 1;
    }
    if (noise_std > 0.0) {
        Rng rng(rng_seed);
        for (double& v : x.data) v += noise_std * rng.normal();
    }
    return {std::move(x), y};
}

// Isotropic Gaussian blobs with std `spread`, centers evenly placed on a
// circle of radius 5*spread*classes/pi (adjacent centers roughly 10 spreads
// apart at any class count). Labels are assigned round-robin, so class counts
// stay within one of each other.
inline std::pair<SampleMatrix, LabelVector> gen_blobs(std::size_t n, int classes, double spread,
                                                      std::uint64_t rng_seed) {
    if (classes < 2 || n < static_cast<std::size_t>(classes))
        throw std::invalid_argument("gen_blobs: need n >= classes >= 2");
    if (spread <= 0.0)
        throw std::invalid_argument("gen_blobs: spread must be > 0");

    const double pi = std::numbers::pi;
    const double radius = 5.0 * spread * static_cast<double>(classes) / pi;
    Matrix centers(static_cast<std::size_t>(classes), 2);
    for (int c = 0; c < classes; ++c) {
        const double a = 2.0 * pi * static_cast<double>(c) / static_cast<double>(classes);
        centers.at(c, 0) = radius * std::cos(a);
        centers.at(c, 1) = radius * std::sin(a);
    }

    SampleMatrix x(n, 2);
    LabelVector y;
    y.num_classes = classes;
    y.labels.assign(n, 0);
    Rng rng(rng_seed);
    for (std::size_t i = 0; i < n; ++i) {
        const int c = static_cast<int>(i % static_cast<std::size_t>(classes));
        y.labels[i] = c;
        x.at(i, 0) = centers.at(c, 0) + spread * rng.normal();
        x.at(i, 1) = centers.at(c, 1) + spread * rng.normal();
    }
    return {std::move(x), y};
}

}  // namespace priorssl

#endif
