#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "agfv/tensor.hpp"

namespace agfv {

struct RawImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::size_t channels = 1;  // 1 or 3
    std::vector<std::uint8_t> pixels;  // row-major, interleaved channels

    std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
        return pixels[(y * width + x) * channels + c];
    }
};

struct Point {
    double x = 0.0;
    double y = 0.0;
};

struct EyePair {
    Point left;
    Point right;
};

/// Rotation + uniform scale + translation, applied as p' = R*s*p + t.
struct SimilarityTransform {
    double a = 1.0;  // s*cos(theta)
    double b = 0.0;  // s*sin(theta)
    double tx = 0.0;
    double ty = 0.0;

    Point apply(Point p) const {
        return {a * p.x - b * p.y + tx, b * p.x + a * p.y + ty};
    }
    double scale() const;
    SimilarityTransform inverse() const;

    /// The unique similarity mapping (p1,p2) onto (q1,q2).
    static SimilarityTransform from_pairs(Point p1, Point p2, Point q1, Point q2);
};

struct AlignedFace {
    std::size_t side = 0;
    Tensor pixels;  // [side, side] in [0,1]
    std::string source_id;
    SimilarityTransform transform;  // source coords -> aligned coords
};

/// Canonical eye targets for a given output side: left (0.30*S, 0.35*S),
/// right (0.70*S, 0.35*S).
EyePair canonical_eyes(std::size_t side);

Tensor to_grayscale(const RawImage& img);

AlignedFace align(const RawImage& img, const EyePair& eyes, std::size_t side);
AlignedFace align(const Tensor& gray, const EyePair& eyes, std::size_t side);

AlignedFace hflip(const AlignedFace& face);

inline constexpr double kDefaultJitterShiftFrac = 0.02;
inline constexpr double kDefaultJitterScale = 1.02;

AlignedFace jitter(const AlignedFace& face, Rng& rng, double max_shift, double max_scale);

/// Bilinear sample with zero outside the source; shared by align and jitter.
double bilinear_sample(const Tensor& img, double x, double y);

}  // namespace agfv
