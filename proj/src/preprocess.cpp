#include "agfv/preprocess.hpp"

#include <cmath>

namespace agfv {

double SimilarityTransform::scale() const { return std::sqrt(a * a + b * b); }

SimilarityTransform SimilarityTransform::inverse() const {
    double det = a * a + b * b;
    SimilarityTransform inv;
    inv.a = a / det;
    inv.b = -b / det;
    // solve for translation: inv(T)(T(0,0)) == (0,0)
    inv.tx = -(inv.a * tx - inv.b * ty);
    inv.ty = -(inv.b * tx + inv.a * ty);
    return inv;
}

SimilarityTransform SimilarityTransform::from_pairs(Point p1, Point p2, Point q1, Point q2) {
    // complex-number form: q = alpha * p + beta with alpha = (q2-q1)/(p2-p1)
    double dpx = p2.x - p1.x, dpy = p2.y - p1.y;
    double dqx = q2.x - q1.x, dqy = q2.y - q1.y;
    double den = dpx * dpx + dpy * dpy;
    if (den == 0.0) throw DataError("similarity transform from coincident source points");
    SimilarityTransform t;
    t.a = (dqx * dpx + dqy * dpy) / den;
    t.b = (dqy * dpx - dqx * dpy) / den;
    Point moved{t.a * p1.x - t.b * p1.y, t.b * p1.x + t.a * p1.y};
    t.tx = q1.x - moved.x;
    t.ty = q1.y - moved.y;
    return t;
}

EyePair canonical_eyes(std::size_t side) {
    double s = static_cast<double>(side);
    return {{0.30 * s, 0.35 * s}, {0.70 * s, 0.35 * s}};
}

Tensor to_grayscale(const RawImage& img) {
    if (img.channels != 1 && img.channels != 3) {
        throw DataError("to_grayscale: expected 1 or 3 channels, got " +
                        std::to_string(img.channels));
    }
    Tensor out({img.height, img.width});
    for (std::size_t y = 0; y < img.height; ++y) {
        for (std::size_t x = 0; x < img.width; ++x) {
            double v;
            if (img.channels == 1) {
                v = img.at(x, y);
            } else {
                v = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
            }
            out.at(y, x) = v / 255.0;
        }
    }
    return out;
}

double bilinear_sample(const Tensor& img, double x, double y) {
    std::size_t h = img.dim(0), w = img.dim(1);
    if (x < 0.0 || y < 0.0 || x > static_cast<double>(w - 1) || y > static_cast<double>(h - 1)) {
        // allow partial coverage at the border, zero fully outside
        double x0 = std::floor(x), y0 = std::floor(y);
        if (x0 < -1.0 || y0 < -1.0 || x0 >= static_cast<double>(w) ||
            y0 >= static_cast<double>(h)) {
            return 0.0;
        }
    }
    double x0f = std::floor(x), y0f = std::floor(y);
    long x0 = static_cast<long>(x0f), y0 = static_cast<long>(y0f);
    double fx = x - x0f, fy = y - y0f;
    auto px = [&](long xi, long yi) -> double {
        if (xi < 0 || yi < 0 || xi >= static_cast<long>(w) || yi >= static_cast<long>(h)) {
            return 0.0;
        }
        return img.at(static_cast<std::size_t>(yi), static_cast<std::size_t>(xi));
    };
    return (1 - fx) * (1 - fy) * px(x0, y0) + fx * (1 - fy) * px(x0 + 1, y0) +
           (1 - fx) * fy * px(x0, y0 + 1) + fx * fy * px(x0 + 1, y0 + 1);
}

AlignedFace align(const Tensor& gray, const EyePair& eyes, std::size_t side) {
    if (side < 8) throw UsageError("align: side must be at least 8");
    double ex = eyes.right.x - eyes.left.x;
    double ey = eyes.right.y - eyes.left.y;
    if (std::sqrt(ex * ex + ey * ey) < 2.0) {
        throw DataError("align: degenerate eye pair (distance < 2 px)");
    }
    if (eyes.left.x >= eyes.right.x) {
        throw DataError("align: left eye must be left of right eye");
    }
    EyePair target = canonical_eyes(side);
    SimilarityTransform t =
        SimilarityTransform::from_pairs(eyes.left, eyes.right, target.left, target.right);
    SimilarityTransform inv = t.inverse();
    AlignedFace face;
    face.side = side;
    face.transform = t;
    face.pixels = Tensor({side, side});
    for (std::size_t y = 0; y < side; ++y) {
        for (std::size_t x = 0; x < side; ++x) {
            Point src = inv.apply({static_cast<double>(x), static_cast<double>(y)});
            face.pixels.at(y, x) = bilinear_sample(gray, src.x, src.y);
        }
    }
    return face;
}

AlignedFace align(const RawImage& img, const EyePair& eyes, std::size_t side) {
    if (eyes.left.x < 0 || eyes.left.y < 0 || eyes.right.x >= static_cast<double>(img.width) ||
        eyes.right.y >= static_cast<double>(img.height) || eyes.left.y >= static_cast<double>(img.height) ||
        eyes.right.y < 0) {
        throw DataError("align: eye coordinates outside image bounds");
    }
    return align(to_grayscale(img), eyes, side);
}

AlignedFace hflip(const AlignedFace& face) {
    AlignedFace out = face;
    std::size_t s = face.side;
    for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
            out.pixels.at(y, x) = face.pixels.at(y, s - 1 - x);
        }
    }
    return out;
}

AlignedFace jitter(const AlignedFace& face, Rng& rng, double max_shift, double max_scale) {
    double side = static_cast<double>(face.side);
    if (max_shift > 0.05 * side) throw UsageError("jitter: max_shift exceeds 5% of side");
    if (max_scale > 1.05) throw UsageError("jitter: max_scale exceeds 1.05");
    double dx = rng.uniform(-max_shift, max_shift);
    double dy = rng.uniform(-max_shift, max_shift);
    double lo = max_scale > 0.0 ? 2.0 - max_scale : 1.0;
    double s = rng.uniform(lo, max_scale);
    if (max_scale <= 1.0) s = 1.0;

    // scale about the image center, then shift
    double cx = (side - 1.0) / 2.0, cy = (side - 1.0) / 2.0;
    AlignedFace out = face;
    for (std::size_t y = 0; y < face.side; ++y) {
        for (std::size_t x = 0; x < face.side; ++x) {
            double sx = cx + (static_cast<double>(x) - cx - dx) / s;
            double sy = cy + (static_cast<double>(y) - cy - dy) / s;
            out.pixels.at(y, x) = bilinear_sample(face.pixels, sx, sy);
        }
    }
    return out;
}

}  // namespace agfv
