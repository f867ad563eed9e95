#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "agfv/preprocess.hpp"

using namespace agfv;

namespace {

RawImage gradient_image(std::size_t w, std::size_t h) {
    RawImage img;
    img.width = w;
    img.height = h;
    img.channels = 1;
    img.pixels.resize(w * h);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            img.pixels[y * w + x] = static_cast<std::uint8_t>((x * 7 + y * 13) % 256);
        }
    }
    return img;
}

}  // namespace

TEST_CASE("similarity transform maps its defining pairs exactly") {
    Point p1{10, 20}, p2{40, 25}, q1{3, 7}, q2{18, -2};
    SimilarityTransform t = SimilarityTransform::from_pairs(p1, p2, q1, q2);
    Point r1 = t.apply(p1);
    Point r2 = t.apply(p2);
    CHECK(r1.x == doctest::Approx(q1.x).epsilon(1e-10));
    CHECK(r1.y == doctest::Approx(q1.y).epsilon(1e-10));
    CHECK(r2.x == doctest::Approx(q2.x).epsilon(1e-10));
    CHECK(r2.y == doctest::Approx(q2.y).epsilon(1e-10));
}

TEST_CASE("similarity transform special cases") {
    SUBCASE("identity") {
        SimilarityTransform t =
            SimilarityTransform::from_pairs({0, 0}, {1, 0}, {0, 0}, {1, 0});
        CHECK(t.a == doctest::Approx(1.0));
        CHECK(t.b == doctest::Approx(0.0));
        CHECK(t.tx == doctest::Approx(0.0));
        CHECK(t.ty == doctest::Approx(0.0));
    }
    SUBCASE("pure translation") {
        SimilarityTransform t =
            SimilarityTransform::from_pairs({0, 0}, {1, 0}, {5, -3}, {6, -3});
        CHECK(t.a == doctest::Approx(1.0));
        CHECK(t.b == doctest::Approx(0.0));
        CHECK(t.tx == doctest::Approx(5.0));
        CHECK(t.ty == doctest::Approx(-3.0));
    }
    SUBCASE("90 degree rotation") {
        // (1,0) -> (0,1): alpha = i, so a = 0, b = 1
        SimilarityTransform t =
            SimilarityTransform::from_pairs({0, 0}, {1, 0}, {0, 0}, {0, 1});
        CHECK(t.a == doctest::Approx(0.0));
        CHECK(t.b == doctest::Approx(1.0));
        CHECK(t.scale() == doctest::Approx(1.0));
    }
    SUBCASE("pure scaling by 2") {
        SimilarityTransform t =
            SimilarityTransform::from_pairs({0, 0}, {1, 0}, {0, 0}, {2, 0});
        CHECK(t.scale() == doctest::Approx(2.0));
    }
    SUBCASE("coincident source points throw") {
        CHECK_THROWS_AS(
            SimilarityTransform::from_pairs({1, 1}, {1, 1}, {0, 0}, {1, 0}), DataError);
    }
}

TEST_CASE("inverse composes to identity") {
    SimilarityTransform t = SimilarityTransform::from_pairs({2, 3}, {9, -1}, {0, 5}, {4, 4});
    SimilarityTransform inv = t.inverse();
    for (Point p : {Point{0, 0}, Point{13, -7}, Point{2.5, 8.25}}) {
        Point round_trip = inv.apply(t.apply(p));
        CHECK(round_trip.x == doctest::Approx(p.x).epsilon(1e-10));
        CHECK(round_trip.y == doctest::Approx(p.y).epsilon(1e-10));
    }
}

TEST_CASE("canonical eye targets") {
    EyePair e = canonical_eyes(100);
    CHECK(e.left.x == doctest::Approx(30.0));
    CHECK(e.left.y == doctest::Approx(35.0));
    CHECK(e.right.x == doctest::Approx(70.0));
    CHECK(e.right.y == doctest::Approx(35.0));
}

TEST_CASE("grayscale conversion uses ITU weights") {
    RawImage img;
    img.width = 3;
    img.height = 1;
    img.channels = 3;
    img.pixels = {255, 0, 0, 0, 255, 0, 0, 0, 255};
    Tensor g = to_grayscale(img);
    CHECK(g.at(0, 0) == doctest::Approx(0.299).epsilon(1e-10));
    CHECK(g.at(0, 1) == doctest::Approx(0.587).epsilon(1e-10));
    CHECK(g.at(0, 2) == doctest::Approx(0.114).epsilon(1e-10));

    RawImage mono;
    mono.width = 1;
    mono.height = 1;
    mono.channels = 1;
    mono.pixels = {128};
    CHECK(to_grayscale(mono).at(0, 0) == doctest::Approx(128.0 / 255.0));
}

TEST_CASE("bilinear sampling") {
    Tensor img({2, 2}, {0.0, 1.0, 2.0, 3.0});
    SUBCASE("exact at grid points") {
        CHECK(bilinear_sample(img, 0, 0) == doctest::Approx(0.0));
        CHECK(bilinear_sample(img, 1, 0) == doctest::Approx(1.0));
        CHECK(bilinear_sample(img, 0, 1) == doctest::Approx(2.0));
        CHECK(bilinear_sample(img, 1, 1) == doctest::Approx(3.0));
    }
    SUBCASE("center is the mean of the four corners") {
        CHECK(bilinear_sample(img, 0.5, 0.5) == doctest::Approx(1.5));
    }
    SUBCASE("zero well outside the image") {
        CHECK(bilinear_sample(img, -5.0, 0.0) == 0.0);
        CHECK(bilinear_sample(img, 0.0, 10.0) == 0.0);
    }
}

TEST_CASE("alignment places the eyes at the canonical targets") {
    RawImage img = gradient_image(64, 64);
    EyePair eyes{{20, 30}, {44, 34}};
    AlignedFace face = align(img, eyes, 32);
    EyePair target = canonical_eyes(32);
    Point l = face.transform.apply(eyes.left);
    Point r = face.transform.apply(eyes.right);
    CHECK(l.x == doctest::Approx(target.left.x).epsilon(1e-8));
    CHECK(l.y == doctest::Approx(target.left.y).epsilon(1e-8));
    CHECK(r.x == doctest::Approx(target.right.x).epsilon(1e-8));
    CHECK(r.y == doctest::Approx(target.right.y).epsilon(1e-8));
    CHECK(face.pixels.shape() == std::vector<std::size_t>{32, 32});
    for (double v : face.pixels.values()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("alignment of an already-canonical image is near-identity") {
    // eyes already at the canonical 32px positions: resampling should copy
    RawImage img = gradient_image(32, 32);
    EyePair eyes = canonical_eyes(32);
    AlignedFace face = align(img, eyes, 32);
    Tensor gray = to_grayscale(img);
    for (std::size_t y = 0; y < 32; ++y) {
        for (std::size_t x = 0; x < 32; ++x) {
            CHECK(face.pixels.at(y, x) == doctest::Approx(gray.at(y, x)).epsilon(1e-9));
        }
    }
}

TEST_CASE("alignment rejects bad eye input") {
    RawImage img = gradient_image(32, 32);
    CHECK_THROWS_AS(align(img, EyePair{{10, 10}, {10.5, 10}}, 32), DataError);
    CHECK_THROWS_AS(align(img, EyePair{{20, 10}, {10, 10}}, 32), DataError);
    CHECK_THROWS_AS(align(img, EyePair{{-5, 10}, {20, 10}}, 32), DataError);
}

TEST_CASE("hflip mirrors and is an involution") {
    RawImage img = gradient_image(48, 48);
    AlignedFace face = align(img, EyePair{{12, 20}, {36, 20}}, 32);
    AlignedFace flipped = hflip(face);
    for (std::size_t y = 0; y < 32; ++y) {
        for (std::size_t x = 0; x < 32; ++x) {
            CHECK(flipped.pixels.at(y, x) == face.pixels.at(y, 31 - x));
        }
    }
    AlignedFace twice = hflip(flipped);
    for (std::size_t i = 0; i < face.pixels.size(); ++i) {
        CHECK(twice.pixels[i] == face.pixels[i]);
    }
}

TEST_CASE("jitter guards and determinism") {
    RawImage img = gradient_image(48, 48);
    AlignedFace face = align(img, EyePair{{12, 20}, {36, 20}}, 32);
    SUBCASE("limits enforced") {
        Rng rng(1);
        CHECK_THROWS_AS(jitter(face, rng, 2.0, 1.02), UsageError);  // > 5% of 32
        CHECK_THROWS_AS(jitter(face, rng, 0.5, 1.2), UsageError);
    }
    SUBCASE("same seed gives identical output") {
        Rng r1(5), r2(5);
        AlignedFace a = jitter(face, r1, 0.6, 1.02);
        AlignedFace b = jitter(face, r2, 0.6, 1.02);
        for (std::size_t i = 0; i < a.pixels.size(); ++i) CHECK(a.pixels[i] == b.pixels[i]);
    }
    SUBCASE("zero jitter returns the input") {
        Rng rng(6);
        AlignedFace same = jitter(face, rng, 0.0, 1.0);
        for (std::size_t i = 0; i < face.pixels.size(); ++i) {
            CHECK(same.pixels[i] == doctest::Approx(face.pixels[i]).epsilon(1e-12));
        }
    }
}
