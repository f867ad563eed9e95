#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "agfv/similarity.hpp"

using namespace agfv;

namespace {

EmbeddingVector emb(std::vector<double> v) {
    return EmbeddingVector{Tensor::from_vector(std::move(v)), false};
}

}  // namespace

TEST_CASE("euclidean hand-computed cases") {
    // oracle: 3-4-5 triangle
    CHECK(euclidean(emb({0, 0}), emb({3, 4})) == doctest::Approx(5.0));
    CHECK(euclidean(emb({1, 2, 3}), emb({1, 2, 3})) == doctest::Approx(0.0));
    CHECK(euclidean(emb({-1}), emb({2})) == doctest::Approx(3.0));
}

TEST_CASE("l2norm euclidean depends only on direction") {
    double d1 = l2norm_euclidean(emb({1, 0}), emb({0, 1}));
    double d2 = l2norm_euclidean(emb({5, 0}), emb({0, 0.01}));
    CHECK(d1 == doctest::Approx(std::sqrt(2.0)));
    CHECK(d2 == doctest::Approx(d1).epsilon(1e-10));
    // antipodal unit vectors are at the maximum distance 2
    CHECK(l2norm_euclidean(emb({2, 0}), emb({-7, 0})) == doctest::Approx(2.0));
}

TEST_CASE("hellinger hand-computed and bounds") {
    // identical distributions
    CHECK(hellinger(emb({1, 1}), emb({3, 3})) == doctest::Approx(0.0).epsilon(1e-12));
    // disjoint support: maximum distance 1
    CHECK(hellinger(emb({1, 0}), emb({0, 1})) == doctest::Approx(1.0));
    // oracle: p=(1,0), q=(0.5,0.5):
    // H = sqrt((1-sqrt(.5))^2 + (0-sqrt(.5))^2)/sqrt(2)
    double expect = std::sqrt(std::pow(1 - std::sqrt(0.5), 2) + 0.5) / std::sqrt(2.0);
    CHECK(hellinger(emb({1, 0}), emb({1, 1})) == doctest::Approx(expect).epsilon(1e-12));
    CHECK_THROWS_AS(hellinger(emb({1, -0.1}), emb({1, 1})), DataError);
    // zero vector reads as uniform
    CHECK(hellinger(emb({0, 0}), emb({1, 1})) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("cosine hand-computed cases") {
    CHECK(cosine(emb({1, 0}), emb({1, 0})) == doctest::Approx(1.0));
    CHECK(cosine(emb({1, 0}), emb({0, 1})) == doctest::Approx(0.0));
    CHECK(cosine(emb({1, 1}), emb({-2, -2})) == doctest::Approx(-1.0));
    CHECK(cosine(emb({0, 0}), emb({1, 2})) == 0.0);
    // scale invariance
    CHECK(cosine(emb({1, 2, 3}), emb({4, 5, 6})) ==
          doctest::Approx(cosine(emb({10, 20, 30}), emb({0.4, 0.5, 0.6}))).epsilon(1e-12));
}

TEST_CASE("metric symmetry property") {
    Rng rng(17);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> av(6), bv(6);
        for (auto& v : av) v = rng.uniform(0.0, 5.0);
        for (auto& v : bv) v = rng.uniform(0.0, 5.0);
        EmbeddingVector a = emb(av), b = emb(bv);
        CHECK(euclidean(a, b) == doctest::Approx(euclidean(b, a)).epsilon(1e-12));
        CHECK(l2norm_euclidean(a, b) ==
              doctest::Approx(l2norm_euclidean(b, a)).epsilon(1e-12));
        CHECK(hellinger(a, b) == doctest::Approx(hellinger(b, a)).epsilon(1e-12));
        CHECK(cosine(a, b) == doctest::Approx(cosine(b, a)).epsilon(1e-12));
        CHECK(l2norm_euclidean(a, b) <= 2.0 + 1e-12);
        CHECK(hellinger(a, b) <= 1.0 + 1e-12);
    }
}

TEST_CASE("length mismatch raises shape errors") {
    CHECK_THROWS_AS(euclidean(emb({1, 2}), emb({1})), ShapeError);
    CHECK_THROWS_AS(cosine(emb({1, 2, 3}), emb({1, 2})), ShapeError);
}

TEST_CASE("registry ships the four built-ins with correct orientations") {
    ProviderRegistry reg;
    for (const char* id : {"euclid", "l2euclid", "hellinger", "cosine"}) CHECK(reg.has(id));
    CHECK(reg.orientation("euclid") == Orientation::Distance);
    CHECK(reg.orientation("l2euclid") == Orientation::Distance);
    CHECK(reg.orientation("hellinger") == Orientation::Distance);
    CHECK(reg.orientation("cosine") == Orientation::Similarity);
    CHECK_THROWS_AS(reg.orientation("nope"), UsageError);
}

TEST_CASE("build_score_vector assembles in the requested order") {
    ProviderRegistry reg;
    PairContext ctx;
    ctx.a = emb({3, 0});
    ctx.b = emb({0, 4});
    ctx.pair_id = "x|y";
    ExternalScoreVector v = reg.build_score_vector(ctx, {"cosine", "euclid"});
    CHECK(v.size() == 2);
    CHECK(v.provider_ids[0] == "cosine");
    CHECK(v.scores[0] == doctest::Approx(0.0));
    CHECK(v.scores[1] == doctest::Approx(5.0));
    CHECK(v.orientations[0] == Orientation::Similarity);
    CHECK(v.orientations[1] == Orientation::Distance);
}

TEST_CASE("build_score_vector error paths") {
    ProviderRegistry reg;
    PairContext ctx;
    ctx.a = emb({1, 2});
    ctx.b = emb({3, 4});
    CHECK_THROWS_AS(reg.build_score_vector(ctx, {}), UsageError);
    CHECK_THROWS_AS(reg.build_score_vector(ctx, {"missing"}), UsageError);

    reg.register_provider("bad", Orientation::Similarity,
                          [](const PairContext&) -> double { throw std::runtime_error("boom"); });
    CHECK_THROWS_WITH_AS(reg.build_score_vector(ctx, {"bad"}), doctest::Contains("bad"),
                         DataError);

    reg.register_provider("nan", Orientation::Similarity,
                          [](const PairContext&) { return std::nan(""); });
    CHECK_THROWS_AS(reg.build_score_vector(ctx, {"nan"}), NumericError);
}

TEST_CASE("custom provider can be registered and overrides nothing built-in") {
    ProviderRegistry reg;
    reg.register_provider("const7", Orientation::Similarity,
                          [](const PairContext&) { return 7.0; });
    PairContext ctx;
    ctx.a = emb({1});
    ctx.b = emb({1});
    ExternalScoreVector v = reg.build_score_vector(ctx, {"const7", "euclid"});
    CHECK(v.scores[0] == 7.0);
    CHECK(v.scores[1] == doctest::Approx(0.0));
}
