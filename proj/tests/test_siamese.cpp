#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "agfv/evaluation.hpp"
#include "agfv/siamese.hpp"

using namespace agfv;

namespace {

Tensor random_face(Rng& rng) {
    Tensor x({1, 32, 32});
    for (auto& v : x.values()) v = rng.uniform();
    return x;
}

std::vector<SiamesePair> toy_pairs(std::size_t n, Rng& rng, std::size_t inject_width = 0) {
    // matching pairs are mild perturbations of one base face, non-matching
    // pairs are independent faces
    std::vector<SiamesePair> pairs;
    for (std::size_t i = 0; i < n; ++i) {
        SiamesePair p;
        p.label = static_cast<int>(i % 2);
        p.face_a = random_face(rng);
        if (p.label == 1) {
            p.face_b = p.face_a;
            for (auto& v : p.face_b.values()) v += rng.uniform(-0.02, 0.02);
        } else {
            p.face_b = random_face(rng);
        }
        if (inject_width > 0) {
            p.d = Tensor({inject_width});
            for (auto& v : p.d.values()) v = rng.uniform(-1, 1);
        }
        pairs.push_back(std::move(p));
    }
    return pairs;
}

}  // namespace

TEST_CASE("contrastive loss hand-computed values") {
    // oracle: L = y D^2 + (1-y) max(0, m-D)^2
    auto r1 = contrastive_loss(0.5, 1, 1.0);
    CHECK(r1.loss == doctest::Approx(0.25));
    CHECK(r1.d_loss_d_distance == doctest::Approx(1.0));

    auto r0 = contrastive_loss(0.3, 0, 1.0);
    CHECK(r0.loss == doctest::Approx(0.49));
    CHECK(r0.d_loss_d_distance == doctest::Approx(-1.4));

    auto far = contrastive_loss(1.7, 0, 1.0);
    CHECK(far.loss == 0.0);
    CHECK(far.d_loss_d_distance == 0.0);

    auto zero = contrastive_loss(0.0, 1, 1.0);
    CHECK(zero.loss == 0.0);
}

TEST_CASE("contrastive loss input validation") {
    CHECK_THROWS_AS(contrastive_loss(-0.1, 1, 1.0), NumericError);
    CHECK_THROWS_AS(contrastive_loss(0.5, 1, 0.0), UsageError);
    CHECK_THROWS_AS(contrastive_loss(0.5, 0, -1.0), UsageError);
}

TEST_CASE("contrastive loss derivative matches finite differences") {
    Rng rng(3);
    for (int label : {0, 1}) {
        for (int t = 0; t < 20; ++t) {
            double d = rng.uniform(0.05, 1.9);
            if (label == 0 && std::abs(d - 1.0) < 0.02) continue;  // hinge kink
            double h = 1e-6;
            double fp = contrastive_loss(d + h, label, 1.0).loss;
            double fm = contrastive_loss(d - h, label, 1.0).loss;
            double numeric = (fp - fm) / (2 * h);
            CHECK(contrastive_loss(d, label, 1.0).d_loss_d_distance ==
                  doctest::Approx(numeric).epsilon(1e-5));
        }
    }
}

TEST_CASE("injection stats from samples") {
    std::vector<Tensor> samples = {Tensor({2}, {1, 2}), Tensor({2}, {3, 4})};
    InjectionStats s = InjectionStats::from_samples(samples);
    CHECK(s.mean[0] == doctest::Approx(2.0));
    CHECK(s.mean[1] == doctest::Approx(3.0));
    CHECK(s.stddev[0] == doctest::Approx(1.0));
    CHECK(s.stddev[1] == doctest::Approx(1.0));

    // constant component hits the std floor
    std::vector<Tensor> flat = {Tensor({1}, {5.0}), Tensor({1}, {5.0})};
    InjectionStats sf = InjectionStats::from_samples(flat);
    CHECK(sf.stddev[0] == kInjectionStdFloor);

    CHECK_THROWS_AS(InjectionStats::from_samples({}), UsageError);
    std::vector<Tensor> ragged = {Tensor({2}), Tensor({3})};
    CHECK_THROWS_AS(InjectionStats::from_samples(ragged), ShapeError);
}

TEST_CASE("normalize_scores standardizes with frozen stats") {
    InjectionStats s;
    s.mean = Tensor({2}, {10.0, -1.0});
    s.stddev = Tensor({2}, {2.0, 0.5});
    Tensor z = normalize_scores(Tensor({2}, {14.0, -1.0}), s);
    CHECK(z[0] == doctest::Approx(2.0));
    CHECK(z[1] == doctest::Approx(0.0));
    CHECK_THROWS_AS(normalize_scores(Tensor({3}), s), ShapeError);
}

TEST_CASE("inject_concat appends the normalized scores after fc6") {
    InjectionStats s;
    s.mean = Tensor({2}, {0.0, 0.0});
    s.stddev = Tensor({2}, {1.0, 2.0});
    Tensor fc6({3}, {7, 8, 9});
    Tensor joined = inject_concat(fc6, Tensor({2}, {1.0, 4.0}), s);
    CHECK(joined.size() == 5);
    CHECK(joined[0] == 7.0);
    CHECK(joined[2] == 9.0);
    CHECK(joined[3] == doctest::Approx(1.0));
    CHECK(joined[4] == doctest::Approx(2.0));

    Tensor untouched = inject_concat(fc6, Tensor(), s);
    CHECK(untouched.size() == 3);
}

TEST_CASE("siamese distance properties") {
    SiameseConfig cfg = SiameseConfig::desk32();
    Rng rng(11);
    ModelParams params = init_params(cfg.base, rng);
    Tensor a = random_face(rng), b = random_face(rng);
    double dab = siamese_distance(a, b, nullptr, params, cfg, nullptr);
    double dba = siamese_distance(b, a, nullptr, params, cfg, nullptr);
    CHECK(dab == doctest::Approx(dba).epsilon(1e-12));
    CHECK(dab >= 0.0);
    CHECK(dab <= 2.0 + 1e-9);  // unit-sphere embeddings
    CHECK(siamese_distance(a, a, nullptr, params, cfg, nullptr) ==
          doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("injection wiring validation") {
    Rng rng(12);
    SiameseConfig off = SiameseConfig::desk32(0);
    ModelParams off_params = init_params(off.base, rng);
    Tensor a = random_face(rng), b = random_face(rng);
    Tensor d({2}, {0.5, 0.5});
    CHECK_THROWS_AS(siamese_distance(a, b, &d, off_params, off, nullptr), UsageError);

    SiameseConfig on = SiameseConfig::desk32(2);
    ModelParams on_params = init_params(on.base, rng);
    InjectionStats stats;
    stats.mean = Tensor({2}, {0.0, 0.0});
    stats.stddev = Tensor({2}, {1.0, 1.0});
    CHECK_THROWS_AS(siamese_distance(a, b, nullptr, on_params, on, &stats), UsageError);
    CHECK_THROWS_AS(siamese_distance(a, b, &d, on_params, on, nullptr), UsageError);
    double dist = siamese_distance(a, b, &d, on_params, on, &stats);
    CHECK(std::isfinite(dist));

    // the injected scores actually reach the embedding
    Tensor d2({2}, {40.0, -40.0});
    double dist2 = siamese_distance(a, b, &d2, on_params, on, &stats);
    CHECK(dist != doctest::Approx(dist2).epsilon(1e-12));
}

TEST_CASE("select_threshold on separable data") {
    std::vector<double> d = {0.1, 0.2, 0.8, 0.9};
    std::vector<int> y = {1, 1, 0, 0};
    double tau = select_threshold(d, y);
    CHECK(tau > 0.2);
    CHECK(tau < 0.8);
    CHECK(accuracy(d, y, tau, Orientation::Distance) == doctest::Approx(1.0));
}

TEST_CASE("select_threshold picks the smallest maximizer") {
    // all non-matching: predicting nothing as matching is optimal, and the
    // smallest candidate (below every distance) achieves it first
    std::vector<double> d = {1.0, 2.0};
    std::vector<int> y = {0, 0};
    CHECK(select_threshold(d, y) == doctest::Approx(0.0));
}

TEST_CASE("select_threshold hand-worked sweep") {
    // oracle worked by hand: tau=2.5 classifies all three correctly
    std::vector<double> d = {1.0, 2.0, 3.0};
    std::vector<int> y = {1, 1, 0};
    CHECK(select_threshold(d, y) == doctest::Approx(2.5));
    CHECK_THROWS_AS(select_threshold({}, {}), DataError);
}

TEST_CASE("finetune is deterministic and lr=0 freezes parameters") {
    Rng data_rng(21);
    auto pairs = toy_pairs(8, data_rng);
    SiameseConfig cfg = SiameseConfig::desk32();
    cfg.epochs = 2;

    Rng init_rng(22);
    ModelParams initial = init_params(cfg.base, init_rng);

    SUBCASE("same seed, same result") {
        Rng ra(23), rb(23);
        FinetuneResult fa = finetune(pairs, cfg, initial, ra);
        FinetuneResult fb = finetune(pairs, cfg, initial, rb);
        CHECK(fa.threshold == fb.threshold);
        for (std::size_t li = 0; li < fa.params.layers.size(); ++li) {
            const auto& wa = fa.params.layers[li].weight;
            const auto& wb = fb.params.layers[li].weight;
            for (std::size_t i = 0; i < wa.size(); ++i) CHECK(wa[i] == wb[i]);
        }
        CHECK(fa.log.size() == 2);
    }
    SUBCASE("lr=0 leaves the initial parameters untouched") {
        SiameseConfig frozen = cfg;
        frozen.lr = 0.0;
        Rng r(24);
        FinetuneResult f = finetune(pairs, frozen, initial, r);
        for (std::size_t li = 0; li < initial.layers.size(); ++li) {
            const auto& w0 = initial.layers[li].weight;
            const auto& w1 = f.params.layers[li].weight;
            for (std::size_t i = 0; i < w0.size(); ++i) CHECK(w0[i] == w1[i]);
        }
    }
    SUBCASE("training reduces the mean contrastive loss") {
        SiameseConfig longer = cfg;
        longer.epochs = 10;
        Rng r(25);
        FinetuneResult f = finetune(pairs, longer, initial, r);
        CHECK(f.log.back().mean_loss < f.log.front().mean_loss);
    }
    SUBCASE("empty training set is a data error") {
        Rng r(26);
        CHECK_THROWS_AS(finetune({}, cfg, initial, r), DataError);
    }
}

TEST_CASE("finetune with injection freezes stats from the training fold") {
    Rng data_rng(31);
    auto pairs = toy_pairs(6, data_rng, 3);
    SiameseConfig cfg = SiameseConfig::desk32(3);
    cfg.epochs = 1;
    Rng init_rng(32);
    ModelParams initial = init_params(cfg.base, init_rng);
    Rng r(33);
    FinetuneResult f = finetune(pairs, cfg, initial, r);
    std::vector<Tensor> samples;
    for (const auto& p : pairs) samples.push_back(p.d);
    InjectionStats expect = InjectionStats::from_samples(samples);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(f.stats.mean[i] == doctest::Approx(expect.mean[i]).epsilon(1e-12));
        CHECK(f.stats.stddev[i] == doctest::Approx(expect.stddev[i]).epsilon(1e-12));
    }
    CHECK(std::isfinite(f.threshold));
}

TEST_CASE("verify applies the tie-decides-matching rule") {
    SiameseConfig cfg = SiameseConfig::desk32();
    Rng rng(41);
    ModelParams params = init_params(cfg.base, rng);
    Tensor a = random_face(rng);
    // identical faces give distance 0, so any threshold >= 0 says matching
    VerifyResult r = verify(a, a, nullptr, params, cfg, nullptr, 0.0);
    CHECK(r.decision == 1);
    CHECK(r.score == doctest::Approx(0.0).epsilon(1e-12));

    Tensor b = random_face(rng);
    double d = siamese_distance(a, b, nullptr, params, cfg, nullptr);
    CHECK(verify(a, b, nullptr, params, cfg, nullptr, d).decision == 1);  // tie
    CHECK(verify(a, b, nullptr, params, cfg, nullptr, d - 1e-9).decision == 0);
}

TEST_CASE("siamese provider registration") {
    SiameseConfig cfg = SiameseConfig::desk32();
    Rng rng(51);
    ModelParams params = init_params(cfg.base, rng);
    InjectionStats stats;
    ProviderRegistry reg;
    register_siamese_provider(reg, params, cfg, stats);
    CHECK(reg.has("siamese"));
    CHECK(reg.orientation("siamese") == Orientation::Distance);

    Tensor a = random_face(rng), b = random_face(rng);
    PairContext ctx;
    ctx.face_a = &a;
    ctx.face_b = &b;
    ExternalScoreVector v = reg.build_score_vector(ctx, {"siamese"});
    CHECK(v.scores[0] ==
          doctest::Approx(siamese_distance(a, b, nullptr, params, cfg, nullptr)).epsilon(1e-12));

    PairContext no_faces;
    CHECK_THROWS_AS(reg.build_score_vector(no_faces, {"siamese"}), DataError);

    SiameseConfig on = SiameseConfig::desk32(2);
    CHECK_THROWS_AS(register_siamese_provider(reg, params, on, stats), UsageError);
}
