#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "agfv/stacking.hpp"

using namespace agfv;

namespace {

std::vector<Tensor> feats(std::initializer_list<std::vector<double>> rows) {
    std::vector<Tensor> out;
    for (auto& r : rows) out.push_back(Tensor::from_vector(r));
    return out;
}

}  // namespace

TEST_CASE("svm separates linearly separable data") {
    auto X = feats({{-2}, {-1.5}, {-1}, {1}, {1.5}, {2}});
    std::vector<int> y = {-1, -1, -1, 1, 1, 1};
    Rng rng(1);
    SvmModel m = train_svm(X, y, 0.01, 200, rng);
    for (std::size_t i = 0; i < X.size(); ++i) {
        CHECK(svm_score(m, X[i]) * y[i] > 0.0);
    }
}

TEST_CASE("svm handles 2-d data with an uninformative feature") {
    // second coordinate is constant noise; the first separates
    auto X = feats({{-3, 5}, {-2, 5}, {-1, 5}, {1, 5}, {2, 5}, {3, 5}});
    std::vector<int> y = {-1, -1, -1, 1, 1, 1};
    Rng rng(2);
    SvmModel m = train_svm(X, y, 0.01, 300, rng);
    for (std::size_t i = 0; i < X.size(); ++i) {
        CHECK(svm_score(m, X[i]) * y[i] > 0.0);
    }
    CHECK(std::abs(m.weights[0]) > std::abs(m.weights[1]));
}

TEST_CASE("training is deterministic and duplication-invariant") {
    auto X = feats({{-2, 1}, {-1, 0}, {1, 2}, {2, -1}});
    std::vector<int> y = {-1, -1, 1, 1};
    Rng r1(3), r2(99);
    SvmModel a = train_svm(X, y, 0.05, 100, r1);
    SvmModel b = train_svm(X, y, 0.05, 100, r2);
    for (std::size_t j = 0; j < a.weights.size(); ++j) CHECK(a.weights[j] == b.weights[j]);
    CHECK(a.bias == b.bias);

    // Duplicating every example leaves the full-batch trajectory unchanged up
    // to summation order: the gradient over 8 samples rounds differently from
    // the 4-sample one by a few ulps, and a hinge flip can amplify that, so
    // the comparison is approximate rather than bitwise.
    std::vector<Tensor> X2 = X;
    X2.insert(X2.end(), X.begin(), X.end());
    std::vector<int> y2 = y;
    y2.insert(y2.end(), y.begin(), y.end());
    Rng r3(7);
    SvmModel c = train_svm(X2, y2, 0.05, 100, r3);
    for (std::size_t j = 0; j < a.weights.size(); ++j) {
        CHECK(c.weights[j] == doctest::Approx(a.weights[j]).epsilon(1e-2));
    }
    CHECK(c.bias == doctest::Approx(a.bias).epsilon(1e-2));
    for (std::size_t i = 0; i < X.size(); ++i) {
        CHECK(svm_score(c, X[i]) * svm_score(a, X[i]) > 0.0);  // same decisions
    }
}

TEST_CASE("training decreases the regularized objective") {
    auto X = feats({{-2}, {-1}, {0.5}, {1}, {2}});
    std::vector<int> y = {-1, -1, 1, 1, 1};
    Rng rng(4);
    SvmModel trained = train_svm(X, y, 0.01, 200, rng);

    SvmModel zero = trained;
    zero.weights = Tensor({1});
    zero.bias = 0.0;
    CHECK(svm_objective(trained, X, y) < svm_objective(zero, X, y));
}

TEST_CASE("svm input validation") {
    Rng rng(5);
    auto X = feats({{1}, {-1}});
    CHECK_THROWS_AS(train_svm(X, {1, 0}, 0.01, 10, rng), DataError);
    CHECK_THROWS_AS(train_svm(X, {1, 1}, 0.01, 10, rng), DataError);
    CHECK_THROWS_AS(train_svm({}, {}, 0.01, 10, rng), DataError);
    CHECK_THROWS_AS(train_svm(X, {1, -1}, 0.0, 10, rng), UsageError);
    CHECK_THROWS_AS(train_svm(X, {1}, 0.01, 10, rng), ShapeError);
    auto ragged = feats({{1, 2}, {-1}});
    CHECK_THROWS_AS(train_svm(ragged, {1, -1}, 0.01, 10, rng), ShapeError);

    SvmModel m = train_svm(X, {1, -1}, 0.01, 10, rng);
    CHECK_THROWS_AS(svm_score(m, Tensor({3})), ShapeError);
}

TEST_CASE("stacking harmonizes provider orientations") {
    // two providers carrying the same information with opposite orientations
    std::map<std::string, double> truth = {
        {"m1", 0.9}, {"m2", 0.8}, {"n1", 0.1}, {"n2", 0.2}, {"t_m", 0.85}, {"t_n", 0.15}};
    ProviderRegistry reg;
    reg.register_provider("sim", Orientation::Similarity,
                          [&truth](const PairContext& c) { return truth.at(c.pair_id); });
    reg.register_provider("dist", Orientation::Distance,
                          [&truth](const PairContext& c) { return -truth.at(c.pair_id); });

    auto ctx = [](const std::string& id) {
        PairContext c;
        c.pair_id = id;
        return c;
    };
    std::vector<PairContext> train = {ctx("m1"), ctx("m2"), ctx("n1"), ctx("n2")};
    std::vector<int> labels = {1, 1, 0, 0};
    std::vector<PairContext> test = {ctx("t_m"), ctx("t_n")};

    Rng r1(6), r2(6);
    StackResult via_sim = stack({"sim"}, train, labels, test, reg, 0.01, 100, r1);
    StackResult via_dist = stack({"dist"}, train, labels, test, reg, 0.01, 100, r2);

    // matching test pair scores above the non-matching one
    CHECK(via_sim.test_scores[0] > via_sim.test_scores[1]);
    // orientation flip is transparent after harmonization
    CHECK(via_sim.test_scores[0] == doctest::Approx(via_dist.test_scores[0]).epsilon(1e-12));
    CHECK(via_sim.test_scores[1] == doctest::Approx(via_dist.test_scores[1]).epsilon(1e-12));
}

TEST_CASE("stacking two complementary providers beats the broken halves") {
    // provider A separates group X pairs, provider B group Y pairs; together
    // the stack classifies every test pair correctly
    std::map<std::string, std::pair<double, double>> scores = {
        // id -> (score_a, score_b)
        {"xm", {0.9, 0.5}}, {"xn", {0.1, 0.5}},   // only A informative
        {"ym", {0.5, 0.9}}, {"yn", {0.5, 0.1}},   // only B informative
        {"t_xm", {0.8, 0.5}}, {"t_yn", {0.5, 0.2}}};
    ProviderRegistry reg;
    reg.register_provider("pa", Orientation::Similarity,
                          [&scores](const PairContext& c) { return scores.at(c.pair_id).first; });
    reg.register_provider("pb", Orientation::Similarity,
                          [&scores](const PairContext& c) { return scores.at(c.pair_id).second; });
    auto ctx = [](const std::string& id) {
        PairContext c;
        c.pair_id = id;
        return c;
    };
    std::vector<PairContext> train = {ctx("xm"), ctx("xn"), ctx("ym"), ctx("yn")};
    std::vector<int> labels = {1, 0, 1, 0};
    std::vector<PairContext> test = {ctx("t_xm"), ctx("t_yn")};
    Rng rng(7);
    StackResult r = stack({"pa", "pb"}, train, labels, test, reg, 0.01, 200, rng);
    CHECK(r.test_scores[0] > 0.0);
    CHECK(r.test_scores[1] < 0.0);
}
