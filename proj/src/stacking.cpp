#include "agfv/stacking.hpp"

#include <algorithm>
#include <cmath>

namespace agfv {

namespace {

Tensor standardize(const SvmModel& model, const Tensor& d) {
    if (d.size() != model.feature_mean.size()) {
        throw ShapeError("svm: feature length " + std::to_string(d.size()) +
                         " does not match model " + std::to_string(model.feature_mean.size()));
    }
    Tensor out({d.size()});
    for (std::size_t i = 0; i < d.size(); ++i) {
        out[i] = (d[i] - model.feature_mean[i]) / model.feature_std[i];
    }
    return out;
}

}  // namespace

double svm_objective(const SvmModel& model, const std::vector<Tensor>& features,
                     const std::vector<int>& labels) {
    double reg = 0.0;
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
        reg += model.weights[j] * model.weights[j];
    }
    double hinge = 0.0;
    for (std::size_t i = 0; i < features.size(); ++i) {
        Tensor x = standardize(model, features[i]);
        double m = model.bias;
        for (std::size_t j = 0; j < x.size(); ++j) m += model.weights[j] * x[j];
        hinge += std::max(0.0, 1.0 - labels[i] * m);
    }
    return 0.5 * model.lambda * reg + hinge / static_cast<double>(features.size());
}

SvmModel train_svm(const std::vector<Tensor>& features, const std::vector<int>& labels,
                   double lambda, std::size_t epochs, Rng& rng) {
    (void)rng;  // full-batch subgradient descent is already deterministic
    if (features.size() != labels.size()) throw ShapeError("train_svm: features/labels mismatch");
    if (features.empty()) throw DataError("train_svm: empty training set");
    if (lambda <= 0.0) throw UsageError("train_svm: lambda must be positive");
    bool has_pos = false, has_neg = false;
    for (int y : labels) {
        if (y == 1) has_pos = true;
        else if (y == -1) has_neg = true;
        else throw DataError("train_svm: labels must be +1 or -1");
    }
    if (!has_pos || !has_neg) {
        throw DataError("train_svm: need at least one example of each class");
    }
    std::size_t n = features.front().size();
    for (const Tensor& f : features) {
        if (f.size() != n) throw ShapeError("train_svm: inconsistent feature lengths");
    }

    SvmModel model;
    model.lambda = lambda;
    model.feature_mean = Tensor({n});
    model.feature_std = Tensor({n});
    double count = static_cast<double>(features.size());
    for (const Tensor& f : features) {
        for (std::size_t j = 0; j < n; ++j) model.feature_mean[j] += f[j];
    }
    for (std::size_t j = 0; j < n; ++j) model.feature_mean[j] /= count;
    for (const Tensor& f : features) {
        for (std::size_t j = 0; j < n; ++j) {
            double d = f[j] - model.feature_mean[j];
            model.feature_std[j] += d * d;
        }
    }
    for (std::size_t j = 0; j < n; ++j) {
        model.feature_std[j] = std::max(std::sqrt(model.feature_std[j] / count), 1e-12);
    }

    std::vector<Tensor> X;
    X.reserve(features.size());
    for (const Tensor& f : features) X.push_back(standardize(model, f));

    model.weights = Tensor({n});
    std::size_t t = 0;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        ++t;
        double eta = 1.0 / (lambda * static_cast<double>(t));
        Tensor gw({n});
        double gb = 0.0;
        for (std::size_t i = 0; i < X.size(); ++i) {
            double m = model.bias;
            for (std::size_t j = 0; j < n; ++j) m += model.weights[j] * X[i][j];
            if (labels[i] * m < 1.0) {
                for (std::size_t j = 0; j < n; ++j) gw[j] -= labels[i] * X[i][j];
                gb -= labels[i];
            }
        }
        for (std::size_t j = 0; j < n; ++j) {
            model.weights[j] -= eta * (lambda * model.weights[j] + gw[j] / count);
        }
        model.bias -= eta * gb / count;
    }
    if (!model.weights.all_finite() || !std::isfinite(model.bias)) {
        throw NumericError("train_svm: diverged to non-finite weights");
    }
    return model;
}

double svm_score(const SvmModel& model, const Tensor& d) {
    Tensor x = standardize(model, d);
    double s = model.bias;
    for (std::size_t j = 0; j < x.size(); ++j) s += model.weights[j] * x[j];
    return s;
}

StackResult stack(const std::vector<std::string>& feature_ids,
                  const std::vector<PairContext>& train_ctxs,
                  const std::vector<int>& train_labels,
                  const std::vector<PairContext>& test_ctxs, const ProviderRegistry& registry,
                  double lambda, std::size_t epochs, Rng& rng) {
    auto harmonized = [&](const PairContext& ctx) {
        ExternalScoreVector v = registry.build_score_vector(ctx, feature_ids);
        Tensor out({v.size()});
        for (std::size_t i = 0; i < v.size(); ++i) {
            // flip distances so every feature points "larger = matching"
            out[i] = v.orientations[i] == Orientation::Distance ? -v.scores[i] : v.scores[i];
        }
        return out;
    };
    std::vector<Tensor> X;
    std::vector<int> y;
    X.reserve(train_ctxs.size());
    for (std::size_t i = 0; i < train_ctxs.size(); ++i) {
        X.push_back(harmonized(train_ctxs[i]));
        y.push_back(train_labels[i] == 1 ? 1 : -1);
    }
    StackResult result;
    result.model = train_svm(X, y, lambda, epochs, rng);
    result.test_scores.reserve(test_ctxs.size());
    for (const PairContext& ctx : test_ctxs) {
        result.test_scores.push_back(svm_score(result.model, harmonized(ctx)));
    }
    return result;
}

}  // namespace agfv
