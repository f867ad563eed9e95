#pragma once

#include <vector>

#include "agfv/similarity.hpp"
#include "agfv/tensor.hpp"

namespace agfv {

struct SvmModel {
    Tensor weights;
    double bias = 0.0;
    double lambda = 0.0;
    // feature standardization stats, frozen from the training set
    Tensor feature_mean;
    Tensor feature_std;
};

/// Minimizes lambda/2 ||w||^2 + mean hinge loss over standardized features
/// with Pegasos step sizes 1/(lambda*t). Labels are +1 / -1.
SvmModel train_svm(const std::vector<Tensor>& features, const std::vector<int>& labels,
                   double lambda, std::size_t epochs, Rng& rng);

/// <w, standardize(d)> + b; sign gives the class, magnitude is a usable
/// ROC score (similarity orientation).
double svm_score(const SvmModel& model, const Tensor& d);

/// Objective value at (w, b); used by the subgradient oracle tests.
double svm_objective(const SvmModel& model, const std::vector<Tensor>& features,
                     const std::vector<int>& labels);

/// Stacked fusion: builds the score vector for every pair restricted to
/// feature_ids (orientations harmonized so larger = matching), trains on the
/// training pairs, scores the test pairs.
struct StackResult {
    SvmModel model;
    std::vector<double> test_scores;  // similarity orientation
};

StackResult stack(const std::vector<std::string>& feature_ids,
                  const std::vector<PairContext>& train_ctxs,
                  const std::vector<int>& train_labels,
                  const std::vector<PairContext>& test_ctxs, const ProviderRegistry& registry,
                  double lambda, std::size_t epochs, Rng& rng);

}  // namespace agfv
