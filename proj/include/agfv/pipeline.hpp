#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "agfv/dataset_io.hpp"
#include "agfv/evaluation.hpp"
#include "agfv/siamese.hpp"
#include "agfv/stacking.hpp"

namespace agfv {

/// All faces of a dataset aligned to the canonical geometry.
struct AlignedDataset {
    std::size_t side = 32;
    // identity -> image path -> aligned face
    std::map<std::string, std::map<std::string, AlignedFace>> faces;

    std::vector<std::string> identities() const;
    std::map<std::string, std::vector<std::string>> images_by_identity() const;
    const AlignedFace& face(const std::string& id, const std::string& img) const;
};

AlignedDataset align_dataset(const SynthDataset& dataset, std::size_t side);
AlignedDataset align_dataset(const Manifest& manifest, const std::filesystem::path& root,
                             std::size_t side);

/// Network input tensor [1, S, S] for an aligned face.
Tensor face_tensor(const AlignedFace& face);
/// Raw-pixel embedding (flattened aligned face), the desk-scale stand-in for
/// fc7 features when no pretrained checkpoint is supplied.
EmbeddingVector pixel_embedding(const AlignedFace& face);

struct MethodMetrics {
    double accuracy = 0.0;
    double auc = 0.0;
    ConfusionMatrix confusion;
};

struct FoldReport {
    int test_fold = 0;
    MethodMetrics metrics;
    RocResult roc;
};

struct TwoFoldReport {
    std::array<FoldReport, 2> folds;
    double mean_accuracy = 0.0;
    double mean_auc = 0.0;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    bool augment_flips = true;
    JitterConfig jitter;
    SiameseConfig siamese = SiameseConfig::desk32();
    std::vector<std::string> inject_providers;  // non-empty enables injection
    double svm_lambda = 0.01;
    std::size_t svm_epochs = 200;
};

/// Threshold chosen by exhaustive sweep to maximize training accuracy,
/// honoring the orientation and the tie-decides-matching rule.
double select_threshold_oriented(const std::vector<double>& scores,
                                 const std::vector<int>& labels, Orientation orientation);

class Experiment {
public:
    Experiment(AlignedDataset dataset, ExperimentConfig config);

    /// Fixed-seed pair sets per fold.
    const PairSet& pairs_of_fold(int fold) const { return fold_pairs_[fold]; }
    const FoldSplit& folds() const { return split_; }

    /// Non-learned baseline or any registered provider, evaluated two-fold
    /// with the training-fold-optimal threshold.
    TwoFoldReport eval_provider(const std::string& provider_id,
                                const ProviderRegistry& registry) const;

    /// Stacked linear-SVM fusion of the given providers.
    TwoFoldReport eval_stacking(const std::vector<std::string>& feature_ids,
                                const ProviderRegistry& registry) const;

    /// Siamese fine-tuning; injection on iff config.inject_providers non-empty.
    struct SiameseOutcome {
        TwoFoldReport report;
        // per test fold: trained state (index = test fold)
        std::array<FinetuneResult, 2> trained;
    };
    SiameseOutcome eval_siamese(const ProviderRegistry& registry) const;

    /// Training-fold verification accuracy of a single trained fold model;
    /// used by the overfit regression check.
    static double training_accuracy(const std::vector<SiamesePair>& pairs,
                                    const SiameseConfig& cfg, const FinetuneResult& trained);

    std::vector<SiamesePair> build_train_pairs(int train_fold, const ProviderRegistry& registry,
                                               bool with_injection) const;
    PairContext make_context(const PairRecord& pair) const;

private:
    AlignedDataset dataset_;
    ExperimentConfig config_;
    FoldSplit split_;
    std::array<PairSet, 2> fold_pairs_;

    FoldReport eval_fold_scores(int test_fold, const std::vector<double>& train_scores,
                                const std::vector<int>& train_labels,
                                const std::vector<double>& test_scores,
                                const std::vector<int>& test_labels,
                                Orientation orientation) const;
};

/// Softmax-classifier pretraining on identities (the recognition task).
struct PretrainResult {
    NetworkConfig config;
    ModelParams params;
    std::vector<EpochLog> log;
    double final_top1 = 0.0;
    std::map<std::string, std::size_t> class_of;  // identity -> class index
};

PretrainResult pretrain_classifier(const AlignedDataset& dataset, NetworkConfig net, double lr,
                                   double momentum, double weight_decay, std::size_t epochs,
                                   std::size_t batch_size, Rng& rng);

}  // namespace agfv
