#pragma once

#include <utility>
#include <vector>

#include "agfv/layers.hpp"
#include "agfv/similarity.hpp"

namespace agfv {

struct SiameseConfig {
    NetworkConfig base;  // embedding head, ConcatInject slot present iff inject_width > 0
    double margin = 1.0;
    std::size_t inject_width = 0;
    double lr = 0.01;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::size_t epochs = 30;
    std::size_t batch_size = 16;

    bool injection_on() const { return inject_width > 0; }

    static SiameseConfig desk32(std::size_t inject_width = 0);
};

/// Per-component statistics of the external score vector over the training
/// fold, frozen before epoch 1. Std floored at 1e-6.
struct InjectionStats {
    Tensor mean;
    Tensor stddev;

    static InjectionStats from_samples(const std::vector<Tensor>& score_vectors);
};

inline constexpr double kInjectionStdFloor = 1e-6;

struct ContrastiveResult {
    double loss = 0.0;
    double d_loss_d_distance = 0.0;
};

/// L = y*D^2 + (1-y)*max(0, m-D)^2 on the unit sphere.
ContrastiveResult contrastive_loss(double distance, int label, double margin);

/// [fc6_act || (d - mean)/std]; gradient flows only into the fc6 segment.
Tensor inject_concat(const Tensor& fc6_act, const Tensor& d, const InjectionStats& stats);

/// Normalized score segment alone, the constant side input to forward().
Tensor normalize_scores(const Tensor& d, const InjectionStats& stats);

struct SiamesePair {
    Tensor face_a;  // [1, S, S]
    Tensor face_b;
    int label = 0;  // 1 matching, 0 non-matching
    Tensor d;       // raw external scores; empty when injection is off
};

/// Euclidean distance between the two L2-normalized embeddings, both branches
/// sharing params and receiving the same pair-level d.
double siamese_distance(const Tensor& face_a, const Tensor& face_b, const Tensor* d,
                        const ModelParams& params, const SiameseConfig& cfg,
                        const InjectionStats* stats);

struct EpochLog {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
};

struct FinetuneResult {
    ModelParams params;
    InjectionStats stats;
    double threshold = 0.0;  // tau, maximizing training-fold accuracy
    std::vector<EpochLog> log;
};

FinetuneResult finetune(const std::vector<SiamesePair>& train_pairs, const SiameseConfig& cfg,
                        ModelParams initial_params, Rng& rng);

/// Exhaustive sweep over midpoints of the sorted distances; smallest
/// maximizer wins. Tie at the threshold decides "matching".
double select_threshold(const std::vector<double>& distances, const std::vector<int>& labels);

struct VerifyResult {
    int decision = 0;  // 1 matching, 0 non-matching
    double score = 0.0;
};

VerifyResult verify(const Tensor& face_a, const Tensor& face_b, const Tensor* d,
                    const ModelParams& params, const SiameseConfig& cfg,
                    const InjectionStats* stats, double threshold);

/// Registers provider id "siamese" (distance orientation) backed by a trained
/// model; the context must carry face tensors.
void register_siamese_provider(ProviderRegistry& registry, const ModelParams& params,
                               const SiameseConfig& cfg, const InjectionStats& stats);

}  // namespace agfv
