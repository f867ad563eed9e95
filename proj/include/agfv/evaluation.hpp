#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "agfv/similarity.hpp"
#include "agfv/tensor.hpp"

namespace agfv {

struct FoldSplit {
    std::map<std::string, int> fold_of;  // identity -> {0,1}
    static constexpr const char* kMethodTag = "alphabetical-alternating";

    std::vector<std::string> identities_in(int fold) const;
};

/// Unordered pair of images with a verification label.
struct PairRecord {
    std::string id_a, img_a;
    std::string id_b, img_b;
    int label = 0;  // 1 matching, 0 non-matching
    int fold = 0;

    /// Canonical key: lexicographically smaller "id/img" member first.
    std::string pair_id() const;
};

struct PairSet {
    std::vector<PairRecord> pairs;

    std::size_t matching_count() const;
    std::size_t non_matching_count() const;
};

FoldSplit make_folds(const std::vector<std::string>& identities);

/// All within-identity image pairs as matching, plus an equal number of
/// seeded random cross-identity pairs as non-matching.
PairSet gen_pairs(const std::map<std::string, std::vector<std::string>>& images_by_identity,
                  int fold, Rng& rng);

struct JitterConfig {
    bool enabled = false;
    double max_shift = 0.0;
    double max_scale = 1.0;
};

/// Expands each training pair with the four flip combinations. The records
/// reference the same images; flip/jitter flags are carried per side.
struct AugmentedPair {
    PairRecord base;
    bool flip_a = false;
    bool flip_b = false;
    std::uint64_t jitter_seed_a = 0;  // 0 = no jitter
    std::uint64_t jitter_seed_b = 0;
};

std::vector<AugmentedPair> augment(const PairSet& pairs, bool enable_flips,
                                   const JitterConfig& jitter_cfg, Rng& rng,
                                   int train_fold);

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold, Orientation orientation);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    double threshold = 0.0;
};

struct RocResult {
    std::vector<RocPoint> points;
    double auc = 0.0;
};

RocResult roc(const std::vector<double>& scores, const std::vector<int>& labels,
              Orientation orientation);

/// Row-normalized rates; rows = true class {non-matching, matching}.
struct ConfusionMatrix {
    // [true][predicted], index 0 = non-matching, 1 = matching
    std::array<std::array<double, 2>, 2> rates{};
};

ConfusionMatrix confusion(const std::vector<int>& decisions, const std::vector<int>& labels);

}  // namespace agfv
