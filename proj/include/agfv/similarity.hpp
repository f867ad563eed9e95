#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "agfv/tensor.hpp"

namespace agfv {

struct EmbeddingVector {
    Tensor values;  // rank-1
    bool normalized = false;
};

enum class Orientation { Distance, Similarity };

/// The per-pair score vector assembled from registered providers.
struct ExternalScoreVector {
    Tensor scores;  // rank-1, length == provider count
    std::vector<std::string> provider_ids;
    std::vector<Orientation> orientations;

    std::size_t size() const { return provider_ids.size(); }
};

double euclidean(const EmbeddingVector& a, const EmbeddingVector& b);
double l2norm_euclidean(const EmbeddingVector& a, const EmbeddingVector& b);
double hellinger(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Everything a scorer may need for one pair. Built-in metrics use only the
/// embeddings; external file-backed providers key on pair_id.
struct PairContext {
    EmbeddingVector a;
    EmbeddingVector b;
    std::string pair_id;
    // aligned face tensors, set when a provider needs raw inputs (e.g. "siamese")
    const Tensor* face_a = nullptr;
    const Tensor* face_b = nullptr;
};

using PairScorer = std::function<double(const PairContext&)>;

class ProviderRegistry {
public:
    /// Constructs with the built-ins: euclid, l2euclid, hellinger, cosine.
    ProviderRegistry();

    void register_provider(const std::string& id, Orientation orientation, PairScorer scorer);
    bool has(const std::string& id) const;
    Orientation orientation(const std::string& id) const;
    std::vector<std::string> known_ids() const;

    ExternalScoreVector build_score_vector(const PairContext& ctx,
                                           const std::vector<std::string>& ids) const;

private:
    struct Entry {
        Orientation orientation;
        PairScorer scorer;
    };
    std::map<std::string, Entry> providers_;
};

}  // namespace agfv
