#include "agfv/similarity.hpp"

#include <cmath>

namespace agfv {

namespace {

void check_lengths(const EmbeddingVector& a, const EmbeddingVector& b, const char* op) {
    if (a.values.size() != b.values.size()) {
        throw ShapeError(std::string(op) + ": embedding lengths differ, " +
                         std::to_string(a.values.size()) + " vs " +
                         std::to_string(b.values.size()));
    }
}

}  // namespace

double euclidean(const EmbeddingVector& a, const EmbeddingVector& b) {
    check_lengths(a, b, "euclidean");
    double s = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        s += d * d;
    }
    return std::sqrt(s);
}

double l2norm_euclidean(const EmbeddingVector& a, const EmbeddingVector& b) {
    check_lengths(a, b, "l2norm_euclidean");
    EmbeddingVector na{l2_normalize(a.values), true};
    EmbeddingVector nb{l2_normalize(b.values), true};
    return euclidean(na, nb);
}

double hellinger(const EmbeddingVector& a, const EmbeddingVector& b) {
    check_lengths(a, b, "hellinger");
    std::size_t n = a.values.size();
    auto to_prob = [&](const Tensor& v) {
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (v[i] < 0.0) {
                throw DataError("hellinger: negative entry at index " + std::to_string(i));
            }
            sum += v[i];
        }
        Tensor p({v.size()});
        if (sum == 0.0) {
            // zero vector reads as the uniform distribution
            for (std::size_t i = 0; i < v.size(); ++i) p[i] = 1.0 / static_cast<double>(v.size());
        } else {
            for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i] / sum;
        }
        return p;
    };
    Tensor p = to_prob(a.values), q = to_prob(b.values);
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        s += d * d;
    }
    return std::sqrt(s) / std::sqrt(2.0);
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    check_lengths(a, b, "cosine");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        dot += a.values[i] * b.values[i];
        na += a.values[i] * a.values[i];
        nb += b.values[i] * b.values[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

ProviderRegistry::ProviderRegistry() {
    register_provider("euclid", Orientation::Distance,
                      [](const PairContext& c) { return euclidean(c.a, c.b); });
    register_provider("l2euclid", Orientation::Distance,
                      [](const PairContext& c) { return l2norm_euclidean(c.a, c.b); });
    register_provider("hellinger", Orientation::Distance,
                      [](const PairContext& c) { return hellinger(c.a, c.b); });
    register_provider("cosine", Orientation::Similarity,
                      [](const PairContext& c) { return cosine(c.a, c.b); });
}

void ProviderRegistry::register_provider(const std::string& id, Orientation orientation,
                                         PairScorer scorer) {
    providers_[id] = Entry{orientation, std::move(scorer)};
}

bool ProviderRegistry::has(const std::string& id) const { return providers_.count(id) > 0; }

Orientation ProviderRegistry::orientation(const std::string& id) const {
    auto it = providers_.find(id);
    if (it == providers_.end()) throw UsageError("unknown provider id: " + id);
    return it->second.orientation;
}

std::vector<std::string> ProviderRegistry::known_ids() const {
    std::vector<std::string> ids;
    for (const auto& [id, entry] : providers_) ids.push_back(id);
    return ids;
}

ExternalScoreVector ProviderRegistry::build_score_vector(
    const PairContext& ctx, const std::vector<std::string>& ids) const {
    if (ids.empty()) throw UsageError("build_score_vector: provider list is empty");
    ExternalScoreVector out;
    out.scores = Tensor({ids.size()});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        auto it = providers_.find(ids[i]);
        if (it == providers_.end()) throw UsageError("unknown provider id: " + ids[i]);
        double s;
        try {
            s = it->second.scorer(ctx);
        } catch (const std::exception& e) {
            throw DataError("provider '" + ids[i] + "' failed: " + e.what());
        }
        if (!std::isfinite(s)) {
            throw NumericError("provider '" + ids[i] + "' produced non-finite score");
        }
        out.scores[i] = s;
        out.provider_ids.push_back(ids[i]);
        out.orientations.push_back(it->second.orientation);
    }
    return out;
}

}  // namespace agfv
