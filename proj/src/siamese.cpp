#include "agfv/siamese.hpp"

#include <algorithm>
#include <cmath>

#include "agfv/evaluation.hpp"

namespace agfv {

SiameseConfig SiameseConfig::desk32(std::size_t inject_width) {
    SiameseConfig cfg;
    cfg.base = NetworkConfig::desk32_embedding(inject_width);
    cfg.inject_width = inject_width;
    cfg.margin = 1.0;
    cfg.lr = 0.02;
    cfg.momentum = 0.9;
    cfg.weight_decay = 1e-4;
    cfg.epochs = 30;
    cfg.batch_size = 16;
    return cfg;
}

InjectionStats InjectionStats::from_samples(const std::vector<Tensor>& score_vectors) {
    if (score_vectors.empty()) throw UsageError("InjectionStats: no samples");
    std::size_t n = score_vectors.front().size();
    InjectionStats stats;
    stats.mean = Tensor({n});
    stats.stddev = Tensor({n});
    double count = static_cast<double>(score_vectors.size());
    for (const Tensor& v : score_vectors) {
        if (v.size() != n) throw ShapeError("InjectionStats: inconsistent score lengths");
        for (std::size_t i = 0; i < n; ++i) stats.mean[i] += v[i];
    }
    for (std::size_t i = 0; i < n; ++i) stats.mean[i] /= count;
    for (const Tensor& v : score_vectors) {
        for (std::size_t i = 0; i < n; ++i) {
            double d = v[i] - stats.mean[i];
            stats.stddev[i] += d * d;
        }
    }
    for (std::size_t i = 0; i < n; ++i) {
        stats.stddev[i] = std::max(std::sqrt(stats.stddev[i] / count), kInjectionStdFloor);
    }
    return stats;
}

ContrastiveResult contrastive_loss(double distance, int label, double margin) {
    if (distance < 0.0) throw NumericError("contrastive_loss: negative distance");
    if (margin <= 0.0) throw UsageError("contrastive_loss: margin must be positive");
    ContrastiveResult r;
    if (label == 1) {
        r.loss = distance * distance;
        r.d_loss_d_distance = 2.0 * distance;
    } else {
        double slack = std::max(0.0, margin - distance);
        r.loss = slack * slack;
        r.d_loss_d_distance = -2.0 * slack;
    }
    return r;
}

Tensor normalize_scores(const Tensor& d, const InjectionStats& stats) {
    if (d.size() != stats.mean.size()) {
        throw ShapeError("normalize_scores: score length " + std::to_string(d.size()) +
                         " does not match stats length " + std::to_string(stats.mean.size()));
    }
    Tensor out({d.size()});
    for (std::size_t i = 0; i < d.size(); ++i) {
        out[i] = (d[i] - stats.mean[i]) / stats.stddev[i];
        if (!std::isfinite(out[i])) {
            throw NumericError("normalize_scores: non-finite normalized score at index " +
                               std::to_string(i));
        }
    }
    return out;
}

Tensor inject_concat(const Tensor& fc6_act, const Tensor& d, const InjectionStats& stats) {
    if (d.size() == 0) return fc6_act;
    Tensor norm = normalize_scores(d, stats);
    std::vector<double> joined = fc6_act.values();
    joined.insert(joined.end(), norm.values().begin(), norm.values().end());
    return Tensor::from_vector(std::move(joined));
}

namespace {

double embedding_distance(const Tensor& ea, const Tensor& eb) {
    double s = 0.0;
    for (std::size_t i = 0; i < ea.size(); ++i) {
        double d = ea[i] - eb[i];
        s += d * d;
    }
    return std::sqrt(s);
}

InjectedFeatures make_injected(const Tensor* d, const SiameseConfig& cfg,
                               const InjectionStats* stats) {
    if (!cfg.injection_on()) {
        if (d && d->size() > 0) {
            throw UsageError("siamese: external scores supplied but injection is off");
        }
        return {};
    }
    if (!d || d->size() == 0) {
        throw UsageError("siamese: injection is on but no external scores supplied");
    }
    if (!stats) throw UsageError("siamese: injection requires frozen InjectionStats");
    return InjectedFeatures{normalize_scores(*d, *stats)};
}

}  // namespace

double siamese_distance(const Tensor& face_a, const Tensor& face_b, const Tensor* d,
                        const ModelParams& params, const SiameseConfig& cfg,
                        const InjectionStats* stats) {
    InjectedFeatures injected = make_injected(d, cfg, stats);
    const InjectedFeatures* inj = cfg.injection_on() ? &injected : nullptr;
    ForwardTrace ta = forward(cfg.base, params, face_a, RunMode::Eval, nullptr, inj);
    ForwardTrace tb = forward(cfg.base, params, face_b, RunMode::Eval, nullptr, inj);
    return embedding_distance(ta.output, tb.output);
}

double select_threshold(const std::vector<double>& distances, const std::vector<int>& labels) {
    if (distances.empty()) throw DataError("select_threshold: no distances");
    std::vector<double> sorted = distances;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> candidates;
    candidates.push_back(sorted.front() - 1.0);
    for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        if (sorted[i] != sorted[i + 1]) {
            candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
        }
    }
    candidates.push_back(sorted.back());
    double best_tau = candidates.front();
    double best_acc = -1.0;
    for (double tau : candidates) {
        double acc = accuracy(distances, labels, tau, Orientation::Distance);
        if (acc > best_acc) {
            best_acc = acc;
            best_tau = tau;
        }
    }
    return best_tau;
}

FinetuneResult finetune(const std::vector<SiamesePair>& train_pairs, const SiameseConfig& cfg,
                        ModelParams initial_params, Rng& rng) {
    if (train_pairs.empty()) throw DataError("finetune: no training pairs");
    cfg.base.shape_check();

    FinetuneResult result;
    result.params = std::move(initial_params);

    if (cfg.injection_on()) {
        std::vector<Tensor> samples;
        samples.reserve(train_pairs.size());
        for (const auto& p : train_pairs) samples.push_back(p.d);
        result.stats = InjectionStats::from_samples(samples);
    }
    const InjectionStats* stats = cfg.injection_on() ? &result.stats : nullptr;

    // normalize once; d is a constant input throughout training
    std::vector<InjectedFeatures> injected(train_pairs.size());
    for (std::size_t i = 0; i < train_pairs.size(); ++i) {
        injected[i] = make_injected(cfg.injection_on() ? &train_pairs[i].d : nullptr, cfg, stats);
    }

    SgdState sgd;
    std::vector<std::size_t> order(train_pairs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    Rng dropout_rng = rng.split(0x5eed);
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates with the training rng keeps the order reproducible
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            std::size_t end = std::min(order.size(), start + cfg.batch_size);
            Gradients batch_grads = zero_like(result.params);
            for (std::size_t k = start; k < end; ++k) {
                const SiamesePair& pair = train_pairs[order[k]];
                const InjectedFeatures* inj = cfg.injection_on() ? &injected[order[k]] : nullptr;
                ForwardTrace ta =
                    forward(cfg.base, result.params, pair.face_a, RunMode::Train, &dropout_rng, inj);
                ForwardTrace tb =
                    forward(cfg.base, result.params, pair.face_b, RunMode::Train, &dropout_rng, inj);
                double dist = embedding_distance(ta.output, tb.output);
                ContrastiveResult loss = contrastive_loss(dist, pair.label, cfg.margin);
                if (!std::isfinite(loss.loss)) {
                    throw NumericError("finetune: non-finite loss at epoch " +
                                       std::to_string(epoch) + "; last good state discarded");
                }
                epoch_loss += loss.loss;
                if (loss.d_loss_d_distance != 0.0) {
                    double denom = std::max(dist, 1e-12);
                    Tensor grad_a(ta.output.shape());
                    Tensor grad_b(tb.output.shape());
                    for (std::size_t j = 0; j < grad_a.size(); ++j) {
                        double g = loss.d_loss_d_distance * (ta.output[j] - tb.output[j]) / denom;
                        grad_a[j] = g;
                        grad_b[j] = -g;
                    }
                    BackwardResult ba = backward(cfg.base, result.params, ta, grad_a);
                    BackwardResult bb = backward(cfg.base, result.params, tb, grad_b);
                    double scale = 1.0 / static_cast<double>(end - start);
                    accumulate(batch_grads, ba.grads, scale);
                    accumulate(batch_grads, bb.grads, scale);
                }
            }
            if (cfg.lr > 0.0) {
                sgd_step(result.params, batch_grads, sgd, cfg.lr, cfg.momentum,
                         cfg.weight_decay);
            }
        }
        result.log.push_back({epoch, epoch_loss / static_cast<double>(train_pairs.size())});
    }

    // threshold from the training fold, eval-mode distances
    std::vector<double> distances;
    std::vector<int> labels;
    distances.reserve(train_pairs.size());
    for (std::size_t i = 0; i < train_pairs.size(); ++i) {
        distances.push_back(siamese_distance(train_pairs[i].face_a, train_pairs[i].face_b,
                                             cfg.injection_on() ? &train_pairs[i].d : nullptr,
                                             result.params, cfg, stats));
        labels.push_back(train_pairs[i].label);
    }
    result.threshold = select_threshold(distances, labels);
    return result;
}

VerifyResult verify(const Tensor& face_a, const Tensor& face_b, const Tensor* d,
                    const ModelParams& params, const SiameseConfig& cfg,
                    const InjectionStats* stats, double threshold) {
    VerifyResult r;
    r.score = siamese_distance(face_a, face_b, d, params, cfg, stats);
    r.decision = r.score <= threshold ? 1 : 0;  // tie decides matching
    return r;
}

void register_siamese_provider(ProviderRegistry& registry, const ModelParams& params,
                               const SiameseConfig& cfg, const InjectionStats& stats) {
    if (cfg.injection_on()) {
        throw UsageError("register_siamese_provider: only injection-off models can be providers");
    }
    registry.register_provider(
        "siamese", Orientation::Distance,
        [params, cfg, stats](const PairContext& ctx) {
            if (!ctx.face_a || !ctx.face_b) {
                throw UsageError("siamese provider requires face tensors in the pair context");
            }
            return siamese_distance(*ctx.face_a, *ctx.face_b, nullptr, params, cfg, &stats);
        });
}

}  // namespace agfv
