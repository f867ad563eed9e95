#include "agfv/pipeline.hpp"

#include <algorithm>
#include <cmath>

namespace agfv {

std::vector<std::string> AlignedDataset::identities() const {
    std::vector<std::string> out;
    for (const auto& [id, imgs] : faces) out.push_back(id);
    return out;
}

std::map<std::string, std::vector<std::string>> AlignedDataset::images_by_identity() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& [id, imgs] : faces) {
        for (const auto& [img, face] : imgs) out[id].push_back(img);
    }
    return out;
}

const AlignedFace& AlignedDataset::face(const std::string& id, const std::string& img) const {
    auto it = faces.find(id);
    if (it == faces.end()) throw DataError("unknown identity '" + id + "'");
    auto jt = it->second.find(img);
    if (jt == it->second.end()) throw DataError("unknown image '" + img + "' for '" + id + "'");
    return jt->second;
}

AlignedDataset align_dataset(const SynthDataset& dataset, std::size_t side) {
    AlignedDataset out;
    out.side = side;
    for (std::size_t i = 0; i < dataset.manifest.records.size(); ++i) {
        const ManifestRecord& rec = dataset.manifest.records[i];
        AlignedFace face =
            align(dataset.images[i], EyePair{rec.eye_l, rec.eye_r}, side);
        face.source_id = rec.path;
        out.faces[rec.id][rec.path] = std::move(face);
    }
    return out;
}

AlignedDataset align_dataset(const Manifest& manifest, const std::filesystem::path& root,
                             std::size_t side) {
    AlignedDataset out;
    out.side = side;
    for (const ManifestRecord& rec : manifest.records) {
        RawImage img = load_pgm(root / rec.path);
        AlignedFace face = align(img, EyePair{rec.eye_l, rec.eye_r}, side);
        face.source_id = rec.path;
        out.faces[rec.id][rec.path] = std::move(face);
    }
    return out;
}

Tensor face_tensor(const AlignedFace& face) {
    return Tensor({1, face.side, face.side}, face.pixels.values());
}

EmbeddingVector pixel_embedding(const AlignedFace& face) {
    return EmbeddingVector{Tensor::from_vector(face.pixels.values()), false};
}

double select_threshold_oriented(const std::vector<double>& scores,
                                 const std::vector<int>& labels, Orientation orientation) {
    if (orientation == Orientation::Distance) return select_threshold(scores, labels);
    std::vector<double> negated(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) negated[i] = -scores[i];
    return -select_threshold(negated, labels);
}

Experiment::Experiment(AlignedDataset dataset, ExperimentConfig config)
    : dataset_(std::move(dataset)), config_(std::move(config)) {
    split_ = make_folds(dataset_.identities());
    auto all_images = dataset_.images_by_identity();
    Rng pair_rng(config_.seed);
    for (int fold = 0; fold < 2; ++fold) {
        std::map<std::string, std::vector<std::string>> fold_images;
        for (const auto& [id, imgs] : all_images) {
            if (split_.fold_of.at(id) == fold) fold_images[id] = imgs;
        }
        Rng fold_rng = pair_rng.split(static_cast<std::uint64_t>(fold) + 17);
        fold_pairs_[fold] = gen_pairs(fold_images, fold, fold_rng);
    }
}

PairContext Experiment::make_context(const PairRecord& pair) const {
    PairContext ctx;
    const AlignedFace& fa = dataset_.face(pair.id_a, pair.img_a);
    const AlignedFace& fb = dataset_.face(pair.id_b, pair.img_b);
    ctx.a = pixel_embedding(fa);
    ctx.b = pixel_embedding(fb);
    ctx.pair_id = pair.pair_id();
    ctx.face_a = &fa.pixels;
    ctx.face_b = &fb.pixels;
    return ctx;
}

FoldReport Experiment::eval_fold_scores(int test_fold, const std::vector<double>& train_scores,
                                        const std::vector<int>& train_labels,
                                        const std::vector<double>& test_scores,
                                        const std::vector<int>& test_labels,
                                        Orientation orientation) const {
    double tau = select_threshold_oriented(train_scores, train_labels, orientation);
    FoldReport report;
    report.test_fold = test_fold;
    report.metrics.accuracy = accuracy(test_scores, test_labels, tau, orientation);
    report.roc = roc(test_scores, test_labels, orientation);
    report.metrics.auc = report.roc.auc;
    std::vector<int> decisions(test_scores.size());
    for (std::size_t i = 0; i < test_scores.size(); ++i) {
        bool match = orientation == Orientation::Distance ? test_scores[i] <= tau
                                                          : test_scores[i] >= tau;
        decisions[i] = match ? 1 : 0;
    }
    report.metrics.confusion = confusion(decisions, test_labels);
    return report;
}

namespace {

void finalize(TwoFoldReport& report) {
    report.mean_accuracy =
        0.5 * (report.folds[0].metrics.accuracy + report.folds[1].metrics.accuracy);
    report.mean_auc = 0.5 * (report.folds[0].metrics.auc + report.folds[1].metrics.auc);
}

}  // namespace

TwoFoldReport Experiment::eval_provider(const std::string& provider_id,
                                        const ProviderRegistry& registry) const {
    if (!registry.has(provider_id)) throw UsageError("unknown provider id: " + provider_id);
    Orientation orientation = registry.orientation(provider_id);
    TwoFoldReport report;
    for (int test_fold = 0; test_fold < 2; ++test_fold) {
        int train_fold = 1 - test_fold;
        auto score_fold = [&](const PairSet& pairs, std::vector<double>& scores,
                              std::vector<int>& labels) {
            for (const PairRecord& p : pairs.pairs) {
                ExternalScoreVector v =
                    registry.build_score_vector(make_context(p), {provider_id});
                scores.push_back(v.scores[0]);
                labels.push_back(p.label);
            }
        };
        std::vector<double> train_scores, test_scores;
        std::vector<int> train_labels, test_labels;
        score_fold(fold_pairs_[train_fold], train_scores, train_labels);
        score_fold(fold_pairs_[test_fold], test_scores, test_labels);
        report.folds[test_fold] = eval_fold_scores(test_fold, train_scores, train_labels,
                                                   test_scores, test_labels, orientation);
    }
    finalize(report);
    return report;
}

TwoFoldReport Experiment::eval_stacking(const std::vector<std::string>& feature_ids,
                                        const ProviderRegistry& registry) const {
    TwoFoldReport report;
    for (int test_fold = 0; test_fold < 2; ++test_fold) {
        int train_fold = 1 - test_fold;
        std::vector<PairContext> train_ctxs, test_ctxs;
        std::vector<int> train_labels, test_labels;
        for (const PairRecord& p : fold_pairs_[train_fold].pairs) {
            train_ctxs.push_back(make_context(p));
            train_labels.push_back(p.label);
        }
        for (const PairRecord& p : fold_pairs_[test_fold].pairs) {
            test_ctxs.push_back(make_context(p));
            test_labels.push_back(p.label);
        }
        Rng svm_rng = Rng(config_.seed).split(900 + static_cast<std::uint64_t>(test_fold));
        StackResult stacked = stack(feature_ids, train_ctxs, train_labels, test_ctxs, registry,
                                    config_.svm_lambda, config_.svm_epochs, svm_rng);
        std::vector<double> train_scores;
        for (const PairContext& ctx : train_ctxs) {
            ExternalScoreVector v = registry.build_score_vector(ctx, feature_ids);
            Tensor harmonized({v.size()});
            for (std::size_t i = 0; i < v.size(); ++i) {
                harmonized[i] =
                    v.orientations[i] == Orientation::Distance ? -v.scores[i] : v.scores[i];
            }
            train_scores.push_back(svm_score(stacked.model, harmonized));
        }
        report.folds[test_fold] =
            eval_fold_scores(test_fold, train_scores, train_labels, stacked.test_scores,
                             test_labels, Orientation::Similarity);
    }
    finalize(report);
    return report;
}

std::vector<SiamesePair> Experiment::build_train_pairs(int train_fold,
                                                       const ProviderRegistry& registry,
                                                       bool with_injection) const {
    Rng aug_rng = Rng(config_.seed).split(300 + static_cast<std::uint64_t>(train_fold));
    std::vector<AugmentedPair> augmented =
        augment(fold_pairs_[train_fold], config_.augment_flips, config_.jitter, aug_rng,
                train_fold);
    std::vector<SiamesePair> out;
    out.reserve(augmented.size());
    for (const AugmentedPair& ap : augmented) {
        AlignedFace fa = dataset_.face(ap.base.id_a, ap.base.img_a);
        AlignedFace fb = dataset_.face(ap.base.id_b, ap.base.img_b);
        if (ap.flip_a) fa = hflip(fa);
        if (ap.flip_b) fb = hflip(fb);
        if (ap.jitter_seed_a != 0) {
            Rng jr(ap.jitter_seed_a);
            fa = jitter(fa, jr, config_.jitter.max_shift, config_.jitter.max_scale);
        }
        if (ap.jitter_seed_b != 0) {
            Rng jr(ap.jitter_seed_b);
            fb = jitter(fb, jr, config_.jitter.max_shift, config_.jitter.max_scale);
        }
        SiamesePair sp;
        sp.label = ap.base.label;
        if (with_injection) {
            PairContext ctx;
            ctx.a = pixel_embedding(fa);
            ctx.b = pixel_embedding(fb);
            ctx.pair_id = ap.base.pair_id();
            ctx.face_a = &fa.pixels;
            ctx.face_b = &fb.pixels;
            ExternalScoreVector v = registry.build_score_vector(ctx, config_.inject_providers);
            sp.d = v.scores;
        }
        sp.face_a = face_tensor(fa);
        sp.face_b = face_tensor(fb);
        out.push_back(std::move(sp));
    }
    return out;
}

Experiment::SiameseOutcome Experiment::eval_siamese(const ProviderRegistry& registry) const {
    bool inject = !config_.inject_providers.empty();
    SiameseConfig cfg = config_.siamese;
    if (inject) {
        cfg.inject_width = config_.inject_providers.size();
        cfg.base = NetworkConfig::desk32_embedding(cfg.inject_width);
    }
    if (dataset_.side != cfg.base.input_side) {
        throw UsageError("siamese: dataset side does not match network input side");
    }
    SiameseOutcome outcome;
    TwoFoldReport& report = outcome.report;
    for (int test_fold = 0; test_fold < 2; ++test_fold) {
        int train_fold = 1 - test_fold;
        std::vector<SiamesePair> train_pairs = build_train_pairs(train_fold, registry, inject);
        Rng init_rng = Rng(config_.seed).split(400 + static_cast<std::uint64_t>(test_fold));
        ModelParams init = init_params(cfg.base, init_rng);
        Rng train_rng = Rng(config_.seed).split(500 + static_cast<std::uint64_t>(test_fold));
        FinetuneResult trained = finetune(train_pairs, cfg, std::move(init), train_rng);

        std::vector<double> train_scores, test_scores;
        std::vector<int> train_labels, test_labels;
        for (const SiamesePair& p : train_pairs) {
            train_scores.push_back(siamese_distance(p.face_a, p.face_b,
                                                    inject ? &p.d : nullptr, trained.params, cfg,
                                                    inject ? &trained.stats : nullptr));
            train_labels.push_back(p.label);
        }
        for (const PairRecord& p : fold_pairs_[test_fold].pairs) {
            const AlignedFace& fa = dataset_.face(p.id_a, p.img_a);
            const AlignedFace& fb = dataset_.face(p.id_b, p.img_b);
            Tensor d;
            if (inject) {
                ExternalScoreVector v =
                    registry.build_score_vector(make_context(p), config_.inject_providers);
                d = v.scores;
            }
            test_scores.push_back(siamese_distance(face_tensor(fa), face_tensor(fb),
                                                   inject ? &d : nullptr, trained.params, cfg,
                                                   inject ? &trained.stats : nullptr));
            test_labels.push_back(p.label);
        }
        report.folds[test_fold] = eval_fold_scores(test_fold, train_scores, train_labels,
                                                   test_scores, test_labels,
                                                   Orientation::Distance);
        outcome.trained[test_fold] = std::move(trained);
    }
    finalize(report);
    return outcome;
}

double Experiment::training_accuracy(const std::vector<SiamesePair>& pairs,
                                     const SiameseConfig& cfg, const FinetuneResult& trained) {
    bool inject = cfg.injection_on();
    std::vector<double> scores;
    std::vector<int> labels;
    for (const SiamesePair& p : pairs) {
        scores.push_back(siamese_distance(p.face_a, p.face_b, inject ? &p.d : nullptr,
                                          trained.params, cfg, inject ? &trained.stats : nullptr));
        labels.push_back(p.label);
    }
    return accuracy(scores, labels, trained.threshold, Orientation::Distance);
}

PretrainResult pretrain_classifier(const AlignedDataset& dataset, NetworkConfig net, double lr,
                                   double momentum, double weight_decay, std::size_t epochs,
                                   std::size_t batch_size, Rng& rng) {
    auto ids = dataset.identities();
    if (ids.size() < 2) throw UsageError("pretrain: need at least 2 identities");
    PretrainResult result;
    for (std::size_t i = 0; i < ids.size(); ++i) result.class_of[ids[i]] = i;
    net.fc8_classes = ids.size();
    if (!net.layers.empty() && net.layers.back().kind == LayerKind::FullyConnected) {
        net.layers.back().fan_out = ids.size();
    }
    net.shape_check();
    result.config = net;

    struct Sample {
        Tensor x;
        std::size_t y;
    };
    std::vector<Sample> samples;
    for (const auto& [id, imgs] : dataset.faces) {
        for (const auto& [img, face] : imgs) {
            samples.push_back({face_tensor(face), result.class_of.at(id)});
        }
    }

    result.params = init_params(net, rng);
    SgdState sgd;
    Rng dropout_rng = rng.split(0xd0);
    std::vector<std::size_t> order(samples.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::size_t j = rng.uniform_int(i);
            std::swap(order[i - 1], order[j]);
        }
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t end = std::min(order.size(), start + batch_size);
            Gradients batch_grads = zero_like(result.params);
            for (std::size_t k = start; k < end; ++k) {
                const Sample& s = samples[order[k]];
                ForwardTrace t =
                    forward(net, result.params, s.x, RunMode::Train, &dropout_rng, nullptr);
                SoftmaxXentResult loss = softmax_xent_loss(t.output, s.y);
                if (!std::isfinite(loss.loss)) {
                    throw NumericError("pretrain: non-finite loss, training aborted");
                }
                epoch_loss += loss.loss;
                BackwardResult b = backward(net, result.params, t, loss.grad);
                accumulate(batch_grads, b.grads, 1.0 / static_cast<double>(end - start));
            }
            sgd_step(result.params, batch_grads, sgd, lr, momentum, weight_decay);
        }
        result.log.push_back({epoch, epoch_loss / static_cast<double>(samples.size())});
    }

    std::size_t correct = 0;
    for (const Sample& s : samples) {
        ForwardTrace t = forward(net, result.params, s.x, RunMode::Eval, nullptr, nullptr);
        std::size_t argmax = 0;
        for (std::size_t c = 1; c < t.output.size(); ++c) {
            if (t.output[c] > t.output[argmax]) argmax = c;
        }
        if (argmax == s.y) ++correct;
    }
    result.final_top1 = static_cast<double>(correct) / static_cast<double>(samples.size());
    return result;
}

}  // namespace agfv
