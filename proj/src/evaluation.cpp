#include "agfv/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace agfv {

std::vector<std::string> FoldSplit::identities_in(int fold) const {
    std::vector<std::string> out;
    for (const auto& [name, f] : fold_of) {
        if (f == fold) out.push_back(name);
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string PairRecord::pair_id() const {
    std::string ka = id_a + "/" + img_a;
    std::string kb = id_b + "/" + img_b;
    if (kb < ka) std::swap(ka, kb);
    return ka + "|" + kb;
}

std::size_t PairSet::matching_count() const {
    std::size_t n = 0;
    for (const auto& p : pairs) n += p.label == 1 ? 1 : 0;
    return n;
}

std::size_t PairSet::non_matching_count() const { return pairs.size() - matching_count(); }

namespace {
std::string lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}
}  // namespace

FoldSplit make_folds(const std::vector<std::string>& identities) {
    std::vector<std::string> sorted = identities;
    std::sort(sorted.begin(), sorted.end(), [](const std::string& a, const std::string& b) {
        std::string la = lower(a), lb = lower(b);
        return la != lb ? la < lb : a < b;
    });
    for (std::size_t i = 1; i < sorted.size(); ++i) {
        if (sorted[i] == sorted[i - 1]) {
            throw DataError("make_folds: duplicate identity '" + sorted[i] + "'");
        }
    }
    FoldSplit split;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        split.fold_of[sorted[i]] = static_cast<int>(i % 2);
    }
    return split;
}

PairSet gen_pairs(const std::map<std::string, std::vector<std::string>>& images_by_identity,
                  int fold, Rng& rng) {
    PairSet out;
    // matching: all within-identity unordered image pairs
    for (const auto& [id, imgs] : images_by_identity) {
        if (imgs.size() < 2) {
            throw DataError("gen_pairs: identity '" + id + "' has fewer than 2 images");
        }
        for (std::size_t i = 0; i < imgs.size(); ++i) {
            for (std::size_t j = i + 1; j < imgs.size(); ++j) {
                PairRecord r;
                r.id_a = id;
                r.img_a = imgs[i];
                r.id_b = id;
                r.img_b = imgs[j];
                r.label = 1;
                r.fold = fold;
                out.pairs.push_back(std::move(r));
            }
        }
    }
    std::size_t target = out.pairs.size();

    // all (identity, image) items in deterministic order
    std::vector<std::pair<std::string, std::string>> items;
    for (const auto& [id, imgs] : images_by_identity) {
        for (const auto& img : imgs) items.emplace_back(id, img);
    }
    std::set<std::string> seen;
    std::size_t attempts = 0;
    std::size_t max_attempts = 1000 * (target + 1);
    while (seen.size() < target) {
        if (++attempts > max_attempts) {
            throw DataError("gen_pairs: could not sample enough distinct non-matching pairs");
        }
        std::size_t i = rng.uniform_int(items.size());
        std::size_t j = rng.uniform_int(items.size());
        if (items[i].first == items[j].first) continue;
        PairRecord r;
        r.id_a = items[i].first;
        r.img_a = items[i].second;
        r.id_b = items[j].first;
        r.img_b = items[j].second;
        r.label = 0;
        r.fold = fold;
        std::string key = r.pair_id();
        if (!seen.insert(key).second) continue;
        out.pairs.push_back(std::move(r));
    }
    return out;
}

std::vector<AugmentedPair> augment(const PairSet& pairs, bool enable_flips,
                                   const JitterConfig& jitter_cfg, Rng& rng, int train_fold) {
    for (const auto& p : pairs.pairs) {
        if (p.fold != train_fold) {
            throw DataError("augment: pair " + p.pair_id() +
                            " is not in the training fold; test folds are never augmented");
        }
    }
    std::vector<AugmentedPair> out;
    const bool flips[4][2] = {{false, false}, {true, false}, {false, true}, {true, true}};
    std::size_t variants = enable_flips ? 4 : 1;
    for (const auto& p : pairs.pairs) {
        for (std::size_t v = 0; v < variants; ++v) {
            AugmentedPair ap;
            ap.base = p;
            ap.flip_a = flips[v][0];
            ap.flip_b = flips[v][1];
            if (jitter_cfg.enabled) {
                ap.jitter_seed_a = rng.next_u64() | 1ULL;
                ap.jitter_seed_b = rng.next_u64() | 1ULL;
            }
            out.push_back(std::move(ap));
        }
    }
    return out;
}

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels,
                double threshold, Orientation orientation) {
    if (scores.size() != labels.size()) throw ShapeError("accuracy: scores/labels length mismatch");
    if (scores.empty()) throw DataError("accuracy: empty input");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        // tie rule: a score exactly at the threshold decides "matching"
        int decision = orientation == Orientation::Distance ? (scores[i] <= threshold ? 1 : 0)
                                                            : (scores[i] >= threshold ? 1 : 0);
        if (decision == labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(scores.size());
}

RocResult roc(const std::vector<double>& scores, const std::vector<int>& labels,
              Orientation orientation) {
    if (scores.size() != labels.size()) throw ShapeError("roc: scores/labels length mismatch");
    std::size_t pos = 0, neg = 0;
    for (int y : labels) (y == 1 ? pos : neg)++;
    if (pos == 0 || neg == 0) throw DataError("roc: both classes must be present");

    // internally: larger = more likely matching
    std::vector<std::pair<double, int>> ranked(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        double s = orientation == Orientation::Distance ? -scores[i] : scores[i];
        ranked[i] = {s, labels[i]};
    }
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    RocResult out;
    double max_thresh = ranked.front().first + 1.0;
    auto to_external = [&](double t) { return orientation == Orientation::Distance ? -t : t; };
    out.points.push_back({0.0, 0.0, to_external(max_thresh)});
    std::size_t tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < ranked.size()) {
        double t = ranked[i].first;
        while (i < ranked.size() && ranked[i].first == t) {
            (ranked[i].second == 1 ? tp : fp)++;
            ++i;
        }
        out.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                              static_cast<double>(tp) / static_cast<double>(pos),
                              to_external(t)});
    }
    double auc = 0.0;
    for (std::size_t k = 1; k < out.points.size(); ++k) {
        double dx = out.points[k].fpr - out.points[k - 1].fpr;
        auc += dx * 0.5 * (out.points[k].tpr + out.points[k - 1].tpr);
    }
    out.auc = auc;
    return out;
}

ConfusionMatrix confusion(const std::vector<int>& decisions, const std::vector<int>& labels) {
    if (decisions.size() != labels.size()) {
        throw ShapeError("confusion: decisions/labels length mismatch");
    }
    std::array<std::array<std::size_t, 2>, 2> counts{};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        counts[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(decisions[i])]++;
    }
    ConfusionMatrix cm;
    for (int t = 0; t < 2; ++t) {
        std::size_t row = counts[t][0] + counts[t][1];
        if (row == 0) throw DataError("confusion: class " + std::to_string(t) + " is missing");
        cm.rates[t][0] = static_cast<double>(counts[t][0]) / static_cast<double>(row);
        cm.rates[t][1] = static_cast<double>(counts[t][1]) / static_cast<double>(row);
    }
    return cm;
}

}  // namespace agfv
