// Command-line entry point: preprocess, pretrain, finetune, eval, roc-export,
// synth-gen. Every run writes a run.json with the resolved configuration and
// hashes of the artifacts it produced.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "agfv/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace agfv;

namespace {

// --- run.json plumbing ---

std::string fnv1a64_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot hash missing artifact " + path.string());
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

int thread_cap() {
    const char* env = std::getenv("AGFV_THREADS");
    if (!env || !*env) return 1;
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    if (*end != '\0' || v < 1) {
        throw UsageError(std::string("AGFV_THREADS must be a positive integer, got '") + env +
                         "'");
    }
    return static_cast<int>(v);
}

struct RunLog {
    fs::path out_dir;
    std::string command;
    ordered_json config;
    std::uint64_t seed = 0;
    std::vector<fs::path> artifacts;

    void add(const fs::path& p) { artifacts.push_back(p); }

    void write() const {
        ordered_json j;
        j["command"] = command;
        j["seed"] = seed;
        j["threads"] = thread_cap();
        j["config"] = config;
        ordered_json hashes = ordered_json::object();
        for (const fs::path& p : artifacts) {
            hashes[fs::relative(p, out_dir).generic_string()] = fnv1a64_file(p);
        }
        j["artifacts"] = hashes;
        std::ofstream out(out_dir / "run.json", std::ios::binary);
        if (!out) throw DataError("cannot write " + (out_dir / "run.json").string());
        out << j.dump(2) << "\n";
    }
};

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create output directory " + dir.string());
    return dir;
}

// --- provider id resolution ---

/// Numeric feature ids as users type them (e.g. "1+2+3+6"): 1,2,3,6 are the
/// built-in distances, 15 the trained Siamese score, and 4,5,7,8,9 external
/// score files supplied via --score-file N=path.
const std::map<std::string, std::string> kNumericProviders = {
    {"1", "euclid"}, {"2", "l2euclid"}, {"3", "hellinger"}, {"6", "cosine"}, {"15", "siamese"}};
const std::vector<std::string> kExternalSlots = {"4", "5", "7", "8", "9"};

std::string known_provider_help() {
    return "known ids: 1=euclid, 2=l2euclid, 3=hellinger, 6=cosine, 15=siamese, "
           "4/5/7/8/9=external score files (--score-file N=path), or provider names directly";
}

std::map<std::string, fs::path> parse_score_files(const std::vector<std::string>& specs) {
    std::map<std::string, fs::path> out;
    for (const std::string& s : specs) {
        std::size_t eq = s.find('=');
        if (eq == std::string::npos) {
            throw UsageError("--score-file expects N=path, got '" + s + "'");
        }
        std::string slot = s.substr(0, eq);
        if (std::find(kExternalSlots.begin(), kExternalSlots.end(), slot) ==
            kExternalSlots.end()) {
            throw UsageError("--score-file slot must be one of 4,5,7,8,9, got '" + slot + "'");
        }
        out[slot] = fs::path(s.substr(eq + 1));
    }
    return out;
}

/// Splits "1+2+3+6" (or "euclid+cosine") into registry ids, registering
/// external score files on first use.
std::vector<std::string> resolve_providers(const std::string& spec, ProviderRegistry& registry,
                                           const std::map<std::string, fs::path>& score_files,
                                           const std::vector<PairRecord>& all_pairs) {
    std::vector<std::string> ids;
    std::string token;
    std::istringstream in(spec);
    while (std::getline(in, token, '+')) {
        if (token.empty()) continue;
        auto num = kNumericProviders.find(token);
        if (num != kNumericProviders.end()) {
            ids.push_back(num->second);
            continue;
        }
        auto ext = score_files.find(token);
        if (ext != score_files.end()) {
            ids.push_back(register_external_scores(registry, ext->second, all_pairs));
            continue;
        }
        if (registry.has(token)) {
            ids.push_back(token);
            continue;
        }
        throw UsageError("unknown provider id '" + token + "'; " + known_provider_help());
    }
    return ids;
}

// --- metrics/roc emission ---

ordered_json confusion_json(const ConfusionMatrix& cm) {
    return ordered_json::array({ordered_json::array({cm.rates[0][0], cm.rates[0][1]}),
                                ordered_json::array({cm.rates[1][0], cm.rates[1][1]})});
}

ordered_json metrics_entry(double acc, double auc, const ConfusionMatrix& cm,
                           const ordered_json& fold, const std::string& method,
                           std::uint64_t seed) {
    ordered_json j;
    j["accuracy"] = acc;
    j["auc"] = auc;
    j["confusion"] = confusion_json(cm);
    j["fold"] = fold;
    j["method"] = method;
    j["seed"] = seed;
    return j;
}

void write_metrics(const fs::path& path, const TwoFoldReport& report, const std::string& method,
                   std::uint64_t seed) {
    ordered_json all = ordered_json::array();
    ConfusionMatrix mean_cm;
    for (int f = 0; f < 2; ++f) {
        const MethodMetrics& m = report.folds[f].metrics;
        all.push_back(metrics_entry(m.accuracy, m.auc, m.confusion, f, method, seed));
        for (int t = 0; t < 2; ++t) {
            for (int p = 0; p < 2; ++p) mean_cm.rates[t][p] += 0.5 * m.confusion.rates[t][p];
        }
    }
    all.push_back(
        metrics_entry(report.mean_accuracy, report.mean_auc, mean_cm, "mean", method, seed));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << all.dump(2) << "\n";
}

void write_roc_csv(const fs::path& path, const RocResult& roc) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "fpr,tpr,threshold\n";
    char buf[128];
    for (const RocPoint& p : roc.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", p.fpr, p.tpr, p.threshold);
        out << buf;
    }
}

void write_epoch_log(const fs::path& path, const std::vector<EpochLog>& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "epoch,mean_loss\n";
    char buf[96];
    for (const EpochLog& e : log) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", e.epoch, e.mean_loss);
        out << buf;
    }
}

// --- shared dataset loading ---

AlignedDataset load_aligned(const std::string& manifest_path, const std::string& root,
                            std::size_t side) {
    fs::path mpath(manifest_path);
    Manifest manifest = load_manifest(mpath);
    fs::path image_root = root.empty() ? mpath.parent_path() : fs::path(root);
    return align_dataset(manifest, image_root, side);
}

NetworkConfig preset_classifier(const std::string& preset, std::size_t classes) {
    if (preset == "desk32") return NetworkConfig::desk32(classes);
    if (preset == "paper200") return NetworkConfig::paper200(classes);
    throw UsageError("unknown preset '" + preset + "', expected desk32 or paper200");
}

// --- commands ---

struct CommonOpts {
    std::string manifest;
    std::string root;
    std::string out;
    std::uint64_t seed = 1;
};

int cmd_synth_gen(std::size_t n, std::size_t k, double gamma, std::size_t side,
                  double noise, std::uint64_t seed, const std::string& out) {
    fs::path dir = ensure_out_dir(out);
    SynthConfig cfg;
    cfg.identity_count = n;
    cfg.images_per_identity = k;
    cfg.age_gap_strength = gamma;
    cfg.image_side = side;
    cfg.noise_level = noise;
    Rng rng(seed);
    SynthDataset dataset = synth_generate(cfg, rng);
    write_synth_dataset(dataset, dir);

    RunLog log{dir, "synth-gen", {}, seed, {}};
    log.config = {{"identities", n}, {"images_per_identity", k}, {"gamma", gamma},
                  {"side", side},    {"noise", noise}};
    log.add(dir / "manifest.jsonl");
    for (const auto& rec : dataset.manifest.records) log.add(dir / rec.path);
    log.write();
    std::cout << "wrote " << dataset.manifest.records.size() << " images to " << dir.string()
              << "\n";
    return 0;
}

int cmd_preprocess(const CommonOpts& opts, std::size_t side) {
    fs::path dir = ensure_out_dir(opts.out);
    fs::path mpath(opts.manifest);
    Manifest manifest = load_manifest(mpath);
    fs::path image_root = opts.root.empty() ? mpath.parent_path() : fs::path(opts.root);

    Manifest aligned_manifest;
    std::vector<std::string> failures;
    RunLog log{dir, "preprocess", {}, opts.seed, {}};
    for (const ManifestRecord& rec : manifest.records) {
        try {
            RawImage img = load_pgm(image_root / rec.path);
            AlignedFace face = align(img, EyePair{rec.eye_l, rec.eye_r}, side);
            fs::path out_path = dir / rec.path;
            std::error_code ec;
            fs::create_directories(out_path.parent_path(), ec);
            save_pgm(to_raw_image(face.pixels), out_path);
            EyePair canon = canonical_eyes(side);
            ManifestRecord out_rec = rec;
            out_rec.eye_l = canon.left;
            out_rec.eye_r = canon.right;
            aligned_manifest.records.push_back(std::move(out_rec));
            log.add(out_path);
        } catch (const std::exception& e) {
            failures.push_back(rec.path + ": " + e.what());
        }
    }
    save_manifest(aligned_manifest, dir / "manifest.jsonl");
    log.add(dir / "manifest.jsonl");
    log.config = {{"manifest", opts.manifest}, {"side", side},
                  {"aligned", aligned_manifest.records.size()},
                  {"failed", failures.size()}};
    log.write();
    if (!failures.empty()) {
        std::ostringstream os;
        os << failures.size() << " record(s) failed alignment:";
        for (const std::string& f : failures) os << "\n  " << f;
        throw DataError(os.str());
    }
    std::cout << "aligned " << aligned_manifest.records.size() << " images to " << dir.string()
              << "\n";
    return 0;
}

int cmd_pretrain(const CommonOpts& opts, const std::string& preset, double lr, double momentum,
                 double weight_decay, std::size_t epochs, std::size_t batch) {
    fs::path dir = ensure_out_dir(opts.out);
    std::size_t side = preset == "paper200" ? 200 : 32;
    AlignedDataset dataset = load_aligned(opts.manifest, opts.root, side);
    if (dataset.identities().size() < 2) {
        throw UsageError("pretrain needs at least 2 identities, got " +
                         std::to_string(dataset.identities().size()));
    }
    NetworkConfig net = preset_classifier(preset, dataset.identities().size());
    Rng rng(opts.seed);
    PretrainResult result =
        pretrain_classifier(dataset, net, lr, momentum, weight_decay, epochs, batch, rng);

    Checkpoint ckpt;
    ckpt.config = result.config;
    ckpt.params = result.params;
    ckpt.seed = opts.seed;
    save_checkpoint(ckpt, dir / "pretrain.ckpt");
    write_epoch_log(dir / "loss.csv", result.log);

    RunLog log{dir, "pretrain", {}, opts.seed, {}};
    log.config = {{"manifest", opts.manifest}, {"preset", preset},       {"lr", lr},
                  {"momentum", momentum},      {"weight_decay", weight_decay},
                  {"epochs", epochs},          {"batch", batch},
                  {"final_top1", result.final_top1}};
    log.add(dir / "pretrain.ckpt");
    log.add(dir / "loss.csv");
    log.write();
    std::cout << "pretrain final top-1 " << result.final_top1 << "\n";
    return 0;
}

int cmd_finetune(const CommonOpts& opts, const std::string& inject,
                 const std::string& providers, const std::vector<std::string>& score_files,
                 double margin, double lr, std::size_t epochs, std::size_t batch, int fold,
                 const std::string& init_ckpt) {
    fs::path dir = ensure_out_dir(opts.out);
    if (inject != "on" && inject != "off") {
        throw UsageError("--inject must be 'on' or 'off', got '" + inject + "'");
    }
    bool inject_on = inject == "on" && !providers.empty();
    if (inject == "on" && providers.empty()) {
        throw UsageError("--inject on requires a non-empty --providers list");
    }
    if (fold != 0 && fold != 1) throw UsageError("--fold must be 0 or 1");

    AlignedDataset dataset = load_aligned(opts.manifest, opts.root, 32);

    ExperimentConfig ecfg;
    ecfg.seed = opts.seed;
    ecfg.siamese = SiameseConfig::desk32();
    ecfg.siamese.margin = margin;
    ecfg.siamese.lr = lr;
    ecfg.siamese.epochs = epochs;
    ecfg.siamese.batch_size = batch;
    Experiment experiment(dataset, ecfg);

    ProviderRegistry registry;
    std::vector<PairRecord> all_pairs = experiment.pairs_of_fold(0).pairs;
    const auto& f1 = experiment.pairs_of_fold(1).pairs;
    all_pairs.insert(all_pairs.end(), f1.begin(), f1.end());
    std::vector<std::string> provider_ids;
    if (inject_on) {
        provider_ids =
            resolve_providers(providers, registry, parse_score_files(score_files), all_pairs);
        if (std::find(provider_ids.begin(), provider_ids.end(), "siamese") !=
            provider_ids.end()) {
            throw UsageError("provider 15 (siamese) cannot be injected into itself");
        }
        ecfg.inject_providers = provider_ids;
    }

    SiameseConfig scfg = ecfg.siamese;
    if (inject_on) {
        scfg.inject_width = provider_ids.size();
        scfg.base = NetworkConfig::desk32_embedding(scfg.inject_width);
    }
    Experiment exp2(dataset, ecfg);  // carries the injection provider list
    std::vector<SiamesePair> train_pairs = exp2.build_train_pairs(fold, registry, inject_on);

    ModelParams init;
    if (!init_ckpt.empty()) {
        Checkpoint base = load_checkpoint(init_ckpt);
        validate_params_shapes(scfg.base, base.params);
        init = base.params;
    } else {
        Rng init_rng = Rng(opts.seed).split(400 + static_cast<std::uint64_t>(1 - fold));
        init = init_params(scfg.base, init_rng);
    }
    Rng train_rng = Rng(opts.seed).split(500 + static_cast<std::uint64_t>(1 - fold));
    FinetuneResult trained = finetune(train_pairs, scfg, std::move(init), train_rng);

    Checkpoint out_ckpt;
    out_ckpt.config = scfg.base;
    out_ckpt.params = trained.params;
    out_ckpt.has_injection_stats = inject_on;
    if (inject_on) out_ckpt.stats = trained.stats;
    out_ckpt.threshold = trained.threshold;
    out_ckpt.seed = opts.seed;
    save_checkpoint(out_ckpt, dir / "siamese.ckpt");
    write_epoch_log(dir / "loss.csv", trained.log);

    double train_acc = Experiment::training_accuracy(train_pairs, scfg, trained);
    RunLog log{dir, "finetune", {}, opts.seed, {}};
    log.config = {{"manifest", opts.manifest},
                  {"train_fold", fold},
                  {"inject", inject_on},
                  {"feature_set", providers},
                  {"providers", provider_ids},
                  {"margin", margin},
                  {"lr", lr},
                  {"epochs", epochs},
                  {"batch", batch},
                  {"init_checkpoint", init_ckpt},
                  {"threshold", trained.threshold},
                  {"train_accuracy", train_acc}};
    log.add(dir / "siamese.ckpt");
    log.add(dir / "loss.csv");
    log.write();
    std::cout << "finetune train-fold accuracy " << train_acc << ", threshold "
              << trained.threshold << "\n";
    return 0;
}

int cmd_eval(const CommonOpts& opts, const std::string& method, const std::string& inject,
             const std::string& providers, const std::vector<std::string>& score_files,
             double margin, double lr, std::size_t epochs, std::size_t batch) {
    fs::path dir = ensure_out_dir(opts.out);
    AlignedDataset dataset = load_aligned(opts.manifest, opts.root, 32);

    ExperimentConfig ecfg;
    ecfg.seed = opts.seed;
    ecfg.siamese = SiameseConfig::desk32();
    ecfg.siamese.margin = margin;
    ecfg.siamese.lr = lr;
    ecfg.siamese.epochs = epochs;
    ecfg.siamese.batch_size = batch;

    // resolve providers against the union of both folds' pairs
    Experiment probe(dataset, ecfg);
    std::vector<PairRecord> all_pairs = probe.pairs_of_fold(0).pairs;
    const auto& f1 = probe.pairs_of_fold(1).pairs;
    all_pairs.insert(all_pairs.end(), f1.begin(), f1.end());
    ProviderRegistry registry;
    auto files = parse_score_files(score_files);

    std::string resolved_method = method;
    TwoFoldReport report;
    if (method == "siamese" || method == "15") {
        resolved_method = "siamese";
        if (inject == "on") {
            if (providers.empty()) {
                throw UsageError("--inject on requires a non-empty --providers list");
            }
            ecfg.inject_providers = resolve_providers(providers, registry, files, all_pairs);
            if (std::find(ecfg.inject_providers.begin(), ecfg.inject_providers.end(),
                          "siamese") != ecfg.inject_providers.end()) {
                throw UsageError("provider 15 (siamese) cannot be injected into itself");
            }
            resolved_method = "siamese+inject:" + providers;
        }
        Experiment experiment(dataset, ecfg);
        report = experiment.eval_siamese(registry).report;
    } else if (method.find('+') != std::string::npos) {
        std::vector<std::string> ids = resolve_providers(method, registry, files, all_pairs);
        if (std::find(ids.begin(), ids.end(), "siamese") != ids.end()) {
            throw UsageError(
                "provider 15 (siamese) is not available as a stacking feature; "
                "evaluate it with --method siamese");
        }
        Experiment experiment(dataset, ecfg);
        report = experiment.eval_stacking(ids, registry);
        resolved_method = "stack:" + method;
    } else {
        std::vector<std::string> ids = resolve_providers(method, registry, files, all_pairs);
        if (ids.size() != 1) throw UsageError("--method expects a single provider or a stack");
        if (ids[0] == "siamese") throw UsageError("use --method siamese to train and evaluate");
        Experiment experiment(dataset, ecfg);
        report = experiment.eval_provider(ids[0], registry);
        resolved_method = ids[0];
    }

    write_metrics(dir / "metrics.json", report, resolved_method, opts.seed);
    write_roc_csv(dir / "roc_fold0.csv", report.folds[0].roc);
    write_roc_csv(dir / "roc_fold1.csv", report.folds[1].roc);

    RunLog log{dir, "eval", {}, opts.seed, {}};
    log.config = {{"manifest", opts.manifest}, {"method", resolved_method},
                  {"inject", inject},          {"providers", providers},
                  {"margin", margin},          {"lr", lr},
                  {"epochs", epochs},          {"batch", batch}};
    log.add(dir / "metrics.json");
    log.add(dir / "roc_fold0.csv");
    log.add(dir / "roc_fold1.csv");
    log.write();
    std::cout << "mean accuracy " << report.mean_accuracy << ", mean auc " << report.mean_auc
              << "\n";
    return 0;
}

int cmd_roc_export(const CommonOpts& opts, const std::string& scores_path, int fold,
                   const std::string& orientation_str) {
    fs::path dir = ensure_out_dir(opts.out);
    if (fold != 0 && fold != 1) throw UsageError("--fold must be 0 or 1");
    Orientation orientation;
    if (orientation_str == "distance") orientation = Orientation::Distance;
    else if (orientation_str == "similarity") orientation = Orientation::Similarity;
    else throw UsageError("--orientation must be 'distance' or 'similarity'");

    AlignedDataset dataset = load_aligned(opts.manifest, opts.root, 32);
    ExperimentConfig ecfg;
    ecfg.seed = opts.seed;
    Experiment experiment(dataset, ecfg);
    const std::vector<PairRecord>& pairs = experiment.pairs_of_fold(fold).pairs;
    std::vector<double> scores = load_external_scores(scores_path, pairs);
    std::vector<int> labels;
    labels.reserve(pairs.size());
    for (const PairRecord& p : pairs) labels.push_back(p.label);

    RocResult result = roc(scores, labels, orientation);
    write_roc_csv(dir / "roc.csv", result);

    RunLog log{dir, "roc-export", {}, opts.seed, {}};
    log.config = {{"manifest", opts.manifest}, {"scores", scores_path},
                  {"fold", fold},              {"orientation", orientation_str},
                  {"auc", result.auc}};
    log.add(dir / "roc.csv");
    log.write();
    std::cout << "auc " << result.auc << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"age-gap face verification pipeline"};
    app.require_subcommand(1);

    CommonOpts opts;
    std::string preset = "desk32";
    std::string inject = "off";
    std::string providers;
    std::vector<std::string> score_files;
    std::string method;
    std::string init_ckpt;
    std::string scores_path;
    std::string orientation = "similarity";
    double margin = 1.0, lr = 0.02, momentum = 0.9, weight_decay = 1e-4;
    double gamma = 0.5, noise = 0.03;
    std::size_t epochs = 30, batch = 16, side = 32;
    std::size_t n = 20, k = 8, synth_side = 48;
    int fold = 0;

    auto add_common = [&](CLI::App* cmd, bool needs_manifest = true) {
        if (needs_manifest) {
            cmd->add_option("--manifest", opts.manifest, "manifest JSONL path")->required();
            cmd->add_option("--root", opts.root,
                            "image root directory (default: manifest directory)");
        }
        cmd->add_option("--seed", opts.seed, "global RNG seed");
        cmd->add_option("--out", opts.out, "output directory")->required();
    };

    CLI::App* sg = app.add_subcommand("synth-gen", "generate a synthetic identity dataset");
    sg->add_option("--n", n, "identity count");
    sg->add_option("--k", k, "images per identity");
    sg->add_option("--gamma", gamma, "age-gap strength in [0,1]");
    sg->add_option("--side", synth_side, "image side in pixels");
    sg->add_option("--noise", noise, "pixel noise level");
    add_common(sg, false);

    CLI::App* pp = app.add_subcommand("preprocess", "align faces to the canonical geometry");
    pp->add_option("--side", side, "aligned image side");
    add_common(pp);

    CLI::App* pt = app.add_subcommand("pretrain", "train the identity classifier");
    pt->add_option("--preset", preset, "network preset: desk32 or paper200");
    pt->add_option("--lr", lr, "learning rate");
    pt->add_option("--momentum", momentum, "SGD momentum");
    pt->add_option("--weight-decay", weight_decay, "L2 weight decay");
    pt->add_option("--epochs", epochs, "training epochs");
    pt->add_option("--batch", batch, "minibatch size");
    add_common(pt);

    CLI::App* ft = app.add_subcommand("finetune", "train the verification network on one fold");
    ft->add_option("--inject", inject, "feature injection: on or off");
    ft->add_option("--providers", providers, "feature set, e.g. 1+2+3+6");
    ft->add_option("--score-file", score_files, "external score file as N=path (N in 4,5,7,8,9)");
    ft->add_option("--margin", margin, "contrastive margin");
    ft->add_option("--lr", lr, "learning rate");
    ft->add_option("--epochs", epochs, "training epochs");
    ft->add_option("--batch", batch, "minibatch size");
    ft->add_option("--fold", fold, "training fold: 0 or 1");
    ft->add_option("--init", init_ckpt, "base checkpoint to start from");
    add_common(ft);

    CLI::App* ev = app.add_subcommand("eval", "two-fold evaluation of a method");
    ev->add_option("--method", method,
                   "provider id (e.g. 1 or euclid), a stack (1+2+6), or siamese")
        ->required();
    ev->add_option("--inject", inject, "siamese feature injection: on or off");
    ev->add_option("--providers", providers, "injection feature set, e.g. 1+2+3+6");
    ev->add_option("--score-file", score_files, "external score file as N=path");
    ev->add_option("--margin", margin, "contrastive margin");
    ev->add_option("--lr", lr, "learning rate");
    ev->add_option("--epochs", epochs, "training epochs");
    ev->add_option("--batch", batch, "minibatch size");
    add_common(ev);

    CLI::App* re = app.add_subcommand("roc-export", "export a ROC curve for a score file");
    re->add_option("--scores", scores_path, "CSV with header pair_id,score")->required();
    re->add_option("--fold", fold, "fold whose pairs the scores cover");
    re->add_option("--orientation", orientation, "distance or similarity");
    add_common(re);

    try {
        app.parse(argc, argv);
        thread_cap();  // validate AGFV_THREADS up front
        if (sg->parsed()) {
            return cmd_synth_gen(n, k, gamma, synth_side, noise, opts.seed, opts.out);
        }
        if (pp->parsed()) return cmd_preprocess(opts, side);
        if (pt->parsed()) {
            return cmd_pretrain(opts, preset, lr, momentum, weight_decay, epochs, batch);
        }
        if (ft->parsed()) {
            return cmd_finetune(opts, inject, providers, score_files, margin, lr, epochs, batch,
                                fold, init_ckpt);
        }
        if (ev->parsed()) {
            return cmd_eval(opts, method, inject, providers, score_files, margin, lr, epochs,
                            batch);
        }
        if (re->parsed()) return cmd_roc_export(opts, scores_path, fold, orientation);
        throw UsageError("no command given");
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const ShapeError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
