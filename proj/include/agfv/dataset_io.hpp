#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "agfv/evaluation.hpp"
#include "agfv/layers.hpp"
#include "agfv/preprocess.hpp"
#include "agfv/siamese.hpp"

namespace agfv {

struct ManifestRecord {
    std::string id;
    std::string path;
    Point eye_l;
    Point eye_r;
    std::string age;  // young | old | unknown
};

struct Manifest {
    std::vector<ManifestRecord> records;

    std::vector<std::string> identities() const;
    std::map<std::string, std::vector<std::string>> images_by_identity() const;
};

/// Line-delimited JSON, one record per line:
/// {"id":..., "path":..., "eye_l":[x,y], "eye_r":[x,y], "age":...}
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// --- PGM (P5, 8-bit) ---

RawImage load_pgm(const std::filesystem::path& path);
void save_pgm(const RawImage& img, const std::filesystem::path& path);
/// Quantizes [0,1] grayscale to 8 bits.
RawImage to_raw_image(const Tensor& gray);

// --- checkpoints ---

inline constexpr char kCheckpointMagic[4] = {'A', 'G', 'F', 'V'};
inline constexpr std::uint16_t kCheckpointVersion = 1;

struct Checkpoint {
    NetworkConfig config;
    ModelParams params;
    bool has_optimizer_state = false;
    Gradients momentum;
    bool has_injection_stats = false;
    InjectionStats stats;
    double threshold = 0.0;
    std::uint64_t seed = 0;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Shape-checks params against a config; throws ShapeError naming the layer.
void validate_params_shapes(const NetworkConfig& config, const ModelParams& params);

// --- external score files ---

/// CSV with header `pair_id,score`; every pair in `pairs` must be present
/// exactly once. Returns scores aligned to the pair order.
std::vector<double> load_external_scores(const std::filesystem::path& path,
                                         const std::vector<PairRecord>& pairs);

/// Loads a score file and registers it as provider "ext:<filename-stem>".
std::string register_external_scores(ProviderRegistry& registry,
                                     const std::filesystem::path& path,
                                     const std::vector<PairRecord>& pairs,
                                     Orientation orientation = Orientation::Similarity);

// --- synthetic identity generator ---

struct SynthConfig {
    std::size_t identity_count = 20;
    std::size_t images_per_identity = 8;
    double age_gap_strength = 0.5;  // gamma in [0,1]
    std::size_t image_side = 48;
    double noise_level = 0.03;
};

struct SynthDataset {
    Manifest manifest;
    std::vector<RawImage> images;  // aligned with manifest.records
};

SynthDataset synth_generate(const SynthConfig& cfg, Rng& rng);
void write_synth_dataset(const SynthDataset& dataset, const std::filesystem::path& out_dir);

}  // namespace agfv
