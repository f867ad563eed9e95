#include "agfv/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>

#include <json.hpp>

namespace agfv {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::string> Manifest::identities() const {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.id);
    return {ids.begin(), ids.end()};
}

std::map<std::string, std::vector<std::string>> Manifest::images_by_identity() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& r : records) out[r.id].push_back(r.path);
    return out;
}

Manifest load_manifest(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("load_manifest: cannot open " + path.string());
    Manifest manifest;
    std::set<std::string> seen_paths;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fail = [&](const std::string& msg) {
            throw DataError("manifest line " + std::to_string(line_no) + ": " + msg);
        };
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            fail(std::string("malformed JSON: ") + e.what());
        }
        for (const char* field : {"id", "path", "eye_l", "eye_r", "age"}) {
            if (!j.contains(field)) fail(std::string("missing field '") + field + "'");
        }
        ManifestRecord r;
        try {
            r.id = j.at("id").get<std::string>();
            r.path = j.at("path").get<std::string>();
            r.eye_l = {j.at("eye_l").at(0).get<double>(), j.at("eye_l").at(1).get<double>()};
            r.eye_r = {j.at("eye_r").at(0).get<double>(), j.at("eye_r").at(1).get<double>()};
            r.age = j.at("age").get<std::string>();
        } catch (const json::exception& e) {
            fail(std::string("bad field value: ") + e.what());
        }
        if (r.id.empty()) fail("identity id is empty");
        if (r.age != "young" && r.age != "old" && r.age != "unknown") {
            fail("age must be young, old or unknown, got '" + r.age + "'");
        }
        if (!seen_paths.insert(r.path).second) fail("duplicate path '" + r.path + "'");
        manifest.records.push_back(std::move(r));
    }
    return manifest;
}

void save_manifest(const Manifest& manifest, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_manifest: cannot write " + path.string());
    for (const auto& r : manifest.records) {
        json j;
        j["id"] = r.id;
        j["path"] = r.path;
        j["eye_l"] = {r.eye_l.x, r.eye_l.y};
        j["eye_r"] = {r.eye_r.x, r.eye_r.y};
        j["age"] = r.age;
        out << j.dump() << "\n";
    }
}

// --- PGM ---

RawImage load_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_pgm: cannot open " + path.string());
    std::string magic;
    in >> magic;
    if (magic != "P5") throw DataError("load_pgm: not a P5 file: " + path.string());
    auto next_token = [&]() {
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw DataError("load_pgm: truncated header in " + path.string());
    };
    std::size_t w = std::stoul(next_token());
    std::size_t h = std::stoul(next_token());
    std::size_t maxval = std::stoul(next_token());
    if (maxval != 255) throw DataError("load_pgm: only maxval 255 supported");
    in.get();  // single whitespace after maxval
    RawImage img;
    img.width = w;
    img.height = h;
    img.channels = 1;
    img.pixels.resize(w * h);
    in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(w * h));
    if (in.gcount() != static_cast<std::streamsize>(w * h)) {
        throw DataError("load_pgm: truncated pixel data in " + path.string());
    }
    return img;
}

void save_pgm(const RawImage& img, const fs::path& path) {
    if (img.channels != 1) throw DataError("save_pgm: only single-channel images");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_pgm: cannot write " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
}

RawImage to_raw_image(const Tensor& gray) {
    RawImage img;
    img.height = gray.dim(0);
    img.width = gray.dim(1);
    img.channels = 1;
    img.pixels.resize(img.width * img.height);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) {
        double v = std::clamp(gray.values()[i], 0.0, 1.0);
        img.pixels[i] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
    return img;
}

// --- checkpoint binary format (all little-endian) ---

namespace {

void put_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

void put_u8(std::ostream& out, std::uint8_t v) { put_bytes(out, &v, 1); }
void put_u16(std::ostream& out, std::uint16_t v) {
    std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
    put_bytes(out, b, 2);
}
void put_u32(std::ostream& out, std::uint32_t v) {
    std::uint8_t b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    put_bytes(out, b, 4);
}
void put_u64(std::ostream& out, std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (8 * i));
    put_bytes(out, b, 8);
}
void put_f64(std::ostream& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(out, bits);
}

struct Reader {
    std::istream& in;
    std::string name;

    void get_bytes(void* p, std::size_t n) {
        in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (in.gcount() != static_cast<std::streamsize>(n)) {
            throw DataError("checkpoint " + name + ": truncated tensor or header");
        }
    }
    std::uint8_t u8() {
        std::uint8_t v;
        get_bytes(&v, 1);
        return v;
    }
    std::uint16_t u16() {
        std::uint8_t b[2];
        get_bytes(b, 2);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32() {
        std::uint8_t b[4];
        get_bytes(b, 4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        std::uint8_t b[8];
        get_bytes(b, 8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }
    double f64() {
        std::uint64_t bits = u64();
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
};

void put_tensor(std::ostream& out, const Tensor& t) {
    put_u8(out, static_cast<std::uint8_t>(t.rank()));
    for (std::size_t d : t.shape()) put_u32(out, static_cast<std::uint32_t>(d));
    for (double v : t.values()) put_f64(out, v);
}

Tensor get_tensor(Reader& r) {
    std::size_t rank = r.u8();
    // rank 0 encodes the empty tensor of a parameterless layer
    if (rank == 0) return Tensor();
    std::vector<std::size_t> shape(rank);
    for (std::size_t i = 0; i < rank; ++i) shape[i] = r.u32();
    Tensor t(shape);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = r.f64();
    return t;
}

void put_config(std::ostream& out, const NetworkConfig& c) {
    put_u32(out, static_cast<std::uint32_t>(c.input_side));
    put_u32(out, static_cast<std::uint32_t>(c.input_channels));
    put_u32(out, static_cast<std::uint32_t>(c.fc6_width));
    put_u32(out, static_cast<std::uint32_t>(c.fc7_width));
    put_u32(out, static_cast<std::uint32_t>(c.fc8_classes));
    put_u8(out, static_cast<std::uint8_t>(c.precision));
    put_u32(out, static_cast<std::uint32_t>(c.layers.size()));
    for (const LayerSpec& l : c.layers) {
        put_u8(out, static_cast<std::uint8_t>(l.kind));
        put_u32(out, static_cast<std::uint32_t>(l.out_channels));
        put_u32(out, static_cast<std::uint32_t>(l.kernel));
        put_u32(out, static_cast<std::uint32_t>(l.stride));
        put_u32(out, static_cast<std::uint32_t>(l.window));
        put_f64(out, l.lrn_k);
        put_u32(out, static_cast<std::uint32_t>(l.lrn_n));
        put_f64(out, l.lrn_alpha);
        put_f64(out, l.lrn_beta);
        put_f64(out, l.rate);
        put_u32(out, static_cast<std::uint32_t>(l.fan_out));
        put_u32(out, static_cast<std::uint32_t>(l.inject_width));
    }
}

NetworkConfig get_config(Reader& r) {
    NetworkConfig c;
    c.input_side = r.u32();
    c.input_channels = r.u32();
    c.fc6_width = r.u32();
    c.fc7_width = r.u32();
    c.fc8_classes = r.u32();
    c.precision = static_cast<Precision>(r.u8());
    std::size_t n = r.u32();
    for (std::size_t i = 0; i < n; ++i) {
        LayerSpec l;
        l.kind = static_cast<LayerKind>(r.u8());
        l.out_channels = r.u32();
        l.kernel = r.u32();
        l.stride = r.u32();
        l.window = r.u32();
        l.lrn_k = r.f64();
        l.lrn_n = r.u32();
        l.lrn_alpha = r.f64();
        l.lrn_beta = r.f64();
        l.rate = r.f64();
        l.fan_out = r.u32();
        l.inject_width = r.u32();
        c.layers.push_back(l);
    }
    return c;
}

}  // namespace

void validate_params_shapes(const NetworkConfig& config, const ModelParams& params) {
    if (params.layers.size() != config.layers.size()) {
        throw ShapeError("checkpoint params have " + std::to_string(params.layers.size()) +
                         " layers, config expects " + std::to_string(config.layers.size()));
    }
    auto shapes = config.shape_check();
    std::vector<std::size_t> cur = config.input_shape();
    for (std::size_t i = 0; i < config.layers.size(); ++i) {
        const LayerSpec& l = config.layers[i];
        std::vector<std::size_t> want_w, want_b;
        if (l.kind == LayerKind::Conv) {
            want_w = {l.out_channels, cur[0], l.kernel, l.kernel};
            want_b = {l.out_channels};
        } else if (l.kind == LayerKind::FullyConnected) {
            want_w = {l.fan_out, shape_product(cur)};
            want_b = {l.fan_out};
        }
        if (params.layers[i].weight.shape() != want_w) {
            throw ShapeError("layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) +
                             "): checkpoint weight shape " + params.layers[i].weight.shape_str() +
                             " does not match expected " + shape_to_string(want_w));
        }
        if (params.layers[i].bias.shape() != want_b) {
            throw ShapeError("layer " + std::to_string(i) + " (" + layer_kind_name(l.kind) +
                             "): checkpoint bias shape mismatch");
        }
        cur = shapes[i];
    }
}

void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("save_checkpoint: cannot write " + path.string());
    put_bytes(out, kCheckpointMagic, 4);
    put_u16(out, kCheckpointVersion);
    put_config(out, ckpt.config);
    put_u32(out, static_cast<std::uint32_t>(ckpt.params.layers.size()));
    for (const ParamEntry& e : ckpt.params.layers) {
        put_tensor(out, e.weight);
        put_tensor(out, e.bias);
    }
    put_u8(out, ckpt.has_optimizer_state ? 1 : 0);
    if (ckpt.has_optimizer_state) {
        for (const ParamEntry& e : ckpt.momentum.layers) {
            put_tensor(out, e.weight);
            put_tensor(out, e.bias);
        }
    }
    put_u8(out, ckpt.has_injection_stats ? 1 : 0);
    if (ckpt.has_injection_stats) {
        put_tensor(out, ckpt.stats.mean);
        put_tensor(out, ckpt.stats.stddev);
    }
    put_f64(out, ckpt.threshold);
    put_u64(out, ckpt.seed);
    if (!out) throw DataError("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("load_checkpoint: cannot open " + path.string());
    Reader r{in, path.string()};
    char magic[4];
    r.get_bytes(magic, 4);
    if (std::memcmp(magic, kCheckpointMagic, 4) != 0) {
        throw DataError("checkpoint " + path.string() + ": bad magic");
    }
    std::uint16_t version = r.u16();
    if (version != kCheckpointVersion) {
        throw DataError("checkpoint " + path.string() + ": version " + std::to_string(version) +
                        " not supported (expected " + std::to_string(kCheckpointVersion) + ")");
    }
    Checkpoint ckpt;
    ckpt.config = get_config(r);
    ckpt.params.precision = ckpt.config.precision;
    std::size_t n_layers = r.u32();
    for (std::size_t i = 0; i < n_layers; ++i) {
        ParamEntry e;
        e.weight = get_tensor(r);
        e.bias = get_tensor(r);
        ckpt.params.layers.push_back(std::move(e));
    }
    ckpt.has_optimizer_state = r.u8() != 0;
    if (ckpt.has_optimizer_state) {
        for (std::size_t i = 0; i < n_layers; ++i) {
            ParamEntry e;
            e.weight = get_tensor(r);
            e.bias = get_tensor(r);
            ckpt.momentum.layers.push_back(std::move(e));
        }
    }
    ckpt.has_injection_stats = r.u8() != 0;
    if (ckpt.has_injection_stats) {
        ckpt.stats.mean = get_tensor(r);
        ckpt.stats.stddev = get_tensor(r);
    }
    ckpt.threshold = r.f64();
    ckpt.seed = r.u64();
    validate_params_shapes(ckpt.config, ckpt.params);
    return ckpt;
}

// --- external score files ---

std::vector<double> load_external_scores(const fs::path& path,
                                         const std::vector<PairRecord>& pairs) {
    std::ifstream in(path);
    if (!in) throw DataError("load_external_scores: cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError("load_external_scores: empty file " + path.string());
    if (line != "pair_id,score") {
        throw DataError("load_external_scores: expected header 'pair_id,score', got '" + line +
                        "'");
    }
    std::map<std::string, double> scores;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::size_t comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw DataError("score file line " + std::to_string(line_no) + ": missing comma");
        }
        std::string pair_id = line.substr(0, comma);
        std::string score_str = line.substr(comma + 1);
        double score;
        try {
            std::size_t pos = 0;
            score = std::stod(score_str, &pos);
            if (pos != score_str.size()) throw std::invalid_argument("trailing junk");
        } catch (const std::exception&) {
            throw DataError("score file line " + std::to_string(line_no) +
                            ": non-numeric score '" + score_str + "'");
        }
        if (!scores.emplace(pair_id, score).second) {
            throw DataError("score file: duplicate pair id '" + pair_id + "'");
        }
    }
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const PairRecord& p : pairs) {
        auto it = scores.find(p.pair_id());
        if (it == scores.end()) {
            throw DataError("score file " + path.string() + ": missing pair '" + p.pair_id() +
                            "'");
        }
        out.push_back(it->second);
    }
    return out;
}

std::string register_external_scores(ProviderRegistry& registry, const fs::path& path,
                                     const std::vector<PairRecord>& pairs,
                                     Orientation orientation) {
    std::vector<double> scores = load_external_scores(path, pairs);
    auto table = std::make_shared<std::map<std::string, double>>();
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        (*table)[pairs[i].pair_id()] = scores[i];
    }
    std::string id = "ext:" + path.stem().string();
    registry.register_provider(id, orientation, [table, id](const PairContext& ctx) {
        auto it = table->find(ctx.pair_id);
        if (it == table->end()) {
            throw DataError("provider " + id + ": no score for pair '" + ctx.pair_id + "'");
        }
        return it->second;
    });
    return id;
}

// --- synthetic identity generator ---

namespace {

struct Blob {
    double x, y, sigma, amp;
};

struct SynthIdentity {
    double eye_y;
    double eye_lx, eye_rx;
    std::vector<Blob> blobs;
};

SynthIdentity make_identity(Rng& rng, double side) {
    SynthIdentity id;
    id.eye_y = 0.40 * side + rng.uniform(-1.0, 1.0);
    id.eye_lx = 0.31 * side + rng.uniform(-1.0, 1.0);
    id.eye_rx = 0.69 * side + rng.uniform(-1.0, 1.0);
    for (int i = 0; i < 14; ++i) {
        Blob b;
        b.x = rng.uniform(0.12 * side, 0.88 * side);
        b.y = rng.uniform(0.2 * side, 0.95 * side);
        b.sigma = rng.uniform(0.04 * side, 0.11 * side);
        b.amp = rng.uniform(-0.45, 0.45);
        id.blobs.push_back(b);
    }
    return id;
}

/// Analytic face intensity at source coordinates; the young variant squashes
/// blob positions toward the eye line and fades the texture.
double face_intensity(const SynthIdentity& id, bool young, double gamma, double x, double y) {
    double v = 0.5;
    double squash = young ? 1.0 - 0.35 * gamma : 1.0;
    double fade = young ? 1.0 - 0.4 * gamma : 1.0;
    for (const Blob& b : id.blobs) {
        double by = id.eye_y + (b.y - id.eye_y) * squash;
        double dx = x - b.x, dy = y - by;
        v += fade * b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
    }
    // dark eye dots, fixed across age
    for (double ex : {id.eye_lx, id.eye_rx}) {
        double dx = x - ex, dy = y - id.eye_y;
        v -= 0.55 * std::exp(-(dx * dx + dy * dy) / (2.0 * 2.2 * 2.2));
    }
    if (young) v += 0.08 * gamma;
    return v;
}

}  // namespace

SynthDataset synth_generate(const SynthConfig& cfg, Rng& rng) {
    if (cfg.identity_count < 1 || cfg.images_per_identity < 1) {
        throw UsageError("synth_generate: counts must be at least 1");
    }
    if (cfg.age_gap_strength < 0.0 || cfg.age_gap_strength > 1.0) {
        throw UsageError("synth_generate: gamma must be in [0,1]");
    }
    SynthDataset out;
    double side = static_cast<double>(cfg.image_side);
    for (std::size_t i = 0; i < cfg.identity_count; ++i) {
        Rng id_rng = rng.split(1000 + i);
        SynthIdentity identity = make_identity(id_rng, side);
        std::ostringstream name;
        name << "id" << std::setw(4) << std::setfill('0') << i;
        for (std::size_t k = 0; k < cfg.images_per_identity; ++k) {
            Rng img_rng = id_rng.split(77 + k);
            bool young = k < (cfg.images_per_identity + 1) / 2;

            // per-image pose: small similarity distortion of the whole face
            double angle = img_rng.uniform(-0.17, 0.17);  // ~10 degrees
            double scale = img_rng.uniform(0.9, 1.1);
            double shift_x = img_rng.uniform(-2.0, 2.0);
            double shift_y = img_rng.uniform(-2.0, 2.0);
            double c = std::cos(angle) * scale, s = std::sin(angle) * scale;
            double cx = side / 2.0, cy = side / 2.0;
            SimilarityTransform pose;
            pose.a = c;
            pose.b = s;
            pose.tx = cx - (c * cx - s * cy) + shift_x;
            pose.ty = cy - (s * cx + c * cy) + shift_y;
            SimilarityTransform inv = pose.inverse();

            Tensor gray({cfg.image_side, cfg.image_side});
            for (std::size_t y = 0; y < cfg.image_side; ++y) {
                for (std::size_t x = 0; x < cfg.image_side; ++x) {
                    Point src = inv.apply({static_cast<double>(x), static_cast<double>(y)});
                    double v = face_intensity(identity, young, cfg.age_gap_strength, src.x, src.y);
                    v += img_rng.uniform(-cfg.noise_level, cfg.noise_level);
                    gray.at(y, x) = std::clamp(v, 0.0, 1.0);
                }
            }

            ManifestRecord rec;
            rec.id = name.str();
            std::ostringstream img_name;
            img_name << name.str() << "/" << (young ? "young" : "old") << "_" << k << ".pgm";
            rec.path = img_name.str();
            rec.age = young ? "young" : "old";
            Point el = pose.apply({identity.eye_lx, identity.eye_y});
            Point er = pose.apply({identity.eye_rx, identity.eye_y});
            rec.eye_l = el;
            rec.eye_r = er;
            out.manifest.records.push_back(std::move(rec));
            out.images.push_back(to_raw_image(gray));
        }
    }
    return out;
}

void write_synth_dataset(const SynthDataset& dataset, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw DataError("write_synth_dataset: cannot create " + out_dir.string());
    for (std::size_t i = 0; i < dataset.images.size(); ++i) {
        fs::path img_path = out_dir / dataset.manifest.records[i].path;
        fs::create_directories(img_path.parent_path(), ec);
        if (ec) throw DataError("write_synth_dataset: cannot create " + img_path.parent_path().string());
        save_pgm(dataset.images[i], img_path);
    }
    save_manifest(dataset.manifest, out_dir / "manifest.jsonl");
}

}  // namespace agfv
