#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "agfv/pipeline.hpp"

using namespace agfv;
namespace fs = std::filesystem;

namespace {

const fs::path kWork = fs::temp_directory_path() / "agfv_cli_test";

struct CmdResult {
    int exit_code = -1;
    std::string output;
};

CmdResult run_cli(const std::string& args, const std::string& env = "") {
    fs::create_directories(kWork);
    fs::path log = kWork / "last_output.txt";
    std::string cmd = env + " " + std::string(AGFV_CLI_PATH) + " " + args + " > " +
                      log.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    CmdResult r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        if (!line.empty()) ++n;
    }
    return n;
}

fs::path fresh_dir(const std::string& name) {
    fs::path d = kWork / name;
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("cli end-to-end") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);

    fs::path data = kWork / "data";
    fs::path data2 = kWork / "data2";

    SUBCASE("exit codes follow the contract") {
        CHECK(run_cli("").exit_code == 1);                       // no subcommand
        CHECK(run_cli("synth-gen --n 2 --k 2").exit_code == 1);  // missing --out
        CHECK(run_cli("synth-gen --n 2 --k 2 --gamma 1.5 --out " +
                      fresh_dir("bad_gamma").string())
                  .exit_code == 1);
        CHECK(run_cli("eval --method euclid --manifest /nonexistent/m.jsonl --out " +
                      fresh_dir("bad_manifest").string())
                  .exit_code == 2);
        CHECK(run_cli("synth-gen --n 2 --k 2 --out " + fresh_dir("bad_env").string(),
                      "AGFV_THREADS=abc")
                  .exit_code == 1);
        CHECK(run_cli("--help").exit_code == 0);
    }

    // the remaining subcases all consume this dataset
    CmdResult gen =
        run_cli("synth-gen --n 6 --k 4 --gamma 0.6 --seed 7 --out " + data.string());
    REQUIRE(gen.exit_code == 0);
    REQUIRE(fs::exists(data / "manifest.jsonl"));
    CHECK(line_count(data / "manifest.jsonl") == 24);
    CHECK(fs::exists(data / "run.json"));
    CHECK(slurp(data / "run.json").find("synth-gen") != std::string::npos);

    SUBCASE("synth-gen is deterministic") {
        CmdResult gen2 =
            run_cli("synth-gen --n 6 --k 4 --gamma 0.6 --seed 7 --out " + data2.string());
        REQUIRE(gen2.exit_code == 0);
        CHECK(slurp(data / "manifest.jsonl") == slurp(data2 / "manifest.jsonl"));
        Manifest m = load_manifest(data / "manifest.jsonl");
        CHECK(slurp(data / m.records[0].path) == slurp(data2 / m.records[0].path));
    }

    SUBCASE("preprocess writes an aligned store with canonical eyes") {
        fs::path aligned = fresh_dir("aligned");
        CmdResult pp = run_cli("preprocess --manifest " + (data / "manifest.jsonl").string() +
                               " --side 32 --out " + aligned.string());
        REQUIRE(pp.exit_code == 0);
        Manifest m = load_manifest(aligned / "manifest.jsonl");
        REQUIRE(m.records.size() == 24);
        EyePair canon = canonical_eyes(32);
        for (const auto& rec : m.records) {
            CHECK(rec.eye_l.x == doctest::Approx(canon.left.x));
            CHECK(rec.eye_r.y == doctest::Approx(canon.right.y));
            RawImage img = load_pgm(aligned / rec.path);
            CHECK(img.width == 32);
        }
        // rerun is byte-identical
        fs::path aligned2 = fresh_dir("aligned2");
        run_cli("preprocess --manifest " + (data / "manifest.jsonl").string() +
                " --side 32 --out " + aligned2.string());
        CHECK(slurp(aligned / m.records[0].path) == slurp(aligned2 / m.records[0].path));
    }

    SUBCASE("eval of a baseline provider emits the fixed metrics schema") {
        fs::path out1 = fresh_dir("eval1");
        CmdResult ev = run_cli("eval --method euclid --manifest " +
                               (data / "manifest.jsonl").string() + " --seed 3 --out " +
                               out1.string());
        REQUIRE(ev.exit_code == 0);
        std::string metrics = slurp(out1 / "metrics.json");
        for (const char* key : {"accuracy", "auc", "confusion", "fold", "method", "seed"}) {
            CHECK(metrics.find(key) != std::string::npos);
        }
        std::string roc0 = slurp(out1 / "roc_fold0.csv");
        CHECK(roc0.rfind("fpr,tpr,threshold\n", 0) == 0);
        CHECK(fs::exists(out1 / "roc_fold1.csv"));
        CHECK(fs::exists(out1 / "run.json"));

        // identical seed -> byte-identical metrics; numeric alias "1" == "euclid"
        fs::path out2 = fresh_dir("eval2");
        CmdResult ev2 = run_cli("eval --method 1 --manifest " +
                                (data / "manifest.jsonl").string() + " --seed 3 --out " +
                                out2.string());
        REQUIRE(ev2.exit_code == 0);
        CHECK(slurp(out1 / "metrics.json") == slurp(out2 / "metrics.json"));
    }

    SUBCASE("eval of a stacked feature set") {
        fs::path out = fresh_dir("eval_stack");
        CmdResult ev = run_cli("eval --method 1+6 --manifest " +
                               (data / "manifest.jsonl").string() + " --seed 3 --out " +
                               out.string());
        REQUIRE(ev.exit_code == 0);
        CHECK(slurp(out / "metrics.json").find("stack:1+6") != std::string::npos);
    }

    SUBCASE("unknown provider id lists the known ones") {
        fs::path out = fresh_dir("eval_bad");
        CmdResult ev = run_cli("eval --method 99 --manifest " +
                               (data / "manifest.jsonl").string() + " --out " + out.string());
        CHECK(ev.exit_code == 1);
        CHECK(ev.output.find("99") != std::string::npos);
        CHECK(ev.output.find("euclid") != std::string::npos);
    }

    SUBCASE("finetune produces a loadable checkpoint") {
        fs::path out = fresh_dir("finetune");
        CmdResult ft = run_cli("finetune --manifest " + (data / "manifest.jsonl").string() +
                               " --seed 3 --epochs 1 --fold 0 --inject on --providers 1+2+3+6" +
                               " --out " + out.string());
        REQUIRE(ft.exit_code == 0);
        Checkpoint ckpt = load_checkpoint(out / "siamese.ckpt");
        CHECK(ckpt.has_injection_stats);
        CHECK(ckpt.stats.mean.size() == 4);
        CHECK(ckpt.seed == 3);
        std::string run = slurp(out / "run.json");
        CHECK(run.find("1+2+3+6") != std::string::npos);  // feature-set string recorded
        CHECK(slurp(out / "loss.csv").rfind("epoch,mean_loss\n", 0) == 0);

        // --inject on without providers is a usage error
        CHECK(run_cli("finetune --manifest " + (data / "manifest.jsonl").string() +
                      " --epochs 1 --inject on --out " + fresh_dir("ft_bad").string())
                  .exit_code == 1);
    }

    SUBCASE("roc-export consumes an external score file") {
        // build the fold-0 pair list exactly as the CLI does (same seed)
        Manifest m = load_manifest(data / "manifest.jsonl");
        AlignedDataset dataset = align_dataset(m, data, 32);
        ExperimentConfig ecfg;
        ecfg.seed = 11;
        Experiment experiment(dataset, ecfg);
        fs::path scores = kWork / "scores.csv";
        {
            std::ofstream out(scores);
            out << "pair_id,score\n";
            for (const PairRecord& p : experiment.pairs_of_fold(0).pairs) {
                // a perfect oracle score: matching pairs get distance 0
                out << p.pair_id() << "," << (p.label == 1 ? 0.0 : 1.0) << "\n";
            }
        }
        fs::path out = fresh_dir("rocexp");
        CmdResult re = run_cli("roc-export --manifest " + (data / "manifest.jsonl").string() +
                               " --seed 11 --fold 0 --orientation distance --scores " +
                               scores.string() + " --out " + out.string());
        REQUIRE(re.exit_code == 0);
        CHECK(slurp(out / "roc.csv").rfind("fpr,tpr,threshold\n", 0) == 0);
        CHECK(re.output.find("auc 1") != std::string::npos);
    }
}
