#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pgan/cli.hpp"
#include "pgan/errors.hpp"
#include "pgan/synthgen.hpp"

using namespace pgan;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    return std::string((std::istreambuf_iterator<char>(f)), {});
}

AppConfig tiny_config() {
    AppConfig cfg;
    cfg.synth.num_ids = 8;
    cfg.synth.images_per_id = 4;
    cfg.synth.num_models = 2;
    cfg.synth.img_size = 32;
    cfg.synth.glyph_min = 6;
    cfg.synth.glyph_max = 9;
    cfg.synth.num_identity_glyphs = 2;
    cfg.synth.num_distractor_glyphs = 1;
    cfg.synth.num_cameras = 2;
    cfg.synth.seed = 3;
    cfg.train.d = 4;
    cfg.train.backbone_c = 8;
    cfg.train.c_prime = 8;
    cfg.train.p = 2;
    cfg.train.k = 2;
    cfg.train.epochs = 2;
    cfg.train.lr0 = 2e-3;
    cfg.train.seed = 3;
    return cfg;
}

struct TempTree {
    fs::path root;
    explicit TempTree(const std::string& name) : root("/tmp/pgan_cli_" + name) {
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~TempTree() { fs::remove_all(root); }
    std::string operator/(const std::string& leaf) const {
        return (root / leaf).string();
    }
};

} // namespace

TEST_CASE("config file parsing: values, comments, unknown fields") {
    TempTree t("config");
    {
        std::ofstream f(t / "good.cfg");
        f << "# comment\n"
          << "synth.num_ids = 12\n"
          << "train.lambda = 4.5\n"
          << "eval.metric = euclidean\n"
          << "train.remove_last_stride = false\n";
    }
    AppConfig cfg = load_config_file(t / "good.cfg");
    CHECK(cfg.synth.num_ids == 12);
    CHECK(cfg.train.lambda == 4.5);
    CHECK(cfg.metric == "euclidean");
    CHECK_FALSE(cfg.train.remove_last_stride);

    {
        std::ofstream f(t / "bad.cfg");
        f << "train.warp_speed = 9\n";
    }
    CHECK_THROWS_WITH_AS(load_config_file(t / "bad.cfg"),
                         doctest::Contains("train.warp_speed"), ConfigError);

    AppConfig base;
    CHECK_THROWS_WITH_AS(apply_config_line(base, "train.epochs", "soon"),
                         doctest::Contains("train.epochs"), ConfigError);
}

TEST_CASE("generate writes a loadable dataset and is seed-deterministic") {
    TempTree t("generate");
    AppConfig cfg = tiny_config();
    CHECK(cmd_generate(cfg, t / "data1") == 0);
    CHECK(cmd_generate(cfg, t / "data2") == 0);
    CHECK(fs::exists(t / "data1/manifest.tsv"));
    CHECK(fs::exists(t / "data1/synth_meta.json"));
    CHECK(fs::exists(t / "data1/runs.jsonl"));
    CHECK(slurp(t / "data1/manifest.tsv") == slurp(t / "data2/manifest.tsv"));
    CHECK(slurp(t / "data1/images/id0000_im00.ppm") ==
          slurp(t / "data2/images/id0000_im00.ppm"));

    Dataset ds = load_dataset(t / "data1");
    CHECK(ds.samples.size() == 32);
    CHECK(ds.num_identities == 8);
}

TEST_CASE("invalid generation config fails naming the field") {
    AppConfig cfg = tiny_config();
    cfg.synth.num_identity_glyphs = 99;
    CHECK_THROWS_WITH_AS(cmd_generate(cfg, "/tmp/pgan_cli_invalid"),
                         doctest::Contains("num_identity_glyphs"), ConfigError);
}

TEST_CASE("train then eval produce reports; attention report is a simplex") {
    TempTree t("pipeline");
    AppConfig cfg = tiny_config();
    REQUIRE(cmd_generate(cfg, t / "data") == 0);
    REQUIRE(cmd_train(cfg, "pgan", t / "data", t / "run") == 0);
    REQUIRE(fs::exists(t / "run/checkpoint.pgck"));
    REQUIRE(fs::exists(t / "run/loss_log.csv"));

    REQUIRE(cmd_eval(cfg, t / "run/checkpoint.pgck", t / "data", t / "eval") == 0);
    const std::string csv = slurp(t / "eval/report.csv");
    CHECK(csv.find("protocol,metric,mAP,top1,top5") == 0);
    CHECK(fs::exists(t / "eval/report.json"));
    CHECK(fs::exists(t / "eval/embeddings.f32"));
    CHECK(fs::exists(t / "eval/embeddings.json"));

    REQUIRE(cmd_attention_report(cfg, t / "run/checkpoint.pgck", t / "data",
                                 t / "att") == 0);
    std::ifstream att(t / "att/attention.csv");
    std::string header, line;
    std::getline(att, header);
    CHECK(header.find("file,w_1,w_2,w_3,w_4") == 0);
    int rows = 0;
    while (std::getline(att, line)) {
        ++rows;
        std::stringstream ss(line);
        std::string tok;
        std::getline(ss, tok, ','); // file name
        double sum = 0.0;
        for (int i = 0; i < 4; ++i) {
            std::getline(ss, tok, ',');
            sum += std::stod(tok);
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
    CHECK(rows > 0);
    CHECK(fs::exists(t / "att/attribute_weights.csv"));
    int heatmaps = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(t / "att/heatmaps"))
        ++heatmaps;
    CHECK(heatmaps == rows);
}

TEST_CASE("eval rejects a dataset whose geometry differs from the checkpoint") {
    TempTree t("geom");
    AppConfig cfg = tiny_config();
    REQUIRE(cmd_generate(cfg, t / "data32") == 0);
    REQUIRE(cmd_train(cfg, "baseline", t / "data32", t / "run") == 0);

    AppConfig big = cfg;
    big.synth.img_size = 64;
    REQUIRE(cmd_generate(big, t / "data64") == 0);
    CHECK_THROWS_AS(
        cmd_eval(big, t / "run/checkpoint.pgck", t / "data64", t / "eval"),
        ShapeError);
}

TEST_CASE("ablate emits one row per cell with the requested replication") {
    TempTree t("ablate");
    AppConfig cfg = tiny_config();
    cfg.train.epochs = 1;
    REQUIRE(cmd_generate(cfg, t / "data") == 0);

    AblateAxes axes;
    axes.variants = {"baseline", "pgan"};
    axes.lambda_values = {0.0, 2.0};
    axes.seeds = 1;
    REQUIRE(cmd_ablate(cfg, axes, t / "data", t / "abl") == 0);

    std::ifstream f(t / "abl/ablate.csv");
    std::string line;
    std::getline(f, line);
    CHECK(line.find("variant,d,lambda,dim,seeds,map_mean") == 0);
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4); // 2 variants x 2 lambdas
}

TEST_CASE("runs append one manifest line per command") {
    TempTree t("manifest");
    AppConfig cfg = tiny_config();
    REQUIRE(cmd_generate(cfg, t / "data") == 0);
    REQUIRE(cmd_generate(cfg, t / "data") == 0);
    const std::string runs = slurp(t / "data/runs.jsonl");
    CHECK(std::count(runs.begin(), runs.end(), '\n') == 2);
    CHECK(runs.find("\"command\":\"generate\"") != std::string::npos);
    CHECK(runs.find("\"version\":\"0.1.0\"") != std::string::npos);
}
