#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "navseg/errors.hpp"
#include "navseg/gtsr.hpp"
#include "navseg/model.hpp"
#include "navseg/netpbm.hpp"
#include "navseg/synth.hpp"

using namespace navseg;
namespace fs = std::filesystem;

#ifndef NAVSEG_BIN
#define NAVSEG_BIN ""
#endif
#ifndef NAVSEG_SOURCE_DIR
#define NAVSEG_SOURCE_DIR "."
#endif

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) : path(fs::temp_directory_path() / tag) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

int run_cli(const std::string& args) {
    const std::string cmd = std::string(NAVSEG_BIN) + " " + args + " >/dev/null 2>&1";
    return std::system(cmd.c_str());
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("pgm round trip is bit-exact") {
    TempDir dir("navseg_pgm");
    LabelMap labels(5, 7);
    for (std::size_t i = 0; i < labels.size(); ++i) labels.data[i] = static_cast<std::uint8_t>(i * 7 % 256);
    write_pgm(dir / "a.pgm", labels);
    const LabelMap back = read_pgm(dir / "a.pgm");
    CHECK(back.rows == 5);
    CHECK(back.cols == 7);
    CHECK(back.data == labels.data);
    write_pgm(dir / "b.pgm", back);
    CHECK(slurp(dir / "a.pgm") == slurp(dir / "b.pgm"));
}

TEST_CASE("ppm round trip preserves quantized channels") {
    TempDir dir("navseg_ppm");
    auto rng = make_rng(1);
    const Tensor image = uniform_tensor({3, 6, 4}, 0.0, 1.0, rng);
    write_ppm(dir / "a.ppm", image);
    const Tensor back = read_ppm(dir / "a.ppm");
    REQUIRE(back.shape == image.shape);
    for (std::size_t i = 0; i < image.data.size(); ++i)
        CHECK(std::abs(back.data[i] - image.data[i]) <= 0.5 / 255.0 + 1e-12);
    // A second write of the decoded image is byte-identical.
    write_ppm(dir / "b.ppm", back);
    CHECK(slurp(dir / "a.ppm") == slurp(dir / "b.ppm"));
}

TEST_CASE("netpbm header parsing accepts comments, rejects damage") {
    TempDir dir("navseg_pbm_hdr");
    {
        std::ofstream os(dir / "c.pgm", std::ios::binary);
        os << "P5\n# a comment\n 2 2\n255\n";
        os.write("\x01\x02\x03\x04", 4);
    }
    const LabelMap m = read_pgm(dir / "c.pgm");
    CHECK(m.at(1, 1) == 4);

    {
        std::ofstream os(dir / "short.pgm", std::ios::binary);
        os << "P5\n2 2\n255\n";
        os.write("\x01\x02", 2);
    }
    CHECK_THROWS_AS(read_pgm(dir / "short.pgm"), IoError);
    {
        std::ofstream os(dir / "deep.pgm", std::ios::binary);
        os << "P5\n2 2\n65535\n";
        os.write("\x01\x02\x03\x04", 4);
    }
    CHECK_THROWS_AS(read_pgm(dir / "deep.pgm"), IoError);
    {
        std::ofstream os(dir / "wrong.ppm", std::ios::binary);
        os << "P5\n1 1\n255\n";
        os.write("\x01", 1);
    }
    CHECK_THROWS_AS(read_ppm(dir / "wrong.ppm"), IoError);
}

TEST_CASE("checkpoint save/load round trip") {
    TempDir dir("navseg_ckpt");
    ModelConfig mc;
    mc.head.head_width = 8;
    mc.head.fused_channels = 32;
    mc.aux_hidden = 16;
    mc.seed = 23;
    const Model m = Model::init(mc);
    save_checkpoint(dir / "ckpt", m);
    const Model loaded = load_checkpoint(dir / "ckpt");
    CHECK(loaded.cfg.head.head_width == 8);
    const auto a = m.named_tensors();
    const auto b = loaded.named_tensors();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(a[i].second->shape == b[i].second->shape);
        for (std::size_t k = 0; k < a[i].second->data.size(); ++k)
            CHECK(b[i].second->data[k] ==
                  static_cast<double>(static_cast<float>(a[i].second->data[k])));
    }
    // Saving the loaded model reproduces identical tensor files.
    save_checkpoint(dir / "ckpt2", loaded);
    CHECK(slurp(dir / "ckpt/head.in.weight.gtsr") == slurp(dir / "ckpt2/head.in.weight.gtsr"));

    CHECK_THROWS_AS(load_checkpoint(dir / "missing"), IoError);
}

TEST_CASE("cli: synth, regroup, flops, costmap, plan") {
    if (std::string(NAVSEG_BIN).empty()) return;
    TempDir dir("navseg_cli");

    // synth writes a readable dataset.
    REQUIRE(run_cli("synth --seed 5 --n 2 --hw 32,32 --out " + (dir / "data")) == 0);
    CHECK(fs::exists(dir / "data/img_0000.ppm"));
    CHECK(read_pgm(dir / "data/lbl_0001.pgm").rows == 32);

    // regroup an all-concrete frame into all-smooth.
    LabelMap concrete(8, 8, 23);
    write_pgm(dir / "fine.pgm", concrete);
    const std::string groups = std::string(NAVSEG_SOURCE_DIR) + "/configs/rugd_groups.json";
    REQUIRE(run_cli("regroup --in " + (dir / "fine.pgm") + " --groups " + groups + " --out " +
                    (dir / "coarse.pgm")) == 0);
    for (auto v : read_pgm(dir / "coarse.pgm").data) CHECK(v == 0);

    // flops obeys the 1/16 attention law between reductions.
    REQUIRE(std::system((std::string(NAVSEG_BIN) + " flops --hw 64,64 > " + (dir / "flops.json") +
                         " 2>/dev/null")
                            .c_str()) == 0);
    {
        std::ifstream is(dir / "flops.json");
        nlohmann::json j;
        is >> j;
        const auto& rows = j["rows"];
        CHECK(rows[0]["attention"].get<unsigned long long>() ==
              16ULL * rows[1]["attention"].get<unsigned long long>());
        CHECK(rows[1]["attention"].get<unsigned long long>() ==
              16ULL * rows[2]["attention"].get<unsigned long long>());
    }

    // costmap + plan on a synthetic scene; one grid cell per pixel.
    LabelMap pred(16, 16, 0);
    for (int r = 4; r < 12; ++r)
        for (int c = 6; c < 10; ++c) pred.at(r, c) = 3;  // forbidden block
    write_pgm(dir / "pred.pgm", pred);
    write_gtsr(dir / "elev.gtsr", Tensor({16, 16}, 0.0));
    {
        std::ofstream os(dir / "hom.json");
        os << R"({"matrix": [1,0,0, 0,1,0, 0,0,1]})";
    }
    const std::string costs = dir / "costs.json";
    {
        std::ofstream os(costs);
        os << R"({"cell_size": 1.0, "origin": [0.0, 0.0],
                  "costs": {"0": 0, "1": 2, "2": 5, "3": "obstacle", "4": "obstacle",
                            "5": 8, "unknown": 8},
                  "cost_ranks": [0, 1, 2, 3, 4, 5]})";
    }
    REQUIRE(run_cli("costmap --pred " + (dir / "pred.pgm") + " --hom " + (dir / "hom.json") +
                    " --elev " + (dir / "elev.gtsr") + " --costs " + costs + " --out " +
                    (dir / "grid")) == 0);
    REQUIRE(run_cli("plan --grid " + (dir / "grid") + " --start 0,0 --goal 15,15 --out " +
                    (dir / "path.csv")) == 0);
    const std::string csv = slurp(dir / "path.csv");
    CHECK(csv.find("row,col") == 0);
    CHECK(csv.find("15,15") != std::string::npos);

    // Unreachable goal: explicit no-path exit code, no output file.
    LabelMap sealed(8, 8, 0);
    for (int r = 0; r < 8; ++r) sealed.at(r, 4) = 4;  // obstacle wall
    write_pgm(dir / "sealed.pgm", sealed);
    write_gtsr(dir / "elev8.gtsr", Tensor({8, 8}, 0.0));
    REQUIRE(run_cli("costmap --pred " + (dir / "sealed.pgm") + " --hom " + (dir / "hom.json") +
                    " --elev " + (dir / "elev8.gtsr") + " --costs " + costs + " --out " +
                    (dir / "grid2")) == 0);
    CHECK(run_cli("plan --grid " + (dir / "grid2") + " --start 0,0 --goal 0,7 --out " +
                  (dir / "nopath.csv")) != 0);
    CHECK_FALSE(fs::exists(dir / "nopath.csv"));

    // Malformed input: nonzero exit.
    CHECK(run_cli("regroup --in " + (dir / "absent.pgm") + " --groups " + groups + " --out " +
                  (dir / "x.pgm")) != 0);
}

TEST_CASE("cli: train, infer, eval round trip") {
    if (std::string(NAVSEG_BIN).empty()) return;
    TempDir dir("navseg_cli_train");
    {
        nlohmann::json cfg{{"max_iters", 4},
                           {"batch_size", 2},
                           {"image_size", {32, 32}},
                           {"dataset_size", 4},
                           {"seed", 3},
                           {"head", {{"head_width", 8}, {"fused_channels", 32}}},
                           {"aux_hidden", 16}};
        std::ofstream os(dir / "cfg.json");
        os << cfg.dump();
    }
    REQUIRE(run_cli("train --config " + (dir / "cfg.json") + " --out " + (dir / "run")) == 0);
    CHECK(fs::exists(dir / "run/history.jsonl"));
    REQUIRE(fs::exists(dir / "run/ckpt/manifest.json"));

    // Deterministic inference: two runs, identical predictions.
    const auto data = make_synth_dataset(9, 1, 32, 32, 6);
    write_ppm(dir / "img.ppm", data[0].image);
    fs::create_directories(dir / "pred");
    fs::create_directories(dir / "gt");
    REQUIRE(run_cli("infer --ckpt " + (dir / "run/ckpt") + " --image " + (dir / "img.ppm") +
                    " --out " + (dir / "pred/frame.pgm") + " --probs " + (dir / "probs.gtsr")) == 0);
    REQUIRE(run_cli("infer --ckpt " + (dir / "run/ckpt") + " --image " + (dir / "img.ppm") +
                    " --out " + (dir / "gt/frame.pgm")) == 0);
    CHECK(slurp(dir / "pred/frame.pgm") == slurp(dir / "gt/frame.pgm"));
    const Tensor probs = read_gtsr(dir / "probs.gtsr");
    CHECK(probs.shape == std::vector<int>{6, 32, 32});

    // eval of a prediction against itself is a perfect score.
    const std::string groups = std::string(NAVSEG_SOURCE_DIR) + "/configs/rugd_groups.json";
    REQUIRE(std::system((std::string(NAVSEG_BIN) + " eval --pred " + (dir / "pred") + " --gt " +
                         (dir / "gt") + " --groups " + groups + " --out " + (dir / "metrics.json") +
                         " >/dev/null 2>&1")
                            .c_str()) == 0);
    std::ifstream is(dir / "metrics.json");
    nlohmann::json metrics;
    is >> metrics;
    CHECK(metrics["miou"].get<double>() == 1.0);
    CHECK(metrics["aacc"].get<double>() == 1.0);
}
