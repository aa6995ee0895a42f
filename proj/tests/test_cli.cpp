#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "vstain/image_io.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* p = std::getenv("VSTAIN_CLI");
    REQUIRE_MESSAGE(p != nullptr, "VSTAIN_CLI must point at the vstain binary");
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli() + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("vstain_cli_" + tag + "_" + std::to_string(getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string s(const std::string& sub = "") const { return (path / sub).string(); }
};

bool images_identical(const fs::path& a, const fs::path& b) {
    vstain::Tensor ta = vstain::io::read_image(a.string());
    vstain::Tensor tb = vstain::io::read_image(b.string());
    if (ta.shape != tb.shape) return false;
    for (int64_t i = 0; i < ta.numel(); ++i)
        if (ta[i] != tb[i]) return false;
    return true;
}

double image_l1_diff(const fs::path& a, const fs::path& b) {
    vstain::Tensor ta = vstain::io::read_image(a.string());
    vstain::Tensor tb = vstain::io::read_image(b.string());
    double d = 0.0;
    for (int64_t i = 0; i < ta.numel(); ++i) d += std::fabs(ta[i] - tb[i]);
    return d;
}

// Small shared flags for quick train runs.
const std::string kTinyModel =
    " --image-size 16 --compression-factor 4 --hidden 16 --depth 2 --d-sem 8 "
    "--steps 8 --batch-size 2 --lr 1e-3 --seed 5 --sample-steps 5";

}  // namespace

TEST_CASE("end-to-end: make-synthetic, train, translate twice bit-identically, evaluate") {
    TempDir dir("e2e");
    REQUIRE(run("make-synthetic --out " + dir.s("data") + " --count 6 --size 16 --seed 2") == 0);
    CHECK(fs::exists(dir.s("data") + "/labels.csv"));
    int n_he = 0;
    for (auto& e : fs::directory_iterator(dir.s("data") + "/he")) (void)e, ++n_he;
    CHECK(n_he == 6);

    const std::string data_flags =
        " --he-dir " + dir.s("data/he") + " --ihc-dir " + dir.s("data/ihc");
    REQUIRE(run("train --out " + dir.s("run") + data_flags + kTinyModel) == 0);
    const std::string ckpt = dir.s("run/checkpoint.vsckpt");
    REQUIRE(fs::exists(ckpt));
    CHECK(fs::exists(dir.s("run/loss.csv")));

    const std::string tl_flags = " --checkpoint " + ckpt + " --input " + dir.s("data/he") +
                                 kTinyModel;
    REQUIRE(run("translate --out " + dir.s("gen1") + tl_flags) == 0);
    REQUIRE(run("translate --out " + dir.s("gen2") + tl_flags) == 0);
    int n_out = 0;
    for (auto& e : fs::directory_iterator(dir.s("gen1"))) {
        CHECK(images_identical(e.path(), fs::path(dir.s("gen2")) / e.path().filename()));
        ++n_out;
    }
    CHECK(n_out == 6);

    // Different guidance scale changes the output.
    REQUIRE(run("translate --out " + dir.s("gen3") + tl_flags + " --guidance-scale 0") == 0);
    double total = 0.0;
    for (auto& e : fs::directory_iterator(dir.s("gen1")))
        total += image_l1_diff(e.path(), fs::path(dir.s("gen3")) / e.path().filename());
    CHECK(total > 1e-6);

    // Evaluate generated against truth; identity evaluation gives ideal rows.
    REQUIRE(run("evaluate --generated " + dir.s("gen1") + " --truth " + dir.s("data/ihc") +
                " --report " + dir.s("report.csv") + " --image-size 16") == 0);
    std::ifstream rep(dir.s("report.csv"));
    REQUIRE(rep.good());
    std::string header;
    std::getline(rep, header);
    CHECK(header == "id,label,mse,psnr,ssim,scm");

    REQUIRE(run("evaluate --generated " + dir.s("data/ihc") + " --truth " + dir.s("data/ihc") +
                " --report " + dir.s("ident.csv") + " --image-size 16") == 0);
    std::ifstream ident(dir.s("ident.csv"));
    std::getline(ident, header);
    std::string line;
    int rows = 0;
    while (std::getline(ident, line)) {
        if (line.empty()) continue;
        ++rows;
        std::stringstream ss(line);
        std::string id, label, mse, psnr, ssim, scm;
        std::getline(ss, id, ',');
        std::getline(ss, label, ',');
        std::getline(ss, mse, ',');
        std::getline(ss, psnr, ',');
        std::getline(ss, ssim, ',');
        std::getline(ss, scm, ',');
        CHECK(std::stod(mse) == doctest::Approx(0.0));
        CHECK(std::stod(ssim) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::stod(scm) == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(label != "unlabeled");  // filenames carry the level token
    }
    CHECK(rows == 6);
}

TEST_CASE("translate on an empty input directory succeeds with no outputs") {
    TempDir dir("empty");
    fs::create_directories(dir.s("in"));
    REQUIRE(run("make-synthetic --out " + dir.s("data") + " --count 2 --size 16 --seed 3") == 0);
    REQUIRE(run("train --out " + dir.s("run") + " --he-dir " + dir.s("data/he") + " --ihc-dir " +
                dir.s("data/ihc") + kTinyModel) == 0);
    CHECK(run("translate --checkpoint " + dir.s("run/checkpoint.vsckpt") + " --input " +
              dir.s("in") + " --out " + dir.s("out") + kTinyModel) == 0);
}

TEST_CASE("usage and data errors map to distinct exit codes") {
    TempDir dir("err");
    // Unknown flag -> CLI11 parse error (usage).
    CHECK(run("train --out " + dir.s("x") + " --no-such-flag") != 0);
    // Missing data directory -> data error (2).
    CHECK(run("train --out " + dir.s("run") + " --he-dir " + dir.s("missing_he") + " --ihc-dir " +
              dir.s("missing_ihc") + kTinyModel) == 2);
    // Invalid config value -> config error (1).
    CHECK(run("train --out " + dir.s("run2") + " --he-dir " + dir.s("missing_he") + " --ihc-dir " +
              dir.s("missing_ihc") + kTinyModel + " --cond-drop-p 1.5") == 1);
    // Nonexistent checkpoint -> data error.
    fs::create_directories(dir.s("in"));
    CHECK(run("translate --checkpoint " + dir.s("nope.vsckpt") + " --input " + dir.s("in") +
              kTinyModel) == 2);
}

TEST_CASE("config file and flag precedence") {
    TempDir dir("cfg");
    REQUIRE(run("make-synthetic --out " + dir.s("data") + " --count 2 --size 16 --seed 7") == 0);
    std::ofstream cfg(dir.s("cfg.json"));
    cfg << "{\"model\": {\"hidden_dim\": 16, \"depth\": 2, \"num_heads\": 2, \"d_sem\": 8},\n"
        << " \"codec\": {\"compression_factor\": 4},\n"
        << " \"data\": {\"he_dir\": \"" << dir.s("data/he") << "\", \"ihc_dir\": \""
        << dir.s("data/ihc") << "\", \"image_size\": 16},\n"
        << " \"optimizer\": {\"steps\": 200, \"batch_size\": 2, \"seed\": 1}}";
    cfg.close();
    // --steps overrides the file's 200.
    REQUIRE(run("train --config " + dir.s("cfg.json") + " --steps 4 --out " + dir.s("run")) == 0);
    std::ifstream loss(dir.s("run/loss.csv"));
    REQUIRE(loss.good());
    std::string line;
    int rows = -1;  // header
    while (std::getline(loss, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 4);
    // Unknown config key is a usage/config error.
    std::ofstream bad(dir.s("bad.json"));
    bad << "{\"modle\": {}}";
    bad.close();
    CHECK(run("train --config " + dir.s("bad.json") + " --out " + dir.s("run2")) == 1);
}
