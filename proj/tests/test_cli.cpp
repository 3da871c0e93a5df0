#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct RunResult {
    int code = -1;
    std::vector<json> lines;
};

class CliTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("polarcube_cli_" + std::to_string(::getpid()) + "_" +
                ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    RunResult run(const std::string& args) const {
        const std::string cmd = std::string("cd '") + dir_.string() + "' && '" + POLARCUBE_CLI_PATH + "' " + args + " 2>/dev/null";
        RunResult r;
        FILE* p = ::popen(cmd.c_str(), "r");
        if (!p) return r;
        std::string out;
        char buf[4096];
        while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
        const int status = ::pclose(p);
        r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        std::istringstream in(out);
        for (std::string line; std::getline(in, line);)
            if (!line.empty()) r.lines.push_back(json::parse(line));
        return r;
    }

    static json summary(const RunResult& r) {
        EXPECT_FALSE(r.lines.empty());
        return r.lines.empty() ? json() : r.lines.back().at("summary");
    }

    static std::vector<std::vector<std::string>> read_csv(const std::string& p) {
        std::vector<std::vector<std::string>> rows;
        std::ifstream in(p);
        for (std::string line; std::getline(in, line);) {
            std::vector<std::string> cells;
            std::istringstream ls(line);
            for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
            rows.push_back(cells);
        }
        return rows;
    }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), {}};
    }

    fs::path dir_;
};

} // namespace

TEST_F(CliTest, ResolvedConfigComesFirst) {
    const RunResult r = run("roundtrip --seed 3 --threads 2");
    ASSERT_EQ(r.code, 0);
    ASSERT_EQ(r.lines.size(), 2u);
    const json& cfg = r.lines.front().at("resolved_config");
    EXPECT_EQ(cfg.at("seed"), 3);
    EXPECT_EQ(cfg.at("threads"), 2);
    EXPECT_EQ(cfg.at("camera").at("type"), "hyperspectral");
}

TEST_F(CliTest, NoiselessRoundTripIsExact) {
    const RunResult r = run("roundtrip --seed 1");
    ASSERT_EQ(r.code, 0);
    const json s = summary(r);
    EXPECT_LT(s.at("max_relative_error").get<double>(), 1e-5);
    EXPECT_EQ(s.at("valid_fraction").get<double>(), 1.0);
}

TEST_F(CliTest, ConfigFileAndFlagsCompose) {
    std::ofstream(path("cfg.json")) << R"({"seed": 9, "camera": {"height": 16, "width": 20, "channels": 4}})";
    const RunResult r = run("--config cfg.json roundtrip --noise 0.001");
    ASSERT_EQ(r.code, 0);
    const json& cfg = r.lines.front().at("resolved_config");
    EXPECT_EQ(cfg.at("camera").at("width"), 20);
    EXPECT_EQ(cfg.at("noise").at("gaussian_sigma"), 0.001);
    EXPECT_EQ(cfg.at("seed"), 9);
}

TEST_F(CliTest, SimulateReconstructValidatePipeline) {
    ASSERT_EQ(run("simulate --seed 4 --out raw.spsi --scene-out scene.spsi").code, 0);
    ASSERT_EQ(run("reconstruct raw.spsi --out cube.spsi").code, 0);
    const RunResult v = run("validate cube.spsi");
    ASSERT_EQ(v.code, 0);
    EXPECT_EQ(summary(v).at("valid_fraction").get<double>(), 1.0);
}

TEST_F(CliTest, RerunsAreByteIdentical) {
    ASSERT_EQ(run("simulate --seed 5 --noise 0.01 --out a.spsi").code, 0);
    ASSERT_EQ(run("simulate --seed 5 --noise 0.01 --out b.spsi --threads 3").code, 0);
    EXPECT_EQ(slurp(path("a.spsi")), slurp(path("b.spsi")));
    ASSERT_EQ(run("reconstruct a.spsi --out a.cube").code, 0);
    ASSERT_EQ(run("stats a.cube --feature s1 --out a.csv").code, 0);
    ASSERT_EQ(run("stats a.cube --feature s1 --out b.csv").code, 0);
    EXPECT_EQ(slurp(path("a.csv")), slurp(path("b.csv")));
}

TEST_F(CliTest, AolpGradientSupportIsHalfPi) {
    ASSERT_EQ(run("simulate --seed 6 --out raw.spsi").code, 0);
    ASSERT_EQ(run("reconstruct raw.spsi --out cube.spsi").code, 0);
    const RunResult r = run("stats cube.spsi --feature aolp-gradient --bins 31 --out g.csv");
    ASSERT_EQ(r.code, 0);
    const auto t = read_csv(path("g.csv"));
    ASSERT_EQ(t.size(), 32u);
    EXPECT_DOUBLE_EQ(std::stod(t[1][0]), -std::numbers::pi / 2.0);
    EXPECT_DOUBLE_EQ(std::stod(t[31][1]), std::numbers::pi / 2.0);
    EXPECT_GT(summary(r).at("samples").get<double>(), 0.0);
}

TEST_F(CliTest, CodecCommandsReportRate) {
    ASSERT_EQ(run("simulate --seed 7 --out raw.spsi --scene-out scene.spsi").code, 0);
    ASSERT_EQ(run("pca-fit scene.spsi --patch 4 --components 6 --out cb.spsi").code, 0);
    const RunResult p = run("pca-code scene.spsi --codebook cb.spsi --out art.spsi");
    ASSERT_EQ(p.code, 0);
    EXPECT_EQ(summary(p).at("bpp_raw").get<double>(), 2688.0);
    ASSERT_EQ(run("inr-fit scene.spsi --seed 1 --steps 20 --out m.spsi --loss-csv loss.csv").code, 0);
    const RunResult d = run("inr-code m.spsi --reference scene.spsi --out d.spsi");
    ASSERT_EQ(d.code, 0);
    EXPECT_TRUE(std::isfinite(summary(d).at("mse").get<double>()));
}

TEST_F(CliTest, ExitCodes) {
    EXPECT_EQ(run("roundtrip").code, 2);
    EXPECT_EQ(run("no-such-command").code, 2);
    EXPECT_EQ(run("reconstruct missing.spsi --out x.spsi").code, 3);
    std::ofstream(path("bad.json")) << R"({"camera": {"lenses": 3}})";
    EXPECT_EQ(run("--config bad.json roundtrip --seed 1").code, 2);
    std::ofstream(path("typed.json")) << R"({"camera": {"height": "tall"}})";
    EXPECT_EQ(run("--config typed.json roundtrip --seed 1").code, 2);
    std::ofstream(path("junk.spsi")) << "not a container";
    EXPECT_EQ(run("validate junk.spsi").code, 3);
}
