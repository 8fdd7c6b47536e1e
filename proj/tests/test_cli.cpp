// End-to-end runs of the spelunk binary against the checked-in fixtures.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "spelunk/mesh.hpp"
#include "spelunk/render.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace spelunk;

namespace {

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("spelunk_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    /// Runs the binary inside the scratch directory; stdout goes to out.txt.
    int run(const std::string& args, const std::string& env = "") {
        const std::string cmd = "cd '" + dir_.string() + "' && " + env + " '" + SPELUNK_CLI + "' " + args +
                                " > '" + path("out.txt") + "' 2> '" + path("err.txt") + "'";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    }
    std::string stdout_text() const { return slurp(path("out.txt")); }
    nlohmann::json stdout_json() const { return nlohmann::json::parse(stdout_text()); }

    static std::string slurp(const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(in), {}};
    }

    std::vector<std::string> listing() const {
        std::vector<std::string> names;
        for (const auto& e : fs::directory_iterator(dir_)) names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        return names;
    }

    fs::path dir_;
};

std::string fx(const std::string& name) { return "'" + test::fixture(name) + "'"; }

} // namespace

TEST_F(Cli, RenderWritesPpm) {
    ASSERT_EQ(run("render --weights " + fx("box.json") + " --res 64x48 --out img.ppm --mode frustum"), 0);
    const Image img = read_ppm(path("img.ppm"));
    EXPECT_EQ(img.width, 64);
    EXPECT_EQ(img.height, 48);
    EXPECT_GT(stdout_json().at("hits").get<long>(), 0);
    // nothing besides the named output and the captured streams
    EXPECT_EQ(listing(), (std::vector<std::string>{"err.txt", "img.ppm", "out.txt"}));
}

TEST_F(Cli, RenderModesAgreeAndPngWorks) {
    ASSERT_EQ(run("render --weights " + fx("box.json") + " --res 40x40 --out a.ppm --mode per_ray"), 0);
    ASSERT_EQ(run("render --weights " + fx("box.json") + " --res 40x40 --out b.ppm --mode frustum"), 0);
    EXPECT_EQ(read_ppm(path("a.ppm")).rgb, read_ppm(path("b.ppm")).rgb);
    ASSERT_EQ(run("render --weights " + fx("torus_sdf_relu.json") +
                  " --res 24x24 --out c.png --mode fixed_step:0.05 --camera 0,1.5,2.5"),
              0);
    EXPECT_EQ(slurp(path("c.png")).substr(1, 3), "PNG");
}

TEST_F(Cli, MeshMatchesDenseOracle) {
    ASSERT_EQ(run("mesh --weights " + fx("box.json") + " --depth-exp 5 --bounds -1.0123,1.0311 --out mesh.obj"), 0);
    const auto mesh = read_obj(path("mesh.obj"));
    const auto net = load_network(test::fixture("box.json"));
    const auto dense = extract_mesh_dense(net, AABB::cube(3, -1.0123, 1.0311), 5);
    std::string why;
    EXPECT_TRUE(test::same_mesh(mesh, dense, 1e-9, &why)) << why;
    EXPECT_EQ(stdout_json().at("triangles").get<std::size_t>(), dense.triangles.size());
}

TEST_F(Cli, MeshResolutionTooSmallIsRuntimeError) {
    EXPECT_EQ(run("mesh --weights " + fx("box.json") + " --depth-exp 2 --out m.obj"), 1);
    EXPECT_NE(slurp(path("err.txt")).find("ResolutionTooSmall"), std::string::npos);
}

TEST_F(Cli, SampleWritesPointsInBand) {
    ASSERT_EQ(run("sample --weights " + fx("torus_sdf_relu.json") + " --n 500 --band 0.02 --depth 12 --out pts.csv"), 0);
    const auto net = load_network(test::fixture("torus_sdf_relu.json"));
    std::ifstream in(path("pts.csv"));
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        std::stringstream ss(line);
        Vector p(3);
        char comma;
        ss >> p[0] >> comma >> p[1] >> comma >> p[2];
        EXPECT_LT(std::abs(eval_scalar(net, p)), 0.02);
        ++n;
    }
    EXPECT_EQ(n, 500);
    EXPECT_EQ(stdout_json().at("samples").get<int>(), 500);
}

TEST_F(Cli, MassOfBox) {
    ASSERT_EQ(run("mass --weights " + fx("box.json") + " --depth 15 --bounds -1.0123,1.0311"), 0);
    const auto j = stdout_json();
    const double mass = j.at("mass"), bound = j.at("mass_error_bound");
    EXPECT_LE(std::abs(mass - 1.0), bound + 1e-12);
    EXPECT_EQ(j.at("policy"), "affine-full");
}

TEST_F(Cli, IntersectReportsKind) {
    // the fixture box against a shifted copy written by the test
    save_network(build_box_oracle(Vector(Vec3(0.8, 0.1, 0.05)), 0.5), path("b.json"));
    ASSERT_EQ(run("intersect --weights " + fx("box.json") + " --weights-b b.json --delta 0.01"), 0);
    EXPECT_EQ(stdout_json().at("result"), "intersecting");
    save_network(build_box_oracle(Vector(Vec3(1.3, 0.1, 0.05)), 0.5), path("c.json"));
    ASSERT_EQ(run("intersect --weights " + fx("box.json") + " --weights-b c.json --delta 0.01 --bounds -2,2"), 0);
    EXPECT_EQ(stdout_json().at("result"), "disjoint");
}

TEST_F(Cli, ClosestPoint) {
    ASSERT_EQ(run("closest --weights " + fx("box.json") + " --point 1.1,0.2,-0.1 --delta 0.002"), 0);
    const double d = stdout_json().at("distance");
    EXPECT_GE(d, 0.6 - 1e-12);
    EXPECT_LE(d, 0.6 + 0.004);
    EXPECT_EQ(run("closest --weights " + fx("box.json") + " --point 1,2"), 2);
}

TEST_F(Cli, WalkOnSpheres) {
    ASSERT_EQ(run("wos --weights " + fx("box.json") + " --point 0.2,-0.1,0.05 --walks 4000 --boundary x --seed 3"), 0);
    const auto j = stdout_json();
    const double est = j.at("estimate"), se = j.at("standard_error");
    EXPECT_LE(std::abs(est - 0.2), 4 * se);
    EXPECT_EQ(run("wos --weights " + fx("box.json") + " --point 0,0,0 --boundary w"), 2);
}

TEST_F(Cli, BenchCsv) {
    ASSERT_EQ(run("bench --weights " + fx("box.json") + " " + fx("blob_sdf_elu.json") +
                  " --regions 200 --timing-regions 50 --raycast-res 8 --out report.csv"),
              0);
    std::ifstream in(path("report.csv"));
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "variant,dim,time_ratio,region_size,raycast_seconds");
    int rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    EXPECT_EQ(rows, 8);
}

TEST_F(Cli, BenchNeedsNetworks) {
    fs::create_directories(dir_ / "empty");
    EXPECT_EQ(run("bench --weights-dir empty --out r.csv"), 1);
    EXPECT_NE(slurp(path("err.txt")).find("NoNetworks"), std::string::npos);
}

TEST_F(Cli, FuzzPassesAndIsDeterministic) {
    const std::string args = "fuzz --weights-dir '" + std::string(SPELUNK_FIXTURE_DIR) + "' --regions 3000 --seed 9";
    ASSERT_EQ(run(args), 0);
    const std::string first = stdout_text();
    EXPECT_NE(first.find("violations 0"), std::string::npos);
    ASSERT_EQ(run(args, "SPELUNK_THREADS=3"), 0);
    EXPECT_EQ(stdout_text(), first);
}

TEST_F(Cli, UsageErrors) {
    EXPECT_EQ(run(""), 2);
    EXPECT_EQ(run("teleport"), 2);
    EXPECT_EQ(run("render --out x.ppm"), 2);  // missing --weights
    EXPECT_EQ(run("render --weights " + fx("box.json") + " --res 12by12 --out x.ppm"), 2);
    EXPECT_EQ(run("mesh --weights " + fx("box.json") + " --policy affine-wide --out m.obj"), 2);
    EXPECT_EQ(run("render --weights " + fx("box.json") + " --out x.ppm", "SPELUNK_THREADS=many"), 2);
    EXPECT_FALSE(fs::exists(path("x.ppm")));
}

TEST_F(Cli, RuntimeErrors) {
    EXPECT_EQ(run("render --weights missing.json --out x.ppm"), 1);
    EXPECT_EQ(run("render --weights " + fx("box.json") + " --res 8x8 --out no_such_dir/x.ppm"), 1);
    EXPECT_EQ(run("render --weights " + fx("box.json") + " --res 8x8 --up 0,0,1 --out x.ppm"), 1);
}

TEST_F(Cli, HelpDocumentsFlags) {
    ASSERT_EQ(run("--help-all"), 0);
    const auto text = stdout_text();
    for (const char* flag : {"--weights", "--policy", "--delta", "--threads", "--seed", "--res", "--mode",
                             "--depth-exp", "--band", "--weights-b", "--point", "--walks", "--regions"}) {
        EXPECT_NE(text.find(flag), std::string::npos) << flag;
    }
}
