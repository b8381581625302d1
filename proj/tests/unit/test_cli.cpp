#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

#ifndef QB_SAMPLES_DIR
#define QB_SAMPLES_DIR "samples"
#endif

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "qb");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = qb::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir = fs::temp_directory_path() / ("qb_cli_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                           "_" + ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir);
        for (const auto& e : fs::directory_iterator(QB_SAMPLES_DIR)) fs::copy_file(e.path(), dir / e.path().filename());
    }
    void TearDown() override { fs::remove_all(dir); }
    std::string p(const char* name) const { return (dir / name).string(); }

    fs::path dir;
};

}  // namespace

TEST_F(Cli, HelpAndUsage) {
    EXPECT_EQ(run({"--help"}).code, 0);
    EXPECT_EQ(run({}).code, 2);
    EXPECT_EQ(run({"seed", "gen", "--bogus"}).code, 2);
    EXPECT_EQ(run({"seed", "gen", "--n", "3"}).code, 2);
}

TEST_F(Cli, SeedGenAndEval) {
    const auto r = run({"seed", "gen", "--n", "3", "--a", "1,1.5+0.2i,0.75-0.1i", "--rng-seed", "7", "-o", p("s.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("primi"), std::string::npos);
    EXPECT_EQ(slurp(p("s.json")), slurp(p("seed_n3.json")));
    EXPECT_EQ(run({"seed", "gen", "--spec", p("quadric_n3.json"), "--rng-seed", "7", "-o", p("t.json")}).code, 0);
    EXPECT_EQ(slurp(p("t.json")), slurp(p("seed_n3.json")));

    const auto e = run({"seed", "eval", "--seed", p("s.json"), "--grid", "u1=-1:1:3,u2=0:0:1,u3=0:1:2"});
    ASSERT_EQ(e.code, 0) << e.err;
    EXPECT_EQ(std::count(e.out.begin(), e.out.end(), '\n'), 7);
    EXPECT_EQ(e.out.rfind("u1,u2,u3,x1_re,x1_im", 0), 0u);
    EXPECT_EQ(run({"seed", "eval", "--seed", p("s.json"), "--grid", "u1=-1:1:3"}).code, 2);
}

TEST_F(Cli, SeedGenRejectsPole) {
    EXPECT_EQ(run({"seed", "gen", "--n", "2", "--a", "1,0"}).code, 2);
    EXPECT_EQ(run({"seed", "gen", "--n", "2", "--a", "1,2,3"}).code, 2);
}

TEST_F(Cli, BacklundApplyAndInverse) {
    const auto r = run({"backlund", "apply", "--seed", p("seed_n3.json"), "--z", "0.5+0.1i", "--skew",
                        p("transform_n3.json"), "-o", p("l.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("orthogonality"), std::string::npos);
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
    const auto chained = run({"backlund", "apply", "--lattice", p("l.json"), "--parent", "1", "--z", "-0.7+0.2i",
                              "--rng-seed", "4", "-o", p("l2.json")});
    ASSERT_EQ(chained.code, 0) << chained.err;
    const auto inv = run({"backlund", "apply", "--lattice", p("l.json"), "--parent", "1", "--z", "0.5+0.1i",
                          "--skew", p("transform_n3.json"), "--negate-root"});
    ASSERT_EQ(inv.code, 0) << inv.err;
    EXPECT_NE(inv.out.find("inverse_recovers_parent"), std::string::npos);
    EXPECT_EQ(run({"backlund", "apply", "--seed", p("seed_n3.json"), "--z", "1", "--rng-seed", "1"}).code, 2);
    EXPECT_EQ(run({"backlund", "apply", "--seed", p("missing.json"), "--z", "0.5", "--rng-seed", "1"}).code, 2);
}

TEST_F(Cli, LatticeCommands) {
    const auto perm = run({"lattice", "permute", "--lattice", p("lattice_n3.json"), "--nodes", "1,2", "-o", p("a.json")});
    ASSERT_EQ(perm.code, 0) << perm.err;
    EXPECT_NE(perm.out.find("path_independence"), std::string::npos);
    EXPECT_EQ(slurp(p("a.json")), slurp(p("lattice_n3.json")));
    const auto mob = run({"lattice", "mobius", "--lattice", p("lattice_n3.json"), "--nodes", "1,2,3"});
    ASSERT_EQ(mob.code, 0) << mob.err;
    EXPECT_NE(mob.out.find("E1=E2=E4"), std::string::npos);
    EXPECT_EQ(run({"lattice", "mobius", "--lattice", p("lattice_n3.json"), "--nodes", "1,2,4"}).code, 2);
    EXPECT_EQ(run({"lattice", "permute", "--lattice", p("lattice_n3.json"), "--nodes", "1,1"}).code, 2);
}

TEST_F(Cli, VerifyWritesReport) {
    const auto r = run({"verify", "--input", p("lattice_n3.json"), "--suite", "all", "--probes", "2", "-o", p("r.json")});
    ASSERT_EQ(r.code, 0) << r.out << r.err;
    const std::string report = slurp(p("r.json"));
    EXPECT_NE(report.find("\"overall\": true"), std::string::npos);
    EXPECT_EQ(run({"verify", "--input", p("seed_n3.json"), "--suite", "seed"}).code, 0);
    EXPECT_EQ(run({"verify", "--input", p("soliton_n3.json"), "--suite", "soliton"}).code, 0);
    EXPECT_EQ(run({"verify", "--input", p("seed_n3.json"), "--suite", "bogus"}).code, 2);
}

TEST_F(Cli, VerifyToleranceFailureExitCode) {
    ::setenv("QB_TOL", "1e-30", 1);
    const auto r = run({"verify", "--input", p("lattice_n3.json"), "--suite", "leaf", "--probes", "2"});
    ::unsetenv("QB_TOL");
    EXPECT_EQ(r.code, 1) << r.out << r.err;
}

TEST_F(Cli, Soliton) {
    const auto r = run({"soliton", "--param", p("soliton_n3.json"), "--grid", "u1=-1:1:3,u2=-1:1:3,u3=0:0:1", "-o",
                        p("s.csv"), "--report", p("sr.json")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(run({"soliton", "--sigma", "1.5707963267948966", "--n", "3", "--rng-seed", "2", "--save-param",
                   p("sp.json")})
                  .code,
              0);
    EXPECT_EQ(slurp(p("sp.json")), slurp(p("soliton_n3.json")));
    EXPECT_EQ(run({"soliton", "--sigma", "0", "--n", "3", "--rng-seed", "2"}).code, 2);
}
