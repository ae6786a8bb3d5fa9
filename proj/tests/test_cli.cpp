#include <gtest/gtest.h>

#include <filesystem>

#include "foilgen/foilgen.hpp"
#include "test_util.hpp"

using namespace foilgen;
using testutil::run_cli;
namespace fs = std::filesystem;

namespace {

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

// A workspace with a 40-airfoil dataset and a briefly trained model.
class Workspace : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        dir_ = new testutil::TempDir();
        fs::create_directories(*dir_ / "raw");
        names_ = testutil::copy_airfoils(*dir_ / "raw", 40);
        ASSERT_EQ(run_cli({"preprocess", "--input", "raw", "--output", "dataset.csv"}, dir_->path()).code, 0);
        ASSERT_EQ(run_cli({"train", "--epochs", "3", "--seed", "1"}, dir_->path()).code, 0);
    }
    static void TearDownTestSuite() {
        delete dir_;
        dir_ = nullptr;
    }
    static std::string path(const std::string& name) { return *dir_ / name; }
    static testutil::RunResult run(const std::vector<std::string>& args) { return run_cli(args, dir_->path()); }

    static inline testutil::TempDir* dir_ = nullptr;
    static inline std::vector<std::string> names_;
};

}  // namespace

TEST(CliPreprocess, ThreeValidFiles) {
    testutil::TempDir dir;
    fs::create_directories(dir / "raw");
    testutil::copy_airfoils(dir / "raw", 3);
    const auto r = run_cli({"preprocess", "--input", "raw", "--output", "ds.csv"}, dir.path());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_dataset(dir / "ds.csv").size(), 3u);
}

TEST(CliPreprocess, MalformedFileIsReported) {
    testutil::TempDir dir;
    fs::create_directories(dir / "raw");
    testutil::copy_airfoils(dir / "raw", 2);
    testutil::write_file(dir / "raw/zz_broken.dat", "broken\n1.0 0.0\nnot numbers here\n");
    const auto r = run_cli({"preprocess", "--input", "raw", "--output", "ds.csv"}, dir.path());
    EXPECT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_dataset(dir / "ds.csv").size(), 2u);
    EXPECT_NE(r.err.find("zz_broken.dat"), std::string::npos) << r.err;
}

TEST(CliPreprocess, EmptyDirectory) {
    testutil::TempDir dir;
    fs::create_directories(dir / "raw");
    const auto r = run_cli({"preprocess", "--input", "raw"}, dir.path());
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("NoFilesFound"), std::string::npos) << r.err;
}

TEST(CliUsage, MissingSubcommandAndBadFlag) {
    testutil::TempDir dir;
    EXPECT_EQ(run_cli({}, dir.path()).code, 2);
    EXPECT_EQ(run_cli({"train", "--epochs", "many"}, dir.path()).code, 2);
    EXPECT_EQ(run_cli({"synthesize", "--mode", "dream"}, dir.path()).code, 2);
    EXPECT_EQ(run_cli({"--help"}, dir.path()).code, 0);
}

TEST(CliTrain, InvalidDatasetHeader) {
    testutil::TempDir dir;
    testutil::write_file(dir / "dataset.csv", "name,x\nfoo,1\n");
    const auto r = run_cli({"train", "--epochs", "1"}, dir.path());
    EXPECT_EQ(r.code, 2);
    EXPECT_FALSE(r.err.empty());
}

TEST_F(Workspace, TrainFiveEpochs) {
    const auto r = run({"train", "--epochs", "5", "--output", "five.ckpt", "--log", "five.csv"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(path("five.ckpt")));
    const auto log = testutil::read_file(path("five.csv"));
    EXPECT_EQ(count_lines(log), 6u);
    EXPECT_EQ(log.rfind("epoch,recon,prior,layer,gan,learning_rate\n", 0), 0u);
    EXPECT_EQ(load_checkpoint(path("five.ckpt")).epoch, 5);
}

TEST_F(Workspace, TrainVaeHasNoDiscriminator) {
    ASSERT_EQ(run({"train", "--model", "vae", "--epochs", "2", "--output", "vae.ckpt", "--log", "vae.csv"}).code, 0);
    const auto names = checkpoint_tensor_names(read_binary_file(path("vae.ckpt")));
    EXPECT_FALSE(names.empty());
    for (const auto& n : names) EXPECT_EQ(n.rfind("discriminator", 0), std::string::npos) << n;
    const auto full = checkpoint_tensor_names(read_binary_file(path("model.ckpt")));
    EXPECT_TRUE(std::any_of(full.begin(), full.end(), [](const std::string& n) { return n.rfind("discriminator", 0) == 0; }));
}

TEST_F(Workspace, ReconstructPrintsMse) {
    const auto r = run({"synthesize", "--mode", "reconstruct", "--names", names_[0], "--out-dir", "rec"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("reconstruction MSE"), std::string::npos);
    EXPECT_TRUE(fs::exists(path("rec/reconstruct.svg")));
}

TEST_F(Workspace, InterpolateMidpointMatchesDecoder) {
    const auto& a = names_[1];
    const auto& b = names_[2];
    const auto r = run({"synthesize", "--mode", "interpolate", "--names", a + "," + b, "--nu", "0.5", "--out-dir", "mid"});
    ASSERT_EQ(r.code, 0) << r.err;
    fs::path file;
    for (const auto& e : fs::directory_iterator(path("mid")))
        if (e.path().extension() == ".dat") file = e.path();
    ASSERT_FALSE(file.empty());

    const auto ds = read_dataset(path("dataset.csv"));
    const auto ck = load_checkpoint(path("model.ckpt"));
    const Matrix mu = encode(ck.encoder, ds.rows).mu;
    const LatentVector z = interpolate2(mu.row(static_cast<Eigen::Index>(ds.index_of(a))).transpose(),
                                        mu.row(static_cast<Eigen::Index>(ds.index_of(b))).transpose(), 0.5);
    const auto expect = to_airfoil("x", decode(ck.decoder, z.transpose()).row(0).transpose(), ck.scale, cosine_grid());
    const auto got = read_dat_file(file.string());
    ASSERT_EQ(got.points.size(), expect.points.size());
    for (std::size_t i = 0; i < got.points.size(); ++i) {
        EXPECT_NEAR(got.points[i].x, expect.points[i].x, 1e-12);
        EXPECT_NEAR(got.points[i].y, expect.points[i].y, 1e-12);
    }
    std::string why;
    EXPECT_TRUE(testutil::well_formed_xml(testutil::read_file(path("mid/interpolate.svg")), &why)) << why;
}

TEST_F(Workspace, TripletCoefficientsMustSumToOne) {
    const auto names = names_[0] + "," + names_[1] + "," + names_[2];
    const auto bad = run({"synthesize", "--mode", "interpolate", "--names", names, "--coeffs", "0.5,0.5,0.5", "--out-dir", "tri"});
    EXPECT_EQ(bad.code, 2);
    EXPECT_NE(bad.err.find("BadCoefficients"), std::string::npos) << bad.err;
    const auto ok = run({"synthesize", "--mode", "interpolate", "--names", names, "--coeffs", "0.2,0.3,0.5", "--out-dir", "tri"});
    EXPECT_EQ(ok.code, 0) << ok.err;
}

TEST_F(Workspace, UnknownAirfoilName) {
    const auto r = run({"synthesize", "--mode", "reconstruct", "--names", "no_such_airfoil", "--out-dir", "x"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("UnknownAirfoil"), std::string::npos);
}

TEST_F(Workspace, SamplesAreSeeded) {
    ASSERT_EQ(run({"synthesize", "--mode", "sample", "--count", "4", "--seed", "3", "--out-dir", "s1"}).code, 0);
    ASSERT_EQ(run({"synthesize", "--mode", "sample", "--count", "4", "--seed", "3", "--out-dir", "s2"}).code, 0);
    for (int i = 0; i < 4; ++i) {
        const auto f = "sample_" + std::to_string(i) + ".dat";
        EXPECT_EQ(testutil::read_file(path("s1/" + f)), testutil::read_file(path("s2/" + f)));
    }
}

TEST_F(Workspace, ClusterWritesTwelveCentroids) {
    const auto r = run({"cluster", "--k", "12", "--out-dir", "clusters"});
    ASSERT_EQ(r.code, 0) << r.err;
    int dats = 0;
    for (const auto& e : fs::directory_iterator(path("clusters")))
        if (e.path().extension() == ".dat") ++dats;
    EXPECT_EQ(dats, 12);
    EXPECT_EQ(count_lines(testutil::read_file(path("clusters/clusters.csv"))), 41u);
    for (const char* svg : {"clusters/centroids.svg", "clusters/clusters.svg"}) {
        std::string why;
        EXPECT_TRUE(testutil::well_formed_xml(testutil::read_file(path(svg)), &why)) << svg << ": " << why;
    }
    EXPECT_EQ(run({"cluster", "--k", "41", "--out-dir", "clusters"}).code, 2);
}

TEST_F(Workspace, FidRealVsRealIsZero) {
    const auto r = run({"fid", "--real-vs-real"});
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(r.out.rfind("fid ", 0), 0u) << r.out;
    const double v = std::stod(r.out.substr(4));
    EXPECT_LE(v, 1e-6);
    const auto g = run({"fid", "--samples", "50"});
    ASSERT_EQ(g.code, 0) << g.err;
    EXPECT_GT(std::stod(g.out.substr(4)), 0.0);
}

TEST_F(Workspace, FidNeedsDiscriminator) {
    ASSERT_EQ(run({"train", "--model", "vae", "--epochs", "1", "--output", "v1.ckpt", "--log", "v1.csv"}).code, 0);
    EXPECT_EQ(run({"fid", "--checkpoint", "v1.ckpt"}).code, 2);
    EXPECT_EQ(run({"fid", "--checkpoint", "v1.ckpt", "--features-from", "model.ckpt", "--samples", "20"}).code, 0);
}

TEST_F(Workspace, EvalPanel) {
    const auto r = run({"eval", "--evaluator", "panel", "--samples", "3", "--real", "2", "--out-dir", "ev"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto csv = testutil::read_file(path("ev/eval.csv"));
    EXPECT_EQ(count_lines(csv), 6u);
    EXPECT_NE(csv.find(",panel\n"), std::string::npos);
    std::string why;
    EXPECT_TRUE(testutil::well_formed_xml(testutil::read_file(path("ev/eval.svg")), &why)) << why;
}

TEST_F(Workspace, OptimizeSurrogateIsByteIdentical) {
    const std::vector<std::string> base{"optimize", "--evaluator", "surrogate", "--generations", "15", "--population", "12",
                                        "--seed", "4"};
    auto a = base, b = base;
    a.insert(a.end(), {"--out-dir", "opt_a"});
    b.insert(b.end(), {"--out-dir", "opt_b", "--parallelism", "4"});
    ASSERT_EQ(run(a).code, 0);
    ASSERT_EQ(run(b).code, 0);
    for (const char* f : {"history.csv", "best_latent.txt", "best.dat", "fitness.svg", "coefficients.svg"})
        EXPECT_EQ(testutil::read_file(path(std::string("opt_a/") + f)), testutil::read_file(path(std::string("opt_b/") + f)))
            << f;
    EXPECT_EQ(count_lines(testutil::read_file(path("opt_a/history.csv"))), 16u);
    std::string why;
    EXPECT_TRUE(testutil::well_formed_xml(testutil::read_file(path("opt_a/fitness.svg")), &why)) << why;
}

TEST_F(Workspace, OptimizePanelWithDecoder) {
    // Three epochs leave the decoder too noisy for a panel model, so pin its
    // output to a real airfoil: zero final weights, bias = atanh(target row).
    auto m = load_checkpoint(path("model.ckpt"));
    const auto ds = read_dataset(path("dataset.csv"));
    auto& last = m.decoder.net.layers.back();
    last.weights.setZero();
    last.bias = (0.99 * ds.rows.row(0).transpose()).array().atanh().matrix();
    save_checkpoint(m, path("pinned.ckpt"));
    const auto r = run({"optimize", "--evaluator", "panel", "--checkpoint", "pinned.ckpt", "--generations", "2",
                        "--population", "4", "--out-dir", "optp"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(path("optp/best.dat")));
    const auto best = parse_dat(testutil::read_file(path("optp/best.dat")));
    const auto expect = to_airfoil("x", 0.99 * ds.rows.row(0).transpose(), m.scale, cosine_grid());
    ASSERT_EQ(best.points.size(), expect.points.size());
    for (std::size_t i = 0; i < best.points.size(); ++i) EXPECT_NEAR(best.points[i].y, expect.points[i].y, 1e-9);
    // The untrained decoder's outlines are rejected, and a generation of failures is an error.
    const auto noisy = run({"optimize", "--evaluator", "panel", "--generations", "2", "--population", "4", "--out-dir", "optn"});
    if (noisy.code != 0) {
        EXPECT_EQ(noisy.code, 1);
        EXPECT_NE(noisy.err.find("EvaluatorFailure"), std::string::npos) << noisy.err;
    }
    EXPECT_EQ(run({"optimize", "--evaluator", "surrogate", "--cd-target", "0", "--out-dir", "optz"}).code, 2);
}

TEST_F(Workspace, CorruptCheckpoint) {
    auto bytes = read_binary_file(path("model.ckpt"));
    testutil::write_file(path("bad.ckpt"), bytes.substr(0, bytes.size() - 100));
    const auto r = run({"synthesize", "--mode", "sample", "--checkpoint", "bad.ckpt", "--out-dir", "bad"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("CorruptChecksum"), std::string::npos);
}
