#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "foilgen/latent.hpp"

using namespace foilgen;

namespace {

Matrix gaussian(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double s = 1.0) {
    return s * standard_normal(r, c, rng);
}

LatentVector vec(std::mt19937_64& rng, Eigen::Index d = 32) { return gaussian(d, 1, rng); }

Errc code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no foilgen::Error thrown";
    return Errc::MalformedFile;
}

Matrix random_rotation(Eigen::Index d, std::mt19937_64& rng) {
    Eigen::HouseholderQR<Matrix> qr(gaussian(d, d, rng));
    return qr.householderQ();
}

}  // namespace

TEST(Interpolate, Examples) {
    std::mt19937_64 rng(1);
    const auto z1 = vec(rng), z2 = vec(rng);
    EXPECT_EQ(interpolate2(z1, z2, 1.0), z1);
    EXPECT_EQ(interpolate2(z1, z2, 0.0), z2);
    EXPECT_TRUE(interpolate2(z1, z1, 0.3).isApprox(z1, 1e-15));
    EXPECT_TRUE(interpolate2(z1, z1, -4.0).isApprox(z1, 1e-14));
    EXPECT_TRUE(interpolate2(z1, z2, 2.0).isApprox(2 * z1 - z2, 1e-15));
    EXPECT_TRUE(interpolate2(z1, z2, 0.5).isApprox(0.5 * (z1 + z2), 1e-15));
    EXPECT_EQ(code_of([&] { interpolate2(z1, vec(rng, 31), 0.5); }), Errc::DimensionMismatch);
}

TEST(Interpolate, SwapSymmetryIsExact) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> nu_dist(-10.0, 2.0);
    for (int i = 0; i < 2000; ++i) {
        const auto z1 = vec(rng), z2 = vec(rng);
        const double nu = nu_dist(rng);
        EXPECT_EQ(interpolate2(z1, z2, nu), interpolate2(z2, z1, 1.0 - nu)) << "nu=" << nu;
    }
    const auto z1 = vec(rng), z2 = vec(rng);
    for (double nu : {0.0, 0.1, 0.5, 0.7, 1.0, 2.0, -1.0})
        EXPECT_EQ(interpolate2(z1, z2, nu), interpolate2(z2, z1, 1.0 - nu)) << "nu=" << nu;
}

TEST(Interpolate, ThreeWay) {
    std::mt19937_64 rng(3);
    const auto z1 = vec(rng), z2 = vec(rng), z3 = vec(rng);
    EXPECT_EQ(interpolate3(z1, z2, z3, 1, 0, 0), z1);
    EXPECT_TRUE(interpolate3(z1, z1, z1, 1.0 / 3, 1.0 / 3, 1.0 / 3).isApprox(z1, 1e-15));
    EXPECT_TRUE(interpolate3(z1, z2, z3, 0.2, 0.3, 0.5).isApprox(0.2 * z1 + 0.3 * z2 + 0.5 * z3, 1e-15));
    EXPECT_EQ(code_of([&] { interpolate3(z1, z2, z3, 0.5, 0.5, 0.5); }), Errc::NotAffine);
    EXPECT_EQ(code_of([&] { interpolate3(z1, z2, z3, 0.5, 0.5, 1e-8); }), Errc::NotAffine);
    interpolate3(z1, z2, z3, 0.5, 0.5, 1e-10);
    EXPECT_EQ(code_of([&] { interpolate3(z1, z2, z3, std::nan(""), 0.5, 0.5); }), Errc::NotAffine);
}

TEST(Sampling, DeterministicAndInRange) {
    std::mt19937_64 rng(4);
    auto dec = make_decoder(rng);
    EXPECT_EQ(sample_airfoils(dec, 0, 1).rows(), 0);
    const Matrix a = sample_airfoils(dec, 100, 7);
    EXPECT_EQ(a, sample_airfoils(dec, 100, 7));
    EXPECT_NE(a, sample_airfoils(dec, 100, 8));
    EXPECT_EQ(a.rows(), 100);
    EXPECT_EQ(a.cols(), 200);
    EXPECT_TRUE(a.allFinite());
    EXPECT_LT(a.cwiseAbs().maxCoeff(), 1.0);
}

TEST(KMeans, SingleClusterIsMean) {
    std::mt19937_64 rng(5);
    const Matrix p = gaussian(50, 4, rng);
    const auto r = kmeans(p, 1, 0);
    EXPECT_TRUE(r.centroids.row(0).isApprox(p.colwise().mean(), 1e-12));
    const double expect = (p.rowwise() - p.colwise().mean()).squaredNorm();
    EXPECT_NEAR(r.inertia, expect, 1e-9);
}

TEST(KMeans, TwoBlobsMatchBruteForce) {
    std::mt19937_64 rng(6);
    Matrix p = gaussian(80, 32, rng, 0.1);
    p.topRows(40).array() += 5.0;
    const auto r = kmeans(p, 2, 11);
    // Every assignment is the nearest centroid.
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        const double d0 = (p.row(i) - r.centroids.row(0)).squaredNorm();
        const double d1 = (p.row(i) - r.centroids.row(1)).squaredNorm();
        EXPECT_EQ(r.assignments[static_cast<std::size_t>(i)], d0 <= d1 ? 0u : 1u);
    }
    for (std::size_t i = 1; i < 40; ++i) EXPECT_EQ(r.assignments[i], r.assignments[0]);
    for (std::size_t i = 41; i < 80; ++i) EXPECT_EQ(r.assignments[i], r.assignments[40]);
    EXPECT_NE(r.assignments[0], r.assignments[40]);
}

TEST(KMeans, KEqualsNHasZeroInertia) {
    std::mt19937_64 rng(7);
    const Matrix p = gaussian(9, 3, rng);
    EXPECT_NEAR(kmeans(p, 9, 3).inertia, 0.0, 1e-12);
}

TEST(KMeans, InertiaMonotoneAndRecomputed) {
    std::mt19937_64 rng(8);
    const Matrix p = gaussian(300, 32, rng);
    const auto r = kmeans(p, 12, 42);
    for (std::size_t i = 1; i < r.inertia_history.size(); ++i)
        EXPECT_LE(r.inertia_history[i], r.inertia_history[i - 1] + 1e-9);
    double sum = 0.0;
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        sum += (p.row(i) - r.centroids.row(static_cast<Eigen::Index>(r.assignments[static_cast<std::size_t>(i)]))).squaredNorm();
        Eigen::Index best;
        (r.centroids.rowwise() - p.row(i)).rowwise().squaredNorm().minCoeff(&best);
        EXPECT_EQ(static_cast<std::size_t>(best), r.assignments[static_cast<std::size_t>(i)]);
    }
    EXPECT_NEAR(r.inertia, sum, 1e-9);
    EXPECT_EQ(kmeans(p, 12, 42).assignments, r.assignments);
}

TEST(KMeans, Errors) {
    EXPECT_EQ(code_of([] { kmeans(Matrix::Zero(3, 2), 4, 0); }), Errc::TooFewPoints);
    EXPECT_EQ(code_of([] { kmeans(Matrix::Zero(3, 2), 0, 0); }), Errc::TooFewPoints);
    // Duplicate points still produce k centroids.
    const auto r = kmeans(Matrix::Zero(5, 2), 3, 0);
    EXPECT_EQ(r.centroids.rows(), 3);
    EXPECT_EQ(r.inertia, 0.0);
}

TEST(Pca, LineThroughOrigin) {
    std::mt19937_64 rng(9);
    const Eigen::RowVectorXd dir = gaussian(1, 200, rng).normalized();
    const Eigen::VectorXd t = gaussian(40, 1, rng);
    const Matrix data = t * dir;
    const auto m = pca_fit(data, 32);
    EXPECT_NEAR(m.explained_variance[0], m.explained_variance.sum(), 1e-12 * m.explained_variance[0]);
    EXPECT_NEAR(std::abs(m.components.row(0).dot(dir)), 1.0, 1e-12);
    EXPECT_LE((pca_decode(m, pca_encode(m, data)) - data).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Pca, OrthonormalOrderedComponents) {
    std::mt19937_64 rng(10);
    const Matrix data = gaussian(100, 200, rng) * gaussian(200, 200, rng, 0.1);
    const auto m = pca_fit(data);
    EXPECT_EQ(m.components.rows(), 32);
    EXPECT_LE((m.components * m.components.transpose() - Matrix::Identity(32, 32)).cwiseAbs().maxCoeff(), 1e-9);
    for (Eigen::Index i = 1; i < 32; ++i) EXPECT_LE(m.explained_variance[i], m.explained_variance[i - 1]);
    EXPECT_GE(m.explained_variance.minCoeff(), 0.0);
}

TEST(Pca, RotationInvariantSpectrum) {
    std::mt19937_64 rng(11);
    const Matrix data = gaussian(60, 40, rng) * gaussian(40, 40, rng, 0.3);
    const Matrix rot = random_rotation(40, rng);
    const auto a = pca_fit(data, 20);
    const auto b = pca_fit(data * rot, 20);
    EXPECT_LE((a.explained_variance - b.explained_variance).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Pca, ProjectionIdempotent) {
    std::mt19937_64 rng(12);
    const Matrix data = gaussian(80, 50, rng);
    const auto m = pca_fit(data, 10);
    const Matrix once = pca_decode(m, pca_encode(m, data));
    const Matrix twice = pca_decode(m, pca_encode(m, once));
    EXPECT_LE((once - twice).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Pca, BeatsRandomSubspaces) {
    std::mt19937_64 rng(13);
    const Matrix data = gaussian(120, 60, rng) * gaussian(60, 60, rng, 0.2);
    const auto m = pca_fit(data, 8);
    const double best = pca_reconstruction_mse(m, data);
    for (int trial = 0; trial < 20; ++trial) {
        PcaModel r = m;
        Eigen::HouseholderQR<Matrix> qr(gaussian(60, 8, rng));
        r.components = Matrix(qr.householderQ()).leftCols(8).transpose();
        EXPECT_LE(best, pca_reconstruction_mse(r, data));
    }
}

TEST(Pca, Errors) {
    EXPECT_EQ(code_of([] { pca_fit(Matrix::Zero(32, 200)); }), Errc::InsufficientData);
    pca_fit(Matrix::Random(33, 200));
    const auto m = pca_fit(Matrix::Random(40, 200));
    EXPECT_EQ(code_of([&] { pca_encode(m, Matrix::Zero(1, 199)); }), Errc::DimensionMismatch);
    EXPECT_EQ(code_of([&] { pca_decode(m, Matrix::Zero(1, 31)); }), Errc::DimensionMismatch);
}

TEST(Fid, IdenticalSetsAreZero) {
    std::mt19937_64 rng(14);
    const Matrix f = gaussian(200, 128, rng);
    EXPECT_LE(fid(f, f), 1e-6);
}

TEST(Fid, OneDimensionalClosedForm) {
    // Equal spreads: distance reduces to the squared mean gap.
    Matrix a(4, 1), b(4, 1);
    a << -1, 1, -1, 1;
    b << 0, 2, 0, 2;
    EXPECT_NEAR(fid(a, b), 1.0, 1e-12);
    // General 1-D: (ma - mb)^2 + (sa - sb)^2.
    std::mt19937_64 rng(15);
    const Matrix x = gaussian(500, 1, rng);
    const Matrix y = (gaussian(500, 1, rng).array() * 2.0 + 3.0).matrix();
    auto sd = [](const Matrix& v) { return std::sqrt((v.array() - v.mean()).square().sum() / (v.rows() - 1)); };
    const double expect = std::pow(x.mean() - y.mean(), 2) + std::pow(sd(x) - sd(y), 2);
    EXPECT_NEAR(fid(x, y), expect, 1e-10);
}

TEST(Fid, DiagonalClosedFormAndSymmetry) {
    std::mt19937_64 rng(16);
    const Matrix a = gaussian(300, 6, rng);
    const Matrix b = (gaussian(300, 6, rng) * Eigen::VectorXd::LinSpaced(6, 0.5, 2.0).asDiagonal()).array() + 0.3;
    EXPECT_NEAR(fid(a, b), fid(b, a), 1e-9);
    // Brute-force oracle through the symmetric form Sa^(1/2) Sb Sa^(1/2).
    auto cov = [](const Matrix& x) {
        const Matrix c = x.rowwise() - x.colwise().mean();
        return Matrix(c.transpose() * c / double(x.rows() - 1));
    };
    auto sqrtm = [](const Matrix& s) {
        Eigen::SelfAdjointEigenSolver<Matrix> es(s);
        return Matrix(es.eigenvectors() * es.eigenvalues().cwiseMax(0).cwiseSqrt().asDiagonal() *
                      es.eigenvectors().transpose());
    };
    const Matrix sa = cov(a), sb = cov(b);
    const Matrix ra = sqrtm(sa);
    const Matrix inner = ra * sb * ra;
    const double expect = (a.colwise().mean() - b.colwise().mean()).squaredNorm() + sa.trace() + sb.trace() -
                          2 * sqrtm(0.5 * (inner + inner.transpose())).trace();
    EXPECT_NEAR(fid(a, b), expect, 1e-9);
}

TEST(Fid, Errors) {
    EXPECT_EQ(code_of([] { fid(Matrix::Zero(1, 3), Matrix::Zero(5, 3)); }), Errc::TooFewSamples);
    EXPECT_EQ(code_of([] { fid(Matrix::Zero(4, 3), Matrix::Zero(5, 2)); }), Errc::DimensionMismatch);
    Matrix bad = Matrix::Zero(3, 2);
    bad(0, 0) = std::numeric_limits<double>::infinity();
    EXPECT_EQ(code_of([&] { fid(bad, Matrix::Ones(3, 2)); }), Errc::NonFiniteResult);
}
