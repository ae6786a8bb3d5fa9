#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "foilgen/error.hpp"
#include "foilgen/vaegan.hpp"

namespace foilgen {

using LatentVector = Eigen::VectorXd;

/// nu * z1 + (1 - nu) * z2. Swapping the arguments and using 1 - nu gives the
/// bitwise-same result.
inline LatentVector interpolate2(const LatentVector& z1, const LatentVector& z2, double nu) {
    if (z1.size() != z2.size()) throw Error(Errc::DimensionMismatch, "latent vectors differ in size");
    // One weight is taken from nu directly and the other as its complement,
    // picking the branch so that (z2, z1, 1 - nu) lands on the same pair.
    double w1, w2;
    if (nu <= 0.5) {
        w2 = 1.0 - nu;
        w1 = 1.0 - w2;
    } else {
        w1 = nu;
        w2 = 1.0 - nu;
    }
    return w1 * z1 + w2 * z2;
}

inline LatentVector interpolate3(const LatentVector& z1, const LatentVector& z2, const LatentVector& z3, double alpha,
                                 double beta, double gamma) {
    if (z1.size() != z2.size() || z1.size() != z3.size())
        throw Error(Errc::DimensionMismatch, "latent vectors differ in size");
    if (!(std::abs(alpha + beta + gamma - 1.0) <= 1e-9))
        throw Error(Errc::NotAffine, "coefficients sum to " + std::to_string(alpha + beta + gamma) + ", expected 1");
    return alpha * z1 + beta * z2 + gamma * z3;
}

/// Decodes n standard-normal latent draws; rows of the result are normalized airfoils.
inline Matrix sample_airfoils(const Decoder& dec, std::size_t n, std::uint64_t seed) {
    if (n == 0) return Matrix(0, static_cast<Eigen::Index>(kAirfoilDim));
    std::mt19937_64 rng(seed);
    return decode(dec, standard_normal(static_cast<Eigen::Index>(n), kLatentDim, rng));
}

// ---------------------------------------------------------------------------
// K-means.

struct KMeansResult {
    std::size_t k = 0;
    Matrix centroids;                      // k x d
    std::vector<std::size_t> assignments;  // per point
    double inertia = 0.0;
    std::vector<double> inertia_history;  // after each Lloyd iteration
    int iterations = 0;
};

namespace detail {

inline std::size_t nearest(const Matrix& centroids, const Eigen::Ref<const Eigen::RowVectorXd>& p, double* dist2) {
    std::size_t best = 0;
    double bd = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
        const double d = (centroids.row(c) - p).squaredNorm();
        if (d < bd) {
            bd = d;
            best = static_cast<std::size_t>(c);
        }
    }
    if (dist2) *dist2 = bd;
    return best;
}

inline double assign(const Matrix& points, const Matrix& centroids, std::vector<std::size_t>& out) {
    double inertia = 0.0;
    out.resize(static_cast<std::size_t>(points.rows()));
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        double d = 0.0;
        out[static_cast<std::size_t>(i)] = nearest(centroids, points.row(i), &d);
        inertia += d;
    }
    return inertia;
}

}  // namespace detail

/// Lloyd iterations from k-means++ seeding. Rows of `points` are samples.
inline KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed, int max_iter = 300,
                           double tol = 1e-6) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (k == 0 || k > n)
        throw Error(Errc::TooFewPoints, "k=" + std::to_string(k) + " needs at least k points, have " + std::to_string(n));
    std::mt19937_64 rng(seed);
    KMeansResult r;
    r.k = k;
    r.centroids.resize(static_cast<Eigen::Index>(k), points.cols());

    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    r.centroids.row(0) = points.row(static_cast<Eigen::Index>(pick(rng)));
    std::vector<double> d2(n);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (std::size_t j = 0; j < c; ++j)
                best = std::min(best, (r.centroids.row(static_cast<Eigen::Index>(j)) - points.row(static_cast<Eigen::Index>(i))).squaredNorm());
            d2[i] = best;
            total += best;
        }
        std::size_t chosen = 0;
        if (total > 0.0) {
            std::discrete_distribution<std::size_t> dd(d2.begin(), d2.end());
            chosen = dd(rng);
        } else {
            chosen = pick(rng);  // all points coincide with existing centroids
        }
        r.centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(chosen));
    }

    double inertia = detail::assign(points, r.centroids, r.assignments);
    for (int it = 0; it < max_iter; ++it) {
        Matrix sums = Matrix::Zero(r.centroids.rows(), r.centroids.cols());
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            sums.row(static_cast<Eigen::Index>(r.assignments[i])) += points.row(static_cast<Eigen::Index>(i));
            ++counts[r.assignments[i]];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) {
                r.centroids.row(static_cast<Eigen::Index>(c)) = sums.row(static_cast<Eigen::Index>(c)) / static_cast<double>(counts[c]);
                continue;
            }
            // Empty cluster: move it onto the point farthest from its centroid.
            std::size_t far = 0;
            double fd = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = (points.row(static_cast<Eigen::Index>(i)) -
                                  r.centroids.row(static_cast<Eigen::Index>(r.assignments[i]))).squaredNorm();
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            r.centroids.row(static_cast<Eigen::Index>(c)) = points.row(static_cast<Eigen::Index>(far));
            r.assignments[far] = c;
        }
        const double next = detail::assign(points, r.centroids, r.assignments);
        r.inertia_history.push_back(next);
        r.iterations = it + 1;
        const double improvement = inertia - next;
        inertia = next;
        if (improvement < tol) break;
    }
    r.inertia = inertia;
    return r;
}

// ---------------------------------------------------------------------------
// PCA baseline.

struct PcaModel {
    Eigen::VectorXd mean;
    Matrix components;  // rank x d, orthonormal rows
    Eigen::VectorXd explained_variance;
};

inline PcaModel pca_fit(const Matrix& data, int rank = kLatentDim) {
    if (rank <= 0 || data.rows() < rank + 1)
        throw Error(Errc::InsufficientData, "PCA with " + std::to_string(rank) + " components needs at least " +
                                                std::to_string(rank + 1) + " samples");
    if (data.cols() < rank) throw Error(Errc::InsufficientData, "fewer features than components");
    PcaModel m;
    m.mean = data.colwise().mean().transpose();
    const Matrix centered = data.rowwise() - m.mean.transpose();
    Eigen::BDCSVD<Matrix> svd(centered, Eigen::ComputeThinV);
    m.components = svd.matrixV().leftCols(rank).transpose();
    // Fix the sign so the largest-magnitude loading of each component is positive.
    for (Eigen::Index c = 0; c < m.components.rows(); ++c) {
        Eigen::Index arg = 0;
        m.components.row(c).cwiseAbs().maxCoeff(&arg);
        if (m.components(c, arg) < 0.0) m.components.row(c) *= -1.0;
    }
    const double dof = static_cast<double>(data.rows() - 1);
    m.explained_variance = svd.singularValues().head(rank).array().square() / dof;
    return m;
}

/// Rows of x projected onto the components.
inline Matrix pca_encode(const PcaModel& m, const Matrix& x) {
    if (x.cols() != m.mean.size()) throw Error(Errc::DimensionMismatch, "PCA input width");
    return (x.rowwise() - m.mean.transpose()) * m.components.transpose();
}

inline Matrix pca_decode(const PcaModel& m, const Matrix& z) {
    if (z.cols() != m.components.rows()) throw Error(Errc::DimensionMismatch, "PCA code width");
    return (z * m.components).rowwise() + m.mean.transpose();
}

inline double pca_reconstruction_mse(const PcaModel& m, const Matrix& x) {
    return (pca_decode(m, pca_encode(m, x)) - x).array().square().mean();
}

// ---------------------------------------------------------------------------
// Frechet distance between Gaussian fits of two feature sets.

namespace detail {

inline Matrix covariance(const Matrix& x) {
    const Matrix c = x.rowwise() - x.colwise().mean();
    return (c.transpose() * c) / static_cast<double>(x.rows() - 1);
}

inline Matrix psd_sqrt(const Matrix& s) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (s + s.transpose()));
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace detail

/// |mu_a - mu_b|^2 + tr(Sa + Sb - 2 (Sa Sb)^(1/2)). The trace of the product
/// root equals the nuclear norm of Sa^(1/2) Sb^(1/2).
inline double fid(const Matrix& features_a, const Matrix& features_b) {
    if (features_a.rows() < 2 || features_b.rows() < 2)
        throw Error(Errc::TooFewSamples, "each feature set needs at least 2 samples");
    if (features_a.cols() != features_b.cols()) throw Error(Errc::DimensionMismatch, "feature widths differ");
    if (!features_a.allFinite() || !features_b.allFinite()) throw Error(Errc::NonFiniteResult, "features are not finite");
    const Eigen::RowVectorXd mu_a = features_a.colwise().mean();
    const Eigen::RowVectorXd mu_b = features_b.colwise().mean();
    const Matrix sa = detail::covariance(features_a);
    const Matrix sb = detail::covariance(features_b);
    const Matrix prod = detail::psd_sqrt(sa) * detail::psd_sqrt(sb);
    Eigen::JacobiSVD<Matrix> svd(prod);
    const double tr_root = svd.singularValues().sum();
    const double v = (mu_a - mu_b).squaredNorm() + sa.trace() + sb.trace() - 2.0 * tr_root;
    if (!std::isfinite(v)) throw Error(Errc::NonFiniteResult, "FID is not finite");
    return std::max(v, 0.0);
}

}  // namespace foilgen
