#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "hislm/tokenhub.hpp"

using namespace hislm;

namespace {

MatrixF gaussian_rows(Eigen::Index n, Eigen::Index d, Rng& rng, double sd = 1.0) {
    std::normal_distribution<double> dist(0.0, sd);
    MatrixF m(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = float(dist(rng));
    return m;
}

// Exhaustive nearest-centroid scan, independent of nearest_row.
int brute_nearest(const MatrixF& cents, const Eigen::RowVectorXf& x) {
    int best = 0;
    float best_d = (cents.row(0) - x).squaredNorm();
    for (int i = 1; i < cents.rows(); ++i) {
        float d = (cents.row(i) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

}  // namespace

TEST_CASE("kmeans: N distinct points become their own centroids") {
    MatrixF pts(4, 2);
    pts << 0, 0, 10, 0, 0, 10, 10, 10;
    SemanticCodebook cb = fit_kmeans(pts, 4, 10, 123);
    REQUIRE(cb.vocab() == 4);
    for (int i = 0; i < 4; ++i) {
        bool found = false;
        for (int c = 0; c < 4; ++c)
            if ((cb.centroids.row(c) - pts.row(i)).norm() < 1e-6f) found = true;
        CHECK(found);
    }
}

TEST_CASE("kmeans: two separated blobs recover sample means") {
    Rng rng(7);
    const int n = 200;
    const double sigma = 0.1;
    MatrixF pts(2 * n, 3);
    Eigen::RowVector3f mu_a(0, 0, 0), mu_b(10, 10, 10);
    std::normal_distribution<double> dist(0.0, sigma);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) {
            pts(i, j) = mu_a(j) + float(dist(rng));
            pts(n + i, j) = mu_b(j) + float(dist(rng));
        }
    Eigen::RowVector3f mean_a = pts.topRows(n).colwise().mean();
    Eigen::RowVector3f mean_b = pts.bottomRows(n).colwise().mean();

    SemanticCodebook cb = fit_kmeans(pts, 2, 20, 99);
    // Order-free: each sample mean must be within 3*sigma/sqrt(n) of a centroid.
    const float tol = float(3.0 * sigma / std::sqrt(double(n)));
    float d_a = std::min((cb.centroids.row(0) - mean_a).norm(), (cb.centroids.row(1) - mean_a).norm());
    float d_b = std::min((cb.centroids.row(0) - mean_b).norm(), (cb.centroids.row(1) - mean_b).norm());
    CHECK(d_a < tol);
    CHECK(d_b < tol);
}

TEST_CASE("kmeans: deterministic under a fixed seed") {
    Rng rng(3);
    MatrixF pts = gaussian_rows(64, 5, rng);
    SemanticCodebook a = fit_kmeans(pts, 8, 10, 42);
    SemanticCodebook b = fit_kmeans(pts, 8, 10, 42);
    CHECK(a.centroids == b.centroids);
}

TEST_CASE("kmeans: rejects insufficient data") {
    MatrixF pts = MatrixF::Zero(3, 2);  // 3 identical rows
    CHECK_THROWS(fit_kmeans(pts, 4, 5, 0));
    CHECK_THROWS(fit_kmeans(MatrixF(0, 2), 1, 5, 0));
}

TEST_CASE("semantic_encode basics") {
    Rng rng(11);
    SemanticCodebook cb;
    cb.centroids = gaussian_rows(8, 4, rng);

    FrameSeq fs;
    fs.frames = MatrixF(1, 4);
    fs.frames.row(0) = cb.centroids.row(7);
    CHECK(semantic_encode(fs, cb) == SemanticSeq{7});

    fs.frames = MatrixF(0, 4);
    CHECK(semantic_encode(fs, cb).empty());
}

TEST_CASE("semantic_encode matches a brute-force scan") {
    Rng rng(12);
    SemanticCodebook cb;
    cb.centroids = gaussian_rows(4, 3, rng);
    FrameSeq fs;
    fs.frames = gaussian_rows(3, 3, rng);
    SemanticSeq got = semantic_encode(fs, cb);
    REQUIRE(got.size() == 3);
    for (int t = 0; t < 3; ++t) CHECK(got[t] == brute_nearest(cb.centroids, fs.frames.row(t)));
}

TEST_CASE("nearest_row breaks ties toward the lowest index") {
    MatrixF pts(3, 2);
    pts << 1, 0, -1, 0, 1, 0;  // rows 0 and 2 identical
    Eigen::RowVectorXf x(2);
    x << 0, 5;  // equidistant from all three
    CHECK(nearest_row(pts, x) == 0);
}

TEST_CASE("dedup") {
    CHECK(dedup({3, 3, 5, 5, 5, 3}) == SemanticSeq{3, 5, 3});
    CHECK(dedup({}) == SemanticSeq{});
    Rng rng(5);
    std::uniform_int_distribution<int> tok(0, 3);
    for (int rep = 0; rep < 20; ++rep) {
        SemanticSeq x(50);
        for (int& t : x) t = tok(rng);
        SemanticSeq once = dedup(x);
        CHECK(dedup(once) == once);
        for (size_t i = 1; i < once.size(); ++i) CHECK(once[i] != once[i - 1]);
    }
}

TEST_CASE("rvq: depth 1 degenerates to k-means") {
    Rng rng(21);
    MatrixF pts = gaussian_rows(128, 4, rng);
    RvqCodebooks cbs = fit_rvq(pts, 1, 8, 10, 77);
    SemanticCodebook km = fit_kmeans(pts, 8, 10, split_seed(77, 0));
    REQUIRE(cbs.depth() == 1);
    CHECK(cbs.levels[0] == km.centroids);
}

TEST_CASE("rvq: second level shrinks the residual") {
    // Coarse mixture centers plus fine offsets: a 2-level hierarchy.
    Rng rng(31);
    std::normal_distribution<double> fine(0.0, 0.05);
    std::uniform_int_distribution<int> pick(0, 3);
    MatrixF coarse = gaussian_rows(4, 6, rng, 5.0);
    MatrixF pts(256, 6);
    for (int i = 0; i < 256; ++i) {
        pts.row(i) = coarse.row(pick(rng));
        for (int j = 0; j < 6; ++j) pts(i, j) += float(fine(rng));
    }
    RvqCodebooks cbs = fit_rvq(pts, 2, 4, 15, 9);
    FrameSeq fs{pts, 75.0};
    AcousticGrid grid = rvq_encode(fs, cbs);

    double err1 = 0, err2 = 0;
    for (int t = 0; t < 256; ++t) {
        Eigen::RowVectorXf r1 = pts.row(t) - cbs.levels[0].row(grid.codes[t][0]);
        err1 += r1.norm();
        err2 += (r1 - cbs.levels[1].row(grid.codes[t][1])).norm();
    }
    CHECK(err2 / 256 < err1 / 256);
}

TEST_CASE("rvq: deterministic under a fixed seed") {
    Rng rng(41);
    MatrixF pts = gaussian_rows(100, 3, rng);
    RvqCodebooks a = fit_rvq(pts, 3, 4, 8, 5);
    RvqCodebooks b = fit_rvq(pts, 3, 4, 8, 5);
    REQUIRE(a.depth() == b.depth());
    for (int q = 0; q < a.depth(); ++q) CHECK(a.levels[q] == b.levels[q]);
}

TEST_CASE("rvq_encode: exact decomposition maps to codes (0, 0)") {
    Rng rng(51);
    RvqCodebooks cbs;
    cbs.levels.push_back(gaussian_rows(3, 4, rng, 5.0));
    cbs.levels.push_back(gaussian_rows(3, 4, rng, 0.01));
    FrameSeq fs;
    fs.frames = MatrixF(1, 4);
    fs.frames.row(0) = cbs.levels[0].row(0) + cbs.levels[1].row(0);
    AcousticGrid grid = rvq_encode(fs, cbs);
    CHECK(grid.codes[0][0] == 0);
    CHECK(grid.codes[0][1] == 0);
}

TEST_CASE("rvq_encode matches exhaustive greedy search") {
    Rng rng(61);
    for (int rep = 0; rep < 10; ++rep) {
        const int t2 = 4, depth = 2, na = 3, dim = 3;
        RvqCodebooks cbs;
        for (int q = 0; q < depth; ++q) cbs.levels.push_back(gaussian_rows(na, dim, rng));
        FrameSeq fs;
        fs.frames = gaussian_rows(t2, dim, rng);
        AcousticGrid grid = rvq_encode(fs, cbs);
        for (int t = 0; t < t2; ++t) {
            Eigen::RowVectorXf res = fs.frames.row(t);
            for (int q = 0; q < depth; ++q) {
                int expect = brute_nearest(cbs.levels[q], res);
                CHECK(grid.codes[t][q] == expect);
                res -= cbs.levels[q].row(expect);
            }
        }
    }
}

TEST_CASE("rvq_encode: empty frames give a 0 x D grid") {
    Rng rng(71);
    RvqCodebooks cbs = fit_rvq(gaussian_rows(32, 3, rng), 2, 4, 5, 1);
    FrameSeq fs;
    fs.frames = MatrixF(0, 3);
    AcousticGrid grid = rvq_encode(fs, cbs);
    CHECK(grid.frames() == 0);
}

TEST_CASE("rvq_decode: known codes sum the codewords") {
    Rng rng(81);
    RvqCodebooks cbs;
    cbs.levels.push_back(gaussian_rows(4, 3, rng));
    cbs.levels.push_back(gaussian_rows(4, 3, rng));
    AcousticGrid grid;
    grid.codes = {{2, 1}};
    FrameSeq out = rvq_decode(grid, cbs);
    Eigen::RowVectorXf expect = cbs.levels[0].row(2) + cbs.levels[1].row(1);
    CHECK((out.frames.row(0) - expect).norm() < 1e-6f);
}

TEST_CASE("rvq reconstruction improves monotonically with levels") {
    Rng rng(91);
    MatrixF pts = gaussian_rows(200, 5, rng);
    RvqCodebooks full = fit_rvq(pts, 4, 8, 10, 13);
    FrameSeq fs{pts, 75.0};
    AcousticGrid grid = rvq_encode(fs, full);

    double prev = std::numeric_limits<double>::infinity();
    for (int d = 1; d <= 4; ++d) {
        RvqCodebooks trunc;
        trunc.levels.assign(full.levels.begin(), full.levels.begin() + d);
        AcousticGrid g;
        g.codes.resize(grid.codes.size());
        for (size_t t = 0; t < grid.codes.size(); ++t)
            g.codes[t].assign(grid.codes[t].begin(), grid.codes[t].begin() + d);
        double err = (rvq_decode(g, trunc).frames - pts).squaredNorm();
        CHECK(err <= prev);
        prev = err;
    }
}

TEST_CASE("rvq: D=4 beats D=2 on hierarchical data") {
    Rng rng(101);
    std::uniform_int_distribution<int> pick(0, 3);
    std::normal_distribution<double> fine(0.0, 0.2);
    MatrixF coarse = gaussian_rows(4, 4, rng, 4.0);
    MatrixF pts(300, 4);
    for (int i = 0; i < 300; ++i) {
        pts.row(i) = coarse.row(pick(rng));
        for (int j = 0; j < 4; ++j) pts(i, j) += float(fine(rng));
    }
    FrameSeq fs{pts, 75.0};
    auto rel_err = [&](int depth) {
        RvqCodebooks cbs = fit_rvq(pts, depth, 4, 12, 3);
        FrameSeq rec = rvq_decode(rvq_encode(fs, cbs), cbs);
        return (rec.frames - pts).norm() / pts.norm();
    };
    CHECK(rel_err(4) < rel_err(2));
}
