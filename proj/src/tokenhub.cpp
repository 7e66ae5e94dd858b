#include "hislm/tokenhub.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace hislm {

int nearest_row(const MatrixF& points, const Eigen::Ref<const Eigen::RowVectorXf>& x) {
    int best = 0;
    float best_d = std::numeric_limits<float>::infinity();
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        float d = (points.row(i) - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

namespace {

// First occurrence of each distinct row.
std::vector<Eigen::Index> distinct_rows(const MatrixF& x) {
    std::vector<Eigen::Index> out;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        bool dup = false;
        for (Eigen::Index j : out) {
            if (x.row(i) == x.row(j)) {
                dup = true;
                break;
            }
        }
        if (!dup) out.push_back(i);
    }
    return out;
}

}  // namespace

SemanticCodebook fit_kmeans(const MatrixF& frames, int n_clusters, int iters, uint64_t seed) {
    check(n_clusters >= 1, "fit_kmeans: n_clusters must be >= 1");
    check(iters >= 1, "fit_kmeans: iters must be >= 1");
    check(frames.rows() >= n_clusters, "fit_kmeans: insufficient data");
    check(frames.allFinite(), "fit_kmeans: non-finite input frames");

    const Eigen::Index n = frames.rows();
    std::vector<Eigen::Index> uniq = distinct_rows(frames);
    check(static_cast<int>(uniq.size()) >= n_clusters, "fit_kmeans: insufficient data");

    Rng rng(seed);
    std::shuffle(uniq.begin(), uniq.end(), rng);

    // Farthest-point init over the distinct rows: a random first seed, then
    // each next seed maximizes the distance to its nearest chosen seed. A
    // plain random draw can place two seeds inside one tight cluster, and
    // Lloyd iterations never recover from the resulting merge/split optimum.
    MatrixF centroids(n_clusters, frames.cols());
    centroids.row(0) = frames.row(uniq[0]);
    std::vector<float> seed_dist(uniq.size(), std::numeric_limits<float>::max());
    for (int k = 1; k < n_clusters; ++k) {
        size_t far_j = 0;
        float far_d = -1.0f;
        for (size_t j = 0; j < uniq.size(); ++j) {
            float d = (frames.row(uniq[j]) - centroids.row(k - 1)).squaredNorm();
            seed_dist[j] = std::min(seed_dist[j], d);
            if (seed_dist[j] > far_d) {
                far_d = seed_dist[j];
                far_j = j;
            }
        }
        centroids.row(k) = frames.row(uniq[far_j]);
    }

    std::vector<int> assign(n, 0);
    for (int it = 0; it < iters; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) assign[i] = nearest_row(centroids, frames.row(i));

        MatrixF sums = MatrixF::Zero(n_clusters, frames.cols());
        std::vector<int> counts(n_clusters, 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(assign[i]) += frames.row(i);
            counts[assign[i]]++;
        }
        for (int k = 0; k < n_clusters; ++k) {
            if (counts[k] > 0) centroids.row(k) = sums.row(k) / static_cast<float>(counts[k]);
        }
        // Re-seed empty clusters from the point farthest from its centroid.
        for (int k = 0; k < n_clusters; ++k) {
            if (counts[k] > 0) continue;
            Eigen::Index far_i = 0;
            float far_d = -1.0f;
            for (Eigen::Index i = 0; i < n; ++i) {
                float d = (frames.row(i) - centroids.row(assign[i])).squaredNorm();
                if (d > far_d) {
                    far_d = d;
                    far_i = i;
                }
            }
            centroids.row(k) = frames.row(far_i);
            assign[far_i] = k;
        }
    }
    return SemanticCodebook{std::move(centroids)};
}

SemanticSeq semantic_encode(const FrameSeq& frames, const SemanticCodebook& cb) {
    check(frames.size() == 0 || frames.dim() == cb.dim(),
          "semantic_encode: frame/centroid dimension mismatch");
    SemanticSeq out;
    out.reserve(frames.size());
    for (Eigen::Index t = 0; t < frames.size(); ++t)
        out.push_back(nearest_row(cb.centroids, frames.frames.row(t)));
    return out;
}

SemanticSeq dedup(const SemanticSeq& seq) {
    SemanticSeq out;
    for (int tok : seq) {
        if (out.empty() || out.back() != tok) out.push_back(tok);
    }
    return out;
}

RvqCodebooks fit_rvq(const MatrixF& frames, int depth, int n_entries, int iters, uint64_t seed) {
    check(depth >= 1, "fit_rvq: depth must be >= 1");
    check(n_entries >= 1, "fit_rvq: n_entries must be >= 1");

    RvqCodebooks cbs;
    MatrixF residual = frames;
    for (int q = 0; q < depth; ++q) {
        SemanticCodebook level = fit_kmeans(residual, n_entries, iters, split_seed(seed, q));
        // Subtract this level's reconstruction before fitting the next one.
        for (Eigen::Index i = 0; i < residual.rows(); ++i) {
            int id = nearest_row(level.centroids, residual.row(i));
            residual.row(i) -= level.centroids.row(id);
        }
        cbs.levels.push_back(std::move(level.centroids));
    }
    return cbs;
}

AcousticGrid rvq_encode(const FrameSeq& frames, const RvqCodebooks& cbs) {
    check(cbs.depth() >= 1, "rvq_encode: empty codebooks");
    check(frames.size() == 0 || frames.dim() == cbs.dim(),
          "rvq_encode: frame/codebook dimension mismatch");
    AcousticGrid grid;
    grid.codes.reserve(frames.size());
    Eigen::RowVectorXf residual;
    for (Eigen::Index t = 0; t < frames.size(); ++t) {
        residual = frames.frames.row(t);
        std::vector<int> row(cbs.depth());
        for (int q = 0; q < cbs.depth(); ++q) {
            int id = nearest_row(cbs.levels[q], residual);
            row[q] = id;
            residual -= cbs.levels[q].row(id);
        }
        grid.codes.push_back(std::move(row));
    }
    return grid;
}

FrameSeq rvq_decode(const AcousticGrid& grid, const RvqCodebooks& cbs, double frame_rate_hz) {
    check(cbs.depth() >= 1, "rvq_decode: empty codebooks");
    check(grid.frames() == 0 || grid.depth() <= cbs.depth(), "rvq_decode: grid deeper than codebooks");
    FrameSeq out;
    out.frame_rate_hz = frame_rate_hz;
    out.frames = MatrixF::Zero(grid.frames(), cbs.dim());
    for (Eigen::Index t = 0; t < grid.frames(); ++t) {
        check(static_cast<int>(grid.codes[t].size()) == grid.depth(), "rvq_decode: ragged grid");
        for (int q = 0; q < grid.depth(); ++q) {
            int id = grid.codes[t][q];
            check(id >= 0 && id < cbs.vocab(), "rvq_decode: code id out of range");
            out.frames.row(t) += cbs.levels[q].row(id);
        }
    }
    return out;
}

}  // namespace hislm
