#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hislm/common.hpp"

namespace hislm {

// A sequence of feature frames extracted at a fixed rate.
struct FrameSeq {
    MatrixF frames;        // T x d
    double frame_rate_hz = 50.0;

    Eigen::Index size() const { return frames.rows(); }
    Eigen::Index dim() const { return frames.cols(); }
};

struct SemanticCodebook {
    MatrixF centroids;     // N_s x d

    Eigen::Index vocab() const { return centroids.rows(); }
    Eigen::Index dim() const { return centroids.cols(); }
};

using SemanticSeq = std::vector<int>;

// Ordered residual codebooks: level q quantizes what levels < q left over.
struct RvqCodebooks {
    std::vector<MatrixF> levels;   // D matrices, each N_a x d

    int depth() const { return static_cast<int>(levels.size()); }
    Eigen::Index vocab() const { return levels.empty() ? 0 : levels[0].rows(); }
    Eigen::Index dim() const { return levels.empty() ? 0 : levels[0].cols(); }
};

// T2 x D grid of residual code ids, row-major, one row per frame.
struct AcousticGrid {
    std::vector<std::vector<int>> codes;

    Eigen::Index frames() const { return static_cast<Eigen::Index>(codes.size()); }
    int depth() const { return codes.empty() ? 0 : static_cast<int>(codes[0].size()); }
};

// Lloyd's algorithm. Ties break toward the lowest centroid id; empty clusters
// are re-seeded from the point farthest from its assigned centroid.
SemanticCodebook fit_kmeans(const MatrixF& frames, int n_clusters, int iters, uint64_t seed);

// Nearest-centroid assignment, no dedup.
SemanticSeq semantic_encode(const FrameSeq& frames, const SemanticCodebook& cb);

// Collapse each maximal run of equal tokens to a single token.
SemanticSeq dedup(const SemanticSeq& seq);

RvqCodebooks fit_rvq(const MatrixF& frames, int depth, int n_entries, int iters, uint64_t seed);

AcousticGrid rvq_encode(const FrameSeq& frames, const RvqCodebooks& cbs);

FrameSeq rvq_decode(const AcousticGrid& grid, const RvqCodebooks& cbs, double frame_rate_hz = 75.0);

// Nearest row of `points` to `x` under squared Euclidean distance, lowest index on ties.
int nearest_row(const MatrixF& points, const Eigen::Ref<const Eigen::RowVectorXf>& x);

}  // namespace hislm
