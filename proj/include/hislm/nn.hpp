#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hislm/common.hpp"

// Minimal decoder-stack building blocks, templated on the scalar type so the
// same code runs in f32 for training and f64 for the finite-difference
// harness. Every parameter tensor is a row-major matrix (biases and norm
// gains are 1 x n) so optimizer and checkpoint code can treat the model as a
// flat list of named matrices.
namespace hislm::nn {

template <class S>
using Mat = MatrixX<S>;

constexpr double kLnEps = 1e-5;

template <class S>
S gelu(S x) {
    const S c = S(0.7978845608028654);  // sqrt(2/pi)
    return S(0.5) * x * (S(1) + std::tanh(c * (x + S(0.044715) * x * x * x)));
}

template <class S>
S gelu_grad(S x) {
    const S c = S(0.7978845608028654);
    S u = c * (x + S(0.044715) * x * x * x);
    S t = std::tanh(u);
    S du = c * (S(1) + S(0.134145) * x * x);
    return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * du;
}

template <class S>
struct Linear {
    Mat<S> w;  // in x out
    Mat<S> b;  // 1 x out

    void init(Eigen::Index in, Eigen::Index out, Rng& rng, double std_dev) {
        std::normal_distribution<double> dist(0.0, std_dev);
        w.resize(in, out);
        for (Eigen::Index i = 0; i < in; ++i)
            for (Eigen::Index j = 0; j < out; ++j) w(i, j) = S(dist(rng));
        b = Mat<S>::Zero(1, out);
    }

    void zero_like(const Linear& other) {
        w = Mat<S>::Zero(other.w.rows(), other.w.cols());
        b = Mat<S>::Zero(1, other.b.cols());
    }
};

template <class S>
Mat<S> linear_fwd(const Linear<S>& p, const Mat<S>& x) {
    return (x * p.w).rowwise() + p.b.row(0);
}

// Returns dX; accumulates dW/dB into g.
template <class S>
Mat<S> linear_bwd(const Linear<S>& p, const Mat<S>& x, const Mat<S>& dy, Linear<S>& g) {
    g.w.noalias() += x.transpose() * dy;
    g.b.row(0) += dy.colwise().sum();
    return dy * p.w.transpose();
}

template <class S>
struct LayerNorm {
    Mat<S> gain;  // 1 x d
    Mat<S> bias;  // 1 x d

    void init(Eigen::Index d) {
        gain = Mat<S>::Ones(1, d);
        bias = Mat<S>::Zero(1, d);
    }
    void zero_like(const LayerNorm& other) {
        gain = Mat<S>::Zero(1, other.gain.cols());
        bias = Mat<S>::Zero(1, other.bias.cols());
    }
};

template <class S>
struct LnCache {
    Mat<S> xhat;                           // T x d, normalized pre-gain
    Eigen::Matrix<S, Eigen::Dynamic, 1> rstd;  // T
};

template <class S>
Mat<S> layernorm_fwd(const LayerNorm<S>& p, const Mat<S>& x, LnCache<S>& cache) {
    const Eigen::Index t_len = x.rows(), d = x.cols();
    cache.xhat.resize(t_len, d);
    cache.rstd.resize(t_len);
    Mat<S> y(t_len, d);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        S mean = x.row(t).mean();
        S var = (x.row(t).array() - mean).square().mean();
        S rstd = S(1) / std::sqrt(var + S(kLnEps));
        cache.rstd(t) = rstd;
        cache.xhat.row(t) = (x.row(t).array() - mean) * rstd;
        y.row(t) = cache.xhat.row(t).cwiseProduct(p.gain.row(0)) + p.bias.row(0);
    }
    return y;
}

template <class S>
Mat<S> layernorm_bwd(const LayerNorm<S>& p, const LnCache<S>& cache, const Mat<S>& dy,
                     LayerNorm<S>& g) {
    const Eigen::Index t_len = dy.rows(), d = dy.cols();
    Mat<S> dx(t_len, d);
    for (Eigen::Index t = 0; t < t_len; ++t) {
        auto dxhat = dy.row(t).cwiseProduct(p.gain.row(0));
        S m1 = dxhat.mean();
        S m2 = dxhat.cwiseProduct(cache.xhat.row(t)).mean();
        dx.row(t) = (dxhat.array() - m1 - cache.xhat.row(t).array() * m2) * cache.rstd(t);
        g.gain.row(0) += dy.row(t).cwiseProduct(cache.xhat.row(t));
        g.bias.row(0) += dy.row(t);
    }
    return dx;
}

template <class S>
struct Block {
    LayerNorm<S> ln1;
    Linear<S> wq, wk, wv, wo;
    LayerNorm<S> ln2;
    Linear<S> fc1, fc2;
};

template <class S>
struct BlockCache {
    Mat<S> x_in;
    LnCache<S> ln1;
    Mat<S> ln1_out;
    Mat<S> q, k, v;
    std::vector<Mat<S>> att;  // per head, T x T softmax probs
    Mat<S> att_out;           // T x d, pre-projection
    Mat<S> x_mid;             // after attention residual
    LnCache<S> ln2;
    Mat<S> ln2_out;
    Mat<S> ffn_pre;           // T x ffn, pre-gelu
    Mat<S> ffn_act;           // T x ffn
};

template <class S>
struct Stack {
    std::vector<Block<S>> blocks;
    LayerNorm<S> ln_f;
    int heads = 1;
    bool final_norm = true;

    Eigen::Index dim() const { return ln_f.gain.cols(); }

    void init(int n_layers, Eigen::Index d, Eigen::Index ffn, int n_heads, Rng& rng,
              double std_dev = 0.02) {
        check(d % n_heads == 0, "stack dim not divisible by head count");
        heads = n_heads;
        blocks.resize(n_layers);
        for (Block<S>& blk : blocks) {
            blk.ln1.init(d);
            blk.wq.init(d, d, rng, std_dev);
            blk.wk.init(d, d, rng, std_dev);
            blk.wv.init(d, d, rng, std_dev);
            blk.wo.init(d, d, rng, std_dev);
            blk.ln2.init(d);
            blk.fc1.init(d, ffn, rng, std_dev);
            blk.fc2.init(ffn, d, rng, std_dev);
        }
        ln_f.init(d);
    }
};

template <class S>
struct StackCache {
    std::vector<BlockCache<S>> blocks;
    Mat<S> pre_final;
    LnCache<S> ln_f;
};

// Causal self-attention over the full sequence; caches everything backward needs.
template <class S>
Mat<S> block_fwd(const Block<S>& blk, int heads, const Mat<S>& x, BlockCache<S>& c) {
    const Eigen::Index t_len = x.rows(), d = x.cols();
    const Eigen::Index hd = d / heads;
    const S scale = S(1) / std::sqrt(S(double(hd)));

    c.x_in = x;
    c.ln1_out = layernorm_fwd(blk.ln1, x, c.ln1);
    c.q = linear_fwd(blk.wq, c.ln1_out);
    c.k = linear_fwd(blk.wk, c.ln1_out);
    c.v = linear_fwd(blk.wv, c.ln1_out);

    c.att.assign(heads, Mat<S>());
    c.att_out.resize(t_len, d);
    for (int h = 0; h < heads; ++h) {
        auto qh = c.q.middleCols(h * hd, hd);
        auto kh = c.k.middleCols(h * hd, hd);
        auto vh = c.v.middleCols(h * hd, hd);
        Mat<S> scores = qh * kh.transpose() * scale;
        Mat<S>& probs = c.att[h];
        probs = Mat<S>::Zero(t_len, t_len);
        for (Eigen::Index i = 0; i < t_len; ++i) {
            S mx = scores.row(i).head(i + 1).maxCoeff();
            S denom = S(0);
            for (Eigen::Index j = 0; j <= i; ++j) {
                probs(i, j) = std::exp(scores(i, j) - mx);
                denom += probs(i, j);
            }
            probs.row(i).head(i + 1) /= denom;
        }
        c.att_out.middleCols(h * hd, hd) = probs * vh;
    }
    Mat<S> attn = linear_fwd(blk.wo, c.att_out);
    c.x_mid = x + attn;

    c.ln2_out = layernorm_fwd(blk.ln2, c.x_mid, c.ln2);
    c.ffn_pre = linear_fwd(blk.fc1, c.ln2_out);
    c.ffn_act = c.ffn_pre.unaryExpr([](S v) { return gelu(v); });
    Mat<S> ffn = linear_fwd(blk.fc2, c.ffn_act);
    return c.x_mid + ffn;
}

template <class S>
Mat<S> block_bwd(const Block<S>& blk, int heads, const BlockCache<S>& c, const Mat<S>& dy,
                 Block<S>& g) {
    const Eigen::Index t_len = dy.rows(), d = dy.cols();
    const Eigen::Index hd = d / heads;
    const S scale = S(1) / std::sqrt(S(double(hd)));

    // FFN branch.
    Mat<S> d_ffn_act = linear_bwd(blk.fc2, c.ffn_act, dy, g.fc2);
    Mat<S> d_ffn_pre =
        d_ffn_act.binaryExpr(c.ffn_pre, [](S dv, S x) { return dv * gelu_grad(x); });
    Mat<S> d_ln2_out = linear_bwd(blk.fc1, c.ln2_out, d_ffn_pre, g.fc1);
    Mat<S> d_x_mid = dy + layernorm_bwd(blk.ln2, c.ln2, d_ln2_out, g.ln2);

    // Attention branch.
    Mat<S> d_att_out = linear_bwd(blk.wo, c.att_out, d_x_mid, g.wo);
    Mat<S> dq(t_len, d), dk(t_len, d), dv(t_len, d);
    for (int h = 0; h < heads; ++h) {
        auto qh = c.q.middleCols(h * hd, hd);
        auto kh = c.k.middleCols(h * hd, hd);
        auto vh = c.v.middleCols(h * hd, hd);
        const Mat<S>& probs = c.att[h];
        auto d_oh = d_att_out.middleCols(h * hd, hd);

        dv.middleCols(h * hd, hd) = probs.transpose() * d_oh;
        Mat<S> d_probs = d_oh * vh.transpose();
        Mat<S> d_scores = Mat<S>::Zero(t_len, t_len);
        for (Eigen::Index i = 0; i < t_len; ++i) {
            S dot = S(0);
            for (Eigen::Index j = 0; j <= i; ++j) dot += d_probs(i, j) * probs(i, j);
            for (Eigen::Index j = 0; j <= i; ++j)
                d_scores(i, j) = probs(i, j) * (d_probs(i, j) - dot);
        }
        dq.middleCols(h * hd, hd) = d_scores * kh * scale;
        dk.middleCols(h * hd, hd) = d_scores.transpose() * qh * scale;
    }
    Mat<S> d_ln1_out = linear_bwd(blk.wq, c.ln1_out, dq, g.wq);
    d_ln1_out += linear_bwd(blk.wk, c.ln1_out, dk, g.wk);
    d_ln1_out += linear_bwd(blk.wv, c.ln1_out, dv, g.wv);
    return d_x_mid + layernorm_bwd(blk.ln1, c.ln1, d_ln1_out, g.ln1);
}

template <class S>
Mat<S> stack_fwd(const Stack<S>& stack, const Mat<S>& x, StackCache<S>& cache) {
    cache.blocks.resize(stack.blocks.size());
    Mat<S> h = x;
    for (size_t i = 0; i < stack.blocks.size(); ++i)
        h = block_fwd(stack.blocks[i], stack.heads, h, cache.blocks[i]);
    if (!stack.final_norm) return h;
    cache.pre_final = h;
    return layernorm_fwd(stack.ln_f, h, cache.ln_f);
}

template <class S>
Mat<S> stack_bwd(const Stack<S>& stack, const StackCache<S>& cache, const Mat<S>& dy,
                 Stack<S>& grads) {
    Mat<S> d = dy;
    if (stack.final_norm) d = layernorm_bwd(stack.ln_f, cache.ln_f, d, grads.ln_f);
    for (size_t i = stack.blocks.size(); i-- > 0;)
        d = block_bwd(stack.blocks[i], stack.heads, cache.blocks[i], d, grads.blocks[i]);
    return d;
}

// Append-only key/value cache for incremental decoding.
template <class S>
struct KvCache {
    std::vector<Mat<S>> k, v;  // per block, len x d
    Eigen::Index len = 0;

    void reset(const Stack<S>& stack, Eigen::Index capacity) {
        Eigen::Index d = stack.dim();
        k.assign(stack.blocks.size(), Mat<S>(capacity, d));
        v.assign(stack.blocks.size(), Mat<S>(capacity, d));
        len = 0;
    }
};

// Process one new position attending to everything already in the cache.
// Returns the hidden state for that position (after final norm if enabled).
template <class S>
Mat<S> stack_fwd_incremental(const Stack<S>& stack, KvCache<S>& cache, const Mat<S>& x_row) {
    const Eigen::Index d = x_row.cols();
    Mat<S> h = x_row;  // 1 x d
    LnCache<S> ln_tmp;
    for (size_t b = 0; b < stack.blocks.size(); ++b) {
        const Block<S>& blk = stack.blocks[b];
        const int heads = stack.heads;
        const Eigen::Index hd = d / heads;
        const S scale = S(1) / std::sqrt(S(double(hd)));

        Mat<S> n1 = layernorm_fwd(blk.ln1, h, ln_tmp);
        Mat<S> q = linear_fwd(blk.wq, n1);
        check(cache.len < cache.k[b].rows(), "kv cache capacity exceeded");
        cache.k[b].row(cache.len) = linear_fwd(blk.wk, n1).row(0);
        cache.v[b].row(cache.len) = linear_fwd(blk.wv, n1).row(0);
        const Eigen::Index ctx = cache.len + 1;

        Mat<S> att_out(1, d);
        for (int hh = 0; hh < heads; ++hh) {
            auto kh = cache.k[b].block(0, hh * hd, ctx, hd);
            auto vh = cache.v[b].block(0, hh * hd, ctx, hd);
            Eigen::Matrix<S, Eigen::Dynamic, 1> scores = kh * q.middleCols(hh * hd, hd).transpose() * scale;
            S mx = scores.maxCoeff();
            Eigen::Matrix<S, Eigen::Dynamic, 1> probs = (scores.array() - mx).exp();
            probs /= probs.sum();
            att_out.middleCols(hh * hd, hd) = probs.transpose() * vh;
        }
        h += linear_fwd(blk.wo, att_out);
        Mat<S> n2 = layernorm_fwd(blk.ln2, h, ln_tmp);
        Mat<S> act = linear_fwd(blk.fc1, n2).unaryExpr([](S v) { return gelu(v); });
        h += linear_fwd(blk.fc2, act);
    }
    cache.len += 1;
    if (!stack.final_norm) return h;
    return layernorm_fwd(stack.ln_f, h, ln_tmp);
}

// Named-tensor traversal; order is the checkpoint order.
template <class S, class F>
void visit_stack(Stack<S>& stack, const std::string& prefix, F&& f) {
    for (size_t i = 0; i < stack.blocks.size(); ++i) {
        Block<S>& b = stack.blocks[i];
        std::string p = prefix + ".block" + std::to_string(i);
        f(p + ".ln1.gain", b.ln1.gain);
        f(p + ".ln1.bias", b.ln1.bias);
        f(p + ".wq.w", b.wq.w);
        f(p + ".wq.b", b.wq.b);
        f(p + ".wk.w", b.wk.w);
        f(p + ".wk.b", b.wk.b);
        f(p + ".wv.w", b.wv.w);
        f(p + ".wv.b", b.wv.b);
        f(p + ".wo.w", b.wo.w);
        f(p + ".wo.b", b.wo.b);
        f(p + ".ln2.gain", b.ln2.gain);
        f(p + ".ln2.bias", b.ln2.bias);
        f(p + ".fc1.w", b.fc1.w);
        f(p + ".fc1.b", b.fc1.b);
        f(p + ".fc2.w", b.fc2.w);
        f(p + ".fc2.b", b.fc2.b);
    }
    f(prefix + ".ln_f.gain", stack.ln_f.gain);
    f(prefix + ".ln_f.bias", stack.ln_f.bias);
}

}  // namespace hislm::nn
