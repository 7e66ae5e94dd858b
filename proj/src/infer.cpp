#include "hislm/infer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hislm {

GenMode parse_mode(const std::string& name) {
    if (name == "uncond") return GenMode::Unconditional;
    if (name == "sem2ac") return GenMode::SemanticToAcoustic;
    if (name == "transfer") return GenMode::SpeakerTransfer;
    if (name == "continue") return GenMode::AcousticContinuation;
    throw std::runtime_error("unknown generation mode: " + name +
                             " (expected uncond|sem2ac|transfer|continue)");
}

std::string mode_name(GenMode mode) {
    switch (mode) {
        case GenMode::Unconditional: return "uncond";
        case GenMode::SemanticToAcoustic: return "sem2ac";
        case GenMode::SpeakerTransfer: return "transfer";
        case GenMode::AcousticContinuation: return "continue";
    }
    return "?";
}

int sample_token(const Eigen::RowVectorXf& logits, const SamplingParams& sp, Rng& rng) {
    sp.validate();
    check(logits.allFinite(), "sample_token: non-finite logits");
    const int n = static_cast<int>(logits.cols());

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Stable sort keeps the lowest index first among equal logits.
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return logits(a) > logits(b); });
    int kept = (sp.top_k > 0) ? std::min(sp.top_k, n) : n;
    if (kept == 1) return order[0];

    double mx = logits(order[0]);
    std::vector<double> probs(kept);
    double z = 0.0;
    for (int i = 0; i < kept; ++i) {
        probs[i] = std::exp((static_cast<double>(logits(order[i])) - mx) / sp.temperature);
        z += probs[i];
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng) * z;
    double acc = 0.0;
    for (int i = 0; i < kept; ++i) {
        acc += probs[i];
        if (u < acc) return order[i];
    }
    return order[kept - 1];
}

Decoder::Decoder(const ParamsF& params, bool use_cache)
    : params_(params), use_cache_(use_cache) {
    if (use_cache_) cache_.reset(params.global, params.cfg.max_positions());
    inputs_.resize(0, params.cfg.d_global);
}

void Decoder::feed_row(const Eigen::RowVectorXf& row) {
    check(pos_ < params_.cfg.max_positions(), "decoder: positional table exhausted");
    if (use_cache_) {
        MatrixF r(1, row.cols());
        r.row(0) = row;
        last_hidden_ = nn::stack_fwd_incremental(params_.global, cache_, r).row(0);
    } else {
        inputs_.conservativeResize(inputs_.rows() + 1, Eigen::NoChange);
        inputs_.row(inputs_.rows() - 1) = row;
        nn::StackCache<float> tmp;
        MatrixF h = nn::stack_fwd(params_.global, inputs_, tmp);
        last_hidden_ = h.row(h.rows() - 1);
    }
    pos_++;
}

void Decoder::feed_semantic(int id) {
    const ModelConfig& cfg = params_.cfg;
    check(id >= 0 && id < cfg.sem_vocab(), "decoder: semantic id out of range");
    feed_row(params_.emb_semantic.row(id) + params_.pos_global.row(pos_));
}

void Decoder::feed_frame(const std::vector<int>& codes) {
    const ModelConfig& cfg = params_.cfg;
    check(static_cast<int>(codes.size()) == cfg.depth, "decoder: frame depth mismatch");
    Eigen::RowVectorXf row = params_.pos_global.row(pos_);
    for (int q = 0; q < cfg.depth; ++q) {
        check(codes[q] >= 0 && codes[q] < cfg.n_acoustic, "decoder: acoustic code out of range");
        row += params_.emb_acoustic_g[q].row(codes[q]);
    }
    feed_row(row);
}

std::vector<int> Decoder::sample_frame(const SamplingParams& sp, Rng& rng) {
    const ModelConfig& cfg = params_.cfg;
    check(pos_ > 0, "decoder: sample_frame before any context");
    MatrixF h_cond(1, cfg.d_global);
    h_cond.row(0) = last_hidden_;

    std::vector<int> codes;
    codes.reserve(cfg.depth);
    MatrixF lx(cfg.depth, cfg.d_local);
    lx.row(0) = nn::linear_fwd(params_.proj_g2l, h_cond).row(0) + params_.pos_local.row(0);
    for (int k = 0; k < cfg.depth; ++k) {
        if (k > 0)
            lx.row(k) = params_.emb_acoustic_l[k - 1].row(codes[k - 1]) + params_.pos_local.row(k);
        nn::StackCache<float> tmp;
        MatrixF lh = nn::stack_fwd(params_.local, MatrixF(lx.topRows(k + 1)), tmp);
        MatrixF logits = nn::linear_fwd(params_.out_acoustic[k], MatrixF(lh.row(k)));
        codes.push_back(sample_token(logits.row(0), sp, rng));
    }
    return codes;
}

namespace {

// Feeds [BOS, semantic..., EOS, BOUNDARY] into a fresh decoder.
void feed_context(Decoder& dec, const ParamsF& params, const SemanticSeq& semantic) {
    const ModelConfig& cfg = params.cfg;
    dec.feed_semantic(cfg.bos());
    for (int id : semantic) dec.feed_semantic(id);
    dec.feed_semantic(cfg.eos_sem());
    dec.feed_semantic(cfg.boundary());
}

AcousticGrid extend_acoustic(Decoder& dec, const ParamsF& params, const AcousticGrid& prefix,
                             long target_frames, const SamplingParams& sp, Rng& rng) {
    AcousticGrid out = prefix;
    for (const auto& codes : prefix.codes) dec.feed_frame(codes);
    while (out.frames() < target_frames) {
        std::vector<int> codes = dec.sample_frame(sp, rng);
        dec.feed_frame(codes);
        out.codes.push_back(std::move(codes));
    }
    return out;
}

}  // namespace

long default_acoustic_len(long t1_deduped, double semantic_rate_hz, double acoustic_rate_hz) {
    return static_cast<long>(
        std::ceil(1.5 * static_cast<double>(t1_deduped) * acoustic_rate_hz / semantic_rate_hz));
}

SemanticSeq generate_semantic(const ParamsF& params, const SemanticSeq& prefix,
                              const SamplingParams& sp, bool use_cache) {
    sp.validate();
    const ModelConfig& cfg = params.cfg;
    Rng rng(sp.seed);
    Decoder dec(params, use_cache);
    dec.feed_semantic(cfg.bos());

    SemanticSeq out;
    for (int id : prefix) {
        if (id == cfg.eos_sem()) return out;  // prompt already closed
        dec.feed_semantic(id);
        if (id < cfg.n_semantic) out.push_back(id);
    }
    while (static_cast<int>(out.size()) < sp.max_semantic_len) {
        MatrixF h(1, cfg.d_global);
        h.row(0) = dec.last_hidden();
        MatrixF logits = semantic_logits(params, h);
        int id = sample_token(logits.row(0), sp, rng);
        if (id >= cfg.n_semantic) break;  // any special ends the semantic stream
        out.push_back(id);
        dec.feed_semantic(id);
    }
    return out;
}

AcousticGrid generate_acoustic(const ParamsF& params, const SemanticSeq& semantic,
                               const AcousticGrid& prefix, const SamplingParams& sp,
                               bool use_cache) {
    sp.validate();
    check(!semantic.empty(), "generate_acoustic: empty semantic condition");
    Rng rng(sp.seed);
    Decoder dec(params, use_cache);
    feed_context(dec, params, semantic);

    long target = sp.max_acoustic_len > 0
                      ? sp.max_acoustic_len
                      : default_acoustic_len(static_cast<long>(semantic.size()),
                                             sp.semantic_rate_hz, sp.acoustic_rate_hz);
    target = std::max(target, static_cast<long>(prefix.frames()));
    return extend_acoustic(dec, params, prefix, target, sp, rng);
}

AcousticGrid speaker_transfer(const ParamsF& params, const SemanticSeq& s_prompt,
                              const SemanticSeq& s_target, const AcousticGrid& a_prompt,
                              const SemanticSeq& silence, const SamplingParams& sp,
                              bool use_cache) {
    sp.validate();
    check(!s_prompt.empty() && !s_target.empty(), "speaker_transfer: empty semantic input");
    check(a_prompt.frames() > 0, "speaker_transfer: empty acoustic prompt");

    SemanticSeq combined = s_prompt;
    combined.insert(combined.end(), silence.begin(), silence.end());
    combined.insert(combined.end(), s_target.begin(), s_target.end());

    Rng rng(sp.seed);
    Decoder dec(params, use_cache);
    feed_context(dec, params, combined);

    long new_frames = sp.max_acoustic_len > 0
                          ? sp.max_acoustic_len
                          : default_acoustic_len(static_cast<long>(s_target.size()),
                                                 sp.semantic_rate_hz, sp.acoustic_rate_hz);
    long target = a_prompt.frames() + new_frames;
    AcousticGrid full = extend_acoustic(dec, params, a_prompt, target, sp, rng);

    AcousticGrid out;
    out.codes.assign(full.codes.begin() + a_prompt.frames(), full.codes.end());
    return out;
}

AcousticGrid acoustic_continuation(const ParamsF& params, const SemanticSeq& s_target,
                                   const AcousticGrid& prefix_3s, const SamplingParams& sp,
                                   bool use_cache) {
    long max_prefix = std::lround(3.0 * sp.acoustic_rate_hz);
    check(prefix_3s.frames() <= max_prefix,
          "acoustic_continuation: prefix longer than 3 s (" +
              std::to_string(prefix_3s.frames()) + " > " + std::to_string(max_prefix) + " frames)");
    AcousticGrid full = generate_acoustic(params, s_target, prefix_3s, sp, use_cache);
    AcousticGrid out;
    out.codes.assign(full.codes.begin() + prefix_3s.frames(), full.codes.end());
    return out;
}

SemanticSeq make_silence_tokens(double duration_s, const SemanticCodebook& cb,
                                const Eigen::RowVectorXf& silence_profile,
                                double semantic_rate_hz) {
    check(duration_s > 0.0, "make_silence_tokens: duration must be > 0");
    long n = std::lround(duration_s * semantic_rate_hz);
    FrameSeq fs;
    fs.frame_rate_hz = semantic_rate_hz;
    fs.frames.resize(n, silence_profile.cols());
    for (long i = 0; i < n; ++i) fs.frames.row(i) = silence_profile;
    return semantic_encode(fs, cb);
}

}  // namespace hislm
