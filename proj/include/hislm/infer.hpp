#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hislm/model.hpp"

namespace hislm {

struct SamplingParams {
    double temperature = 1.0;
    int top_k = 32;              // 0 means no top-k filtering
    int max_semantic_len = 256;
    int max_acoustic_len = 0;    // 0: rate-ratio heuristic from the semantic length
    uint64_t seed = 0;
    double semantic_rate_hz = 50.0;
    double acoustic_rate_hz = 75.0;

    void validate() const {
        check(temperature > 0.0, "temperature must be > 0");
        check(top_k >= 0, "top_k must be >= 0");
    }
};

enum class GenMode { Unconditional, SemanticToAcoustic, SpeakerTransfer, AcousticContinuation };

GenMode parse_mode(const std::string& name);
std::string mode_name(GenMode mode);

struct GenRequest {
    GenMode mode = GenMode::Unconditional;
    SemanticSeq semantic_prompt;   // S_p
    AcousticGrid acoustic_prompt;  // A_p (or the 3 s prefix for continuation)
    SemanticSeq semantic_target;   // S_t
    SamplingParams params;
};

// Temperature-scaled, top-k-filtered categorical sample; top_k == 1 is argmax.
int sample_token(const Eigen::RowVectorXf& logits, const SamplingParams& sp, Rng& rng);

// Incremental decoding state over the global stack. With use_cache the
// forward cost per position is O(context); without it every position
// re-forwards the whole prefix (reference path for equivalence checks).
class Decoder {
  public:
    Decoder(const ParamsF& params, bool use_cache = true);

    void feed_semantic(int id);                        // raw or special id
    void feed_frame(const std::vector<int>& codes);    // one acoustic row
    const Eigen::RowVectorXf& last_hidden() const { return last_hidden_; }
    int position() const { return pos_; }

    // Samples the D codes of the next frame through the local stack,
    // conditioned on the current last hidden state.
    std::vector<int> sample_frame(const SamplingParams& sp, Rng& rng);

  private:
    void feed_row(const Eigen::RowVectorXf& row);

    const ParamsF& params_;
    bool use_cache_;
    nn::KvCache<float> cache_;
    MatrixF inputs_;  // grows only on the recompute path
    Eigen::RowVectorXf last_hidden_;
    int pos_ = 0;
};

// Samples semantic tokens until the end-of-semantic special or
// max_semantic_len; the returned sequence contains no specials.
SemanticSeq generate_semantic(const ParamsF& params, const SemanticSeq& prefix,
                              const SamplingParams& sp, bool use_cache = true);

// Builds [BOS, S, EOS, BOUNDARY, A_prefix] and extends the acoustic grid to
// the target length. Returns the full grid including the prefix.
AcousticGrid generate_acoustic(const ParamsF& params, const SemanticSeq& semantic,
                               const AcousticGrid& prefix, const SamplingParams& sp,
                               bool use_cache = true);

// Voice transfer: context [BOS, S_p, silence, S_t, EOS, BOUNDARY, A_p];
// returns only the newly generated frames.
AcousticGrid speaker_transfer(const ParamsF& params, const SemanticSeq& s_prompt,
                              const SemanticSeq& s_target, const AcousticGrid& a_prompt,
                              const SemanticSeq& silence, const SamplingParams& sp,
                              bool use_cache = true);

// Continues after a (up to) 3 s acoustic prefix; returns only the continuation.
AcousticGrid acoustic_continuation(const ParamsF& params, const SemanticSeq& s_target,
                                   const AcousticGrid& prefix_3s, const SamplingParams& sp,
                                   bool use_cache = true);

// Encodes round(duration_s * rate) silence-profile frames; no dedup, so the
// inserted pause keeps its duration in the model's view.
SemanticSeq make_silence_tokens(double duration_s, const SemanticCodebook& cb,
                                const Eigen::RowVectorXf& silence_profile,
                                double semantic_rate_hz = 50.0);

// Default generated-frame budget: ceil(1.5 * T1 * acoustic_rate / semantic_rate).
long default_acoustic_len(long t1_deduped, double semantic_rate_hz, double acoustic_rate_hz);

}  // namespace hislm
