#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hislm/tokenhub.hpp"

namespace hislm {

// Synthetic stand-in for a speech corpus. Each utterance is a random symbol
// sequence rendered to feature frames at two rates from one time axis:
//   semantic stream frame  = content embedding + noise        (speaker-free)
//   acoustic stream frame  = content embedding + timbre offset + noise
// Content embeddings live in the first feature_dim - speaker_dims
// coordinates and timbre offsets in the last speaker_dims, so the speaker
// latent of any utterance is linearly recoverable from frame means.
struct SynthCorpusSpec {
    int n_speakers = 8;
    int n_utterances = 200;
    double min_seconds = 2.0;
    double max_seconds = 4.0;
    int content_alphabet = 16;
    int feature_dim = 16;
    int speaker_dims = 8;
    double symbol_seconds = 0.2;  // hold time per content symbol
    double semantic_rate_hz = 50.0;
    double acoustic_rate_hz = 75.0;
    double noise_level = 0.01;
    uint64_t seed = 0;

    int content_dims() const { return feature_dim - speaker_dims; }
    void validate() const;
    nlohmann::json to_json() const;
    static SynthCorpusSpec from_json(const nlohmann::json& j);
};

struct SynthUtterance {
    FrameSeq semantic_frames;
    FrameSeq acoustic_frames;
    int speaker_id = 0;
    int content_id = 0;  // utterance index; symbol sequence lives in SynthCorpus
    std::vector<int> content_symbols;
    double seconds = 0.0;
};

struct SynthCorpus {
    SynthCorpusSpec spec;
    MatrixF content_embeddings;        // alphabet x feature_dim, speaker dims zero
    MatrixF speaker_offsets;           // n_speakers x feature_dim, content dims zero
    Eigen::RowVectorXf silence_profile;  // all-zero frame
    std::vector<SynthUtterance> utterances;
};

// Deterministic under spec.seed. Timbre offsets are rejection-sampled to a
// pairwise Euclidean separation of at least kSpeakerMargin.
constexpr double kSpeakerMargin = 1.5;
constexpr double kContentMargin = 1.0;

SynthCorpus synth_corpus(const SynthCorpusSpec& spec);

// Directory layout: meta.json plus uttNNNN.{sem,ac}.hsfm frame files.
void write_corpus(const SynthCorpus& corpus, const std::string& dir);
SynthCorpus load_corpus(const std::string& dir);

// Speaker-latent estimate: mean of the speaker-subspace coordinates.
Eigen::RowVectorXf speaker_latent(const MatrixF& frames, const SynthCorpusSpec& spec);

}  // namespace hislm
