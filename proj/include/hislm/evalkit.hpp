#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hislm/corpus.hpp"
#include "hislm/tokenhub.hpp"

namespace hislm {

// Token-level Levenshtein distance.
long edit_distance(const SemanticSeq& a, const SemanticSeq& b);

// 1 - normalized edit distance between deduped sequences; 1.0 iff equal.
double edit_similarity(const SemanticSeq& a, const SemanticSeq& b);

// WER proxy: decode the generated grid, resample to the semantic rate,
// re-encode through the semantic codebook, dedup, and score against the
// deduped target by edit similarity.
double content_accuracy(const AcousticGrid& generated, const SemanticSeq& target,
                        const SemanticCodebook& sem_cb, const RvqCodebooks& rvq_cbs,
                        double semantic_rate_hz = 50.0, double acoustic_rate_hz = 75.0);

struct SpeakerMatch {
    double score = 0.0;  // cosine similarity of estimated speaker latents
    int nearest_generated = -1;
    int nearest_prompt = -1;
    bool match = false;
};

// SPK proxy: estimates speaker latents from decoded frames (the corpus puts
// timbre offsets in a dedicated subspace) and compares nearest corpus speakers.
SpeakerMatch speaker_match(const AcousticGrid& generated, const AcousticGrid& prompt,
                           const SynthCorpus& corpus, const RvqCodebooks& rvq_cbs);

struct Spectrogram {
    MatrixF magnitude;  // bins x columns
};

// Short-time DFT magnitude of the per-frame feature mean (Hann window).
Spectrogram spectrogram(const FrameSeq& frames, int window, int hop);

void write_spectrogram_txt(const Spectrogram& spec, const std::string& path);
// 8-bit grayscale PNG, magnitude normalized to [0, 255], low bins at the bottom.
void write_spectrogram_png(const Spectrogram& spec, const std::string& path);

struct EvalRow {
    int index = 0;
    double content_accuracy = 0.0;
    double speaker_score = 0.0;
    bool speaker_matched = false;
};

struct EvalReport {
    double content_accuracy = 0.0;   // mean over rows
    double speaker_match_rate = 0.0;
    double reconstruction_mse = 0.0;
    std::vector<EvalRow> rows;

    nlohmann::json to_json() const;
};

}  // namespace hislm
