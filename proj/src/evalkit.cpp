#include "hislm/evalkit.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace hislm {

long edit_distance(const SemanticSeq& a, const SemanticSeq& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<long> prev(m + 1), cur(m + 1);
    for (size_t j = 0; j <= m; ++j) prev[j] = static_cast<long>(j);
    for (size_t i = 1; i <= n; ++i) {
        cur[0] = static_cast<long>(i);
        for (size_t j = 1; j <= m; ++j) {
            long sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[m];
}

double edit_similarity(const SemanticSeq& a, const SemanticSeq& b) {
    size_t denom = std::max(a.size(), b.size());
    if (denom == 0) return 1.0;
    return 1.0 - static_cast<double>(edit_distance(a, b)) / static_cast<double>(denom);
}

double content_accuracy(const AcousticGrid& generated, const SemanticSeq& target,
                        const SemanticCodebook& sem_cb, const RvqCodebooks& rvq_cbs,
                        double semantic_rate_hz, double acoustic_rate_hz) {
    check(generated.frames() > 0, "content_accuracy: empty generated grid");
    check(!target.empty(), "content_accuracy: empty target sequence");

    FrameSeq decoded = rvq_decode(generated, rvq_cbs, acoustic_rate_hz);

    // Nearest-time resample from the acoustic to the semantic rate.
    long n_sem = std::lround(static_cast<double>(decoded.size()) * semantic_rate_hz /
                             acoustic_rate_hz);
    n_sem = std::max(1L, n_sem);
    FrameSeq resampled;
    resampled.frame_rate_hz = semantic_rate_hz;
    resampled.frames.resize(n_sem, decoded.dim());
    for (long i = 0; i < n_sem; ++i) {
        double time = (static_cast<double>(i) + 0.5) / semantic_rate_hz;
        long src = std::lround(time * acoustic_rate_hz - 0.5);
        src = std::max(0L, std::min(src, static_cast<long>(decoded.size()) - 1));
        resampled.frames.row(i) = decoded.frames.row(src);
    }

    SemanticSeq re_encoded = dedup(semantic_encode(resampled, sem_cb));
    return edit_similarity(re_encoded, dedup(target));
}

namespace {

int nearest_speaker(const Eigen::RowVectorXf& latent, const SynthCorpus& corpus) {
    const SynthCorpusSpec& spec = corpus.spec;
    int best = -1;
    double best_cos = -2.0;
    for (Eigen::Index s = 0; s < corpus.speaker_offsets.rows(); ++s) {
        Eigen::RowVectorXf ref = corpus.speaker_offsets.row(s).rightCols(spec.speaker_dims);
        double denom = static_cast<double>(latent.norm()) * ref.norm();
        check(denom > 1e-9, "speaker_match: degenerate (near-silent) input");
        double c = latent.dot(ref) / denom;
        if (c > best_cos) {
            best_cos = c;
            best = static_cast<int>(s);
        }
    }
    return best;
}

}  // namespace

SpeakerMatch speaker_match(const AcousticGrid& generated, const AcousticGrid& prompt,
                           const SynthCorpus& corpus, const RvqCodebooks& rvq_cbs) {
    check(generated.frames() > 0 && prompt.frames() > 0, "speaker_match: empty grid");
    FrameSeq gen_frames = rvq_decode(generated, rvq_cbs);
    FrameSeq prompt_frames = rvq_decode(prompt, rvq_cbs);

    Eigen::RowVectorXf lg = speaker_latent(gen_frames.frames, corpus.spec);
    Eigen::RowVectorXf lp = speaker_latent(prompt_frames.frames, corpus.spec);
    double denom = static_cast<double>(lg.norm()) * lp.norm();
    check(denom > 1e-9, "speaker_match: degenerate (near-silent) input");

    SpeakerMatch out;
    out.score = lg.dot(lp) / denom;
    out.nearest_generated = nearest_speaker(lg, corpus);
    out.nearest_prompt = nearest_speaker(lp, corpus);
    out.match = out.nearest_generated == out.nearest_prompt;
    return out;
}

Spectrogram spectrogram(const FrameSeq& frames, int window, int hop) {
    check(frames.size() > 0, "spectrogram: empty frames");
    check(window >= 2 && hop >= 1, "spectrogram: window must be >= 2 and hop >= 1");
    check(window <= frames.size(), "spectrogram: window longer than signal");

    const long n = frames.size();
    Eigen::VectorXd signal(n);
    for (long t = 0; t < n; ++t) signal(t) = frames.frames.row(t).mean();

    const int bins = window / 2 + 1;
    const long cols = (n - window) / hop + 1;
    Spectrogram spec;
    spec.magnitude.resize(bins, cols);

    Eigen::VectorXd hann(window);
    for (int i = 0; i < window; ++i)
        hann(i) = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (window - 1)));

    for (long c = 0; c < cols; ++c) {
        Eigen::VectorXd seg = signal.segment(c * hop, window).cwiseProduct(hann);
        for (int k = 0; k < bins; ++k) {
            double re = 0.0, im = 0.0;
            for (int i = 0; i < window; ++i) {
                double ang = -2.0 * M_PI * k * i / window;
                re += seg(i) * std::cos(ang);
                im += seg(i) * std::sin(ang);
            }
            spec.magnitude(k, c) = static_cast<float>(std::sqrt(re * re + im * im));
        }
    }
    return spec;
}

void write_spectrogram_txt(const Spectrogram& spec, const std::string& path) {
    std::ofstream os(path);
    check(os.good(), "cannot open for write: " + path);
    for (Eigen::Index i = 0; i < spec.magnitude.rows(); ++i) {
        for (Eigen::Index j = 0; j < spec.magnitude.cols(); ++j) {
            if (j) os << ' ';
            os << spec.magnitude(i, j);
        }
        os << '\n';
    }
    check(os.good(), "write failed: " + path);
}

namespace {

void png_chunk(std::ofstream& os, const char* type, const std::vector<unsigned char>& data) {
    auto be32 = [&os](uint32_t v) {
        unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v)};
        os.write(reinterpret_cast<char*>(b), 4);
    };
    be32(static_cast<uint32_t>(data.size()));
    os.write(type, 4);
    if (!data.empty()) os.write(reinterpret_cast<const char*>(data.data()), data.size());
    uLong crc = crc32(0L, reinterpret_cast<const Bytef*>(type), 4);
    if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
    be32(static_cast<uint32_t>(crc));
}

}  // namespace

void write_spectrogram_png(const Spectrogram& spec, const std::string& path) {
    const Eigen::Index rows = spec.magnitude.rows(), cols = spec.magnitude.cols();
    check(rows > 0 && cols > 0, "write_spectrogram_png: empty spectrogram");
    float mx = spec.magnitude.maxCoeff();
    if (mx <= 0.0f) mx = 1.0f;

    // Filter byte 0 per scanline; low frequency bins at the bottom of the image.
    std::vector<unsigned char> raw;
    raw.reserve(static_cast<size_t>(rows) * (cols + 1));
    for (Eigen::Index i = rows - 1; i >= 0; --i) {
        raw.push_back(0);
        for (Eigen::Index j = 0; j < cols; ++j) {
            float v = spec.magnitude(i, j) / mx;
            raw.push_back(static_cast<unsigned char>(std::lround(255.0f * v)));
        }
    }
    uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_size);
    check(compress(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size())) == Z_OK,
          "png: zlib compression failed");
    comp.resize(comp_size);

    std::ofstream os(path, std::ios::binary);
    check(os.good(), "cannot open for write: " + path);
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    os.write(reinterpret_cast<const char*>(sig), 8);

    std::vector<unsigned char> ihdr(13, 0);
    uint32_t w = static_cast<uint32_t>(cols), h = static_cast<uint32_t>(rows);
    ihdr[0] = w >> 24; ihdr[1] = w >> 16; ihdr[2] = w >> 8; ihdr[3] = w;
    ihdr[4] = h >> 24; ihdr[5] = h >> 16; ihdr[6] = h >> 8; ihdr[7] = h;
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 0;   // grayscale
    png_chunk(os, "IHDR", ihdr);
    png_chunk(os, "IDAT", comp);
    png_chunk(os, "IEND", {});
    check(os.good(), "write failed: " + path);
}

nlohmann::json EvalReport::to_json() const {
    nlohmann::json rows_json = nlohmann::json::array();
    for (const EvalRow& r : rows) {
        rows_json.push_back({{"index", r.index},
                             {"content_accuracy", r.content_accuracy},
                             {"speaker_score", r.speaker_score},
                             {"speaker_matched", r.speaker_matched}});
    }
    return nlohmann::json{
        {"caveat", "proxy metrics on the synthetic corpus, not ASR/speaker-model WER/SPK"},
        {"content_accuracy", content_accuracy},
        {"speaker_match_rate", speaker_match_rate},
        {"reconstruction_mse", reconstruction_mse},
        {"rows", rows_json}};
}

}  // namespace hislm
