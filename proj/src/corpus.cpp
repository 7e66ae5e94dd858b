#include "hislm/corpus.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "hislm/serialize.hpp"

namespace hislm {

void SynthCorpusSpec::validate() const {
    check(n_speakers >= 1, "synth corpus: need at least one speaker");
    check(n_utterances >= 1, "synth corpus: need at least one utterance");
    check(min_seconds > 0.0 && max_seconds >= min_seconds, "synth corpus: bad duration range");
    check(content_alphabet >= 1, "synth corpus: content alphabet must be >= 1");
    check(feature_dim >= 2 && speaker_dims >= 1 && speaker_dims < feature_dim,
          "synth corpus: need separate content and speaker subspaces");
    check(symbol_seconds > 0.0, "synth corpus: symbol hold time must be > 0");
    check(semantic_rate_hz > 0.0 && acoustic_rate_hz > 0.0, "synth corpus: rates must be > 0");
    check(noise_level >= 0.0, "synth corpus: noise level must be >= 0");
}

nlohmann::json SynthCorpusSpec::to_json() const {
    return nlohmann::json{{"n_speakers", n_speakers},
                          {"n_utterances", n_utterances},
                          {"min_seconds", min_seconds},
                          {"max_seconds", max_seconds},
                          {"content_alphabet", content_alphabet},
                          {"feature_dim", feature_dim},
                          {"speaker_dims", speaker_dims},
                          {"symbol_seconds", symbol_seconds},
                          {"semantic_rate_hz", semantic_rate_hz},
                          {"acoustic_rate_hz", acoustic_rate_hz},
                          {"noise_level", noise_level},
                          {"seed", seed}};
}

SynthCorpusSpec SynthCorpusSpec::from_json(const nlohmann::json& j) {
    SynthCorpusSpec s;
    s.n_speakers = j.value("n_speakers", s.n_speakers);
    s.n_utterances = j.value("n_utterances", s.n_utterances);
    s.min_seconds = j.value("min_seconds", s.min_seconds);
    s.max_seconds = j.value("max_seconds", s.max_seconds);
    s.content_alphabet = j.value("content_alphabet", s.content_alphabet);
    s.feature_dim = j.value("feature_dim", s.feature_dim);
    s.speaker_dims = j.value("speaker_dims", s.speaker_dims);
    s.symbol_seconds = j.value("symbol_seconds", s.symbol_seconds);
    s.semantic_rate_hz = j.value("semantic_rate_hz", s.semantic_rate_hz);
    s.acoustic_rate_hz = j.value("acoustic_rate_hz", s.acoustic_rate_hz);
    s.noise_level = j.value("noise_level", s.noise_level);
    s.seed = j.value("seed", s.seed);
    s.validate();
    return s;
}

namespace {

// Rejection-samples rows in a subspace until all pairwise distances clear margin.
MatrixF separated_rows(int n, int dim_total, int dim_lo, int dim_hi, double scale, double margin,
                       Rng& rng) {
    std::normal_distribution<double> dist(0.0, scale);
    MatrixF rows = MatrixF::Zero(n, dim_total);
    for (int i = 0; i < n; ++i) {
        for (int attempt = 0;; ++attempt) {
            check(attempt < 10000, "corpus: cannot satisfy separation margin; "
                                   "increase subspace dim or lower margin");
            for (int j = dim_lo; j < dim_hi; ++j) rows(i, j) = static_cast<float>(dist(rng));
            bool ok = true;
            for (int p = 0; p < i && ok; ++p)
                ok = (rows.row(i) - rows.row(p)).norm() >= margin;
            if (ok) break;
        }
    }
    return rows;
}

}  // namespace

Eigen::RowVectorXf speaker_latent(const MatrixF& frames, const SynthCorpusSpec& spec) {
    check(frames.rows() > 0, "speaker_latent: no frames");
    return frames.rightCols(spec.speaker_dims).colwise().mean();
}

SynthCorpus synth_corpus(const SynthCorpusSpec& spec) {
    spec.validate();
    SynthCorpus corpus;
    corpus.spec = spec;

    Rng struct_rng(split_seed(spec.seed, 0));
    corpus.content_embeddings = separated_rows(spec.content_alphabet, spec.feature_dim, 0,
                                               spec.content_dims(), 1.0, kContentMargin,
                                               struct_rng);
    corpus.speaker_offsets = separated_rows(spec.n_speakers, spec.feature_dim,
                                            spec.content_dims(), spec.feature_dim, 1.0,
                                            kSpeakerMargin, struct_rng);
    corpus.silence_profile = Eigen::RowVectorXf::Zero(spec.feature_dim);

    for (int u = 0; u < spec.n_utterances; ++u) {
        Rng rng(split_seed(spec.seed, 1000 + u));
        std::uniform_real_distribution<double> dur_dist(spec.min_seconds, spec.max_seconds);
        std::uniform_int_distribution<int> sym_dist(0, spec.content_alphabet - 1);
        std::normal_distribution<double> noise(0.0, spec.noise_level);

        SynthUtterance utt;
        utt.content_id = u;
        utt.speaker_id = u % spec.n_speakers;
        utt.seconds = dur_dist(rng);
        int n_symbols = static_cast<int>(std::ceil(utt.seconds / spec.symbol_seconds));
        utt.content_symbols.resize(n_symbols);
        for (int& s : utt.content_symbols) s = sym_dist(rng);

        auto render = [&](double rate, bool with_speaker) {
            FrameSeq fs;
            fs.frame_rate_hz = rate;
            long n = std::lround(utt.seconds * rate);
            fs.frames.resize(n, spec.feature_dim);
            for (long t = 0; t < n; ++t) {
                double time = (static_cast<double>(t) + 0.5) / rate;
                int sym = std::min(static_cast<int>(time / spec.symbol_seconds), n_symbols - 1);
                fs.frames.row(t) = corpus.content_embeddings.row(utt.content_symbols[sym]);
                if (with_speaker) fs.frames.row(t) += corpus.speaker_offsets.row(utt.speaker_id);
                if (spec.noise_level > 0.0)
                    for (int j = 0; j < spec.feature_dim; ++j)
                        fs.frames(t, j) += static_cast<float>(noise(rng));
            }
            return fs;
        };
        utt.semantic_frames = render(spec.semantic_rate_hz, false);
        utt.acoustic_frames = render(spec.acoustic_rate_hz, true);
        corpus.utterances.push_back(std::move(utt));
    }
    return corpus;
}

namespace {

std::string utt_path(const std::string& dir, int u, const char* stream) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "utt%04d.%s.hsfm", u, stream);
    return dir + "/" + buf;
}

nlohmann::json matrix_to_json(const MatrixF& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixF matrix_from_json(const nlohmann::json& j) {
    if (j.empty()) return MatrixF(0, 0);
    MatrixF m(j.size(), j[0].size());
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = j[i][c].get<float>();
    return m;
}

}  // namespace

void write_corpus(const SynthCorpus& corpus, const std::string& dir) {
    std::filesystem::create_directories(dir);
    nlohmann::json meta;
    meta["spec"] = corpus.spec.to_json();
    meta["content_embeddings"] = matrix_to_json(corpus.content_embeddings);
    meta["speaker_offsets"] = matrix_to_json(corpus.speaker_offsets);
    nlohmann::json utts = nlohmann::json::array();
    for (const SynthUtterance& u : corpus.utterances) {
        utts.push_back({{"speaker_id", u.speaker_id},
                        {"content_id", u.content_id},
                        {"content_symbols", u.content_symbols},
                        {"seconds", u.seconds}});
    }
    meta["utterances"] = std::move(utts);
    std::ofstream os(dir + "/meta.json");
    check(os.good(), "cannot open for write: " + dir + "/meta.json");
    os << meta.dump(2) << "\n";
    check(os.good(), "write failed: " + dir + "/meta.json");

    for (size_t u = 0; u < corpus.utterances.size(); ++u) {
        save_frames(corpus.utterances[u].semantic_frames, utt_path(dir, static_cast<int>(u), "sem"));
        save_frames(corpus.utterances[u].acoustic_frames, utt_path(dir, static_cast<int>(u), "ac"));
    }
}

SynthCorpus load_corpus(const std::string& dir) {
    std::ifstream is(dir + "/meta.json");
    check(is.good(), "missing corpus metadata: " + dir + "/meta.json");
    nlohmann::json meta = nlohmann::json::parse(is);

    SynthCorpus corpus;
    corpus.spec = SynthCorpusSpec::from_json(meta.at("spec"));
    corpus.content_embeddings = matrix_from_json(meta.at("content_embeddings"));
    corpus.speaker_offsets = matrix_from_json(meta.at("speaker_offsets"));
    corpus.silence_profile = Eigen::RowVectorXf::Zero(corpus.spec.feature_dim);
    int u = 0;
    for (const nlohmann::json& j : meta.at("utterances")) {
        SynthUtterance utt;
        utt.speaker_id = j.at("speaker_id").get<int>();
        utt.content_id = j.at("content_id").get<int>();
        utt.content_symbols = j.at("content_symbols").get<std::vector<int>>();
        utt.seconds = j.at("seconds").get<double>();
        utt.semantic_frames = load_frames(utt_path(dir, u, "sem"));
        utt.acoustic_frames = load_frames(utt_path(dir, u, "ac"));
        corpus.utterances.push_back(std::move(utt));
        u++;
    }
    return corpus;
}

}  // namespace hislm
