// Command-line pipeline: synth-corpus -> tokenize -> train -> generate ->
// bench/eval. Every command is deterministic under --seed; flags override a
// --config JSON file which overrides built-in defaults.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "hislm/corpus.hpp"
#include "hislm/evalkit.hpp"
#include "hislm/infer.hpp"
#include "hislm/perf.hpp"
#include "hislm/serialize.hpp"
#include "hislm/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string default_out(const std::string& leaf) {
    const char* root = std::getenv("HISLM_OUT");
    return (root ? std::string(root) : std::string(".")) + "/" + leaf;
}

json load_json_file(const std::string& path) {
    std::ifstream is(path);
    hislm::check(is.good(), "cannot open config file: " + path);
    return json::parse(is);
}

void write_json_file(const json& j, const std::string& path) {
    std::ofstream os(path);
    hislm::check(os.good(), "cannot open for write: " + path);
    os << j.dump(2) << "\n";
}

// Writes the generation output file: one header line with mode and sampling
// params, then token records in the standard JSON-lines format.
void save_generation(const std::string& path, const std::string& mode,
                     const hislm::SamplingParams& sp,
                     const std::vector<hislm::TokenRecord>& records) {
    std::ofstream os(path);
    hislm::check(os.good(), "cannot open for write: " + path);
    json header = {{"mode", mode},
                   {"params",
                    {{"temperature", sp.temperature},
                     {"top_k", sp.top_k},
                     {"max_semantic_len", sp.max_semantic_len},
                     {"max_acoustic_len", sp.max_acoustic_len},
                     {"seed", sp.seed}}}};
    os << header.dump() << "\n";
    for (const hislm::TokenRecord& rec : records) {
        json line;
        line["semantic"] = rec.semantic;
        line["acoustic"] = rec.acoustic.codes;
        line["meta"] = {{"content_id", rec.content_id}, {"speaker_id", rec.speaker_id}};
        os << line.dump() << "\n";
    }
}

// Reads a token file that may start with a generation header line.
std::vector<hislm::TokenRecord> load_generation(const std::string& path) {
    std::ifstream is(path);
    hislm::check(is.good(), "cannot open: " + path);
    std::vector<hislm::TokenRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        if (j.contains("mode")) continue;  // header
        hislm::TokenRecord rec;
        rec.semantic = j.at("semantic").get<hislm::SemanticSeq>();
        rec.acoustic.codes = j.at("acoustic").get<std::vector<std::vector<int>>>();
        rec.content_id = j.at("meta").at("content_id").get<int>();
        rec.speaker_id = j.at("meta").at("speaker_id").get<int>();
        out.push_back(std::move(rec));
    }
    return out;
}

int cmd_synth_corpus(const std::string& out_dir, const hislm::SynthCorpusSpec& spec) {
    hislm::SynthCorpus corpus = hislm::synth_corpus(spec);
    hislm::write_corpus(corpus, out_dir);
    std::cout << "wrote " << corpus.utterances.size() << " utterances ("
              << spec.n_speakers << " speakers) to " << out_dir << "\n";
    return 0;
}

int cmd_tokenize(const std::string& corpus_dir, const std::string& out_dir, int n_semantic,
                 int n_acoustic, int depth, int iters, uint64_t seed, bool refit) {
    hislm::SynthCorpus corpus = hislm::load_corpus(corpus_dir);
    fs::create_directories(out_dir);
    std::string sem_path = out_dir + "/semantic.hscb";
    std::string ac_path = out_dir + "/acoustic.hscb";

    hislm::SemanticCodebook sem_cb;
    hislm::RvqCodebooks rvq_cbs;
    if (!refit && fs::exists(sem_path) && fs::exists(ac_path)) {
        sem_cb = hislm::load_semantic_codebook(sem_path);
        rvq_cbs = hislm::load_codebooks(ac_path);
        std::cout << "reusing fitted codebooks in " << out_dir << "\n";
    } else {
        long sem_rows = 0, ac_rows = 0;
        for (const auto& u : corpus.utterances) {
            sem_rows += u.semantic_frames.size();
            ac_rows += u.acoustic_frames.size();
        }
        hislm::MatrixF sem_all(sem_rows, corpus.spec.feature_dim);
        hislm::MatrixF ac_all(ac_rows, corpus.spec.feature_dim);
        long si = 0, ai = 0;
        for (const auto& u : corpus.utterances) {
            sem_all.middleRows(si, u.semantic_frames.size()) = u.semantic_frames.frames;
            si += u.semantic_frames.size();
            ac_all.middleRows(ai, u.acoustic_frames.size()) = u.acoustic_frames.frames;
            ai += u.acoustic_frames.size();
        }
        sem_cb = hislm::fit_kmeans(sem_all, n_semantic, iters, hislm::split_seed(seed, 0));
        rvq_cbs = hislm::fit_rvq(ac_all, depth, n_acoustic, iters, hislm::split_seed(seed, 1));
        hislm::save_semantic_codebook(sem_cb, sem_path);
        hislm::save_codebooks(rvq_cbs, ac_path);
    }

    std::vector<hislm::TokenRecord> records;
    std::map<int, long> sem_hist;
    std::map<int, long> ac_hist;
    for (const auto& u : corpus.utterances) {
        hislm::TokenRecord rec;
        rec.semantic = hislm::semantic_encode(u.semantic_frames, sem_cb);
        rec.acoustic = hislm::rvq_encode(u.acoustic_frames, rvq_cbs);
        rec.content_id = u.content_id;
        rec.speaker_id = u.speaker_id;
        for (int t : rec.semantic) sem_hist[t]++;
        for (const auto& row : rec.acoustic.codes)
            for (int c : row) ac_hist[c]++;
        records.push_back(std::move(rec));
    }
    hislm::save_token_records(records, out_dir + "/tokens.jsonl");
    std::cout << "tokenized " << records.size() << " utterances; semantic vocab used "
              << sem_hist.size() << "/" << sem_cb.vocab() << ", acoustic vocab used "
              << ac_hist.size() << "/" << rvq_cbs.vocab() << " (per level pooled)\n";
    std::cout << "wrote " << out_dir << "/tokens.jsonl\n";
    return 0;
}

int cmd_train(const std::string& tokens_path, const std::string& out_dir,
              hislm::ModelConfig mcfg, hislm::TrainConfig tcfg, bool auto_vocab,
              bool overfit_one, const std::string& resume) {
    std::vector<hislm::TokenRecord> corpus = hislm::load_token_records(tokens_path);
    hislm::check(!corpus.empty(), "empty token file: " + tokens_path);
    if (overfit_one) {
        corpus.resize(1);
        tcfg.label_smooth = 0.0;  // smoothing bounds the loss away from 0
    }

    if (auto_vocab) {
        int max_sem = 0, max_ac = 0, depth = mcfg.depth;
        for (const auto& rec : corpus) {
            for (int t : rec.semantic) max_sem = std::max(max_sem, t + 1);
            if (rec.acoustic.frames() > 0) depth = rec.acoustic.depth();
            for (const auto& row : rec.acoustic.codes)
                for (int c : row) max_ac = std::max(max_ac, c + 1);
        }
        // Size the vocabularies to the data unless a config explicitly asked
        // for more; a model larger than the codebooks can sample code ids
        // that the quantizer cannot decode.
        hislm::ModelConfig stock;
        mcfg.n_semantic =
            mcfg.n_semantic == stock.n_semantic ? max_sem : std::max(mcfg.n_semantic, max_sem);
        mcfg.n_acoustic =
            mcfg.n_acoustic == stock.n_acoustic ? max_ac : std::max(mcfg.n_acoustic, max_ac);
        mcfg.depth = depth;
    }
    // Positional tables sized to the crop window plus slack.
    mcfg.max_t1 = std::max(mcfg.max_t1,
                           static_cast<int>(std::ceil(tcfg.crop_seconds * tcfg.semantic_rate_hz)) + 8);
    mcfg.max_t2 = std::max(mcfg.max_t2,
                           static_cast<int>(std::ceil(tcfg.crop_seconds * tcfg.acoustic_rate_hz)) + 8);
    mcfg.validate();
    tcfg.validate();

    fs::create_directories(out_dir);
    write_json_file(json{{"model", mcfg.to_json()}, {"train", tcfg.to_json()}},
                    out_dir + "/effective_config.json");

    std::string ckpt = out_dir + "/checkpoint.hsck";
    long report_every = std::max(1, tcfg.max_steps / 20);
    hislm::TrainResult result = hislm::run_training(
        corpus, mcfg, tcfg, ckpt, out_dir + "/metrics.jsonl", resume,
        [&](const hislm::StepMetrics& m) {
            if (m.step % report_every == 0 || m.step == tcfg.max_steps)
                std::cout << "step " << m.step << " lr " << m.lr << " loss/token "
                          << m.loss_total_per_token << " (sem " << m.loss_semantic_per_token
                          << ", ac " << m.loss_acoustic_per_token << ")\n";
        });
    std::cout << "wrote " << ckpt << "\n";
    return 0;
}

int cmd_generate(const std::string& ckpt_path, const std::string& codebook_dir,
                 const std::string& tokens_path, const std::string& out_dir,
                 const std::string& mode_name, int prompt_index, int target_index,
                 hislm::SamplingParams sp, bool no_cache, bool want_spectrogram) {
    hislm::GenMode mode = hislm::parse_mode(mode_name);
    hislm::ResumeState st = hislm::load_checkpoint(ckpt_path);
    const hislm::ParamsF& params = st.params;
    hislm::SemanticCodebook sem_cb = hislm::load_semantic_codebook(codebook_dir + "/semantic.hscb");
    hislm::RvqCodebooks rvq_cbs = hislm::load_codebooks(codebook_dir + "/acoustic.hscb");

    std::vector<hislm::TokenRecord> corpus;
    if (!tokens_path.empty()) corpus = hislm::load_token_records(tokens_path);
    auto record_at = [&](int idx, const char* what) -> const hislm::TokenRecord& {
        hislm::check(idx >= 0 && idx < static_cast<int>(corpus.size()),
                     std::string("generate: ") + what +
                         " index out of range (have " + std::to_string(corpus.size()) +
                         " records; pass --tokens)");
        return corpus[static_cast<size_t>(idx)];
    };

    bool cache = !no_cache;
    hislm::TokenRecord out_rec;
    switch (mode) {
        case hislm::GenMode::Unconditional: {
            hislm::SemanticSeq sem = hislm::generate_semantic(params, {}, sp, cache);
            hislm::check(!sem.empty(), "generate: empty unconditional semantic sample");
            out_rec.semantic = sem;
            out_rec.acoustic = hislm::generate_acoustic(params, sem, {}, sp, cache);
            break;
        }
        case hislm::GenMode::SemanticToAcoustic: {
            const auto& target = record_at(target_index, "--target");
            out_rec.semantic = hislm::dedup(target.semantic);
            out_rec.acoustic =
                hislm::generate_acoustic(params, out_rec.semantic, {}, sp, cache);
            out_rec.content_id = target.content_id;
            break;
        }
        case hislm::GenMode::SpeakerTransfer: {
            const auto& prompt = record_at(prompt_index, "--prompt");
            const auto& target = record_at(target_index, "--target");
            hislm::SemanticSeq silence = hislm::make_silence_tokens(
                0.1, sem_cb, Eigen::RowVectorXf::Zero(sem_cb.dim()), sp.semantic_rate_hz);
            out_rec.semantic = hislm::dedup(target.semantic);
            out_rec.acoustic = hislm::speaker_transfer(params, hislm::dedup(prompt.semantic),
                                                       out_rec.semantic, prompt.acoustic,
                                                       silence, sp, cache);
            out_rec.content_id = target.content_id;
            out_rec.speaker_id = prompt.speaker_id;
            break;
        }
        case hislm::GenMode::AcousticContinuation: {
            const auto& target = record_at(target_index, "--target");
            long prefix_len = std::min<long>(std::lround(3.0 * sp.acoustic_rate_hz),
                                             target.acoustic.frames());
            hislm::check(prefix_len > 0, "generate: --mode continue needs a 3 s acoustic prompt");
            hislm::AcousticGrid prefix;
            prefix.codes.assign(target.acoustic.codes.begin(),
                                target.acoustic.codes.begin() + prefix_len);
            out_rec.semantic = hislm::dedup(target.semantic);
            hislm::AcousticGrid cont =
                hislm::acoustic_continuation(params, out_rec.semantic, prefix, sp, cache);
            out_rec.acoustic = prefix;
            out_rec.acoustic.codes.insert(out_rec.acoustic.codes.end(), cont.codes.begin(),
                                          cont.codes.end());
            out_rec.content_id = target.content_id;
            out_rec.speaker_id = target.speaker_id;
            break;
        }
    }

    fs::create_directories(out_dir);
    save_generation(out_dir + "/generated.jsonl", mode_name, sp, {out_rec});
    hislm::FrameSeq decoded = hislm::rvq_decode(out_rec.acoustic, rvq_cbs, sp.acoustic_rate_hz);
    hislm::save_frames(decoded, out_dir + "/generated.ac.hsfm");
    if (want_spectrogram && decoded.size() >= 16) {
        hislm::Spectrogram spec = hislm::spectrogram(decoded, 16, 4);
        hislm::write_spectrogram_png(spec, out_dir + "/generated.png");
        hislm::write_spectrogram_txt(spec, out_dir + "/generated.spec.txt");
    }
    std::cout << "mode " << mode_name << ": " << out_rec.semantic.size()
              << " semantic tokens, " << out_rec.acoustic.frames() << " acoustic frames -> "
              << out_dir << "\n";
    return 0;
}

int cmd_bench(const std::string& out_dir, hislm::BenchConfig bcfg, uint64_t seed) {
    fs::create_directories(out_dir);
    std::vector<hislm::BenchRow> rows = hislm::bench_forward(bcfg, seed);
    hislm::write_bench_csv(rows, out_dir + "/bench.csv");
    hislm::write_bench_dat(rows, out_dir + "/bench.dat");

    // Analytical invariants gate the exit code.
    bool ok = true;
    for (const hislm::BenchRow& r : rows) {
        if (r.variant != "hier") continue;
        long long flat = hislm::attn_cost_flat(bcfg.n_global + bcfg.n_local, r.t2, r.depth);
        if (r.attn_cost >= flat) ok = false;
        double ratio = hislm::flops_flat(1.0, r.t2, r.depth) > 0 ? 1.0 : 0.0;
        (void)ratio;
    }
    for (int d : bcfg.depths) {
        double ratio = hislm::flops_flat(100.0, 512, d) / hislm::flops_hier(100.0, 0.0, 512, d);
        if (std::abs(ratio - d) > 1e-9) ok = false;
    }
    std::cout << "wrote " << out_dir << "/bench.csv (" << rows.size() << " rows), invariants "
              << (ok ? "ok" : "VIOLATED") << "\n";
    return ok ? 0 : 1;
}

int cmd_eval(const std::string& generated_path, const std::string& reference_path,
             const std::string& corpus_dir, const std::string& codebook_dir,
             const std::string& out_path) {
    std::vector<hislm::TokenRecord> generated = load_generation(generated_path);
    hislm::check(!generated.empty(), "eval: empty generated set");
    std::vector<hislm::TokenRecord> references = hislm::load_token_records(reference_path);
    hislm::SynthCorpus corpus = hislm::load_corpus(corpus_dir);
    hislm::SemanticCodebook sem_cb = hislm::load_semantic_codebook(codebook_dir + "/semantic.hscb");
    hislm::RvqCodebooks rvq_cbs = hislm::load_codebooks(codebook_dir + "/acoustic.hscb");

    auto find_by_content = [&](int content_id) -> const hislm::TokenRecord* {
        for (const auto& r : references)
            if (r.content_id == content_id) return &r;
        return nullptr;
    };
    auto find_by_speaker = [&](int speaker_id) -> const hislm::TokenRecord* {
        for (const auto& r : references)
            if (r.speaker_id == speaker_id) return &r;
        return nullptr;
    };

    hislm::EvalReport report;
    double mse_sum = 0.0;
    long mse_count = 0;
    int matched = 0;
    for (size_t i = 0; i < generated.size(); ++i) {
        const hislm::TokenRecord& gen = generated[i];
        const hislm::TokenRecord* ref = find_by_content(gen.content_id);
        hislm::check(ref != nullptr, "eval: no reference with content_id " +
                                         std::to_string(gen.content_id));
        hislm::EvalRow row;
        row.index = static_cast<int>(i);
        row.content_accuracy =
            hislm::content_accuracy(gen.acoustic, ref->semantic, sem_cb, rvq_cbs,
                                    corpus.spec.semantic_rate_hz, corpus.spec.acoustic_rate_hz);

        const hislm::TokenRecord* prompt = find_by_speaker(gen.speaker_id);
        hislm::check(prompt != nullptr, "eval: no reference with speaker_id " +
                                            std::to_string(gen.speaker_id));
        hislm::SpeakerMatch sm =
            hislm::speaker_match(gen.acoustic, prompt->acoustic, corpus, rvq_cbs);
        row.speaker_score = sm.score;
        row.speaker_matched = sm.match;
        if (sm.match) matched++;

        hislm::FrameSeq gd = hislm::rvq_decode(gen.acoustic, rvq_cbs);
        hislm::FrameSeq rd = hislm::rvq_decode(ref->acoustic, rvq_cbs);
        long common = std::min(gd.size(), rd.size());
        if (common > 0) {
            mse_sum += (gd.frames.topRows(common) - rd.frames.topRows(common)).squaredNorm() /
                       static_cast<double>(common * gd.dim());
            mse_count++;
        }
        report.content_accuracy += row.content_accuracy;
        report.rows.push_back(row);
    }
    report.content_accuracy /= static_cast<double>(generated.size());
    report.speaker_match_rate = static_cast<double>(matched) / generated.size();
    report.reconstruction_mse = mse_count ? mse_sum / mse_count : 0.0;

    write_json_file(report.to_json(), out_path);
    std::cout << "content_accuracy " << report.content_accuracy << ", speaker_match_rate "
              << report.speaker_match_rate << " -> " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical speech-token language model pipeline"};
    app.require_subcommand(1);

    // Config-file values become defaults; explicit flags override them.
    std::string pre_config;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") pre_config = argv[i + 1];

    // synth-corpus
    auto* sc = app.add_subcommand("synth-corpus", "generate a synthetic feature-frame corpus");
    hislm::SynthCorpusSpec spec;
    std::string sc_out = default_out("corpus");
    sc->add_option("--out", sc_out, "output directory");
    sc->add_option("--speakers", spec.n_speakers);
    sc->add_option("--utterances", spec.n_utterances);
    sc->add_option("--min-seconds", spec.min_seconds);
    sc->add_option("--max-seconds", spec.max_seconds);
    sc->add_option("--alphabet", spec.content_alphabet);
    sc->add_option("--feature-dim", spec.feature_dim);
    sc->add_option("--speaker-dims", spec.speaker_dims);
    sc->add_option("--symbol-seconds", spec.symbol_seconds);
    sc->add_option("--semantic-rate", spec.semantic_rate_hz);
    sc->add_option("--acoustic-rate", spec.acoustic_rate_hz);
    sc->add_option("--noise", spec.noise_level);
    sc->add_option("--seed", spec.seed);

    // tokenize
    auto* tk = app.add_subcommand("tokenize", "fit codebooks and emit token files");
    std::string tk_corpus, tk_out = default_out("tokens");
    int tk_ns = 64, tk_na = 64, tk_depth = 8, tk_iters = 20;
    uint64_t tk_seed = 0;
    bool tk_refit = false;
    tk->add_option("--corpus", tk_corpus, "corpus directory")->required();
    tk->add_option("--out", tk_out, "output directory");
    tk->add_option("--n-semantic", tk_ns, "semantic vocabulary size");
    tk->add_option("--n-acoustic", tk_na, "acoustic entries per level");
    tk->add_option("--depth", tk_depth, "residual quantizer count");
    tk->add_option("--iters", tk_iters, "k-means iterations");
    tk->add_option("--seed", tk_seed);
    tk->add_flag("--refit", tk_refit, "refit codebooks even if present");

    // train
    auto* tr = app.add_subcommand("train", "train the hierarchical model");
    std::string tr_tokens, tr_out = default_out("run"), tr_config, tr_resume;
    hislm::ModelConfig mcfg;
    hislm::TrainConfig tcfg;
    if (!pre_config.empty()) {
        json cfg = load_json_file(pre_config);
        if (cfg.contains("model")) mcfg = hislm::ModelConfig::from_json(cfg["model"]);
        if (cfg.contains("train")) tcfg = hislm::TrainConfig::from_json(cfg["train"]);
    }
    bool hi_res = false, overfit_one = false;
    int tr_steps = -1;
    tr->add_option("--tokens", tr_tokens, "token JSON-lines file")->required();
    tr->add_option("--out", tr_out, "output directory");
    tr->add_option("--config", tr_config, "JSON config file {model:{...}, train:{...}}");
    tr->add_option("--resume", tr_resume, "checkpoint to resume from");
    tr->add_option("--steps", tr_steps, "override max training steps");
    tr->add_option("--batch-size", tcfg.batch_size);
    tr->add_option("--lr", tcfg.lr_base);
    tr->add_option("--warmup", tcfg.warmup_steps);
    tr->add_option("--crop-seconds", tcfg.crop_seconds);
    tr->add_option("--label-smooth", tcfg.label_smooth);
    tr->add_option("--seed", tcfg.seed);
    tr->add_option("--checkpoint-every", tcfg.checkpoint_every);
    tr->add_option("--layers-global", mcfg.n_layers_global);
    tr->add_option("--layers-local", mcfg.n_layers_local);
    tr->add_option("--d-global", mcfg.d_global);
    tr->add_option("--d-local", mcfg.d_local);
    tr->add_option("--heads-global", mcfg.heads_global);
    tr->add_option("--heads-local", mcfg.heads_local);
    tr->add_option("--ffn-global", mcfg.ffn_global);
    tr->add_option("--ffn-local", mcfg.ffn_local);
    tr->add_option("--depth", mcfg.depth);
    tr->add_option("--drop-p", mcfg.drop_p);
    tr->add_flag("--hi-res", hi_res, "16 quantizers with local-drop 0.5");
    tr->add_flag("--overfit-one", overfit_one, "train on the first utterance only");

    // generate
    auto* gen = app.add_subcommand("generate", "run one of the four in-context modes");
    std::string g_ckpt, g_codebooks, g_tokens, g_out = default_out("gen"), g_mode;
    int g_prompt = -1, g_target = -1;
    hislm::SamplingParams sp;
    bool g_no_cache = false, g_spec = false;
    gen->add_option("--checkpoint", g_ckpt)->required();
    gen->add_option("--codebooks", g_codebooks, "directory with semantic.hscb/acoustic.hscb")
        ->required();
    gen->add_option("--tokens", g_tokens, "token file supplying prompts/targets");
    gen->add_option("--out", g_out, "output directory");
    gen->add_option("--mode", g_mode, "uncond|sem2ac|transfer|continue")->required();
    gen->add_option("--prompt-index", g_prompt, "prompt utterance index (transfer)");
    gen->add_option("--target-index", g_target, "target utterance index");
    gen->add_option("--temperature", sp.temperature);
    gen->add_option("--top-k", sp.top_k);
    gen->add_option("--max-semantic-len", sp.max_semantic_len);
    gen->add_option("--max-acoustic-len", sp.max_acoustic_len);
    gen->add_option("--seed", sp.seed);
    gen->add_flag("--no-cache", g_no_cache, "full-recompute decoding (reference path)");
    gen->add_flag("--spectrogram", g_spec, "also write a spectrogram of the decoded frames");

    // bench
    auto* bn = app.add_subcommand("bench", "flat-vs-hierarchical cost and timing report");
    std::string bn_out = default_out("bench");
    hislm::BenchConfig bcfg;
    uint64_t bn_seed = 0;
    bn->add_option("--out", bn_out, "output directory");
    bn->add_option("--depths", bcfg.depths, "quantizer depths to sweep");
    bn->add_option("--lengths", bcfg.lengths, "acoustic lengths T2 to sweep");
    bn->add_option("--repeats", bcfg.repeats);
    bn->add_option("--layers-global", bcfg.n_global);
    bn->add_option("--layers-local", bcfg.n_local);
    bn->add_option("--max-flat-tokens", bcfg.max_flat_tokens);
    bn->add_option("--seed", bn_seed);

    // eval
    auto* ev = app.add_subcommand("eval", "proxy content/speaker metrics");
    std::string e_gen, e_ref, e_corpus, e_codebooks, e_out = default_out("eval_report.json");
    ev->add_option("--generated", e_gen)->required();
    ev->add_option("--reference", e_ref, "reference token file")->required();
    ev->add_option("--corpus", e_corpus, "corpus directory (speaker latents)")->required();
    ev->add_option("--codebooks", e_codebooks)->required();
    ev->add_option("--out", e_out, "report path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sc->parsed()) return cmd_synth_corpus(sc_out, spec);
        if (tk->parsed())
            return cmd_tokenize(tk_corpus, tk_out, tk_ns, tk_na, tk_depth, tk_iters, tk_seed,
                                tk_refit);
        if (tr->parsed()) {
            if (hi_res) {
                mcfg.depth = 16;
                mcfg.drop_p = 0.5;
            }
            if (tr_steps >= 0) tcfg.max_steps = tr_steps;
            return cmd_train(tr_tokens, tr_out, mcfg, tcfg, true, overfit_one, tr_resume);
        }
        if (gen->parsed())
            return cmd_generate(g_ckpt, g_codebooks, g_tokens, g_out, g_mode, g_prompt, g_target,
                                sp, g_no_cache, g_spec);
        if (bn->parsed()) return cmd_bench(bn_out, bcfg, bn_seed);
        if (ev->parsed()) return cmd_eval(e_gen, e_ref, e_corpus, e_codebooks, e_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
