#include "hislm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hislm {

void TrainConfig::validate() const {
    check(lr_base > 0.0, "lr_base must be > 0");
    check(warmup_steps >= 1, "warmup_steps must be >= 1");
    check(max_steps >= 0, "max_steps must be >= 0");
    check(batch_size >= 1, "batch_size must be >= 1");
    check(crop_seconds > 0.0, "crop_seconds must be > 0");
    check(label_smooth >= 0.0 && label_smooth < 1.0, "label_smooth must be in [0, 1)");
    check(semantic_rate_hz > 0.0 && acoustic_rate_hz > 0.0, "token rates must be > 0");
}

nlohmann::json TrainConfig::to_json() const {
    return nlohmann::json{{"lr_base", lr_base},
                          {"warmup_steps", warmup_steps},
                          {"max_steps", max_steps},
                          {"batch_size", batch_size},
                          {"crop_seconds", crop_seconds},
                          {"label_smooth", label_smooth},
                          {"seed", seed},
                          {"checkpoint_every", checkpoint_every},
                          {"grad_clip", grad_clip},
                          {"adam_beta1", adam_beta1},
                          {"adam_beta2", adam_beta2},
                          {"adam_eps", adam_eps},
                          {"semantic_weight", semantic_weight},
                          {"semantic_rate_hz", semantic_rate_hz},
                          {"acoustic_rate_hz", acoustic_rate_hz}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.lr_base = j.value("lr_base", c.lr_base);
    c.warmup_steps = j.value("warmup_steps", c.warmup_steps);
    c.max_steps = j.value("max_steps", c.max_steps);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.crop_seconds = j.value("crop_seconds", c.crop_seconds);
    c.label_smooth = j.value("label_smooth", c.label_smooth);
    c.seed = j.value("seed", c.seed);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    c.semantic_weight = j.value("semantic_weight", c.semantic_weight);
    c.semantic_rate_hz = j.value("semantic_rate_hz", c.semantic_rate_hz);
    c.acoustic_rate_hz = j.value("acoustic_rate_hz", c.acoustic_rate_hz);
    c.validate();
    return c;
}

double lr_schedule(long step, const TrainConfig& cfg) {
    check(step >= 1, "lr_schedule: step must be >= 1");
    double w = static_cast<double>(cfg.warmup_steps);
    double s = static_cast<double>(step);
    return cfg.lr_base * std::min(s / w, std::sqrt(w / s));
}

void AdamState::init(const ParamsF& params) {
    m.zero_like(params);
    v.zero_like(params);
    step = 0;
}

Example crop_example(const TokenRecord& rec, double crop_seconds, double sem_rate,
                     double ac_rate, Rng& rng) {
    Example ex;
    double duration = static_cast<double>(rec.acoustic.frames()) / ac_rate;
    double t0 = 0.0;
    double span = crop_seconds;
    if (duration <= crop_seconds) {
        span = duration;  // shorter than the crop: take the whole utterance
    } else {
        std::uniform_real_distribution<double> unif(0.0, duration - crop_seconds);
        t0 = unif(rng);
    }
    auto window = [&](double rate, long n) {
        long lo = std::lround(t0 * rate);
        long hi = std::lround((t0 + span) * rate);
        lo = std::max(0L, std::min(lo, n));
        hi = std::max(lo, std::min(hi, n));
        return std::pair<long, long>(lo, hi);
    };
    auto [s_lo, s_hi] = window(sem_rate, static_cast<long>(rec.semantic.size()));
    auto [a_lo, a_hi] = window(ac_rate, rec.acoustic.frames());
    ex.semantic = dedup(SemanticSeq(rec.semantic.begin() + s_lo, rec.semantic.begin() + s_hi));
    ex.acoustic.codes.assign(rec.acoustic.codes.begin() + a_lo, rec.acoustic.codes.begin() + a_hi);
    return ex;
}

std::vector<Example> assemble_batch(const std::vector<TokenRecord>& corpus,
                                    const TrainConfig& cfg, Rng& rng) {
    check(!corpus.empty(), "assemble_batch: empty corpus");
    std::uniform_int_distribution<size_t> pick(0, corpus.size() - 1);
    std::vector<Example> batch;
    batch.reserve(cfg.batch_size);
    for (int i = 0; i < cfg.batch_size; ++i) {
        const TokenRecord& rec = corpus[pick(rng)];
        batch.push_back(
            crop_example(rec, cfg.crop_seconds, cfg.semantic_rate_hz, cfg.acoustic_rate_hz, rng));
    }
    return batch;
}

nlohmann::json StepMetrics::to_json() const {
    return nlohmann::json{{"step", step},
                          {"lr", lr},
                          {"loss_total", loss_total_per_token},
                          {"loss_semantic", loss_semantic_per_token},
                          {"loss_acoustic", loss_acoustic_per_token},
                          {"retained_fraction", retained_fraction}};
}

namespace {

// Collects parameter tensors in visit order so params/grads/moments can be
// walked in lockstep.
std::vector<MatrixF*> tensor_list(ParamsF& p) {
    std::vector<MatrixF*> out;
    visit_params(p, [&](const std::string&, MatrixF& m) { out.push_back(&m); });
    return out;
}

}  // namespace

StepMetrics train_step(ParamsF& params, const std::vector<Example>& batch, AdamState& opt,
                       const TrainConfig& cfg, long step, Rng& drop_rng) {
    ParamsF grads;
    grads.zero_like(params);
    LossBreakdown loss = loss_batch(params, batch, drop_rng, &grads, cfg.semantic_weight);
    check(std::isfinite(loss.total), "train_step: non-finite loss at step " + std::to_string(step));

    long n_tokens = loss.semantic_tokens + loss.acoustic_tokens;
    check(n_tokens > 0, "train_step: batch contains no prediction targets");
    float inv = 1.0f / static_cast<float>(n_tokens);

    auto pv = tensor_list(params);
    auto gv = tensor_list(grads);
    auto mv = tensor_list(opt.m);
    auto vv = tensor_list(opt.v);

    double norm_sq = 0.0;
    for (MatrixF* g : gv) {
        *g *= inv;
        norm_sq += static_cast<double>(g->squaredNorm());
    }
    double norm = std::sqrt(norm_sq);
    if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip) {
        float scale = static_cast<float>(cfg.grad_clip / norm);
        for (MatrixF* g : gv) *g *= scale;
    }

    opt.step = step;
    double lr = lr_schedule(step, cfg);
    double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
    double bc1 = 1.0 - std::pow(b1, static_cast<double>(step));
    double bc2 = 1.0 - std::pow(b2, static_cast<double>(step));
    float f_b1 = static_cast<float>(b1), f_b2 = static_cast<float>(b2);
    float f_eps = static_cast<float>(cfg.adam_eps);
    float alpha = static_cast<float>(lr / bc1);
    float vscale = static_cast<float>(1.0 / bc2);
    for (size_t i = 0; i < pv.size(); ++i) {
        MatrixF& p = *pv[i];
        MatrixF& g = *gv[i];
        MatrixF& m = *mv[i];
        MatrixF& v = *vv[i];
        m = f_b1 * m + (1.0f - f_b1) * g;
        v = f_b2 * v.array() + (1.0f - f_b2) * g.array().square();
        p.array() -= alpha * m.array() / ((v.array() * vscale).sqrt() + f_eps);
    }

    StepMetrics metrics;
    metrics.step = step;
    metrics.lr = lr;
    metrics.loss_total_per_token = loss.token_mean();
    metrics.loss_semantic_per_token = loss.semantic_mean();
    metrics.loss_acoustic_per_token = loss.acoustic_mean();
    metrics.retained_fraction = loss.retained_fraction;
    return metrics;
}

namespace {
constexpr uint32_t kCheckpointVersion = 1;
}

void save_checkpoint(const ParamsF& params, const AdamState* opt, const std::string& rng_state,
                     const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "cannot open for write: " + path);
    os.write("HSCK", 4);
    write_u32(os, kCheckpointVersion);
    write_str(os, params.cfg.to_json().dump());

    auto write_tensors = [&os](ParamsF& p, bool with_names) {
        std::vector<std::pair<std::string, MatrixF*>> tensors;
        visit_params(p, [&](const std::string& name, MatrixF& m) { tensors.emplace_back(name, &m); });
        write_u32(os, static_cast<uint32_t>(tensors.size()));
        for (auto& [name, m] : tensors) {
            if (with_names) write_str(os, name);
            write_u32(os, static_cast<uint32_t>(m->rows()));
            write_u32(os, static_cast<uint32_t>(m->cols()));
            for (Eigen::Index i = 0; i < m->rows(); ++i)
                for (Eigen::Index j = 0; j < m->cols(); ++j) write_f32(os, (*m)(i, j));
        }
    };
    write_tensors(const_cast<ParamsF&>(params), true);

    os.put(opt ? 1 : 0);
    if (opt) {
        write_u32(os, static_cast<uint32_t>(opt->step));
        write_str(os, rng_state);
        write_tensors(const_cast<AdamState*>(opt)->m, false);
        write_tensors(const_cast<AdamState*>(opt)->v, false);
    }
    check(os.good(), "write failed: " + path);
}

ResumeState load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    check(is.good() && std::string(magic, 4) == "HSCK", "bad checkpoint magic in " + path);
    uint32_t version = read_u32(is);
    check(version == kCheckpointVersion, "unsupported checkpoint version in " + path);
    ModelConfig cfg = ModelConfig::from_json(nlohmann::json::parse(read_str(is)));

    ResumeState st;
    st.params.init(cfg, 0);

    auto read_tensors = [&is, &path](ParamsF& p, bool with_names) {
        std::vector<std::pair<std::string, MatrixF*>> tensors;
        visit_params(p, [&](const std::string& name, MatrixF& m) { tensors.emplace_back(name, &m); });
        uint32_t n = read_u32(is);
        check(n == tensors.size(), "checkpoint tensor count mismatch in " + path);
        for (auto& [name, m] : tensors) {
            if (with_names) {
                std::string got = read_str(is);
                check(got == name, "checkpoint tensor name mismatch: expected " + name +
                                       ", found " + got);
            }
            uint32_t rows = read_u32(is);
            uint32_t cols = read_u32(is);
            check(rows == static_cast<uint32_t>(m->rows()) &&
                      cols == static_cast<uint32_t>(m->cols()),
                  "checkpoint shape mismatch for tensor " + name);
            for (uint32_t i = 0; i < rows; ++i)
                for (uint32_t j = 0; j < cols; ++j) (*m)(i, j) = read_f32(is);
        }
    };
    read_tensors(st.params, true);

    int has_opt = is.get();
    check(has_opt == 0 || has_opt == 1, "corrupt checkpoint trailer in " + path);
    if (has_opt) {
        AdamState opt;
        opt.init(st.params);
        opt.step = read_u32(is);
        st.rng_state = read_str(is);
        read_tensors(opt.m, false);
        read_tensors(opt.v, false);
        st.opt = std::move(opt);
    }
    return st;
}

TrainResult run_training(const std::vector<TokenRecord>& corpus, const ModelConfig& mcfg,
                         const TrainConfig& tcfg, const std::string& checkpoint_path,
                         const std::string& metrics_path, const std::string& resume_from,
                         const std::function<void(const StepMetrics&)>& on_step) {
    tcfg.validate();
    check(!corpus.empty(), "run_training: empty corpus");

    ModelConfig cfg = mcfg;
    cfg.label_smooth = tcfg.label_smooth;

    ParamsF params;
    AdamState opt;
    Rng data_rng(split_seed(tcfg.seed, 0));
    Rng drop_rng(split_seed(tcfg.seed, 1));
    if (!resume_from.empty()) {
        ResumeState st = load_checkpoint(resume_from);
        params = std::move(st.params);
        check(st.opt.has_value(), "resume checkpoint has no optimizer state: " + resume_from);
        opt = std::move(*st.opt);
        std::istringstream ss(st.rng_state);
        ss >> data_rng >> drop_rng;
        check(!ss.fail(), "corrupt rng state in " + resume_from);
    } else {
        params.init(cfg, split_seed(tcfg.seed, 2));
        opt.init(params);
    }

    auto rng_state_str = [&]() {
        std::ostringstream ss;
        ss << data_rng << ' ' << drop_rng;
        return ss.str();
    };

    std::ofstream metrics;
    if (!metrics_path.empty()) {
        metrics.open(metrics_path, std::ios::app);
        check(metrics.good(), "cannot open metrics log: " + metrics_path);
    }

    TrainResult result;
    for (long step = opt.step + 1; step <= tcfg.max_steps; ++step) {
        std::vector<Example> batch = assemble_batch(corpus, tcfg, data_rng);
        StepMetrics m;
        try {
            m = train_step(params, batch, opt, tcfg, step, drop_rng);
        } catch (const std::exception& e) {
            throw std::runtime_error(std::string(e.what()) + "; last good checkpoint: " +
                                     (checkpoint_path.empty() ? "<none>" : checkpoint_path));
        }
        result.trace.push_back(m);
        if (metrics.is_open()) {
            nlohmann::json line = m.to_json();
            line["ts"] = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count();
            metrics << line.dump() << "\n";
        }
        if (on_step) on_step(m);
        if (!checkpoint_path.empty() && tcfg.checkpoint_every > 0 &&
            step % tcfg.checkpoint_every == 0) {
            save_checkpoint(params, &opt, rng_state_str(), checkpoint_path);
        }
    }
    if (!checkpoint_path.empty()) save_checkpoint(params, &opt, rng_state_str(), checkpoint_path);
    result.params = std::move(params);
    return result;
}

}  // namespace hislm
