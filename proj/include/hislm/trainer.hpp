#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hislm/model.hpp"
#include "hislm/serialize.hpp"

namespace hislm {

struct TrainConfig {
    double lr_base = 5e-4;
    int warmup_steps = 500;
    int max_steps = 20000;
    int batch_size = 16;
    double crop_seconds = 10.0;
    double label_smooth = 0.1;
    uint64_t seed = 0;
    int checkpoint_every = 1000;
    double grad_clip = 1.0;      // <= 0 disables clipping
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.98;
    double adam_eps = 1e-9;
    double semantic_weight = 1.0;  // Eq-7 terms are unweighted; knob kept at 1
    double semantic_rate_hz = 50.0;
    double acoustic_rate_hz = 75.0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// lr_base * min(step/warmup, sqrt(warmup/step)); peak lr_base at step == warmup.
double lr_schedule(long step, const TrainConfig& cfg);

struct AdamState {
    ParamsF m;
    ParamsF v;
    long step = 0;

    void init(const ParamsF& params);
};

// Crops a contiguous time window from each sampled utterance, keeping the two
// streams aligned on the shared time axis; semantic tokens are deduped after
// cropping.
std::vector<Example> assemble_batch(const std::vector<TokenRecord>& corpus,
                                    const TrainConfig& cfg, Rng& rng);

Example crop_example(const TokenRecord& rec, double crop_seconds, double sem_rate,
                     double ac_rate, Rng& rng);

struct StepMetrics {
    long step = 0;
    double lr = 0.0;
    double loss_total_per_token = 0.0;
    double loss_semantic_per_token = 0.0;
    double loss_acoustic_per_token = 0.0;
    double retained_fraction = 1.0;

    nlohmann::json to_json() const;
};

// One Adam update; gradients are normalized per token before the update.
StepMetrics train_step(ParamsF& params, const std::vector<Example>& batch, AdamState& opt,
                       const TrainConfig& cfg, long step, Rng& drop_rng);

// Versioned checkpoint: config JSON header, then named f32 tensors; optional
// optimizer block (Adam moments, step, rng state) for bit-exact resume.
void save_checkpoint(const ParamsF& params, const AdamState* opt, const std::string& rng_state,
                     const std::string& path);

struct ResumeState {
    ParamsF params;
    std::optional<AdamState> opt;
    std::string rng_state;
};

ResumeState load_checkpoint(const std::string& path);

struct TrainResult {
    ParamsF params;
    std::vector<StepMetrics> trace;
};

// Full loop: assemble, step, log, checkpoint. metrics_path may be empty.
// on_step (optional) observes every step's metrics.
TrainResult run_training(const std::vector<TokenRecord>& corpus, const ModelConfig& mcfg,
                         const TrainConfig& tcfg, const std::string& checkpoint_path,
                         const std::string& metrics_path,
                         const std::string& resume_from = "",
                         const std::function<void(const StepMetrics&)>& on_step = {});

}  // namespace hislm
