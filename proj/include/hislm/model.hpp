#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hislm/nn.hpp"
#include "hislm/tokenhub.hpp"

namespace hislm {

// Special token ids live at the top of the semantic vocabulary.
struct ModelConfig {
    int n_layers_global = 4;
    int n_layers_local = 2;
    int d_global = 128;
    int d_local = 64;
    int heads_global = 4;
    int heads_local = 2;
    int ffn_global = 512;
    int ffn_local = 256;
    int n_semantic = 64;   // N_s
    int n_acoustic = 64;   // N_a
    int depth = 8;         // D
    int max_t1 = 256;
    int max_t2 = 512;
    double drop_p = 0.0;
    double label_smooth = 0.1;

    static constexpr int n_special = 3;

    int sem_vocab() const { return n_semantic + n_special; }
    int bos() const { return n_semantic; }
    int boundary() const { return n_semantic + 1; }
    int eos_sem() const { return n_semantic + 2; }
    int max_positions() const { return max_t1 + max_t2 + n_special; }

    void validate() const;
    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
};

// One training example: deduped semantic tokens plus the acoustic grid.
// Special tokens are inserted by the sequence layout, not stored here.
struct Example {
    SemanticSeq semantic;
    AcousticGrid acoustic;
};

// Global sequence layout: [BOS, s_1..s_T1, EOS, BOUNDARY, a_1..a_T2].
struct SeqLayout {
    int t1 = 0;
    int t2 = 0;

    int total() const { return t1 + 3 + t2; }
    int sem_predictions() const { return t1 + 2; }      // positions 0..t1+1
    int eos_pos() const { return t1 + 1; }
    int boundary_pos() const { return t1 + 2; }
    int frame_pos(int ft) const { return t1 + 3 + ft; }  // ft in [0, t2)
    // Hidden state that conditions frame ft: the position just before it, so
    // the frame's own codes never leak into its prediction.
    int cond_pos(int ft) const { return t1 + 2 + ft; }
};

template <class S>
struct Params {
    ModelConfig cfg;
    nn::Mat<S> emb_semantic;                 // (N_s + specials) x d_g
    std::vector<nn::Mat<S>> emb_acoustic_g;  // D tables, N_a x d_g
    nn::Mat<S> pos_global;                   // max_positions x d_g
    nn::Mat<S> pos_local;                    // (D+1) x d_l
    nn::Stack<S> global;
    nn::Stack<S> local;
    nn::Linear<S> proj_g2l;                  // d_g -> d_l
    nn::Linear<S> out_semantic;              // d_g -> (N_s + specials)
    std::vector<nn::Mat<S>> emb_acoustic_l;  // D-1 tables, N_a x d_l (codes 1..D-1 as local inputs)
    std::vector<nn::Linear<S>> out_acoustic; // D heads, d_l -> N_a

    void init(const ModelConfig& c, uint64_t seed);
    void zero_like(const Params& other);
};

using ParamsF = Params<float>;
using ParamsD = Params<double>;

// Calls f(name, matrix&) for every parameter tensor, in checkpoint order.
template <class S, class F>
void visit_params(Params<S>& p, F&& f) {
    f("emb_semantic", p.emb_semantic);
    for (size_t q = 0; q < p.emb_acoustic_g.size(); ++q)
        f("emb_acoustic_g." + std::to_string(q), p.emb_acoustic_g[q]);
    f("pos_global", p.pos_global);
    f("pos_local", p.pos_local);
    nn::visit_stack(p.global, "global", f);
    nn::visit_stack(p.local, "local", f);
    f("proj_g2l.w", p.proj_g2l.w);
    f("proj_g2l.b", p.proj_g2l.b);
    f("out_semantic.w", p.out_semantic.w);
    f("out_semantic.b", p.out_semantic.b);
    for (size_t q = 0; q < p.emb_acoustic_l.size(); ++q)
        f("emb_acoustic_l." + std::to_string(q), p.emb_acoustic_l[q]);
    for (size_t q = 0; q < p.out_acoustic.size(); ++q) {
        f("out_acoustic." + std::to_string(q) + ".w", p.out_acoustic[q].w);
        f("out_acoustic." + std::to_string(q) + ".b", p.out_acoustic[q].b);
    }
}

struct LossBreakdown {
    double total = 0.0;        // semantic_sum + acoustic_sum
    double semantic_sum = 0.0;
    double acoustic_sum = 0.0;
    long semantic_tokens = 0;
    long acoustic_tokens = 0;  // retained frames * D
    double retained_fraction = 1.0;

    double semantic_mean() const { return semantic_tokens ? semantic_sum / semantic_tokens : 0.0; }
    double acoustic_mean() const { return acoustic_tokens ? acoustic_sum / acoustic_tokens : 0.0; }
    double token_mean() const {
        long n = semantic_tokens + acoustic_tokens;
        return n ? total / n : 0.0;
    }
};

// Per-example frame retention masks for the local transformer (local-drop).
// Each frame is kept with probability 1 - drop_p; if everything gets dropped
// the batch is resampled so at least one frame survives.
std::vector<std::vector<char>> local_drop(const std::vector<Example>& batch, double drop_p,
                                          Rng& rng);

template <class S>
nn::Mat<S> embed_sequence(const Params<S>& params, const Example& ex);

// Full-sequence global pass; throws on non-finite activations.
template <class S>
nn::Mat<S> global_forward(const Params<S>& params, const nn::Mat<S>& inputs,
                          nn::StackCache<S>& cache);

// Logits for each of the D codes of one frame given its conditioning hidden
// state (forward only; used by tests and inference).
template <class S>
nn::Mat<S> local_forward(const Params<S>& params, const nn::Mat<S>& h_cond,
                         const std::vector<int>& codes);

template <class S>
nn::Mat<S> semantic_logits(const Params<S>& params, const nn::Mat<S>& hidden);

// Eq-exact joint loss over a batch. retain[i][ft] selects frames whose local
// loss terms are kept; dropped frames still contribute their codes to the
// global inputs. If grads is non-null, accumulates d(sum loss)/d(params).
template <class S>
LossBreakdown loss_batch(const Params<S>& params, const std::vector<Example>& batch,
                         const std::vector<std::vector<char>>& retain, Params<S>* grads,
                         double semantic_weight = 1.0);

// Convenience: samples local-drop internally from rng.
template <class S>
LossBreakdown loss_batch(const Params<S>& params, const std::vector<Example>& batch, Rng& rng,
                         Params<S>* grads, double semantic_weight = 1.0);

// Softmax cross-entropy with label smoothing; returns loss, writes dlogits
// (softmax minus smoothed target) if dlogits != nullptr.
template <class S>
double smoothed_ce(const Eigen::Ref<const Eigen::Matrix<S, 1, Eigen::Dynamic>>& logits,
                   int target, double smooth,
                   Eigen::Matrix<S, 1, Eigen::Dynamic>* dlogits);

extern template struct Params<float>;
extern template struct Params<double>;
extern template nn::Mat<float> embed_sequence(const Params<float>&, const Example&);
extern template nn::Mat<double> embed_sequence(const Params<double>&, const Example&);
extern template nn::Mat<float> global_forward(const Params<float>&, const nn::Mat<float>&,
                                              nn::StackCache<float>&);
extern template nn::Mat<double> global_forward(const Params<double>&, const nn::Mat<double>&,
                                               nn::StackCache<double>&);
extern template nn::Mat<float> local_forward(const Params<float>&, const nn::Mat<float>&,
                                             const std::vector<int>&);
extern template nn::Mat<double> local_forward(const Params<double>&, const nn::Mat<double>&,
                                              const std::vector<int>&);
extern template nn::Mat<float> semantic_logits(const Params<float>&, const nn::Mat<float>&);
extern template nn::Mat<double> semantic_logits(const Params<double>&, const nn::Mat<double>&);
extern template LossBreakdown loss_batch(const Params<float>&, const std::vector<Example>&,
                                         const std::vector<std::vector<char>>&, Params<float>*,
                                         double);
extern template LossBreakdown loss_batch(const Params<double>&, const std::vector<Example>&,
                                         const std::vector<std::vector<char>>&, Params<double>*,
                                         double);
extern template LossBreakdown loss_batch(const Params<float>&, const std::vector<Example>&, Rng&,
                                         Params<float>*, double);
extern template LossBreakdown loss_batch(const Params<double>&, const std::vector<Example>&, Rng&,
                                         Params<double>*, double);
extern template double smoothed_ce(
    const Eigen::Ref<const Eigen::Matrix<float, 1, Eigen::Dynamic>>&, int, double,
    Eigen::Matrix<float, 1, Eigen::Dynamic>*);
extern template double smoothed_ce(
    const Eigen::Ref<const Eigen::Matrix<double, 1, Eigen::Dynamic>>&, int, double,
    Eigen::Matrix<double, 1, Eigen::Dynamic>*);

}  // namespace hislm
