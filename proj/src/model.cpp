#include "hislm/model.hpp"

#include <cmath>

namespace hislm {

void ModelConfig::validate() const {
    check(n_layers_global >= 0 && n_layers_local >= 0, "layer counts must be >= 0");
    check(d_global >= 1 && d_local >= 1, "embedding dims must be >= 1");
    check(heads_global >= 1 && heads_local >= 1, "head counts must be >= 1");
    check(d_global % heads_global == 0, "d_global not divisible by heads_global");
    check(d_local % heads_local == 0, "d_local not divisible by heads_local");
    check(ffn_global >= 1 && ffn_local >= 1, "ffn dims must be >= 1");
    check(n_semantic >= 1 && n_acoustic >= 1, "vocab sizes must be >= 1");
    check(depth >= 1, "quantizer depth must be >= 1");
    check(max_t1 >= 1 && max_t2 >= 1, "positional table sizes must be >= 1");
    check(drop_p >= 0.0 && drop_p < 1.0, "drop_p must be in [0, 1)");
    check(label_smooth >= 0.0 && label_smooth < 1.0, "label_smooth must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
    return nlohmann::json{{"n_layers_global", n_layers_global},
                          {"n_layers_local", n_layers_local},
                          {"d_global", d_global},
                          {"d_local", d_local},
                          {"heads_global", heads_global},
                          {"heads_local", heads_local},
                          {"ffn_global", ffn_global},
                          {"ffn_local", ffn_local},
                          {"n_semantic", n_semantic},
                          {"n_acoustic", n_acoustic},
                          {"depth", depth},
                          {"max_t1", max_t1},
                          {"max_t2", max_t2},
                          {"drop_p", drop_p},
                          {"label_smooth", label_smooth}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.n_layers_global = j.value("n_layers_global", c.n_layers_global);
    c.n_layers_local = j.value("n_layers_local", c.n_layers_local);
    c.d_global = j.value("d_global", c.d_global);
    c.d_local = j.value("d_local", c.d_local);
    c.heads_global = j.value("heads_global", c.heads_global);
    c.heads_local = j.value("heads_local", c.heads_local);
    c.ffn_global = j.value("ffn_global", c.ffn_global);
    c.ffn_local = j.value("ffn_local", c.ffn_local);
    c.n_semantic = j.value("n_semantic", c.n_semantic);
    c.n_acoustic = j.value("n_acoustic", c.n_acoustic);
    c.depth = j.value("depth", c.depth);
    c.max_t1 = j.value("max_t1", c.max_t1);
    c.max_t2 = j.value("max_t2", c.max_t2);
    c.drop_p = j.value("drop_p", c.drop_p);
    c.label_smooth = j.value("label_smooth", c.label_smooth);
    c.validate();
    return c;
}

namespace {

template <class S>
nn::Mat<S> random_table(Eigen::Index rows, Eigen::Index cols, Rng& rng, double std_dev = 0.02) {
    std::normal_distribution<double> dist(0.0, std_dev);
    nn::Mat<S> m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = S(dist(rng));
    return m;
}

SeqLayout layout_of(const ModelConfig& cfg, const Example& ex) {
    SeqLayout lo{static_cast<int>(ex.semantic.size()), static_cast<int>(ex.acoustic.frames())};
    check(lo.t1 <= cfg.max_t1, "semantic sequence exceeds max_t1");
    check(lo.t2 <= cfg.max_t2, "acoustic sequence exceeds max_t2");
    check(lo.total() <= cfg.max_positions(), "sequence exceeds positional table");
    if (lo.t2 > 0) check(ex.acoustic.depth() == cfg.depth, "acoustic grid depth mismatch");
    return lo;
}

}  // namespace

template <class S>
void Params<S>::init(const ModelConfig& c, uint64_t seed) {
    c.validate();
    cfg = c;
    Rng rng(seed);
    emb_semantic = random_table<S>(c.sem_vocab(), c.d_global, rng);
    emb_acoustic_g.clear();
    for (int q = 0; q < c.depth; ++q)
        emb_acoustic_g.push_back(random_table<S>(c.n_acoustic, c.d_global, rng));
    pos_global = random_table<S>(c.max_positions(), c.d_global, rng);
    pos_local = random_table<S>(c.depth + 1, c.d_local, rng);
    global.init(c.n_layers_global, c.d_global, c.ffn_global, c.heads_global, rng);
    local.init(c.n_layers_local, c.d_local, c.ffn_local, c.heads_local, rng);
    proj_g2l.init(c.d_global, c.d_local, rng, 0.02);
    out_semantic.init(c.d_global, c.sem_vocab(), rng, 0.02);
    emb_acoustic_l.clear();
    for (int q = 0; q + 1 < c.depth; ++q)
        emb_acoustic_l.push_back(random_table<S>(c.n_acoustic, c.d_local, rng));
    out_acoustic.clear();
    out_acoustic.resize(c.depth);
    for (int q = 0; q < c.depth; ++q) out_acoustic[q].init(c.d_local, c.n_acoustic, rng, 0.02);
}

template <class S>
void Params<S>::zero_like(const Params& other) {
    cfg = other.cfg;
    emb_semantic = nn::Mat<S>::Zero(other.emb_semantic.rows(), other.emb_semantic.cols());
    emb_acoustic_g.clear();
    for (const auto& t : other.emb_acoustic_g)
        emb_acoustic_g.push_back(nn::Mat<S>::Zero(t.rows(), t.cols()));
    pos_global = nn::Mat<S>::Zero(other.pos_global.rows(), other.pos_global.cols());
    pos_local = nn::Mat<S>::Zero(other.pos_local.rows(), other.pos_local.cols());

    auto zero_stack = [](nn::Stack<S>& dst, const nn::Stack<S>& src) {
        dst.heads = src.heads;
        dst.final_norm = src.final_norm;
        dst.blocks.resize(src.blocks.size());
        for (size_t i = 0; i < src.blocks.size(); ++i) {
            dst.blocks[i].ln1.zero_like(src.blocks[i].ln1);
            dst.blocks[i].wq.zero_like(src.blocks[i].wq);
            dst.blocks[i].wk.zero_like(src.blocks[i].wk);
            dst.blocks[i].wv.zero_like(src.blocks[i].wv);
            dst.blocks[i].wo.zero_like(src.blocks[i].wo);
            dst.blocks[i].ln2.zero_like(src.blocks[i].ln2);
            dst.blocks[i].fc1.zero_like(src.blocks[i].fc1);
            dst.blocks[i].fc2.zero_like(src.blocks[i].fc2);
        }
        dst.ln_f.zero_like(src.ln_f);
    };
    zero_stack(global, other.global);
    zero_stack(local, other.local);
    proj_g2l.zero_like(other.proj_g2l);
    out_semantic.zero_like(other.out_semantic);
    emb_acoustic_l.clear();
    for (const auto& t : other.emb_acoustic_l)
        emb_acoustic_l.push_back(nn::Mat<S>::Zero(t.rows(), t.cols()));
    out_acoustic.resize(other.out_acoustic.size());
    for (size_t q = 0; q < other.out_acoustic.size(); ++q)
        out_acoustic[q].zero_like(other.out_acoustic[q]);
}

std::vector<std::vector<char>> local_drop(const std::vector<Example>& batch, double drop_p,
                                          Rng& rng) {
    check(drop_p >= 0.0 && drop_p < 1.0, "drop_p must be in [0, 1)");
    std::vector<std::vector<char>> retain(batch.size());
    if (drop_p == 0.0) {
        for (size_t i = 0; i < batch.size(); ++i)
            retain[i].assign(batch[i].acoustic.frames(), 1);
        return retain;
    }
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    bool any = false;
    do {
        any = false;
        for (size_t i = 0; i < batch.size(); ++i) {
            retain[i].resize(batch[i].acoustic.frames());
            for (char& r : retain[i]) {
                r = unif(rng) >= drop_p ? 1 : 0;
                any = any || r;
            }
        }
        // No acoustic frames in the whole batch at all: nothing to retain.
        bool have_frames = false;
        for (const Example& ex : batch) have_frames = have_frames || ex.acoustic.frames() > 0;
        if (!have_frames) break;
    } while (!any);
    return retain;
}

template <class S>
nn::Mat<S> embed_sequence(const Params<S>& params, const Example& ex) {
    const ModelConfig& cfg = params.cfg;
    SeqLayout lo = layout_of(cfg, ex);
    nn::Mat<S> x(lo.total(), cfg.d_global);
    x.row(0) = params.emb_semantic.row(cfg.bos()) + params.pos_global.row(0);
    for (int t = 0; t < lo.t1; ++t) {
        int id = ex.semantic[t];
        check(id >= 0 && id < cfg.n_semantic, "semantic token out of range");
        x.row(1 + t) = params.emb_semantic.row(id) + params.pos_global.row(1 + t);
    }
    x.row(lo.eos_pos()) =
        params.emb_semantic.row(cfg.eos_sem()) + params.pos_global.row(lo.eos_pos());
    x.row(lo.boundary_pos()) =
        params.emb_semantic.row(cfg.boundary()) + params.pos_global.row(lo.boundary_pos());
    for (int ft = 0; ft < lo.t2; ++ft) {
        int p = lo.frame_pos(ft);
        x.row(p) = params.pos_global.row(p);
        for (int q = 0; q < cfg.depth; ++q) {
            int id = ex.acoustic.codes[ft][q];
            check(id >= 0 && id < cfg.n_acoustic, "acoustic code out of range");
            x.row(p) += params.emb_acoustic_g[q].row(id);
        }
    }
    return x;
}

template <class S>
nn::Mat<S> global_forward(const Params<S>& params, const nn::Mat<S>& inputs,
                          nn::StackCache<S>& cache) {
    nn::Mat<S> h = nn::stack_fwd(params.global, inputs, cache);
    check(h.allFinite(), "global_forward: non-finite activation (seq_len=" +
                             std::to_string(inputs.rows()) + ")");
    return h;
}

namespace {

// Builds the local transformer input for one frame: projected conditioning
// state at slot 0, then embeddings of codes 1..D-1.
template <class S>
nn::Mat<S> local_inputs(const Params<S>& params, const nn::Mat<S>& h_cond,
                        const std::vector<int>& codes) {
    const ModelConfig& cfg = params.cfg;
    nn::Mat<S> x(cfg.depth, cfg.d_local);
    x.row(0) = nn::linear_fwd(params.proj_g2l, h_cond).row(0) + params.pos_local.row(0);
    for (int k = 1; k < cfg.depth; ++k) {
        int id = codes[k - 1];
        check(id >= 0 && id < cfg.n_acoustic, "acoustic code out of range");
        x.row(k) = params.emb_acoustic_l[k - 1].row(id) + params.pos_local.row(k);
    }
    return x;
}

}  // namespace

template <class S>
nn::Mat<S> local_forward(const Params<S>& params, const nn::Mat<S>& h_cond,
                         const std::vector<int>& codes) {
    const ModelConfig& cfg = params.cfg;
    check(static_cast<int>(codes.size()) >= cfg.depth - 1, "local_forward: missing input codes");
    nn::Mat<S> x = local_inputs(params, h_cond, codes);
    nn::StackCache<S> cache;
    nn::Mat<S> h = nn::stack_fwd(params.local, x, cache);
    nn::Mat<S> logits(cfg.depth, cfg.n_acoustic);
    for (int k = 0; k < cfg.depth; ++k)
        logits.row(k) = nn::linear_fwd(params.out_acoustic[k], nn::Mat<S>(h.row(k))).row(0);
    return logits;
}

template <class S>
nn::Mat<S> semantic_logits(const Params<S>& params, const nn::Mat<S>& hidden) {
    return nn::linear_fwd(params.out_semantic, hidden);
}

template <class S>
double smoothed_ce(const Eigen::Ref<const Eigen::Matrix<S, 1, Eigen::Dynamic>>& logits,
                   int target, double smooth,
                   Eigen::Matrix<S, 1, Eigen::Dynamic>* dlogits) {
    const Eigen::Index n = logits.cols();
    check(target >= 0 && target < n, "cross-entropy target out of range");
    S mx = logits.maxCoeff();
    Eigen::Matrix<S, 1, Eigen::Dynamic> ex = (logits.array() - mx).exp();
    S z = ex.sum();
    double logz = static_cast<double>(std::log(z)) + static_cast<double>(mx);
    double sum_logp = 0.0;
    if (smooth > 0.0)
        sum_logp = static_cast<double>(logits.template cast<double>().sum()) -
                   static_cast<double>(n) * logz;
    double logp_y = static_cast<double>(logits(target)) - logz;
    double loss = -(1.0 - smooth) * logp_y - (smooth / static_cast<double>(n)) * sum_logp;
    if (dlogits) {
        *dlogits = ex / z;  // softmax
        dlogits->array() -= S(smooth / static_cast<double>(n));
        (*dlogits)(target) -= S(1.0 - smooth);
    }
    return loss;
}

template <class S>
LossBreakdown loss_batch(const Params<S>& params, const std::vector<Example>& batch,
                         const std::vector<std::vector<char>>& retain, Params<S>* grads,
                         double semantic_weight) {
    check(!batch.empty(), "loss_batch: empty batch");
    check(retain.size() == batch.size(), "loss_batch: retain mask size mismatch");
    const ModelConfig& cfg = params.cfg;
    const double smooth = cfg.label_smooth;
    LossBreakdown out;
    long frames_total = 0, frames_kept = 0;
    nn::StackCache<S> lcache;  // reused across frames; Eigen keeps the storage

    for (size_t e = 0; e < batch.size(); ++e) {
        const Example& ex = batch[e];
        SeqLayout lo = layout_of(cfg, ex);
        check(static_cast<int>(retain[e].size()) == lo.t2, "loss_batch: retain mask length");

        nn::Mat<S> x = embed_sequence(params, ex);
        nn::StackCache<S> gcache;
        nn::Mat<S> h = global_forward(params, x, gcache);
        nn::Mat<S> dh = nn::Mat<S>::Zero(h.rows(), h.cols());

        // Semantic stream: position p predicts the token at p+1.
        {
            nn::Mat<S> hs = h.topRows(lo.sem_predictions());
            nn::Mat<S> logits = nn::linear_fwd(params.out_semantic, hs);
            nn::Mat<S> dlogits(logits.rows(), logits.cols());
            for (int p = 0; p < lo.sem_predictions(); ++p) {
                int target;
                if (p < lo.t1)
                    target = ex.semantic[p];
                else if (p == lo.t1)
                    target = cfg.eos_sem();
                else
                    target = cfg.boundary();
                Eigen::Matrix<S, 1, Eigen::Dynamic> row_grad;
                out.semantic_sum += semantic_weight * smoothed_ce<S>(logits.row(p), target, smooth,
                                                                     grads ? &row_grad : nullptr);
                if (grads) dlogits.row(p) = row_grad * S(semantic_weight);
            }
            out.semantic_tokens += lo.sem_predictions();
            if (grads) {
                dh.topRows(lo.sem_predictions()) +=
                    nn::linear_bwd(params.out_semantic, hs, dlogits, grads->out_semantic);
            }
        }

        // Acoustic stream: one local pass per retained frame.
        frames_total += lo.t2;
        for (int ft = 0; ft < lo.t2; ++ft) {
            if (!retain[e][ft]) continue;
            frames_kept++;
            const std::vector<int>& codes = ex.acoustic.codes[ft];
            nn::Mat<S> h_cond = h.row(lo.cond_pos(ft));
            nn::Mat<S> lx = local_inputs(params, h_cond, codes);
            nn::Mat<S> lh = nn::stack_fwd(params.local, lx, lcache);

            nn::Mat<S> dlh = nn::Mat<S>::Zero(lh.rows(), lh.cols());
            for (int k = 0; k < cfg.depth; ++k) {
                nn::Mat<S> hk = lh.row(k);
                nn::Mat<S> logits = nn::linear_fwd(params.out_acoustic[k], hk);
                Eigen::Matrix<S, 1, Eigen::Dynamic> row_grad;
                out.acoustic_sum += smoothed_ce<S>(logits.row(0), codes[k], smooth,
                                                   grads ? &row_grad : nullptr);
                if (grads) {
                    nn::Mat<S> dl = row_grad;
                    dlh.row(k) +=
                        nn::linear_bwd(params.out_acoustic[k], hk, dl, grads->out_acoustic[k])
                            .row(0);
                }
            }
            out.acoustic_tokens += cfg.depth;

            if (grads) {
                nn::Mat<S> dlx = nn::stack_bwd(params.local, lcache, dlh, grads->local);
                nn::Mat<S> d_r0 = dlx.row(0);
                grads->pos_local.row(0) += d_r0.row(0);
                dh.row(lo.cond_pos(ft)) +=
                    nn::linear_bwd(params.proj_g2l, h_cond, d_r0, grads->proj_g2l).row(0);
                for (int k = 1; k < cfg.depth; ++k) {
                    grads->pos_local.row(k) += dlx.row(k);
                    grads->emb_acoustic_l[k - 1].row(codes[k - 1]) += dlx.row(k);
                }
            }
        }

        if (grads) {
            nn::Mat<S> dx = nn::stack_bwd(params.global, gcache, dh, grads->global);
            grads->pos_global.topRows(lo.total()) += dx;
            grads->emb_semantic.row(cfg.bos()) += dx.row(0);
            for (int t = 0; t < lo.t1; ++t) grads->emb_semantic.row(ex.semantic[t]) += dx.row(1 + t);
            grads->emb_semantic.row(cfg.eos_sem()) += dx.row(lo.eos_pos());
            grads->emb_semantic.row(cfg.boundary()) += dx.row(lo.boundary_pos());
            for (int ft = 0; ft < lo.t2; ++ft)
                for (int q = 0; q < cfg.depth; ++q)
                    grads->emb_acoustic_g[q].row(ex.acoustic.codes[ft][q]) +=
                        dx.row(lo.frame_pos(ft));
        }
    }

    out.total = out.semantic_sum + out.acoustic_sum;
    out.retained_fraction =
        frames_total > 0 ? static_cast<double>(frames_kept) / frames_total : 1.0;

    if (grads) {
        visit_params(*grads, [](const std::string& name, const nn::Mat<S>& m) {
            check(m.allFinite(), "non-finite gradient in tensor " + name);
        });
    }
    return out;
}

template <class S>
LossBreakdown loss_batch(const Params<S>& params, const std::vector<Example>& batch, Rng& rng,
                         Params<S>* grads, double semantic_weight) {
    auto retain = local_drop(batch, params.cfg.drop_p, rng);
    return loss_batch(params, batch, retain, grads, semantic_weight);
}

template struct Params<float>;
template struct Params<double>;
template nn::Mat<float> embed_sequence(const Params<float>&, const Example&);
template nn::Mat<double> embed_sequence(const Params<double>&, const Example&);
template nn::Mat<float> global_forward(const Params<float>&, const nn::Mat<float>&,
                                       nn::StackCache<float>&);
template nn::Mat<double> global_forward(const Params<double>&, const nn::Mat<double>&,
                                        nn::StackCache<double>&);
template nn::Mat<float> local_forward(const Params<float>&, const nn::Mat<float>&,
                                      const std::vector<int>&);
template nn::Mat<double> local_forward(const Params<double>&, const nn::Mat<double>&,
                                       const std::vector<int>&);
template nn::Mat<float> semantic_logits(const Params<float>&, const nn::Mat<float>&);
template nn::Mat<double> semantic_logits(const Params<double>&, const nn::Mat<double>&);
template LossBreakdown loss_batch(const Params<float>&, const std::vector<Example>&,
                                  const std::vector<std::vector<char>>&, Params<float>*, double);
template LossBreakdown loss_batch(const Params<double>&, const std::vector<Example>&,
                                  const std::vector<std::vector<char>>&, Params<double>*, double);
template LossBreakdown loss_batch(const Params<float>&, const std::vector<Example>&, Rng&,
                                  Params<float>*, double);
template LossBreakdown loss_batch(const Params<double>&, const std::vector<Example>&, Rng&,
                                  Params<double>*, double);
template double smoothed_ce(const Eigen::Ref<const Eigen::Matrix<float, 1, Eigen::Dynamic>>&, int,
                            double, Eigen::Matrix<float, 1, Eigen::Dynamic>*);
template double smoothed_ce(const Eigen::Ref<const Eigen::Matrix<double, 1, Eigen::Dynamic>>&,
                            int, double, Eigen::Matrix<double, 1, Eigen::Dynamic>*);

}  // namespace hislm
