#include "hislm/perf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <new>

namespace hislm {

long long attn_cost_flat(long long n_layers, long long t2, long long depth) {
    check(n_layers > 0 && t2 > 0 && depth > 0, "attn_cost_flat: args must be positive");
    return n_layers * t2 * t2 * depth * depth;
}

long long attn_cost_hier(long long n_global, long long n_local, long long t2, long long depth) {
    check(n_global > 0 && n_local > 0 && t2 > 0 && depth > 0,
          "attn_cost_hier: args must be positive");
    return n_global * t2 * t2 + n_local * t2 * depth * depth;
}

double flops_flat(double m, double t2, double depth) {
    check(m > 0 && t2 > 0 && depth > 0, "flops_flat: args must be positive");
    return 2.0 * t2 * depth * m;
}

double flops_hier(double m_global, double m_local, double t2, double depth) {
    check(m_global > 0 && m_local >= 0 && t2 > 0 && depth > 0,
          "flops_hier: args must be positive");
    return 2.0 * t2 * (m_global + m_local * depth);
}

long long block_params(long long d, long long ffn) {
    // 4 attention projections with bias, 2 FFN layers with bias, 2 layer norms.
    return 4 * (d * d + d) + (d * ffn + ffn) + (ffn * d + d) + 4 * d;
}

ParamCounts count_params(const ParamsF& params) {
    ParamCounts out;
    visit_params(const_cast<ParamsF&>(params), [&](const std::string& name, MatrixF& m) {
        long long n = static_cast<long long>(m.size());
        if (name.rfind("emb_", 0) == 0 || name.rfind("pos_", 0) == 0) {
            out.embeddings += n;
        } else if (name.rfind("global", 0) == 0 || name.rfind("out_semantic", 0) == 0) {
            out.m_global += n;
        } else {
            out.m_local += n;  // local stack, proj_g2l, out_acoustic heads
        }
    });
    return out;
}

namespace {

MatrixF random_input(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    MatrixF m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = static_cast<float>(dist(rng));
    return m;
}

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

template <class F>
double time_median_ms(F&& body, int warmups, int repeats) {
    for (int i = 0; i < warmups; ++i) body();
    std::vector<double> times;
    times.reserve(repeats);
    for (int i = 0; i < repeats; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        body();
        auto t1 = std::chrono::steady_clock::now();
        times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return median(std::move(times));
}

}  // namespace

std::vector<BenchRow> bench_forward(const BenchConfig& cfg, uint64_t seed) {
    std::vector<BenchRow> rows;
    Rng rng(seed);

    const int n_flat = cfg.n_global + cfg.n_local;
    nn::Stack<float> flat, global_stack, local_stack;
    flat.init(n_flat, cfg.d_global, cfg.ffn_global, cfg.heads_global, rng);
    global_stack.init(cfg.n_global, cfg.d_global, cfg.ffn_global, cfg.heads_global, rng);
    local_stack.init(cfg.n_local, cfg.d_local, cfg.ffn_local, cfg.heads_local, rng);

    auto stack_param_count = [](nn::Stack<float>& s) {
        long long n = 0;
        nn::visit_stack(s, "s", [&](const std::string&, MatrixF& m) { n += m.size(); });
        return n;
    };
    const double m_flat = static_cast<double>(stack_param_count(flat));
    const double m_g = static_cast<double>(stack_param_count(global_stack));
    const double m_l = static_cast<double>(stack_param_count(local_stack));

    for (int depth : cfg.depths) {
        for (int t2 : cfg.lengths) {
            std::string config_id = "Ng" + std::to_string(cfg.n_global) + "_Nl" +
                                    std::to_string(cfg.n_local) + "_dg" +
                                    std::to_string(cfg.d_global);

            BenchRow flat_row;
            flat_row.config_id = config_id;
            flat_row.variant = "flat";
            flat_row.t2 = t2;
            flat_row.depth = depth;
            flat_row.attn_cost = attn_cost_flat(n_flat, t2, depth);
            flat_row.flops = flops_flat(m_flat, t2, depth);
            flat_row.flops_speedup_limit = depth;
            long flat_len = static_cast<long>(t2) * depth;
            if (flat_len > cfg.max_flat_tokens) {
                flat_row.skipped = true;
            } else {
                try {
                    MatrixF x = random_input(flat_len, cfg.d_global, rng);
                    nn::StackCache<float> cache;
                    flat_row.time_ms = time_median_ms(
                        [&] { nn::stack_fwd(flat, x, cache); }, cfg.warmups, cfg.repeats);
                    flat_row.tokens_per_s = flat_len / (flat_row.time_ms / 1000.0);
                } catch (const std::bad_alloc&) {
                    flat_row.skipped = true;
                }
            }
            rows.push_back(flat_row);

            BenchRow hier_row = flat_row;
            hier_row.variant = "hier";
            hier_row.skipped = false;
            hier_row.attn_cost = attn_cost_hier(cfg.n_global, cfg.n_local, t2, depth);
            hier_row.flops = flops_hier(m_g, m_l, t2, depth);
            try {
                MatrixF xg = random_input(t2, cfg.d_global, rng);
                MatrixF xl = random_input(depth, cfg.d_local, rng);
                nn::StackCache<float> gcache, lcache;
                hier_row.time_ms = time_median_ms(
                    [&] {
                        nn::stack_fwd(global_stack, xg, gcache);
                        for (int t = 0; t < t2; ++t) nn::stack_fwd(local_stack, xl, lcache);
                    },
                    cfg.warmups, cfg.repeats);
                hier_row.tokens_per_s = flat_len / (hier_row.time_ms / 1000.0);
            } catch (const std::bad_alloc&) {
                hier_row.skipped = true;
                hier_row.time_ms = -1.0;
            }
            rows.push_back(hier_row);
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
        if (a.config_id != b.config_id) return a.config_id < b.config_id;
        if (a.variant != b.variant) return a.variant < b.variant;
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.t2 < b.t2;
    });
    return rows;
}

double bench_local_drop_ms(const BenchConfig& cfg, int t2, int depth, double drop_p,
                           uint64_t seed) {
    Rng rng(seed);
    nn::Stack<float> local_stack;
    local_stack.init(cfg.n_local, cfg.d_local, cfg.ffn_local, cfg.heads_local, rng);
    nn::Stack<float> grads = local_stack;  // same shapes; values irrelevant

    MatrixF xl = random_input(depth, cfg.d_local, rng);
    std::vector<char> retain(t2);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < t2; ++t) retain[t] = unif(rng) >= drop_p ? 1 : 0;

    return time_median_ms(
        [&] {
            nn::StackCache<float> cache;
            for (int t = 0; t < t2; ++t) {
                if (!retain[t]) continue;
                MatrixF h = nn::stack_fwd(local_stack, xl, cache);
                nn::stack_bwd(local_stack, cache, h, grads);
            }
        },
        cfg.warmups, cfg.repeats);
}

namespace {

void write_rows(const std::vector<BenchRow>& rows, const std::string& path, char sep,
                bool header) {
    std::ofstream os(path);
    check(os.good(), "cannot open for write: " + path);
    if (header)
        os << "config_id" << sep << "variant" << sep << "t2" << sep << "depth" << sep << "time_ms"
           << sep << "attn_cost" << sep << "flops" << sep << "tokens_per_s" << sep
           << "flops_speedup_limit" << sep << "skipped\n";
    for (const BenchRow& r : rows) {
        os << r.config_id << sep << r.variant << sep << r.t2 << sep << r.depth << sep
           << (r.skipped ? -1.0 : r.time_ms) << sep << r.attn_cost << sep << r.flops << sep
           << r.tokens_per_s << sep << r.flops_speedup_limit << sep << (r.skipped ? 1 : 0)
           << "\n";
    }
    check(os.good(), "write failed: " + path);
}

}  // namespace

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path) {
    write_rows(rows, path, ',', true);
}

void write_bench_dat(const std::vector<BenchRow>& rows, const std::string& path) {
    write_rows(rows, path, ' ', false);
}

}  // namespace hislm
