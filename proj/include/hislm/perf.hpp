#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hislm/model.hpp"

namespace hislm {

// Dominant-term attention cost of a flat decoder over the unrolled T2*D grid:
// N * T2^2 * D^2 (constants dropped).
long long attn_cost_flat(long long n_layers, long long t2, long long depth);

// Hierarchical counterpart: N_g * T2^2 + N_l * T2 * D^2.
long long attn_cost_hier(long long n_global, long long n_local, long long t2, long long depth);

// Forward-pass FLOPS with m non-embedding parameters: 2 * T2 * D * m for the
// flat stack over length T2*D.
double flops_flat(double m, double t2, double depth);

// 2 * T2 * (m_g + m_l * D); ratio to flops_flat approaches D as m_l/m_g -> 0.
double flops_hier(double m_global, double m_local, double t2, double depth);

struct ParamCounts {
    long long m_global = 0;   // global stack + semantic head
    long long m_local = 0;    // local stack + conditioning projection + code heads
    long long embeddings = 0; // token and positional tables
};

ParamCounts count_params(const ParamsF& params);

// Analytic non-embedding parameter count of one decoder block.
long long block_params(long long d, long long ffn);

struct BenchRow {
    std::string config_id;
    std::string variant;  // "flat" or "hier"
    int t2 = 0;
    int depth = 0;
    double time_ms = -1.0;  // < 0: skipped (e.g. out of memory)
    long long attn_cost = 0;
    double flops = 0.0;
    double tokens_per_s = 0.0;
    double flops_speedup_limit = 0.0;  // D, the m_l -> 0 limit of flat/hier
    bool skipped = false;
};

struct BenchConfig {
    int n_global = 2;
    int n_local = 2;
    int d_global = 64;
    int d_local = 32;
    int heads_global = 2;
    int heads_local = 2;
    int ffn_global = 128;
    int ffn_local = 64;
    std::vector<int> depths = {2, 4, 8, 16};
    std::vector<int> lengths = {128, 256, 512, 750};
    int repeats = 5;
    int warmups = 2;
    long max_flat_tokens = 8192;  // flat rows beyond this are marked skipped
};

// Times flat (one stack over T2*D) vs hierarchical (global over T2 plus T2
// local passes over D) forwards; median of repeats after warmups.
std::vector<BenchRow> bench_forward(const BenchConfig& cfg, uint64_t seed = 0);

// Median wall time of the local-stack training work (forward + backward over
// retained frames) at a given local-drop probability.
double bench_local_drop_ms(const BenchConfig& cfg, int t2, int depth, double drop_p,
                           uint64_t seed = 0);

void write_bench_csv(const std::vector<BenchRow>& rows, const std::string& path);
// Same rows, whitespace-separated for gnuplot.
void write_bench_dat(const std::vector<BenchRow>& rows, const std::string& path);

}  // namespace hislm
