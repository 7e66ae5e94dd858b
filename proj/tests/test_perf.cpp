#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hislm/perf.hpp"

using namespace hislm;

TEST_CASE("attn_cost_flat basics") {
    CHECK(attn_cost_flat(1, 1, 1) == 1);
    // Quadratic in the unrolled length, so doubling D quadruples the cost.
    CHECK(attn_cost_flat(3, 100, 8) == 4 * attn_cost_flat(3, 100, 4));
    CHECK(attn_cost_flat(12, 750, 8) == 432000000LL);
}

TEST_CASE("attn_cost_hier basics") {
    CHECK(attn_cost_hier(1, 1, 1, 1) == 2);
    // 9*750^2 + 12*750*64
    CHECK(attn_cost_hier(9, 12, 750, 8) == 5638500LL);
}

TEST_CASE("hier always beats flat at matched layer count") {
    for (long long ng = 1; ng <= 4; ++ng)
        for (long long nl = 1; nl <= 4; ++nl)
            for (long long t2 : {2, 16, 128, 750})
                for (long long d : {1, 2, 8, 16})
                    CHECK(attn_cost_hier(ng, nl, t2, d) < attn_cost_flat(ng + nl, t2, d));
}

TEST_CASE("flops formulas") {
    CHECK(flops_flat(1, 1, 1) == doctest::Approx(2.0));
    CHECK(flops_hier(1, 0, 1, 1) == doctest::Approx(2.0));
    CHECK(flops_hier(5.0, 0.0, 100, 8) == doctest::Approx(2.0 * 100 * 5.0));
    // Linearity in each argument.
    CHECK(flops_flat(6, 100, 8) == doctest::Approx(2 * flops_flat(3, 100, 8)));
    CHECK(flops_flat(3, 200, 8) == doctest::Approx(2 * flops_flat(3, 100, 8)));
    CHECK(flops_flat(3, 100, 16) == doctest::Approx(2 * flops_flat(3, 100, 8)));
}

TEST_CASE("speedup limit approaches D as m_l/m_g -> 0") {
    const double d = 8, t2 = 750, mg = 1e9;
    CHECK(flops_flat(mg, t2, d) / flops_hier(mg, 0.0, t2, d) == doctest::Approx(d));
    double prev = 0.0;
    for (double ml : {1e8, 1e7, 1e6, 1e5}) {
        double r = flops_flat(mg + ml, t2, d) / flops_hier(mg, ml, t2, d);
        CHECK(r > prev);
        prev = r;
    }
    CHECK(prev == doctest::Approx(d).epsilon(1e-3));
}

TEST_CASE("block_params hand count") {
    // d=4, ffn=8: qkvo 4*(16+4)=80, fc1 4*8+8=40, fc2 8*4+4=36, two norms 16.
    CHECK(block_params(4, 8) == 172);
    CHECK(block_params(4, 8) == 4 * (4 * 4 + 4) + (4 * 8 + 8) + (8 * 4 + 4) + 4 * 4);
}

TEST_CASE("paper-size global layer is ~4x a local layer") {
    double ratio = double(block_params(1024, 4096)) / double(block_params(512, 2048));
    CHECK(ratio > 4.0 * 0.95);
    CHECK(ratio < 4.0 * 1.05);
}

TEST_CASE("count_params splits the built model") {
    ModelConfig cfg;
    cfg.n_layers_global = 2;
    cfg.n_layers_local = 1;
    cfg.d_global = 16;
    cfg.d_local = 8;
    cfg.heads_global = 2;
    cfg.heads_local = 1;
    cfg.ffn_global = 32;
    cfg.ffn_local = 16;
    cfg.n_semantic = 5;
    cfg.n_acoustic = 6;
    cfg.depth = 2;
    cfg.max_t1 = 8;
    cfg.max_t2 = 8;
    ParamsF p;
    p.init(cfg, 1);
    ParamCounts c = count_params(p);

    long long expect_global = 2 * block_params(16, 32) + 2 * 16   // stack + ln_f
                              + 16 * 8 + 8;                       // semantic head (8 = 5+3 specials)
    long long expect_local = 1 * block_params(8, 16) + 2 * 8      // stack + ln_f
                             + 16 * 8 + 8                          // proj_g2l
                             + 2 * (8 * 6 + 6);                    // D code heads
    long long expect_emb = 8 * 16                                  // semantic table
                           + 2 * (6 * 16)                          // global acoustic tables
                           + (8 + 8 + 3) * 16                      // pos_global
                           + (2 + 1) * 8                           // pos_local
                           + 1 * (6 * 8);                          // local acoustic tables (D-1)
    CHECK(c.m_global == expect_global);
    CHECK(c.m_local == expect_local);
    CHECK(c.embeddings == expect_emb);

    long long total = 0;
    visit_params(p, [&](const std::string&, const MatrixF& m) { total += m.size(); });
    CHECK(c.m_global + c.m_local + c.embeddings == total);
}

TEST_CASE("flat sequence length arithmetic") {
    // 10 s at 75 Hz with 8 quantizers unrolls to 6000 positions.
    CHECK(long(75 * 10) * 8 == 6000);
}
