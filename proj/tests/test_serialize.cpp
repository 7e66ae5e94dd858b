#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "hislm/serialize.hpp"

using namespace hislm;

namespace {

std::string tmp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

MatrixF arange(Eigen::Index r, Eigen::Index c, float start = 0.0f) {
    MatrixF m(r, c);
    float v = start;
    for (Eigen::Index i = 0; i < r; ++i)
        for (Eigen::Index j = 0; j < c; ++j) m(i, j) = v += 0.5f;
    return m;
}

}  // namespace

TEST_CASE("little-endian primitives round-trip") {
    std::stringstream ss;
    write_u32(ss, 0xdeadbeefu);
    write_f32(ss, 1.5f);
    write_f64(ss, -2.25);
    write_str(ss, "hello");
    CHECK(read_u32(ss) == 0xdeadbeefu);
    CHECK(read_f32(ss) == 1.5f);
    CHECK(read_f64(ss) == -2.25);
    CHECK(read_str(ss) == "hello");
}

TEST_CASE("u32 layout is little-endian") {
    std::stringstream ss;
    write_u32(ss, 0x01020304u);
    std::string bytes = ss.str();
    REQUIRE(bytes.size() == 4);
    CHECK(uint8_t(bytes[0]) == 0x04);
    CHECK(uint8_t(bytes[3]) == 0x01);
}

TEST_CASE("codebooks round-trip bit-exactly") {
    RvqCodebooks cbs;
    cbs.levels.push_back(arange(4, 3));
    cbs.levels.push_back(arange(4, 3, 100.0f));
    std::string path = tmp_path("hislm_test_cbs.hscb");
    save_codebooks(cbs, path);
    RvqCodebooks back = load_codebooks(path);
    REQUIRE(back.depth() == 2);
    CHECK(back.levels[0] == cbs.levels[0]);
    CHECK(back.levels[1] == cbs.levels[1]);
    std::remove(path.c_str());
}

TEST_CASE("semantic codebook round-trips through the one-level container") {
    SemanticCodebook cb{arange(8, 5)};
    std::string path = tmp_path("hislm_test_sem.hscb");
    save_semantic_codebook(cb, path);
    SemanticCodebook back = load_semantic_codebook(path);
    CHECK(back.centroids == cb.centroids);
    std::remove(path.c_str());
}

TEST_CASE("frames round-trip with their rate") {
    FrameSeq fs{arange(6, 4), 75.0};
    std::string path = tmp_path("hislm_test_frames.hsfm");
    save_frames(fs, path);
    FrameSeq back = load_frames(path);
    CHECK(back.frames == fs.frames);
    CHECK(back.frame_rate_hz == 75.0);
    std::remove(path.c_str());
}

TEST_CASE("corrupt magic is rejected") {
    std::string path = tmp_path("hislm_test_bad.hscb");
    {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE" << std::string(16, '\0');
    }
    CHECK_THROWS(load_codebooks(path));
    CHECK_THROWS(load_frames(path));
    std::remove(path.c_str());
}

TEST_CASE("token records round-trip through JSON lines") {
    std::vector<TokenRecord> recs(2);
    recs[0].semantic = {1, 2, 3};
    recs[0].acoustic.codes = {{0, 1}, {2, 3}};
    recs[0].content_id = 4;
    recs[0].speaker_id = 2;
    recs[1].semantic = {};
    recs[1].acoustic.codes = {};
    std::string path = tmp_path("hislm_test_tokens.jsonl");
    save_token_records(recs, path);
    std::vector<TokenRecord> back = load_token_records(path);
    REQUIRE(back.size() == 2);
    CHECK(back[0].semantic == recs[0].semantic);
    CHECK(back[0].acoustic.codes == recs[0].acoustic.codes);
    CHECK(back[0].content_id == 4);
    CHECK(back[0].speaker_id == 2);
    CHECK(back[1].semantic.empty());
    CHECK(back[1].acoustic.codes.empty());
    std::remove(path.c_str());
}

TEST_CASE("token file is one JSON object per line") {
    std::vector<TokenRecord> recs(3);
    for (int i = 0; i < 3; ++i) recs[i].semantic = {i};
    std::string path = tmp_path("hislm_test_lines.jsonl");
    save_token_records(recs, path);
    std::ifstream is(path);
    std::string line;
    int lines = 0;
    while (std::getline(is, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 3);
    std::remove(path.c_str());
}
