#include "hislm/serialize.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace hislm {

namespace {

constexpr uint32_t kCodebookVersion = 1;
constexpr uint32_t kFrameVersion = 1;

void expect_magic(std::istream& is, const char* magic, const std::string& path) {
    char buf[4];
    is.read(buf, 4);
    check(is.good() && std::memcmp(buf, magic, 4) == 0, "bad magic in " + path);
}

}  // namespace

void write_u32(std::ostream& os, uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

uint32_t read_u32(std::istream& is) {
    uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    check(is.good(), "unexpected end of file");
    return v;
}

void write_f32(std::ostream& os, float v) { os.write(reinterpret_cast<const char*>(&v), 4); }

float read_f32(std::istream& is) {
    float v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    check(is.good(), "unexpected end of file");
    return v;
}

void write_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }

double read_f64(std::istream& is) {
    double v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    check(is.good(), "unexpected end of file");
    return v;
}

void write_str(std::ostream& os, const std::string& s) {
    write_u32(os, static_cast<uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_str(std::istream& is) {
    uint32_t n = read_u32(is);
    std::string s(n, '\0');
    is.read(s.data(), n);
    check(is.good(), "unexpected end of file");
    return s;
}

void save_codebooks(const RvqCodebooks& cbs, const std::string& path) {
    check(cbs.depth() >= 1, "save_codebooks: empty codebooks");
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "cannot open for write: " + path);
    os.write("HSCB", 4);
    write_u32(os, kCodebookVersion);
    write_u32(os, static_cast<uint32_t>(cbs.depth()));
    write_u32(os, static_cast<uint32_t>(cbs.vocab()));
    write_u32(os, static_cast<uint32_t>(cbs.dim()));
    for (const MatrixF& level : cbs.levels) {
        for (Eigen::Index i = 0; i < level.rows(); ++i)
            for (Eigen::Index j = 0; j < level.cols(); ++j) write_f32(os, level(i, j));
    }
    check(os.good(), "write failed: " + path);
}

RvqCodebooks load_codebooks(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "cannot open: " + path);
    expect_magic(is, "HSCB", path);
    uint32_t version = read_u32(is);
    check(version == kCodebookVersion, "unsupported codebook version in " + path);
    uint32_t depth = read_u32(is);
    uint32_t entries = read_u32(is);
    uint32_t dim = read_u32(is);
    RvqCodebooks cbs;
    for (uint32_t q = 0; q < depth; ++q) {
        MatrixF level(entries, dim);
        for (uint32_t i = 0; i < entries; ++i)
            for (uint32_t j = 0; j < dim; ++j) level(i, j) = read_f32(is);
        cbs.levels.push_back(std::move(level));
    }
    return cbs;
}

void save_semantic_codebook(const SemanticCodebook& cb, const std::string& path) {
    RvqCodebooks wrap;
    wrap.levels.push_back(cb.centroids);
    save_codebooks(wrap, path);
}

SemanticCodebook load_semantic_codebook(const std::string& path) {
    RvqCodebooks wrap = load_codebooks(path);
    check(wrap.depth() == 1, "expected single-level codebook in " + path);
    return SemanticCodebook{std::move(wrap.levels[0])};
}

void save_frames(const FrameSeq& fs, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    check(os.good(), "cannot open for write: " + path);
    os.write("HSFM", 4);
    write_u32(os, kFrameVersion);
    write_u32(os, static_cast<uint32_t>(fs.frames.rows()));
    write_u32(os, static_cast<uint32_t>(fs.frames.cols()));
    write_f64(os, fs.frame_rate_hz);
    for (Eigen::Index i = 0; i < fs.frames.rows(); ++i)
        for (Eigen::Index j = 0; j < fs.frames.cols(); ++j) write_f32(os, fs.frames(i, j));
    check(os.good(), "write failed: " + path);
}

FrameSeq load_frames(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    check(is.good(), "cannot open: " + path);
    expect_magic(is, "HSFM", path);
    uint32_t version = read_u32(is);
    check(version == kFrameVersion, "unsupported frame file version in " + path);
    uint32_t rows = read_u32(is);
    uint32_t cols = read_u32(is);
    FrameSeq fs;
    fs.frame_rate_hz = read_f64(is);
    fs.frames.resize(rows, cols);
    for (uint32_t i = 0; i < rows; ++i)
        for (uint32_t j = 0; j < cols; ++j) fs.frames(i, j) = read_f32(is);
    return fs;
}

void save_token_records(const std::vector<TokenRecord>& records, const std::string& path) {
    std::ofstream os(path);
    check(os.good(), "cannot open for write: " + path);
    for (const TokenRecord& rec : records) {
        nlohmann::json line;
        line["semantic"] = rec.semantic;
        line["acoustic"] = rec.acoustic.codes;
        line["meta"] = {{"content_id", rec.content_id}, {"speaker_id", rec.speaker_id}};
        os << line.dump() << "\n";
    }
    check(os.good(), "write failed: " + path);
}

std::vector<TokenRecord> load_token_records(const std::string& path) {
    std::ifstream is(path);
    check(is.good(), "cannot open: " + path);
    std::vector<TokenRecord> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        TokenRecord rec;
        rec.semantic = j.at("semantic").get<SemanticSeq>();
        rec.acoustic.codes = j.at("acoustic").get<std::vector<std::vector<int>>>();
        rec.content_id = j.at("meta").at("content_id").get<int>();
        rec.speaker_id = j.at("meta").at("speaker_id").get<int>();
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace hislm
