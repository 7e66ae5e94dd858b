#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hislm/tokenhub.hpp"

namespace hislm {

// Versioned binary codebook container. Semantic codebooks are stored as a
// single-level file. Layout: magic "HSCB", u32 version, u32 levels,
// u32 entries, u32 dim, then levels * entries * dim little-endian f32,
// row-major.
void save_codebooks(const RvqCodebooks& cbs, const std::string& path);
RvqCodebooks load_codebooks(const std::string& path);

void save_semantic_codebook(const SemanticCodebook& cb, const std::string& path);
SemanticCodebook load_semantic_codebook(const std::string& path);

// Frame matrix file: magic "HSFM", u32 version, u32 rows, u32 cols,
// f64 frame_rate_hz, then f32 data row-major.
void save_frames(const FrameSeq& fs, const std::string& path);
FrameSeq load_frames(const std::string& path);

// One tokenized utterance, one JSON line each in token files.
struct TokenRecord {
    SemanticSeq semantic;
    AcousticGrid acoustic;
    int content_id = 0;
    int speaker_id = 0;
};

void save_token_records(const std::vector<TokenRecord>& records, const std::string& path);
std::vector<TokenRecord> load_token_records(const std::string& path);

// Raw little-endian primitives shared by the binary formats.
void write_u32(std::ostream& os, uint32_t v);
uint32_t read_u32(std::istream& is);
void write_f32(std::ostream& os, float v);
float read_f32(std::istream& is);
void write_f64(std::ostream& os, double v);
double read_f64(std::istream& is);
void write_str(std::ostream& os, const std::string& s);
std::string read_str(std::istream& is);

}  // namespace hislm
