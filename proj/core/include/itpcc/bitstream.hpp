#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace itpcc {

// Fixed stream-level parameters. `precision` is the coordinate bit
// depth of the *original* cloud; `blk_size` the partition block edge at
// the coded (possibly down-sampled) scale.
struct StreamHeader {
    bool with_color = false;
    bool with_abu = false;
    int precision = 0;
    int blk_size = 128;
    float sf = 1.0f;  // sampling factor applied before coding
    float qs = 1.0f;  // latent quantization step
    uint8_t model_id = 0;

    static constexpr uint8_t kVersion = 1;
};

// One coded block. `pos` is the block-grid index (origin / blk_size) at
// the coded scale; payloads are the range-coded hyper (side) and latent
// (main) streams.
struct BlockRecord {
    std::array<uint16_t, 3> pos{0, 0, 0};
    uint32_t k_codec = 0;  // points kept after the codec's top-k
    uint32_t k_abu = 0;    // points kept after the up-sampler (0 = none)
    uint8_t mask = 0;      // octant occupancy of the source block
    std::vector<uint8_t> side;
    std::vector<uint8_t> main;
};

struct Bitstream {
    StreamHeader header;
    std::vector<BlockRecord> blocks;
};

// Byte size of one serialized record (for rate accounting).
size_t record_size(const BlockRecord& rec);

std::vector<uint8_t> serialize(const Bitstream& bs);

// Throws std::runtime_error on bad magic, unsupported version, or a
// truncated/corrupt buffer.
Bitstream deserialize(const std::vector<uint8_t>& bytes);

}  // namespace itpcc
