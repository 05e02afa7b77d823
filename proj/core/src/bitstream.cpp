#include "itpcc/bitstream.hpp"

#include <bit>
#include <cstring>
#include <stdexcept>

namespace itpcc {

namespace {

constexpr char kMagic[4] = {'I', 'P', 'C', 'C'};

void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }
void put_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(uint8_t(v));
    out.push_back(uint8_t(v >> 8));
}
void put_u32(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}
void put_f32(std::vector<uint8_t>& out, float v) {
    put_u32(out, std::bit_cast<uint32_t>(v));
}

struct Reader {
    const std::vector<uint8_t>& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size()) throw std::runtime_error("bitstream: truncated");
    }
    uint8_t u8() {
        need(1);
        return buf[pos++];
    }
    uint16_t u16() {
        need(2);
        uint16_t v = uint16_t(buf[pos]) | uint16_t(buf[pos + 1]) << 8;
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(buf[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::vector<uint8_t> bytes(size_t n) {
        need(n);
        std::vector<uint8_t> v(buf.begin() + long(pos), buf.begin() + long(pos + n));
        pos += n;
        return v;
    }
};

}  // namespace

size_t record_size(const BlockRecord& rec) {
    return 3 * 2 + 4 + 4 + 1 + 4 + rec.side.size() + 4 + rec.main.size();
}

std::vector<uint8_t> serialize(const Bitstream& bs) {
    std::vector<uint8_t> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    put_u8(out, StreamHeader::kVersion);
    uint8_t flags = 0;
    if (bs.header.with_color) flags |= 1;
    if (bs.header.with_abu) flags |= 2;
    put_u8(out, flags);
    put_u8(out, uint8_t(bs.header.precision));
    put_u16(out, uint16_t(bs.header.blk_size));
    put_f32(out, bs.header.sf);
    put_f32(out, bs.header.qs);
    put_u8(out, bs.header.model_id);
    put_u32(out, uint32_t(bs.blocks.size()));
    for (const auto& rec : bs.blocks) {
        for (int i = 0; i < 3; ++i) put_u16(out, rec.pos[i]);
        put_u32(out, rec.k_codec);
        put_u32(out, rec.k_abu);
        put_u8(out, rec.mask);
        put_u32(out, uint32_t(rec.side.size()));
        out.insert(out.end(), rec.side.begin(), rec.side.end());
        put_u32(out, uint32_t(rec.main.size()));
        out.insert(out.end(), rec.main.begin(), rec.main.end());
    }
    return out;
}

Bitstream deserialize(const std::vector<uint8_t>& bytes) {
    Reader r{bytes};
    r.need(4);
    if (std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw std::runtime_error("bitstream: bad magic");
    r.pos = 4;
    if (r.u8() != StreamHeader::kVersion)
        throw std::runtime_error("bitstream: unsupported version");

    Bitstream bs;
    uint8_t flags = r.u8();
    bs.header.with_color = (flags & 1) != 0;
    bs.header.with_abu = (flags & 2) != 0;
    bs.header.precision = r.u8();
    bs.header.blk_size = r.u16();
    bs.header.sf = r.f32();
    bs.header.qs = r.f32();
    bs.header.model_id = r.u8();
    uint32_t count = r.u32();
    bs.blocks.reserve(count);
    for (uint32_t b = 0; b < count; ++b) {
        BlockRecord rec;
        for (int i = 0; i < 3; ++i) rec.pos[i] = r.u16();
        rec.k_codec = r.u32();
        rec.k_abu = r.u32();
        rec.mask = r.u8();
        rec.side = r.bytes(r.u32());
        rec.main = r.bytes(r.u32());
        bs.blocks.push_back(std::move(rec));
    }
    if (r.pos != bytes.size())
        throw std::runtime_error("bitstream: trailing bytes");
    return bs;
}

}  // namespace itpcc
