#include "itpcc/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace itpcc {

namespace {

constexpr char kMagic[4] = {'I', 'P', 'C', 'W'};
constexpr uint8_t kVersion = 1;

void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char(uint8_t(v >> (8 * i))));
}
void put_u64(std::string& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(char(uint8_t(v >> (8 * i))));
}
void put_i32(std::string& out, int32_t v) { put_u32(out, uint32_t(v)); }
void put_f32(std::string& out, float v) { put_u32(out, std::bit_cast<uint32_t>(v)); }

struct Reader {
    const std::string& buf;
    size_t pos = 0;

    void need(size_t n) const {
        if (pos + n > buf.size())
            throw std::runtime_error("checkpoint: truncated file");
    }
    uint8_t u8() {
        need(1);
        return uint8_t(buf[pos++]);
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf[pos++])) << (8 * i);
        return v;
    }
    uint64_t u64() {
        uint64_t lo = u32(), hi = u32();
        return lo | (hi << 32);
    }
    std::string str(uint32_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

uint64_t arch_hash(const std::string& json) {
    // FNV-1a
    uint64_t h = 0xCBF29CE484222325ull;
    for (unsigned char c : json) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return h;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
    std::string out;
    out.append(kMagic, 4);
    out.push_back(char(kVersion));
    put_u32(out, uint32_t(ckpt.arch_json.size()));
    out += ckpt.arch_json;
    put_u64(out, arch_hash(ckpt.arch_json));
    put_u32(out, uint32_t(ckpt.tensors.size()));
    for (const auto& [name, t] : ckpt.tensors) {
        put_u32(out, uint32_t(name.size()));
        out += name;
        for (int i = 0; i < 5; ++i) put_i32(out, t.shape[i]);
        for (float v : t.data) put_f32(out, v);
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open for write: " + path);
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    Reader r{buf};
    if (r.str(4) != std::string(kMagic, 4))
        throw std::runtime_error("checkpoint: bad magic");
    if (r.u8() != kVersion) throw std::runtime_error("checkpoint: bad version");
    Checkpoint ckpt;
    ckpt.arch_json = r.str(r.u32());
    if (r.u64() != arch_hash(ckpt.arch_json))
        throw std::runtime_error("checkpoint: architecture hash mismatch");
    uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        std::string name = r.str(r.u32());
        std::array<int, 5> shape;
        for (int a = 0; a < 5; ++a) shape[a] = int(int32_t(r.u32()));
        Tensor<float> t(shape);
        for (auto& v : t.data) v = std::bit_cast<float>(r.u32());
        ckpt.tensors.emplace_back(std::move(name), std::move(t));
    }
    return ckpt;
}

Checkpoint snapshot_params(const std::string& arch_json,
                           const std::vector<nn::Param<float>*>& params) {
    Checkpoint ckpt;
    ckpt.arch_json = arch_json;
    for (auto* p : params) ckpt.tensors.emplace_back(p->name, p->value);
    return ckpt;
}

void restore_params(const Checkpoint& ckpt,
                    const std::vector<nn::Param<float>*>& params) {
    std::unordered_map<std::string, const Tensor<float>*> by_name;
    for (const auto& [name, t] : ckpt.tensors) by_name.emplace(name, &t);
    if (by_name.size() != params.size())
        throw std::runtime_error("checkpoint: parameter count mismatch");
    for (auto* p : params) {
        auto it = by_name.find(p->name);
        if (it == by_name.end())
            throw std::runtime_error("checkpoint: missing tensor " + p->name);
        if (it->second->shape != p->value.shape)
            throw std::runtime_error("checkpoint: shape mismatch for " + p->name);
        p->value = *it->second;
    }
}

}  // namespace itpcc
