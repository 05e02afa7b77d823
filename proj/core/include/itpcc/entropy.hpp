#pragma once

#include <cstdint>
#include <vector>

namespace itpcc {

// Discretized Gaussian mass of integer q: Phi((q-mu+.5)/sigma) -
// Phi((q-mu-.5)/sigma), floored at 2^-64.
double gaussian_likelihood(double q, double mu, double sigma);

// Discretized logistic mass (factorized hyper-latent prior).
double logistic_likelihood(double q, double loc, double scale);

// Per-symbol coding table over integer support [q_min, q_max] plus a
// final escape slot for out-of-range values. Frequencies are quantized
// to 16 bits; every slot keeps mass >= 1 and the total is exactly 2^16.
struct SymbolModel {
    int32_t q_min = 0;
    int32_t q_max = 0;
    std::vector<uint32_t> cdf;  // size = slots + 1, cdf.back() == 65536

    int slots() const { return int(cdf.size()) - 1; }
    int escape_slot() const { return slots() - 1; }
};

// Builds the quantized table from a discretized Gaussian. The support
// window is [mu-8*sigma, mu+8*sigma] clamped to +-2^15 and to a bounded
// width; construction is deterministic in (mu, sigma).
SymbolModel build_symbol_model(double mu, double sigma);

// Same, from the per-channel logistic prior.
SymbolModel build_factorized(double loc, double scale);

// Range codes `symbols` with one model per symbol. Payload layout:
// [u32 LE symbol count][range-coded body]. Escaped values are coded as
// 4 raw bytes under a flat model.
std::vector<uint8_t> range_encode(const std::vector<int32_t>& symbols,
                                  const std::vector<SymbolModel>& models);

// Inverse; throws std::runtime_error on truncated or corrupt streams
// and on a symbol-count mismatch with `models`.
std::vector<int32_t> range_decode(const std::vector<uint8_t>& bytes,
                                  const std::vector<SymbolModel>& models);

// Low-level coder, usable for streaming with per-symbol tables built
// on the fly (encoder and decoder must build identical tables).
class RangeEncoder {
public:
    void encode(uint32_t cum, uint32_t freq);
    void encode_symbol(const SymbolModel& model, int32_t value);
    std::vector<uint8_t> finish();

private:
    void shift_low();

    std::vector<uint8_t> out_;
    uint64_t low_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
    uint8_t cache_ = 0;
    uint64_t pending_ = 0;
    bool first_ = true;
};

class RangeDecoder {
public:
    RangeDecoder(const uint8_t* data, size_t size);

    uint32_t decode_freq();  // current scaled value in [0, 65536)
    void consume(uint32_t cum, uint32_t freq);
    int32_t decode_symbol(const SymbolModel& model);

private:
    uint8_t next_byte();

    const uint8_t* data_;
    size_t size_;
    size_t pos_ = 0;
    uint64_t code_ = 0;
    uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace itpcc
