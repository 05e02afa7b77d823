#include "itpcc/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace itpcc {

namespace {

constexpr uint32_t kTotal = 1u << 16;
constexpr uint32_t kTopValue = 1u << 24;
constexpr double kMinMass = 0x1.0p-64;
constexpr int kMaxSupport = 4096;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

double gaussian_likelihood(double q, double mu, double sigma) {
    double a = (q - mu + 0.5) / sigma;
    double b = (q - mu - 0.5) / sigma;
    return std::max(normal_cdf(a) - normal_cdf(b), kMinMass);
}

double logistic_likelihood(double q, double loc, double scale) {
    auto s = [](double x) { return 1.0 / (1.0 + std::exp(-x)); };
    double a = s((q - loc + 0.5) / scale);
    double b = s((q - loc - 0.5) / scale);
    return std::max(a - b, kMinMass);
}

namespace {

SymbolModel quantize_model(int32_t lo, int32_t hi, const std::vector<double>& pmf) {
    int n = int(pmf.size()) + 1;  // + escape
    // floor(p * budget) + 1 per slot keeps every slot >= 1; the
    // remainder goes to the heaviest slot (lowest index on ties).
    uint32_t budget = kTotal - uint32_t(n);
    std::vector<uint32_t> freq(n, 1);
    double escape_mass = 1e-6;
    double total = escape_mass;
    for (double p : pmf) total += p;
    uint64_t sum = uint64_t(n);
    for (size_t i = 0; i < pmf.size(); ++i) {
        uint32_t f = uint32_t(pmf[i] / total * budget);
        freq[i] += f;
        sum += f;
    }
    {
        uint32_t f = uint32_t(escape_mass / total * budget);
        freq[n - 1] += f;
        sum += f;
    }
    size_t heaviest = 0;
    for (size_t i = 1; i < freq.size(); ++i)
        if (freq[i] > freq[heaviest]) heaviest = i;
    freq[heaviest] += uint32_t(kTotal - sum);

    SymbolModel m;
    m.q_min = lo;
    m.q_max = hi;
    m.cdf.resize(n + 1);
    m.cdf[0] = 0;
    for (int i = 0; i < n; ++i) m.cdf[i + 1] = m.cdf[i] + freq[i];
    return m;
}

std::pair<int32_t, int32_t> support_window(double center, double halfwidth) {
    int32_t lo = int32_t(std::floor(center - halfwidth));
    int32_t hi = int32_t(std::ceil(center + halfwidth));
    lo = std::max(lo, -32768);
    hi = std::min(hi, 32767);
    if (hi < lo) hi = lo;
    if (hi - lo + 1 > kMaxSupport) {
        int32_t c = int32_t(std::lround(center));
        lo = std::max(c - kMaxSupport / 2, -32768);
        hi = lo + kMaxSupport - 1;
    }
    return {lo, hi};
}

}  // namespace

SymbolModel build_symbol_model(double mu, double sigma) {
    auto [lo, hi] = support_window(mu, 8.0 * sigma);
    std::vector<double> pmf;
    pmf.reserve(size_t(hi - lo + 1));
    for (int32_t q = lo; q <= hi; ++q) pmf.push_back(gaussian_likelihood(q, mu, sigma));
    return quantize_model(lo, hi, pmf);
}

SymbolModel build_factorized(double loc, double scale) {
    auto [lo, hi] = support_window(loc, 16.0 * scale + 2.0);
    std::vector<double> pmf;
    pmf.reserve(size_t(hi - lo + 1));
    for (int32_t q = lo; q <= hi; ++q) pmf.push_back(logistic_likelihood(q, loc, scale));
    return quantize_model(lo, hi, pmf);
}

// ---- encoder ----

void RangeEncoder::shift_low() {
    if (uint32_t(low_) < 0xFF000000u || (low_ >> 32) != 0) {
        uint8_t carry = uint8_t(low_ >> 32);
        out_.push_back(uint8_t(cache_ + carry));
        for (; pending_ > 0; --pending_) out_.push_back(uint8_t(0xFF + carry));
        cache_ = uint8_t(uint32_t(low_) >> 24);
    } else {
        ++pending_;
    }
    low_ = uint64_t(uint32_t(low_) << 8);  // top byte drops; it is in cache/pending
}

void RangeEncoder::encode(uint32_t cum, uint32_t freq) {
    uint32_t r = range_ >> 16;
    low_ += uint64_t(cum) * r;
    range_ = freq * r;
    while (range_ < kTopValue) {
        shift_low();
        range_ <<= 8;
    }
}

void RangeEncoder::encode_symbol(const SymbolModel& m, int32_t value) {
    int slot;
    bool escape = value < m.q_min || value > m.q_max;
    slot = escape ? m.escape_slot() : int(value - m.q_min);
    encode(m.cdf[slot], m.cdf[slot + 1] - m.cdf[slot]);
    if (escape) {
        uint32_t v = uint32_t(value);
        for (int i = 0; i < 4; ++i) {
            uint32_t byte = (v >> (8 * i)) & 0xFF;
            encode(byte << 8, 256);  // flat 256-symbol model
        }
    }
}

std::vector<uint8_t> RangeEncoder::finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    // shift_low may have withheld a run of 0xFF bytes waiting on a
    // carry that can no longer happen; drain the pipeline.
    if (pending_ > 0) {
        out_.push_back(cache_);
        for (; pending_ > 0; --pending_) out_.push_back(0xFF);
    }
    return std::move(out_);
}

// ---- decoder ----

RangeDecoder::RangeDecoder(const uint8_t* data, size_t size)
    : data_(data), size_(size) {
    for (int i = 0; i < 5; ++i) code_ = ((code_ << 8) | next_byte()) & 0xFFFFFFFFull;
}

uint8_t RangeDecoder::next_byte() {
    if (pos_ >= size_) throw std::runtime_error("range_decode: truncated stream");
    return data_[pos_++];
}

uint32_t RangeDecoder::decode_freq() {
    uint32_t r = range_ >> 16;
    return std::min(uint32_t(code_ / r), kTotal - 1);
}

void RangeDecoder::consume(uint32_t cum, uint32_t freq) {
    uint32_t r = range_ >> 16;
    code_ -= uint64_t(cum) * r;
    range_ = freq * r;
    while (range_ < kTopValue) {
        code_ = ((code_ << 8) | next_byte()) & 0xFFFFFFFFull;
        range_ <<= 8;
    }
}

int32_t RangeDecoder::decode_symbol(const SymbolModel& m) {
    uint32_t f = decode_freq();
    int slot = int(std::upper_bound(m.cdf.begin(), m.cdf.end(), f) - m.cdf.begin()) - 1;
    consume(m.cdf[slot], m.cdf[slot + 1] - m.cdf[slot]);
    if (slot != m.escape_slot()) return m.q_min + slot;
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        uint32_t ff = decode_freq();
        uint32_t byte = ff >> 8;
        consume(byte << 8, 256);
        v |= byte << (8 * i);
    }
    return int32_t(v);
}

// ---- framed helpers ----

std::vector<uint8_t> range_encode(const std::vector<int32_t>& symbols,
                                  const std::vector<SymbolModel>& models) {
    if (symbols.size() != models.size())
        throw std::invalid_argument("range_encode: one model per symbol required");
    RangeEncoder enc;
    for (size_t i = 0; i < symbols.size(); ++i)
        enc.encode_symbol(models[i], symbols[i]);
    std::vector<uint8_t> body = enc.finish();
    std::vector<uint8_t> out;
    out.reserve(body.size() + 4);
    uint32_t n = uint32_t(symbols.size());
    for (int i = 0; i < 4; ++i) out.push_back(uint8_t(n >> (8 * i)));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

std::vector<int32_t> range_decode(const std::vector<uint8_t>& bytes,
                                  const std::vector<SymbolModel>& models) {
    if (bytes.size() < 4) throw std::runtime_error("range_decode: missing framing");
    uint32_t n = 0;
    for (int i = 0; i < 4; ++i) n |= uint32_t(bytes[i]) << (8 * i);
    if (n != models.size())
        throw std::runtime_error("range_decode: symbol count mismatch");
    RangeDecoder dec(bytes.data() + 4, bytes.size() - 4);
    std::vector<int32_t> out;
    out.reserve(n);
    for (uint32_t i = 0; i < n; ++i) out.push_back(dec.decode_symbol(models[i]));
    return out;
}

}  // namespace itpcc
