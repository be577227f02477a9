#include "dvote/fixed.hpp"

#include <stdexcept>

namespace dvote {

extern const uint32_t kSigmoidTable[4096];

FixedPoint fp_add(FixedPoint a, FixedPoint b, bool& overflow) {
    int64_t r;
    if (__builtin_add_overflow(a.raw, b.raw, &r)) {
        overflow = true;
        return FixedPoint::from_raw(b.raw > 0 ? kFixedMax : kFixedMin);
    }
    return FixedPoint::from_raw(r);
}

FixedPoint fp_sub(FixedPoint a, FixedPoint b, bool& overflow) {
    int64_t r;
    if (__builtin_sub_overflow(a.raw, b.raw, &r)) {
        overflow = true;
        return FixedPoint::from_raw(b.raw < 0 ? kFixedMax : kFixedMin);
    }
    return FixedPoint::from_raw(r);
}

FixedPoint fp_mul(FixedPoint a, FixedPoint b, bool& overflow) {
    __int128 prod = static_cast<__int128>(a.raw) * static_cast<__int128>(b.raw);
    // Arithmetic shift: truncation toward negative infinity.
    __int128 shifted = prod >> FixedPoint::kFracBits;
    if (shifted > static_cast<__int128>(kFixedMax)) {
        overflow = true;
        return FixedPoint::from_raw(kFixedMax);
    }
    if (shifted < static_cast<__int128>(kFixedMin)) {
        overflow = true;
        return FixedPoint::from_raw(kFixedMin);
    }
    return FixedPoint::from_raw(static_cast<int64_t>(shifted));
}

FixedPoint fp_sigmoid(FixedPoint a) {
    // Index step is 1/256, i.e. 256 raw units; the table starts at -8.0.
    constexpr int64_t kLow = -8 * FixedPoint::kOne;
    int64_t idx = (a.raw - kLow) >> 8;
    if (idx < 0) idx = 0;
    if (idx > 4095) idx = 4095;
    return FixedPoint::from_raw(static_cast<int64_t>(kSigmoidTable[idx]));
}

std::string fp_to_string(FixedPoint a) {
    uint64_t mag = a.raw < 0 ? ~static_cast<uint64_t>(a.raw) + 1 : static_cast<uint64_t>(a.raw);
    uint64_t ip = mag >> FixedPoint::kFracBits;
    uint64_t frac = mag & (FixedPoint::kOne - 1);
    std::string s = a.raw < 0 ? "-" : "";
    s += std::to_string(ip);
    if (frac != 0) {
        // frac/2^16 in decimal: multiply by 5^16 to get the exact 16 digits.
        uint64_t dec = frac * 152587890625ULL;  // 5^16
        char buf[17];
        for (int i = 15; i >= 0; --i) {
            buf[i] = static_cast<char>('0' + dec % 10);
            dec /= 10;
        }
        buf[16] = '\0';
        std::string digits(buf);
        while (!digits.empty() && digits.back() == '0') digits.pop_back();
        s += "." + digits;
    }
    return s;
}

FixedPoint fp_from_string(const std::string& s) {
    if (s.empty()) throw std::invalid_argument("empty fixed-point literal");
    size_t pos = 0;
    bool neg = false;
    if (s[pos] == '-' || s[pos] == '+') {
        neg = s[pos] == '-';
        ++pos;
    }
    uint64_t ip = 0;
    bool any = false;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
        ip = ip * 10 + static_cast<uint64_t>(s[pos] - '0');
        ++pos;
        any = true;
    }
    uint64_t frac_raw = 0;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        // Accumulate fractional digits in 2^16ths, truncating toward zero.
        uint64_t scale = FixedPoint::kOne;
        __int128 num = 0;
        __int128 den = 1;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            num = num * 10 + (s[pos] - '0');
            den *= 10;
            ++pos;
            any = true;
        }
        frac_raw = static_cast<uint64_t>(num * scale / den);
    }
    if (!any || pos != s.size()) throw std::invalid_argument("bad fixed-point literal: " + s);
    int64_t raw = static_cast<int64_t>((ip << FixedPoint::kFracBits) + frac_raw);
    return FixedPoint::from_raw(neg ? -raw : raw);
}

}  // namespace dvote
