#pragma once

#include <cstdint>
#include <limits>
#include <string>

namespace dvote {

// Q16.16 fixed-point value carried in a signed 64-bit raw integer
// (value = raw / 2^16). All committed arithmetic in the system happens in
// this type; there is no floating point on any committed path.
//
// Rules:
//  - add/sub are exact; on int64 overflow the result saturates to the
//    representable extreme and the operation reports overflow (the VM keeps
//    that flag sticky).
//  - mul takes the full 128-bit product and arithmetic-shifts right by 16,
//    i.e. truncation toward negative infinity. No other rounding exists.
struct FixedPoint {
    int64_t raw = 0;

    static constexpr int kFracBits = 16;
    static constexpr int64_t kOne = int64_t{1} << kFracBits;

    static constexpr FixedPoint from_raw(int64_t r) { return FixedPoint{r}; }
    static constexpr FixedPoint from_int(int64_t v) { return FixedPoint{v << kFracBits}; }
    static constexpr FixedPoint zero() { return FixedPoint{0}; }
    static constexpr FixedPoint one() { return FixedPoint{kOne}; }

    constexpr bool operator==(const FixedPoint&) const = default;

    // Display only. Never feeds back into committed computation.
    double to_double() const { return static_cast<double>(raw) / kOne; }
};

inline constexpr int64_t kFixedMax = std::numeric_limits<int64_t>::max();
inline constexpr int64_t kFixedMin = std::numeric_limits<int64_t>::min();

FixedPoint fp_add(FixedPoint a, FixedPoint b, bool& overflow);
FixedPoint fp_sub(FixedPoint a, FixedPoint b, bool& overflow);
FixedPoint fp_mul(FixedPoint a, FixedPoint b, bool& overflow);

// relu(x) = max(x, 0). Exact.
inline FixedPoint fp_relu(FixedPoint a) { return a.raw > 0 ? a : FixedPoint::zero(); }

// 1 if x > 0 else 0, in Q16.16. The closed-form relu backward mask.
inline FixedPoint fp_relu_grad(FixedPoint a) {
    return a.raw > 0 ? FixedPoint::one() : FixedPoint::zero();
}

// Sigmoid via a frozen 4096-entry table over [-8, 8), inputs clamped to the
// table range. Entry i holds sigmoid(-8 + i/256) rounded to nearest Q16.16;
// entry 2048 is exactly 0.5.
FixedPoint fp_sigmoid(FixedPoint a);

// Exact decimal rendering (Q16.16 has a finite decimal expansion).
std::string fp_to_string(FixedPoint a);

// Parses decimal strings like "-1.5" or "0.125" exactly when representable;
// the last digit is truncated toward zero otherwise. Used for config values.
FixedPoint fp_from_string(const std::string& s);

}  // namespace dvote
