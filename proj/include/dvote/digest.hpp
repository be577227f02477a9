#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace dvote {

// 32-byte SHA-256 digest. The all-zero digest doubles as the canonical
// padding leaf in every Merkle tree of this project.
using Digest = std::array<uint8_t, 32>;

inline constexpr Digest kZeroDigest{};

std::string to_hex(const Digest& d);
Digest digest_from_hex(const std::string& hex);

// Little-endian append helpers used by every canonical serialization.
inline void put_u32le(std::vector<uint8_t>& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_u64le(std::vector<uint8_t>& out, uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<uint8_t>(v >> (8 * i)));
}

inline void put_i64le(std::vector<uint8_t>& out, int64_t v) {
    put_u64le(out, static_cast<uint64_t>(v));
}

inline void put_bytes(std::vector<uint8_t>& out, const uint8_t* p, size_t n) {
    out.insert(out.end(), p, p + n);
}

inline void put_digest(std::vector<uint8_t>& out, const Digest& d) {
    out.insert(out.end(), d.begin(), d.end());
}

}  // namespace dvote
