#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dvote/digest.hpp"

namespace dvote {

// Self-contained SHA-256 (FIPS 180-4). Every commitment in the system is
// produced by this one implementation so digests are bit-identical across
// builds and platforms.
class Sha256 {
public:
    Sha256() { reset(); }

    void reset();
    void update(const uint8_t* data, size_t len);
    void update(const std::vector<uint8_t>& data) { update(data.data(), data.size()); }
    Digest finish();

private:
    void compress(const uint8_t* block);

    uint32_t state_[8];
    uint8_t buf_[64];
    size_t buf_len_ = 0;
    uint64_t total_len_ = 0;
};

Digest sha256(const uint8_t* data, size_t len);
Digest sha256(const std::vector<uint8_t>& data);
Digest sha256(const std::string& data);

// SHA-256 over the concatenation of two digests; the Merkle node rule.
Digest sha256_pair(const Digest& left, const Digest& right);

}  // namespace dvote
