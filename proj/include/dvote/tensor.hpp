#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dvote/digest.hpp"
#include "dvote/fixed.hpp"

namespace dvote {

// Row-major fixed-point tensor, the universal value of the system. Shape may
// be empty (scalar, one element). Immutable by convention once it enters a
// VM state; the VM copies on write.
class FixedTensor {
public:
    FixedTensor() : data_(1) {}  // scalar zero
    explicit FixedTensor(std::vector<uint32_t> shape);
    FixedTensor(std::vector<uint32_t> shape, std::vector<FixedPoint> data);

    static FixedTensor scalar(FixedPoint v);

    const std::vector<uint32_t>& shape() const { return shape_; }
    size_t size() const { return data_.size(); }

    FixedPoint at(size_t i) const { return data_[i]; }
    void set(size_t i, FixedPoint v) { data_[i] = v; }
    const std::vector<FixedPoint>& data() const { return data_; }
    std::vector<FixedPoint>& data() { return data_; }

    bool operator==(const FixedTensor& o) const = default;

    // Canonical bytes: shape as LE u32 sequence, then raw values as LE i64.
    void serialize(std::vector<uint8_t>& out) const;
    std::vector<uint8_t> serialize() const;
    Digest hash() const;

    static size_t element_count(const std::vector<uint32_t>& shape);

private:
    std::vector<uint32_t> shape_;
    std::vector<FixedPoint> data_;
};

// Shape helpers for the 2-D layer algebra the graphs use. A tensor with an
// empty shape is treated as 1x1; a rank-1 tensor of n elements as 1xn.
uint32_t rows_of(const std::vector<uint32_t>& shape);
uint32_t cols_of(const std::vector<uint32_t>& shape);

std::string shape_to_string(const std::vector<uint32_t>& shape);

}  // namespace dvote
