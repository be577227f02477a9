#include "dvote/tensor.hpp"

#include <stdexcept>

#include "dvote/sha256.hpp"

namespace dvote {

size_t FixedTensor::element_count(const std::vector<uint32_t>& shape) {
    size_t n = 1;
    for (uint32_t d : shape) n *= d;
    return n;
}

FixedTensor::FixedTensor(std::vector<uint32_t> shape)
    : shape_(std::move(shape)), data_(element_count(shape_)) {}

FixedTensor::FixedTensor(std::vector<uint32_t> shape, std::vector<FixedPoint> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != element_count(shape_))
        throw std::invalid_argument("tensor data length does not match shape");
}

FixedTensor FixedTensor::scalar(FixedPoint v) {
    FixedTensor t;
    t.data_[0] = v;
    return t;
}

void FixedTensor::serialize(std::vector<uint8_t>& out) const {
    for (uint32_t d : shape_) put_u32le(out, d);
    for (FixedPoint v : data_) put_i64le(out, v.raw);
}

std::vector<uint8_t> FixedTensor::serialize() const {
    std::vector<uint8_t> out;
    out.reserve(shape_.size() * 4 + data_.size() * 8);
    serialize(out);
    return out;
}

Digest FixedTensor::hash() const { return sha256(serialize()); }

uint32_t rows_of(const std::vector<uint32_t>& shape) {
    if (shape.empty()) return 1;
    if (shape.size() == 1) return 1;
    if (shape.size() == 2) return shape[0];
    throw std::invalid_argument("rank > 2 tensors are not used here");
}

uint32_t cols_of(const std::vector<uint32_t>& shape) {
    if (shape.empty()) return 1;
    if (shape.size() == 1) return shape[0];
    if (shape.size() == 2) return shape[1];
    throw std::invalid_argument("rank > 2 tensors are not used here");
}

std::string shape_to_string(const std::vector<uint32_t>& shape) {
    std::string s = "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace dvote
