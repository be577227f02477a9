#include "dvote/merkle.hpp"

#include <stdexcept>

#include "dvote/sha256.hpp"

namespace dvote {

static size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

MerkleTree::MerkleTree(std::vector<Digest> leaves) {
    leaf_count_ = leaves.size();
    padded_ = leaf_count_ == 0 ? 0 : next_pow2(leaf_count_);
    height_ = 0;
    for (size_t p = 1; p < padded_; p <<= 1) ++height_;

    if (padded_ == 0) return;
    leaves.resize(padded_, kZeroDigest);
    nodes_.clear();
    nodes_.push_back(std::move(leaves));
    rebuild();
}

void MerkleTree::rebuild() {
    nodes_.resize(1);
    while (nodes_.back().size() > 1) {
        const auto& below = nodes_.back();
        std::vector<Digest> level(below.size() / 2);
        for (size_t i = 0; i < level.size(); ++i)
            level[i] = sha256_pair(below[2 * i], below[2 * i + 1]);
        nodes_.push_back(std::move(level));
    }
}

const Digest& MerkleTree::root() const {
    if (nodes_.empty()) return kZeroDigest;
    return nodes_.back()[0];
}

const Digest& MerkleTree::leaf(size_t i) const {
    if (i >= leaf_count_) throw std::out_of_range("merkle leaf index");
    return nodes_[0][i];
}

void MerkleTree::update_leaf(size_t i, const Digest& d) {
    if (i >= leaf_count_) throw std::out_of_range("merkle leaf index");
    nodes_[0][i] = d;
    size_t idx = i;
    for (uint32_t lvl = 0; lvl < height_; ++lvl) {
        size_t parent = idx / 2;
        nodes_[lvl + 1][parent] = sha256_pair(nodes_[lvl][parent * 2], nodes_[lvl][parent * 2 + 1]);
        idx = parent;
    }
}

std::vector<Digest> MerkleTree::prove(size_t i) const {
    if (i >= leaf_count_) throw std::out_of_range("merkle proof index");
    std::vector<Digest> proof;
    proof.reserve(height_);
    size_t idx = i;
    for (uint32_t lvl = 0; lvl < height_; ++lvl) {
        proof.push_back(nodes_[lvl][idx ^ 1]);
        idx /= 2;
    }
    return proof;
}

Digest merkle_root_from_proof(const Digest& leaf, size_t index, const std::vector<Digest>& proof) {
    Digest acc = leaf;
    size_t idx = index;
    for (const Digest& sib : proof) {
        acc = (idx & 1) ? sha256_pair(sib, acc) : sha256_pair(acc, sib);
        idx >>= 1;
    }
    return acc;
}

bool merkle_verify(const Digest& leaf, size_t index, const std::vector<Digest>& proof,
                   const Digest& root) {
    if (index >= (size_t{1} << proof.size())) return false;
    return merkle_root_from_proof(leaf, index, proof) == root;
}

}  // namespace dvote
