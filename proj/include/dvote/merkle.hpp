#pragma once

#include <cstdint>
#include <vector>

#include "dvote/digest.hpp"

namespace dvote {

// Binary Merkle tree over a fixed set of leaf digests. Leaves are padded to
// the next power of two with the all-zero digest; parent = SHA-256(L || R).
// An empty leaf set has the all-zero root and height 0.
//
// The tree keeps every internal node so single-leaf updates and membership
// proofs are O(log n). The same structure backs the VM memory commitment,
// the per-trace state-hash commitment and the micro-op program commitment.
class MerkleTree {
public:
    MerkleTree() = default;
    explicit MerkleTree(std::vector<Digest> leaves);

    const Digest& root() const;
    uint32_t height() const { return height_; }
    size_t leaf_count() const { return leaf_count_; }

    const Digest& leaf(size_t i) const;

    // Replaces leaf i and recomputes the path to the root.
    void update_leaf(size_t i, const Digest& d);

    // Sibling path from leaf i to the root; length == height().
    std::vector<Digest> prove(size_t i) const;

    bool operator==(const MerkleTree&) const = default;

private:
    void rebuild();

    size_t leaf_count_ = 0;
    size_t padded_ = 0;
    uint32_t height_ = 0;
    // nodes_[0] = padded leaves, nodes_[h] = level h (root level has 1 node).
    std::vector<std::vector<Digest>> nodes_;
};

// Stateless verification: recomputes the root from a leaf and its sibling
// path. Proof length fixes the tree height.
Digest merkle_root_from_proof(const Digest& leaf, size_t index, const std::vector<Digest>& proof);

bool merkle_verify(const Digest& leaf, size_t index, const std::vector<Digest>& proof,
                   const Digest& root);

}  // namespace dvote
