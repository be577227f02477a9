#pragma once

#include <cstdint>
#include <vector>

#include "dvote/digest.hpp"
#include "dvote/graph.hpp"
#include "dvote/merkle.hpp"

namespace dvote::vm {

// Bounds that make one-step re-execution cheap for the arbiter: a micro-op
// touches at most kSegmentLen scalar elements and costs at most kMaxOpCost
// gas.
inline constexpr uint32_t kSegmentLen = 256;
inline constexpr uint32_t kMaxOpCost = 1024;

enum class MicroKind : uint8_t {
    dot_seg,        // dest[d] (+)= sum_t a[a_off + t*a_stride] * b[b_off + t*b_stride]
    add_bias_row,   // dest[o..o+len) = a[o..] + bias[b_off..]
    relu_blk,       // dest[o..] = relu(a[o..])
    sigmoid_blk,    // dest[o..] = sigmoid(a[o..])
    sub_blk,        // dest[o..] = a[o..] - b[o..]
    mul_blk,        // dest[o..] = a[o..] * b[o..]
    scalar_blk,     // dest[o..] = a[o..] * param
    relu_grad_blk,  // dest[o..] = (a[o..] > 0 ? b[o..] : 0)
    sum_seg,        // dest[0] (+)= sum a[o..o+len)
    argmax_seg,     // scratch = running (best value, best index) over a[o..o+len)
    argmax_emit,    // dest[0] = scratch[1]
};

const char* micro_kind_name(MicroKind k);

// Canonical gas cost of a micro-op: its flop count. One multiply-add per
// element for dot segments, one element-op otherwise.
uint32_t micro_op_cost(MicroKind kind, uint32_t len);

struct MicroOp {
    MicroKind kind;
    uint32_t a_slot = UINT32_MAX;
    uint32_t b_slot = UINT32_MAX;
    uint32_t dest_slot = UINT32_MAX;
    uint64_t a_off = 0;
    uint64_t b_off = 0;
    uint64_t dest_off = 0;
    uint32_t a_stride = 1;
    uint32_t b_stride = 1;
    uint32_t len = 0;
    bool init = false;  // first segment of an accumulation chain
    int64_t param = 0;  // scalar_blk constant (raw Q16.16)
    uint32_t cost = 0;  // gas, == flop count of the op
    // Shape the dest slot materializes with on first write. Carried in the
    // op so one-step re-execution needs nothing beyond the op and the
    // opened slots.
    std::vector<uint32_t> dest_shape;

    std::vector<uint8_t> serialize() const;
    Digest hash() const;

    bool operator==(const MicroOp&) const = default;
};

// Deterministic linearization of a graph into bounded micro-ops. Matmul rows
// longer than kSegmentLen split into chained accumulator segments; the
// emitted order is a pure function of the graph.
std::vector<MicroOp> linearize(const CompGraph& graph);

// A graph bundled with its micro-op sequence and the commitments a claim is
// made against. program_hash binds the step count, the micro-op Merkle root
// and the memory layout, so an arbiter can later check any single opcode and
// the claimed halting step against it.
struct Program {
    CompGraph graph;
    std::vector<MicroOp> ops;
    MerkleTree ops_tree;       // leaves = micro-op hashes
    Digest layout_digest{};    // slot shapes + input/output wiring
    Digest program_hash{};
    uint64_t total_flops = 0;

    static Program compile(CompGraph graph);

    uint64_t step_count() const { return ops.size(); }
    uint32_t slot_count() const { return static_cast<uint32_t>(graph.slots.size()); }
};

// The public preimage of program_hash. Revealing it lets the arbiter learn
// the true step count and verify per-op membership proofs.
struct ProgramCommitment {
    uint64_t step_count = 0;
    Digest ops_root{};
    uint32_t slot_count = 0;
    Digest layout_digest{};

    Digest hash() const;
};

ProgramCommitment commitment_of(const Program& p);

}  // namespace dvote::vm
