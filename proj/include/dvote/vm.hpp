#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dvote/digest.hpp"
#include "dvote/merkle.hpp"
#include "dvote/program.hpp"
#include "dvote/tensor.hpp"

namespace dvote::vm {

// VM memory: one optional tensor per slot. Slots hold nothing until first
// written; reading an empty operand is the malformed-program fault.
using Memory = std::vector<std::optional<FixedTensor>>;

// Leaf digest of one memory slot: SHA-256 of the slot's canonical
// serialization, or SHA-256 of the empty string for an empty slot.
Digest slot_leaf_hash(const std::optional<FixedTensor>& slot);

// state_hash = SHA-256(pc_le64 || flags || memory merkle root) where flags
// bit 0 is the sticky overflow flag and bit 1 the fault flag.
Digest state_hash_of(uint64_t pc, bool overflow, bool fault, const Digest& memory_root);

// Full memory commitment tree; used when opening slots out of a state.
MerkleTree memory_tree(const Memory& memory);

struct VmState {
    uint64_t pc = 0;
    Memory memory;
    bool overflow_flag = false;
    bool fault_flag = false;
    Digest state_hash{};

    Digest memory_root() const;
    void rehash();
};

// Outcome of applying one micro-op to a memory view. overflow is reported
// per-op; the caller folds it into the sticky flag.
struct StepEffect {
    bool overflow = false;
    bool fault = false;
    uint32_t written_slot = UINT32_MAX;
};

// The single transition function. Both the honest executor and the arbiter's
// one-step re-execution go through here, so there is exactly one semantics.
StepEffect apply_micro_op(const MicroOp& op, Memory& mem);

// Pure successor-state function. A fault freezes memory and sets the fault
// flag; pc still advances so the fault state is hashable and final.
VmState step(const VmState& state, const MicroOp& op);

VmState initial_state(const Program& program,
                      const std::map<std::string, FixedTensor>& inputs);

// SHA-256 over the input tensors in slot order, the committed identity of a
// task's data.
Digest input_hash_of(const Program& program, const std::map<std::string, FixedTensor>& inputs);

// Merkle commitment over all T+1 state hashes of one execution.
struct TraceCommitment {
    Digest program_hash{};
    Digest input_hash{};
    uint64_t step_count = 0;
    MerkleTree step_tree;  // leaves: state hashes 0..T
    Digest output_hash{};

    const Digest& root() const { return step_tree.root(); }
    std::string to_json() const;

    bool operator==(const TraceCommitment&) const = default;
};

struct ExecutionResult {
    std::map<std::string, FixedTensor> outputs;
    TraceCommitment trace;
    std::vector<Digest> state_hashes;  // convenience copy of the trace leaves
    Memory final_memory;
    bool overflow = false;
    bool fault = false;
};

// Replays ops [state.pc, state.pc + count) from an arbitrary state,
// returning every successor hash. Fuel for bisection answers and for
// fabricating consistent adversarial traces.
struct ReplaySpan {
    std::vector<Digest> hashes;  // one per executed op
    VmState final_state;
};

ReplaySpan replay_span(const Program& program, VmState state, uint64_t count);

ExecutionResult execute(const Program& program, const std::map<std::string, FixedTensor>& inputs);

// The i-th state of the unique execution, 0 <= i <= step_count.
VmState state_at(const Program& program, const std::map<std::string, FixedTensor>& inputs,
                 uint64_t i);

struct StateProof {
    Digest leaf{};
    uint64_t index = 0;
    std::vector<Digest> path;
};

// Membership proof for state hash i against the trace root.
StateProof merkle_proof(const TraceCommitment& trace, uint64_t i);

bool verify_state_proof(const StateProof& proof, const Digest& root);

Digest output_hash_of(const Program& program, const Memory& final_memory);

}  // namespace dvote::vm
