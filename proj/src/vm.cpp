#include "dvote/vm.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dvote/sha256.hpp"

namespace dvote::vm {

Digest slot_leaf_hash(const std::optional<FixedTensor>& slot) {
    if (!slot) return sha256(nullptr, 0);
    return slot->hash();
}

Digest state_hash_of(uint64_t pc, bool overflow, bool fault, const Digest& memory_root) {
    std::vector<uint8_t> buf;
    buf.reserve(8 + 1 + 32);
    put_u64le(buf, pc);
    buf.push_back(static_cast<uint8_t>((overflow ? 1 : 0) | (fault ? 2 : 0)));
    put_digest(buf, memory_root);
    return sha256(buf);
}

MerkleTree memory_tree(const Memory& memory) {
    std::vector<Digest> leaves;
    leaves.reserve(memory.size());
    for (const auto& slot : memory) leaves.push_back(slot_leaf_hash(slot));
    return MerkleTree(std::move(leaves));
}

Digest VmState::memory_root() const { return memory_tree(memory).root(); }

void VmState::rehash() { state_hash = state_hash_of(pc, overflow_flag, fault_flag, memory_root()); }

namespace {

// Reads operand slot or reports a fault. Returns nullptr on fault.
const FixedTensor* read_slot(Memory& mem, uint32_t slot, StepEffect& eff) {
    if (slot >= mem.size() || !mem[slot]) {
        eff.fault = true;
        return nullptr;
    }
    return &*mem[slot];
}

// Write target: materializes an all-zero tensor on first touch so partial
// writes (per-row / per-segment) are well-defined.
FixedTensor* write_slot(Memory& mem, uint32_t slot, const std::vector<uint32_t>& shape,
                        StepEffect& eff) {
    if (slot >= mem.size()) {
        eff.fault = true;
        return nullptr;
    }
    if (!mem[slot]) mem[slot] = FixedTensor(shape);
    eff.written_slot = slot;
    return &*mem[slot];
}

}  // namespace

StepEffect apply_micro_op(const MicroOp& op, Memory& mem) {
    StepEffect eff;
    bool ovf = false;

    switch (op.kind) {
        case MicroKind::dot_seg: {
            const FixedTensor* a = read_slot(mem, op.a_slot, eff);
            const FixedTensor* b = read_slot(mem, op.b_slot, eff);
            if (!a || !b) return eff;
            // The accumulator lives in the dest cell across chained segments.
            FixedPoint acc = FixedPoint::zero();
            if (!op.init) {
                const FixedTensor* d = read_slot(mem, op.dest_slot, eff);
                if (!d) return eff;
                acc = d->at(op.dest_off);
            }
            for (uint32_t t = 0; t < op.len; ++t) {
                FixedPoint prod = fp_mul(a->at(op.a_off + (uint64_t)t * op.a_stride),
                                         b->at(op.b_off + (uint64_t)t * op.b_stride), ovf);
                acc = fp_add(acc, prod, ovf);
            }
            FixedTensor* d = write_slot(mem, op.dest_slot, op.dest_shape, eff);
            if (!d) return eff;
            d->set(op.dest_off, acc);
            break;
        }
        case MicroKind::add_bias_row: {
            const FixedTensor* a = read_slot(mem, op.a_slot, eff);
            const FixedTensor* bias = read_slot(mem, op.b_slot, eff);
            if (!a || !bias) return eff;
            FixedTensor* d = write_slot(mem, op.dest_slot, op.dest_shape, eff);
            if (!d) return eff;
            for (uint32_t t = 0; t < op.len; ++t)
                d->set(op.dest_off + t, fp_add(a->at(op.a_off + t), bias->at(op.b_off + t), ovf));
            break;
        }
        case MicroKind::relu_blk:
        case MicroKind::sigmoid_blk:
        case MicroKind::scalar_blk: {
            const FixedTensor* a = read_slot(mem, op.a_slot, eff);
            if (!a) return eff;
            FixedTensor* d = write_slot(mem, op.dest_slot, op.dest_shape, eff);
            if (!d) return eff;
            for (uint32_t t = 0; t < op.len; ++t) {
                FixedPoint x = a->at(op.a_off + t);
                FixedPoint y;
                if (op.kind == MicroKind::relu_blk)
                    y = fp_relu(x);
                else if (op.kind == MicroKind::sigmoid_blk)
                    y = fp_sigmoid(x);
                else
                    y = fp_mul(x, FixedPoint::from_raw(op.param), ovf);
                d->set(op.dest_off + t, y);
            }
            break;
        }
        case MicroKind::sub_blk:
        case MicroKind::mul_blk:
        case MicroKind::relu_grad_blk: {
            const FixedTensor* a = read_slot(mem, op.a_slot, eff);
            const FixedTensor* b = read_slot(mem, op.b_slot, eff);
            if (!a || !b) return eff;
            FixedTensor* d = write_slot(mem, op.dest_slot, op.dest_shape, eff);
            if (!d) return eff;
            for (uint32_t t = 0; t < op.len; ++t) {
                FixedPoint x = a->at(op.a_off + t);
                FixedPoint y = b->at(op.b_off + t);
                FixedPoint r;
                if (op.kind == MicroKind::sub_blk)
                    r = fp_sub(x, y, ovf);
                else if (op.kind == MicroKind::mul_blk)
                    r = fp_mul(x, y, ovf);
                else
                    r = x.raw > 0 ? y : FixedPoint::zero();
                d->set(op.dest_off + t, r);
            }
            break;
        }
        case MicroKind::sum_seg: {
            const FixedTensor* a = read_slot(mem, op.a_slot, eff);
            if (!a) return eff;
            FixedPoint acc = FixedPoint::zero();
            if (!op.init) {
                const FixedTensor* d = read_slot(mem, op.dest_slot, eff);
                if (!d) return eff;
                acc = d->at(0);
            }
            for (uint32_t t = 0; t < op.len; ++t) acc = fp_add(acc, a->at(op.a_off + t), ovf);
            FixedTensor* d = write_slot(mem, op.dest_slot, op.dest_shape, eff);
            if (!d) return eff;
            d->set(0, acc);
            break;
        }
        case MicroKind::argmax_seg: {
            const FixedTensor* a = read_slot(mem, op.a_slot, eff);
            if (!a) return eff;
            FixedPoint best_val;
            int64_t best_idx;
            uint32_t t0 = 0;
            if (op.init) {
                best_val = a->at(op.a_off);
                best_idx = static_cast<int64_t>(op.a_off);
                t0 = 1;
            } else {
                const FixedTensor* s = read_slot(mem, op.dest_slot, eff);
                if (!s) return eff;
                best_val = s->at(0);
                best_idx = s->at(1).raw >> FixedPoint::kFracBits;
            }
            for (uint32_t t = t0; t < op.len; ++t) {
                FixedPoint v = a->at(op.a_off + t);
                if (v.raw > best_val.raw) {  // ties keep the lowest index
                    best_val = v;
                    best_idx = static_cast<int64_t>(op.a_off + t);
                }
            }
            FixedTensor* s = write_slot(mem, op.dest_slot, op.dest_shape, eff);
            if (!s) return eff;
            s->set(0, best_val);
            s->set(1, FixedPoint::from_int(best_idx));
            break;
        }
        case MicroKind::argmax_emit: {
            const FixedTensor* s = read_slot(mem, op.a_slot, eff);
            if (!s) return eff;
            FixedTensor* d = write_slot(mem, op.dest_slot, op.dest_shape, eff);
            if (!d) return eff;
            d->set(0, s->at(1));
            break;
        }
    }

    eff.overflow = ovf;
    return eff;
}

VmState step(const VmState& state, const MicroOp& op) {
    VmState next = state;
    next.pc = state.pc + 1;
    StepEffect eff = apply_micro_op(op, next.memory);
    if (eff.fault) {
        // Leave memory as it was before the faulting op touched it.
        next.memory = state.memory;
        next.fault_flag = true;
    }
    next.overflow_flag = state.overflow_flag || eff.overflow;
    next.rehash();
    return next;
}

VmState initial_state(const Program& program, const std::map<std::string, FixedTensor>& inputs) {
    VmState s;
    s.memory.resize(program.graph.slots.size());
    for (const auto& in : program.graph.inputs) {
        auto it = inputs.find(in.name);
        if (it == inputs.end()) throw GraphError("missing input tensor: " + in.name);
        if (it->second.shape() != program.graph.slot(in.slot).shape)
            throw GraphError("input '" + in.name + "' has shape " +
                             shape_to_string(it->second.shape()) + ", expected " +
                             shape_to_string(program.graph.slot(in.slot).shape));
        s.memory[in.slot] = it->second;
    }
    if (inputs.size() != program.graph.inputs.size())
        throw GraphError("unexpected extra input tensors");
    s.rehash();
    return s;
}

Digest input_hash_of(const Program& program, const std::map<std::string, FixedTensor>& inputs) {
    std::vector<uint8_t> buf;
    for (const auto& in : program.graph.inputs) {
        auto it = inputs.find(in.name);
        if (it == inputs.end()) throw GraphError("missing input tensor: " + in.name);
        std::vector<uint8_t> ser = it->second.serialize();
        put_u32le(buf, in.slot);
        put_u64le(buf, ser.size());
        put_bytes(buf, ser.data(), ser.size());
    }
    return sha256(buf);
}

Digest output_hash_of(const Program& program, const Memory& final_memory) {
    std::vector<uint8_t> buf;
    for (const auto& out : program.graph.outputs) {
        if (out.slot >= final_memory.size() || !final_memory[out.slot])
            throw GraphError("output slot '" + out.name + "' is empty");
        std::vector<uint8_t> ser = final_memory[out.slot]->serialize();
        put_u32le(buf, out.slot);
        put_u64le(buf, ser.size());
        put_bytes(buf, ser.data(), ser.size());
    }
    return sha256(buf);
}

namespace {

// Executor with an incrementally maintained memory tree; per step only the
// written slot's leaf and its path to the root are rehashed.
struct RunningState {
    VmState state;
    MerkleTree mem_tree;

    explicit RunningState(VmState s) : state(std::move(s)) {
        std::vector<Digest> leaves;
        leaves.reserve(state.memory.size());
        for (const auto& slot : state.memory) leaves.push_back(slot_leaf_hash(slot));
        mem_tree = MerkleTree(std::move(leaves));
        state.state_hash =
            state_hash_of(state.pc, state.overflow_flag, state.fault_flag, mem_tree.root());
    }

    // Returns false once a fault halts the trace.
    bool advance(const MicroOp& op) {
        StepEffect eff = apply_micro_op(op, state.memory);
        state.pc += 1;
        if (eff.fault) {
            state.fault_flag = true;
        } else if (eff.written_slot != UINT32_MAX) {
            mem_tree.update_leaf(eff.written_slot, slot_leaf_hash(state.memory[eff.written_slot]));
        }
        state.overflow_flag = state.overflow_flag || eff.overflow;
        state.state_hash =
            state_hash_of(state.pc, state.overflow_flag, state.fault_flag, mem_tree.root());
        return !state.fault_flag;
    }
};

}  // namespace

ExecutionResult execute(const Program& program, const std::map<std::string, FixedTensor>& inputs) {
    RunningState run(initial_state(program, inputs));

    std::vector<Digest> hashes;
    hashes.reserve(program.ops.size() + 1);
    hashes.push_back(run.state.state_hash);

    for (const auto& op : program.ops) {
        bool ok = run.advance(op);
        hashes.push_back(run.state.state_hash);
        if (!ok) break;
    }

    ExecutionResult res;
    res.overflow = run.state.overflow_flag;
    res.fault = run.state.fault_flag;
    res.state_hashes = hashes;
    res.final_memory = run.state.memory;

    res.trace.program_hash = program.program_hash;
    res.trace.input_hash = input_hash_of(program, inputs);
    res.trace.step_count = hashes.size() - 1;
    res.trace.step_tree = MerkleTree(hashes);
    if (!res.fault) {
        res.trace.output_hash = output_hash_of(program, run.state.memory);
        for (const auto& out : program.graph.outputs)
            res.outputs[out.name] = *run.state.memory[out.slot];
    }
    return res;
}

VmState state_at(const Program& program, const std::map<std::string, FixedTensor>& inputs,
                 uint64_t i) {
    if (i > program.step_count()) throw std::out_of_range("step index beyond trace");
    RunningState run(initial_state(program, inputs));
    for (uint64_t k = 0; k < i; ++k) {
        if (!run.advance(program.ops[k]))
            throw std::out_of_range("trace faulted before requested step");
    }
    return run.state;
}

ReplaySpan replay_span(const Program& program, VmState state, uint64_t count) {
    if (state.pc + count > program.step_count())
        throw std::out_of_range("replay span beyond program length");
    RunningState run(std::move(state));
    ReplaySpan out;
    out.hashes.reserve(count);
    for (uint64_t k = 0; k < count; ++k) {
        run.advance(program.ops[run.state.pc]);
        out.hashes.push_back(run.state.state_hash);
    }
    out.final_state = std::move(run.state);
    return out;
}

StateProof merkle_proof(const TraceCommitment& trace, uint64_t i) {
    if (i > trace.step_count) throw std::out_of_range("step index beyond trace");
    StateProof p;
    p.leaf = trace.step_tree.leaf(i);
    p.index = i;
    p.path = trace.step_tree.prove(i);
    return p;
}

bool verify_state_proof(const StateProof& proof, const Digest& root) {
    return merkle_verify(proof.leaf, proof.index, proof.path, root);
}

std::string TraceCommitment::to_json() const {
    nlohmann::json j;
    j["program_hash"] = to_hex(program_hash);
    j["input_hash"] = to_hex(input_hash);
    j["step_count"] = step_count;
    j["root"] = to_hex(root());
    j["output_hash"] = to_hex(output_hash);
    return j.dump();
}

}  // namespace dvote::vm
