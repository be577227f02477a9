#include "dvote/program.hpp"

#include <cassert>
#include <stdexcept>

#include "dvote/sha256.hpp"

namespace dvote::vm {

const char* micro_kind_name(MicroKind k) {
    switch (k) {
        case MicroKind::dot_seg: return "dot-seg";
        case MicroKind::add_bias_row: return "add-bias-row";
        case MicroKind::relu_blk: return "relu";
        case MicroKind::sigmoid_blk: return "sigmoid";
        case MicroKind::sub_blk: return "sub";
        case MicroKind::mul_blk: return "mul";
        case MicroKind::scalar_blk: return "scalar-mul";
        case MicroKind::relu_grad_blk: return "relu-grad";
        case MicroKind::sum_seg: return "sum-seg";
        case MicroKind::argmax_seg: return "argmax-seg";
        case MicroKind::argmax_emit: return "argmax-emit";
    }
    return "?";
}

std::vector<uint8_t> MicroOp::serialize() const {
    std::vector<uint8_t> out;
    out.push_back(static_cast<uint8_t>(kind));
    put_u32le(out, a_slot);
    put_u32le(out, b_slot);
    put_u32le(out, dest_slot);
    put_u64le(out, a_off);
    put_u64le(out, b_off);
    put_u64le(out, dest_off);
    put_u32le(out, a_stride);
    put_u32le(out, b_stride);
    put_u32le(out, len);
    out.push_back(init ? 1 : 0);
    put_i64le(out, param);
    put_u32le(out, cost);
    put_u32le(out, static_cast<uint32_t>(dest_shape.size()));
    for (uint32_t d : dest_shape) put_u32le(out, d);
    return out;
}

Digest MicroOp::hash() const { return sha256(serialize()); }

uint32_t micro_op_cost(MicroKind kind, uint32_t len) {
    switch (kind) {
        case MicroKind::dot_seg: return 2 * len;  // one mul + one add per element
        case MicroKind::argmax_emit: return 1;
        default: return len;
    }
}

namespace {

class Linearizer {
public:
    explicit Linearizer(const CompGraph& g) : g_(g) {}

    std::vector<MicroOp> run() {
        for (const auto& node : g_.nodes) emit_node(node);
        return std::move(ops_);
    }

private:
    void push(MicroOp op) {
        op.cost = micro_op_cost(op.kind, op.len);
        op.dest_shape = g_.slot(op.dest_slot).shape;
        assert(op.len <= kSegmentLen);
        assert(op.cost <= kMaxOpCost);
        ops_.push_back(op);
    }

    void emit_node(const GraphNode& n) {
        switch (n.kind) {
            case OpKind::matmul: emit_matmul(n); break;
            case OpKind::add_bias: emit_add_bias(n); break;
            case OpKind::sum_reduce: emit_sum(n); break;
            case OpKind::argmax: emit_argmax(n); break;
            default: emit_elementwise(n); break;
        }
    }

    void emit_matmul(const GraphNode& n) {
        const auto& sa = g_.slot(n.a).shape;
        const auto& sb = g_.slot(n.b).shape;
        uint32_t m = n.transpose_a ? cols_of(sa) : rows_of(sa);
        uint32_t k = n.transpose_a ? rows_of(sa) : cols_of(sa);
        uint32_t nn = n.transpose_b ? rows_of(sb) : cols_of(sb);

        for (uint32_t i = 0; i < m; ++i) {
            for (uint32_t j = 0; j < nn; ++j) {
                for (uint32_t c0 = 0; c0 < k; c0 += kSegmentLen) {
                    uint32_t len = std::min(kSegmentLen, k - c0);
                    MicroOp op;
                    op.kind = MicroKind::dot_seg;
                    op.a_slot = n.a;
                    op.b_slot = n.b;
                    op.dest_slot = n.out;
                    // a[i, t] over t = c0..c0+len
                    op.a_off = n.transpose_a ? (uint64_t)c0 * m + i : (uint64_t)i * k + c0;
                    op.a_stride = n.transpose_a ? m : 1;
                    // b[t, j]
                    op.b_off = n.transpose_b ? (uint64_t)j * k + c0 : (uint64_t)c0 * nn + j;
                    op.b_stride = n.transpose_b ? 1 : nn;
                    op.dest_off = (uint64_t)i * nn + j;
                    op.len = len;
                    op.init = c0 == 0;
                    push(op);
                }
            }
        }
    }

    void emit_add_bias(const GraphNode& n) {
        const auto& sa = g_.slot(n.a).shape;
        uint32_t m = rows_of(sa), cols = cols_of(sa);
        for (uint32_t i = 0; i < m; ++i) {
            for (uint32_t c0 = 0; c0 < cols; c0 += kSegmentLen) {
                uint32_t len = std::min(kSegmentLen, cols - c0);
                MicroOp op;
                op.kind = MicroKind::add_bias_row;
                op.a_slot = n.a;
                op.b_slot = n.b;
                op.dest_slot = n.out;
                op.a_off = op.dest_off = (uint64_t)i * cols + c0;
                op.b_off = c0;
                op.len = len;
                push(op);
            }
        }
    }

    void emit_elementwise(const GraphNode& n) {
        MicroKind kind;
        switch (n.kind) {
            case OpKind::relu: kind = MicroKind::relu_blk; break;
            case OpKind::sigmoid_lut: kind = MicroKind::sigmoid_blk; break;
            case OpKind::sub: kind = MicroKind::sub_blk; break;
            case OpKind::mul: kind = MicroKind::mul_blk; break;
            case OpKind::scalar_mul: kind = MicroKind::scalar_blk; break;
            case OpKind::relu_grad: kind = MicroKind::relu_grad_blk; break;
            default: throw std::logic_error("not an elementwise node");
        }
        uint64_t total = FixedTensor::element_count(g_.slot(n.a).shape);
        for (uint64_t c0 = 0; c0 < total; c0 += kSegmentLen) {
            uint32_t len = static_cast<uint32_t>(std::min<uint64_t>(kSegmentLen, total - c0));
            MicroOp op;
            op.kind = kind;
            op.a_slot = n.a;
            op.b_slot = n.b;
            op.dest_slot = n.out;
            op.a_off = op.dest_off = c0;
            op.b_off = c0;
            op.len = len;
            op.param = n.param.raw;
            push(op);
        }
    }

    void emit_sum(const GraphNode& n) {
        uint64_t total = FixedTensor::element_count(g_.slot(n.a).shape);
        for (uint64_t c0 = 0; c0 < total; c0 += kSegmentLen) {
            uint32_t len = static_cast<uint32_t>(std::min<uint64_t>(kSegmentLen, total - c0));
            MicroOp op;
            op.kind = MicroKind::sum_seg;
            op.a_slot = n.a;
            op.dest_slot = n.out;
            op.a_off = c0;
            op.len = len;
            op.init = c0 == 0;
            push(op);
        }
    }

    void emit_argmax(const GraphNode& n) {
        uint64_t total = FixedTensor::element_count(g_.slot(n.a).shape);
        for (uint64_t c0 = 0; c0 < total; c0 += kSegmentLen) {
            uint32_t len = static_cast<uint32_t>(std::min<uint64_t>(kSegmentLen, total - c0));
            MicroOp op;
            op.kind = MicroKind::argmax_seg;
            op.a_slot = n.a;
            op.dest_slot = n.scratch;
            op.a_off = c0;
            op.len = len;
            op.init = c0 == 0;
            push(op);
        }
        MicroOp emit;
        emit.kind = MicroKind::argmax_emit;
        emit.a_slot = n.scratch;
        emit.dest_slot = n.out;
        emit.len = 1;
        push(emit);
    }

    const CompGraph& g_;
    std::vector<MicroOp> ops_;
};

Digest layout_digest_of(const CompGraph& g) {
    std::vector<uint8_t> buf;
    put_u32le(buf, static_cast<uint32_t>(g.slots.size()));
    for (const auto& s : g.slots) {
        buf.push_back(static_cast<uint8_t>(s.kind));
        put_u32le(buf, static_cast<uint32_t>(s.shape.size()));
        for (uint32_t d : s.shape) put_u32le(buf, d);
    }
    auto put_named = [&buf](const std::vector<NamedValue>& vals) {
        put_u32le(buf, static_cast<uint32_t>(vals.size()));
        for (const auto& v : vals) {
            put_u32le(buf, v.slot);
            put_u32le(buf, static_cast<uint32_t>(v.name.size()));
            put_bytes(buf, reinterpret_cast<const uint8_t*>(v.name.data()), v.name.size());
        }
    };
    put_named(g.inputs);
    put_named(g.outputs);
    return sha256(buf);
}

}  // namespace

std::vector<MicroOp> linearize(const CompGraph& graph) { return Linearizer(graph).run(); }

Digest ProgramCommitment::hash() const {
    std::vector<uint8_t> buf;
    const char* tag = "dvote.program.v1";
    put_bytes(buf, reinterpret_cast<const uint8_t*>(tag), 16);
    put_u64le(buf, step_count);
    put_digest(buf, ops_root);
    put_u32le(buf, slot_count);
    put_digest(buf, layout_digest);
    return sha256(buf);
}

Program Program::compile(CompGraph graph) {
    Program p;
    p.graph = std::move(graph);
    p.ops = linearize(p.graph);

    std::vector<Digest> leaves;
    leaves.reserve(p.ops.size());
    p.total_flops = 0;
    for (const auto& op : p.ops) {
        leaves.push_back(op.hash());
        p.total_flops += op.cost;
    }
    p.ops_tree = MerkleTree(std::move(leaves));
    p.layout_digest = layout_digest_of(p.graph);

    ProgramCommitment c;
    c.step_count = p.ops.size();
    c.ops_root = p.ops_tree.root();
    c.slot_count = static_cast<uint32_t>(p.graph.slots.size());
    c.layout_digest = p.layout_digest;
    p.program_hash = c.hash();
    return p;
}

ProgramCommitment commitment_of(const Program& p) {
    ProgramCommitment c;
    c.step_count = p.ops.size();
    c.ops_root = p.ops_tree.root();
    c.slot_count = p.slot_count();
    c.layout_digest = p.layout_digest;
    return c;
}

}  // namespace dvote::vm
