#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dvote/fixed.hpp"
#include "dvote/tensor.hpp"

namespace dvote::vm {

// Node operations. The inference set (matmul..argmax) covers the pipeline
// models; mul and relu_grad exist so the closed-form training backward pass
// can be spelled out as ordinary graph nodes.
enum class OpKind : uint8_t {
    matmul,
    add_bias,
    relu,
    sigmoid_lut,
    sum_reduce,
    sub,
    scalar_mul,
    argmax,
    mul,
    relu_grad,
};

const char* op_kind_name(OpKind k);

using ValueId = uint32_t;
inline constexpr ValueId kNoValue = UINT32_MAX;

enum class SlotKind : uint8_t { input = 0, intermediate = 1, scratch = 2 };

struct SlotInfo {
    SlotKind kind;
    std::vector<uint32_t> shape;
};

struct GraphNode {
    OpKind kind;
    ValueId a = kNoValue;
    ValueId b = kNoValue;
    ValueId out = kNoValue;
    ValueId scratch = kNoValue;      // argmax running state
    bool transpose_a = false;        // matmul only
    bool transpose_b = false;
    FixedPoint param{};              // scalar_mul constant
};

struct NamedValue {
    std::string name;
    ValueId slot;
};

class GraphError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A shape-checked computation graph with a frozen node order. Nodes execute
// exactly in list order; that order is the canonical reduction order every
// commitment depends on.
struct CompGraph {
    std::vector<SlotInfo> slots;
    std::vector<GraphNode> nodes;
    std::vector<NamedValue> inputs;
    std::vector<NamedValue> outputs;

    const SlotInfo& slot(ValueId id) const { return slots.at(id); }
    std::optional<ValueId> find_input(const std::string& name) const;
};

// Append-only builder; every operand must already exist when a node is
// added, which is what makes the result acyclic by construction.
class GraphBuilder {
public:
    ValueId add_input(const std::string& name, std::vector<uint32_t> shape);

    ValueId matmul(ValueId a, ValueId b, bool transpose_a = false, bool transpose_b = false);
    ValueId add_bias(ValueId a, ValueId bias);
    ValueId relu(ValueId a);
    ValueId sigmoid(ValueId a);
    ValueId sum_reduce(ValueId a);
    ValueId sub(ValueId a, ValueId b);
    ValueId mul(ValueId a, ValueId b);
    ValueId scalar_mul(ValueId a, FixedPoint c);
    ValueId relu_grad(ValueId pre_activation, ValueId upstream);
    ValueId argmax(ValueId a);

    void mark_output(const std::string& name, ValueId v);

    CompGraph finish();

private:
    ValueId new_slot(SlotKind kind, std::vector<uint32_t> shape);
    const std::vector<uint32_t>& shape_of(ValueId v) const;
    void check_value(ValueId v) const;

    CompGraph g_;
};

// Builds a graph from the JSON model-spec document. Two forms are accepted:
//   {"layers": [{"kind": "relu"|"linear"|"sigmoid", "rows": r, "cols": c}], "seed": s}
// which produces an MLP taking input "x" plus one weight/bias input pair per
// layer, and a raw {"graph": {...}} node-list form used for irregular
// graphs. Rejects unsupported ops, shape mismatches and cyclic wiring.
CompGraph build_graph(const std::string& spec_json);

}  // namespace dvote::vm
