#include "dvote/graph.hpp"

#include <map>
#include <set>

#include <nlohmann/json.hpp>

namespace dvote::vm {

using json = nlohmann::json;

const char* op_kind_name(OpKind k) {
    switch (k) {
        case OpKind::matmul: return "matmul";
        case OpKind::add_bias: return "add-bias";
        case OpKind::relu: return "relu";
        case OpKind::sigmoid_lut: return "sigmoid-lut";
        case OpKind::sum_reduce: return "sum-reduce";
        case OpKind::sub: return "sub";
        case OpKind::scalar_mul: return "scalar-mul";
        case OpKind::argmax: return "argmax";
        case OpKind::mul: return "mul";
        case OpKind::relu_grad: return "relu-grad";
    }
    return "?";
}

std::optional<ValueId> CompGraph::find_input(const std::string& name) const {
    for (const auto& in : inputs)
        if (in.name == name) return in.slot;
    return std::nullopt;
}

ValueId GraphBuilder::new_slot(SlotKind kind, std::vector<uint32_t> shape) {
    g_.slots.push_back(SlotInfo{kind, std::move(shape)});
    return static_cast<ValueId>(g_.slots.size() - 1);
}

void GraphBuilder::check_value(ValueId v) const {
    if (v >= g_.slots.size()) throw GraphError("operand references an undefined value");
}

const std::vector<uint32_t>& GraphBuilder::shape_of(ValueId v) const {
    check_value(v);
    return g_.slots[v].shape;
}

ValueId GraphBuilder::add_input(const std::string& name, std::vector<uint32_t> shape) {
    for (const auto& in : g_.inputs)
        if (in.name == name) throw GraphError("duplicate input name: " + name);
    ValueId id = new_slot(SlotKind::input, std::move(shape));
    g_.inputs.push_back({name, id});
    return id;
}

ValueId GraphBuilder::matmul(ValueId a, ValueId b, bool ta, bool tb) {
    const auto& sa = shape_of(a);
    const auto& sb = shape_of(b);
    uint32_t m = ta ? cols_of(sa) : rows_of(sa);
    uint32_t k = ta ? rows_of(sa) : cols_of(sa);
    uint32_t kb = tb ? cols_of(sb) : rows_of(sb);
    uint32_t n = tb ? rows_of(sb) : cols_of(sb);
    if (k != kb)
        throw GraphError("matmul shape mismatch: " + shape_to_string(sa) + " x " +
                         shape_to_string(sb));
    ValueId out = new_slot(SlotKind::intermediate, {m, n});
    g_.nodes.push_back({OpKind::matmul, a, b, out, kNoValue, ta, tb, {}});
    return out;
}

ValueId GraphBuilder::add_bias(ValueId a, ValueId bias) {
    const auto& sa = shape_of(a);
    const auto& sbias = shape_of(bias);
    if (rows_of(sbias) != 1 || cols_of(sbias) != cols_of(sa))
        throw GraphError("add-bias shape mismatch: " + shape_to_string(sa) + " + " +
                         shape_to_string(sbias));
    ValueId out = new_slot(SlotKind::intermediate, sa);
    g_.nodes.push_back({OpKind::add_bias, a, bias, out, kNoValue, false, false, {}});
    return out;
}

ValueId GraphBuilder::relu(ValueId a) {
    ValueId out = new_slot(SlotKind::intermediate, shape_of(a));
    g_.nodes.push_back({OpKind::relu, a, kNoValue, out, kNoValue, false, false, {}});
    return out;
}

ValueId GraphBuilder::sigmoid(ValueId a) {
    ValueId out = new_slot(SlotKind::intermediate, shape_of(a));
    g_.nodes.push_back({OpKind::sigmoid_lut, a, kNoValue, out, kNoValue, false, false, {}});
    return out;
}

ValueId GraphBuilder::sum_reduce(ValueId a) {
    check_value(a);
    ValueId out = new_slot(SlotKind::intermediate, {});
    g_.nodes.push_back({OpKind::sum_reduce, a, kNoValue, out, kNoValue, false, false, {}});
    return out;
}

ValueId GraphBuilder::sub(ValueId a, ValueId b) {
    if (shape_of(a) != shape_of(b))
        throw GraphError("sub shape mismatch: " + shape_to_string(shape_of(a)) + " vs " +
                         shape_to_string(shape_of(b)));
    ValueId out = new_slot(SlotKind::intermediate, shape_of(a));
    g_.nodes.push_back({OpKind::sub, a, b, out, kNoValue, false, false, {}});
    return out;
}

ValueId GraphBuilder::mul(ValueId a, ValueId b) {
    if (shape_of(a) != shape_of(b))
        throw GraphError("mul shape mismatch: " + shape_to_string(shape_of(a)) + " vs " +
                         shape_to_string(shape_of(b)));
    ValueId out = new_slot(SlotKind::intermediate, shape_of(a));
    g_.nodes.push_back({OpKind::mul, a, b, out, kNoValue, false, false, {}});
    return out;
}

ValueId GraphBuilder::scalar_mul(ValueId a, FixedPoint c) {
    ValueId out = new_slot(SlotKind::intermediate, shape_of(a));
    g_.nodes.push_back({OpKind::scalar_mul, a, kNoValue, out, kNoValue, false, false, c});
    return out;
}

ValueId GraphBuilder::relu_grad(ValueId pre_activation, ValueId upstream) {
    if (shape_of(pre_activation) != shape_of(upstream))
        throw GraphError("relu-grad shape mismatch");
    ValueId out = new_slot(SlotKind::intermediate, shape_of(pre_activation));
    g_.nodes.push_back(
        {OpKind::relu_grad, pre_activation, upstream, out, kNoValue, false, false, {}});
    return out;
}

ValueId GraphBuilder::argmax(ValueId a) {
    const auto& sa = shape_of(a);
    if (rows_of(sa) != 1) throw GraphError("argmax expects a vector, got " + shape_to_string(sa));
    ValueId scratch = new_slot(SlotKind::scratch, {2});
    ValueId out = new_slot(SlotKind::intermediate, {});
    g_.nodes.push_back({OpKind::argmax, a, kNoValue, out, scratch, false, false, {}});
    return out;
}

void GraphBuilder::mark_output(const std::string& name, ValueId v) {
    check_value(v);
    for (const auto& o : g_.outputs)
        if (o.name == name) throw GraphError("duplicate output name: " + name);
    g_.outputs.push_back({name, v});
}

CompGraph GraphBuilder::finish() {
    if (g_.outputs.empty()) throw GraphError("graph has no outputs");
    return std::move(g_);
}

namespace {

CompGraph build_mlp_spec(const json& spec) {
    const auto& layers = spec.at("layers");
    if (!layers.is_array() || layers.empty()) throw GraphError("layers must be a non-empty array");

    GraphBuilder b;
    uint32_t in_dim = layers[0].at("rows").get<uint32_t>();
    ValueId x = b.add_input("x", {1, in_dim});

    ValueId cur = x;
    uint32_t cur_dim = in_dim;
    int idx = 0;
    for (const auto& layer : layers) {
        std::string kind = layer.at("kind").get<std::string>();
        uint32_t rows = layer.at("rows").get<uint32_t>();
        uint32_t cols = layer.at("cols").get<uint32_t>();
        if (rows != cur_dim)
            throw GraphError("layer " + std::to_string(idx) + " expects input dim " +
                             std::to_string(rows) + " but gets " + std::to_string(cur_dim));
        ValueId w = b.add_input("w" + std::to_string(idx), {rows, cols});
        ValueId bias = b.add_input("b" + std::to_string(idx), {1, cols});
        ValueId z = b.add_bias(b.matmul(cur, w), bias);
        if (kind == "relu")
            cur = b.relu(z);
        else if (kind == "sigmoid")
            cur = b.sigmoid(z);
        else if (kind == "linear")
            cur = z;
        else
            throw GraphError("unsupported layer kind: " + kind);
        cur_dim = cols;
        ++idx;
    }
    b.mark_output("out", cur);
    return b.finish();
}

CompGraph build_node_list_spec(const json& g) {
    GraphBuilder b;
    std::map<std::string, ValueId> values;

    for (const auto& in : g.at("inputs")) {
        std::string name = in.at("name").get<std::string>();
        std::vector<uint32_t> shape = in.at("shape").get<std::vector<uint32_t>>();
        values[name] = b.add_input(name, shape);
    }

    auto resolve = [&](const json& node, const char* key) -> ValueId {
        std::string ref = node.at(key).get<std::string>();
        auto it = values.find(ref);
        if (it == values.end())
            throw GraphError("cyclic or undefined reference to value '" + ref + "'");
        return it->second;
    };

    for (const auto& node : g.at("nodes")) {
        std::string op = node.at("op").get<std::string>();
        std::string out_name = node.at("out").get<std::string>();
        if (values.count(out_name)) throw GraphError("value '" + out_name + "' defined twice");
        ValueId out;
        if (op == "matmul")
            out = b.matmul(resolve(node, "a"), resolve(node, "b"),
                           node.value("transpose_a", false), node.value("transpose_b", false));
        else if (op == "add-bias")
            out = b.add_bias(resolve(node, "a"), resolve(node, "b"));
        else if (op == "relu")
            out = b.relu(resolve(node, "a"));
        else if (op == "sigmoid-lut")
            out = b.sigmoid(resolve(node, "a"));
        else if (op == "sum-reduce")
            out = b.sum_reduce(resolve(node, "a"));
        else if (op == "sub")
            out = b.sub(resolve(node, "a"), resolve(node, "b"));
        else if (op == "mul")
            out = b.mul(resolve(node, "a"), resolve(node, "b"));
        else if (op == "scalar-mul")
            out = b.scalar_mul(resolve(node, "a"),
                               fp_from_string(node.at("value").get<std::string>()));
        else if (op == "relu-grad")
            out = b.relu_grad(resolve(node, "a"), resolve(node, "b"));
        else if (op == "argmax")
            out = b.argmax(resolve(node, "a"));
        else
            throw GraphError("unsupported op: " + op);
        values[out_name] = out;
    }

    for (const auto& o : g.at("outputs")) {
        std::string name = o.get<std::string>();
        auto it = values.find(name);
        if (it == values.end()) throw GraphError("output '" + name + "' is not defined");
        b.mark_output(name, it->second);
    }
    return b.finish();
}

}  // namespace

CompGraph build_graph(const std::string& spec_json) {
    json spec;
    try {
        spec = json::parse(spec_json);
    } catch (const json::exception& e) {
        throw GraphError(std::string("spec parse error: ") + e.what());
    }
    try {
        if (spec.contains("layers")) return build_mlp_spec(spec);
        if (spec.contains("graph")) return build_node_list_spec(spec.at("graph"));
    } catch (const json::exception& e) {
        throw GraphError(std::string("malformed spec: ") + e.what());
    }
    throw GraphError("spec must contain either 'layers' or 'graph'");
}

}  // namespace dvote::vm
