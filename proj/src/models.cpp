#include "dvote/models.hpp"

#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dvote/graph.hpp"
#include "dvote/rng.hpp"
#include "dvote/sha256.hpp"

namespace dvote::models {

using json = nlohmann::json;
using vm::GraphBuilder;
using vm::ValueId;

size_t ModelSpec::param_count() const {
    size_t n = 0;
    for (const auto& l : layers) n += size_t{l.rows} * l.cols + l.cols;
    return n;
}

std::string ModelSpec::to_json() const {
    json j;
    j["layers"] = json::array();
    for (const auto& l : layers)
        j["layers"].push_back({{"kind", l.kind}, {"rows", l.rows}, {"cols", l.cols}});
    j["seed"] = seed;
    return j.dump();
}

ModelSpec ModelSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    ModelSpec spec;
    for (const auto& l : j.at("layers")) {
        spec.layers.push_back({l.at("kind").get<std::string>(), l.at("rows").get<uint32_t>(),
                               l.at("cols").get<uint32_t>()});
    }
    spec.seed = j.value("seed", uint64_t{0});
    if (spec.layers.empty()) throw std::invalid_argument("model spec has no layers");
    return spec;
}

std::vector<std::string> param_names(const ModelSpec& spec) {
    std::vector<std::string> names;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        names.push_back("w" + std::to_string(i));
        names.push_back("b" + std::to_string(i));
    }
    return names;
}

Params init_params(const ModelSpec& spec, FixedPoint scale) {
    Params out;
    Rng rng(derive_seed("model-init", spec.seed));
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        FixedTensor w({l.rows, l.cols});
        for (size_t k = 0; k < w.size(); ++k)
            w.set(k, FixedPoint::from_raw(rng.range(-scale.raw, scale.raw - 1)));
        FixedTensor b({1, l.cols});
        for (size_t k = 0; k < b.size(); ++k)
            b.set(k, FixedPoint::from_raw(rng.range(-scale.raw, scale.raw - 1)));
        out["w" + std::to_string(i)] = std::move(w);
        out["b" + std::to_string(i)] = std::move(b);
    }
    return out;
}

Digest params_hash(const ModelSpec& spec, const Params& params) {
    std::vector<uint8_t> buf;
    for (const auto& name : param_names(spec)) {
        auto it = params.find(name);
        if (it == params.end()) throw std::invalid_argument("missing model parameter: " + name);
        std::vector<uint8_t> ser = it->second.serialize();
        put_u32le(buf, static_cast<uint32_t>(name.size()));
        put_bytes(buf, reinterpret_cast<const uint8_t*>(name.data()), name.size());
        put_u64le(buf, ser.size());
        put_bytes(buf, ser.data(), ser.size());
    }
    return sha256(buf);
}

namespace {

// Shared forward chain; returns the activated output of the last layer.
ValueId forward(GraphBuilder& b, const ModelSpec& spec, ValueId x,
                const std::vector<ValueId>& ws, const std::vector<ValueId>& bs) {
    ValueId cur = x;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        ValueId z = b.add_bias(b.matmul(cur, ws[i]), bs[i]);
        const std::string& kind = spec.layers[i].kind;
        if (kind == "relu")
            cur = b.relu(z);
        else if (kind == "sigmoid")
            cur = b.sigmoid(z);
        else if (kind == "linear")
            cur = z;
        else
            throw vm::GraphError("unsupported layer kind: " + kind);
    }
    return cur;
}

struct ParamIds {
    std::vector<ValueId> ws;
    std::vector<ValueId> bs;
};

ParamIds add_param_inputs(GraphBuilder& b, const ModelSpec& spec) {
    ParamIds ids;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        ids.ws.push_back(b.add_input("w" + std::to_string(i),
                                     {spec.layers[i].rows, spec.layers[i].cols}));
        ids.bs.push_back(b.add_input("b" + std::to_string(i), {1, spec.layers[i].cols}));
    }
    return ids;
}

}  // namespace

vm::CompGraph mlp_graph(const ModelSpec& spec) {
    GraphBuilder b;
    ValueId x = b.add_input("x", {1, spec.input_dim()});
    ParamIds p = add_param_inputs(b, spec);
    b.mark_output("out", forward(b, spec, x, p.ws, p.bs));
    return b.finish();
}

vm::CompGraph distance_graph(const ModelSpec& spec) {
    GraphBuilder b;
    ValueId xa = b.add_input("xa", {1, spec.input_dim()});
    ValueId xb = b.add_input("xb", {1, spec.input_dim()});
    ParamIds p = add_param_inputs(b, spec);
    ValueId ea = forward(b, spec, xa, p.ws, p.bs);
    ValueId eb = forward(b, spec, xb, p.ws, p.bs);
    ValueId d = b.sub(ea, eb);
    b.mark_output("distance", b.sum_reduce(b.mul(d, d)));
    return b.finish();
}

vm::CompGraph vote_reader_graph(const ModelSpec& spec) {
    GraphBuilder b;
    ValueId x = b.add_input("x", {1, spec.input_dim()});
    ParamIds p = add_param_inputs(b, spec);
    b.mark_output("class", b.argmax(forward(b, spec, x, p.ws, p.bs)));
    return b.finish();
}

vm::CompGraph train_step_graph(const ModelSpec& spec, FixedPoint eta, uint32_t batch) {
    if (batch == 0) throw std::invalid_argument("batch must be positive");
    GraphBuilder b;
    ValueId x = b.add_input("x", {batch, spec.input_dim()});
    ValueId y = b.add_input("y", {batch, spec.output_dim()});
    ValueId ones = b.add_input("ones", {1, batch});
    ParamIds p = add_param_inputs(b, spec);

    // Forward, keeping pre-activations and layer inputs for the backward
    // pass.
    std::vector<ValueId> layer_in;   // A_l
    std::vector<ValueId> pre_act;    // Z_l
    ValueId cur = x;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        layer_in.push_back(cur);
        ValueId z = b.add_bias(b.matmul(cur, p.ws[i]), p.bs[i]);
        pre_act.push_back(z);
        const std::string& kind = spec.layers[i].kind;
        if (kind == "relu")
            cur = b.relu(z);
        else if (kind == "linear")
            cur = z;
        else
            throw vm::GraphError("train step supports relu and linear layers only");
    }

    // Squared-error loss: L = sum((out - y)^2); dL/dout = 2(out - y).
    ValueId diff = b.sub(cur, y);
    ValueId loss = b.sum_reduce(b.mul(diff, diff));
    ValueId up = b.scalar_mul(diff, FixedPoint::from_int(2));

    std::vector<ValueId> next_w(spec.layers.size());
    std::vector<ValueId> next_b(spec.layers.size());
    for (size_t i = spec.layers.size(); i-- > 0;) {
        ValueId dz = spec.layers[i].kind == "relu" ? b.relu_grad(pre_act[i], up) : up;
        ValueId dw = b.matmul(layer_in[i], dz, /*transpose_a=*/true);
        ValueId db = b.matmul(ones, dz);
        next_w[i] = b.sub(p.ws[i], b.scalar_mul(dw, eta));
        next_b[i] = b.sub(p.bs[i], b.scalar_mul(db, eta));
        if (i > 0) up = b.matmul(dz, p.ws[i], false, /*transpose_b=*/true);
    }

    for (size_t i = 0; i < spec.layers.size(); ++i) {
        b.mark_output("w" + std::to_string(i) + "_next", next_w[i]);
        b.mark_output("b" + std::to_string(i) + "_next", next_b[i]);
    }
    b.mark_output("loss", loss);
    return b.finish();
}

std::map<std::string, FixedTensor> distance_inputs(const Params& params, const FixedTensor& xa,
                                                   const FixedTensor& xb) {
    std::map<std::string, FixedTensor> in = params;
    in["xa"] = xa;
    in["xb"] = xb;
    return in;
}

std::map<std::string, FixedTensor> reader_inputs(const Params& params, const FixedTensor& x) {
    std::map<std::string, FixedTensor> in = params;
    in["x"] = x;
    return in;
}

std::map<std::string, FixedTensor> train_inputs(const Params& params, const FixedTensor& x,
                                                const FixedTensor& y) {
    std::map<std::string, FixedTensor> in = params;
    in["x"] = x;
    in["y"] = y;
    uint32_t batch = rows_of(x.shape());
    FixedTensor ones({1, batch});
    for (size_t i = 0; i < ones.size(); ++i) ones.set(i, FixedPoint::one());
    in["ones"] = ones;
    return in;
}

Params updated_params(const ModelSpec& spec, const std::vector<FixedTensor>& outputs) {
    // Task output order: w0_next, b0_next, ..., loss.
    if (outputs.size() != spec.layers.size() * 2 + 1)
        throw std::invalid_argument("unexpected train-step output count");
    Params out;
    for (size_t i = 0; i < spec.layers.size(); ++i) {
        out["w" + std::to_string(i)] = outputs[2 * i];
        out["b" + std::to_string(i)] = outputs[2 * i + 1];
    }
    return out;
}

}  // namespace dvote::models
