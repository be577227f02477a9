#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dvote/rng.hpp"
#include "dvote/sha256.hpp"
#include "dvote/vm.hpp"

using namespace dvote;
using namespace dvote::vm;

namespace {

FixedTensor tensor1d(std::vector<double> vals) {
    std::vector<FixedPoint> data;
    for (double v : vals)
        data.push_back(FixedPoint::from_raw(static_cast<int64_t>(v * FixedPoint::kOne)));
    return FixedTensor({1, static_cast<uint32_t>(vals.size())}, std::move(data));
}

FixedTensor zeros(std::vector<uint32_t> shape) { return FixedTensor(std::move(shape)); }

// Strictly sequential scalar dot product; the reference the canonical
// segment order must reproduce bit for bit.
FixedPoint seq_dot(const FixedTensor& a, const FixedTensor& b) {
    bool ovf = false;
    FixedPoint acc = FixedPoint::zero();
    for (size_t i = 0; i < a.size(); ++i) acc = fp_add(acc, fp_mul(a.at(i), b.at(i), ovf), ovf);
    return acc;
}

}  // namespace

TEST_CASE("build_graph mlp produces the expected node order") {
    CompGraph g = build_graph(R"({"layers":[{"kind":"relu","rows":4,"cols":8},
                                            {"kind":"linear","rows":8,"cols":2}],"seed":0})");
    REQUIRE(g.nodes.size() == 5);
    CHECK(g.nodes[0].kind == OpKind::matmul);
    CHECK(g.nodes[1].kind == OpKind::add_bias);
    CHECK(g.nodes[2].kind == OpKind::relu);
    CHECK(g.nodes[3].kind == OpKind::matmul);
    CHECK(g.nodes[4].kind == OpKind::add_bias);
    CHECK(g.inputs.size() == 5);  // x + 2x(w, b)
    CHECK(g.outputs.size() == 1);
}

TEST_CASE("build_graph rejects bad specs") {
    // (2x3)·(4x2): inner dimensions 3 != 4.
    GraphBuilder b;
    ValueId a = b.add_input("a", {2, 3});
    ValueId w = b.add_input("w", {4, 2});
    CHECK_THROWS_AS(b.matmul(a, w), GraphError);

    // Layer chain mismatch through the JSON spec.
    CHECK_THROWS_AS(build_graph(R"({"layers":[{"kind":"relu","rows":4,"cols":8},
                                              {"kind":"linear","rows":9,"cols":2}],"seed":0})"),
                    GraphError);
    // Unsupported op.
    CHECK_THROWS_AS(build_graph(R"({"layers":[{"kind":"softmax","rows":4,"cols":8}],"seed":0})"),
                    GraphError);
    // Cyclic / forward wiring in the node-list form.
    CHECK_THROWS_AS(build_graph(R"({"graph":{
        "inputs":[{"name":"x","shape":[1,4]}],
        "nodes":[{"op":"sub","a":"x","b":"z","out":"y"},
                 {"op":"relu","a":"y","out":"z"}],
        "outputs":["z"]}})"),
                    GraphError);
    // Parse error.
    CHECK_THROWS_AS(build_graph("{nope"), GraphError);
}

TEST_CASE("linearize segment splitting at the bound") {
    GraphBuilder b1;
    b1.mark_output("y", b1.matmul(b1.add_input("a", {1, 256}), b1.add_input("b", {256, 1})));
    CHECK(linearize(b1.finish()).size() == 1);

    GraphBuilder b2;
    b2.mark_output("y", b2.matmul(b2.add_input("a", {1, 300}), b2.add_input("b", {300, 1})));
    auto ops = linearize(b2.finish());
    REQUIRE(ops.size() == 2);
    CHECK(ops[0].init);
    CHECK_FALSE(ops[1].init);
    CHECK(ops[0].len == 256);
    CHECK(ops[1].len == 44);
}

TEST_CASE("every emitted micro-op respects the cost bound") {
    GraphBuilder b;
    ValueId x = b.add_input("x", {3, 300});
    ValueId w = b.add_input("w", {300, 5});
    ValueId bias = b.add_input("b", {1, 5});
    ValueId h = b.relu(b.add_bias(b.matmul(x, w), bias));
    b.mark_output("s", b.sum_reduce(h));
    for (const auto& op : linearize(b.finish())) {
        CHECK(op.len <= kSegmentLen);
        CHECK(op.cost <= kMaxOpCost);
        CHECK(op.cost >= 1);
    }
}

TEST_CASE("step: dot, relu, sigmoid micro-op examples") {
    GraphBuilder b;
    ValueId a = b.add_input("a", {1, 2});
    ValueId w = b.add_input("w", {2, 1});
    b.mark_output("y", b.matmul(a, w));
    Program p = Program::compile(b.finish());
    REQUIRE(p.ops.size() == 1);

    VmState s0 = initial_state(p, {{"a", tensor1d({1, 2})},
                                   {"w", FixedTensor({2, 1}, {FixedPoint::from_int(3),
                                                              FixedPoint::from_int(4)})}});
    VmState s1 = step(s0, p.ops[0]);
    CHECK(s1.pc == 1);
    CHECK(s1.memory[p.graph.outputs[0].slot]->at(0).raw == 11 << 16);  // 1*3 + 2*4
    CHECK_FALSE(s1.overflow_flag);

    GraphBuilder br;
    br.mark_output("y", br.relu(br.add_input("x", {1, 2})));
    Program pr = Program::compile(br.finish());
    VmState r1 = step(initial_state(pr, {{"x", tensor1d({-1.5, 2.25})}}), pr.ops[0]);
    const FixedTensor& rt = *r1.memory[pr.graph.outputs[0].slot];
    CHECK(rt.at(0).raw == 0);
    CHECK(rt.at(1).raw == static_cast<int64_t>(2.25 * 65536));

    GraphBuilder bs;
    bs.mark_output("y", bs.sigmoid(bs.add_input("x", {1, 1})));
    Program ps = Program::compile(bs.finish());
    VmState g1 = step(initial_state(ps, {{"x", tensor1d({0})}}), ps.ops[0]);
    CHECK(g1.memory[ps.graph.outputs[0].slot]->at(0).raw == 32768);
}

TEST_CASE("execute identity graph") {
    GraphBuilder b;
    ValueId x = b.add_input("x", {1, 3});
    ValueId z = b.add_input("zero", {1, 3});
    b.mark_output("y", b.add_bias(x, z));
    Program p = Program::compile(b.finish());

    FixedTensor in = tensor1d({0.5, -1.25, 7});
    auto res = execute(p, {{"x", in}, {"zero", zeros({1, 3})}});
    CHECK(res.outputs.at("y") == in);
    CHECK(res.trace.step_count == p.ops.size());
    CHECK_FALSE(res.fault);
}

TEST_CASE("execute is deterministic byte for byte") {
    CompGraph g = build_graph(R"({"layers":[{"kind":"relu","rows":4,"cols":8},
                                            {"kind":"linear","rows":8,"cols":2}],"seed":0})");
    Program p = Program::compile(std::move(g));

    Rng rng(99);
    std::map<std::string, FixedTensor> inputs;
    for (const auto& in : p.graph.inputs) {
        FixedTensor t(p.graph.slot(in.slot).shape);
        for (size_t i = 0; i < t.size(); ++i)
            t.set(i, FixedPoint::from_raw(rng.range(-3 << 16, 3 << 16)));
        inputs[in.name] = t;
    }
    auto r1 = execute(p, inputs);
    auto r2 = execute(p, inputs);
    CHECK(r1.trace == r2.trace);
    CHECK(r1.trace.to_json() == r2.trace.to_json());
    CHECK(r1.state_hashes == r2.state_hashes);
}

TEST_CASE("zero weights with bias 0.5 ignore the input") {
    CompGraph g = build_graph(R"({"layers":[{"kind":"relu","rows":2,"cols":2},
                                            {"kind":"linear","rows":2,"cols":1}],"seed":0})");
    Program p = Program::compile(std::move(g));

    std::map<std::string, FixedTensor> inputs;
    inputs["w0"] = zeros({2, 2});
    inputs["b0"] = zeros({1, 2});
    inputs["w1"] = zeros({2, 1});
    inputs["b1"] = tensor1d({0.5});

    for (double x0 : {-3.0, 0.0, 42.0}) {
        inputs["x"] = tensor1d({x0, -x0});
        auto res = execute(p, inputs);
        CHECK(res.outputs.at("out").at(0).raw == 32768);
    }
}

TEST_CASE("state_at endpoints and mid-replay") {
    CompGraph g = build_graph(R"({"layers":[{"kind":"relu","rows":3,"cols":4},
                                            {"kind":"linear","rows":4,"cols":2}],"seed":0})");
    Program p = Program::compile(std::move(g));
    Rng rng(5);
    std::map<std::string, FixedTensor> inputs;
    for (const auto& in : p.graph.inputs) {
        FixedTensor t(p.graph.slot(in.slot).shape);
        for (size_t i = 0; i < t.size(); ++i)
            t.set(i, FixedPoint::from_raw(rng.range(-2 << 16, 2 << 16)));
        inputs[in.name] = t;
    }
    auto res = execute(p, inputs);
    uint64_t T = res.trace.step_count;

    CHECK(state_at(p, inputs, 0).state_hash == res.state_hashes[0]);
    VmState end = state_at(p, inputs, T);
    CHECK(end.state_hash == res.state_hashes[T]);
    CHECK(*end.memory[p.graph.outputs[0].slot] == res.outputs.at("out"));
    CHECK_THROWS(state_at(p, inputs, T + 1));
}

TEST_CASE("full-trace oracle: folding step() reproduces execute()") {
    GraphBuilder b;
    ValueId x = b.add_input("x", {2, 5});
    ValueId w = b.add_input("w", {5, 3});
    ValueId bias = b.add_input("b", {1, 3});
    ValueId h = b.sigmoid(b.add_bias(b.matmul(x, w), bias));
    ValueId d = b.sub(h, b.scalar_mul(h, fp_from_string("0.5")));
    b.mark_output("loss", b.sum_reduce(b.mul(d, d)));
    Program p = Program::compile(b.finish());

    Rng rng(17);
    std::map<std::string, FixedTensor> inputs;
    for (const auto& in : p.graph.inputs) {
        FixedTensor t(p.graph.slot(in.slot).shape);
        for (size_t i = 0; i < t.size(); ++i)
            t.set(i, FixedPoint::from_raw(rng.range(-4 << 16, 4 << 16)));
        inputs[in.name] = t;
    }
    auto res = execute(p, inputs);

    VmState s = initial_state(p, inputs);
    REQUIRE(s.state_hash == res.state_hashes[0]);
    for (uint64_t i = 0; i < p.step_count(); ++i) {
        s = step(s, p.ops[i]);
        REQUIRE(s.state_hash == res.state_hashes[i + 1]);
    }
}

TEST_CASE("canonical segment order equals sequential scalar dot") {
    GraphBuilder b;
    ValueId a = b.add_input("a", {1, 600});
    ValueId w = b.add_input("w", {600, 1});
    b.mark_output("y", b.matmul(a, w));
    Program p = Program::compile(b.finish());
    CHECK(p.ops.size() == 3);  // ceil(600/256)

    Rng rng(23);
    FixedTensor av({1, 600}), wv({600, 1});
    for (size_t i = 0; i < 600; ++i) {
        av.set(i, FixedPoint::from_raw(rng.range(-(5 << 16), 5 << 16)));
        wv.set(i, FixedPoint::from_raw(rng.range(-(5 << 16), 5 << 16)));
    }
    auto res = execute(p, {{"a", av}, {"w", wv}});
    CHECK(res.outputs.at("y").at(0) == seq_dot(av, wv));
}

TEST_CASE("argmax picks the first maximum") {
    GraphBuilder b;
    b.mark_output("c", b.argmax(b.add_input("x", {1, 5})));
    Program p = Program::compile(b.finish());
    auto res = execute(p, {{"x", tensor1d({1, 7, 3, 7, 2})}});
    CHECK(res.outputs.at("c").at(0).raw == 1 << 16);
}

TEST_CASE("overflow is sticky and reproducible") {
    GraphBuilder b;
    ValueId x = b.add_input("x", {1, 1});
    ValueId y = b.scalar_mul(x, FixedPoint::from_raw(kFixedMax));
    ValueId z = b.scalar_mul(y, FixedPoint::from_raw(kFixedMax));
    b.mark_output("y", b.relu(z));
    Program p = Program::compile(b.finish());

    auto r1 = execute(p, {{"x", tensor1d({2.0})}});
    auto r2 = execute(p, {{"x", tensor1d({2.0})}});
    CHECK(r1.overflow);
    CHECK(r1.state_hashes == r2.state_hashes);
    CHECK(r1.trace == r2.trace);
    // The flag stays set in every later state hash: recompute state T with
    // the flag cleared and observe a different hash.
    VmState end = state_at(p, {{"x", tensor1d({2.0})}}, p.step_count());
    CHECK(end.overflow_flag);
    Digest altered = state_hash_of(end.pc, false, false, end.memory_root());
    CHECK(altered != end.state_hash);
}

TEST_CASE("reading an empty operand slot faults with a well-defined state") {
    GraphBuilder b;
    ValueId x = b.add_input("x", {1, 2});
    ValueId h = b.relu(x);
    b.mark_output("y", b.sub(h, x));
    Program p = Program::compile(b.finish());

    // Hand-build a malformed program: run the sub before relu has written h.
    VmState s0 = initial_state(p, {{"x", tensor1d({1, 2})}});
    VmState bad = step(s0, p.ops[1]);
    CHECK(bad.fault_flag);
    CHECK(bad.pc == 1);
    CHECK(bad.state_hash != Digest{});
    // Same malformed step twice, same fault hash.
    CHECK(step(s0, p.ops[1]).state_hash == bad.state_hash);
}

TEST_CASE("merkle_proof over trace states") {
    // Empty program: single leaf, proof length 0, root == leaf.
    GraphBuilder b0;
    b0.mark_output("x", b0.add_input("x", {1, 2}));
    CompGraph g0 = b0.finish();
    g0.nodes.clear();
    Program p0 = Program::compile(std::move(g0));
    CHECK(p0.step_count() == 0);
    auto r0 = execute(p0, {{"x", tensor1d({1, 1})}});
    CHECK(r0.trace.step_count == 0);
    auto pr0 = merkle_proof(r0.trace, 0);
    CHECK(pr0.path.empty());
    CHECK(r0.trace.root() == r0.state_hashes[0]);

    // T+1 = 8 leaves: proof length 3 everywhere, flipped bytes fail.
    GraphBuilder b;
    ValueId x = b.add_input("x", {1, 3});
    ValueId a = b.relu(x);
    ValueId c = b.sigmoid(a);
    ValueId d = b.sub(c, a);
    ValueId e = b.mul(d, d);
    ValueId f = b.scalar_mul(e, fp_from_string("0.25"));
    ValueId s = b.sum_reduce(b.relu(f));
    b.mark_output("out", s);
    CompGraph gg = b.finish();
    Program p = Program::compile(std::move(gg));
    REQUIRE(p.step_count() == 7);  // 7 steps -> 8 states
    auto res = execute(p, {{"x", tensor1d({0.5, -2, 3})}});
    for (uint64_t i = 0; i <= 7; ++i) {
        auto proof = merkle_proof(res.trace, i);
        CHECK(proof.path.size() == 3);
        CHECK(verify_state_proof(proof, res.trace.root()));
        auto bad = proof;
        bad.path[0][7] ^= 1;
        CHECK_FALSE(verify_state_proof(bad, res.trace.root()));
        auto bad2 = proof;
        bad2.leaf[0] ^= 1;
        CHECK_FALSE(verify_state_proof(bad2, res.trace.root()));
    }
    CHECK_THROWS(merkle_proof(res.trace, 9));
}

TEST_CASE("property: randomized graphs execute deterministically") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(derive_seed("det-prop", seed));
        GraphBuilder b;
        uint32_t dim = 2 + static_cast<uint32_t>(rng.below(6));
        ValueId cur = b.add_input("x", {1, dim});
        uint32_t depth = 1 + static_cast<uint32_t>(rng.below(6));
        for (uint32_t i = 0; i < depth; ++i) {
            switch (rng.below(4)) {
                case 0: cur = b.relu(cur); break;
                case 1: cur = b.sigmoid(cur); break;
                case 2: cur = b.scalar_mul(cur, FixedPoint::from_raw(rng.range(-3 << 16, 3 << 16))); break;
                case 3: cur = b.sub(cur, cur); break;
            }
        }
        b.mark_output("out", cur);
        Program p = Program::compile(b.finish());

        FixedTensor x({1, dim});
        for (size_t i = 0; i < x.size(); ++i)
            x.set(i, FixedPoint::from_raw(rng.range(-8 << 16, 8 << 16)));
        auto r1 = execute(p, {{"x", x}});
        auto r2 = execute(p, {{"x", x}});
        CHECK(r1.trace == r2.trace);
        CHECK(r1.outputs == r2.outputs);
    }
}

TEST_CASE("input validation") {
    GraphBuilder b;
    b.mark_output("y", b.relu(b.add_input("x", {1, 2})));
    Program p = Program::compile(b.finish());
    CHECK_THROWS_AS(execute(p, {{"x", tensor1d({1, 2, 3})}}), GraphError);
    CHECK_THROWS_AS(execute(p, {}), GraphError);
    CHECK_THROWS_AS(execute(p, {{"x", tensor1d({1, 2})}, {"bogus", tensor1d({1})}}), GraphError);
}
