#include "dvote/provenance.hpp"

#include <nlohmann/json.hpp>

#include "dvote/rng.hpp"
#include "dvote/sha256.hpp"

namespace dvote::prov {

using json = nlohmann::json;

Digest Minibatch::hash() const {
    std::vector<uint8_t> buf;
    std::vector<uint8_t> xs = x.serialize();
    std::vector<uint8_t> ys = y.serialize();
    put_u64le(buf, xs.size());
    put_bytes(buf, xs.data(), xs.size());
    put_u64le(buf, ys.size());
    put_bytes(buf, ys.data(), ys.size());
    return sha256(buf);
}

std::string InitSpec::to_json() const {
    json j;
    j["kind"] = kind;
    j["scale"] = fp_to_string(scale);
    j["candidates"] = candidates;
    return j.dump();
}

InitSpec InitSpec::from_json(const std::string& text) {
    json j = json::parse(text);
    InitSpec s;
    s.kind = j.at("kind").get<std::string>();
    s.scale = fp_from_string(j.at("scale").get<std::string>());
    s.candidates = j.value("candidates", 0u);
    return s;
}

namespace {

// Structured vote-reader init: hidden unit h pools the mark-grid quadrant
// h mod 4; the output layer sums its own group against a fixed bias on the
// unidentifiable class. Classification then only sharpens under training.
models::Params vote_reader_init(const models::ModelSpec& spec, const InitSpec& init) {
    if (spec.layers.size() != 2 || spec.layers[0].rows != 64)
        throw ProvenanceError("vote-reader init expects a 64 -> hidden -> classes model");
    uint32_t hidden = spec.layers[0].cols;
    uint32_t classes = spec.layers[1].cols;  // candidates + 1
    uint32_t candidates = init.candidates;
    if (candidates == 0 || candidates > 4 || candidates + 1 != classes)
        throw ProvenanceError("vote-reader init: candidate count does not match the model");

    Rng rng(derive_seed("vote-reader-init", spec.seed));
    auto jitter = [&rng]() {
        return FixedPoint::from_raw(rng.range(-(1 << 9), (1 << 9)));  // about +-0.0078
    };

    FixedTensor w1({64, hidden});
    for (uint32_t cell = 0; cell < 64; ++cell) {
        uint32_t row = cell / 8, col = cell % 8;
        uint32_t quadrant = (row / 4) * 2 + (col / 4);
        for (uint32_t h = 0; h < hidden; ++h) {
            bool pools = (h % 4) == quadrant;
            bool ovf = false;
            FixedPoint v = pools ? fp_from_string("0.0625") : FixedPoint::zero();  // 1/16
            w1.set((uint64_t)cell * hidden + h, fp_add(v, jitter(), ovf));
        }
    }
    FixedTensor b1({1, hidden});
    for (uint32_t h = 0; h < hidden; ++h) {
        bool ovf = false;
        b1.set(h, fp_add(fp_from_string("-0.3"), jitter(), ovf));
    }

    FixedTensor w2({hidden, classes});
    for (uint32_t h = 0; h < hidden; ++h) {
        for (uint32_t c = 0; c < classes; ++c) {
            bool ovf = false;
            FixedPoint v = (c < candidates && h % 4 == c) ? fp_from_string("0.15")
                                                          : FixedPoint::zero();
            w2.set((uint64_t)h * classes + c, fp_add(v, jitter(), ovf));
        }
    }
    FixedTensor b2({1, classes});
    for (uint32_t c = 0; c < classes; ++c) {
        bool ovf = false;
        FixedPoint v = c == candidates ? fp_from_string("0.4") : FixedPoint::zero();
        b2.set(c, fp_add(v, jitter(), ovf));
    }

    models::Params p;
    p["w0"] = std::move(w1);
    p["b0"] = std::move(b1);
    p["w1"] = std::move(w2);
    p["b1"] = std::move(b2);
    return p;
}

}  // namespace

models::Params make_initial_params(const models::ModelSpec& spec, const InitSpec& init) {
    if (init.kind == "uniform") return models::init_params(spec, init.scale);
    if (init.kind == "vote-reader") return vote_reader_init(spec, init);
    throw ProvenanceError("unknown init kind: " + init.kind);
}

std::pair<models::Params, vm::ExecutionResult> train_step(const models::ModelSpec& spec,
                                                          const models::Params& params,
                                                          const Minibatch& batch, FixedPoint eta) {
    uint32_t b = rows_of(batch.x.shape());
    vm::Program program = vm::Program::compile(models::train_step_graph(spec, eta, b));
    auto inputs = models::train_inputs(params, batch.x, batch.y);
    vm::ExecutionResult res = vm::execute(program, inputs);
    if (res.fault) throw ProvenanceError("training step faulted");

    std::vector<FixedTensor> outs;
    for (const auto& out : program.graph.outputs) outs.push_back(res.outputs.at(out.name));
    return {models::updated_params(spec, outs), std::move(res)};
}

std::vector<Minibatch> make_data_stream(const models::ModelSpec& spec, uint32_t steps,
                                        uint32_t batch, uint64_t seed) {
    std::vector<Minibatch> data;
    for (uint32_t i = 0; i < steps; ++i) {
        Rng rng(derive_seed("train-data", seed, i));
        Minibatch mb;
        mb.x = FixedTensor({batch, spec.input_dim()});
        for (size_t k = 0; k < mb.x.size(); ++k)
            mb.x.set(k, FixedPoint::from_raw(rng.range(-2 << 16, (2 << 16) - 1)));
        mb.y = FixedTensor({batch, spec.output_dim()});
        for (size_t k = 0; k < mb.y.size(); ++k)
            mb.y.set(k, FixedPoint::from_raw(rng.range(-(1 << 16), (1 << 16) - 1)));
        data.push_back(std::move(mb));
    }
    return data;
}

TrainResult train_model(const std::string& model_name, const models::ModelSpec& spec,
                        const InitSpec& init, const std::vector<Minibatch>& data, FixedPoint eta,
                        sim::World& world) {
    if (data.empty()) throw ProvenanceError("training needs at least one minibatch");
    uint32_t batch = rows_of(data[0].x.shape());

    TrainResult result;
    ProvenanceRecord& rec = result.record;
    rec.model_name = model_name;
    rec.spec = spec;
    rec.init = init;
    rec.eta = eta;
    rec.batch = batch;
    rec.step_total = static_cast<uint32_t>(data.size());

    // Pre-commit the whole data stream before any computation.
    for (const auto& mb : data) rec.committed_minibatch_hashes.push_back(mb.hash());

    models::Params params = make_initial_params(spec, init);
    rec.m0_hash = models::params_hash(spec, params);

    auto program =
        std::make_shared<const vm::Program>(vm::Program::compile(models::train_step_graph(spec, eta, batch)));

    for (uint32_t i = 1; i <= rec.step_total; ++i) {
        const Minibatch& mb = data[i - 1];

        sim::TaskSpec task;
        task.task_id = model_name + "/train-step-" + std::to_string(i);
        task.program = program;
        task.inputs = models::train_inputs(params, mb.x, mb.y);
        sim::TaskOutcome out = world.run_task(task);
        if (!out.accepted) {
            rec.aborted = true;
            rec.aborted_step = i;
            result.final_params = params;
            return result;
        }

        models::Params next = models::updated_params(spec, out.outputs);
        arb::CommitmentKey commit = world.arbiter().accepted_commitment(task.task_id);

        TrainingStep step;
        step.index = i;
        step.minibatch_hash = mb.hash();
        step.pre_model_hash = models::params_hash(spec, params);
        step.post_model_hash = models::params_hash(spec, next);
        step.task_id = task.task_id;
        step.trace_root = commit.trace_root;
        step.trace_step_count = commit.step_count;
        step.output_hash = commit.output_hash;
        rec.steps.push_back(step);

        params = std::move(next);
    }
    rec.final_hash = models::params_hash(spec, params);
    result.final_params = std::move(params);
    return result;
}

VerifyResult verify_provenance(const ProvenanceRecord& record,
                               const std::vector<Minibatch>& data, sim::World& world) {
    auto invalid = [](uint32_t step, std::string reason) {
        return VerifyResult{false, step, std::move(reason)};
    };

    if (record.aborted) return invalid(record.aborted_step, "record marked aborted");
    if (record.steps.size() != record.step_total ||
        record.committed_minibatch_hashes.size() != record.step_total)
        return invalid(0, "malformed record: step count mismatch");
    if (data.size() != record.step_total)
        return invalid(0, "malformed record: data stream length mismatch");

    models::Params params;
    try {
        params = make_initial_params(record.spec, record.init);
    } catch (const std::exception& e) {
        return invalid(0, std::string("malformed record: ") + e.what());
    }
    if (models::params_hash(record.spec, params) != record.m0_hash)
        return invalid(1, "chain-mismatch: initial model hash");

    // Chain continuity and data pre-commitment first; cheap and local.
    for (uint32_t i = 1; i <= record.step_total; ++i) {
        const TrainingStep& step = record.steps[i - 1];
        if (step.index != i) return invalid(i, "malformed record: step index");
        if (record.committed_minibatch_hashes[i - 1] != data[i - 1].hash())
            return invalid(i, "chain-mismatch: minibatch hash");
        if (step.minibatch_hash != record.committed_minibatch_hashes[i - 1])
            return invalid(i, "chain-mismatch: minibatch hash");
        Digest expect_pre = i == 1 ? record.m0_hash : record.steps[i - 2].post_model_hash;
        if (step.pre_model_hash != expect_pre) return invalid(i, "chain-mismatch: model chain");
    }

    // Recompute every step through the committee and confirm the record
    // committed to exactly those computations.
    auto program = std::make_shared<const vm::Program>(
        vm::Program::compile(models::train_step_graph(record.spec, record.eta, record.batch)));
    for (uint32_t i = 1; i <= record.step_total; ++i) {
        const TrainingStep& step = record.steps[i - 1];

        sim::TaskSpec task;
        task.task_id = "verify/" + record.model_name + "/step-" + std::to_string(i) + "#" +
                       std::to_string(world.round());
        task.program = program;
        task.inputs = models::train_inputs(params, data[i - 1].x, data[i - 1].y);
        sim::TaskOutcome out = world.run_task(task);
        if (!out.accepted) return invalid(i, "dispute-failure: step could not be attested");

        arb::CommitmentKey commit = world.arbiter().accepted_commitment(task.task_id);
        if (commit.trace_root != step.trace_root || commit.step_count != step.trace_step_count ||
            commit.output_hash != step.output_hash)
            return invalid(i, "trace-mismatch: recomputed step disagrees with the record");

        models::Params next = models::updated_params(record.spec, out.outputs);
        if (models::params_hash(record.spec, next) != step.post_model_hash)
            return invalid(i, "trace-mismatch: post-model hash");
        params = std::move(next);
    }

    if (models::params_hash(record.spec, params) != record.final_hash)
        return invalid(record.step_total, "trace-mismatch: final model hash");
    return VerifyResult{true, 0, ""};
}

// ---------------------------------------------------------------------------
// serialization
// ---------------------------------------------------------------------------

std::string ProvenanceRecord::to_json() const {
    json j;
    j["model_name"] = model_name;
    j["spec"] = json::parse(spec.to_json());
    j["init"] = json::parse(init.to_json());
    j["eta"] = fp_to_string(eta);
    j["batch"] = batch;
    j["steps_total"] = step_total;
    j["m0_hash"] = to_hex(m0_hash);
    j["minibatch_hashes"] = json::array();
    for (const auto& h : committed_minibatch_hashes) j["minibatch_hashes"].push_back(to_hex(h));
    j["steps"] = json::array();
    for (const auto& s : steps) {
        j["steps"].push_back({{"index", s.index},
                              {"minibatch_hash", to_hex(s.minibatch_hash)},
                              {"pre_model_hash", to_hex(s.pre_model_hash)},
                              {"post_model_hash", to_hex(s.post_model_hash)},
                              {"task_id", s.task_id},
                              {"trace_root", to_hex(s.trace_root)},
                              {"trace_step_count", s.trace_step_count},
                              {"output_hash", to_hex(s.output_hash)}});
    }
    j["final_hash"] = to_hex(final_hash);
    j["aborted"] = aborted;
    j["aborted_step"] = aborted_step;
    return j.dump(2);
}

ProvenanceRecord ProvenanceRecord::from_json(const std::string& text) {
    json j = json::parse(text);
    ProvenanceRecord r;
    r.model_name = j.at("model_name").get<std::string>();
    r.spec = models::ModelSpec::from_json(j.at("spec").dump());
    r.init = InitSpec::from_json(j.at("init").dump());
    r.eta = fp_from_string(j.at("eta").get<std::string>());
    r.batch = j.at("batch").get<uint32_t>();
    r.step_total = j.at("steps_total").get<uint32_t>();
    r.m0_hash = digest_from_hex(j.at("m0_hash").get<std::string>());
    for (const auto& h : j.at("minibatch_hashes"))
        r.committed_minibatch_hashes.push_back(digest_from_hex(h.get<std::string>()));
    for (const auto& s : j.at("steps")) {
        TrainingStep step;
        step.index = s.at("index").get<uint32_t>();
        step.minibatch_hash = digest_from_hex(s.at("minibatch_hash").get<std::string>());
        step.pre_model_hash = digest_from_hex(s.at("pre_model_hash").get<std::string>());
        step.post_model_hash = digest_from_hex(s.at("post_model_hash").get<std::string>());
        step.task_id = s.at("task_id").get<std::string>();
        step.trace_root = digest_from_hex(s.at("trace_root").get<std::string>());
        step.trace_step_count = s.at("trace_step_count").get<uint64_t>();
        step.output_hash = digest_from_hex(s.at("output_hash").get<std::string>());
        r.steps.push_back(step);
    }
    r.final_hash = digest_from_hex(j.at("final_hash").get<std::string>());
    r.aborted = j.value("aborted", false);
    r.aborted_step = j.value("aborted_step", 0u);
    return r;
}

Digest ProvenanceRecord::digest() const { return sha256(to_json()); }

// ---------------------------------------------------------------------------
// model registry
// ---------------------------------------------------------------------------

ModelRegistry ModelRegistry::bind_models(std::vector<AuditedModel> entries,
                                         const std::map<std::string, std::vector<Minibatch>>& data,
                                         sim::World& world) {
    ModelRegistry reg;
    for (auto& e : entries) {
        auto it = data.find(e.name);
        if (it == data.end())
            throw ProvenanceError("no training data stream for model '" + e.name + "'");
        VerifyResult v = verify_provenance(e.record, it->second, world);
        if (!v.valid)
            throw ProvenanceError("model '" + e.name + "' failed provenance verification at step " +
                                  std::to_string(v.failing_step) + " (" + v.reason + ")");
        if (models::params_hash(e.spec, e.params) != e.record.final_hash)
            throw ProvenanceError("model '" + e.name +
                                  "' deployed weights do not match the audited final model");
        reg.entries_[e.name] = std::move(e);
    }
    return reg;
}

const AuditedModel& ModelRegistry::get(const std::string& name) const {
    auto it = entries_.find(name);
    if (it == entries_.end()) throw ProvenanceError("model '" + name + "' is not audited");
    return it->second;
}

std::vector<std::string> ModelRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
}

}  // namespace dvote::prov
