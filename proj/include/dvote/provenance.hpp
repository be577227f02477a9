#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dvote/committee.hpp"
#include "dvote/models.hpp"

namespace dvote::prov {

class ProvenanceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Minibatch {
    FixedTensor x;  // batch x input_dim
    FixedTensor y;  // batch x output_dim

    Digest hash() const;
};

// How the initial model M0 is derived; recorded so any verifier can
// regenerate the exact starting parameters.
struct InitSpec {
    std::string kind = "uniform";  // "uniform" | "vote-reader"
    FixedPoint scale = fp_from_string("0.5");
    uint32_t candidates = 0;  // vote-reader structured init

    std::string to_json() const;
    static InitSpec from_json(const std::string& text);
};

models::Params make_initial_params(const models::ModelSpec& spec, const InitSpec& init);

// One committed link of the training chain M_{i-1} --D_i--> M_i.
struct TrainingStep {
    uint32_t index = 0;  // 1-based
    Digest minibatch_hash{};
    Digest pre_model_hash{};
    Digest post_model_hash{};
    // The committee-accepted trace of the step computation.
    std::string task_id;
    Digest trace_root{};
    uint64_t trace_step_count = 0;
    Digest output_hash{};
};

struct ProvenanceRecord {
    std::string model_name;
    models::ModelSpec spec;
    InitSpec init;
    FixedPoint eta{};
    uint32_t batch = 0;
    uint32_t step_total = 0;  // n
    Digest m0_hash{};
    std::vector<Digest> committed_minibatch_hashes;  // published before training
    std::vector<TrainingStep> steps;
    Digest final_hash{};
    bool aborted = false;
    uint32_t aborted_step = 0;

    std::string to_json() const;
    static ProvenanceRecord from_json(const std::string& text);
    Digest digest() const;
};

// Local single step: model' = model - eta * grad, computed entirely in the
// vm as a graph; returns the updated parameters and the execution.
std::pair<models::Params, vm::ExecutionResult> train_step(const models::ModelSpec& spec,
                                                          const models::Params& params,
                                                          const Minibatch& batch, FixedPoint eta);

// Deterministic synthetic data stream for training fixtures.
std::vector<Minibatch> make_data_stream(const models::ModelSpec& spec, uint32_t steps,
                                        uint32_t batch, uint64_t seed);

struct TrainResult {
    ProvenanceRecord record;
    models::Params final_params;
};

// Committee-verified training: every step runs as an arbiter task through
// the world; aborts (with a partial record) if any step fails to settle on
// an accepted output.
TrainResult train_model(const std::string& model_name, const models::ModelSpec& spec,
                        const InitSpec& init, const std::vector<Minibatch>& data, FixedPoint eta,
                        sim::World& world);

struct VerifyResult {
    bool valid = false;
    uint32_t failing_step = 0;  // 1-based; 0 when valid
    std::string reason;
};

// Checks chain continuity, then recomputes every step through the committee
// and confirms the final hash; reports the first failing step.
VerifyResult verify_provenance(const ProvenanceRecord& record,
                               const std::vector<Minibatch>& data, sim::World& world);

// A model admitted into the pipeline: parameters plus the provenance record
// standing behind them.
struct AuditedModel {
    std::string name;
    models::ModelSpec spec;
    models::Params params;
    ProvenanceRecord record;
};

// The audited-model registry the pipeline runs against. bind_models refuses
// any model whose record fails verification or whose deployed weights do not
// hash to the record's final model.
class ModelRegistry {
public:
    static ModelRegistry bind_models(std::vector<AuditedModel> entries,
                                     const std::map<std::string, std::vector<Minibatch>>& data,
                                     sim::World& world);

    const AuditedModel& get(const std::string& name) const;
    bool has(const std::string& name) const { return entries_.count(name) > 0; }
    std::vector<std::string> names() const;

private:
    std::map<std::string, AuditedModel> entries_;
};

}  // namespace dvote::prov
