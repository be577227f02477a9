#include "dvote/committee.hpp"

#include <algorithm>
#include <future>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "dvote/sha256.hpp"

namespace dvote::sim {

using json = nlohmann::json;

const char* strategy_name(StrategyKind s) {
    switch (s) {
        case StrategyKind::honest: return "honest";
        case StrategyKind::wrong_output: return "wrong-output";
        case StrategyKind::corrupt_at_step: return "corrupt-at-step";
        case StrategyKind::lazy_copy: return "lazy-copy";
        case StrategyKind::silent: return "silent";
    }
    return "?";
}

StrategyKind strategy_from_string(const std::string& s) {
    if (s == "honest") return StrategyKind::honest;
    if (s == "wrong-output") return StrategyKind::wrong_output;
    if (s == "corrupt-at-step") return StrategyKind::corrupt_at_step;
    if (s == "lazy-copy") return StrategyKind::lazy_copy;
    if (s == "silent") return StrategyKind::silent;
    throw std::invalid_argument("unknown scrutineer strategy: " + s);
}

bool CommitteeConfig::anytrust_holds() const {
    for (const auto& p : profiles)
        if (p.strategy == StrategyKind::honest) return true;
    return false;
}

CommitteeConfig CommitteeConfig::from_json(const std::string& json_text) {
    json j = json::parse(json_text);
    CommitteeConfig cfg;
    for (const auto& e : j.at("scrutineers")) {
        ScrutineerProfile p;
        p.id = e.at("id").get<std::string>();
        p.affiliation = e.value("affiliation", "");
        p.strategy = strategy_from_string(e.value("strategy", "honest"));
        if (e.contains("params")) {
            const json& params = e.at("params");
            p.corrupt_step = params.value("corrupt_step", uint64_t{0});
            p.peer = params.value("peer", "");
            p.task_filter = params.value("task_filter", "");
        }
        cfg.profiles.push_back(std::move(p));
    }
    if (cfg.profiles.empty()) throw std::invalid_argument("committee must have at least one member");
    return cfg;
}

const char* msg_kind_name(MsgKind k) {
    switch (k) {
        case MsgKind::claim: return "claim";
        case MsgKind::bisect_response: return "bisect-response";
        case MsgKind::one_step_opening: return "one-step-opening";
        case MsgKind::noop: return "noop";
    }
    return "?";
}

std::string SimMessage::to_json_line() const {
    json j;
    j["round"] = round;
    j["from"] = from;
    j["to"] = to;
    j["kind"] = msg_kind_name(kind);
    j["payload"] = payload.empty() ? json(nullptr) : json::parse(payload);
    return j.dump();
}

// ---------------------------------------------------------------------------
// execution views
// ---------------------------------------------------------------------------

ExecutionView honest_view(const vm::Program& program,
                          const std::map<std::string, FixedTensor>& inputs) {
    vm::ExecutionResult res = vm::execute(program, inputs);
    if (res.fault) throw std::runtime_error("honest execution faulted; task program is malformed");
    ExecutionView v;
    v.state_hashes = std::move(res.state_hashes);
    v.trace_tree = std::move(res.trace.step_tree);
    v.final_memory = std::move(res.final_memory);
    v.overflow = res.overflow;
    v.output_hash = res.trace.output_hash;
    v.kind = ExecutionView::Kind::honest;
    return v;
}

namespace {

// Deterministic cell perturbation used by every adversarial fabrication.
void perturb_cell(FixedTensor& t, uint64_t cell) {
    bool ovf = false;
    t.set(cell, fp_add(t.at(cell), FixedPoint::one(), ovf));
}

// Perturbs the state at `corrupt_step`: the cell the previous op wrote, or
// the first input cell when corrupting the initial state.
void perturb_state(const vm::Program& program, vm::VmState& s, uint64_t corrupt_step) {
    if (corrupt_step == 0) {
        uint32_t slot = program.graph.inputs.at(0).slot;
        perturb_cell(*s.memory[slot], 0);
    } else {
        const vm::MicroOp& prev = program.ops[corrupt_step - 1];
        perturb_cell(*s.memory[prev.dest_slot], prev.dest_off);
    }
}

void perturb_first_output(const vm::Program& program, vm::Memory& memory, int64_t delta_raw) {
    uint32_t slot = program.graph.outputs.at(0).slot;
    bool ovf = false;
    FixedTensor& t = *memory[slot];
    t.set(0, fp_add(t.at(0), FixedPoint::from_raw(delta_raw), ovf));
}

Digest output_hash_of_memory(const vm::Program& program, const vm::Memory& memory) {
    return vm::output_hash_of(program, memory);
}

void finish_view(const vm::Program& program, ExecutionView& v) {
    v.trace_tree = MerkleTree(v.state_hashes);
    v.output_hash = output_hash_of_memory(program, v.final_memory);
}

}  // namespace

ExecutionView fabricated_view(const vm::Program& program,
                              const std::map<std::string, FixedTensor>& inputs,
                              uint64_t corrupt_step) {
    uint64_t T = program.step_count();
    if (corrupt_step > T) throw std::out_of_range("corrupt step beyond trace");

    ExecutionView honest = honest_view(program, inputs);

    ExecutionView v;
    v.kind = ExecutionView::Kind::corrupt;
    v.corrupt_step = corrupt_step;
    v.state_hashes.assign(honest.state_hashes.begin(),
                          honest.state_hashes.begin() + corrupt_step);

    vm::VmState s = vm::state_at(program, inputs, corrupt_step);
    perturb_state(program, s, corrupt_step);
    s.rehash();
    v.state_hashes.push_back(s.state_hash);
    vm::ReplaySpan span = vm::replay_span(program, std::move(s), T - corrupt_step);
    for (const auto& h : span.hashes) v.state_hashes.push_back(h);
    v.final_memory = span.final_state.memory;
    v.overflow = span.final_state.overflow_flag;

    // The lie must conflict with the honest commitment at the end; if the
    // perturbation washed out, force a visible output difference.
    if (v.state_hashes.back() == honest.state_hashes.back()) {
        v.forced_output_mutation = true;
        perturb_first_output(program, v.final_memory, FixedPoint::kOne);
        vm::VmState last;
        last.pc = T;
        last.memory = v.final_memory;
        last.overflow_flag = v.overflow;
        last.rehash();
        v.state_hashes.back() = last.state_hash;
    }
    finish_view(program, v);
    return v;
}

ExecutionView wrong_output_view(const vm::Program& program,
                                const std::map<std::string, FixedTensor>& inputs,
                                FixedPoint delta) {
    ExecutionView v = honest_view(program, inputs);
    v.kind = ExecutionView::Kind::wrong_output;
    v.corrupt_step = program.step_count();
    v.delta_raw = delta.raw;
    perturb_first_output(program, v.final_memory, delta.raw);
    vm::VmState last;
    last.pc = program.step_count();
    last.memory = v.final_memory;
    last.overflow_flag = v.overflow;
    last.rehash();
    v.state_hashes.back() = last.state_hash;
    finish_view(program, v);
    return v;
}

vm::VmState view_state_at(const vm::Program& program,
                          const std::map<std::string, FixedTensor>& inputs,
                          const ExecutionView& view, uint64_t i) {
    uint64_t T = program.step_count();
    if (i > T) throw std::out_of_range("state index beyond trace");

    vm::VmState s;
    if (view.kind == ExecutionView::Kind::honest || i < view.corrupt_step) {
        s = vm::state_at(program, inputs, i);
    } else if (view.kind == ExecutionView::Kind::wrong_output) {
        s = vm::state_at(program, inputs, i);  // i == T here
        perturb_first_output(program, s.memory, view.delta_raw);
        s.rehash();
    } else {
        s = vm::state_at(program, inputs, view.corrupt_step);
        perturb_state(program, s, view.corrupt_step);
        if (i > view.corrupt_step) {
            vm::ReplaySpan span = vm::replay_span(program, std::move(s), i - view.corrupt_step);
            s = std::move(span.final_state);
        } else {
            s.rehash();
        }
        if (i == T && view.forced_output_mutation) {
            perturb_first_output(program, s.memory, FixedPoint::kOne);
            s.rehash();
        }
    }
    if (s.state_hash != view.state_hashes[i])
        throw std::logic_error("view replay diverged from committed hashes");
    return s;
}

arb::Claim claim_from_view(const std::string& task_id, const std::string& claimant,
                           uint64_t round, const vm::Program& program,
                           const std::map<std::string, FixedTensor>& inputs,
                           const ExecutionView& view) {
    uint64_t T = view.state_hashes.size() - 1;

    arb::Claim c;
    c.task_id = task_id;
    c.claimant = claimant;
    c.program_hash = program.program_hash;
    c.input_hash = vm::input_hash_of(program, inputs);
    c.output_hash = view.output_hash;
    c.trace_root = view.trace_tree.root();
    c.step_count = T;
    c.round = round;
    c.endpoints.leaf0 = view.state_hashes[0];
    c.endpoints.proof0 = view.trace_tree.prove(0);
    c.endpoints.leaf_t = view.state_hashes[T];
    c.endpoints.proof_t = view.trace_tree.prove(T);

    MerkleTree mem = vm::memory_tree(view.final_memory);
    c.reveal.pc = T;
    c.reveal.overflow = view.overflow;
    c.reveal.fault = false;
    c.reveal.memory_root = mem.root();
    for (const auto& out : program.graph.outputs) {
        arb::SlotOpening o;
        o.slot = out.slot;
        o.empty = !view.final_memory[out.slot].has_value();
        if (!o.empty) {
            o.shape = view.final_memory[out.slot]->shape();
            for (FixedPoint v : view.final_memory[out.slot]->data()) o.raw.push_back(v.raw);
        }
        o.proof = mem.prove(out.slot);
        c.reveal.outputs.push_back(std::move(o));
    }
    return c;
}

// ---------------------------------------------------------------------------
// game responses
// ---------------------------------------------------------------------------

namespace {

arb::SlotOpening open_slot(const vm::Memory& memory, const MerkleTree& tree, uint32_t slot) {
    arb::SlotOpening o;
    o.slot = slot;
    o.empty = !memory[slot].has_value();
    if (!o.empty) {
        o.shape = memory[slot]->shape();
        for (FixedPoint v : memory[slot]->data()) o.raw.push_back(v.raw);
    }
    o.proof = tree.prove(slot);
    return o;
}

}  // namespace

SimMessage game_response(const ScrutineerProfile& profile, const arb::DisputeGame& game,
                         const vm::Program& program,
                         const std::map<std::string, FixedTensor>& inputs,
                         const ExecutionView* view, uint64_t round) {
    SimMessage m;
    m.round = round + 1;
    m.from = profile.id;
    m.to = "arbiter";
    m.kind = MsgKind::noop;
    m.payload = "{}";

    if (profile.strategy == StrategyKind::silent || profile.strategy == StrategyKind::lazy_copy ||
        view == nullptr)
        return m;  // loses by timeout

    switch (game.awaiting) {
        case arb::MoveKind::halt_reveal: {
            arb::HaltDefense d{vm::commitment_of(program)};
            m.kind = MsgKind::one_step_opening;
            m.payload = arb::halt_defense_to_json(d);
            break;
        }
        case arb::MoveKind::asserter_mid: {
            uint64_t mid = game.mid();
            json p;
            p["game"] = game.id;
            p["mid_hash"] = to_hex(view->state_hashes.at(mid));
            m.kind = MsgKind::bisect_response;
            m.payload = p.dump();
            break;
        }
        case arb::MoveKind::challenger_stance: {
            uint64_t mid = game.mid();
            bool agrees = game.pending_mid && view->state_hashes.at(mid) == *game.pending_mid;
            json p;
            p["game"] = game.id;
            p["agrees"] = agrees;
            m.kind = MsgKind::bisect_response;
            m.payload = p.dump();
            break;
        }
        case arb::MoveKind::one_step_opening: {
            uint64_t i = game.lo;
            vm::VmState s = view_state_at(program, inputs, *view, i);
            MerkleTree mem = vm::memory_tree(s.memory);

            arb::OneStepOpening o;
            o.program = vm::commitment_of(program);
            o.op = program.ops.at(i);
            o.op_proof = program.ops_tree.prove(i);
            o.pc = s.pc;
            o.overflow = s.overflow_flag;
            o.fault = s.fault_flag;
            o.memory_root = mem.root();
            o.slots.push_back(open_slot(s.memory, mem, o.op.a_slot));
            if (o.op.b_slot != UINT32_MAX && o.op.b_slot != o.op.a_slot)
                o.slots.push_back(open_slot(s.memory, mem, o.op.b_slot));
            if (o.op.dest_slot != o.op.a_slot && o.op.dest_slot != o.op.b_slot)
                o.slots.push_back(open_slot(s.memory, mem, o.op.dest_slot));

            json p = json::parse(arb::one_step_opening_to_json(o));
            p["game"] = game.id;
            m.kind = MsgKind::one_step_opening;
            m.payload = p.dump();
            break;
        }
        case arb::MoveKind::none:
            break;
    }
    return m;
}

SimMessage honest_response(const ScrutineerProfile& profile, const arb::DisputeGame& game,
                           const vm::Program& program,
                           const std::map<std::string, FixedTensor>& inputs,
                           const ExecutionView& view, uint64_t round) {
    if (profile.strategy != StrategyKind::honest)
        throw std::logic_error("honest_response called for a non-honest profile");
    return game_response(profile, game, program, inputs, &view, round);
}

SimMessage adversarial_response(const ScrutineerProfile& profile, const arb::DisputeGame& game,
                                const vm::Program& program,
                                const std::map<std::string, FixedTensor>& inputs,
                                const ExecutionView* view, uint64_t round) {
    if (profile.strategy == StrategyKind::honest)
        throw std::logic_error("adversarial_response called for an honest profile");
    return game_response(profile, game, program, inputs, view, round);
}

// ---------------------------------------------------------------------------
// world
// ---------------------------------------------------------------------------

World::World(CommitteeConfig committee, WorldConfig config)
    : committee_(std::move(committee)),
      config_(config),
      arbiter_(config.gas, config.timeout_rounds) {
    if (committee_.profiles.empty())
        throw std::invalid_argument("committee must have at least one member");
}

const ScrutineerProfile* World::profile_of(const std::string& id) const {
    for (const auto& p : committee_.profiles)
        if (p.id == id) return &p;
    return nullptr;
}

const TaskSpec& World::spec_of(const std::string& task_id) const {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw std::runtime_error("unknown task spec: " + task_id);
    return it->second;
}

bool World::lies_about(const ScrutineerProfile& p, const std::string& task_id) const {
    if (p.strategy != StrategyKind::wrong_output) return true;
    if (p.task_filter.empty()) return true;
    return task_id.find(p.task_filter) != std::string::npos;
}

void World::register_task(const TaskSpec& task) {
    if (!task.program) throw std::invalid_argument("task has no program");
    arb::TaskRecord rec;
    rec.task_id = task.task_id;
    rec.program_hash = task.program->program_hash;
    rec.input_hash = vm::input_hash_of(*task.program, task.inputs);
    rec.initial_state_hash = vm::initial_state(*task.program, task.inputs).state_hash;
    rec.slot_count = task.program->slot_count();
    for (const auto& out : task.program->graph.outputs) rec.output_slots.push_back(out.slot);
    rec.open_round = round_;
    rec.close_round = round_ + config_.claim_window_rounds;
    for (const auto& p : committee_.profiles) rec.enrolled.push_back(p.id);
    arbiter_.register_task(std::move(rec));

    tasks_[task.task_id] = task;
    task_order_.push_back(task.task_id);
}

std::shared_ptr<const ExecutionView> World::honest_view_of(const std::string& task_id) {
    auto it = honest_views_.find(task_id);
    if (it != honest_views_.end()) return it->second;
    const TaskSpec& spec = spec_of(task_id);
    auto view = std::make_shared<const ExecutionView>(honest_view(*spec.program, spec.inputs));
    honest_views_[task_id] = view;
    return view;
}

std::shared_ptr<const ExecutionView> World::view_for(const ScrutineerProfile& p,
                                                     const std::string& task_id) {
    PartyTaskState& st = party_state_[p.id][task_id];
    if (st.view) return st.view;
    const TaskSpec& spec = spec_of(task_id);
    switch (p.strategy) {
        case StrategyKind::honest:
            st.view = honest_view_of(task_id);
            break;
        case StrategyKind::wrong_output:
            if (lies_about(p, task_id))
                st.view = std::make_shared<const ExecutionView>(
                    wrong_output_view(*spec.program, spec.inputs, FixedPoint::one()));
            else
                st.view = honest_view_of(task_id);
            break;
        case StrategyKind::corrupt_at_step: {
            uint64_t k = std::min<uint64_t>(p.corrupt_step, spec.program->step_count());
            st.view = std::make_shared<const ExecutionView>(
                fabricated_view(*spec.program, spec.inputs, k));
            break;
        }
        case StrategyKind::lazy_copy:
        case StrategyKind::silent:
            break;
    }
    return st.view;
}

void World::send(std::string from, MsgKind kind, std::string payload) {
    SimMessage m;
    m.round = round_ + 1;
    m.from = std::move(from);
    m.to = "arbiter";
    m.kind = kind;
    m.payload = std::move(payload);
    pending_.push_back(m);
    transcript_.push_back(std::move(m));
}

void World::maybe_claim(const ScrutineerProfile& p, const std::string& task_id) {
    const arb::TaskRecord& rec = arbiter_.task(task_id);
    if (rec.state != arb::TaskState::open) return;
    // The claim must still be inside the window when it arrives next round.
    if (round_ + 1 >= rec.close_round) return;
    PartyTaskState& st = party_state_[p.id][task_id];
    if (st.claimed) return;

    if (p.strategy == StrategyKind::silent) return;

    if (p.strategy == StrategyKind::lazy_copy) {
        // Echo the peer's last claim under this party's name. The peer's
        // claim may already sit with the arbiter or still be in flight from
        // earlier this round.
        auto echo = [&](const arb::Claim& c) {
            arb::Claim copy = c;
            copy.claimant = p.id;
            copy.round = round_ + 1;
            st.claimed = true;
            send(p.id, MsgKind::claim, arb::claim_to_json(copy));
        };
        for (const arb::Claim* c : arbiter_.claims_for_task(task_id)) {
            if (c->claimant == p.peer) {
                echo(*c);
                return;
            }
        }
        for (const auto& m : pending_) {
            if (m.kind != MsgKind::claim || m.from != p.peer) continue;
            arb::Claim c = arb::claim_from_json(m.payload);
            if (c.task_id == task_id) {
                echo(c);
                return;
            }
        }
        return;  // wait for the peer
    }

    const TaskSpec& spec = spec_of(task_id);
    auto view = view_for(p, task_id);
    if (!view) return;
    arb::Claim c = claim_from_view(task_id, p.id, round_ + 1, *spec.program, spec.inputs, *view);
    st.claimed = true;
    send(p.id, MsgKind::claim, arb::claim_to_json(c));
}

void World::respond_to_game(const ScrutineerProfile& p, const arb::DisputeGame& g) {
    auto sig = std::make_tuple(static_cast<int>(g.awaiting), g.lo, g.hi,
                               g.pending_mid.has_value());
    auto it = answered_moves_.find(g.id);
    if (it != answered_moves_.end() && it->second == sig) return;
    answered_moves_[g.id] = sig;

    const TaskSpec& spec = spec_of(g.task_id);
    auto view = view_for(p, g.task_id);
    SimMessage m =
        game_response(p, g, *spec.program, spec.inputs, view ? view.get() : nullptr, round_);
    if (m.kind == MsgKind::noop) {
        transcript_.push_back(m);  // recorded, not delivered: silence
        return;
    }
    // Tag game id into bisect payloads that lack it.
    pending_.push_back(m);
    transcript_.push_back(std::move(m));
}

void World::act_scrutineer(const ScrutineerProfile& p) {
    for (const auto& task_id : task_order_) maybe_claim(p, task_id);
    for (const arb::DisputeGame* g : arbiter_.games_awaiting(p.id)) respond_to_game(p, *g);
}

void World::deliver(const SimMessage& m) {
    try {
        switch (m.kind) {
            case MsgKind::claim: {
                arb::Claim c = arb::claim_from_json(m.payload);
                c.round = round_;
                arbiter_.submit_claim(std::move(c));
                break;
            }
            case MsgKind::bisect_response: {
                json p = json::parse(m.payload);
                uint64_t game_id = p.at("game").get<uint64_t>();
                if (p.contains("mid_hash"))
                    arbiter_.submit_mid(game_id, digest_from_hex(p.at("mid_hash").get<std::string>()),
                                        round_);
                else
                    arbiter_.submit_stance(game_id, p.at("agrees").get<bool>(), round_);
                break;
            }
            case MsgKind::one_step_opening: {
                json p = json::parse(m.payload);
                if (p.value("halt_defense", false)) {
                    uint64_t game_id = p.at("game").get<uint64_t>();
                    arbiter_.submit_halt_defense(game_id, arb::halt_defense_from_json(m.payload),
                                                 round_);
                } else {
                    uint64_t game_id = p.at("game").get<uint64_t>();
                    arbiter_.one_step_verify(game_id, arb::one_step_opening_from_json(m.payload),
                                             round_);
                }
                break;
            }
            case MsgKind::noop:
                break;
        }
    } catch (const arb::ArbiterError&) {
        // Stale or invalid message: a timeout or an earlier verdict beat it,
        // or the claim failed validation. Either way the sender's problem.
        if (m.kind == MsgKind::claim) {
            json p = json::parse(m.payload);
            party_state_[m.from][p.at("task").get<std::string>()].claim_failed = true;
        }
    }
}

void World::prefill_views_parallel() {
    // Collect the (party, task) views this round will need and compute them
    // concurrently; results land in ordered maps afterwards so the outcome
    // is identical to the sequential path.
    std::vector<std::string> need_honest;
    for (const auto& task_id : task_order_) {
        if (arbiter_.task(task_id).state != arb::TaskState::open) continue;
        if (!honest_views_.count(task_id)) need_honest.push_back(task_id);
    }
    std::vector<std::pair<std::string, ExecutionView>> honest_results(need_honest.size());
    std::vector<std::future<void>> jobs;
    for (size_t i = 0; i < need_honest.size(); ++i) {
        jobs.push_back(std::async(std::launch::async, [this, i, &need_honest, &honest_results] {
            const TaskSpec& spec = spec_of(need_honest[i]);
            honest_results[i] = {need_honest[i], honest_view(*spec.program, spec.inputs)};
        }));
    }
    for (auto& j : jobs) j.get();
    for (auto& [task_id, view] : honest_results)
        honest_views_[task_id] = std::make_shared<const ExecutionView>(std::move(view));
}

void World::run_round() {
    // 1. Deliver messages due this round, in send order.
    std::vector<SimMessage> due;
    std::vector<SimMessage> later;
    for (auto& m : pending_) (m.round <= round_ ? due : later).push_back(std::move(m));
    pending_ = std::move(later);
    for (const auto& m : due) deliver(m);

    // 2. The arbiter acts: window closes, move deadlines.
    arbiter_.tick(round_);

    // 3. Scrutineers act in profile order.
    if (config_.parallel) prefill_views_parallel();
    for (const auto& p : committee_.profiles) act_scrutineer(p);

    round_ += 1;
}

void World::run_until_settled() {
    uint64_t start = round_;
    while (true) {
        bool games_open = false;
        for (const auto& t : task_order_)
            for (const arb::DisputeGame* g : arbiter_.games_for_task(t))
                if (g->phase != arb::GamePhase::resolved && g->phase != arb::GamePhase::dismissed)
                    games_open = true;
        if (arbiter_.all_tasks_settled() && !games_open && pending_.empty()) return;
        if (round_ - start > config_.max_rounds_per_batch)
            throw std::runtime_error("committee deadlock: dispute never settled");
        run_round();
    }
}

TaskOutcome World::outcome_of(const std::string& task_id) const {
    const arb::TaskRecord& rec = arbiter_.task(task_id);
    TaskOutcome out;
    out.task_id = task_id;
    out.rounds_used = round_;
    if (rec.state == arb::TaskState::accepted) {
        out.accepted = true;
        out.output_hash = *rec.accepted_output;
        out.outputs = arbiter_.accepted_output_tensors(task_id);
    }
    return out;
}

TaskOutcome World::run_task(const TaskSpec& task) {
    register_task(task);
    run_until_settled();
    return outcome_of(task.task_id);
}

std::vector<TaskOutcome> World::run_tasks(const std::vector<TaskSpec>& tasks) {
    for (const auto& t : tasks) register_task(t);
    run_until_settled();
    std::vector<TaskOutcome> out;
    for (const auto& t : tasks) out.push_back(outcome_of(t.task_id));
    return out;
}

std::string World::transcript_jsonl() const {
    std::string out;
    for (const auto& m : transcript_) {
        out += m.to_json_line();
        out += "\n";
    }
    return out;
}

Digest World::transcript_digest() const { return sha256(transcript_jsonl()); }

}  // namespace dvote::sim
