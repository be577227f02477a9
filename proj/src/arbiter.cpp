#include "dvote/arbiter.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "dvote/sha256.hpp"

namespace dvote::arb {

using json = nlohmann::json;

const char* event_kind_name(EventKind k) {
    switch (k) {
        case EventKind::claim_submitted: return "claim-submitted";
        case EventKind::accepted: return "accepted";
        case EventKind::challenge_opened: return "challenge-opened";
        case EventKind::bisection: return "bisection";
        case EventKind::one_step_verified: return "one-step-verified";
        case EventKind::verdict: return "verdict";
        case EventKind::timeout_default: return "timeout-default";
    }
    return "?";
}

std::string LedgerEvent::to_json_line() const {
    json j;
    j["round"] = round;
    j["seq"] = seq;
    j["kind"] = event_kind_name(kind);
    j["payload"] = json::parse(payload);
    j["payload_digest"] = to_hex(payload_digest);
    return j.dump();
}

FixedTensor SlotOpening::tensor() const {
    std::vector<FixedPoint> vals;
    vals.reserve(raw.size());
    for (int64_t r : raw) vals.push_back(FixedPoint::from_raw(r));
    return FixedTensor(shape, std::move(vals));
}

Digest SlotOpening::leaf() const {
    if (empty) return sha256(nullptr, 0);
    return tensor().hash();
}

namespace {

uint32_t tree_height(uint64_t leaves) {
    if (leaves <= 1) return 0;
    uint32_t h = 0;
    uint64_t p = 1;
    while (p < leaves) {
        p <<= 1;
        ++h;
    }
    return h;
}

CommitmentKey key_of(const Claim& c) {
    return CommitmentKey{c.output_hash, c.trace_root, c.step_count};
}

}  // namespace

// ---------------------------------------------------------------------------
// wire forms
// ---------------------------------------------------------------------------

namespace {

json digests_to_json(const std::vector<Digest>& v) {
    json a = json::array();
    for (const auto& d : v) a.push_back(to_hex(d));
    return a;
}

std::vector<Digest> digests_from_json(const json& a) {
    std::vector<Digest> v;
    for (const auto& e : a) v.push_back(digest_from_hex(e.get<std::string>()));
    return v;
}

json slot_opening_to_json(const SlotOpening& s) {
    json j;
    j["slot"] = s.slot;
    j["empty"] = s.empty;
    j["shape"] = s.shape;
    j["raw"] = s.raw;
    j["proof"] = digests_to_json(s.proof);
    return j;
}

SlotOpening slot_opening_from_json(const json& j) {
    SlotOpening s;
    s.slot = j.at("slot").get<uint32_t>();
    s.empty = j.at("empty").get<bool>();
    s.shape = j.at("shape").get<std::vector<uint32_t>>();
    s.raw = j.at("raw").get<std::vector<int64_t>>();
    s.proof = digests_from_json(j.at("proof"));
    return s;
}

json micro_op_to_json(const vm::MicroOp& op) {
    json j;
    j["kind"] = static_cast<int>(op.kind);
    j["a_slot"] = op.a_slot;
    j["b_slot"] = op.b_slot;
    j["dest_slot"] = op.dest_slot;
    j["a_off"] = op.a_off;
    j["b_off"] = op.b_off;
    j["dest_off"] = op.dest_off;
    j["a_stride"] = op.a_stride;
    j["b_stride"] = op.b_stride;
    j["len"] = op.len;
    j["init"] = op.init;
    j["param"] = op.param;
    j["cost"] = op.cost;
    j["dest_shape"] = op.dest_shape;
    return j;
}

vm::MicroOp micro_op_from_json(const json& j) {
    vm::MicroOp op;
    op.kind = static_cast<vm::MicroKind>(j.at("kind").get<int>());
    op.a_slot = j.at("a_slot").get<uint32_t>();
    op.b_slot = j.at("b_slot").get<uint32_t>();
    op.dest_slot = j.at("dest_slot").get<uint32_t>();
    op.a_off = j.at("a_off").get<uint64_t>();
    op.b_off = j.at("b_off").get<uint64_t>();
    op.dest_off = j.at("dest_off").get<uint64_t>();
    op.a_stride = j.at("a_stride").get<uint32_t>();
    op.b_stride = j.at("b_stride").get<uint32_t>();
    op.len = j.at("len").get<uint32_t>();
    op.init = j.at("init").get<bool>();
    op.param = j.at("param").get<int64_t>();
    op.cost = j.at("cost").get<uint32_t>();
    op.dest_shape = j.at("dest_shape").get<std::vector<uint32_t>>();
    return op;
}

json program_commitment_to_json(const vm::ProgramCommitment& p) {
    json j;
    j["step_count"] = p.step_count;
    j["ops_root"] = to_hex(p.ops_root);
    j["slot_count"] = p.slot_count;
    j["layout_digest"] = to_hex(p.layout_digest);
    return j;
}

vm::ProgramCommitment program_commitment_from_json(const json& j) {
    vm::ProgramCommitment p;
    p.step_count = j.at("step_count").get<uint64_t>();
    p.ops_root = digest_from_hex(j.at("ops_root").get<std::string>());
    p.slot_count = j.at("slot_count").get<uint32_t>();
    p.layout_digest = digest_from_hex(j.at("layout_digest").get<std::string>());
    return p;
}

}  // namespace

std::string claim_to_json(const Claim& c) {
    json j;
    j["task"] = c.task_id;
    j["claimant"] = c.claimant;
    j["program_hash"] = to_hex(c.program_hash);
    j["input_hash"] = to_hex(c.input_hash);
    j["output_hash"] = to_hex(c.output_hash);
    j["root"] = to_hex(c.trace_root);
    j["step_count"] = c.step_count;
    j["round"] = c.round;
    j["leaf0"] = to_hex(c.endpoints.leaf0);
    j["proof0"] = digests_to_json(c.endpoints.proof0);
    j["leaf_t"] = to_hex(c.endpoints.leaf_t);
    j["proof_t"] = digests_to_json(c.endpoints.proof_t);
    j["reveal"] = {{"pc", c.reveal.pc},
                   {"overflow", c.reveal.overflow},
                   {"fault", c.reveal.fault},
                   {"memory_root", to_hex(c.reveal.memory_root)}};
    json outs = json::array();
    for (const auto& o : c.reveal.outputs) outs.push_back(slot_opening_to_json(o));
    j["reveal"]["outputs"] = outs;
    return j.dump();
}

Claim claim_from_json(const std::string& text) {
    json j = json::parse(text);
    Claim c;
    c.task_id = j.at("task").get<std::string>();
    c.claimant = j.at("claimant").get<std::string>();
    c.program_hash = digest_from_hex(j.at("program_hash").get<std::string>());
    c.input_hash = digest_from_hex(j.at("input_hash").get<std::string>());
    c.output_hash = digest_from_hex(j.at("output_hash").get<std::string>());
    c.trace_root = digest_from_hex(j.at("root").get<std::string>());
    c.step_count = j.at("step_count").get<uint64_t>();
    c.round = j.at("round").get<uint64_t>();
    c.endpoints.leaf0 = digest_from_hex(j.at("leaf0").get<std::string>());
    c.endpoints.proof0 = digests_from_json(j.at("proof0"));
    c.endpoints.leaf_t = digest_from_hex(j.at("leaf_t").get<std::string>());
    c.endpoints.proof_t = digests_from_json(j.at("proof_t"));
    const json& rv = j.at("reveal");
    c.reveal.pc = rv.at("pc").get<uint64_t>();
    c.reveal.overflow = rv.at("overflow").get<bool>();
    c.reveal.fault = rv.at("fault").get<bool>();
    c.reveal.memory_root = digest_from_hex(rv.at("memory_root").get<std::string>());
    for (const auto& o : rv.at("outputs")) c.reveal.outputs.push_back(slot_opening_from_json(o));
    return c;
}

std::string one_step_opening_to_json(const OneStepOpening& o) {
    json j;
    j["program"] = program_commitment_to_json(o.program);
    j["op"] = micro_op_to_json(o.op);
    j["op_proof"] = digests_to_json(o.op_proof);
    j["pc"] = o.pc;
    j["overflow"] = o.overflow;
    j["fault"] = o.fault;
    j["memory_root"] = to_hex(o.memory_root);
    json slots = json::array();
    for (const auto& s : o.slots) slots.push_back(slot_opening_to_json(s));
    j["slots"] = slots;
    return j.dump();
}

OneStepOpening one_step_opening_from_json(const std::string& text) {
    json j = json::parse(text);
    OneStepOpening o;
    o.program = program_commitment_from_json(j.at("program"));
    o.op = micro_op_from_json(j.at("op"));
    o.op_proof = digests_from_json(j.at("op_proof"));
    o.pc = j.at("pc").get<uint64_t>();
    o.overflow = j.at("overflow").get<bool>();
    o.fault = j.at("fault").get<bool>();
    o.memory_root = digest_from_hex(j.at("memory_root").get<std::string>());
    for (const auto& s : j.at("slots")) o.slots.push_back(slot_opening_from_json(s));
    return o;
}

std::string halt_defense_to_json(const HaltDefense& d) {
    json j;
    j["halt_defense"] = true;
    j["program"] = program_commitment_to_json(d.program);
    return j.dump();
}

HaltDefense halt_defense_from_json(const std::string& text) {
    json j = json::parse(text);
    HaltDefense d;
    d.program = program_commitment_from_json(j.at("program"));
    return d;
}

// ---------------------------------------------------------------------------
// event plumbing
// ---------------------------------------------------------------------------

void Arbiter::append_event(EventKind kind, uint64_t round, const std::string& payload) {
    LedgerEvent ev;
    ev.round = round;
    ev.seq = next_seq_++;
    ev.kind = kind;
    ev.payload = payload;
    ev.payload_digest = sha256(payload);
    ledger_.push_back(std::move(ev));
}

std::string Arbiter::ledger_jsonl() const {
    std::string out;
    for (const auto& ev : ledger_) {
        out += ev.to_json_line();
        out += "\n";
    }
    return out;
}

Digest Arbiter::ledger_digest() const { return sha256(ledger_jsonl()); }

// ---------------------------------------------------------------------------
// registration and claims
// ---------------------------------------------------------------------------

void Arbiter::register_task(TaskRecord task) {
    if (tasks_.count(task.task_id)) throw ArbiterError("task already registered: " + task.task_id);
    if (task.enrolled.empty()) throw ArbiterError("task has no enrolled scrutineers");
    TaskRuntime rt;
    rt.record = std::move(task);
    tasks_.emplace(rt.record.task_id, std::move(rt));
}

Arbiter::TaskRuntime& Arbiter::task_rt(const std::string& task_id) {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw ArbiterError("unknown task: " + task_id);
    return it->second;
}

const TaskRecord& Arbiter::task(const std::string& task_id) const {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw ArbiterError("unknown task: " + task_id);
    return it->second.record;
}

bool Arbiter::has_task(const std::string& task_id) const { return tasks_.count(task_id) > 0; }

std::vector<FixedTensor> Arbiter::accepted_output_tensors(const std::string& task_id) const {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw ArbiterError("unknown task: " + task_id);
    const TaskRuntime& t = it->second;
    if (t.record.state != TaskState::accepted || !t.record.accepted_output)
        throw ArbiterError("task has no accepted result: " + task_id);
    for (const auto& c : t.claims) {
        if (c.output_hash != *t.record.accepted_output) continue;
        std::vector<FixedTensor> out;
        for (const auto& o : c.reveal.outputs) out.push_back(o.tensor());
        return out;
    }
    throw ArbiterError("no claim carries the accepted output: " + task_id);
}

CommitmentKey Arbiter::accepted_commitment(const std::string& task_id) const {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw ArbiterError("unknown task: " + task_id);
    const TaskRuntime& t = it->second;
    if (t.record.state != TaskState::accepted || !t.record.accepted_output)
        throw ArbiterError("task has no accepted result: " + task_id);
    for (const auto& c : t.claims)
        if (!claim_voided(c) && c.output_hash == *t.record.accepted_output)
            return key_of(c);
    throw ArbiterError("no claim carries the accepted output: " + task_id);
}

void Arbiter::submit_claim(Claim claim) {
    TaskRuntime& t = task_rt(claim.task_id);
    const TaskRecord& rec = t.record;

    if (rec.state != TaskState::open) throw ArbiterError("claim window closed: " + claim.task_id);
    if (claim.round < rec.open_round || claim.round >= rec.close_round)
        throw ArbiterError("claim window closed: " + claim.task_id);
    if (std::find(rec.enrolled.begin(), rec.enrolled.end(), claim.claimant) == rec.enrolled.end())
        throw ArbiterError("claimant not enrolled: " + claim.claimant);
    for (const auto& c : t.claims)
        if (c.claimant == claim.claimant)
            throw ArbiterError("duplicate claim by " + claim.claimant + " for " + claim.task_id);

    if (claim.program_hash != rec.program_hash)
        throw ArbiterError("claim program hash does not match task");
    if (claim.input_hash != rec.input_hash)
        throw ArbiterError("claim input hash does not match task");

    // Endpoint openings: the committed trace must start at the registered
    // initial state and both endpoints must live under the claimed root.
    uint32_t h = tree_height(claim.step_count + 1);
    if (claim.endpoints.proof0.size() != h || claim.endpoints.proof_t.size() != h)
        throw ArbiterError("endpoint proof length does not match claimed step count");
    if (!merkle_verify(claim.endpoints.leaf0, 0, claim.endpoints.proof0, claim.trace_root))
        throw ArbiterError("leaf-0 proof does not verify against claimed root");
    if (!merkle_verify(claim.endpoints.leaf_t, claim.step_count, claim.endpoints.proof_t,
                       claim.trace_root))
        throw ArbiterError("final-state proof does not verify against claimed root");
    if (claim.endpoints.leaf0 != rec.initial_state_hash)
        throw ArbiterError("input-hash mismatch: trace does not start at the committed inputs");

    // Output reveal: the claimed output hash must be derived from the claimed
    // final state. A fault trace carries no acceptable output.
    const OutputReveal& rv = claim.reveal;
    if (rv.fault) throw ArbiterError("claim carries a fault trace");
    if (vm::state_hash_of(rv.pc, rv.overflow, rv.fault, rv.memory_root) != claim.endpoints.leaf_t)
        throw ArbiterError("output reveal does not match the claimed final state");
    if (rv.outputs.size() != rec.output_slots.size())
        throw ArbiterError("output reveal does not cover the task's output slots");
    uint32_t mem_height = tree_height(rec.slot_count);
    std::vector<uint8_t> out_buf;
    for (size_t k = 0; k < rv.outputs.size(); ++k) {
        const SlotOpening& o = rv.outputs[k];
        if (o.slot != rec.output_slots[k])
            throw ArbiterError("output reveal slot order does not match the task");
        if (o.empty) throw ArbiterError("claimed final state has an empty output slot");
        if (o.proof.size() != mem_height ||
            !merkle_verify(o.leaf(), o.slot, o.proof, rv.memory_root))
            throw ArbiterError("output slot opening does not verify");
        std::vector<uint8_t> ser = o.tensor().serialize();
        put_u32le(out_buf, o.slot);
        put_u64le(out_buf, ser.size());
        put_bytes(out_buf, ser.data(), ser.size());
    }
    if (sha256(out_buf) != claim.output_hash)
        throw ArbiterError("output hash does not match the revealed output slots");

    json payload;
    payload["task"] = claim.task_id;
    payload["claimant"] = claim.claimant;
    payload["output_hash"] = to_hex(claim.output_hash);
    payload["root"] = to_hex(claim.trace_root);
    payload["step_count"] = claim.step_count;
    payload["round"] = claim.round;
    append_event(EventKind::claim_submitted, claim.round, payload.dump());

    t.claims.push_back(std::move(claim));
}

std::vector<const Claim*> Arbiter::claims_for_task(const std::string& task_id) const {
    auto it = tasks_.find(task_id);
    if (it == tasks_.end()) throw ArbiterError("unknown task: " + task_id);
    std::vector<const Claim*> out;
    for (const auto& c : it->second.claims) out.push_back(&c);
    return out;
}

bool Arbiter::claim_voided(const Claim& c) const {
    auto it = voided_by_task_.find(c.task_id);
    if (it == voided_by_task_.end()) return false;
    return it->second.count(key_of(c)) > 0;
}

// Distinct surviving commitments in first-submission order, each with its
// earliest surviving claimant as representative.
std::vector<std::pair<CommitmentKey, const Claim*>> Arbiter::surviving_groups(
    const TaskRuntime& t) const {
    std::vector<std::pair<CommitmentKey, const Claim*>> groups;
    for (const auto& c : t.claims) {
        if (claim_voided(c)) continue;
        CommitmentKey k = key_of(c);
        bool found = false;
        for (auto& g : groups)
            if (g.first == k) {
                found = true;
                break;
            }
        if (!found) groups.emplace_back(k, &c);
    }
    return groups;
}

// ---------------------------------------------------------------------------
// finalization
// ---------------------------------------------------------------------------

bool Arbiter::finalize_task(const std::string& task_id, uint64_t round) {
    TaskRuntime& t = task_rt(task_id);
    if (t.record.state != TaskState::open)
        throw ArbiterError("task already finalized: " + task_id);
    if (round < t.record.close_round)
        throw ArbiterError("claim window still open: " + task_id);

    // Enrolled scrutineers that never claimed have timed out.
    for (const auto& member : t.record.enrolled) {
        bool claimed = false;
        for (const auto& c : t.claims)
            if (c.claimant == member) claimed = true;
        if (!claimed) {
            json payload;
            payload["context"] = "claim-window";
            payload["task"] = task_id;
            payload["party"] = member;
            append_event(EventKind::timeout_default, round, payload.dump());
        }
    }

    t.record.state = TaskState::deciding;
    reevaluate(t, round);
    return t.record.state == TaskState::accepted;
}

void Arbiter::accept_task(TaskRuntime& t, const Digest& output_hash, uint64_t round) {
    t.record.state = TaskState::accepted;
    t.record.accepted_output = output_hash;
    json payload;
    payload["task"] = t.record.task_id;
    payload["output_hash"] = to_hex(output_hash);
    payload["recompute_gas"] = t.record.recompute_gas;
    append_event(EventKind::accepted, round, payload.dump());
}

bool Arbiter::pair_dismissed(const TaskRuntime& t, const CommitmentKey& a,
                             const CommitmentKey& b) const {
    for (const auto& [x, y] : t.dismissed_pairs)
        if ((x == a && y == b) || (x == b && y == a)) return true;
    return false;
}

void Arbiter::reevaluate(TaskRuntime& t, uint64_t round) {
    if (t.record.state != TaskState::deciding) return;

    auto groups = surviving_groups(t);
    if (groups.empty()) {
        t.record.state = TaskState::failed;
        return;
    }

    bool outputs_agree = true;
    for (const auto& g : groups)
        if (g.first.output_hash != groups[0].first.output_hash) outputs_agree = false;

    bool games_running = false;
    for (const auto& g : games_)
        if (g.task_id == t.record.task_id && g.phase != GamePhase::resolved &&
            g.phase != GamePhase::dismissed)
            games_running = true;

    if (groups.size() == 1 || (outputs_agree && !games_running)) {
        // Either unanimity or every remaining disagreement was dismissed as
        // output-equivalent.
        bool all_pairs_settled = true;
        for (size_t i = 0; i + 1 < groups.size() && all_pairs_settled; ++i)
            for (size_t j = i + 1; j < groups.size(); ++j)
                if (!pair_dismissed(t, groups[i].first, groups[j].first)) {
                    all_pairs_settled = false;
                    break;
                }
        if (groups.size() == 1 || all_pairs_settled) {
            accept_task(t, groups[0].first.output_hash, round);
            return;
        }
    }

    // Conflicts remain: one game per distinct disputed commitment against the
    // first-submitted conflicting claim. In submission order that pairs group
    // 0 with group 1 and every later group with group 0.
    for (size_t k = 0; k < groups.size(); ++k) {
        size_t opp = k == 0 ? 1 : 0;
        const CommitmentKey& ka = groups[k].first;
        const CommitmentKey& kb = groups[opp].first;
        if (ka == kb || pair_dismissed(t, ka, kb)) continue;
        auto norm = std::minmax(groups[k].second->claimant, groups[opp].second->claimant);
        if (t.played_pairs.count({norm.first, norm.second})) continue;
        // The earlier submitter defends as asserter.
        const Claim* first = groups[std::min(k, opp)].second;
        const Claim* second = groups[std::max(k, opp)].second;
        open_challenge(t.record.task_id, first->claimant, second->claimant, round);
    }
}

// ---------------------------------------------------------------------------
// dispute games
// ---------------------------------------------------------------------------

DisputeGame& Arbiter::game_rt(uint64_t id) {
    if (id == 0 || id > games_.size()) throw ArbiterError("unknown game id");
    return games_[id - 1];
}

const DisputeGame& Arbiter::game(uint64_t id) const {
    if (id == 0 || id > games_.size()) throw ArbiterError("unknown game id");
    return games_[id - 1];
}

std::vector<const DisputeGame*> Arbiter::games_for_task(const std::string& task_id) const {
    std::vector<const DisputeGame*> out;
    for (const auto& g : games_)
        if (g.task_id == task_id) out.push_back(&g);
    return out;
}

std::vector<const DisputeGame*> Arbiter::games_awaiting(const std::string& party) const {
    std::vector<const DisputeGame*> out;
    for (const auto& g : games_)
        if (g.awaiting != MoveKind::none && g.awaited_party == party) out.push_back(&g);
    return out;
}

uint64_t Arbiter::open_challenge(const std::string& task_id, const std::string& asserter,
                                 const std::string& challenger, uint64_t round) {
    TaskRuntime& t = task_rt(task_id);
    const Claim* ca = nullptr;
    const Claim* cc = nullptr;
    for (const auto& c : t.claims) {
        if (c.claimant == asserter) ca = &c;
        if (c.claimant == challenger) cc = &c;
    }
    if (!ca || !cc) throw ArbiterError("both parties must have submitted claims");
    if (key_of(*ca) == key_of(*cc))
        throw ArbiterError("claims do not conflict: " + asserter + " vs " + challenger);
    auto norm = std::minmax(asserter, challenger);
    if (t.played_pairs.count({norm.first, norm.second}))
        throw ArbiterError("game already exists for pair");
    t.played_pairs.insert({norm.first, norm.second});

    DisputeGame g;
    g.id = games_.size() + 1;
    g.task_id = task_id;
    g.asserter = asserter;
    g.challenger = challenger;
    g.asserter_commit = key_of(*ca);
    g.challenger_commit = key_of(*cc);
    g.lo = 0;
    g.lo_hash = t.record.initial_state_hash;
    g.hi = ca->step_count;
    g.hi_hash = ca->endpoints.leaf_t;

    if (ca->step_count != cc->step_count) {
        // Unequal step counts: the shorter-claiming party must first defend
        // its halting step by revealing the program commitment preimage.
        g.phase = GamePhase::halt_check;
        g.awaiting = MoveKind::halt_reveal;
        g.awaited_party = ca->step_count < cc->step_count ? asserter : challenger;
    } else if (cc->endpoints.leaf_t == ca->endpoints.leaf_t) {
        // The parties agree on the final state, so they agree on the outputs
        // (output openings were checked against the final state at claim
        // time); only interior states differ. The disagreement carries no
        // decidable execution fault, so the challenge is dismissed as
        // output-equivalent rather than adjudicated.
        g.phase = GamePhase::bisecting;
        games_.push_back(g);
        json payload;
        payload["task"] = task_id;
        payload["game"] = g.id;
        payload["asserter"] = asserter;
        payload["challenger"] = challenger;
        payload["window"] = {g.lo, g.hi};
        append_event(EventKind::challenge_opened, round, payload.dump());
        dismiss(games_.back(), round);
        reevaluate(t, round);
        return g.id;
    } else if (ca->step_count == 1) {
        g.phase = GamePhase::one_step;
        g.awaiting = MoveKind::one_step_opening;
        g.awaited_party = asserter;
    } else {
        g.phase = GamePhase::bisecting;
        g.awaiting = MoveKind::asserter_mid;
        g.awaited_party = asserter;
    }
    g.move_deadline = round + timeout_rounds_;
    games_.push_back(g);

    json payload;
    payload["task"] = task_id;
    payload["game"] = g.id;
    payload["asserter"] = asserter;
    payload["challenger"] = challenger;
    payload["asserter_step_count"] = g.asserter_commit.step_count;
    payload["challenger_step_count"] = g.challenger_commit.step_count;
    payload["window"] = {g.lo, g.hi};
    append_event(EventKind::challenge_opened, round, payload.dump());
    return g.id;
}

void Arbiter::resolve(DisputeGame& g, Verdict v, const std::string& reason, uint64_t round) {
    g.phase = GamePhase::resolved;
    g.verdict = v;
    g.verdict_reason = reason;
    g.awaiting = MoveKind::none;
    g.awaited_party.clear();
    g.pending_mid.reset();

    json payload;
    payload["game"] = g.id;
    payload["task"] = g.task_id;
    payload["winner"] = v == Verdict::asserter_wins ? "asserter-wins" : "challenger-wins";
    payload["reason"] = reason;
    payload["rounds_elapsed"] = g.rounds_elapsed;
    payload["gas_charged"] = g.gas_charged;
    append_event(EventKind::verdict, round, payload.dump());

    apply_verdict_effects(g, round);
}

void Arbiter::dismiss(DisputeGame& g, uint64_t round) {
    g.phase = GamePhase::dismissed;
    g.awaiting = MoveKind::none;
    g.awaited_party.clear();

    TaskRuntime& t = task_rt(g.task_id);
    t.dismissed_pairs.emplace_back(g.asserter_commit, g.challenger_commit);

    json payload;
    payload["game"] = g.id;
    payload["task"] = g.task_id;
    payload["winner"] = "dismissed";
    payload["reason"] = "output-equivalent commitments";
    payload["rounds_elapsed"] = g.rounds_elapsed;
    append_event(EventKind::verdict, round, payload.dump());
}

void Arbiter::void_commitment(TaskRuntime& t, const CommitmentKey& key, uint64_t round) {
    (void)round;
    voided_by_task_[t.record.task_id].insert(key);
    for (const auto& c : t.claims) {
        if (key_of(c) == key && !voided_.count(c.claimant)) {
            voided_.insert(c.claimant);
            voided_order_.push_back(c.claimant);
        }
    }
}

void Arbiter::apply_verdict_effects(DisputeGame& g, uint64_t round) {
    TaskRuntime& t = task_rt(g.task_id);
    const CommitmentKey& losing =
        *g.verdict == Verdict::asserter_wins ? g.challenger_commit : g.asserter_commit;
    void_commitment(t, losing, round);
    reevaluate(t, round);
}

void Arbiter::submit_halt_defense(uint64_t game_id, const HaltDefense& defense, uint64_t round) {
    DisputeGame& g = game_rt(game_id);
    if (g.phase != GamePhase::halt_check || g.awaiting != MoveKind::halt_reveal)
        throw ArbiterError("game is not awaiting a halt defense");
    TaskRuntime& t = task_rt(g.task_id);

    const std::string& shorter = g.awaited_party;
    uint64_t shorter_count = std::min(g.asserter_commit.step_count, g.challenger_commit.step_count);
    bool shorter_is_asserter = shorter == g.asserter;

    g.rounds_elapsed += 1;
    if (defense.program.hash() != t.record.program_hash) {
        resolve(g, shorter_is_asserter ? Verdict::challenger_wins : Verdict::asserter_wins,
                "halt defense: program commitment reveal does not match", round);
        return;
    }
    if (defense.program.step_count == shorter_count) {
        // The program really halts where the shorter party claimed, so the
        // longer claim is impossible.
        resolve(g, shorter_is_asserter ? Verdict::asserter_wins : Verdict::challenger_wins,
                "halt defense: longer claim exceeds the committed step count", round);
    } else {
        resolve(g, shorter_is_asserter ? Verdict::challenger_wins : Verdict::asserter_wins,
                "halt defense: claimed halting step is not the committed one", round);
    }
}

void Arbiter::submit_mid(uint64_t game_id, const Digest& mid_hash, uint64_t round) {
    DisputeGame& g = game_rt(game_id);
    if (g.phase != GamePhase::bisecting || g.awaiting != MoveKind::asserter_mid)
        throw ArbiterError("game is not awaiting a mid-state hash");
    g.pending_mid = mid_hash;
    g.awaiting = MoveKind::challenger_stance;
    g.awaited_party = g.challenger;
    g.move_deadline = round + timeout_rounds_;
}

void Arbiter::submit_stance(uint64_t game_id, bool agrees, uint64_t round) {
    DisputeGame& g = game_rt(game_id);
    if (g.awaiting != MoveKind::challenger_stance || !g.pending_mid)
        throw ArbiterError("game is not awaiting a challenger stance");
    Digest mid_hash = *g.pending_mid;
    g.pending_mid.reset();
    g.awaiting = MoveKind::none;
    bisect(game_id, mid_hash, agrees, round);
}

void Arbiter::bisect(uint64_t game_id, const Digest& asserter_mid_hash, bool challenger_agrees,
                     uint64_t round) {
    DisputeGame& g = game_rt(game_id);
    if (g.phase != GamePhase::bisecting) throw ArbiterError("game is not in the bisecting phase");
    if (g.awaiting == MoveKind::challenger_stance)
        throw ArbiterError("out-of-turn bisection: a mid hash is already pending");
    uint64_t mid = g.mid();
    if (!(g.lo < mid && mid < g.hi)) throw ArbiterError("window too narrow to bisect");

    if (challenger_agrees) {
        g.lo = mid;
        g.lo_hash = asserter_mid_hash;
    } else {
        g.hi = mid;
        g.hi_hash = asserter_mid_hash;
    }
    g.rounds_elapsed += 1;

    json payload;
    payload["game"] = g.id;
    payload["mid"] = mid;
    payload["mid_hash"] = to_hex(asserter_mid_hash);
    payload["agrees"] = challenger_agrees;
    payload["window"] = {g.lo, g.hi};
    append_event(EventKind::bisection, round, payload.dump());

    if (g.hi - g.lo == 1) {
        g.phase = GamePhase::one_step;
        g.awaiting = MoveKind::one_step_opening;
    } else {
        g.awaiting = MoveKind::asserter_mid;
    }
    g.awaited_party = g.asserter;
    g.move_deadline = round + timeout_rounds_;
}

Verdict Arbiter::one_step_verify(uint64_t game_id, const OneStepOpening& opening, uint64_t round) {
    DisputeGame& g = game_rt(game_id);
    if (g.phase != GamePhase::one_step) throw ArbiterError("game is not in the one-step phase");
    TaskRuntime& t = task_rt(g.task_id);

    g.rounds_elapsed += 1;
    uint64_t gas = 0;
    uint64_t proof_digests = 0;

    auto asserter_loses = [&](const std::string& reason) -> Verdict {
        g.gas_charged += gas;
        t.record.recompute_gas += gas;
        resolve(g, Verdict::challenger_wins, reason, round);
        return Verdict::challenger_wins;
    };

    // 1. Program commitment reveal.
    if (opening.program.hash() != t.record.program_hash)
        return asserter_loses("one-step: program commitment reveal does not match");
    uint64_t i = g.lo;
    if (i >= opening.program.step_count)
        return asserter_loses("one-step: disputed step beyond committed program length");

    // 2. The opcode claimed at pc = i must live in the committed program.
    proof_digests += opening.op_proof.size();
    if (opening.op_proof.size() != tree_height(opening.program.step_count) ||
        !merkle_verify(opening.op.hash(), i, opening.op_proof, opening.program.ops_root))
        return asserter_loses("one-step: op does not match program commitment at pc");

    // 3. Pre-state opening must hash to the agreed state.
    if (opening.pc != i) return asserter_loses("one-step: opened pc is not the agreed step");
    if (vm::state_hash_of(opening.pc, opening.overflow, opening.fault, opening.memory_root) !=
        g.lo_hash)
        return asserter_loses("one-step: pre-state opening does not match the agreed hash");

    // 4. Slot openings for everything the op touches.
    uint32_t mem_height = tree_height(t.record.slot_count);
    std::vector<uint32_t> needed;
    needed.push_back(opening.op.a_slot);
    if (opening.op.b_slot != UINT32_MAX) needed.push_back(opening.op.b_slot);
    needed.push_back(opening.op.dest_slot);

    vm::Memory mem(t.record.slot_count);
    std::set<uint32_t> opened;
    for (const auto& slot : opening.slots) {
        if (slot.slot >= t.record.slot_count)
            return asserter_loses("one-step: slot opening out of range");
        proof_digests += slot.proof.size();
        if (slot.proof.size() != mem_height ||
            !merkle_verify(slot.leaf(), slot.slot, slot.proof, opening.memory_root))
            return asserter_loses("one-step: slot opening proof failed");
        if (!slot.empty) mem[slot.slot] = slot.tensor();
        opened.insert(slot.slot);
    }
    for (uint32_t s : needed)
        if (!opened.count(s)) return asserter_loses("one-step: missing slot opening");

    // 5. Re-execute the single micro-op.
    vm::StepEffect eff = vm::apply_micro_op(opening.op, mem);
    gas += gas_.micro_op_gas(opening.op);
    gas += gas_.proof_gas(proof_digests);

    Digest next_root = opening.memory_root;
    bool next_fault = opening.fault;
    bool next_overflow = opening.overflow;
    if (eff.fault) {
        next_fault = true;  // memory unchanged
    } else {
        next_overflow = next_overflow || eff.overflow;
        // Recompute the memory root along the written slot's opened path.
        const SlotOpening* dest = nullptr;
        for (const auto& s : opening.slots)
            if (s.slot == eff.written_slot) dest = &s;
        if (!dest) return asserter_loses("one-step: written slot was not opened");
        next_root =
            merkle_root_from_proof(vm::slot_leaf_hash(mem[eff.written_slot]), dest->slot, dest->proof);
    }
    Digest next_hash = vm::state_hash_of(i + 1, next_overflow, next_fault, next_root);

    bool matches = next_hash == g.hi_hash;
    g.gas_charged += gas;
    t.record.recompute_gas += gas;

    json payload;
    payload["game"] = g.id;
    payload["pc"] = i;
    payload["op"] = vm::micro_kind_name(opening.op.kind);
    payload["gas"] = gas;
    payload["matches"] = matches;
    append_event(EventKind::one_step_verified, round, payload.dump());

    Verdict v = matches ? Verdict::asserter_wins : Verdict::challenger_wins;
    resolve(g, v,
            matches ? "one-step: re-execution confirms the asserted transition"
                    : "one-step: re-execution contradicts the asserted transition",
            round);
    return v;
}

void Arbiter::timeout(uint64_t game_id, uint64_t round) {
    DisputeGame& g = game_rt(game_id);
    if (g.phase == GamePhase::resolved || g.phase == GamePhase::dismissed)
        throw ArbiterError("game already resolved");
    if (g.awaiting == MoveKind::none) throw ArbiterError("game is not awaiting a move");

    json payload;
    payload["context"] = "dispute";
    payload["game"] = g.id;
    payload["party"] = g.awaited_party;
    append_event(EventKind::timeout_default, round, payload.dump());

    bool silent_is_asserter = g.awaited_party == g.asserter;
    resolve(g, silent_is_asserter ? Verdict::challenger_wins : Verdict::asserter_wins,
            "timeout: " + g.awaited_party + " missed its response deadline", round);
}

void Arbiter::tick(uint64_t round) {
    // Close claim windows that are due.
    for (auto& [id, t] : tasks_) {
        if (t.record.state == TaskState::open && round >= t.record.close_round)
            finalize_task(id, round);
    }
    // Default overdue moves. Index loop: timeouts can cascade into newly
    // opened games, which are never overdue in the same round.
    for (size_t i = 0; i < games_.size(); ++i) {
        DisputeGame& g = games_[i];
        if (g.phase == GamePhase::resolved || g.phase == GamePhase::dismissed) continue;
        if (g.awaiting != MoveKind::none && round >= g.move_deadline) timeout(g.id, round);
    }
}

bool Arbiter::all_tasks_settled() const {
    for (const auto& [id, t] : tasks_)
        if (t.record.state == TaskState::open || t.record.state == TaskState::deciding)
            return false;
    return true;
}

// ---------------------------------------------------------------------------
// digests and replay
// ---------------------------------------------------------------------------

Digest Arbiter::state_digest() const {
    json j;
    json tasks = json::array();
    for (const auto& [id, t] : tasks_) {
        json tj;
        tj["task"] = id;
        tj["state"] = static_cast<int>(t.record.state);
        tj["accepted_output"] =
            t.record.accepted_output ? to_hex(*t.record.accepted_output) : "";
        tj["recompute_gas"] = t.record.recompute_gas;
        json claims = json::array();
        for (const auto& c : t.claims) {
            claims.push_back({{"claimant", c.claimant},
                              {"output", to_hex(c.output_hash)},
                              {"root", to_hex(c.trace_root)},
                              {"steps", c.step_count},
                              {"voided", claim_voided(c)}});
        }
        tj["claims"] = claims;
        tasks.push_back(tj);
    }
    j["tasks"] = tasks;
    json games = json::array();
    for (const auto& g : games_) {
        games.push_back({{"id", g.id},
                         {"task", g.task_id},
                         {"asserter", g.asserter},
                         {"challenger", g.challenger},
                         {"lo", g.lo},
                         {"hi", g.hi},
                         {"phase", static_cast<int>(g.phase)},
                         {"rounds", g.rounds_elapsed},
                         {"verdict", g.verdict ? (int)*g.verdict : -1},
                         {"gas", g.gas_charged}});
    }
    j["games"] = games;
    j["voided"] = voided_order_;
    return sha256(j.dump());
}

Arbiter Arbiter::replay(GasModel gas, uint64_t timeout_rounds, std::vector<TaskRecord> tasks,
                        const std::vector<LedgerEvent>& events) {
    // Replays the public move sequence recorded in the ledger through the
    // same state machine. Claims are re-submitted from claimant runtimes in
    // the live system; here the recorded payloads drive a reduced apply path
    // good enough to reproduce the digested state.
    Arbiter a(gas, timeout_rounds);
    for (auto& t : tasks) a.register_task(std::move(t));

    for (const auto& ev : events) {
        json p = json::parse(ev.payload);
        switch (ev.kind) {
            case EventKind::claim_submitted: {
                TaskRuntime& t = a.task_rt(p.at("task").get<std::string>());
                Claim c;
                c.task_id = t.record.task_id;
                c.claimant = p.at("claimant").get<std::string>();
                c.program_hash = t.record.program_hash;
                c.input_hash = t.record.input_hash;
                c.output_hash = digest_from_hex(p.at("output_hash").get<std::string>());
                c.trace_root = digest_from_hex(p.at("root").get<std::string>());
                c.step_count = p.at("step_count").get<uint64_t>();
                c.round = p.at("round").get<uint64_t>();
                t.claims.push_back(std::move(c));
                break;
            }
            case EventKind::challenge_opened: {
                TaskRuntime& t = a.task_rt(p.at("task").get<std::string>());
                std::string asserter = p.at("asserter").get<std::string>();
                std::string challenger = p.at("challenger").get<std::string>();
                const Claim* ca = nullptr;
                const Claim* cc = nullptr;
                for (const auto& c : t.claims) {
                    if (c.claimant == asserter) ca = &c;
                    if (c.claimant == challenger) cc = &c;
                }
                DisputeGame g;
                g.id = a.games_.size() + 1;
                g.task_id = t.record.task_id;
                g.asserter = asserter;
                g.challenger = challenger;
                g.asserter_commit = key_of(*ca);
                g.challenger_commit = key_of(*cc);
                g.lo = p.at("window")[0].get<uint64_t>();
                g.hi = p.at("window")[1].get<uint64_t>();
                g.phase = ca->step_count != cc->step_count ? GamePhase::halt_check
                          : ca->step_count == 1            ? GamePhase::one_step
                                                           : GamePhase::bisecting;
                auto norm = std::minmax(asserter, challenger);
                t.played_pairs.insert({norm.first, norm.second});
                a.games_.push_back(g);
                break;
            }
            case EventKind::bisection: {
                DisputeGame& g = a.game_rt(p.at("game").get<uint64_t>());
                g.lo = p.at("window")[0].get<uint64_t>();
                g.hi = p.at("window")[1].get<uint64_t>();
                g.rounds_elapsed += 1;
                if (g.hi - g.lo == 1) g.phase = GamePhase::one_step;
                break;
            }
            case EventKind::one_step_verified: {
                DisputeGame& g = a.game_rt(p.at("game").get<uint64_t>());
                g.rounds_elapsed += 1;
                break;
            }
            case EventKind::verdict: {
                DisputeGame& g = a.game_rt(p.at("game").get<uint64_t>());
                std::string winner = p.at("winner").get<std::string>();
                g.rounds_elapsed = p.at("rounds_elapsed").get<uint32_t>();
                if (p.contains("gas_charged")) {
                    uint64_t total = p.at("gas_charged").get<uint64_t>();
                    a.task_rt(g.task_id).record.recompute_gas += total - g.gas_charged;
                    g.gas_charged = total;
                }
                if (winner == "dismissed") {
                    g.phase = GamePhase::dismissed;
                    a.task_rt(g.task_id)
                        .dismissed_pairs.emplace_back(g.asserter_commit, g.challenger_commit);
                } else {
                    g.phase = GamePhase::resolved;
                    g.verdict =
                        winner == "asserter-wins" ? Verdict::asserter_wins : Verdict::challenger_wins;
                    g.verdict_reason = p.at("reason").get<std::string>();
                    TaskRuntime& t = a.task_rt(g.task_id);
                    const CommitmentKey losing = *g.verdict == Verdict::asserter_wins
                                                     ? g.challenger_commit
                                                     : g.asserter_commit;
                    a.void_commitment(t, losing, ev.round);
                }
                break;
            }
            case EventKind::accepted: {
                TaskRuntime& t = a.task_rt(p.at("task").get<std::string>());
                t.record.state = TaskState::accepted;
                t.record.accepted_output = digest_from_hex(p.at("output_hash").get<std::string>());
                break;
            }
            case EventKind::timeout_default:
                if (p.value("context", "") == "claim-window") {
                    TaskRuntime& t = a.task_rt(p.at("task").get<std::string>());
                    if (t.record.state == TaskState::open) t.record.state = TaskState::deciding;
                }
                break;
        }
        if (ev.kind == EventKind::challenge_opened) {
            TaskRuntime& t = a.task_rt(p.at("task").get<std::string>());
            if (t.record.state == TaskState::open) t.record.state = TaskState::deciding;
        }
        // Keep the replayed ledger identical to the source.
        a.ledger_.push_back(ev);
        a.next_seq_ = ev.seq + 1;
    }

    // Settle tasks that finalization decided without an accept event: a
    // deciding task with no live games and no surviving claims failed.
    for (auto& [id, t] : a.tasks_) {
        if (t.record.state != TaskState::deciding) continue;
        bool running = false;
        for (const auto& g : a.games_)
            if (g.task_id == id && g.phase != GamePhase::resolved &&
                g.phase != GamePhase::dismissed)
                running = true;
        if (!running && a.surviving_groups(t).empty()) t.record.state = TaskState::failed;
    }
    return a;
}

}  // namespace dvote::arb
