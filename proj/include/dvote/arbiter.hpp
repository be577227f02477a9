#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dvote/digest.hpp"
#include "dvote/gas.hpp"
#include "dvote/program.hpp"
#include "dvote/vm.hpp"

namespace dvote::arb {

class ArbiterError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Slot opening: a slot's full contents (or its emptiness) plus a membership
// proof against the memory root it is opened under.
struct SlotOpening {
    uint32_t slot = 0;
    bool empty = true;
    std::vector<uint32_t> shape;
    std::vector<int64_t> raw;  // Q16.16 raw values
    std::vector<Digest> proof;

    FixedTensor tensor() const;
    Digest leaf() const;
};

// Endpoint opening a claimant attaches to its claim: the first and last
// state hashes of its committed trace with membership proofs against the
// claimed root. The leaf-0 check is what rejects corrupt-initial-state
// claims at the door.
struct EndpointOpenings {
    Digest leaf0{};
    std::vector<Digest> proof0;
    Digest leaf_t{};
    std::vector<Digest> proof_t;
};

// Binds the claimed output hash to the claimed final state: reveals the
// final state-hash preimage and opens the task's output slots against its
// memory root. Claims that agree on the final state therefore agree on the
// outputs.
struct OutputReveal {
    uint64_t pc = 0;
    bool overflow = false;
    bool fault = false;
    Digest memory_root{};
    std::vector<SlotOpening> outputs;  // task's output slots, in order
};

struct Claim {
    std::string task_id;
    std::string claimant;
    Digest program_hash{};
    Digest input_hash{};
    Digest output_hash{};
    Digest trace_root{};
    uint64_t step_count = 0;
    uint64_t round = 0;
    EndpointOpenings endpoints;
    OutputReveal reveal;
};

// The commitment a claim binds its claimant to; claims conflict when these
// triples differ.
struct CommitmentKey {
    Digest output_hash{};
    Digest trace_root{};
    uint64_t step_count = 0;

    auto operator<=>(const CommitmentKey&) const = default;
};

enum class GamePhase : uint8_t { halt_check, bisecting, one_step, resolved, dismissed };
enum class Verdict : uint8_t { asserter_wins, challenger_wins };

// What a game is waiting for, and from whom.
enum class MoveKind : uint8_t { none, halt_reveal, asserter_mid, challenger_stance, one_step_opening };

struct DisputeGame {
    uint64_t id = 0;
    std::string task_id;
    std::string asserter;
    std::string challenger;
    CommitmentKey asserter_commit;
    CommitmentKey challenger_commit;

    uint64_t lo = 0;
    uint64_t hi = 0;
    Digest lo_hash{};  // agreed by both parties
    Digest hi_hash{};  // asserter's claim, disputed by the challenger

    GamePhase phase = GamePhase::bisecting;
    uint32_t rounds_elapsed = 0;
    std::optional<Verdict> verdict;
    std::string verdict_reason;

    MoveKind awaiting = MoveKind::none;
    std::string awaited_party;
    uint64_t move_deadline = 0;
    std::optional<Digest> pending_mid;

    uint64_t gas_charged = 0;

    uint64_t mid() const { return (lo + hi) / 2; }
};

enum class EventKind : uint8_t {
    claim_submitted,
    accepted,
    challenge_opened,
    bisection,
    one_step_verified,
    verdict,
    timeout_default,
};

const char* event_kind_name(EventKind k);

struct LedgerEvent {
    uint64_t round = 0;
    uint64_t seq = 0;
    EventKind kind;
    std::string payload;  // canonical JSON
    Digest payload_digest{};

    std::string to_json_line() const;
};

enum class TaskState : uint8_t { open, deciding, accepted, failed };

struct TaskRecord {
    std::string task_id;
    Digest program_hash{};
    Digest input_hash{};
    Digest initial_state_hash{};
    uint32_t slot_count = 0;             // fixes memory-proof heights
    std::vector<uint32_t> output_slots;  // which slots the output hash covers
    uint64_t open_round = 0;
    uint64_t close_round = 0;
    std::vector<std::string> enrolled;

    TaskState state = TaskState::open;
    std::optional<Digest> accepted_output;
    uint64_t recompute_gas = 0;  // stays 0 on the unanimity path
};

// Everything the asserter reveals to let the arbiter re-execute exactly one
// micro-op: the program commitment preimage, the opcode with its membership
// proof, and the pre-state opening.
struct OneStepOpening {
    vm::ProgramCommitment program;
    vm::MicroOp op;
    std::vector<Digest> op_proof;

    uint64_t pc = 0;
    bool overflow = false;
    bool fault = false;
    Digest memory_root{};
    std::vector<SlotOpening> slots;
};

struct HaltDefense {
    vm::ProgramCommitment program;
};

// JSON wire forms for everything scrutineers send; the transcript is
// JSON-lines of these payloads.
std::string claim_to_json(const Claim& c);
Claim claim_from_json(const std::string& text);
std::string one_step_opening_to_json(const OneStepOpening& o);
OneStepOpening one_step_opening_from_json(const std::string& text);
std::string halt_defense_to_json(const HaltDefense& d);
HaltDefense halt_defense_from_json(const std::string& text);

// The simulated layer-1 contract. A single logical state machine: claims
// come in, unanimous tasks are accepted without re-computation, conflicting
// commitments fight pairwise dispute games that end in one-step
// re-execution. Every mutation flows through an appended ledger event, so
// replaying the ledger over the same task registrations reconstructs the
// same state.
class Arbiter {
public:
    explicit Arbiter(GasModel gas = {}, uint64_t timeout_rounds = 2)
        : gas_(gas), timeout_rounds_(timeout_rounds) {}

    // --- registration (genesis data, not evented) ---
    void register_task(TaskRecord task);

    // --- claims ---
    void submit_claim(Claim claim);

    // Closes the window, marks silent scrutineers, accepts unanimous results
    // or opens dispute games. Returns true when the task reached the
    // accepted state immediately.
    bool finalize_task(const std::string& task_id, uint64_t round);

    // --- dispute moves (called by the simulation when responses arrive) ---
    uint64_t open_challenge(const std::string& task_id, const std::string& asserter,
                            const std::string& challenger, uint64_t round);
    void submit_halt_defense(uint64_t game_id, const HaltDefense& defense, uint64_t round);
    void submit_mid(uint64_t game_id, const Digest& mid_hash, uint64_t round);
    void submit_stance(uint64_t game_id, bool agrees, uint64_t round);
    // Combined bisection step, usable directly when both moves are in hand.
    void bisect(uint64_t game_id, const Digest& asserter_mid_hash, bool challenger_agrees,
                uint64_t round);
    Verdict one_step_verify(uint64_t game_id, const OneStepOpening& opening, uint64_t round);
    void timeout(uint64_t game_id, uint64_t round);

    // Applies window closes and move deadlines for the given round.
    void tick(uint64_t round);

    // --- queries ---
    const TaskRecord& task(const std::string& task_id) const;
    bool has_task(const std::string& task_id) const;
    // Output tensors of the accepted result, taken from a matching claim's
    // validated output reveal. Only valid on accepted tasks.
    std::vector<FixedTensor> accepted_output_tensors(const std::string& task_id) const;
    // The full commitment triple behind an accepted task.
    CommitmentKey accepted_commitment(const std::string& task_id) const;
    const DisputeGame& game(uint64_t id) const;
    std::vector<const DisputeGame*> games_for_task(const std::string& task_id) const;
    std::vector<const DisputeGame*> games_awaiting(const std::string& party) const;
    std::vector<const Claim*> claims_for_task(const std::string& task_id) const;
    bool all_tasks_settled() const;
    const std::vector<std::string>& voided_scrutineers() const { return voided_order_; }
    bool is_voided(const std::string& scrutineer) const { return voided_.count(scrutineer) > 0; }

    const std::vector<LedgerEvent>& ledger() const { return ledger_; }
    std::string ledger_jsonl() const;
    Digest ledger_digest() const;
    Digest state_digest() const;
    const GasModel& gas_model() const { return gas_; }

    GasEstimate estimate_gas(uint64_t flops) const { return gas_.estimate(flops); }

    // Rebuilds arbiter state from task registrations plus a ledger.
    static Arbiter replay(GasModel gas, uint64_t timeout_rounds, std::vector<TaskRecord> tasks,
                          const std::vector<LedgerEvent>& events);

private:
    struct TaskRuntime {
        TaskRecord record;
        std::vector<Claim> claims;  // submission order
        std::set<std::pair<std::string, std::string>> played_pairs;  // claimant pairs
        std::vector<std::pair<CommitmentKey, CommitmentKey>> dismissed_pairs;
    };

    void append_event(EventKind kind, uint64_t round, const std::string& payload);
    void resolve(DisputeGame& g, Verdict v, const std::string& reason, uint64_t round);
    void dismiss(DisputeGame& g, uint64_t round);
    void void_commitment(TaskRuntime& t, const CommitmentKey& key, uint64_t round);
    // Re-groups surviving claims; opens new games or accepts.
    void reevaluate(TaskRuntime& t, uint64_t round);
    void accept_task(TaskRuntime& t, const Digest& output_hash, uint64_t round);
    std::vector<std::pair<CommitmentKey, const Claim*>> surviving_groups(
        const TaskRuntime& t) const;
    bool claim_voided(const Claim& c) const;
    void apply_verdict_effects(DisputeGame& g, uint64_t round);
    bool pair_dismissed(const TaskRuntime& t, const CommitmentKey& a,
                        const CommitmentKey& b) const;

    TaskRuntime& task_rt(const std::string& task_id);
    DisputeGame& game_rt(uint64_t id);

    GasModel gas_;
    uint64_t timeout_rounds_;
    std::map<std::string, TaskRuntime> tasks_;
    // deque: games hold references across reentrant reevaluation.
    std::deque<DisputeGame> games_;
    std::vector<LedgerEvent> ledger_;
    std::map<std::string, std::set<CommitmentKey>> voided_by_task_;
    std::set<std::string> voided_;
    std::vector<std::string> voided_order_;
    uint64_t next_seq_ = 0;
};

}  // namespace dvote::arb
