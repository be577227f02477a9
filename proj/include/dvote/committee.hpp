#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dvote/arbiter.hpp"
#include "dvote/vm.hpp"

namespace dvote::sim {

enum class StrategyKind : uint8_t { honest, wrong_output, corrupt_at_step, lazy_copy, silent };

const char* strategy_name(StrategyKind s);
StrategyKind strategy_from_string(const std::string& s);

struct ScrutineerProfile {
    std::string id;
    std::string affiliation;  // reporting only
    StrategyKind strategy = StrategyKind::honest;
    uint64_t corrupt_step = 0;     // corrupt_at_step: first fabricated state
    std::string peer;              // lazy_copy: whose claims to echo
    std::string task_filter;       // wrong_output: substring of task ids to lie about ("" = all)
};

struct CommitteeConfig {
    std::vector<ScrutineerProfile> profiles;

    // Derived, never set by hand: at least one honest member.
    bool anytrust_holds() const;

    static CommitteeConfig from_json(const std::string& json_text);
};

enum class MsgKind : uint8_t { claim, bisect_response, one_step_opening, noop };

const char* msg_kind_name(MsgKind k);

struct SimMessage {
    uint64_t round = 0;  // delivery round
    std::string from;
    std::string to;
    MsgKind kind = MsgKind::noop;
    std::string payload;  // JSON

    std::string to_json_line() const;
};

// A computation the committee is asked to verify.
struct TaskSpec {
    std::string task_id;
    std::shared_ptr<const vm::Program> program;
    std::map<std::string, FixedTensor> inputs;
};

// One party's view of an execution: the full state-hash sequence it stands
// behind plus the final state (for output reveals). For honest parties this
// is the true execution; for adversaries a fabricated variant that stays
// internally consistent from the corruption point onward. The descriptor
// fields let view_state_at re-derive any interior state on demand.
struct ExecutionView {
    enum class Kind : uint8_t { honest, corrupt, wrong_output };

    std::vector<Digest> state_hashes;  // T+1
    MerkleTree trace_tree;
    vm::Memory final_memory;
    bool overflow = false;
    Digest output_hash{};

    Kind kind = Kind::honest;
    uint64_t corrupt_step = 0;          // first fabricated state index
    bool forced_output_mutation = false;  // final output also perturbed
    int64_t delta_raw = 0;              // wrong_output shift
};

ExecutionView honest_view(const vm::Program& program,
                          const std::map<std::string, FixedTensor>& inputs);

// Fabricates the strongest consistent lie: states match the honest run
// before `corrupt_step`, the state at `corrupt_step` is perturbed, and the
// suffix re-executes faithfully from the perturbed state. If the fabricated
// trace would collide with the honest one at the end, the final output slot
// is also perturbed so the commitments always conflict.
ExecutionView fabricated_view(const vm::Program& program,
                              const std::map<std::string, FixedTensor>& inputs,
                              uint64_t corrupt_step);

// Wrong-output lie: honest trace except the final state, whose first output
// slot is shifted by `delta`.
ExecutionView wrong_output_view(const vm::Program& program,
                                const std::map<std::string, FixedTensor>& inputs,
                                FixedPoint delta);

// State i of the execution a view stands behind.
vm::VmState view_state_at(const vm::Program& program,
                          const std::map<std::string, FixedTensor>& inputs,
                          const ExecutionView& view, uint64_t i);

// Assembles a claim with endpoint proofs and the output reveal from a view.
arb::Claim claim_from_view(const std::string& task_id, const std::string& claimant,
                           uint64_t round, const vm::Program& program,
                           const std::map<std::string, FixedTensor>& inputs,
                           const ExecutionView& view);

struct TaskOutcome {
    std::string task_id;
    bool accepted = false;
    Digest output_hash{};
    std::vector<FixedTensor> outputs;
    uint64_t rounds_used = 0;
};

struct WorldConfig {
    uint64_t claim_window_rounds = 2;
    uint64_t timeout_rounds = 2;
    uint64_t max_rounds_per_batch = 10'000;
    bool parallel = false;
    arb::GasModel gas;
};

// The synchronous committee network. Messages sent in round r are delivered
// at the start of round r+1; scrutineers and the arbiter each act once per
// round; the whole run is a pure function of (config, seed, tasks).
class World {
public:
    World(CommitteeConfig committee, WorldConfig config);

    arb::Arbiter& arbiter() { return arbiter_; }
    const arb::Arbiter& arbiter() const { return arbiter_; }
    const CommitteeConfig& committee() const { return committee_; }
    uint64_t round() const { return round_; }

    void register_task(const TaskSpec& task);

    // Advances one round: deliver, let the arbiter act, let scrutineers act.
    void run_round();

    // Runs rounds until every registered task is settled and every game is
    // resolved. Throws on deadlock (max_rounds_per_batch exceeded).
    void run_until_settled();

    TaskOutcome run_task(const TaskSpec& task);
    std::vector<TaskOutcome> run_tasks(const std::vector<TaskSpec>& tasks);
    TaskOutcome outcome_of(const std::string& task_id) const;

    const std::vector<SimMessage>& transcript() const { return transcript_; }
    std::string transcript_jsonl() const;
    Digest transcript_digest() const;

private:
    struct PartyTaskState {
        bool claimed = false;
        bool claim_failed = false;
        std::shared_ptr<const ExecutionView> view;  // what this party stands behind
    };

    const ScrutineerProfile* profile_of(const std::string& id) const;
    const TaskSpec& spec_of(const std::string& task_id) const;
    bool lies_about(const ScrutineerProfile& p, const std::string& task_id) const;
    std::shared_ptr<const ExecutionView> view_for(const ScrutineerProfile& p,
                                                  const std::string& task_id);
    std::shared_ptr<const ExecutionView> honest_view_of(const std::string& task_id);

    void deliver(const SimMessage& m);
    void send(std::string from, MsgKind kind, std::string payload);
    void act_scrutineer(const ScrutineerProfile& p);
    void maybe_claim(const ScrutineerProfile& p, const std::string& task_id);
    void respond_to_game(const ScrutineerProfile& p, const arb::DisputeGame& g);
    void prefill_views_parallel();

    CommitteeConfig committee_;
    WorldConfig config_;
    arb::Arbiter arbiter_;
    uint64_t round_ = 0;

    std::map<std::string, TaskSpec> tasks_;
    std::vector<std::string> task_order_;
    std::map<std::string, std::shared_ptr<const ExecutionView>> honest_views_;
    std::map<std::string, std::map<std::string, PartyTaskState>> party_state_;  // party -> task
    // Need signature last answered per game, so each request is answered
    // exactly once: (awaiting, lo, hi, mid pending).
    std::map<uint64_t, std::tuple<int, uint64_t, uint64_t, bool>> answered_moves_;

    std::vector<SimMessage> pending_;  // delivery at next round
    std::vector<SimMessage> transcript_;
};

// What a party answers for a game awaiting it, given the execution view it
// stands behind. Honest parties answer from the true execution; adversaries
// from their fabricated one; silent and lazy-copy parties produce noop.
SimMessage game_response(const ScrutineerProfile& profile, const arb::DisputeGame& game,
                         const vm::Program& program,
                         const std::map<std::string, FixedTensor>& inputs,
                         const ExecutionView* view, uint64_t round);

SimMessage honest_response(const ScrutineerProfile& profile, const arb::DisputeGame& game,
                           const vm::Program& program,
                           const std::map<std::string, FixedTensor>& inputs,
                           const ExecutionView& view, uint64_t round);

SimMessage adversarial_response(const ScrutineerProfile& profile, const arb::DisputeGame& game,
                                const vm::Program& program,
                                const std::map<std::string, FixedTensor>& inputs,
                                const ExecutionView* view, uint64_t round);

}  // namespace dvote::sim
