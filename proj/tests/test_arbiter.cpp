#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dvote/arbiter.hpp"
#include "dvote/committee.hpp"
#include "dvote/models.hpp"
#include "dvote/rng.hpp"
#include "dvote/sha256.hpp"

using namespace dvote;
using namespace dvote::arb;
using dvote::sim::ExecutionView;

namespace {

struct Fixture {
    std::shared_ptr<vm::Program> program;
    std::map<std::string, FixedTensor> inputs;
    ExecutionView honest;

    TaskRecord task(const std::string& id, std::vector<std::string> enrolled,
                    uint64_t open = 0, uint64_t close = 10) const {
        TaskRecord rec;
        rec.task_id = id;
        rec.program_hash = program->program_hash;
        rec.input_hash = vm::input_hash_of(*program, inputs);
        rec.initial_state_hash = vm::initial_state(*program, inputs).state_hash;
        rec.slot_count = program->slot_count();
        for (const auto& o : program->graph.outputs) rec.output_slots.push_back(o.slot);
        rec.open_round = open;
        rec.close_round = close;
        rec.enrolled = std::move(enrolled);
        return rec;
    }

    Claim claim(const std::string& task_id, const std::string& who, const ExecutionView& view,
                uint64_t round = 1) const {
        return sim::claim_from_view(task_id, who, round, *program, inputs, view);
    }
};

// The "1+1=3" fixture: a one-micro-op program summing [1, 1].
Fixture add_fixture() {
    vm::GraphBuilder b;
    b.mark_output("sum", b.sum_reduce(b.add_input("x", {1, 2})));
    Fixture f;
    f.program = std::make_shared<vm::Program>(vm::Program::compile(b.finish()));
    f.inputs = {{"x", FixedTensor({1, 2}, {FixedPoint::one(), FixedPoint::one()})}};
    f.honest = sim::honest_view(*f.program, f.inputs);
    return f;
}

// A deeper fixture with T = 8 steps for bisection games.
Fixture chain_fixture(uint64_t seed = 1) {
    vm::GraphBuilder b;
    vm::ValueId x = b.add_input("x", {1, 6});
    vm::ValueId c = x;
    for (int i = 0; i < 7; ++i) c = b.scalar_mul(b.relu(c), fp_from_string("1.25"));
    // 7 relu + 7 scalar blocks would be 14; trim to exactly 8 by rebuilding.
    (void)c;
    vm::GraphBuilder b2;
    x = b2.add_input("x", {1, 6});
    c = x;
    for (int i = 0; i < 8; ++i)
        c = (i % 2 == 0) ? b2.relu(c) : b2.scalar_mul(c, fp_from_string("1.25"));
    b2.mark_output("out", c);
    Fixture f;
    f.program = std::make_shared<vm::Program>(vm::Program::compile(b2.finish()));
    REQUIRE(f.program->step_count() == 8);
    FixedTensor in({1, 6});
    Rng rng(seed);
    for (size_t i = 0; i < in.size(); ++i)
        in.set(i, FixedPoint::from_raw(rng.range(-3 << 16, 3 << 16)));
    f.inputs = {{"x", in}};
    f.honest = sim::honest_view(*f.program, f.inputs);
    return f;
}

// Plays one game to resolution, both parties answering from their views.
Verdict play_game(Arbiter& arb, uint64_t game_id, const Fixture& f, const ExecutionView& asserter,
                  const ExecutionView& challenger, uint64_t round = 50) {
    while (true) {
        const DisputeGame& g = arb.game(game_id);
        if (g.phase == GamePhase::resolved) return *g.verdict;
        REQUIRE(g.phase != GamePhase::dismissed);
        const ExecutionView& responder = g.awaited_party == g.asserter ? asserter : challenger;
        switch (g.awaiting) {
            case MoveKind::halt_reveal:
                arb.submit_halt_defense(game_id, HaltDefense{vm::commitment_of(*f.program)},
                                        round);
                break;
            case MoveKind::asserter_mid:
                arb.submit_mid(game_id, responder.state_hashes.at(g.mid()), round);
                break;
            case MoveKind::challenger_stance:
                arb.submit_stance(game_id,
                                  responder.state_hashes.at(g.mid()) == *g.pending_mid, round);
                break;
            case MoveKind::one_step_opening: {
                sim::ScrutineerProfile p;
                p.id = g.awaited_party;
                sim::SimMessage m =
                    sim::game_response(p, g, *f.program, f.inputs, &responder, round);
                OneStepOpening o = one_step_opening_from_json(m.payload);
                arb.one_step_verify(game_id, o, round);
                break;
            }
            case MoveKind::none:
                FAIL("game stuck with no awaited move");
        }
    }
}

}  // namespace

TEST_CASE("gas estimate reproduces the reference numbers") {
    GasModel gas;
    GasEstimate e = gas.estimate(30'000'000'000ULL);
    CHECK(e.gas == 90'000'000'000ULL);
    CHECK(e.full_blocks() == 3000);
    CHECK(e.remainder() == 0);

    GasEstimate one = gas.estimate(10'000'000);
    CHECK(one.gas == 30'000'000);
    CHECK(one.full_blocks() == 1);
    CHECK(one.remainder() == 0);

    CHECK_THROWS_AS(gas.estimate(0), std::invalid_argument);
}

TEST_CASE("claim submission rules") {
    Fixture f = add_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"s1", "s2"}));

    size_t before = arb.ledger().size();
    arb.submit_claim(f.claim("t", "s1", f.honest));
    CHECK(arb.ledger().size() == before + 1);

    CHECK_THROWS_WITH_AS(arb.submit_claim(f.claim("t", "s1", f.honest)),
                         doctest::Contains("duplicate claim"), ArbiterError);
    CHECK_THROWS_WITH_AS(arb.submit_claim(f.claim("bogus", "s2", f.honest)),
                         doctest::Contains("unknown task"), ArbiterError);

    Claim late = f.claim("t", "s2", f.honest, 99);
    CHECK_THROWS_WITH_AS(arb.submit_claim(late), doctest::Contains("window closed"), ArbiterError);

    Claim stranger = f.claim("t", "nobody", f.honest);
    CHECK_THROWS_WITH_AS(arb.submit_claim(stranger), doctest::Contains("not enrolled"),
                         ArbiterError);
}

TEST_CASE("claims with a corrupted initial state are rejected at the door") {
    Fixture f = chain_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"good", "evil"}));

    ExecutionView bad = sim::fabricated_view(*f.program, f.inputs, 0);
    Claim c = f.claim("t", "evil", bad);
    CHECK_THROWS_WITH_AS(arb.submit_claim(c), doctest::Contains("input-hash mismatch"),
                         ArbiterError);
}

TEST_CASE("claims must bind outputs to the final state") {
    Fixture f = chain_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"s1"}));

    Claim c = f.claim("t", "s1", f.honest);
    c.output_hash = sha256(std::string("unrelated"));
    CHECK_THROWS_WITH_AS(arb.submit_claim(c), doctest::Contains("output hash"), ArbiterError);
}

TEST_CASE("finalize: unanimity accepts without re-computation") {
    Fixture f = add_fixture();
    Arbiter arb;
    std::vector<std::string> members{"s1", "s2", "s3", "s4", "s5"};
    arb.register_task(f.task("t", members));
    for (const auto& m : members) arb.submit_claim(f.claim("t", m, f.honest));

    CHECK(arb.finalize_task("t", 10));
    const TaskRecord& rec = arb.task("t");
    CHECK(rec.state == TaskState::accepted);
    CHECK(*rec.accepted_output == f.honest.output_hash);
    CHECK(rec.recompute_gas == 0);
    CHECK_THROWS_WITH_AS(arb.finalize_task("t", 11), doctest::Contains("already finalized"),
                         ArbiterError);

    // Accepted output values are recoverable and hash-checked.
    auto outs = arb.accepted_output_tensors("t");
    REQUIRE(outs.size() == 1);
    CHECK(outs[0].at(0).raw == 2 << 16);  // 1 + 1 = 2
}

TEST_CASE("finalize: a lone dissenter opens exactly one game") {
    Fixture f = chain_fixture();
    Arbiter arb;
    std::vector<std::string> members{"s1", "s2", "s3", "s4", "s5"};
    arb.register_task(f.task("t", members));
    ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, 5);
    for (int i = 0; i < 4; ++i) arb.submit_claim(f.claim("t", members[i], f.honest));
    arb.submit_claim(f.claim("t", "s5", liar));

    CHECK_FALSE(arb.finalize_task("t", 10));
    CHECK(arb.task("t").state == TaskState::deciding);
    CHECK(arb.games_for_task("t").size() == 1);
    const DisputeGame& g = *arb.games_for_task("t")[0];
    CHECK(g.asserter == "s1");
    CHECK(g.challenger == "s5");
    CHECK(g.lo == 0);
    CHECK(g.hi == 8);
}

TEST_CASE("finalize: unanimous wrong claims are accepted (AnyTrust boundary)") {
    Fixture f = chain_fixture();
    Arbiter arb;
    std::vector<std::string> members;
    for (int i = 0; i < 10; ++i) members.push_back("liar" + std::to_string(i));
    arb.register_task(f.task("t", members));
    ExecutionView wrong = sim::wrong_output_view(*f.program, f.inputs, FixedPoint::one());
    for (const auto& m : members) arb.submit_claim(f.claim("t", m, wrong));

    CHECK(arb.finalize_task("t", 10));
    CHECK(*arb.task("t").accepted_output == wrong.output_hash);
    CHECK(*arb.task("t").accepted_output != f.honest.output_hash);
    CHECK(arb.task("t").recompute_gas == 0);
}

TEST_CASE("open_challenge preconditions and the 1+1=3 game") {
    Fixture f = add_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"honest", "liar"}));
    ExecutionView liar = sim::wrong_output_view(*f.program, f.inputs, FixedPoint::one());

    arb.submit_claim(f.claim("t", "honest", f.honest));
    arb.submit_claim(f.claim("t", "liar", liar));

    // 1 + 1 claimed as 3.
    auto outs = liar.final_memory[f.program->graph.outputs[0].slot];
    CHECK(outs->at(0).raw == 3 << 16);

    uint64_t gid = arb.open_challenge("t", "liar", "honest", 2);
    const DisputeGame& g = arb.game(gid);
    CHECK(g.lo == 0);
    CHECK(g.hi == 1);
    CHECK(g.phase == GamePhase::one_step);  // immediately, window [0,1]

    CHECK_THROWS_WITH_AS(arb.open_challenge("t", "liar", "honest", 2),
                         doctest::Contains("game already exists"), ArbiterError);

    Verdict v = play_game(arb, gid, f, liar, f.honest);
    CHECK(v == Verdict::challenger_wins);
    CHECK(arb.is_voided("liar"));
    CHECK(arb.game(gid).rounds_elapsed == 1);
    CHECK(arb.game(gid).rounds_elapsed <= 1);  // ceil(log2(1)) + 1
}

TEST_CASE("open_challenge rejects agreeing claims") {
    Fixture f = add_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"a", "b"}));
    arb.submit_claim(f.claim("t", "a", f.honest));
    arb.submit_claim(f.claim("t", "b", f.honest));
    CHECK_THROWS_WITH_AS(arb.open_challenge("t", "a", "b", 2),
                         doctest::Contains("do not conflict"), ArbiterError);
}

TEST_CASE("bisect window moves follow the challenger's stance") {
    Fixture f = chain_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"a", "b"}));
    ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, 3);
    arb.submit_claim(f.claim("t", "a", f.honest));
    arb.submit_claim(f.claim("t", "b", liar));

    uint64_t gid = arb.open_challenge("t", "a", "b", 2);
    REQUIRE(arb.game(gid).phase == GamePhase::bisecting);

    SUBCASE("disagreement narrows left") {
        arb.bisect(gid, f.honest.state_hashes[4], false, 3);
        CHECK(arb.game(gid).lo == 0);
        CHECK(arb.game(gid).hi == 4);
    }
    SUBCASE("agreement narrows right") {
        arb.bisect(gid, f.honest.state_hashes[4], true, 3);
        CHECK(arb.game(gid).lo == 4);
        CHECK(arb.game(gid).hi == 8);
    }
}

TEST_CASE("honest challenger localizes a fault at step 5 of 8 in 3 bisections") {
    Fixture f = chain_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"liar", "hon"}));
    ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, 5);
    arb.submit_claim(f.claim("t", "liar", liar));
    arb.submit_claim(f.claim("t", "hon", f.honest));

    uint64_t gid = arb.open_challenge("t", "liar", "hon", 2);
    uint64_t bisections = 0;
    while (arb.game(gid).phase == GamePhase::bisecting) {
        const DisputeGame& g = arb.game(gid);
        uint64_t mid = g.mid();
        bool agrees = f.honest.state_hashes[mid] == liar.state_hashes[mid];
        arb.bisect(gid, liar.state_hashes[mid], agrees, 3);
        ++bisections;
    }
    CHECK(bisections == 3);  // log2(8)
    const DisputeGame& g = arb.game(gid);
    CHECK(g.phase == GamePhase::one_step);
    // First divergent state is 5: window must be [4, 5].
    CHECK(g.lo == 4);
    CHECK(g.hi == 5);

    Verdict v = play_game(arb, gid, f, liar, f.honest);
    CHECK(v == Verdict::challenger_wins);
    CHECK(arb.game(gid).rounds_elapsed == 4);  // 3 bisections + 1 one-step
    CHECK(arb.game(gid).rounds_elapsed <= uint64_t(std::ceil(std::log2(8))) + 1);
}

TEST_CASE("one-step: honest asserter survives a spurious challenge") {
    Fixture f = chain_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"hon", "liar"}));
    ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, 6);
    arb.submit_claim(f.claim("t", "hon", f.honest));
    arb.submit_claim(f.claim("t", "liar", liar));

    uint64_t gid = arb.open_challenge("t", "hon", "liar", 2);
    Verdict v = play_game(arb, gid, f, f.honest, liar);
    CHECK(v == Verdict::asserter_wins);
    CHECK(arb.is_voided("liar"));
    CHECK_FALSE(arb.is_voided("hon"));
}

TEST_CASE("one-step gas stays tiny compared to the block limit") {
    Fixture f = chain_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"liar", "hon"}));
    ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, 2);
    arb.submit_claim(f.claim("t", "liar", liar));
    arb.submit_claim(f.claim("t", "hon", f.honest));
    uint64_t gid = arb.open_challenge("t", "liar", "hon", 2);
    play_game(arb, gid, f, liar, f.honest);

    const DisputeGame& g = arb.game(gid);
    uint64_t proof_bound =
        arb.gas_model().proof_unit_cost *
        (3 * 8 + 8);  // 3 slot proofs + 1 op proof, heights <= 8 at this scale
    CHECK(g.gas_charged > 0);
    CHECK(g.gas_charged <= vm::kMaxOpCost + proof_bound);
    CHECK(g.gas_charged < arb.gas_model().block_gas_limit);
    CHECK(arb.task("t").recompute_gas == g.gas_charged);
}

TEST_CASE("timeouts default against the silent party") {
    Fixture f = chain_fixture();

    SUBCASE("silent asserter loses") {
        Arbiter arb;
        arb.register_task(f.task("t", {"liar", "hon"}));
        ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, 4);
        arb.submit_claim(f.claim("t", "liar", liar));
        arb.submit_claim(f.claim("t", "hon", f.honest));
        uint64_t gid = arb.open_challenge("t", "liar", "hon", 2);
        // Deadline is open round + 2; silence until round 4.
        arb.tick(3);
        CHECK(arb.game(gid).phase != GamePhase::resolved);
        arb.tick(4);
        CHECK(arb.game(gid).phase == GamePhase::resolved);
        CHECK(*arb.game(gid).verdict == Verdict::challenger_wins);
        CHECK_THROWS_WITH_AS(arb.timeout(gid, 5), doctest::Contains("already resolved"),
                             ArbiterError);
    }

    SUBCASE("silent challenger loses") {
        Arbiter arb;
        arb.register_task(f.task("t", {"hon", "liar"}));
        ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, 4);
        arb.submit_claim(f.claim("t", "hon", f.honest));
        arb.submit_claim(f.claim("t", "liar", liar));
        uint64_t gid = arb.open_challenge("t", "hon", "liar", 2);
        arb.submit_mid(gid, f.honest.state_hashes[4], 3);
        arb.tick(5);  // challenger stance was due by round 5
        CHECK(arb.game(gid).phase == GamePhase::resolved);
        CHECK(*arb.game(gid).verdict == Verdict::asserter_wins);
    }
}

TEST_CASE("unequal step counts resolve through the halt defense") {
    Fixture f = chain_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"short", "hon"}));

    // A liar claiming the program halts early: truncate the honest view.
    ExecutionView shorty = f.honest;
    shorty.state_hashes.resize(5);  // claims T = 4
    shorty.trace_tree = MerkleTree(shorty.state_hashes);
    vm::VmState s4 = vm::state_at(*f.program, f.inputs, 4);
    shorty.final_memory = s4.memory;
    // Output slot is still empty at step 4; fake it so the claim validates.
    shorty.final_memory[f.program->graph.outputs[0].slot] = FixedTensor({1, 6});
    shorty.state_hashes[4] = [&] {
        vm::VmState s = s4;
        s.memory = shorty.final_memory;
        s.rehash();
        return s.state_hash;
    }();
    shorty.trace_tree = MerkleTree(shorty.state_hashes);
    shorty.output_hash = vm::output_hash_of(*f.program, shorty.final_memory);

    arb.submit_claim(sim::claim_from_view("t", "short", 1, *f.program, f.inputs, shorty));
    arb.submit_claim(f.claim("t", "hon", f.honest));

    uint64_t gid = arb.open_challenge("t", "short", "hon", 2);
    CHECK(arb.game(gid).phase == GamePhase::halt_check);
    CHECK(arb.game(gid).awaited_party == "short");

    // The genuine program commitment proves T = 8, so the short claim dies.
    arb.submit_halt_defense(gid, HaltDefense{vm::commitment_of(*f.program)}, 3);
    CHECK(arb.game(gid).phase == GamePhase::resolved);
    CHECK(*arb.game(gid).verdict == Verdict::challenger_wins);
    CHECK(arb.is_voided("short"));
}

TEST_CASE("root-only conflicts with an agreed final state are dismissed") {
    Fixture f = chain_fixture();
    Arbiter arb;
    arb.register_task(f.task("t", {"weird", "hon"}));

    // Same outputs and final state, different interior hash: an undecidable
    // but harmless commitment.
    ExecutionView weird = f.honest;
    weird.state_hashes[3][0] ^= 0x5a;
    weird.trace_tree = MerkleTree(weird.state_hashes);

    arb.submit_claim(sim::claim_from_view("t", "weird", 1, *f.program, f.inputs, weird));
    arb.submit_claim(f.claim("t", "hon", f.honest));
    // The pair is dismissed as output-equivalent during finalization and the
    // shared output is accepted immediately, with nobody voided.
    CHECK(arb.finalize_task("t", 10));
    CHECK(arb.task("t").state == TaskState::accepted);
    CHECK(*arb.task("t").accepted_output == f.honest.output_hash);
    CHECK_FALSE(arb.is_voided("weird"));
    CHECK_FALSE(arb.is_voided("hon"));
    REQUIRE(arb.games_for_task("t").size() == 1);
    CHECK(arb.games_for_task("t")[0]->phase == GamePhase::dismissed);
}

TEST_CASE("dispute soundness property: honest parties never lose") {
    // Randomized fault positions across randomized programs, honest party on
    // both sides of the table.
    int games_played = 0;
    for (uint64_t seed = 0; seed < 12; ++seed) {
        Fixture f = chain_fixture(derive_seed("soundness", seed));
        uint64_t T = f.program->step_count();
        Rng rng(derive_seed("fault-pos", seed));
        uint64_t k = 1 + rng.below(T);
        ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, k);

        bool liar_asserts = seed % 2 == 0;
        Arbiter arb;
        arb.register_task(f.task("t", {"p0", "p1"}));
        arb.submit_claim(f.claim("t", "p0", liar_asserts ? liar : f.honest));
        arb.submit_claim(f.claim("t", "p1", liar_asserts ? f.honest : liar));
        uint64_t gid = arb.open_challenge("t", "p0", "p1", 2);
        Verdict v = play_game(arb, gid, f, liar_asserts ? liar : f.honest,
                              liar_asserts ? f.honest : liar);
        CHECK(v == (liar_asserts ? Verdict::challenger_wins : Verdict::asserter_wins));
        CHECK(arb.game(gid).rounds_elapsed <= uint64_t(std::ceil(std::log2(double(T)))) + 1);
        ++games_played;
    }
    CHECK(games_played == 12);
}

TEST_CASE("ledger is append-only, exportable and replayable") {
    Fixture f = chain_fixture();
    Arbiter arb;
    std::vector<std::string> members{"a", "b", "c"};
    arb.register_task(f.task("t", members));
    ExecutionView liar = sim::fabricated_view(*f.program, f.inputs, 6);
    arb.submit_claim(f.claim("t", "a", f.honest));
    arb.submit_claim(f.claim("t", "b", liar));
    // c stays silent.
    arb.finalize_task("t", 10);
    uint64_t gid = arb.games_for_task("t")[0]->id;
    play_game(arb, gid, f, f.honest, liar);
    CHECK(arb.task("t").state == TaskState::accepted);

    // Sequence numbers are strictly increasing.
    for (size_t i = 1; i < arb.ledger().size(); ++i)
        CHECK(arb.ledger()[i].seq > arb.ledger()[i - 1].seq);

    // JSON-lines export: one line per event.
    std::string jsonl = arb.ledger_jsonl();
    size_t lines = std::count(jsonl.begin(), jsonl.end(), '\n');
    CHECK(lines == arb.ledger().size());

    // Replaying the ledger over the same registrations reproduces the state.
    Arbiter replayed = Arbiter::replay(arb.gas_model(), 2, {f.task("t", members)}, arb.ledger());
    CHECK(replayed.state_digest() == arb.state_digest());
    CHECK(replayed.ledger_digest() == arb.ledger_digest());
}
