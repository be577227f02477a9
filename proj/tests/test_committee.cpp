#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dvote/committee.hpp"
#include "dvote/models.hpp"
#include "dvote/rng.hpp"

using namespace dvote;
using namespace dvote::sim;

namespace {

TaskSpec small_task(const std::string& id, uint64_t seed) {
    vm::GraphBuilder b;
    vm::ValueId x = b.add_input("x", {1, 4});
    vm::ValueId w = b.add_input("w", {4, 3});
    vm::ValueId h = b.relu(b.matmul(x, w));
    b.mark_output("out", b.sum_reduce(h));
    TaskSpec t;
    t.task_id = id;
    t.program = std::make_shared<const vm::Program>(vm::Program::compile(b.finish()));
    Rng rng(seed);
    FixedTensor xv({1, 4}), wv({4, 3});
    for (size_t i = 0; i < xv.size(); ++i)
        xv.set(i, FixedPoint::from_raw(rng.range(-2 << 16, 2 << 16)));
    for (size_t i = 0; i < wv.size(); ++i)
        wv.set(i, FixedPoint::from_raw(rng.range(-2 << 16, 2 << 16)));
    t.inputs = {{"x", xv}, {"w", wv}};
    return t;
}

ScrutineerProfile prof(const std::string& id, StrategyKind s) {
    ScrutineerProfile p;
    p.id = id;
    p.affiliation = "party-" + id;
    p.strategy = s;
    return p;
}

CommitteeConfig honest_committee(int n) {
    CommitteeConfig cfg;
    for (int i = 0; i < n; ++i) cfg.profiles.push_back(prof("s" + std::to_string(i), StrategyKind::honest));
    return cfg;
}

}  // namespace

TEST_CASE("committee config parsing and the derived anytrust flag") {
    CommitteeConfig cfg = CommitteeConfig::from_json(R"({"scrutineers":[
        {"id":"gov","affiliation":"government","strategy":"honest"},
        {"id":"oppo","affiliation":"opposition","strategy":"wrong-output",
         "params":{"task_filter":"sig"}},
        {"id":"court","strategy":"corrupt-at-step","params":{"corrupt_step":3}},
        {"id":"press","strategy":"lazy-copy","params":{"peer":"gov"}},
        {"id":"ghost","strategy":"silent"}]})");
    REQUIRE(cfg.profiles.size() == 5);
    CHECK(cfg.anytrust_holds());
    CHECK(cfg.profiles[1].task_filter == "sig");
    CHECK(cfg.profiles[2].corrupt_step == 3);
    CHECK(cfg.profiles[3].peer == "gov");

    CommitteeConfig no_honest = CommitteeConfig::from_json(R"({"scrutineers":[
        {"id":"a","strategy":"silent"},{"id":"b","strategy":"wrong-output"}]})");
    CHECK_FALSE(no_honest.anytrust_holds());

    CHECK_THROWS(CommitteeConfig::from_json(R"({"scrutineers":[]})"));
    CHECK_THROWS(CommitteeConfig::from_json(R"({"scrutineers":[{"id":"x","strategy":"evil"}]})"));
}

TEST_CASE("all-honest committee accepts unanimously within 3 rounds") {
    World w(honest_committee(5), WorldConfig{});
    TaskOutcome out = w.run_task(small_task("t0", 7));
    CHECK(out.accepted);
    CHECK(w.round() <= 3);
    CHECK(w.arbiter().voided_scrutineers().empty());
    CHECK(w.arbiter().task("t0").recompute_gas == 0);

    ExecutionView oracle = honest_view(*small_task("t0", 7).program, small_task("t0", 7).inputs);
    CHECK(out.output_hash == oracle.output_hash);
}

TEST_CASE("empty round only advances the counter") {
    World w(honest_committee(3), WorldConfig{});
    uint64_t r = w.round();
    size_t transcript = w.transcript().size();
    w.run_round();
    CHECK(w.round() == r + 1);
    CHECK(w.transcript().size() == transcript);
    CHECK(w.arbiter().ledger().empty());
}

TEST_CASE("7 of 10 dishonest: the lone truth still wins") {
    CommitteeConfig cfg;
    for (int i = 0; i < 7; ++i)
        cfg.profiles.push_back(prof("liar" + std::to_string(i), StrategyKind::wrong_output));
    for (int i = 0; i < 3; ++i)
        cfg.profiles.push_back(prof("hon" + std::to_string(i), StrategyKind::honest));

    World w(cfg, WorldConfig{});
    TaskSpec t = small_task("t0", 11);
    TaskOutcome out = w.run_task(t);

    ExecutionView oracle = honest_view(*t.program, t.inputs);
    CHECK(out.accepted);
    CHECK(out.output_hash == oracle.output_hash);
    // All seven liars share one wrong commitment; it lost, so all seven are
    // voided and no honest member is.
    CHECK(w.arbiter().voided_scrutineers().size() == 7);
    for (int i = 0; i < 3; ++i) CHECK_FALSE(w.arbiter().is_voided("hon" + std::to_string(i)));
}

TEST_CASE("corrupt-at-step adversary is localized to its corruption window") {
    TaskSpec t = small_task("t0", 13);
    uint64_t T = t.program->step_count();
    REQUIRE(T >= 4);
    uint64_t k = T / 2;

    CommitteeConfig cfg;
    cfg.profiles.push_back(prof("evil", StrategyKind::corrupt_at_step));
    cfg.profiles[0].corrupt_step = k;
    cfg.profiles.push_back(prof("good", StrategyKind::honest));

    World w(cfg, WorldConfig{});
    TaskOutcome out = w.run_task(t);

    ExecutionView oracle = honest_view(*t.program, t.inputs);
    CHECK(out.accepted);
    CHECK(out.output_hash == oracle.output_hash);
    CHECK(w.arbiter().is_voided("evil"));

    REQUIRE(w.arbiter().games_for_task("t0").size() == 1);
    const arb::DisputeGame& g = *w.arbiter().games_for_task("t0")[0];
    CHECK(g.phase == arb::GamePhase::resolved);
    // The fabricated trace first diverges at state k, so the one-step window
    // is exactly [k-1, k].
    CHECK(g.lo == k - 1);
    CHECK(g.hi == k);
    CHECK(*g.verdict ==
          (g.asserter == "evil" ? arb::Verdict::challenger_wins : arb::Verdict::asserter_wins));
}

TEST_CASE("silent scrutineer times out of disputes; lazy copies are harmless") {
    CommitteeConfig cfg;
    cfg.profiles.push_back(prof("mute", StrategyKind::silent));
    cfg.profiles.push_back(prof("hon", StrategyKind::honest));
    cfg.profiles.push_back(prof("echo", StrategyKind::lazy_copy));
    cfg.profiles[2].peer = "hon";

    World w(cfg, WorldConfig{});
    TaskSpec t = small_task("t0", 17);
    TaskOutcome out = w.run_task(t);

    ExecutionView oracle = honest_view(*t.program, t.inputs);
    CHECK(out.accepted);
    CHECK(out.output_hash == oracle.output_hash);
    // Silent member never claimed: claim-window timeout recorded, no dispute.
    bool saw_timeout = false;
    for (const auto& ev : w.arbiter().ledger())
        if (ev.kind == arb::EventKind::timeout_default) saw_timeout = true;
    CHECK(saw_timeout);
    // Lazy copy of an honest peer is indistinguishable from honesty.
    CHECK_FALSE(w.arbiter().is_voided("echo"));
    CHECK(w.arbiter().claims_for_task("t0").size() == 2);
}

TEST_CASE("silent adversary that claimed wrong loses by dispute timeout") {
    CommitteeConfig cfg;
    // wrong-output claims but then refuses to defend: answers games as noop.
    // Model this with a corrupt claim from a party that goes silent by using
    // lazy-copy of a wrong-output peer that is itself voided first is
    // convoluted; instead check the arbiter-level timeout path is reachable
    // through the world when the awaited party produces noops: a lazy-copy
    // with a wrong-output peer ends up defending a commitment it cannot
    // answer for once the peer is voided.
    cfg.profiles.push_back(prof("liar", StrategyKind::wrong_output));
    cfg.profiles.push_back(prof("echo", StrategyKind::lazy_copy));
    cfg.profiles[1].peer = "liar";
    cfg.profiles.push_back(prof("hon", StrategyKind::honest));

    World w(cfg, WorldConfig{});
    TaskSpec t = small_task("t0", 19);
    TaskOutcome out = w.run_task(t);
    CHECK(out.accepted);
    CHECK(out.output_hash == honest_view(*t.program, t.inputs).output_hash);
    CHECK(w.arbiter().is_voided("liar"));
    CHECK(w.arbiter().is_voided("echo"));  // same voided commitment
}

TEST_CASE("seeded runs are bit-reproducible") {
    auto run_once = [] {
        CommitteeConfig cfg;
        cfg.profiles.push_back(prof("evil", StrategyKind::corrupt_at_step));
        cfg.profiles[0].corrupt_step = 2;
        cfg.profiles.push_back(prof("good", StrategyKind::honest));
        cfg.profiles.push_back(prof("mute", StrategyKind::silent));
        World w(cfg, WorldConfig{});
        w.run_tasks({small_task("a", 23), small_task("b", 29)});
        return std::make_pair(w.arbiter().ledger_digest(), w.transcript_digest());
    };
    auto [ledger1, transcript1] = run_once();
    auto [ledger2, transcript2] = run_once();
    CHECK(ledger1 == ledger2);
    CHECK(transcript1 == transcript2);
}

TEST_CASE("parallel execution produces the identical ledger") {
    auto run_with = [](bool parallel) {
        CommitteeConfig cfg = honest_committee(4);
        cfg.profiles.push_back(prof("evil", StrategyKind::wrong_output));
        WorldConfig wc;
        wc.parallel = parallel;
        World w(cfg, wc);
        w.run_tasks({small_task("a", 31), small_task("b", 37), small_task("c", 41)});
        return std::make_pair(w.arbiter().ledger_digest(), w.transcript_digest());
    };
    CHECK(run_with(false) == run_with(true));
}

TEST_CASE("anytrust soundness over randomized committees") {
    // Committees of size 2..16 with random adversary mixes, always at least
    // one honest member: the honest output hash is always the accepted one
    // and no honest member is ever voided.
    for (uint64_t seed = 0; seed < 25; ++seed) {
        Rng rng(derive_seed("anytrust", seed));
        int size = 2 + static_cast<int>(rng.below(15));
        CommitteeConfig cfg;
        int honest_members = 0;
        for (int i = 0; i < size; ++i) {
            StrategyKind s;
            switch (rng.below(4)) {
                case 0: s = StrategyKind::honest; break;
                case 1: s = StrategyKind::wrong_output; break;
                case 2: s = StrategyKind::corrupt_at_step; break;
                default: s = StrategyKind::silent; break;
            }
            ScrutineerProfile p = prof("s" + std::to_string(i), s);
            p.corrupt_step = 1 + rng.below(8);
            cfg.profiles.push_back(p);
            if (s == StrategyKind::honest) ++honest_members;
        }
        if (honest_members == 0) {
            cfg.profiles[0].strategy = StrategyKind::honest;
            ++honest_members;
        }
        REQUIRE(cfg.anytrust_holds());

        TaskSpec t = small_task("t0", derive_seed("anytrust-task", seed));
        World w(cfg, WorldConfig{});
        TaskOutcome out = w.run_task(t);

        ExecutionView oracle = honest_view(*t.program, t.inputs);
        CHECK(out.accepted);
        CHECK(out.output_hash == oracle.output_hash);
        for (const auto& p : cfg.profiles)
            if (p.strategy == StrategyKind::honest) CHECK_FALSE(w.arbiter().is_voided(p.id));
    }
}

TEST_CASE("anytrust failure boundary: zero honest members") {
    CommitteeConfig cfg;
    for (int i = 0; i < 4; ++i)
        cfg.profiles.push_back(prof("liar" + std::to_string(i), StrategyKind::wrong_output));
    CHECK_FALSE(cfg.anytrust_holds());

    TaskSpec t = small_task("t0", 43);
    World w(cfg, WorldConfig{});
    TaskOutcome out = w.run_task(t);

    ExecutionView oracle = honest_view(*t.program, t.inputs);
    CHECK(out.accepted);  // unanimously wrong, accepted without re-computation
    CHECK(out.output_hash != oracle.output_hash);
    CHECK(w.arbiter().voided_scrutineers().empty());
}

TEST_CASE("transcript exports json-lines") {
    World w(honest_committee(2), WorldConfig{});
    w.run_task(small_task("t0", 47));
    std::string jsonl = w.transcript_jsonl();
    CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == (long)w.transcript().size());
    CHECK(w.transcript().size() >= 2);  // two claims at least
    for (const auto& m : w.transcript()) CHECK(m.kind != MsgKind::noop);
}
