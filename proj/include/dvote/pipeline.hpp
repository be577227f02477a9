#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dvote/committee.hpp"
#include "dvote/provenance.hpp"

namespace dvote::vote {

class PipelineError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr uint32_t kSignatureDim = 16;
inline constexpr uint32_t kMarkCells = 64;  // 8x8 grid, one quadrant per candidate

struct ElectionConfig {
    uint32_t voters = 100;
    uint32_t candidates = 3;  // at most 4 (one mark quadrant each)
    uint64_t seed = 42;
    FixedPoint tau = FixedPoint::one();
    uint32_t impostors = 5;
    uint32_t unclear = 3;
    uint32_t abstain = 0;
    bool ballot_ids = true;

    static ElectionConfig from_json(const std::string& text);
    std::string to_json() const;
};

struct VoterRecord {
    std::string voter_id;
    FixedTensor reference_signature;  // 1 x 16 synthetic feature vector
};

struct Registry {
    std::vector<VoterRecord> voters;

    const VoterRecord* find(const std::string& voter_id) const;
    Digest digest() const;
};

Registry register_voters(uint32_t n, uint64_t seed);

struct Envelope {
    std::string voter_id;
    FixedTensor scanned_signature;
    int32_t enclosed_ballot = -1;  // severed at extraction
    bool mailed = false;
};

struct BallotPaper {
    std::string ballot_id;  // empty in the untraceable mode
    FixedTensor mark_image;
    std::optional<uint32_t> read_vote;  // candidate index after tabulation
    bool unidentifiable = false;
};

struct BallotSet {
    std::vector<Envelope> envelopes;
    std::vector<BallotPaper> papers;
};

// One envelope + paper per voter; ballot ids come from a PRNG stream that is
// derived without reading any voter data.
BallotSet produce_ballots(const Registry& registry, uint64_t seed, bool with_ballot_ids);

struct VoterIntent {
    enum class Kind : uint8_t { candidate, unclear, abstain } kind = Kind::candidate;
    uint32_t candidate = 0;  // the intent, also the manual label for unclear marks
};

// Ground truth of a scenario: every voter's intent plus which envelopes are
// impostor-signed. Derived deterministically from (config, seed).
struct CastPlan {
    std::vector<VoterIntent> intents;
    std::vector<bool> impostor;
};

CastPlan plan_votes(const ElectionConfig& config, uint64_t seed);

// The manual-review stand-in: a label per mark image digest. Built while
// casting, so it never references voter or ballot identifiers.
struct ManualReview {
    std::map<Digest, uint32_t> labels;

    std::optional<uint32_t> resolve(const FixedTensor& mark) const;
};

// Fills signatures and marks per the plan; returns indices of mailed
// envelopes (abstainers keep theirs).
std::vector<size_t> cast_votes(BallotSet& set, const Registry& registry, const CastPlan& plan,
                               const ElectionConfig& config, uint64_t seed, ManualReview& manual);

// Deterministic mark patterns.
FixedTensor clear_mark(uint32_t candidate);
FixedTensor noise_mark(uint64_t seed);

struct SigDecision {
    size_t envelope_index = 0;
    bool accepted = false;
    FixedPoint distance{};
    std::string task_id;
    std::string reason;  // set when rejected without a committee run
};

// Committee-verified signature verification for every mailed envelope. The
// decision is a pure function of each task's accepted output.
std::vector<SigDecision> verify_signatures(const BallotSet& set,
                                           const std::vector<size_t>& mailed,
                                           const Registry& registry,
                                           const prov::AuditedModel& signature_model,
                                           FixedPoint tau, sim::World& world);

struct BallotBox {
    std::vector<BallotPaper> papers;
};

// Opens accepted envelopes, destroys every envelope record and returns the
// papers under a seeded shuffle. After this call no reachable state links a
// voter id to a ballot id.
BallotBox extract_ballots(BallotSet& set, const std::vector<SigDecision>& decisions,
                          uint64_t seed);

struct TallyResult {
    std::vector<uint64_t> candidate_counts;  // machine-read
    uint64_t unidentifiable = 0;             // manual-review queue length
    std::vector<uint64_t> manual_counts;     // queue resolved by the stand-in
    uint64_t manual_unresolved = 0;
    uint64_t rejected_signatures = 0;
    uint64_t total_processed = 0;  // envelopes ingested

    uint64_t machine_total() const;
};

// Committee-verified reading of every paper; fills read_vote in place and
// aggregates. Reads outside [0, candidates) count as unidentifiable.
TallyResult tabulate(BallotBox& box, const prov::AuditedModel& reader_model,
                     uint32_t candidates, const ManualReview& manual, sim::World& world);

struct BallotOutcome {
    std::string ballot_id;
    std::string read;  // candidate index as string, or "unidentifiable"
    std::optional<uint32_t> manual;
};

struct ElectionReport {
    ElectionConfig config;
    bool anytrust_holds = false;
    TallyResult tally;
    std::vector<BallotOutcome> ballots;  // present only with ballot ids
    Digest ledger_digest{};
    Digest transcript_digest{};
    std::map<std::string, Digest> model_hashes;
    std::map<std::string, Digest> provenance_digests;
    std::vector<std::string> voided_scrutineers;
    uint64_t generated_at = 0;  // 0 under fixed clock

    std::string to_json() const;
    std::optional<BallotOutcome> lookup(const std::string& ballot_id) const;
};

ElectionReport publish_results(const ElectionConfig& config, const TallyResult& tally,
                               const BallotBox& box, const ManualReview& manual,
                               const sim::World& world,
                               const std::map<std::string, prov::ProvenanceRecord>& records,
                               bool fixed_clock);

// Structural unlinkability audit over everything the election retains after
// extraction. Returns human-readable violations; empty means clean.
std::vector<std::string> audit_unlinkability(const Registry& registry, const BallotSet& set,
                                             const BallotBox& box, const ManualReview& manual,
                                             const ElectionReport& report);

}  // namespace dvote::vote
