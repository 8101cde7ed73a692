#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nve/codec.hpp"
#include "nve/mac.hpp"
#include "nve/types.hpp"
#include "nve/world.hpp"

namespace nve {

enum class AuditCheck : std::uint8_t {
    Step5Gamma = 0,   // Δ′ not in γ of the δ′ the server signed
    Step5Rules = 1,   // Δ′ violates the concrete movement rules
    Step6aMacM = 2,   // server message tampered with
    Step6bMacD = 3,   // diff does not match its commitment
    Step7MacQ = 4,    // full state does not match its commitment
    Step7MacM0 = 5,   // initial state not authorized by the server
    Deadline = 6,     // commitment arrived past its deadline or never
    Equivocation = 7, // two different commitments for one slot
};

const char* check_name(AuditCheck check);

struct AuditReason {
    AuditCheck check = AuditCheck::Deadline;
    Cycle cycle = 0;
    std::string detail;
    bool operator==(const AuditReason&) const = default;
};

struct AuditReport {
    ClientId client = 0;
    Cycle t0 = 0;
    Cycle ta = 0;
    bool accepted = false;
    std::vector<AuditReason> reasons; // accepted iff empty
    bool has_reason(AuditCheck check, Cycle cycle) const;
};

struct AuditStrategy {
    enum class Kind { EveryBoundary, RandomBoundary, OnDemand };
    Kind kind = Kind::EveryBoundary;
    double probability = 0.0; // RandomBoundary
    std::vector<std::pair<Cycle, ClientId>> triggers; // OnDemand
    std::uint64_t seed = 0;
};

enum class CommitmentKind : std::uint8_t { Diff, State };

// Start of the audit window for an audit initiated at t0: the last two
// completed audit cycles plus the running one. Throws std::invalid_argument
// when t0 < 2l (too early to audit).
Cycle window_start(Cycle t0, Cycle l);

// Trusted auditor: ingests commitments with deadline enforcement, re-runs
// the client's computation from its evidence and checks every step against
// what was committed and what the state server signed.
class AuditServer {
public:
    AuditServer(MacKey server_key, Cycle l, AuditStrategy strategy);

    void register_client(ClientId client, MacKey key);

    // Arrival rules: a diff commitment for cycle t must arrive at cycle t;
    // a state commitment for boundary t must arrive before cycle t + l.
    // Violations (and conflicting re-commitments) flag the client
    // permanently; every later audit of it rejects.
    void record_commitment(ClientId client, CommitmentKind kind, Cycle t, const MacTag& tag,
                           Cycle arrival);

    // Clients to audit at a boundary cycle, per strategy. Deterministic
    // given the strategy seed; random draws are independent per
    // (boundary, client).
    std::vector<ClientId> schedule_audits(Cycle boundary) const;

    AuditReport run_audit(ClientId client, Cycle t0, const AuditEvidence& evidence) const;

    bool flagged(ClientId client) const;
    std::optional<MacTag> diff_commitment(ClientId client, Cycle t) const;
    std::optional<MacTag> state_commitment(ClientId client, Cycle t) const;
    Cycle audit_cycle_length() const { return l_; }
    const AuditStrategy& strategy() const { return strategy_; }

private:
    struct Slot {
        MacTag tag;
        Cycle arrival = 0;
    };
    struct Store {
        std::map<Cycle, Slot> diff_commits;
        std::map<Cycle, Slot> state_commits;
        std::vector<AuditReason> standing_flags;
    };

    MacKey server_key_;
    Cycle l_;
    AuditStrategy strategy_;
    std::map<ClientId, MacKey> client_keys_;
    std::map<ClientId, Store> stores_;
};

// Verdict wire schema (AuditVerdict frames).
Bytes encode_verdict_body(const AuditReport& report);
std::optional<AuditReport> decode_verdict_body(std::span<const std::uint8_t> body,
                                               ClientId client, Cycle t0);

} // namespace nve
