#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "nve/codec.hpp"
#include "nve/mac.hpp"
#include "nve/types.hpp"
#include "nve/world.hpp"

namespace nve {

// Client-side audit evidence: up to three full states at audit-cycle
// boundaries, the diffs and server messages of the running window, and the
// retained init message for audits reaching back to cycle 0.
struct SlidingWindowBuffer {
    std::map<Cycle, ConcreteState> full_states;
    std::map<Cycle, ConcreteDiff> diffs;
    std::map<Cycle, AuthorizedMessage> server_msgs;
    std::set<Cycle> lossy_cycles; // cycles whose update response never arrived
    std::optional<AuthorizedMessage> init_msg;
};

struct BehaviorScript {
    enum class Kind { Stay, Targets, Waypoints };
    Kind kind = Kind::Stay;
    // Targets: absolute per-cycle targets, repeated cyclically.
    // Waypoints: goals approached one step per cycle, visited in a loop.
    std::vector<Position> points;

    static BehaviorScript stay() { return {}; }
    static BehaviorScript targets(std::vector<Position> p) { return {Kind::Targets, std::move(p)}; }
    static BehaviorScript waypoints(std::vector<Position> p) { return {Kind::Waypoints, std::move(p)}; }
};

struct CheatProfile {
    enum class Kind {
        None,
        Wallhack,        // abstractly plausible request, concretely illegal move
        OutOfGamma,      // applies a move the server never authorized
        RewriteHistory,  // alters an already-committed diff after the fact
        ForgeServerMsg,  // stores (and acts on) a doctored server message
        FakeStateCommit, // commits to a fabricated full state
    };
    Kind kind = Kind::None;
    Cycle at = 0;      // cycle (or boundary) the cheat triggers on
    Cycle altered = 0; // RewriteHistory: the past cycle being rewritten

    static CheatProfile none() { return {}; }
};

// One simulated participant: issues abstract update requests, concretizes
// authorized responses, commits to every concrete step, maintains the
// sliding-window buffer and answers audits from it. Cheat profiles perturb
// exactly one cycle of this behavior.
class Client {
public:
    Client(ClientId id, std::string name, MacKey key, Cycle l, BehaviorScript script,
           CheatProfile cheat);

    WireMessage make_init_request() const;

    // Returns the initial state commitment to send, or nothing when the
    // server rejected the join.
    std::optional<WireMessage> handle_init_response(const WireMessage& response);

    // Computes the intended move for cycle t and returns the update request.
    std::optional<WireMessage> begin_cycle(Cycle t);

    // Applies the authorized update; returns the commitments to send (the
    // diff commitment, plus a state commitment at boundaries).
    std::vector<WireMessage> handle_update_response(const WireMessage& response);

    // No response arrived within the cycle: record a lossy cycle with an
    // identity diff and commit to it.
    std::vector<WireMessage> end_cycle_without_response(Cycle t);

    // Assembles the evidence for an audit initiated at t0. Throws when the
    // requested window is not (or no longer) in the buffer.
    WireMessage answer_audit(Cycle t0) const;

    bool initialized() const { return initialized_; }
    ClientId id() const { return id_; }
    const std::string& name() const { return name_; }
    const ConcreteState& state() const { return state_; }
    const SlidingWindowBuffer& buffer() const { return buffer_; }
    Cycle audit_cycle_length() const { return l_; }

    std::vector<std::string> take_diagnostics();

private:
    ClientId id_;
    std::string name_;
    MacKey key_;
    Cycle l_;
    BehaviorScript script_;
    CheatProfile cheat_;

    bool initialized_ = false;
    ConcreteState state_;
    SlidingWindowBuffer buffer_;
    std::size_t waypoint_ = 0;
    std::optional<Position> pending_intended_;
    std::vector<std::string> diagnostics_;

    Position scripted_target(Cycle t);
    std::optional<Position> adjacent_region_target() const;
    std::optional<ConcreteDiff> choose_diff(const AbstractDiff& reported, Cycle t);
    std::vector<WireMessage> commit_and_advance(Cycle t, const ConcreteDiff& chosen,
                                                std::optional<AuthorizedMessage> msg);
    void rewrite_history(Cycle altered);
    ConcreteState replay_to(Cycle target) const;
    void note(std::string text) { diagnostics_.push_back(std::move(text)); }
};

} // namespace nve
