#pragma once

#include <map>

#include "nve/codec.hpp"
#include "nve/mac.hpp"
#include "nve/types.hpp"
#include "nve/world.hpp"

namespace nve {

// Authoritative holder of the abstract state. Admission is the permissive
// region-level rule only; the server never sees a concrete state after
// handing out the initial one. Every response is MAC-authorized so the
// audit server can later prove what the server actually said.
//
// Requests are processed one at a time; each handler is a deterministic
// (state, message) -> (state, reply) transition.
class StateServer {
public:
    StateServer(GridPtr grid, MacKey key, std::uint64_t seed);

    void set_spawn_region(ClientId client, RegionId region);

    // Routes InitRequest / UpdateRequest frames; anything else is a
    // protocol error.
    WireMessage handle_message(const WireMessage& request, Cycle now);

    WireMessage handle_init(ClientId client, Cycle now);
    WireMessage handle_update(ClientId client, const AbstractDiff& request, Cycle cycle);

    const AbstractState& astate() const { return astate_; }
    bool has_session(ClientId client) const { return sessions_.contains(client); }
    Nonce session_nonce(ClientId client) const { return sessions_.at(client).nonce; }

private:
    struct Session {
        Nonce nonce = 0;
        Cycle joined = 0;
    };

    GridPtr grid_;
    MacKey key_;
    Rng rng_;
    AbstractState astate_;
    std::map<ClientId, Session> sessions_;
    // Moves by other clients not yet reported to each session, latest
    // region per mover (targets are absolute, so coalescing is lossless).
    std::map<ClientId, std::map<ClientId, RegionId>> pending_;
    std::map<ClientId, RegionId> spawn_regions_;

    void queue_for_others(ClientId mover, RegionId target);
};

} // namespace nve
