#include "nve/state_server.hpp"

#include <stdexcept>

namespace nve {

StateServer::StateServer(GridPtr grid, MacKey key, std::uint64_t seed)
    : grid_(std::move(grid)), key_(key), rng_(Rng::derive(seed, 0x737276ULL)) {}

void StateServer::set_spawn_region(ClientId client, RegionId region) {
    if (!grid_->region_in_bounds(region) || grid_->free_cells_in(region).empty())
        throw std::invalid_argument("state server: unusable spawn region");
    spawn_regions_[client] = region;
}

void StateServer::queue_for_others(ClientId mover, RegionId target) {
    for (auto& [other, session] : sessions_) {
        (void)session;
        if (other != mover) pending_[other][mover] = target;
    }
}

WireMessage StateServer::handle_message(const WireMessage& request, Cycle now) {
    switch (request.kind) {
        case MessageKind::InitRequest:
            return handle_init(request.sender, now);
        case MessageKind::UpdateRequest: {
            auto diff = decode_abstract_diff(request.body);
            if (!diff) {
                // Undecodable request: treated like an illegal one.
                return handle_update(request.sender, AbstractDiff{}, request.cycle);
            }
            return handle_update(request.sender, *diff, request.cycle);
        }
        default:
            throw std::invalid_argument("state server: unexpected message kind");
    }
}

WireMessage StateServer::handle_init(ClientId client, Cycle now) {
    WireMessage reply;
    reply.kind = MessageKind::InitResponse;
    reply.cycle = now;
    if (sessions_.contains(client)) {
        reply.body = make_rejection_body();
        return reply;
    }

    RegionId spawn{0, 0};
    if (auto it = spawn_regions_.find(client); it != spawn_regions_.end()) spawn = it->second;

    AbstractState own;
    own.avatars[client] = spawn;
    own.cycle = 0;
    auto initial = concretize_state(own, grid_, rng_.next_u64());
    if (!initial) throw std::invalid_argument("state server: spawn region has no free cell");

    const Nonce n0 = rng_.next_u64();
    sessions_[client] = Session{n0, now};

    // Introduce the newcomer to everyone and everyone to the newcomer.
    queue_for_others(client, spawn);
    for (const auto& [other, region] : astate_.avatars)
        if (other != client) pending_[client][other] = region;
    astate_.avatars[client] = spawn;

    Bytes payload = encode_state(*initial);
    put_u64(payload, n0);
    reply.body = make_response_body(auth_msg(key_, std::move(payload), client));
    return reply;
}

WireMessage StateServer::handle_update(ClientId client, const AbstractDiff& request, Cycle cycle) {
    WireMessage reply;
    reply.kind = MessageKind::UpdateResponse;
    reply.cycle = cycle;
    auto session = sessions_.find(client);
    if (session == sessions_.end()) {
        reply.body = make_rejection_body();
        return reply;
    }

    const bool accepted = abstract_rules_ok(astate_, request, client, *grid_);
    const RegionId own_target = accepted ? request.moves.at(client) : astate_.avatars.at(client);

    AbstractDiff reported;
    if (auto it = pending_.find(client); it != pending_.end()) {
        reported.moves = std::move(it->second);
        pending_.erase(it);
    }
    reported.moves[client] = own_target; // the stay entry guarantees a response every cycle

    astate_ = apply_abstract(astate_, reported);
    queue_for_others(client, own_target);

    session->second.nonce += 1;
    Bytes payload = encode_abstract_diff(reported);
    put_u64(payload, session->second.nonce);
    reply.body = make_response_body(auth_msg(key_, std::move(payload), client));
    return reply;
}

} // namespace nve
