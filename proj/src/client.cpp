#include "nve/client.hpp"

#include <limits>
#include <stdexcept>

#include "nve/audit_server.hpp"

namespace nve {

namespace {

std::optional<Position> nearest_free_cell(const CellGrid& grid, RegionId r, Position from) {
    std::optional<Position> best;
    std::uint64_t best_d = std::numeric_limits<std::uint64_t>::max();
    for (const Position& p : grid.free_cells_in(r)) {
        const std::uint64_t d = manhattan(from, p);
        if (d < best_d) { best = p; best_d = d; }
    }
    return best;
}

} // namespace

Client::Client(ClientId id, std::string name, MacKey key, Cycle l, BehaviorScript script,
               CheatProfile cheat)
    : id_(id), name_(std::move(name)), key_(key), l_(l), script_(std::move(script)),
      cheat_(cheat) {
    if (l_ < 2) throw std::invalid_argument("client: audit cycle length must be >= 2");
}

WireMessage Client::make_init_request() const {
    return WireMessage{MessageKind::InitRequest, id_, 0, {}};
}

std::optional<WireMessage> Client::handle_init_response(const WireMessage& response) {
    if (initialized_ || response.kind != MessageKind::InitResponse) return std::nullopt;
    auto msg = parse_response_body(response.body);
    if (!msg) {
        note("join rejected");
        return std::nullopt;
    }
    auto split = split_payload_nonce(msg->payload);
    auto initial = split ? decode_state(split->first) : std::optional<ConcreteState>{};
    if (!initial || initial->cycle != 0 || !initial->avatars.contains(id_)) {
        note("malformed init response");
        return std::nullopt;
    }
    state_ = std::move(*initial);
    buffer_.full_states[0] = state_;
    buffer_.init_msg = std::move(*msg); // kept whole: audits back to cycle 0 need n0
    initialized_ = true;

    WireMessage q0;
    q0.kind = MessageKind::StateCommit;
    q0.sender = id_;
    q0.cycle = 0;
    const MacTag tag = mac_tag(key_, encode_state(state_));
    q0.body.assign(tag.bytes.begin(), tag.bytes.end());
    return q0;
}

Position Client::scripted_target(Cycle t) {
    const Position cur = state_.avatars.at(id_);
    switch (script_.kind) {
        case BehaviorScript::Kind::Stay:
            return cur;
        case BehaviorScript::Kind::Targets:
            return script_.points.empty() ? cur
                                          : script_.points[(t - 1) % script_.points.size()];
        case BehaviorScript::Kind::Waypoints: {
            if (script_.points.empty()) return cur;
            for (std::size_t tries = 0; tries < script_.points.size(); ++tries) {
                if (script_.points[waypoint_] != cur) break;
                waypoint_ = (waypoint_ + 1) % script_.points.size();
            }
            const Position goal = script_.points[waypoint_];
            if (goal == cur) return cur;
            if (goal.x != cur.x) {
                const Position step{goal.x > cur.x ? cur.x + 1 : cur.x - 1, cur.y};
                if (state_.grid->is_free(step)) return step;
            }
            if (goal.y != cur.y) {
                const Position step{cur.x, goal.y > cur.y ? cur.y + 1 : cur.y - 1};
                if (state_.grid->is_free(step)) return step;
            }
            return cur;
        }
    }
    return cur;
}

std::optional<Position> Client::adjacent_region_target() const {
    const Position cur = state_.avatars.at(id_);
    const RegionId here = region_of(*state_.grid, cur);
    const std::uint64_t nx = state_.grid->regions_x();
    const std::uint64_t ny = state_.grid->regions_y();
    const RegionId candidates[] = {{here.rx + 1, here.ry},
                                   {here.rx ? here.rx - 1 : nx, here.ry},
                                   {here.rx, here.ry + 1},
                                   {here.rx, here.ry ? here.ry - 1 : ny}};
    for (const RegionId& r : candidates) {
        if (r.rx >= nx || r.ry >= ny) continue;
        if (auto target = nearest_free_cell(*state_.grid, r, cur)) return target;
    }
    return std::nullopt;
}

std::optional<WireMessage> Client::begin_cycle(Cycle t) {
    if (!initialized_ || state_.cycle + 1 != t) return std::nullopt;

    std::optional<Position> jump;
    if (cheat_.kind == CheatProfile::Kind::Wallhack && cheat_.at == t) {
        jump = adjacent_region_target(); // the request below still looks plausible
        if (!jump) note("wallhack impossible: no adjacent region");
    }
    Position intended;
    if (jump) {
        intended = *jump;
    } else {
        intended = scripted_target(t);
        // Honest clamp: never request something concretely illegal.
        const Position cur = state_.avatars.at(id_);
        if (manhattan(cur, intended) > 1 || !state_.grid->is_free(intended)) intended = cur;
    }
    pending_intended_ = intended;

    AbstractDiff request;
    request.moves[id_] = region_of(*state_.grid, intended);
    WireMessage msg;
    msg.kind = MessageKind::UpdateRequest;
    msg.sender = id_;
    msg.cycle = t;
    msg.body = encode_abstract_diff(request);
    return msg;
}

std::optional<ConcreteDiff> Client::choose_diff(const AbstractDiff& reported, Cycle t) {
    const bool jump_cheat = (cheat_.kind == CheatProfile::Kind::Wallhack ||
                             cheat_.kind == CheatProfile::Kind::OutOfGamma) &&
                            cheat_.at == t;
    if (jump_cheat) {
        auto target = cheat_.kind == CheatProfile::Kind::Wallhack ? pending_intended_
                                                                  : adjacent_region_target();
        if (target) {
            AbstractDiff others = reported;
            others.moves.erase(id_);
            ConcreteDiff chosen;
            if (!others.moves.empty()) {
                auto rest = concretize_diff(state_, others, id_, std::nullopt, 0);
                if (!rest) return std::nullopt;
                chosen = std::move(*rest);
            }
            chosen.moves[id_] = *target; // applied without regard to rules or gamma
            return chosen;
        }
        note("cheat impossible: no adjacent region");
    }
    return concretize_diff(state_, reported, id_, pending_intended_, 0);
}

std::vector<WireMessage> Client::commit_and_advance(Cycle t, const ConcreteDiff& chosen,
                                                    std::optional<AuthorizedMessage> msg) {
    std::vector<WireMessage> sends;

    state_ = apply_diff(state_, chosen);
    buffer_.diffs[t] = chosen;
    if (msg) buffer_.server_msgs[t] = std::move(*msg);
    else buffer_.lossy_cycles.insert(t);

    WireMessage commit;
    commit.kind = MessageKind::DiffCommit;
    commit.sender = id_;
    commit.cycle = t;
    const MacTag dtag = mac_tag(key_, encode_diff(chosen));
    commit.body.assign(dtag.bytes.begin(), dtag.bytes.end());
    sends.push_back(std::move(commit));

    if (t % l_ == 0) {
        if (t >= 3 * l_) {
            buffer_.full_states.erase(t - 3 * l_);
            for (Cycle i = t - 3 * l_ + 1; i <= t - 2 * l_; ++i) {
                buffer_.diffs.erase(i);
                buffer_.server_msgs.erase(i);
                buffer_.lossy_cycles.erase(i);
            }
        }
        buffer_.full_states[t] = state_;

        ConcreteState committed = state_;
        if (cheat_.kind == CheatProfile::Kind::FakeStateCommit && cheat_.at == t) {
            // Commit to a state with our avatar somewhere it never was.
            const Position cur = state_.avatars.at(id_);
            for (std::uint64_t y = 0; y < state_.grid->height(); ++y) {
                for (std::uint64_t x = 0; x < state_.grid->width(); ++x) {
                    const Position p{x, y};
                    if (p != cur && state_.grid->is_free(p)) {
                        committed.avatars[id_] = p;
                        y = state_.grid->height();
                        break;
                    }
                }
            }
        }

        WireMessage qmsg;
        qmsg.kind = MessageKind::StateCommit;
        qmsg.sender = id_;
        qmsg.cycle = t;
        const MacTag qtag = mac_tag(key_, encode_state(committed));
        qmsg.body.assign(qtag.bytes.begin(), qtag.bytes.end());
        sends.push_back(std::move(qmsg));
    }

    if (cheat_.kind == CheatProfile::Kind::RewriteHistory && cheat_.at == t)
        rewrite_history(cheat_.altered);

    pending_intended_.reset();
    return sends;
}

std::vector<WireMessage> Client::handle_update_response(const WireMessage& response) {
    if (!initialized_ || response.kind != MessageKind::UpdateResponse) return {};
    const Cycle t = response.cycle;
    if (t != state_.cycle + 1) {
        note("stale update response discarded");
        return {};
    }
    auto msg = parse_response_body(response.body);
    if (!msg) {
        note("update rejected or malformed");
        return {};
    }

    if (cheat_.kind == CheatProfile::Kind::ForgeServerMsg && cheat_.at == t) {
        // Doctor the stored authorization and act on the doctored version:
        // flip another avatar's reported region when one exists, otherwise
        // the nonce. Either way the original tag no longer matches.
        auto split = split_payload_nonce(msg->payload);
        auto reported = split ? decode_abstract_diff(split->first) : std::optional<AbstractDiff>{};
        if (split && reported) {
            Nonce nonce = split->second;
            bool flipped = false;
            for (auto& [mover, region] : reported->moves) {
                if (mover == id_) continue;
                const RegionId alt{region.rx == 0 ? std::uint64_t(1) : std::uint64_t(0),
                                   region.ry};
                if (state_.grid->region_in_bounds(alt) &&
                    !state_.grid->free_cells_in(alt).empty()) {
                    region = alt;
                    flipped = true;
                    break;
                }
            }
            if (!flipped) nonce += 1;
            Bytes payload = encode_abstract_diff(*reported);
            put_u64(payload, nonce);
            msg->payload = std::move(payload);
        }
    }

    auto split = split_payload_nonce(msg->payload);
    auto reported = split ? decode_abstract_diff(split->first) : std::optional<AbstractDiff>{};
    if (!reported) {
        note("undecodable update payload");
        return {};
    }

    auto chosen = choose_diff(*reported, t);
    if (!chosen) {
        // No rule-compliant concretization: apply the other avatars' moves
        // only and record the conflict.
        note("concretization conflict at cycle " + std::to_string(t));
        AbstractDiff others = *reported;
        others.moves.erase(id_);
        if (!others.moves.empty())
            chosen = concretize_diff(state_, others, id_, std::nullopt, 0);
        if (!chosen) return end_cycle_without_response(t);
    }
    return commit_and_advance(t, *chosen, std::move(*msg));
}

std::vector<WireMessage> Client::end_cycle_without_response(Cycle t) {
    if (!initialized_ || t != state_.cycle + 1) return {};
    note("lossy cycle " + std::to_string(t));
    ConcreteDiff identity;
    identity.moves[id_] = state_.avatars.at(id_);
    return commit_and_advance(t, identity, std::nullopt);
}

ConcreteState Client::replay_to(Cycle target) const {
    auto it = buffer_.full_states.upper_bound(target);
    if (it == buffer_.full_states.begin()) throw std::runtime_error("replay: window pruned");
    --it;
    ConcreteState s = it->second;
    for (Cycle i = it->first + 1; i <= target; ++i) s = apply_diff(s, buffer_.diffs.at(i));
    return s;
}

void Client::rewrite_history(Cycle altered) {
    auto diff_it = buffer_.diffs.find(altered);
    if (diff_it == buffer_.diffs.end() || !diff_it->second.moves.contains(id_)) {
        note("rewrite impossible: cycle not in buffer");
        return;
    }
    const Position original = diff_it->second.moves.at(id_);
    const RegionId region = region_of(*state_.grid, original);
    const Position before = replay_to(altered - 1).avatars.at(id_);

    std::optional<Position> alt;
    for (const Position& p : state_.grid->free_cells_in(region)) {
        if (p == original) continue;
        if (manhattan(before, p) <= 1) { alt = p; break; }
    }
    if (!alt) {
        for (const Position& p : state_.grid->free_cells_in(region))
            if (p != original) { alt = p; break; }
    }
    if (!alt) {
        note("rewrite impossible: no alternative cell");
        return;
    }

    diff_it->second.moves[id_] = *alt;
    // Commitments are NOT re-sent; that is the point of the attack.
    // Snapshots after the altered cycle are refolded from the one before it.
    for (auto it = buffer_.full_states.upper_bound(altered); it != buffer_.full_states.end();
         ++it) {
        ConcreteState s = std::prev(it)->second;
        for (Cycle i = std::prev(it)->first + 1; i <= it->first; ++i)
            s = apply_diff(s, buffer_.diffs.at(i));
        it->second = s;
    }
    state_ = replay_to(state_.cycle);
}

WireMessage Client::answer_audit(Cycle t0) const {
    if (!initialized_) throw std::runtime_error("audit: client not initialized");
    if (t0 > state_.cycle) throw std::runtime_error("audit: t0 in the future");
    const Cycle ta = window_start(t0, l_);

    AuditEvidence evidence;
    evidence.ta = ta;
    auto start = buffer_.full_states.find(ta);
    if (start == buffer_.full_states.end()) throw std::runtime_error("audit: window pruned");
    evidence.start_state = start->second;
    for (Cycle i = ta + 1; i <= t0; ++i) {
        auto d = buffer_.diffs.find(i);
        if (d == buffer_.diffs.end()) throw std::runtime_error("audit: diff missing");
        evidence.diffs[i] = d->second;
        if (auto m = buffer_.server_msgs.find(i); m != buffer_.server_msgs.end())
            evidence.msgs[i] = m->second;
        else if (buffer_.lossy_cycles.contains(i))
            evidence.msgs[i] = std::nullopt;
        else
            throw std::runtime_error("audit: server message missing");
    }
    if (ta == 0) evidence.init_msg = buffer_.init_msg;

    WireMessage msg;
    msg.kind = MessageKind::AuditResponse;
    msg.sender = id_;
    msg.cycle = t0;
    msg.body = encode_evidence(evidence);
    return msg;
}

std::vector<std::string> Client::take_diagnostics() {
    std::vector<std::string> out;
    out.swap(diagnostics_);
    return out;
}

} // namespace nve
