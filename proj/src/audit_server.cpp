#include "nve/audit_server.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace nve {

const char* check_name(AuditCheck check) {
    switch (check) {
        case AuditCheck::Step5Gamma: return "step5-gamma";
        case AuditCheck::Step5Rules: return "step5-rules";
        case AuditCheck::Step6aMacM: return "step6a-mac-m";
        case AuditCheck::Step6bMacD: return "step6b-mac-d";
        case AuditCheck::Step7MacQ: return "step7-mac-q";
        case AuditCheck::Step7MacM0: return "step7-mac-m0";
        case AuditCheck::Deadline: return "deadline";
        case AuditCheck::Equivocation: return "equivocation";
    }
    return "unknown";
}

bool AuditReport::has_reason(AuditCheck check, Cycle cycle) const {
    return std::any_of(reasons.begin(), reasons.end(), [&](const AuditReason& r) {
        return r.check == check && r.cycle == cycle;
    });
}

Cycle window_start(Cycle t0, Cycle l) {
    if (l < 2) throw std::invalid_argument("window_start: audit cycle length must be >= 2");
    if (t0 < 2 * l) throw std::invalid_argument("window_start: audit initiated before cycle 2l");
    return (t0 / l - 2) * l;
}

AuditServer::AuditServer(MacKey server_key, Cycle l, AuditStrategy strategy)
    : server_key_(server_key), l_(l), strategy_(std::move(strategy)) {
    if (l_ < 2) throw std::invalid_argument("audit server: audit cycle length must be >= 2");
}

void AuditServer::register_client(ClientId client, MacKey key) {
    client_keys_[client] = key;
    stores_[client];
}

void AuditServer::record_commitment(ClientId client, CommitmentKind kind, Cycle t,
                                    const MacTag& tag, Cycle arrival) {
    Store& store = stores_[client];
    auto& slots = kind == CommitmentKind::Diff ? store.diff_commits : store.state_commits;

    if (auto it = slots.find(t); it != slots.end()) {
        if (!(it->second.tag == tag))
            store.standing_flags.push_back({AuditCheck::Equivocation, t,
                                            "conflicting commitment for the same slot"});
        return; // first commitment stays binding
    }
    slots[t] = Slot{tag, arrival};

    if (kind == CommitmentKind::Diff && arrival != t)
        store.standing_flags.push_back({AuditCheck::Deadline, t, "diff commitment late"});
    if (kind == CommitmentKind::State && arrival >= t + l_)
        store.standing_flags.push_back({AuditCheck::Deadline, t, "state commitment late"});
}

std::vector<ClientId> AuditServer::schedule_audits(Cycle boundary) const {
    std::vector<ClientId> out;
    if (boundary % l_ != 0 || boundary < 2 * l_) return out;
    switch (strategy_.kind) {
        case AuditStrategy::Kind::EveryBoundary:
            for (const auto& [client, key] : client_keys_) { (void)key; out.push_back(client); }
            break;
        case AuditStrategy::Kind::RandomBoundary:
            for (const auto& [client, key] : client_keys_) {
                (void)key;
                Rng draw = Rng::derive(strategy_.seed, boundary * 0x10001ULL + client);
                if (draw.next_double() < strategy_.probability) out.push_back(client);
            }
            break;
        case AuditStrategy::Kind::OnDemand:
            for (const auto& [cycle, client] : strategy_.triggers)
                if (cycle == boundary && client_keys_.contains(client)) out.push_back(client);
            break;
    }
    return out;
}

bool AuditServer::flagged(ClientId client) const {
    auto it = stores_.find(client);
    return it != stores_.end() && !it->second.standing_flags.empty();
}

std::optional<MacTag> AuditServer::diff_commitment(ClientId client, Cycle t) const {
    auto it = stores_.find(client);
    if (it == stores_.end()) return std::nullopt;
    auto slot = it->second.diff_commits.find(t);
    if (slot == it->second.diff_commits.end()) return std::nullopt;
    return slot->second.tag;
}

std::optional<MacTag> AuditServer::state_commitment(ClientId client, Cycle t) const {
    auto it = stores_.find(client);
    if (it == stores_.end()) return std::nullopt;
    auto slot = it->second.state_commits.find(t);
    if (slot == it->second.state_commits.end()) return std::nullopt;
    return slot->second.tag;
}

AuditReport AuditServer::run_audit(ClientId client, Cycle t0, const AuditEvidence& evidence) const {
    AuditReport report;
    report.client = client;
    report.t0 = t0;
    report.ta = window_start(t0, l_);

    auto store_it = stores_.find(client);
    auto key_it = client_keys_.find(client);
    if (store_it == stores_.end() || key_it == client_keys_.end())
        throw std::invalid_argument("audit server: unknown client");
    const Store& store = store_it->second;
    const MacKey& client_key = key_it->second;

    auto flag = [&](AuditCheck check, Cycle cycle, std::string detail) {
        report.reasons.push_back({check, cycle, std::move(detail)});
    };

    // Standing flags poison every audit after the offense.
    for (const AuditReason& r : store.standing_flags) report.reasons.push_back(r);

    if (evidence.ta != report.ta) {
        flag(AuditCheck::Step5Gamma, t0, "evidence window does not start at ta");
        return report;
    }
    if (evidence.start_state.cycle != report.ta) {
        flag(AuditCheck::Step5Gamma, report.ta, "start state cycle mismatch");
        return report;
    }
    for (Cycle i = report.ta + 1; i <= t0; ++i) {
        if (!evidence.diffs.contains(i)) {
            flag(AuditCheck::Step6bMacD, i, "diff missing from evidence");
            return report;
        }
        if (!evidence.msgs.contains(i)) {
            flag(AuditCheck::Step6aMacM, i, "server message missing from evidence");
            return report;
        }
    }

    // Replay the window and run every per-cycle check.
    ConcreteState replayed = evidence.start_state;
    ConcreteState boundary_state = replayed; // Ŝ at ta + l, captured below
    for (Cycle i = report.ta + 1; i <= t0; ++i) {
        const ConcreteDiff& diff = evidence.diffs.at(i);
        const auto& msg = evidence.msgs.at(i);

        if (msg) {
            auto split = split_payload_nonce(msg->payload);
            auto reported = split ? decode_abstract_diff(split->first)
                                  : std::optional<AbstractDiff>{};
            if (!reported) {
                flag(AuditCheck::Step6aMacM, i, "undecodable server payload");
            } else if (!gamma_contains(replayed, *reported, diff)) {
                flag(AuditCheck::Step5Gamma, i, "diff outside the authorized abstraction");
            }
            if (!auth_verify(server_key_, *msg, client))
                flag(AuditCheck::Step6aMacM, i, "server message fails verification");
        }
        // Lossy cycles have no server message; the MAC and gamma checks are
        // skipped, the movement rules and the commitment still apply.
        if (!concrete_rules_ok(replayed, diff, client))
            flag(AuditCheck::Step5Rules, i, "concrete movement rules violated");

        auto committed = diff_commitment(client, i);
        if (!committed) {
            flag(AuditCheck::Deadline, i, "diff commitment never arrived");
        } else if (!mac_verify(client_key, encode_diff(diff), *committed)) {
            flag(AuditCheck::Step6bMacD, i, "diff does not match commitment");
        }

        replayed = apply_diff(replayed, diff);
        if (i == report.ta + l_) boundary_state = replayed;
    }

    // Step 7: the two full-state commitments inside the window. The start
    // state is checked against the evidence, the intermediate one against
    // the replay.
    auto check_q = [&](Cycle t, const ConcreteState& state) {
        auto committed = state_commitment(client, t);
        if (!committed) {
            flag(AuditCheck::Deadline, t, "state commitment never arrived");
        } else if (!mac_verify(client_key, encode_state(state), *committed)) {
            flag(AuditCheck::Step7MacQ, t, "state does not match commitment");
        }
    };
    check_q(report.ta, evidence.start_state);
    check_q(report.ta + l_, boundary_state);

    // A window starting at cycle 0 needs the original server authorization
    // of S0: the tag is reverified over the evidence state and the nonce
    // carried in the init message.
    if (report.ta == 0) {
        if (!evidence.init_msg) {
            flag(AuditCheck::Step7MacM0, 0, "init message missing from evidence");
        } else {
            auto split = split_payload_nonce(evidence.init_msg->payload);
            if (!split) {
                flag(AuditCheck::Step7MacM0, 0, "undecodable init payload");
            } else {
                Bytes input = encode_state(evidence.start_state);
                put_u64(input, split->second);
                if (!mac_verify(server_key_, auth_input(input, client), evidence.init_msg->tag))
                    flag(AuditCheck::Step7MacM0, 0, "initial state not authorized");
            }
        }
    }

    report.accepted = report.reasons.empty();
    return report;
}

Bytes encode_verdict_body(const AuditReport& report) {
    Bytes out;
    out.push_back(report.accepted ? 1 : 0);
    put_u64(out, report.ta);
    put_u64(out, report.reasons.size());
    for (const AuditReason& r : report.reasons) {
        out.push_back(std::uint8_t(r.check));
        put_u64(out, r.cycle);
        put_u64(out, r.detail.size());
        out.insert(out.end(), r.detail.begin(), r.detail.end());
    }
    return out;
}

std::optional<AuditReport> decode_verdict_body(std::span<const std::uint8_t> body,
                                               ClientId client, Cycle t0) {
    if (body.size() < 17) return std::nullopt;
    AuditReport report;
    report.client = client;
    report.t0 = t0;
    std::size_t pos = 0;
    const std::uint8_t accepted = body[pos++];
    if (accepted > 1) return std::nullopt;
    report.accepted = accepted == 1;
    auto read_u64 = [&](std::uint64_t& v) {
        if (body.size() - pos < 8) return false;
        v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(body[pos + i]) << (8 * i);
        pos += 8;
        return true;
    };
    std::uint64_t count = 0;
    if (!read_u64(report.ta) || !read_u64(count)) return std::nullopt;
    for (std::uint64_t i = 0; i < count; ++i) {
        if (pos >= body.size()) return std::nullopt;
        AuditReason r;
        const std::uint8_t check = body[pos++];
        if (check > std::uint8_t(AuditCheck::Equivocation)) return std::nullopt;
        r.check = AuditCheck(check);
        std::uint64_t detail_len = 0;
        if (!read_u64(r.cycle) || !read_u64(detail_len)) return std::nullopt;
        if (body.size() - pos < detail_len) return std::nullopt;
        r.detail.assign(body.begin() + pos, body.begin() + pos + detail_len);
        pos += detail_len;
        report.reasons.push_back(std::move(r));
    }
    if (pos != body.size()) return std::nullopt;
    if (report.accepted != report.reasons.empty()) return std::nullopt;
    return report;
}

} // namespace nve
