#pragma once

#include <map>
#include <optional>
#include <span>

#include "nve/mac.hpp"
#include "nve/types.hpp"
#include "nve/world.hpp"

namespace nve {

// All integers are unsigned 64-bit little-endian; all maps are emitted in
// ascending client-id order. These layouts are MAC inputs and therefore
// frozen: value equality must imply byte equality.

enum class MessageKind : std::uint8_t {
    InitRequest = 0,
    InitResponse = 1,
    UpdateRequest = 2,
    UpdateResponse = 3,
    DiffCommit = 4,
    StateCommit = 5,
    AuditRequest = 6,
    AuditResponse = 7,
    AuditVerdict = 8,
};

const char* kind_name(MessageKind kind);

struct WireMessage {
    MessageKind kind = MessageKind::InitRequest;
    std::uint64_t sender = 0;
    Cycle cycle = 0;
    Bytes body;
    bool operator==(const WireMessage&) const = default;
};

void put_u64(Bytes& out, std::uint64_t v);

// width ‖ height ‖ block ‖ cells (1 byte each, 0 = Free, 1 = Wall,
// row-major) ‖ avatar count ‖ (id ‖ x ‖ y)* ‖ cycle
Bytes encode_state(const ConcreteState& s);
std::optional<ConcreteState> decode_state(std::span<const std::uint8_t> in);

// count ‖ (id ‖ x ‖ y)*; throws on empty diffs (not encodable)
Bytes encode_diff(const ConcreteDiff& d);
std::optional<ConcreteDiff> decode_diff(std::span<const std::uint8_t> in);

// count ‖ (id ‖ rx ‖ ry)*
Bytes encode_abstract_diff(const AbstractDiff& d);
std::optional<AbstractDiff> decode_abstract_diff(std::span<const std::uint8_t> in);

// kind:u8 ‖ sender ‖ cycle ‖ body length ‖ body. Decoding rejects unknown
// kinds, short frames and trailing bytes.
Bytes encode_message(const WireMessage& m);
std::optional<WireMessage> decode_message(std::span<const std::uint8_t> in);

// InitResponse / UpdateResponse body: status:u8 (0 = ok, 1 = rejected),
// then payload ‖ tag when ok. The payload of an UpdateResponse is
// encode_abstract_diff(δ′) ‖ nonce; of an InitResponse, encode_state(S₀)
// ‖ n₀.
Bytes make_response_body(const AuthorizedMessage& m);
Bytes make_rejection_body();
bool response_rejected(std::span<const std::uint8_t> body);
std::optional<AuthorizedMessage> parse_response_body(std::span<const std::uint8_t> body);

// Splits a response payload into its leading content and the trailing
// 8-byte nonce.
std::optional<std::pair<Bytes, Nonce>> split_payload_nonce(std::span<const std::uint8_t> payload);

// Contents of an audit answer: the window's starting state, its diffs and
// server messages keyed by cycle (a missing message marks a lossy cycle),
// plus the retained init message when the window starts at cycle 0.
struct AuditEvidence {
    Cycle ta = 0;
    ConcreteState start_state;
    std::map<Cycle, ConcreteDiff> diffs;
    std::map<Cycle, std::optional<AuthorizedMessage>> msgs;
    std::optional<AuthorizedMessage> init_msg;
    bool operator==(const AuditEvidence&) const = default;
};

Bytes encode_evidence(const AuditEvidence& ev);
std::optional<AuditEvidence> decode_evidence(std::span<const std::uint8_t> in);

} // namespace nve
