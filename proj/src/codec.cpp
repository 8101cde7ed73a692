#include "nve/codec.hpp"

#include <cstring>
#include <stdexcept>

namespace nve {

namespace {

// Sequential reader over a byte span; every read reports success so
// malformed input surfaces as std::nullopt, never UB.
struct Cursor {
    std::span<const std::uint8_t> in;
    std::size_t pos = 0;

    bool read_u64(std::uint64_t& v) {
        if (in.size() - pos < 8) return false;
        v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(in[pos + i]) << (8 * i);
        pos += 8;
        return true;
    }

    bool read_u8(std::uint8_t& v) {
        if (pos >= in.size()) return false;
        v = in[pos++];
        return true;
    }

    bool read_bytes(std::size_t n, std::span<const std::uint8_t>& out) {
        if (in.size() - pos < n) return false;
        out = in.subspan(pos, n);
        pos += n;
        return true;
    }

    bool done() const { return pos == in.size(); }
};

bool read_tag(Cursor& c, MacTag& tag) {
    std::span<const std::uint8_t> raw;
    if (!c.read_bytes(tag.bytes.size(), raw)) return false;
    std::memcpy(tag.bytes.data(), raw.data(), tag.bytes.size());
    return true;
}

void put_tag(Bytes& out, const MacTag& tag) {
    out.insert(out.end(), tag.bytes.begin(), tag.bytes.end());
}

bool read_auth_msg(Cursor& c, AuthorizedMessage& m) {
    std::uint64_t len = 0;
    if (!c.read_u64(len)) return false;
    std::span<const std::uint8_t> payload;
    if (!c.read_bytes(len, payload)) return false;
    m.payload.assign(payload.begin(), payload.end());
    return read_tag(c, m.tag);
}

void put_auth_msg(Bytes& out, const AuthorizedMessage& m) {
    put_u64(out, m.payload.size());
    out.insert(out.end(), m.payload.begin(), m.payload.end());
    put_tag(out, m.tag);
}

} // namespace

const char* kind_name(MessageKind kind) {
    switch (kind) {
        case MessageKind::InitRequest: return "init-request";
        case MessageKind::InitResponse: return "init-response";
        case MessageKind::UpdateRequest: return "update-request";
        case MessageKind::UpdateResponse: return "update-response";
        case MessageKind::DiffCommit: return "diff-commit";
        case MessageKind::StateCommit: return "state-commit";
        case MessageKind::AuditRequest: return "audit-request";
        case MessageKind::AuditResponse: return "audit-response";
        case MessageKind::AuditVerdict: return "audit-verdict";
    }
    return "unknown";
}

void put_u64(Bytes& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(std::uint8_t(v >> (8 * i)));
}

Bytes encode_state(const ConcreteState& s) {
    Bytes out;
    put_u64(out, s.grid->width());
    put_u64(out, s.grid->height());
    put_u64(out, s.grid->block());
    for (Cell c : s.grid->cells()) out.push_back(std::uint8_t(c));
    put_u64(out, s.avatars.size());
    for (const auto& [id, pos] : s.avatars) {
        put_u64(out, id);
        put_u64(out, pos.x);
        put_u64(out, pos.y);
    }
    put_u64(out, s.cycle);
    return out;
}

std::optional<ConcreteState> decode_state(std::span<const std::uint8_t> in) {
    Cursor c{in};
    std::uint64_t width = 0, height = 0, block = 0;
    if (!c.read_u64(width) || !c.read_u64(height) || !c.read_u64(block)) return std::nullopt;
    if (block == 0 || width < block || height < block || width % block || height % block)
        return std::nullopt;
    std::span<const std::uint8_t> raw;
    if (!c.read_bytes(width * height, raw)) return std::nullopt;
    std::vector<Cell> cells(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] > 1) return std::nullopt;
        cells[i] = Cell(raw[i]);
    }
    ConcreteState s;
    s.grid = std::make_shared<CellGrid>(width, height, block, std::move(cells));
    std::uint64_t count = 0;
    if (!c.read_u64(count)) return std::nullopt;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t id = 0, x = 0, y = 0;
        if (!c.read_u64(id) || !c.read_u64(x) || !c.read_u64(y)) return std::nullopt;
        s.avatars[id] = {x, y};
    }
    if (s.avatars.size() != count) return std::nullopt; // duplicate ids
    if (!c.read_u64(s.cycle)) return std::nullopt;
    if (!c.done()) return std::nullopt;
    return s;
}

Bytes encode_diff(const ConcreteDiff& d) {
    if (d.moves.empty()) throw std::invalid_argument("encode_diff: empty diff");
    Bytes out;
    put_u64(out, d.moves.size());
    for (const auto& [id, pos] : d.moves) {
        put_u64(out, id);
        put_u64(out, pos.x);
        put_u64(out, pos.y);
    }
    return out;
}

std::optional<ConcreteDiff> decode_diff(std::span<const std::uint8_t> in) {
    Cursor c{in};
    std::uint64_t count = 0;
    if (!c.read_u64(count) || count == 0) return std::nullopt;
    ConcreteDiff d;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t id = 0, x = 0, y = 0;
        if (!c.read_u64(id) || !c.read_u64(x) || !c.read_u64(y)) return std::nullopt;
        d.moves[id] = {x, y};
    }
    if (d.moves.size() != count || !c.done()) return std::nullopt;
    return d;
}

Bytes encode_abstract_diff(const AbstractDiff& d) {
    if (d.moves.empty()) throw std::invalid_argument("encode_abstract_diff: empty diff");
    Bytes out;
    put_u64(out, d.moves.size());
    for (const auto& [id, r] : d.moves) {
        put_u64(out, id);
        put_u64(out, r.rx);
        put_u64(out, r.ry);
    }
    return out;
}

std::optional<AbstractDiff> decode_abstract_diff(std::span<const std::uint8_t> in) {
    Cursor c{in};
    std::uint64_t count = 0;
    if (!c.read_u64(count) || count == 0) return std::nullopt;
    AbstractDiff d;
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint64_t id = 0, rx = 0, ry = 0;
        if (!c.read_u64(id) || !c.read_u64(rx) || !c.read_u64(ry)) return std::nullopt;
        d.moves[id] = {rx, ry};
    }
    if (d.moves.size() != count || !c.done()) return std::nullopt;
    return d;
}

Bytes encode_message(const WireMessage& m) {
    Bytes out;
    out.push_back(std::uint8_t(m.kind));
    put_u64(out, m.sender);
    put_u64(out, m.cycle);
    put_u64(out, m.body.size());
    out.insert(out.end(), m.body.begin(), m.body.end());
    return out;
}

std::optional<WireMessage> decode_message(std::span<const std::uint8_t> in) {
    Cursor c{in};
    std::uint8_t kind = 0;
    if (!c.read_u8(kind)) return std::nullopt;
    if (kind > std::uint8_t(MessageKind::AuditVerdict)) return std::nullopt;
    WireMessage m;
    m.kind = MessageKind(kind);
    std::uint64_t body_len = 0;
    if (!c.read_u64(m.sender) || !c.read_u64(m.cycle) || !c.read_u64(body_len)) return std::nullopt;
    std::span<const std::uint8_t> body;
    if (!c.read_bytes(body_len, body)) return std::nullopt;
    if (!c.done()) return std::nullopt;
    m.body.assign(body.begin(), body.end());
    return m;
}

Bytes make_response_body(const AuthorizedMessage& m) {
    Bytes out;
    out.reserve(1 + m.payload.size() + m.tag.bytes.size());
    out.push_back(0);
    if (!m.payload.empty()) out.insert(out.end(), m.payload.begin(), m.payload.end());
    put_tag(out, m.tag);
    return out;
}

Bytes make_rejection_body() { return Bytes{1}; }

bool response_rejected(std::span<const std::uint8_t> body) {
    return body.empty() || body.front() != 0;
}

std::optional<AuthorizedMessage> parse_response_body(std::span<const std::uint8_t> body) {
    // status byte, at least an 8-byte nonce, 16-byte tag
    if (body.empty() || body.front() != 0 || body.size() < 1 + 8 + 16) return std::nullopt;
    AuthorizedMessage m;
    m.payload.assign(body.begin() + 1, body.end() - 16);
    std::memcpy(m.tag.bytes.data(), body.data() + body.size() - 16, 16);
    return m;
}

std::optional<std::pair<Bytes, Nonce>> split_payload_nonce(std::span<const std::uint8_t> payload) {
    if (payload.size() < 8) return std::nullopt;
    Bytes content(payload.begin(), payload.end() - 8);
    Nonce nonce = 0;
    for (int i = 0; i < 8; ++i) nonce |= Nonce(payload[payload.size() - 8 + i]) << (8 * i);
    return std::make_pair(std::move(content), nonce);
}

Bytes encode_evidence(const AuditEvidence& ev) {
    Bytes out;
    put_u64(out, ev.ta);
    const Bytes state = encode_state(ev.start_state);
    put_u64(out, state.size());
    out.insert(out.end(), state.begin(), state.end());
    put_u64(out, ev.diffs.size());
    for (const auto& [cycle, diff] : ev.diffs) {
        put_u64(out, cycle);
        const Bytes d = encode_diff(diff);
        put_u64(out, d.size());
        out.insert(out.end(), d.begin(), d.end());
    }
    put_u64(out, ev.msgs.size());
    for (const auto& [cycle, msg] : ev.msgs) {
        put_u64(out, cycle);
        out.push_back(msg ? 1 : 0);
        if (msg) put_auth_msg(out, *msg);
    }
    out.push_back(ev.init_msg ? 1 : 0);
    if (ev.init_msg) put_auth_msg(out, *ev.init_msg);
    return out;
}

std::optional<AuditEvidence> decode_evidence(std::span<const std::uint8_t> in) {
    Cursor c{in};
    AuditEvidence ev;
    if (!c.read_u64(ev.ta)) return std::nullopt;
    std::uint64_t state_len = 0;
    if (!c.read_u64(state_len)) return std::nullopt;
    std::span<const std::uint8_t> state_raw;
    if (!c.read_bytes(state_len, state_raw)) return std::nullopt;
    auto state = decode_state(state_raw);
    if (!state) return std::nullopt;
    ev.start_state = std::move(*state);
    std::uint64_t n = 0;
    if (!c.read_u64(n)) return std::nullopt;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t cycle = 0, len = 0;
        if (!c.read_u64(cycle) || !c.read_u64(len)) return std::nullopt;
        std::span<const std::uint8_t> raw;
        if (!c.read_bytes(len, raw)) return std::nullopt;
        auto diff = decode_diff(raw);
        if (!diff) return std::nullopt;
        ev.diffs[cycle] = std::move(*diff);
    }
    if (!c.read_u64(n)) return std::nullopt;
    for (std::uint64_t i = 0; i < n; ++i) {
        std::uint64_t cycle = 0;
        std::uint8_t present = 0;
        if (!c.read_u64(cycle) || !c.read_u8(present)) return std::nullopt;
        if (present) {
            AuthorizedMessage m;
            if (!read_auth_msg(c, m)) return std::nullopt;
            ev.msgs[cycle] = std::move(m);
        } else {
            ev.msgs[cycle] = std::nullopt;
        }
    }
    std::uint8_t has_init = 0;
    if (!c.read_u8(has_init)) return std::nullopt;
    if (has_init) {
        AuthorizedMessage m;
        if (!read_auth_msg(c, m)) return std::nullopt;
        ev.init_msg = std::move(m);
    }
    if (!c.done()) return std::nullopt;
    return ev;
}

} // namespace nve
