#pragma once

#include <map>
#include <set>
#include <vector>

#include "nve/codec.hpp"
#include "nve/types.hpp"

namespace nve {

using EndpointId = std::uint64_t;

enum class DeliveryKind : std::uint8_t { Unreliable, ReliableBy };

struct Delivery {
    DeliveryKind kind = DeliveryKind::Unreliable;
    Cycle deadline = 0; // ReliableBy only: must arrive before this cycle begins

    static Delivery unreliable() { return {DeliveryKind::Unreliable, 0}; }
    static Delivery reliable_by(Cycle deadline) { return {DeliveryKind::ReliableBy, deadline}; }
};

struct Envelope {
    WireMessage message;
    EndpointId from = 0;
    EndpointId to = 0;
    Cycle sent_cycle = 0;
    Delivery delivery;
    bool faulted = false; // delayed past contract by explicit fault injection
};

struct FabricConfig {
    double drop_probability = 0.0; // Unreliable traffic only
    Cycle max_delay = 0;           // Unreliable traffic only
    std::uint64_t seed = 0;
};

// Deliberate violation of the reliable contract, for testing deadline
// enforcement: the matching message is delivered `delay` cycles late.
struct FaultRule {
    EndpointId from = 0;
    MessageKind kind = MessageKind::DiffCommit;
    Cycle cycle = 0;
    Cycle delay = 0;
};

struct SendResult {
    bool enqueued = false;
    Cycle scheduled = 0;
};

struct ChannelStats {
    std::uint64_t messages = 0;
    std::uint64_t bytes = 0;
};

// Lockstep message fabric. ReliableBy traffic is never dropped and arrives
// before its deadline cycle begins (the fabric asserts this, fault-injected
// envelopes excepted); Unreliable traffic is dropped with the configured
// probability and otherwise delayed by a uniform number of cycles.
class Fabric {
public:
    explicit Fabric(FabricConfig cfg);

    void register_endpoint(EndpointId id);
    void add_fault(FaultRule rule);

    // Throws std::invalid_argument for unregistered endpoints or a
    // ReliableBy deadline not after the current cycle.
    SendResult send(Envelope env);

    // Advances the clock and returns everything due at the new cycle, in
    // (scheduled cycle, send order).
    std::vector<Envelope> advance_cycle();

    // Returns envelopes that became due at the current cycle since the last
    // drain (same-cycle sends).
    std::vector<Envelope> collect_due();

    Cycle now() const { return now_; }

    // Cumulative per-sender, per-kind counters over everything sent
    // (dropped messages consumed bandwidth too).
    const std::map<EndpointId, std::map<MessageKind, ChannelStats>>& accounting() const {
        return accounting_;
    }

    std::uint64_t unreliable_sent() const { return unreliable_sent_; }
    std::uint64_t unreliable_dropped() const { return unreliable_dropped_; }

private:
    FabricConfig cfg_;
    Rng rng_;
    Cycle now_ = 0;
    std::uint64_t next_seq_ = 0;
    std::map<std::pair<Cycle, std::uint64_t>, Envelope> queue_;
    std::set<EndpointId> endpoints_;
    std::vector<FaultRule> faults_;
    std::map<EndpointId, std::map<MessageKind, ChannelStats>> accounting_;
    std::uint64_t unreliable_sent_ = 0;
    std::uint64_t unreliable_dropped_ = 0;

    std::vector<Envelope> drain_due();
};

} // namespace nve
