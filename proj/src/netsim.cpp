#include "nve/netsim.hpp"

#include <cassert>
#include <stdexcept>

namespace nve {

Fabric::Fabric(FabricConfig cfg) : cfg_(cfg), rng_(Rng::derive(cfg.seed, 0x6e657473696dULL)) {}

void Fabric::register_endpoint(EndpointId id) { endpoints_.insert(id); }

void Fabric::add_fault(FaultRule rule) { faults_.push_back(rule); }

SendResult Fabric::send(Envelope env) {
    if (!endpoints_.contains(env.from) || !endpoints_.contains(env.to))
        throw std::invalid_argument("fabric: unknown endpoint");
    env.sent_cycle = now_;

    auto& stats = accounting_[env.from][env.message.kind];
    stats.messages += 1;
    stats.bytes += encode_message(env.message).size();

    Cycle scheduled = now_;
    if (env.delivery.kind == DeliveryKind::Unreliable) {
        unreliable_sent_ += 1;
        if (cfg_.drop_probability > 0.0 && rng_.next_double() < cfg_.drop_probability) {
            unreliable_dropped_ += 1;
            return {false, 0};
        }
        if (cfg_.max_delay > 0) scheduled = now_ + rng_.below(cfg_.max_delay + 1);
    } else {
        if (env.delivery.deadline <= now_)
            throw std::invalid_argument("fabric: reliable deadline not after current cycle");
    }

    for (const FaultRule& f : faults_) {
        if (f.from == env.from && f.kind == env.message.kind && f.cycle == env.message.cycle) {
            scheduled += f.delay;
            env.faulted = true;
        }
    }

    // Reliable contract: in time unless deliberately faulted.
    assert(env.delivery.kind == DeliveryKind::Unreliable || env.faulted ||
           scheduled < env.delivery.deadline);

    queue_.emplace(std::make_pair(scheduled, next_seq_++), std::move(env));
    return {true, scheduled};
}

std::vector<Envelope> Fabric::drain_due() {
    std::vector<Envelope> due;
    auto it = queue_.begin();
    while (it != queue_.end() && it->first.first <= now_) {
        due.push_back(std::move(it->second));
        it = queue_.erase(it);
    }
    return due;
}

std::vector<Envelope> Fabric::advance_cycle() {
    now_ += 1;
    return drain_due();
}

std::vector<Envelope> Fabric::collect_due() { return drain_due(); }

} // namespace nve
