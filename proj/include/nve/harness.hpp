#pragma once

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "nve/audit_server.hpp"
#include "nve/client.hpp"
#include "nve/netsim.hpp"
#include "nve/state_server.hpp"
#include "nve/types.hpp"
#include "nve/world.hpp"

namespace nve {

inline constexpr EndpointId kStateServerEndpoint = 0xfffffffffffffffeULL;
inline constexpr EndpointId kAuditServerEndpoint = 0xffffffffffffffffULL;

struct NetworkConfig {
    double drop = 0.0;   // unreliable traffic drop probability
    Cycle max_delay = 0; // unreliable traffic delay bound
};

struct FaultSpec {
    std::string client;
    MessageKind kind = MessageKind::DiffCommit;
    Cycle cycle = 0;
    Cycle delay = 0;
};

struct ClientSpec {
    std::string name;
    RegionId spawn;
    BehaviorScript script;
    CheatProfile cheat;
};

struct Scenario {
    std::string name = "scenario";
    std::vector<std::string> map_rows;
    std::uint64_t block = 1;
    Cycle l = 10;
    Cycle cycles = 100;
    std::uint64_t seed = 1;
    NetworkConfig network;
    AuditStrategy audit;
    std::vector<FaultSpec> faults;
    std::vector<ClientSpec> clients;
};

class ScenarioError : public std::runtime_error {
public:
    ScenarioError(int line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

// Line-oriented scenario format: [world] / [protocol] / [network] / [audit]
// / [faults] / [client NAME] sections with key = value pairs; repeated
// `map =` keys build the ASCII map row by row ('#' wall, '.' free).
Scenario parse_scenario(const std::string& text, const std::string& name = "scenario");

AuditStrategy parse_audit_strategy(const std::string& text, std::uint64_t seed);
CheatProfile parse_cheat(const std::string& text);

// The canonical 8x4 two-region tunnel, two clients roaming their own
// halves; the map on which abstractly legal jumps are concretely
// impossible.
Scenario tunnel_scenario();

// An open 8x8 field with three roaming clients, randomly sampled audits.
Scenario open_field_scenario();

struct RunHooks {
    std::function<void(Cycle, const std::vector<Client>&)> after_cycle;
};

struct RunMetrics {
    std::vector<AuditReport> reports;
    // Cumulative counters by sender name and message kind.
    std::map<std::string, std::map<MessageKind, ChannelStats>> traffic;
    // Commitment tag bytes (16 per commitment) per client per cycle.
    std::map<std::string, std::map<Cycle, std::uint64_t>> commit_tag_bytes;
    std::uint64_t max_diff_bytes = 0;           // largest committed concrete diff
    std::uint64_t max_msg_bytes = 0;            // largest authorized server response frame
    std::uint64_t max_audit_response_bytes = 0; // largest evidence frame
    std::map<std::string, bool> detected;
    std::map<std::string, Cycle> first_reject;
    std::map<std::string, ClientId> client_ids;
    std::vector<std::string> log; // structured records, byte-deterministic
};

RunMetrics run(const Scenario& sc, const RunHooks& hooks = {});

struct DetectionPoint {
    double q = 0.0;
    std::uint64_t trials = 0;
    std::uint64_t detected = 0;
    double rate = 0.0;
    double analytic = 0.0; // 1 - (1-q)^2: a cheat cycle sits in exactly two audit windows
};

// Monte Carlo estimate of the probability that a single rule-corruption
// cheat at a uniformly random non-boundary cycle is caught under randomly
// sampled boundary audits. Trials are independent with derived seeds and
// may run on multiple threads without changing the result.
DetectionPoint detection_experiment(double q, std::uint64_t trials, Cycle l, Cycle cycles,
                                    std::uint64_t seed);

struct SelfTestResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// Property sweeps runnable from the CLI: abstraction laws, window
// arithmetic, buffer shape, soundness.
std::vector<SelfTestResult> run_selftest();

} // namespace nve
