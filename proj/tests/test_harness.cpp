#include <sstream>

#include "doctest.h"
#include "nve/harness.hpp"

using namespace nve;

namespace {

const char* kTunnelFile =
    "; canonical tunnel scenario\n"
    "[world]\n"
    "block = 4\n"
    "map = ########\n"
    "map = #..##..#\n"
    "map = #..##..#\n"
    "map = ########\n"
    "\n"
    "[protocol]\n"
    "l = 10\n"
    "cycles = 60\n"
    "seed = 7\n"
    "\n"
    "[audit]\n"
    "strategy = every-boundary\n"
    "seed = 11\n"
    "\n"
    "[client alice]\n"
    "spawn = 0,0\n"
    "script = waypoints 1,1 2,2\n"
    "cheat = wallhack@37\n"
    "\n"
    "[client bob]\n"
    "spawn = 1,0\n"
    "script = waypoints 5,1 6,2\n";

} // namespace

TEST_CASE("the tunnel scenario file parses with both regions passable") {
    const Scenario sc = parse_scenario(kTunnelFile, "tunnel");
    CHECK(sc.block == 4);
    CHECK(sc.l == 10);
    CHECK(sc.clients.size() == 2);
    CHECK(sc.clients[0].cheat.kind == CheatProfile::Kind::Wallhack);
    CHECK(sc.clients[0].cheat.at == 37);
    const CellGrid grid = CellGrid::from_rows(sc.map_rows, sc.block);
    CHECK(grid.free_cells_in({0, 0}).size() == 4);
    CHECK(grid.free_cells_in({1, 0}).size() == 4);
}

TEST_CASE("scenario guards reject bad files with line information") {
    CHECK_THROWS_AS(parse_scenario("[world]\nblock = 3\nmap = ####\n"
                                   "[protocol]\nl = 10\ncycles = 60\n"
                                   "[client a]\nspawn = 0,0\n"),
                    ScenarioError);
    CHECK_THROWS_AS(parse_scenario("[world]\nblock = 2\nmap = ....\nmap = ....\n"
                                   "[protocol]\nl = 1\ncycles = 60\n"
                                   "[client a]\nspawn = 0,0\n"),
                    ScenarioError);
    CHECK_THROWS_AS(parse_scenario("[world]\nblock = 2\nmap = ....\nmap = ....\n"
                                   "[protocol]\nl = 10\ncycles = 20\n"
                                   "[client a]\nspawn = 0,0\n"),
                    ScenarioError);
    CHECK_THROWS_AS(parse_scenario("nonsense\n"), ScenarioError);
    try {
        parse_scenario("[world]\nblock = x\n");
    } catch (const ScenarioError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("an honest tunnel run passes every audit") {
    Scenario sc = tunnel_scenario();
    const RunMetrics m = run(sc);
    CHECK(m.reports.size() == 2 * 5); // boundaries 20..60, two clients
    for (const AuditReport& r : m.reports) CHECK(r.accepted);
    CHECK_FALSE(m.detected.at("alice"));
    CHECK_FALSE(m.detected.at("bob"));
}

TEST_CASE("the wallhack is first rejected at the boundary after the cheat") {
    const Scenario sc = parse_scenario(kTunnelFile, "tunnel");
    const RunMetrics m = run(sc);
    CHECK(m.detected.at("alice"));
    CHECK(m.first_reject.at("alice") == 40);
    CHECK_FALSE(m.detected.at("bob"));
    for (const AuditReport& r : m.reports) {
        if (r.client != m.client_ids.at("alice")) continue;
        if (r.t0 == 40) CHECK(r.has_reason(AuditCheck::Step5Rules, 37));
        if (r.t0 == 30) CHECK(r.accepted);
    }
}

TEST_CASE("identical scenario and seed give byte-identical records") {
    const Scenario sc = parse_scenario(kTunnelFile, "tunnel");
    const RunMetrics a = run(sc);
    const RunMetrics b = run(sc);
    CHECK(a.log == b.log);
}

TEST_CASE("byte accounting matches the codec layout") {
    Scenario sc = tunnel_scenario();
    const RunMetrics m = run(sc);

    // Requests carry one abstract move and no MAC: 25-byte frame header
    // plus an 8 + 24 byte body.
    const ChannelStats alice_req = m.traffic.at("alice").at(MessageKind::UpdateRequest);
    CHECK(alice_req.messages == sc.cycles);
    CHECK(alice_req.bytes == alice_req.messages * (25 + 32));

    // Responses report both avatars and exactly one 16-byte tag:
    // status + (8 + 2*24) + nonce + tag = 81-byte body.
    const ChannelStats responses = m.traffic.at("state-server").at(MessageKind::UpdateResponse);
    CHECK(responses.messages == 2 * sc.cycles);
    CHECK(responses.bytes == responses.messages * (25 + 1 + 56 + 8 + 16));

    // Commitments are pure 16-byte tags.
    const ChannelStats commits = m.traffic.at("alice").at(MessageKind::DiffCommit);
    CHECK(commits.messages == sc.cycles);
    CHECK(commits.bytes == commits.messages * (25 + 16));

    CHECK(m.max_diff_bytes == 8 + 2 * 24);
    CHECK(m.max_msg_bytes == 25 + 1 + 56 + 8 + 16);
}

TEST_CASE("audit traffic is bounded by the window content") {
    Scenario sc = tunnel_scenario();
    const RunMetrics m = run(sc);
    // Evidence frame: header and counters, the start state, then at most 3l
    // diff entries (16-byte framing each) and 3l message entries (33-byte
    // framing and tag each), plus the optional init message.
    const std::uint64_t l = sc.l;
    const std::uint64_t state_bytes = 24 + 32 + 8 + 2 * 24 + 8;
    const std::uint64_t msg_payload = m.max_msg_bytes - 25 - 1 - 16;
    const std::uint64_t bound = 25 + 8 + (8 + state_bytes) + 8 +
                                3 * l * (16 + m.max_diff_bytes) + 8 +
                                3 * l * (33 + msg_payload) + 1 + (8 + state_bytes + 8 + 16);
    CHECK(m.max_audit_response_bytes > 0);
    CHECK(m.max_audit_response_bytes <= bound);
}

TEST_CASE("lossy update channels do not produce false accusations") {
    Scenario sc = tunnel_scenario();
    sc.network.drop = 0.2;
    sc.seed = 99;
    const RunMetrics m = run(sc);
    CHECK(m.reports.size() == 10);
    for (const AuditReport& r : m.reports) CHECK(r.accepted);
}

TEST_CASE("a withheld diff commitment poisons the next audit") {
    Scenario sc = tunnel_scenario();
    sc.faults.push_back({"alice", MessageKind::DiffCommit, 42, 1});
    const RunMetrics m = run(sc);
    bool saw_flag = false;
    for (const AuditReport& r : m.reports) {
        if (r.client != m.client_ids.at("alice")) continue;
        if (r.t0 < 50) CHECK(r.accepted);
        else {
            CHECK_FALSE(r.accepted);
            CHECK(r.has_reason(AuditCheck::Deadline, 42));
            saw_flag = true;
        }
    }
    CHECK(saw_flag);
}

TEST_CASE("verdicts are isolated per client in a mixed population") {
    Scenario sc = open_field_scenario();
    sc.cycles = 60;
    sc.audit.kind = AuditStrategy::Kind::EveryBoundary;
    sc.clients[0].cheat = parse_cheat("wallhack@33");
    sc.clients[1].cheat = parse_cheat("rewrite-history@27,25");
    const RunMetrics m = run(sc);

    CHECK(m.detected.at("alice"));
    CHECK(m.first_reject.at("alice") == 40); // 33 first covered by (20, 40]
    CHECK(m.detected.at("bob"));
    CHECK(m.first_reject.at("bob") == 30); // the rewrite at 27 hit cycle 25
    CHECK_FALSE(m.detected.at("carol"));

    for (const AuditReport& r : m.reports) {
        if (r.client == m.client_ids.at("alice") && r.t0 == 40)
            CHECK(r.has_reason(AuditCheck::Step5Rules, 33));
        if (r.client == m.client_ids.at("bob") && r.t0 == 30)
            CHECK(r.has_reason(AuditCheck::Step6bMacD, 25));
        if (r.client == m.client_ids.at("carol")) CHECK(r.accepted);
    }
}

TEST_CASE("scenario guards reject misplaced cheats") {
    std::string text(kTunnelFile);
    text.replace(text.find("wallhack@37"), 11, "fake-state-commit@35");
    CHECK_THROWS_AS(parse_scenario(text, "bad"), ScenarioError);
    std::string text2(kTunnelFile);
    text2.replace(text2.find("wallhack@37"), 11, "rewrite-history@30,30");
    CHECK_THROWS_AS(parse_scenario(text2, "bad"), ScenarioError);
    std::string text3(kTunnelFile);
    text3.replace(text3.find("wallhack@37"), 11, "wallhack@99");
    CHECK_THROWS_AS(parse_scenario(text3, "bad"), ScenarioError);
}

TEST_CASE("on-demand audits fire at their trigger") {
    Scenario sc = tunnel_scenario();
    sc.audit = parse_audit_strategy("on-demand:40@1;50@2", 1);
    const RunMetrics m = run(sc);
    REQUIRE(m.reports.size() == 2);
    CHECK(m.reports[0].t0 == 40);
    CHECK(m.reports[0].client == 1);
    CHECK(m.reports[1].t0 == 50);
    CHECK(m.reports[1].client == 2);
}

TEST_CASE("degenerate detection probabilities") {
    const DetectionPoint zero = detection_experiment(0.0, 50, 10, 100, 5);
    CHECK(zero.rate == 0.0);
    const DetectionPoint one = detection_experiment(1.0, 50, 10, 100, 5);
    CHECK(one.rate == 1.0);
}

TEST_CASE("the self-test suite passes") {
    for (const SelfTestResult& r : run_selftest()) {
        INFO(r.name, ": ", r.detail);
        CHECK(r.pass);
    }
}
