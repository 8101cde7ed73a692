#include <algorithm>
#include <cctype>
#include <sstream>

#include "nve/harness.hpp"

namespace nve {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::uint64_t parse_u64(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const std::uint64_t v = std::stoull(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ScenarioError(line, "expected an unsigned integer, got '" + s + "'");
    }
}

double parse_probability(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size() || v < 0.0 || v > 1.0) throw std::invalid_argument("range");
        return v;
    } catch (const std::exception&) {
        throw ScenarioError(line, "expected a probability in [0,1], got '" + s + "'");
    }
}

// "x,y" pairs, possibly several separated by whitespace
std::vector<Position> parse_points(const std::vector<std::string>& toks, int line) {
    std::vector<Position> out;
    for (const std::string& tok : toks) {
        const auto comma = tok.find(',');
        if (comma == std::string::npos) throw ScenarioError(line, "expected x,y; got '" + tok + "'");
        out.push_back({parse_u64(tok.substr(0, comma), line), parse_u64(tok.substr(comma + 1), line)});
    }
    return out;
}

} // namespace

AuditStrategy parse_audit_strategy(const std::string& text, std::uint64_t seed) {
    AuditStrategy s;
    s.seed = seed;
    if (text == "every-boundary") {
        s.kind = AuditStrategy::Kind::EveryBoundary;
        return s;
    }
    if (text.starts_with("random:")) {
        s.kind = AuditStrategy::Kind::RandomBoundary;
        s.probability = parse_probability(text.substr(7), 0);
        return s;
    }
    if (text.starts_with("on-demand:")) {
        s.kind = AuditStrategy::Kind::OnDemand;
        // t0@client pairs; clients are addressed by id (1-based file order)
        std::string rest = text.substr(10);
        std::replace(rest.begin(), rest.end(), ';', ' ');
        for (const std::string& tok : split_ws(rest)) {
            const auto at = tok.find('@');
            if (at == std::string::npos)
                throw std::invalid_argument("on-demand trigger needs t0@client-id");
            s.triggers.push_back(
                {parse_u64(tok.substr(0, at), 0), parse_u64(tok.substr(at + 1), 0)});
        }
        return s;
    }
    throw std::invalid_argument("unknown audit strategy '" + text + "'");
}

CheatProfile parse_cheat(const std::string& text) {
    CheatProfile p;
    if (text == "none") return p;
    auto at = text.find('@');
    if (at == std::string::npos) throw std::invalid_argument("cheat needs kind@cycle");
    const std::string kind = text.substr(0, at);
    const std::string args = text.substr(at + 1);
    auto comma = args.find(',');
    p.at = std::stoull(comma == std::string::npos ? args : args.substr(0, comma));
    if (comma != std::string::npos) p.altered = std::stoull(args.substr(comma + 1));
    if (kind == "wallhack") p.kind = CheatProfile::Kind::Wallhack;
    else if (kind == "out-of-gamma") p.kind = CheatProfile::Kind::OutOfGamma;
    else if (kind == "rewrite-history") p.kind = CheatProfile::Kind::RewriteHistory;
    else if (kind == "forge-server-msg") p.kind = CheatProfile::Kind::ForgeServerMsg;
    else if (kind == "fake-state-commit") p.kind = CheatProfile::Kind::FakeStateCommit;
    else throw std::invalid_argument("unknown cheat '" + kind + "'");
    if (p.kind == CheatProfile::Kind::RewriteHistory && comma == std::string::npos)
        throw std::invalid_argument("rewrite-history needs cheat-cycle,altered-cycle");
    return p;
}

Scenario parse_scenario(const std::string& text, const std::string& name) {
    Scenario sc;
    sc.name = name;
    sc.audit.kind = AuditStrategy::Kind::EveryBoundary;

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    std::string section;
    ClientSpec* client = nullptr;
    bool have_l = false, have_cycles = false;

    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line.front() == ';') continue;

        if (line.front() == '[') {
            if (line.back() != ']') throw ScenarioError(lineno, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            client = nullptr;
            if (section.starts_with("client")) {
                const std::string cname = trim(section.substr(6));
                if (cname.empty()) throw ScenarioError(lineno, "client section needs a name");
                for (const ClientSpec& c : sc.clients)
                    if (c.name == cname) throw ScenarioError(lineno, "duplicate client '" + cname + "'");
                sc.clients.push_back(ClientSpec{cname, {0, 0}, BehaviorScript::stay(), {}});
                client = &sc.clients.back();
                section = "client";
            } else if (section != "world" && section != "protocol" && section != "network" &&
                       section != "audit" && section != "faults") {
                throw ScenarioError(lineno, "unknown section [" + section + "]");
            }
            continue;
        }

        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ScenarioError(lineno, "expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (section == "world") {
            if (key == "block") sc.block = parse_u64(value, lineno);
            else if (key == "map") sc.map_rows.push_back(value);
            else throw ScenarioError(lineno, "unknown world key '" + key + "'");
        } else if (section == "protocol") {
            if (key == "l") { sc.l = parse_u64(value, lineno); have_l = true; }
            else if (key == "cycles") { sc.cycles = parse_u64(value, lineno); have_cycles = true; }
            else if (key == "seed") sc.seed = parse_u64(value, lineno);
            else throw ScenarioError(lineno, "unknown protocol key '" + key + "'");
        } else if (section == "network") {
            if (key == "drop") sc.network.drop = parse_probability(value, lineno);
            else if (key == "max_delay") sc.network.max_delay = parse_u64(value, lineno);
            else throw ScenarioError(lineno, "unknown network key '" + key + "'");
        } else if (section == "audit") {
            if (key == "strategy") {
                try {
                    sc.audit = parse_audit_strategy(value, sc.audit.seed);
                } catch (const std::exception& e) {
                    throw ScenarioError(lineno, e.what());
                }
            } else if (key == "seed") {
                sc.audit.seed = parse_u64(value, lineno);
            } else {
                throw ScenarioError(lineno, "unknown audit key '" + key + "'");
            }
        } else if (section == "faults") {
            if (key != "delay") throw ScenarioError(lineno, "unknown faults key '" + key + "'");
            const auto toks = split_ws(value);
            if (toks.size() != 4) throw ScenarioError(lineno, "delay = <client> <diff-commit|state-commit> <cycle> <cycles-late>");
            FaultSpec f;
            f.client = toks[0];
            if (toks[1] == "diff-commit") f.kind = MessageKind::DiffCommit;
            else if (toks[1] == "state-commit") f.kind = MessageKind::StateCommit;
            else throw ScenarioError(lineno, "fault kind must be diff-commit or state-commit");
            f.cycle = parse_u64(toks[2], lineno);
            f.delay = parse_u64(toks[3], lineno);
            sc.faults.push_back(f);
        } else if (section == "client") {
            if (key == "spawn") {
                const auto pts = parse_points({value}, lineno);
                client->spawn = {pts[0].x, pts[0].y};
            } else if (key == "script") {
                auto toks = split_ws(value);
                if (toks.empty()) throw ScenarioError(lineno, "empty script");
                const std::string kind = toks.front();
                toks.erase(toks.begin());
                if (kind == "stay") client->script = BehaviorScript::stay();
                else if (kind == "waypoints") client->script = BehaviorScript::waypoints(parse_points(toks, lineno));
                else if (kind == "targets") client->script = BehaviorScript::targets(parse_points(toks, lineno));
                else throw ScenarioError(lineno, "unknown script kind '" + kind + "'");
            } else if (key == "cheat") {
                try {
                    client->cheat = parse_cheat(value);
                } catch (const std::exception& e) {
                    throw ScenarioError(lineno, e.what());
                }
            } else {
                throw ScenarioError(lineno, "unknown client key '" + key + "'");
            }
        } else {
            throw ScenarioError(lineno, "key outside any section");
        }
    }

    // Guards. These mirror the runtime invariants so bad files fail fast.
    if (sc.map_rows.empty()) throw ScenarioError(lineno, "missing [world] map");
    if (!have_l || !have_cycles) throw ScenarioError(lineno, "missing [protocol] l or cycles");
    if (sc.l < 2) throw ScenarioError(lineno, "l must be at least 2");
    if (sc.cycles < 3 * sc.l) throw ScenarioError(lineno, "cycles must be at least 3l");
    if (sc.clients.empty()) throw ScenarioError(lineno, "no clients");
    CellGrid grid = [&] {
        try {
            return CellGrid::from_rows(sc.map_rows, sc.block);
        } catch (const std::exception& e) {
            throw ScenarioError(lineno, e.what());
        }
    }();
    for (const ClientSpec& c : sc.clients) {
        if (!grid.region_in_bounds(c.spawn))
            throw ScenarioError(lineno, "spawn region out of bounds for '" + c.name + "'");
        if (grid.free_cells_in(c.spawn).empty())
            throw ScenarioError(lineno, "spawn region has no free cell for '" + c.name + "'");
        for (const Position& p : c.script.points)
            if (!grid.in_bounds(p))
                throw ScenarioError(lineno, "script point out of bounds for '" + c.name + "'");
        const CheatProfile& cheat = c.cheat;
        if (cheat.kind != CheatProfile::Kind::None) {
            if (cheat.at == 0 || cheat.at > sc.cycles)
                throw ScenarioError(lineno, "cheat cycle outside the run for '" + c.name + "'");
            if (cheat.kind == CheatProfile::Kind::FakeStateCommit && cheat.at % sc.l != 0)
                throw ScenarioError(lineno, "fake-state-commit needs a boundary cycle for '" +
                                                c.name + "'");
            if (cheat.kind == CheatProfile::Kind::RewriteHistory && cheat.altered >= cheat.at)
                throw ScenarioError(lineno, "rewrite-history must alter an earlier cycle for '" +
                                                c.name + "'");
        }
    }
    for (const FaultSpec& f : sc.faults) {
        const bool known = std::any_of(sc.clients.begin(), sc.clients.end(),
                                       [&](const ClientSpec& c) { return c.name == f.client; });
        if (!known) throw ScenarioError(lineno, "fault references unknown client '" + f.client + "'");
    }
    return sc;
}

Scenario tunnel_scenario() {
    Scenario sc;
    sc.name = "tunnel";
    sc.map_rows = {"########", "#..##..#", "#..##..#", "########"};
    sc.block = 4;
    sc.l = 10;
    sc.cycles = 60;
    sc.seed = 7;
    sc.audit.kind = AuditStrategy::Kind::EveryBoundary;
    sc.audit.seed = 11;
    sc.clients.push_back({"alice", {0, 0}, BehaviorScript::waypoints({{1, 1}, {2, 2}}), {}});
    sc.clients.push_back({"bob", {1, 0}, BehaviorScript::waypoints({{5, 1}, {6, 2}}), {}});
    return sc;
}

Scenario open_field_scenario() {
    Scenario sc;
    sc.name = "open-field";
    sc.map_rows = {"########", "#......#", "#......#", "#......#",
                   "#......#", "#......#", "#......#", "########"};
    sc.block = 4;
    sc.l = 10;
    sc.cycles = 500;
    sc.seed = 3;
    sc.audit.kind = AuditStrategy::Kind::RandomBoundary;
    sc.audit.probability = 0.3;
    sc.audit.seed = 21;
    sc.clients.push_back({"alice", {0, 0}, BehaviorScript::waypoints({{1, 1}, {6, 1}, {6, 6}, {1, 6}}), {}});
    sc.clients.push_back({"bob", {1, 1}, BehaviorScript::waypoints({{6, 6}, {1, 6}, {1, 1}, {6, 1}}), {}});
    sc.clients.push_back({"carol", {0, 1}, BehaviorScript::waypoints({{1, 6}, {1, 1}, {6, 1}}), {}});
    return sc;
}

} // namespace nve
