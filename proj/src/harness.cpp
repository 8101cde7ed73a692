#include "nve/harness.hpp"

#include <algorithm>
#include <cstring>

namespace nve {

namespace {

std::string join_reasons(const AuditReport& report) {
    if (report.reasons.empty()) return "-";
    std::string out;
    for (const AuditReason& r : report.reasons) {
        if (!out.empty()) out += ',';
        out += check_name(r.check);
        out += '@';
        out += std::to_string(r.cycle);
    }
    return out;
}

MacTag tag_from_body(const Bytes& body) {
    MacTag tag;
    if (body.size() != tag.bytes.size())
        throw std::runtime_error("commitment body is not a 16-byte tag");
    std::memcpy(tag.bytes.data(), body.data(), tag.bytes.size());
    return tag;
}

// One simulation instance: owns the actors, moves messages, keeps the books.
class Runner {
public:
    Runner(const Scenario& sc, const RunHooks& hooks)
        : sc_(sc),
          hooks_(hooks),
          grid_(std::make_shared<CellGrid>(CellGrid::from_rows(sc.map_rows, sc.block))),
          fabric_(FabricConfig{sc.network.drop, sc.network.max_delay,
                               Rng::derive(sc.seed, 0x6e6574ULL).next_u64()}),
          key_rng_(Rng::derive(sc.seed, 0x6b657973ULL)),
          server_key_(random_key(key_rng_)),
          server_(grid_, server_key_, Rng::derive(sc.seed, 0x737276ULL).next_u64()),
          audit_(server_key_, sc.l, sc.audit) {
        fabric_.register_endpoint(kStateServerEndpoint);
        fabric_.register_endpoint(kAuditServerEndpoint);
        for (std::size_t i = 0; i < sc.clients.size(); ++i) {
            const ClientSpec& spec = sc.clients[i];
            const ClientId id = static_cast<ClientId>(i + 1);
            const MacKey key = random_key(key_rng_);
            clients_.emplace_back(id, spec.name, key, sc.l, spec.script, spec.cheat);
            index_by_id_[id] = i;
            audit_.register_client(id, key);
            server_.set_spawn_region(id, spec.spawn);
            fabric_.register_endpoint(id);
            metrics_.client_ids[spec.name] = id;
        }
        for (const FaultSpec& f : sc.faults)
            fabric_.add_fault({metrics_.client_ids.at(f.client), f.kind, f.cycle, f.delay});
    }

    RunMetrics run() {
        log("run scenario=" + sc_.name + " seed=" + std::to_string(sc_.seed) +
            " l=" + std::to_string(sc_.l) + " cycles=" + std::to_string(sc_.cycles) +
            " clients=" + std::to_string(clients_.size()));

        // Cycle 0: every client joins, in id order.
        for (Client& c : clients_) {
            send_from_client(c, c.make_init_request());
            pump();
        }
        drain_diagnostics();

        for (Cycle t = 1; t <= sc_.cycles; ++t) {
            for (const Envelope& env : fabric_.advance_cycle()) dispatch(env);
            pump();

            for (Client& c : clients_) {
                if (auto request = c.begin_cycle(t)) {
                    send_from_client(c, *request);
                    pump();
                }
                if (c.initialized() && c.state().cycle != t)
                    for (WireMessage& m : c.end_cycle_without_response(t)) send_from_client(c, m);
                pump();
            }

            if (t % sc_.l == 0 && t >= 2 * sc_.l) {
                for (ClientId target : audit_.schedule_audits(t)) {
                    WireMessage request{MessageKind::AuditRequest, kAuditServerEndpoint, t, {}};
                    fabric_.send({request, kAuditServerEndpoint, target, 0,
                                  Delivery::reliable_by(t + 1)});
                    pump();
                }
            }

            drain_diagnostics();
            if (hooks_.after_cycle) hooks_.after_cycle(t, clients_);
        }

        finalize();
        return std::move(metrics_);
    }

private:
    const Scenario& sc_;
    const RunHooks& hooks_;
    GridPtr grid_;
    Fabric fabric_;
    Rng key_rng_;
    MacKey server_key_;
    StateServer server_;
    AuditServer audit_;
    std::vector<Client> clients_;
    std::map<ClientId, std::size_t> index_by_id_;
    RunMetrics metrics_;

    void log(std::string line) { metrics_.log.push_back(std::move(line)); }

    std::string endpoint_name(EndpointId id) const {
        if (id == kStateServerEndpoint) return "state-server";
        if (id == kAuditServerEndpoint) return "audit-server";
        return clients_[index_by_id_.at(id)].name();
    }

    void send_from_client(Client& c, WireMessage msg) {
        msg.sender = c.id();
        Envelope env;
        env.from = c.id();
        env.message = std::move(msg);
        switch (env.message.kind) {
            case MessageKind::InitRequest:
                // The join handshake is not part of the lossy-gameplay
                // model; without retries a dropped join would wedge the
                // client for the whole run.
                env.to = kStateServerEndpoint;
                env.delivery = Delivery::reliable_by(fabric_.now() + 1);
                break;
            case MessageKind::UpdateRequest:
                env.to = kStateServerEndpoint;
                env.delivery = Delivery::unreliable();
                break;
            case MessageKind::DiffCommit:
                env.to = kAuditServerEndpoint;
                env.delivery = Delivery::reliable_by(env.message.cycle + 1);
                metrics_.commit_tag_bytes[c.name()][env.message.cycle] += 16;
                metrics_.max_diff_bytes =
                    std::max<std::uint64_t>(metrics_.max_diff_bytes,
                                            encode_diff(c.buffer().diffs.at(env.message.cycle)).size());
                break;
            case MessageKind::StateCommit:
                env.to = kAuditServerEndpoint;
                env.delivery = Delivery::reliable_by(env.message.cycle + sc_.l);
                metrics_.commit_tag_bytes[c.name()][env.message.cycle] += 16;
                break;
            case MessageKind::AuditResponse:
                env.to = kAuditServerEndpoint;
                env.delivery = Delivery::reliable_by(fabric_.now() + 1);
                metrics_.max_audit_response_bytes =
                    std::max<std::uint64_t>(metrics_.max_audit_response_bytes,
                                            encode_message(env.message).size());
                break;
            default:
                throw std::runtime_error("unexpected client send");
        }
        fabric_.send(std::move(env));
    }

    void dispatch(const Envelope& env) {
        if (env.to == kStateServerEndpoint) {
            WireMessage reply = server_.handle_message(env.message, fabric_.now());
            reply.sender = kStateServerEndpoint;
            if (reply.kind == MessageKind::UpdateResponse)
                metrics_.max_msg_bytes =
                    std::max<std::uint64_t>(metrics_.max_msg_bytes, encode_message(reply).size());
            const Delivery delivery = reply.kind == MessageKind::InitResponse
                                          ? Delivery::reliable_by(fabric_.now() + 1)
                                          : Delivery::unreliable();
            fabric_.send({std::move(reply), kStateServerEndpoint, env.from, 0, delivery});
            return;
        }
        if (env.to == kAuditServerEndpoint) {
            switch (env.message.kind) {
                case MessageKind::DiffCommit:
                    audit_.record_commitment(env.message.sender, CommitmentKind::Diff,
                                             env.message.cycle, tag_from_body(env.message.body),
                                             fabric_.now());
                    return;
                case MessageKind::StateCommit:
                    audit_.record_commitment(env.message.sender, CommitmentKind::State,
                                             env.message.cycle, tag_from_body(env.message.body),
                                             fabric_.now());
                    return;
                case MessageKind::AuditResponse: {
                    auto evidence = decode_evidence(env.message.body);
                    if (!evidence) throw std::runtime_error("undecodable audit evidence");
                    const AuditReport report =
                        audit_.run_audit(env.message.sender, env.message.cycle, *evidence);
                    const std::string who = endpoint_name(env.message.sender);
                    log("audit client=" + who + " t0=" + std::to_string(report.t0) +
                        " ta=" + std::to_string(report.ta) +
                        " verdict=" + (report.accepted ? "accept" : "reject") +
                        " reasons=" + join_reasons(report));
                    if (!report.accepted && !metrics_.first_reject.contains(who))
                        metrics_.first_reject[who] = report.t0;
                    metrics_.reports.push_back(report);
                    WireMessage verdict{MessageKind::AuditVerdict, kAuditServerEndpoint,
                                        report.t0, encode_verdict_body(report)};
                    fabric_.send({std::move(verdict), kAuditServerEndpoint, env.message.sender, 0,
                                  Delivery::reliable_by(fabric_.now() + 1)});
                    return;
                }
                default:
                    throw std::runtime_error("unexpected audit server message");
            }
        }
        Client& c = clients_[index_by_id_.at(env.to)];
        switch (env.message.kind) {
            case MessageKind::InitResponse:
                if (auto q0 = c.handle_init_response(env.message)) send_from_client(c, *q0);
                return;
            case MessageKind::UpdateResponse:
                for (WireMessage& m : c.handle_update_response(env.message))
                    send_from_client(c, m);
                return;
            case MessageKind::AuditRequest:
                if (!c.initialized()) {
                    log("diag client=" + c.name() + " note=\"audited before joining\"");
                    return;
                }
                send_from_client(c, c.answer_audit(env.message.cycle));
                return;
            case MessageKind::AuditVerdict:
                return; // verdicts are informational to the client
            default:
                throw std::runtime_error("unexpected client delivery");
        }
    }

    void pump() {
        for (;;) {
            auto due = fabric_.collect_due();
            if (due.empty()) return;
            for (const Envelope& env : due) dispatch(env);
        }
    }

    void drain_diagnostics() {
        for (Client& c : clients_)
            for (const std::string& d : c.take_diagnostics())
                log("diag client=" + c.name() + " note=\"" + d + "\"");
    }

    void finalize() {
        for (const auto& [endpoint, kinds] : fabric_.accounting()) {
            const std::string who = endpoint_name(endpoint);
            for (const auto& [kind, stats] : kinds) {
                metrics_.traffic[who][kind] = stats;
                log("bytes endpoint=" + who + " kind=" + kind_name(kind) +
                    " count=" + std::to_string(stats.messages) +
                    " total=" + std::to_string(stats.bytes));
            }
        }
        for (const Client& c : clients_) {
            std::uint64_t total = 0;
            for (const auto& [cycle, bytes] : metrics_.commit_tag_bytes[c.name()]) total += bytes;
            log("overhead client=" + c.name() + " commit_tag_bytes=" + std::to_string(total));
        }
        log("traffic max_diff_bytes=" + std::to_string(metrics_.max_diff_bytes) +
            " max_msg_bytes=" + std::to_string(metrics_.max_msg_bytes) +
            " max_audit_response_bytes=" + std::to_string(metrics_.max_audit_response_bytes));
        for (const Client& c : clients_) {
            const bool caught = metrics_.first_reject.contains(c.name());
            metrics_.detected[c.name()] = caught;
            log("detection client=" + c.name() + " detected=" + (caught ? "1" : "0") +
                " first_reject=" +
                (caught ? std::to_string(metrics_.first_reject.at(c.name())) : "-"));
        }
    }
};

} // namespace

RunMetrics run(const Scenario& sc, const RunHooks& hooks) {
    Runner runner(sc, hooks);
    return runner.run();
}

DetectionPoint detection_experiment(double q, std::uint64_t trials, Cycle l, Cycle cycles,
                                    std::uint64_t seed) {
    if (cycles < 5 * l) throw std::invalid_argument("detection experiment needs cycles >= 5l");
    std::vector<Cycle> candidates;
    for (Cycle c = 2 * l; c <= cycles - 3 * l; ++c)
        if (c % l != 0) candidates.push_back(c);

    std::uint64_t detected = 0;
    const long long n = static_cast<long long>(trials);
#pragma omp parallel for reduction(+ : detected) schedule(static)
    for (long long i = 0; i < n; ++i) {
        Rng trial_rng = Rng::derive(seed, 0xde7ec7ULL + static_cast<std::uint64_t>(i));
        Scenario sc;
        sc.name = "detect";
        sc.map_rows = {"########", "#..##..#", "#..##..#", "########"};
        sc.block = 4;
        sc.l = l;
        sc.cycles = cycles;
        sc.seed = trial_rng.next_u64();
        sc.audit.kind = AuditStrategy::Kind::RandomBoundary;
        sc.audit.probability = q;
        sc.audit.seed = trial_rng.next_u64();
        CheatProfile cheat;
        cheat.kind = CheatProfile::Kind::Wallhack;
        cheat.at = candidates[trial_rng.below(candidates.size())];
        sc.clients.push_back({"cheater", {0, 0}, BehaviorScript::stay(), cheat});

        const RunMetrics m = run(sc);
        if (m.detected.at("cheater")) detected += 1;
    }

    DetectionPoint point;
    point.q = q;
    point.trials = trials;
    point.detected = detected;
    point.rate = trials ? static_cast<double>(detected) / static_cast<double>(trials) : 0.0;
    point.analytic = 1.0 - (1.0 - q) * (1.0 - q);
    return point;
}

std::vector<SelfTestResult> run_selftest() {
    std::vector<SelfTestResult> results;
    auto record = [&](std::string name, bool pass, std::string detail = "") {
        results.push_back({std::move(name), pass, std::move(detail)});
    };

    // Abstraction laws, exhaustively on the tunnel grid with one avatar.
    {
        const auto grid = std::make_shared<CellGrid>(
            CellGrid::from_rows({"########", "#..##..#", "#..##..#", "########"}, 4));
        bool ok = true;
        std::string detail;
        const ClientId id = 1;
        for (std::uint64_t y = 0; y < grid->height() && ok; ++y) {
            for (std::uint64_t x = 0; x < grid->width() && ok; ++x) {
                if (!grid->is_free({x, y})) continue;
                ConcreteState s;
                s.grid = grid;
                s.avatars[id] = {x, y};

                const AbstractState a = abstract_state(s);
                for (std::uint64_t trial = 0; trial < 4 && ok; ++trial) {
                    auto back = concretize_state(a, grid, trial);
                    if (!back || !(abstract_state(*back) == a)) {
                        ok = false;
                        detail = "galois round trip failed";
                    }
                }

                const std::int64_t steps[5][2] = {{0, 0}, {1, 0}, {-1, 0}, {0, 1}, {0, -1}};
                for (const auto& step : steps) {
                    const std::int64_t tx = std::int64_t(x) + step[0];
                    const std::int64_t ty = std::int64_t(y) + step[1];
                    if (tx < 0 || ty < 0 || tx >= std::int64_t(grid->width()) ||
                        ty >= std::int64_t(grid->height()))
                        continue;
                    ConcreteDiff d;
                    d.moves[id] = {std::uint64_t(tx), std::uint64_t(ty)};
                    const auto lhs = abstract_state(apply_diff(s, d));
                    const auto rhs = apply_abstract(abstract_state(s), abstract_diff(s, d));
                    if (!(lhs == rhs)) {
                        ok = false;
                        detail = "diff homomorphism failed";
                        break;
                    }
                }
            }
        }
        record("galois-laws-tunnel-grid", ok, detail);
    }

    // Window arithmetic.
    {
        bool ok = window_start(20, 10) == 0 && window_start(71, 10) == 50 &&
                  window_start(80, 10) == 60;
        for (Cycle l : {Cycle(2), Cycle(5), Cycle(10)})
            for (Cycle t0 = 2 * l; t0 <= 10 * l && ok; ++t0) {
                const Cycle span = t0 - window_start(t0, l);
                ok = span >= 2 * l && span <= 3 * l - 1;
            }
        record("window-start-arithmetic", ok);
    }

    // Buffer shape during an honest run.
    {
        Scenario sc = tunnel_scenario();
        sc.cycles = 80;
        bool ok = true;
        RunHooks hooks;
        hooks.after_cycle = [&](Cycle t, const std::vector<Client>& clients) {
            if (t != 80) return;
            for (const Client& c : clients) {
                const auto& buf = c.buffer();
                ok = ok && buf.full_states.size() == 3 && buf.full_states.contains(60) &&
                     buf.full_states.contains(70) && buf.full_states.contains(80) &&
                     buf.diffs.size() == 20;
            }
        };
        const RunMetrics m = run(sc, hooks);
        for (const AuditReport& r : m.reports) ok = ok && r.accepted;
        record("buffer-shape-and-soundness", ok);
    }

    return results;
}

} // namespace nve
