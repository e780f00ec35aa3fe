#pragma once

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "worldlens/agents.hpp"
#include "worldlens/csv.hpp"
#include "worldlens/extract.hpp"
#include "worldlens/svg.hpp"
#include "worldlens/world.hpp"
#include "worldlens/worldio.hpp"

namespace worldlens {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- world sources ----------------------------------------------------------

struct WorldSource {
    enum class Kind { Builtin, File, Random };
    Kind kind = Kind::Builtin;
    std::string builtin = "chain"; // chain | fail | three-state
    double p_r = 0.5, p_l = 0.5, p_f = 0.3;
    std::string path;
    std::uint64_t seed = 0;
    int states = 5, actions = 2;

    std::string id() const {
        switch (kind) {
        case Kind::Builtin:
            if (builtin == "chain")
                return "chain(pR=" + detail::format_double(p_r) +
                       ",pL=" + detail::format_double(p_l) + ")";
            if (builtin == "fail")
                return "fail(pF=" + detail::format_double(p_f) +
                       ",pR=" + detail::format_double(p_r) +
                       ",pL=" + detail::format_double(p_l) + ")";
            return builtin;
        case Kind::File: return "file:" + path;
        case Kind::Random:
            return "random(seed=" + std::to_string(seed) + ",S=" + std::to_string(states) +
                   ",A=" + std::to_string(actions) + ")";
        }
        return "?";
    }
};

/// A loaded world, observable or not, with one owner.
class LoadedWorld {
public:
    static LoadedWorld load(const WorldSource& src) {
        LoadedWorld lw;
        lw.id_ = src.id();
        switch (src.kind) {
        case WorldSource::Kind::Builtin:
            if (src.builtin == "chain") {
                lw.world_ = std::make_unique<World>(make_chain_world(src.p_r, src.p_l));
            } else if (src.builtin == "fail") {
                lw.oworld_ = std::make_unique<ObservableWorld>(
                    make_fail_world(src.p_f, src.p_r, src.p_l));
            } else if (src.builtin == "three-state") {
                lw.oworld_ = std::make_unique<ObservableWorld>(make_three_state_world());
            } else {
                throw ConfigError("unknown builtin world '" + src.builtin + "'");
            }
            break;
        case WorldSource::Kind::File: {
            WorldData d = read_world_file(src.path);
            if (d.num_observations > 0)
                lw.oworld_ = std::make_unique<ObservableWorld>(ObservableWorld::create(d));
            else lw.world_ = std::make_unique<World>(World::create(d));
            break;
        }
        case WorldSource::Kind::Random:
            lw.world_ = std::make_unique<World>(
                make_random_world(src.seed, src.states, src.actions));
            break;
        }
        return lw;
    }

    const World& base() const { return oworld_ ? oworld_->base() : *world_; }
    bool observable() const { return oworld_ != nullptr; }
    const ObservableWorld& observable_world() const {
        if (!oworld_) throw ConfigError("world has no observation kernel");
        return *oworld_;
    }
    const std::string& id() const { return id_; }

private:
    std::string id_;
    std::unique_ptr<World> world_;
    std::unique_ptr<ObservableWorld> oworld_;
};

// --- experiment configuration -----------------------------------------------

struct ExperimentConfig {
    WorldSource world;
    bool all_triples = true;
    TripleEvent triple{};
    ExtractMethod method = ExtractMethod::T2Stoch;
    std::vector<int> n_grid;
    std::vector<double> delta_grid;
    AgentMode mode = AgentMode::RandomFeasible;
    std::uint64_t seed = 1;
    int num_seeds = 1;
    int start_state = 0;
    std::string out_csv;
    std::string out_svg;

    void validate() const {
        if (n_grid.empty()) throw ConfigError("empty n grid");
        if (delta_grid.empty()) throw ConfigError("empty delta grid");
        bool needs_half = method == ExtractMethod::T2Stoch || method == ExtractMethod::T3Pomdp ||
                          method == ExtractMethod::T4Width2Delta;
        for (double d : delta_grid) {
            if (d < 0 || d >= 1) throw PreconditionError("delta must lie in [0,1)");
            if (needs_half && d >= 0.5)
                throw PreconditionError("method requires delta < 1/2, got " +
                                        detail::format_double(d));
        }
        if (num_seeds < 1) throw ConfigError("seed count must be positive");
    }
};

inline ExtractMethod parse_method(const std::string& name) {
    if (name == "t1") return ExtractMethod::T1Det;
    if (name == "t2") return ExtractMethod::T2Stoch;
    if (name == "t3") return ExtractMethod::T3Pomdp;
    if (name == "t4") return ExtractMethod::T4Width2Det;
    if (name == "t4d") return ExtractMethod::T4Width2Delta;
    throw ConfigError("unknown method '" + name + "' (expected t1|t2|t3|t4|t4d)");
}

inline AgentMode parse_agent_mode(const std::string& name) {
    if (name == "optimal") return AgentMode::Optimal;
    if (name == "random") return AgentMode::RandomFeasible;
    if (name == "adversarial") return AgentMode::Adversarial;
    throw ConfigError("unknown agent mode '" + name + "'");
}

inline const char* agent_mode_name(AgentMode m) {
    switch (m) {
    case AgentMode::Optimal: return "optimal";
    case AgentMode::RandomFeasible: return "random";
    case AgentMode::Adversarial: return "adversarial";
    }
    return "?";
}

/// Parses "s,a,s2" against the world's name table (indices accepted).
inline TripleEvent parse_triple(const std::string& text, const World& w) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    parts.push_back(cur);
    if (parts.size() != 3) throw ConfigError("triple must be 's,a,s2', got '" + text + "'");
    auto state_of = [&](const std::string& tok) {
        if (auto i = w.state_index(tok)) return *i;
        try {
            int raw = std::stoi(tok);
            w.check_state(raw);
            return raw;
        } catch (const std::exception&) {
            throw ConfigError("unknown state '" + tok + "'");
        }
    };
    auto action_of = [&](const std::string& tok) {
        if (auto i = w.action_index(tok)) return *i;
        try {
            int raw = std::stoi(tok);
            w.check_action(raw);
            return raw;
        } catch (const std::exception&) {
            throw ConfigError("unknown action '" + tok + "'");
        }
    };
    return TripleEvent{state_of(parts[0]), action_of(parts[1]), state_of(parts[2]), false};
}

/// Flat key = value experiment file; repeated keys accumulate grid values.
inline ExperimentConfig parse_config_text(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    int line_no = 0;
    std::string triple_text;
    while (std::getline(in, line)) {
        ++line_no;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            bool blank = true;
            for (char c : line)
                if (!std::isspace(static_cast<unsigned char>(c))) blank = false;
            if (blank) continue;
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        auto trim = [](std::string s) {
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
                s.erase(s.begin());
            while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
            return s;
        };
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        try {
            if (key == "world") {
                cfg.world.kind = WorldSource::Kind::File;
                cfg.world.path = value;
            } else if (key == "builtin") {
                cfg.world.kind = WorldSource::Kind::Builtin;
                cfg.world.builtin = value;
            } else if (key == "random_seed") {
                cfg.world.kind = WorldSource::Kind::Random;
                cfg.world.seed = std::stoull(value);
            } else if (key == "random_states") cfg.world.states = std::stoi(value);
            else if (key == "random_actions") cfg.world.actions = std::stoi(value);
            else if (key == "p_r") cfg.world.p_r = std::stod(value);
            else if (key == "p_l") cfg.world.p_l = std::stod(value);
            else if (key == "p_f") cfg.world.p_f = std::stod(value);
            else if (key == "method") cfg.method = parse_method(value);
            else if (key == "n") cfg.n_grid.push_back(std::stoi(value));
            else if (key == "delta") cfg.delta_grid.push_back(std::stod(value));
            else if (key == "agent") cfg.mode = parse_agent_mode(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "seeds") cfg.num_seeds = std::stoi(value);
            else if (key == "triple") triple_text = value;
            else if (key == "start") cfg.start_state = std::stoi(value);
            else if (key == "out") cfg.out_csv = value;
            else if (key == "svg") cfg.out_svg = value;
            else throw ConfigError("unknown key '" + key + "'");
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!triple_text.empty() && triple_text != "all") {
        cfg.all_triples = false;
        LoadedWorld lw = LoadedWorld::load(cfg.world);
        cfg.triple = parse_triple(triple_text, lw.base());
    }
    return cfg;
}

// --- sweeps -------------------------------------------------------------------

struct SweepRow {
    std::string world_id;
    std::string triple;
    ExtractMethod method;
    int n = 0;
    double delta = 0;
    AgentMode mode = AgentMode::Optimal;
    std::uint64_t seed = 0;
    double p_true = 0;
    double p_hat = 0;
    double abs_error = 0;
    double bound_at_true = 0;
    bool bound_holds = false;
    int queries = 0;
    double wall_ms = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    double fitted_slope = 0.0; // least squares on log(worst error per n) vs log n
    bool slope_defined = false;
};

namespace detail {

inline int thread_pool_size(std::size_t cells) {
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    if (const char* env = std::getenv("WORLDLENS_THREADS")) {
        long cap = std::strtol(env, nullptr, 10);
        if (cap > 0 && cap < static_cast<long>(hw)) hw = static_cast<unsigned>(cap);
    }
    return static_cast<int>(std::min<std::size_t>(hw, std::max<std::size_t>(cells, 1)));
}

template <typename Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    int workers = thread_pool_size(count);
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int t = 0; t < workers; ++t)
        pool.emplace_back([&] {
            while (true) {
                std::size_t i = next.fetch_add(1);
                if (i >= count) return;
                fn(i);
            }
        });
    for (auto& th : pool) th.join();
}

inline std::string triple_name(const World& w, const TripleEvent& ev) {
    return w.state_name(ev.s) + "," + w.action_name(ev.a) + "," + w.state_name(ev.s_prime);
}

/// Least-squares slope of log(err) against log(n) over per-n worst errors;
/// zero-error points cannot enter a log fit and are skipped.
inline std::pair<double, bool> fit_loglog_slope(const std::vector<std::pair<int, double>>& pts) {
    std::vector<std::pair<double, double>> logs;
    for (auto [n, err] : pts)
        if (err > 0) logs.push_back({std::log(static_cast<double>(n)), std::log(err)});
    if (logs.size() < 2) return {0.0, false};
    double sx = 0, sy = 0;
    for (auto [x, y] : logs) {
        sx += x;
        sy += y;
    }
    double mx = sx / logs.size(), my = sy / logs.size();
    double num = 0, den = 0;
    for (auto [x, y] : logs) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if (den == 0) return {0.0, false};
    return {num / den, true};
}

} // namespace detail

/// One extraction cell: builds the configured agent and runs the method.
inline Estimate run_extraction_cell(const LoadedWorld& lw, const ExperimentConfig& cfg,
                                    const TripleEvent& ev, int n, double delta,
                                    std::uint64_t agent_seed) {
    const World& base = lw.base();
    int s0 = cfg.start_state;
    DeltaConfig dc{delta, cfg.mode, agent_seed, false};
    switch (cfg.method) {
    case ExtractMethod::T1Det: {
        FamilyOptimalAgent agent(base, s0);
        return extract_deterministic(agent, base, s0, ev, n, delta);
    }
    case ExtractMethod::T2Stoch: {
        DeltaAgent agent(base, s0, dc);
        return extract_stochastic(agent, base, s0, ev, n, delta);
    }
    case ExtractMethod::T3Pomdp: {
        const ObservableWorld& ow = lw.observable_world();
        RandomWalkAgent agent(ow, s0, dc);
        return extract_pomdp(agent, ow, s0, ev, n, delta);
    }
    case ExtractMethod::T4Width2Det: {
        FamilyOptimalAgent agent(base, s0);
        return extract_width2_exact(agent, base, s0, ev, n);
    }
    case ExtractMethod::T4Width2Delta: {
        DeltaAgent agent(base, s0, dc);
        return extract_width2_delta(agent, base, s0, ev, n, delta);
    }
    }
    throw ConfigError("unknown method");
}

/// Sweep over triples x n-grid x delta-grid x agent seeds. Cells run on a
/// pool capped by WORLDLENS_THREADS; rows come back in deterministic order
/// regardless of scheduling.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    LoadedWorld lw = LoadedWorld::load(cfg.world);
    const World& base = lw.base();
    if (cfg.method == ExtractMethod::T3Pomdp && !lw.observable())
        throw PreconditionError("observation-based extraction needs an observable world");
    base.check_state(cfg.start_state);

    std::vector<TripleEvent> triples;
    if (cfg.all_triples) {
        for (int s = 0; s < base.num_states(); ++s)
            for (int a = 0; a < base.num_actions(); ++a)
                for (int s2 = 0; s2 < base.num_states(); ++s2)
                    triples.push_back({s, a, s2, false});
    } else {
        triples.push_back(cfg.triple);
    }

    struct Cell {
        TripleEvent ev;
        int n;
        double delta;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& ev : triples)
        for (int n : cfg.n_grid)
            for (double delta : cfg.delta_grid)
                for (int rep = 0; rep < cfg.num_seeds; ++rep)
                    cells.push_back({ev, n, delta, cfg.seed + static_cast<std::uint64_t>(rep)});

    std::vector<SweepRow> rows(cells.size());
    std::vector<std::string> errors(cells.size());
    std::atomic<bool> precondition_failed{false};
    detail::parallel_for(cells.size(), [&](std::size_t i) {
        const Cell& c = cells[i];
        SweepRow row;
        row.world_id = lw.id();
        row.triple = detail::triple_name(base, c.ev);
        row.method = cfg.method;
        row.n = c.n;
        row.delta = c.delta;
        row.mode = cfg.mode;
        row.seed = c.seed;
        row.p_true = base.prob(c.ev.s, c.ev.a, c.ev.s_prime);
        auto t0 = std::chrono::steady_clock::now();
        try {
            Estimate e = run_extraction_cell(lw, cfg, c.ev, c.n, c.delta, c.seed);
            row.p_hat = e.p_hat;
            row.abs_error = std::abs(e.p_hat - row.p_true);
            row.bound_at_true = e.bound_at(row.p_true);
            row.bound_holds = row.abs_error <= row.bound_at_true;
            row.queries = static_cast<int>(e.transcript.size());
        } catch (const PreconditionError& e) {
            errors[i] = e.what();
            precondition_failed = true;
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
        row.wall_ms = std::chrono::duration<double, std::milli>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
        rows[i] = std::move(row);
    });
    for (const std::string& err : errors)
        if (!err.empty()) {
            if (precondition_failed) throw PreconditionError(err);
            throw DiagnosticError(err);
        }

    SweepResult result;
    result.rows = std::move(rows);
    // worst error per n across the sweep
    std::vector<std::pair<int, double>> per_n;
    for (int n : cfg.n_grid) {
        double worst = 0;
        for (const SweepRow& r : result.rows)
            if (r.n == n) worst = std::max(worst, r.abs_error);
        per_n.push_back({n, worst});
    }
    auto [slope, defined] = detail::fit_loglog_slope(per_n);
    result.fitted_slope = slope;
    result.slope_defined = defined;
    return result;
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& res) {
    CsvWriter csv(out);
    csv.header({"world", "triple", "method", "n", "delta", "agent", "seed", "p_true", "p_hat",
                "abs_error", "bound_at_true", "bound_holds", "queries", "wall_ms"});
    for (const SweepRow& r : res.rows) {
        csv.cell(r.world_id)
            .cell(r.triple)
            .cell(method_name(r.method))
            .cell(r.n)
            .cell(r.delta)
            .cell(agent_mode_name(r.mode))
            .cell(r.seed)
            .cell(r.p_true)
            .cell(r.p_hat)
            .cell(r.abs_error)
            .cell(r.bound_at_true)
            .cell(r.bound_holds)
            .cell(r.queries)
            .cell(r.wall_ms);
        csv.end_row();
    }
    if (res.slope_defined)
        csv.comment("fitted_slope," + detail::format_double(res.fitted_slope));
    csv.comment("reference_slopes,-0.5,-1");
}

inline void write_sweep_svg(std::ostream& out, const SweepResult& res,
                            const std::string& title) {
    std::vector<std::pair<double, double>> pts;
    std::vector<int> ns;
    for (const SweepRow& r : res.rows)
        if (std::find(ns.begin(), ns.end(), r.n) == ns.end()) ns.push_back(r.n);
    std::sort(ns.begin(), ns.end());
    for (int n : ns) {
        double worst = 0;
        for (const SweepRow& r : res.rows)
            if (r.n == n) worst = std::max(worst, r.abs_error);
        if (worst > 0) pts.push_back({static_cast<double>(n), worst});
    }
    LogLogPlot plot(title, "n", "worst |p_hat - p|");
    plot.add_series("worst error", pts, "#1f77b4");
    plot.add_reference_slope(-0.5, "#d62728");
    plot.add_reference_slope(-1.0, "#2ca02c");
    plot.render(out);
}

// --- kernel extraction command ----------------------------------------------

inline KernelEstimate run_reconstruction(const ExperimentConfig& cfg, const LoadedWorld& lw,
                                         int n, double delta) {
    const World& base = lw.base();
    int s0 = cfg.start_state;
    DeltaConfig dc{delta, cfg.mode, cfg.seed, false};
    switch (cfg.method) {
    case ExtractMethod::T3Pomdp: {
        const ObservableWorld& ow = lw.observable_world();
        RandomWalkAgent agent(ow, s0, dc);
        return reconstruct_world(agent, ow, s0, n, delta);
    }
    case ExtractMethod::T1Det:
    case ExtractMethod::T4Width2Det: {
        FamilyOptimalAgent agent(base, s0);
        return reconstruct_world(agent, base, s0, n, delta, cfg.method);
    }
    default: {
        DeltaAgent agent(base, s0, dc);
        return reconstruct_world(agent, base, s0, n, delta, cfg.method);
    }
    }
}

/// One extract-command row: a triple estimated at one (n, delta) grid cell.
struct ExtractRow {
    TripleEvent ev;
    int n = 0;
    double delta = 0;
    double p_true = 0;
    double p_hat = 0;
    double normalized = 0;
    double bound_reported = 0;
    double bound_at_true = 0;
    int crossover = 0;
    int queries = 0;
};

/// Kernel extraction over the full (n, delta) grid. With triple selection
/// "all", each grid cell reconstructs the whole kernel and carries the
/// simplex-projected row values; a single selected triple reports its clamped
/// estimate alone. Row count = triples x grid size.
inline std::vector<ExtractRow> run_extract(const ExperimentConfig& cfg) {
    cfg.validate();
    LoadedWorld lw = LoadedWorld::load(cfg.world);
    const World& base = lw.base();
    if (cfg.method == ExtractMethod::T3Pomdp && !lw.observable())
        throw PreconditionError("observation-based extraction needs an observable world");
    base.check_state(cfg.start_state);
    std::vector<ExtractRow> rows;
    for (int n : cfg.n_grid)
        for (double delta : cfg.delta_grid) {
            if (cfg.all_triples) {
                KernelEstimate ke = run_reconstruction(cfg, lw, n, delta);
                for (int s = 0; s < ke.num_states; ++s)
                    for (int a = 0; a < ke.num_actions; ++a)
                        for (int s2 = 0; s2 < ke.num_states; ++s2) {
                            const Estimate& e = ke.at(s, a, s2);
                            ExtractRow row;
                            row.ev = {s, a, s2, false};
                            row.n = n;
                            row.delta = delta;
                            row.p_true = base.prob(s, a, s2);
                            row.p_hat = e.p_hat;
                            row.normalized = ke.normalized_at(s, a, s2);
                            row.bound_reported = e.bound;
                            row.bound_at_true = e.bound_at(row.p_true);
                            row.crossover = e.crossover_x;
                            row.queries = static_cast<int>(e.transcript.size());
                            rows.push_back(row);
                        }
            } else {
                Estimate e = run_extraction_cell(lw, cfg, cfg.triple, n, delta, cfg.seed);
                ExtractRow row;
                row.ev = cfg.triple;
                row.n = n;
                row.delta = delta;
                row.p_true = base.prob(cfg.triple.s, cfg.triple.a, cfg.triple.s_prime);
                row.p_hat = e.p_hat;
                row.normalized = std::clamp(e.p_hat, 0.0, 1.0);
                row.bound_reported = e.bound;
                row.bound_at_true = e.bound_at(row.p_true);
                row.crossover = e.crossover_x;
                row.queries = static_cast<int>(e.transcript.size());
                rows.push_back(row);
            }
        }
    return rows;
}

inline void write_extract_csv(std::ostream& out, const World& w, const ExperimentConfig& cfg,
                              const std::vector<ExtractRow>& rows) {
    CsvWriter csv(out);
    csv.header({"s", "a", "s2", "method", "n", "delta", "agent", "seed", "p_true", "p_hat",
                "normalized", "bound_reported", "crossover", "queries"});
    for (const ExtractRow& r : rows) {
        csv.cell(w.state_name(r.ev.s))
            .cell(w.action_name(r.ev.a))
            .cell(w.state_name(r.ev.s_prime))
            .cell(method_name(cfg.method))
            .cell(r.n)
            .cell(r.delta)
            .cell(agent_mode_name(cfg.mode))
            .cell(cfg.seed)
            .cell(r.p_true)
            .cell(r.p_hat)
            .cell(r.normalized)
            .cell(r.bound_reported)
            .cell(r.crossover)
            .cell(r.queries);
        csv.end_row();
    }
}

inline void write_kernel_csv(std::ostream& out, const World& w, const KernelEstimate& ke) {
    CsvWriter csv(out);
    csv.header({"s", "a", "s2", "p_true", "p_hat", "normalized", "bound_reported", "crossover",
                "queries"});
    for (int s = 0; s < ke.num_states; ++s)
        for (int a = 0; a < ke.num_actions; ++a)
            for (int s2 = 0; s2 < ke.num_states; ++s2) {
                const Estimate& e = ke.at(s, a, s2);
                csv.cell(w.state_name(s))
                    .cell(w.action_name(a))
                    .cell(w.state_name(s2))
                    .cell(w.prob(s, a, s2))
                    .cell(e.p_hat)
                    .cell(ke.normalized_at(s, a, s2))
                    .cell(e.bound)
                    .cell(e.crossover_x)
                    .cell(static_cast<int>(e.transcript.size()));
                csv.end_row();
            }
}

// --- dichotomy feasibility profile -------------------------------------------

/// Per-threshold tail values and sampled feasible first-action pairs at the
/// reference parameters (p = 0.35, n = 20, delta = 0.2 unless overridden),
/// plus a crossover histogram over repeated seeded draws.
struct DichotomyProfile {
    double p = 0.35;
    int n = 20;
    double delta = 0.2;
    double eps_threshold = 0.0;
    struct Row {
        int k;
        double p_le, p_gt; // tail values
        double p_a, p_b;   // one sampled feasible pair
        int forced;        // +1 cdf side, -1 survival side, 0 free
    };
    std::vector<Row> rows;
    std::vector<int> crossover_counts; // index 0 == crossover -1
    int draws = 0;
};

inline DichotomyProfile run_dichotomy_profile(double p = 0.35, int n = 20, double delta = 0.2,
                                              std::uint64_t seed = 1, int draws = 200) {
    DichotomyProfile prof;
    prof.p = p;
    prof.n = n;
    prof.delta = delta;
    prof.eps_threshold = delta / (2 * (1 - delta));
    World w = make_chain_world(p, 0.5);
    constexpr int kS0 = 2, kR = 1, kS1 = 3;
    TripleEvent ev{kS0, kR, kS1};

    DeltaAgent sample_agent(w, kS0, {delta, AgentMode::RandomFeasible, seed});
    for (int k = 0; k <= n; ++k) {
        DichotomyProfile::Row row;
        row.k = k;
        row.p_le = closed_form_tail_le(p, n, k);
        row.p_gt = closed_form_tail_gt(p, n, k);
        QueryRecord rec =
            probe_first_action(sample_agent, make_xi_k(ev, kR, 0, n, k), w, kS0);
        row.p_a = rec.p_a;
        row.p_b = rec.p_b;
        row.forced = row.p_le > 0.5 + prof.eps_threshold   ? +1
                     : row.p_gt > 0.5 + prof.eps_threshold ? -1
                                                           : 0;
        prof.rows.push_back(row);
    }
    prof.crossover_counts.assign(n + 2, 0);
    prof.draws = draws;
    for (int d = 0; d < draws; ++d) {
        DeltaAgent agent(w, kS0, {delta, AgentMode::RandomFeasible, seed + 1000 + d});
        Estimate e = extract_stochastic(agent, w, kS0, ev, n, delta);
        prof.crossover_counts[e.crossover_x + 1]++;
    }
    return prof;
}

inline void write_dichotomy_profile_csv(std::ostream& out, const DichotomyProfile& prof) {
    CsvWriter csv(out);
    csv.header({"k", "p_le", "p_gt", "p_a", "p_b", "forced", "eps"});
    for (const auto& row : prof.rows) {
        csv.cell(row.k)
            .cell(row.p_le)
            .cell(row.p_gt)
            .cell(row.p_a)
            .cell(row.p_b)
            .cell(row.forced)
            .cell(prof.eps_threshold);
        csv.end_row();
    }
    for (int x = -1; x <= prof.n; ++x)
        if (prof.crossover_counts[x + 1] > 0)
            csv.comment("crossover," + std::to_string(x) + "," +
                        std::to_string(prof.crossover_counts[x + 1]));
    csv.comment("draws," + std::to_string(prof.draws));
}

// --- world generation ---------------------------------------------------------

inline WorldData generate_world(std::uint64_t seed, int states, int actions,
                                int observations = 0) {
    return random_world_data(seed, states, actions, observations);
}

} // namespace worldlens
