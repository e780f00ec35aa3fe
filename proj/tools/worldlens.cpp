// worldlens: recover the transition kernel of a finite controlled Markov
// process by querying a goal-conditioned agent as a black box.
//
// Subcommands: validate, extract, sweep, figure4, gen-world.
// Exit codes: 0 success, 1 validation/usage failure, 2 precondition refusal,
// 3 bound violation.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "worldlens/harness.hpp"
#include "worldlens/parse.hpp"
#include "worldlens/prob.hpp"

using namespace worldlens;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRefused = 2;
constexpr int kExitBoundViolation = 3;

struct CommonOpts {
    std::string config_path;
    std::string world_path;
    std::string builtin;
    double p_r = 0.5, p_l = 0.5, p_f = 0.3;
    std::string method = "t2";
    std::vector<int> n_grid;
    std::vector<double> delta_grid;
    std::string agent = "random";
    std::uint64_t seed = 1;
    int seeds = 1;
    std::string triple = "all";
    int start = -1;
    std::string out;
    std::string svg;
};

void add_world_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--world", o.world_path, "world file to load");
    cmd->add_option("--builtin", o.builtin, "builtin world: chain | fail | three-state");
    cmd->add_option("--p-r", o.p_r, "builtin: right-move success probability");
    cmd->add_option("--p-l", o.p_l, "builtin: left-move success probability");
    cmd->add_option("--p-f", o.p_f, "builtin fail world: observation failure probability");
}

void add_experiment_flags(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config_path, "experiment config file (key = value lines)");
    add_world_flags(cmd, o);
    cmd->add_option("--method", o.method, "t1 | t2 | t3 | t4 | t4d");
    cmd->add_option("--n", o.n_grid, "goal-family size; repeat for a grid");
    cmd->add_option("--delta", o.delta_grid, "agent near-optimality; repeat for a grid");
    cmd->add_option("--agent", o.agent, "optimal | random | adversarial");
    cmd->add_option("--seed", o.seed, "root random seed");
    cmd->add_option("--seeds", o.seeds, "number of agent seeds per cell");
    cmd->add_option("--triple", o.triple, "target transition 's,a,s2' or 'all'");
    cmd->add_option("--start", o.start, "start state index (default 0)");
    cmd->add_option("--out", o.out, "output CSV path (default stdout)");
    cmd->add_option("--svg", o.svg, "also write an error-vs-n plot");
}

ExperimentConfig build_config(const CLI::App* cmd, const CommonOpts& o) {
    ExperimentConfig cfg;
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw ConfigError("cannot open config '" + o.config_path + "'");
        cfg = parse_config_text(in);
    }
    auto given = [&](const std::string& flag) { return cmd->count(flag) > 0; };
    if (given("--world")) {
        cfg.world.kind = WorldSource::Kind::File;
        cfg.world.path = o.world_path;
    }
    if (given("--builtin")) {
        cfg.world.kind = WorldSource::Kind::Builtin;
        cfg.world.builtin = o.builtin;
    }
    if (given("--p-r")) cfg.world.p_r = o.p_r;
    if (given("--p-l")) cfg.world.p_l = o.p_l;
    if (given("--p-f")) cfg.world.p_f = o.p_f;
    if (given("--method")) cfg.method = parse_method(o.method);
    if (given("--n")) cfg.n_grid = o.n_grid;
    if (given("--delta")) cfg.delta_grid = o.delta_grid;
    if (given("--agent")) cfg.mode = parse_agent_mode(o.agent);
    if (given("--seed")) cfg.seed = o.seed;
    if (given("--seeds")) cfg.num_seeds = o.seeds;
    if (given("--start")) cfg.start_state = o.start;
    if (given("--out")) cfg.out_csv = o.out;
    if (given("--svg")) cfg.out_svg = o.svg;
    if (cfg.n_grid.empty()) cfg.n_grid = {100};
    if (cfg.delta_grid.empty()) cfg.delta_grid = {0.0};
    if (given("--triple") && o.triple != "all") {
        cfg.all_triples = false;
        LoadedWorld lw = LoadedWorld::load(cfg.world);
        cfg.triple = parse_triple(o.triple, lw.base());
    } else if (given("--triple")) {
        cfg.all_triples = true;
    }
    return cfg;
}

std::ostream& open_or_stdout(std::ofstream& file, const std::string& path) {
    if (path.empty()) return std::cout;
    file.open(path, std::ios::binary);
    if (!file) throw ConfigError("cannot open output '" + path + "'");
    return file;
}

int cmd_validate(const CommonOpts& o, const CLI::App* cmd) {
    WorldData data;
    std::string label;
    if (cmd->count("--world")) {
        data = read_world_file(o.world_path);
        label = o.world_path;
    } else {
        WorldSource src;
        src.builtin = o.builtin.empty() ? "chain" : o.builtin;
        src.p_r = o.p_r;
        src.p_l = o.p_l;
        src.p_f = o.p_f;
        if (src.builtin == "chain") data = make_chain_world(src.p_r, src.p_l).data();
        else if (src.builtin == "fail") data = make_fail_world(src.p_f, src.p_r, src.p_l).data();
        else if (src.builtin == "three-state") data = make_three_state_world().data();
        else throw ConfigError("unknown builtin '" + src.builtin + "'");
        label = src.id();
    }
    ValidationReport rep = validate_world(data);
    std::cout << "world: " << label << "\n";
    std::cout << "rows_ok: " << (rep.rows_ok ? "yes" : "no") << "\n";
    std::cout << "communicating: " << (rep.communicating ? "yes" : "no") << "\n";
    for (const auto& d : rep.defects) std::cout << "defect: " << d.describe(data) << "\n";
    return rep.ok() ? kExitOk : kExitInvalid;
}

int cmd_extract(const ExperimentConfig& cfg) {
    LoadedWorld lw = LoadedWorld::load(cfg.world);
    const World& base = lw.base();
    std::vector<ExtractRow> rows = run_extract(cfg);

    std::ofstream file;
    std::ostream& out = open_or_stdout(file, cfg.out_csv);
    write_extract_csv(out, base, cfg, rows);

    bool violated = false;
    for (const ExtractRow& r : rows)
        if (std::abs(r.p_hat - r.p_true) > r.bound_at_true) {
            violated = true;
            std::cerr << "bound violation at (" << base.state_name(r.ev.s) << ","
                      << base.action_name(r.ev.a) << "," << base.state_name(r.ev.s_prime)
                      << ") n=" << r.n << " delta=" << r.delta << ": p_true=" << r.p_true
                      << " p_hat=" << r.p_hat << " bound=" << r.bound_at_true << "\n";
            Estimate e = run_extraction_cell(lw, cfg, r.ev, r.n, r.delta, cfg.seed);
            for (const QueryRecord& q : e.transcript)
                std::cerr << "  probe k=" << q.family.k << " r=" << q.family.r
                          << " s=" << q.family.s_len << " p_a=" << q.p_a << " p_b=" << q.p_b
                          << "\n";
        }
    return violated ? kExitBoundViolation : kExitOk;
}

int cmd_sweep(const ExperimentConfig& cfg) {
    SweepResult res = run_sweep(cfg);
    std::ofstream file;
    std::ostream& out = open_or_stdout(file, cfg.out_csv);
    write_sweep_csv(out, res);
    if (!cfg.out_svg.empty()) {
        std::ofstream svg(cfg.out_svg, std::ios::binary);
        if (!svg) throw ConfigError("cannot open output '" + cfg.out_svg + "'");
        write_sweep_svg(svg, res, "extraction error, " + cfg.world.id());
    }
    for (const SweepRow& r : res.rows)
        if (!r.bound_holds) {
            std::cerr << "bound violation: triple=" << r.triple << " n=" << r.n
                      << " delta=" << r.delta << " seed=" << r.seed << " p_true=" << r.p_true
                      << " p_hat=" << r.p_hat << " bound=" << r.bound_at_true << "\n";
            LoadedWorld lw = LoadedWorld::load(cfg.world);
            TripleEvent ev = parse_triple(r.triple, lw.base());
            Estimate e = run_extraction_cell(lw, cfg, ev, r.n, r.delta, r.seed);
            for (const QueryRecord& q : e.transcript)
                std::cerr << "  probe k=" << q.family.k << " p_a=" << q.p_a
                          << " p_b=" << q.p_b << "\n";
            return kExitBoundViolation;
        }
    return kExitOk;
}

int cmd_figure4(double p, int n, double delta, std::uint64_t seed, int draws,
                const std::string& out_path) {
    DichotomyProfile prof = run_dichotomy_profile(p, n, delta, seed, draws);
    std::ofstream file;
    std::ostream& out = open_or_stdout(file, out_path);
    write_dichotomy_profile_csv(out, prof);
    return kExitOk;
}

int cmd_gen_world(std::uint64_t seed, int states, int actions, int observations,
                  const std::string& out_path) {
    WorldData d = generate_world(seed, states, actions, observations);
    ValidationReport rep = validate_world(d);
    if (!rep.ok()) return kExitInvalid;
    std::ofstream file;
    std::ostream& out = open_or_stdout(file, out_path);
    write_world_data(out, d);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"black-box world-model extraction from goal-conditioned agents"};
    app.require_subcommand(1);

    CommonOpts vo;
    CLI::App* validate = app.add_subcommand("validate", "check a world file or builtin");
    add_world_flags(validate, vo);

    CommonOpts eo;
    CLI::App* extract = app.add_subcommand("extract", "reconstruct a full transition kernel");
    add_experiment_flags(extract, eo);

    CommonOpts so;
    CLI::App* sweep = app.add_subcommand("sweep", "sweep extraction error over grids");
    add_experiment_flags(sweep, so);

    double fp = 0.35;
    int fn = 20, fdraws = 200;
    double fdelta = 0.2;
    std::uint64_t fseed = 1;
    std::string fout;
    CLI::App* fig = app.add_subcommand(
        "figure4", "dichotomy feasibility profile (tails, feasible pairs, crossovers)");
    fig->add_option("--p", fp, "event probability");
    fig->add_option("--n", fn, "family size");
    fig->add_option("--delta", fdelta, "agent near-optimality");
    fig->add_option("--seed", fseed, "root seed");
    fig->add_option("--draws", fdraws, "number of sampled agents");
    fig->add_option("--out", fout, "output CSV path (default stdout)");

    std::uint64_t gseed = 0;
    int gstates = 5, gactions = 2, gobs = 0;
    std::string gout;
    CLI::App* gen = app.add_subcommand("gen-world", "generate a random communicating world");
    gen->add_option("--seed", gseed, "generator seed")->required();
    gen->add_option("--states", gstates, "number of states");
    gen->add_option("--actions", gactions, "number of actions");
    gen->add_option("--observations", gobs, "number of observations (0 = fully observable)");
    gen->add_option("--out", gout, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate(vo, validate);
        if (extract->parsed()) {
            ExperimentConfig cfg = build_config(extract, eo);
            if (cfg.start_state < 0) cfg.start_state = 0;
            return cmd_extract(cfg);
        }
        if (sweep->parsed()) {
            ExperimentConfig cfg = build_config(sweep, so);
            if (cfg.start_state < 0) cfg.start_state = 0;
            return cmd_sweep(cfg);
        }
        if (fig->parsed()) return cmd_figure4(fp, fn, fdelta, fseed, fdraws, fout);
        if (gen->parsed()) return cmd_gen_world(gseed, gstates, gactions, gobs, gout);
    } catch (const PreconditionError& e) {
        std::cerr << "refused: " << e.what() << "\n";
        return kExitRefused;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInvalid;
    }
    return kExitOk;
}
