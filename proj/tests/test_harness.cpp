#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <sstream>

#include "worldlens/harness.hpp"

using namespace worldlens;

namespace {
/// Sweep CSV with the wall_ms column (the last one) stripped; wall time is
/// reported but excluded from the determinism contract.
std::string strip_wall_ms(const std::string& csv) {
    std::istringstream in(csv);
    std::string line, out;
    while (std::getline(in, line)) {
        if (!line.empty() && line[0] != '#') {
            auto last_comma = line.rfind(',');
            if (last_comma != std::string::npos) line.erase(last_comma);
        }
        out += line;
        out += "\n";
    }
    return out;
}
} // namespace

TEST_CASE("experiment config parsing") {
    std::istringstream in("# demo config\n"
                          "builtin = chain\n"
                          "p_r = 0.35\n"
                          "p_l = 0.5\n"
                          "method = t2\n"
                          "n = 25\n"
                          "n = 50\n"
                          "delta = 0.2\n"
                          "agent = adversarial\n"
                          "seed = 7\n"
                          "seeds = 3\n"
                          "triple = s0,R,s1\n"
                          "out = result.csv\n");
    ExperimentConfig cfg = parse_config_text(in);
    CHECK(cfg.world.kind == WorldSource::Kind::Builtin);
    CHECK(cfg.world.p_r == 0.35);
    CHECK(cfg.method == ExtractMethod::T2Stoch);
    CHECK(cfg.n_grid == std::vector<int>{25, 50});
    CHECK(cfg.delta_grid == std::vector<double>{0.2});
    CHECK(cfg.mode == AgentMode::Adversarial);
    CHECK(cfg.seed == 7);
    CHECK(cfg.num_seeds == 3);
    CHECK_FALSE(cfg.all_triples);
    CHECK(cfg.triple.s == 2);
    CHECK(cfg.triple.a == 1);
    CHECK(cfg.triple.s_prime == 3);
    CHECK(cfg.out_csv == "result.csv");
    CHECK_NOTHROW(cfg.validate());

    SECTION("invalid lines are rejected") {
        std::istringstream bad("builtin chain\n");
        CHECK_THROWS_AS(parse_config_text(bad), ConfigError);
        std::istringstream unknown("mystery = 1\n");
        CHECK_THROWS_AS(parse_config_text(unknown), ConfigError);
    }

    SECTION("over-half delta grids are refused for tail methods") {
        ExperimentConfig c2 = cfg;
        c2.delta_grid = {0.5};
        CHECK_THROWS_AS(c2.validate(), PreconditionError);
        c2.method = ExtractMethod::T1Det;
        CHECK_NOTHROW(c2.validate());
    }

    SECTION("empty grids are rejected") {
        ExperimentConfig c2 = cfg;
        c2.n_grid.clear();
        CHECK_THROWS_AS(c2.validate(), ConfigError);
    }
}

TEST_CASE("triple parsing resolves names and indices") {
    World w = make_chain_world(0.5, 0.5);
    TripleEvent ev = parse_triple("s-1,L,s-2", w);
    CHECK(ev.s == 1);
    CHECK(ev.a == 0);
    CHECK(ev.s_prime == 0);
    TripleEvent raw = parse_triple("2,1,3", w);
    CHECK(raw.s == 2);
    CHECK(raw.a == 1);
    CHECK(raw.s_prime == 3);
    CHECK_THROWS_AS(parse_triple("s0,R", w), ConfigError);
    CHECK_THROWS_AS(parse_triple("s9,R,s0", w), ConfigError);
}

TEST_CASE("sweep rows and determinism") {
    ExperimentConfig cfg;
    cfg.world.kind = WorldSource::Kind::Builtin;
    cfg.world.builtin = "chain";
    cfg.world.p_r = 0.35;
    cfg.world.p_l = 0.5;
    cfg.method = ExtractMethod::T2Stoch;
    cfg.n_grid = {25, 50};
    cfg.delta_grid = {0.2};
    cfg.mode = AgentMode::RandomFeasible;
    cfg.seed = 3;
    cfg.num_seeds = 4;
    cfg.all_triples = false;
    cfg.triple = TripleEvent{2, 1, 3, false};
    cfg.start_state = 2;

    SweepResult res = run_sweep(cfg);
    REQUIRE(res.rows.size() == 2 * 4); // n-grid x seeds
    for (const SweepRow& r : res.rows) {
        CHECK(r.bound_holds);
        CHECK(r.queries == r.n + 2);
        CHECK(r.abs_error == std::abs(r.p_hat - r.p_true));
        CHECK(r.p_true == 0.35);
        CHECK(r.world_id == "chain(pR=0.35,pL=0.5)");
        CHECK(r.triple == "s0,R,s1");
    }

    std::ostringstream csv1, csv2;
    write_sweep_csv(csv1, res);
    write_sweep_csv(csv2, run_sweep(cfg));
    CHECK(strip_wall_ms(csv1.str()) == strip_wall_ms(csv2.str()));

    SECTION("thread cap does not change the rows") {
        setenv("WORLDLENS_THREADS", "1", 1);
        SweepResult serial = run_sweep(cfg);
        unsetenv("WORLDLENS_THREADS");
        std::ostringstream a, b;
        write_sweep_csv(a, res);
        write_sweep_csv(b, serial);
        CHECK(strip_wall_ms(a.str()) == strip_wall_ms(b.str()));
    }

    SECTION("all-triples sweeps cover the whole kernel") {
        ExperimentConfig c2 = cfg;
        c2.all_triples = true;
        c2.n_grid = {25};
        c2.num_seeds = 1;
        SweepResult r2 = run_sweep(c2);
        CHECK(r2.rows.size() == 5u * 2 * 5);
        for (const SweepRow& r : r2.rows) CHECK(r.bound_holds);
    }
}

TEST_CASE("sweep slope fit sees the square-root rate") {
    ExperimentConfig cfg;
    cfg.world.kind = WorldSource::Kind::Builtin;
    cfg.world.builtin = "chain";
    cfg.world.p_r = 0.35;
    cfg.world.p_l = 0.5;
    cfg.method = ExtractMethod::T2Stoch;
    cfg.n_grid = {25, 50, 100, 200, 400, 800};
    cfg.delta_grid = {0.2};
    cfg.mode = AgentMode::Adversarial;
    cfg.seed = 1;
    cfg.all_triples = false;
    cfg.triple = TripleEvent{2, 1, 3, false};
    cfg.start_state = 2;
    SweepResult res = run_sweep(cfg);
    REQUIRE(res.slope_defined);
    CHECK(res.fitted_slope > -0.65);
    CHECK(res.fitted_slope < -0.35);
}

TEST_CASE("dichotomy feasibility profile") {
    DichotomyProfile prof = run_dichotomy_profile();
    CHECK(prof.eps_threshold == Catch::Approx(0.125));
    REQUIRE(prof.rows.size() == 21u);
    for (const auto& row : prof.rows) {
        // forced regions split at 5.5 from below and 8 from above
        if (row.k <= 5) CHECK(row.forced == -1);
        if (row.k >= 6 && row.k <= 7) CHECK(row.forced == 0);
        if (row.k >= 8) CHECK(row.forced == +1);
        CHECK(row.p_le + row.p_gt == Catch::Approx(1.0).margin(1e-12));
        CHECK(row.p_a + row.p_b == Catch::Approx(1.0).margin(1e-12));
    }
    int total = 0;
    for (int x = -1; x <= prof.n; ++x) {
        int count = prof.crossover_counts[x + 1];
        total += count;
        if (count > 0) {
            CHECK(x >= 5);
            CHECK(x <= 7);
        }
    }
    CHECK(total == 200);

    std::ostringstream csv;
    write_dichotomy_profile_csv(csv, prof);
    CHECK(csv.str().find("eps") != std::string::npos);
    CHECK(csv.str().find("# crossover,") != std::string::npos);
}

TEST_CASE("kernel reconstruction through the harness") {
    ExperimentConfig cfg;
    cfg.world.kind = WorldSource::Kind::Builtin;
    cfg.world.builtin = "chain";
    cfg.world.p_r = 0.35;
    cfg.world.p_l = 0.6;
    cfg.method = ExtractMethod::T2Stoch;
    cfg.mode = AgentMode::RandomFeasible;
    cfg.seed = 5;
    cfg.start_state = 2;
    LoadedWorld lw = LoadedWorld::load(cfg.world);
    KernelEstimate ke = run_reconstruction(cfg, lw, 100, 0.1);
    const World& w = lw.base();
    for (int s = 0; s < 5; ++s)
        for (int a = 0; a < 2; ++a) {
            double norm_sum = 0;
            for (int s2 = 0; s2 < 5; ++s2) {
                const Estimate& e = ke.at(s, a, s2);
                CHECK(std::abs(e.p_hat - w.prob(s, a, s2)) <= e.bound_at(w.prob(s, a, s2)));
                norm_sum += ke.normalized_at(s, a, s2);
            }
            CHECK(norm_sum == Catch::Approx(1.0).margin(1e-12));
        }

    std::ostringstream c1, c2;
    write_kernel_csv(c1, w, ke);
    write_kernel_csv(c2, w, run_reconstruction(cfg, lw, 100, 0.1));
    std::string csv = c1.str();
    CHECK(csv == c2.str()); // reruns with the same seed are byte-identical
    // row count: header + one line per triple
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 5 * 2 * 5);
}

TEST_CASE("generated worlds validate and reproduce") {
    for (std::uint64_t seed : {1ull, 7ull, 42ull}) {
        WorldData d = generate_world(seed, 6, 2);
        ValidationReport rep = validate_world(d);
        CHECK(rep.ok());
        std::ostringstream a, b;
        write_world_data(a, d);
        write_world_data(b, generate_world(seed, 6, 2));
        CHECK(a.str() == b.str());
    }
    CHECK_THROWS_AS(generate_world(1, 0, 2), std::invalid_argument);
}

TEST_CASE("loaded worlds expose observability") {
    WorldSource chain;
    chain.kind = WorldSource::Kind::Builtin;
    chain.builtin = "chain";
    CHECK_FALSE(LoadedWorld::load(chain).observable());

    WorldSource fail;
    fail.kind = WorldSource::Kind::Builtin;
    fail.builtin = "fail";
    LoadedWorld lw = LoadedWorld::load(fail);
    CHECK(lw.observable());
    CHECK(lw.observable_world().num_observations() == 6);

    WorldSource bad;
    bad.kind = WorldSource::Kind::Builtin;
    bad.builtin = "mystery";
    CHECK_THROWS_AS(LoadedWorld::load(bad), ConfigError);
}
