#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "retimer/projection.hpp"
#include "retimer/rng.hpp"

using namespace retimer;
using rt_test::thrown_code;

namespace {

// Grid with `lines` lines laid out along w, so j equals the w coordinate.
EventGrid line_grid(int t_bins, int lines, GridKind kind = GridKind::binary) {
    return EventGrid(t_bins, 1, 1, lines, kind);
}

ShiftDistribution rows_of(std::vector<std::vector<double>> rows) {
    ShiftDistribution pi;
    pi.rows = static_cast<int>(rows.size());
    pi.cols = static_cast<int>(rows[0].size());
    for (const auto& r : rows) pi.pi.insert(pi.pi.end(), r.begin(), r.end());
    return pi;
}

ShiftDistribution identity_rows(const EventGrid& g, const ShiftSupport& sup) {
    auto packets = active_set(g);
    ShiftDistribution pi;
    pi.rows = static_cast<int>(packets.size());
    pi.cols = sup.size;
    pi.pi.assign(static_cast<size_t>(pi.rows) * pi.cols, 0.0);
    for (size_t r = 0; r < packets.size(); ++r)
        pi.at(static_cast<int>(r), sup.identity_index(packets[r].s)) = 1.0;
    return pi;
}

ShiftDistribution random_rows(int rows, int cols, Rng& rng) {
    ShiftDistribution pi;
    pi.rows = rows;
    pi.cols = cols;
    pi.pi.resize(static_cast<size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            double x = std::exp(rng.normal(0.0, 1.5));
            pi.at(r, c) = x;
            sum += x;
        }
        for (int c = 0; c < cols; ++c) pi.at(r, c) /= sum;
    }
    return pi;
}

EventGrid random_grid(Rng& rng, int t_bins, int lines, int max_packets, GridKind kind) {
    EventGrid g = line_grid(t_bins, lines, kind);
    int placed = 0;
    for (int attempt = 0; attempt < 60 && placed < max_packets; ++attempt) {
        int t = rng.uniform_int(0, t_bins - 1);
        int j = rng.uniform_int(0, lines - 1);
        if (g.at(t, j) > 0) continue;
        g.set(t, j, kind == GridKind::binary ? 1 : rng.uniform_int(1, 3));
        ++placed;
    }
    return g;
}

} // namespace

TEST_CASE("candidate generation skips identity, zero mass and out-of-range bins") {
    EventGrid g = line_grid(3, 1);
    g.set(0, 0, 1);

    SUBCASE("offset window") {
        ShiftSupport sup = make_support(Norm::linf, 1, 3);
        auto cands = generate_candidates(g, rows_of({{0.3, 0.2, 0.5}}), sup,
                                         BudgetSpec::make_linf(1));
        REQUIRE_EQ(cands.size(), 1);
        CHECK_EQ(cands[0].s, 0);
        CHECK_EQ(cands[0].j, 0);
        CHECK_EQ(cands[0].t, 1);
        CHECK_EQ(cands[0].score, doctest::Approx(0.5));
        CHECK_EQ(cands[0].distance, 1);
    }
    SUBCASE("identity point mass proposes nothing") {
        ShiftSupport sup = make_support(Norm::linf, 1, 3);
        CHECK(generate_candidates(g, rows_of({{0.0, 1.0, 0.0}}), sup, BudgetSpec::make_linf(1))
                  .empty());
    }
    SUBCASE("target support keeps over-budget candidates for the scan to refuse") {
        ShiftSupport sup = make_support(Norm::l1, 1, 3);
        auto cands =
            generate_candidates(g, rows_of({{0.2, 0.3, 0.5}}), sup, BudgetSpec::make_l1(1));
        REQUIRE_EQ(cands.size(), 2);
        CHECK_EQ(cands[0].t, 1);
        CHECK_EQ(cands[1].t, 2);
        CHECK_EQ(cands[1].distance, 2);
    }
    SUBCASE("shape checks") {
        ShiftSupport sup = make_support(Norm::linf, 1, 3);
        CHECK_EQ(thrown_code([&] {
                     generate_candidates(g, rows_of({{0.5, 0.5}}), sup, BudgetSpec::make_linf(1));
                 }),
                 Errc::shape_mismatch);
        ShiftSupport wrong_t = make_support(Norm::linf, 1, 4);
        CHECK_EQ(thrown_code([&] {
                     generate_candidates(g, rows_of({{0.3, 0.2, 0.5}}), wrong_t,
                                         BudgetSpec::make_linf(1));
                 }),
                 Errc::shape_mismatch);
    }
}

TEST_CASE("priority ranks by probability, then shorter distance, within a bounded epsilon") {
    Candidate near{0, 0, 1, 0.5, 1};
    Candidate far{0, 0, 3, 0.5, 3};
    CHECK(priority_key(near, 8) > priority_key(far, 8));
    // A real probability gap beats any distance advantage.
    Candidate slightly_better{0, 0, 7, 0.5 + 1e-6, 7};
    CHECK(priority_key(slightly_better, 8) > priority_key(near, 8));
}

TEST_CASE("strict projection accepts the highest mass move") {
    EventGrid g = line_grid(3, 1);
    g.set(0, 0, 1);
    g.set(1, 0, 1);
    BudgetSpec budget = BudgetSpec::make_l1(2);
    ShiftSupport sup = make_support(budget, 3);
    // Packet (0,0) aims at bin 2; packet (1,0) stays put.
    ShiftDistribution pi = rows_of({{0.0, 0.0, 1.0}, {0.0, 1.0, 0.0}});
    ProjectionResult res = strict_project(g, pi, sup, budget);
    CHECK_EQ(res.grid.at(0, 0), 0);
    CHECK_EQ(res.grid.at(1, 0), 1);
    CHECK_EQ(res.grid.at(2, 0), 1);
    CHECK_EQ(res.moved_count, 1);
    CHECK_EQ(res.dmap.delta_or_zero({0, 0}), 2);
    CHECK_EQ(res.consumed.l1, 2);
    CHECK_EQ(res.consumed.linf, 2);
    CHECK_EQ(res.consumed.l0, 1);
    CHECK(verify_feasible(g, res, budget).ok());
}

TEST_CASE("exact ties fall back to source order") {
    EventGrid g = line_grid(3, 1);
    g.set(0, 0, 1);
    g.set(2, 0, 1);
    BudgetSpec budget = BudgetSpec::make_l0(2);
    ShiftSupport sup = make_support(budget, 3);
    // Both packets want bin 1 with the same mass and distance.
    ShiftDistribution pi = rows_of({{0.0, 1.0, 0.0}, {0.0, 1.0, 0.0}});
    ProjectionResult res = strict_project(g, pi, sup, budget);
    CHECK_EQ(res.dmap.delta_or_zero({0, 0}), 1);
    CHECK_EQ(res.dmap.delta_or_zero({2, 0}), 0);
    CHECK_EQ(res.grid.at(1, 0), 1);
    CHECK_EQ(res.grid.at(2, 0), 1);
    CHECK_EQ(res.moved_count, 1);
}

TEST_CASE("bins stay reserved until their packet actually moves") {
    EventGrid g = line_grid(3, 1);
    g.set(0, 0, 1);
    g.set(1, 0, 1);
    BudgetSpec budget = BudgetSpec::make_l1(4);
    ShiftSupport sup = make_support(budget, 3);
    // The best move wants the bin of a packet that only moves later, so it
    // is refused and never revisited.
    ShiftDistribution pi = rows_of({{0.1, 0.9, 0.0}, {0.0, 0.2, 0.8}});
    ProjectionResult res = strict_project(g, pi, sup, budget);
    CHECK_EQ(res.grid.at(0, 0), 1);
    CHECK_EQ(res.grid.at(1, 0), 0);
    CHECK_EQ(res.grid.at(2, 0), 1);
    CHECK_EQ(res.moved_count, 1);
    CHECK_EQ(res.dmap.delta_or_zero({0, 0}), 0);
    CHECK_EQ(res.dmap.delta_or_zero({1, 0}), 1);
}

TEST_CASE("total-shift budget skips unaffordable moves and keeps scanning") {
    EventGrid g = line_grid(4, 3);
    g.set(0, 0, 1);
    g.set(0, 1, 1);
    g.set(0, 2, 1);
    ShiftSupport sup = make_support(Norm::l1, 1, 4);
    ShiftDistribution pi = rows_of({
        {0.2, 0.0, 0.0, 0.8}, // line 0: jump of 3
        {0.3, 0.7, 0.0, 0.0}, // line 1: step of 1
        {0.4, 0.6, 0.0, 0.0}, // line 2: step of 1
    });

    SUBCASE("radius 2 affords the two short moves") {
        ProjectionResult res = strict_project(g, pi, sup, BudgetSpec::make_l1(2));
        CHECK_EQ(res.moved_count, 2);
        CHECK_EQ(res.consumed.l1, 2);
        CHECK_EQ(res.dmap.delta_or_zero({0, 0}), 0);
        CHECK_EQ(res.dmap.delta_or_zero({0, 1}), 1);
        CHECK_EQ(res.dmap.delta_or_zero({0, 2}), 1);
    }
    SUBCASE("radius 3 spends everything on the big jump") {
        // More budget, fewer moves: the greedy scan is not monotone in the
        // total-shift radius.
        ProjectionResult res = strict_project(g, pi, sup, BudgetSpec::make_l1(3));
        CHECK_EQ(res.moved_count, 1);
        CHECK_EQ(res.consumed.l1, 3);
        CHECK_EQ(res.dmap.delta_or_zero({0, 0}), 3);
    }
}

TEST_CASE("tamper-count budget caps accepted moves") {
    EventGrid g = line_grid(3, 3);
    g.set(0, 0, 1);
    g.set(0, 1, 1);
    g.set(0, 2, 1);
    BudgetSpec budget = BudgetSpec::make_l0(1);
    ShiftSupport sup = make_support(budget, 3);
    ShiftDistribution pi = rows_of({
        {0.1, 0.9, 0.0},
        {0.2, 0.8, 0.0},
        {0.3, 0.7, 0.0},
    });
    ProjectionResult res = strict_project(g, pi, sup, budget);
    CHECK_EQ(res.moved_count, 1);
    CHECK_EQ(res.dmap.delta_or_zero({0, 0}), 1);
    CHECK_EQ(res.dmap.delta_or_zero({0, 1}), 0);
    CHECK_EQ(res.consumed.l0, 1);
}

TEST_CASE("combined budget charges every meter") {
    EventGrid g = line_grid(4, 3);
    g.set(0, 0, 1);
    g.set(0, 1, 1);
    g.set(0, 2, 1);
    BudgetSpec budget = BudgetSpec::make_multi(2, 3, 2);
    ShiftSupport sup = make_support(budget, 4); // offsets -2..2
    ShiftDistribution pi = rows_of({
        {0.0, 0.0, 0.1, 0.0, 0.9}, // line 0: +2
        {0.0, 0.0, 0.2, 0.8, 0.0}, // line 1: +1
        {0.0, 0.0, 0.3, 0.7, 0.0}, // line 2: +1, refused once l0 runs dry
    });
    ProjectionResult res = strict_project(g, pi, sup, budget);
    CHECK_EQ(res.moved_count, 2);
    CHECK_EQ(res.consumed.linf, 2);
    CHECK_EQ(res.consumed.l1, 3);
    CHECK_EQ(res.consumed.l0, 2);
    CHECK_EQ(res.dmap.delta_or_zero({0, 2}), 0);
    CHECK(verify_feasible(g, res, budget).ok());
}

TEST_CASE("identity distribution projects to the unchanged grid") {
    Rng rng(31);
    for (Norm norm : {Norm::linf, Norm::l1, Norm::l0}) {
        BudgetSpec budget = norm == Norm::linf ? BudgetSpec::make_linf(2)
                            : norm == Norm::l1 ? BudgetSpec::make_l1(3)
                                               : BudgetSpec::make_l0(2);
        EventGrid g = random_grid(rng, 5, 3, 5, GridKind::integer);
        ShiftSupport sup = make_support(budget, 5);
        ProjectionResult res = strict_project(g, identity_rows(g, sup), sup, budget);
        CHECK(res.grid == g);
        CHECK_EQ(res.moved_count, 0);
        CHECK(res.dmap.empty());
        CHECK_EQ(res.consumed, ConsumedBudget{});
    }
}

TEST_CASE("projection is deterministic") {
    Rng rng(77);
    EventGrid g = random_grid(rng, 5, 3, 6, GridKind::binary);
    BudgetSpec budget = BudgetSpec::make_l1(4);
    ShiftSupport sup = make_support(budget, 5);
    ShiftDistribution pi = random_rows(static_cast<int>(g.active_count()), sup.size, rng);
    ProjectionResult a = strict_project(g, pi, sup, budget);
    ProjectionResult b = strict_project(g, pi, sup, budget);
    CHECK(a == b);
}

TEST_CASE("moved count grows with the tamper-count radius") {
    Rng rng(123);
    for (int trial = 0; trial < 50; ++trial) {
        EventGrid g = random_grid(rng, 4, 3, 5, GridKind::binary);
        if (g.active_count() == 0) continue;
        ShiftSupport sup = make_support(Norm::l0, 1, 4);
        ShiftDistribution pi = random_rows(static_cast<int>(g.active_count()), sup.size, rng);
        long long prev = -1;
        for (int eps = 1; eps <= 5; ++eps) {
            ProjectionResult res = strict_project(g, pi, sup, BudgetSpec::make_l0(eps));
            CHECK(res.moved_count >= prev);
            prev = res.moved_count;
        }
    }
}

TEST_CASE("moved count grows with the combined tamper-count radius") {
    Rng rng(321);
    for (int trial = 0; trial < 30; ++trial) {
        EventGrid g = random_grid(rng, 5, 2, 5, GridKind::binary);
        if (g.active_count() == 0) continue;
        ShiftSupport sup = make_support(Norm::multi, 2, 5);
        ShiftDistribution pi = random_rows(static_cast<int>(g.active_count()), sup.size, rng);
        long long prev = -1;
        for (int eps = 1; eps <= 4; ++eps) {
            ProjectionResult res =
                strict_project(g, pi, sup, BudgetSpec::make_multi(2, 100, eps));
            CHECK(res.moved_count >= prev);
            prev = res.moved_count;
        }
    }
}

TEST_CASE("strict projection matches the naive oracle on random tiny instances") {
    Rng rng(2718);
    auto run_norm = [&](Norm norm, int trials) {
        for (int trial = 0; trial < trials; ++trial) {
            int t_bins = rng.uniform_int(2, 5);
            int lines = rng.uniform_int(1, 3);
            GridKind kind = rng.bernoulli(0.5) ? GridKind::binary : GridKind::integer;
            EventGrid g = random_grid(rng, t_bins, lines, rng.uniform_int(1, 6), kind);
            BudgetSpec budget;
            switch (norm) {
            case Norm::linf:
                budget = BudgetSpec::make_linf(rng.uniform_int(1, std::max(1, t_bins - 1)));
                break;
            case Norm::l1: budget = BudgetSpec::make_l1(rng.uniform_int(1, 6)); break;
            case Norm::l0: budget = BudgetSpec::make_l0(rng.uniform_int(1, 4)); break;
            case Norm::multi:
                budget = BudgetSpec::make_multi(rng.uniform_int(1, 2), rng.uniform_int(1, 6),
                                                rng.uniform_int(1, 4));
                break;
            }
            ShiftSupport sup = make_support(budget, t_bins);
            ShiftDistribution pi =
                random_rows(static_cast<int>(g.active_count()), sup.size, rng);
            ProjectionResult fast = strict_project(g, pi, sup, budget);
            ProjectionResult slow = exhaustive_oracle(g, pi, sup, budget);
            CHECK(fast == slow);
            CHECK(verify_feasible(g, fast, budget).ok());
        }
    };
    run_norm(Norm::linf, 200);
    run_norm(Norm::l1, 200);
    run_norm(Norm::l0, 200);
    run_norm(Norm::multi, 200);
}

TEST_CASE("oracle refuses big instances") {
    Rng rng(5);
    EventGrid big = random_grid(rng, 4, 3, 7, GridKind::binary);
    REQUIRE_EQ(big.active_count(), 7);
    BudgetSpec budget = BudgetSpec::make_l0(2);
    ShiftSupport sup = make_support(budget, 4);
    ShiftDistribution pi = random_rows(7, sup.size, rng);
    CHECK_EQ(thrown_code([&] { exhaustive_oracle(big, pi, sup, budget); }), Errc::too_large);

    EventGrid long_g = line_grid(6, 1);
    long_g.set(0, 0, 1);
    ShiftSupport sup6 = make_support(Norm::l0, 2, 6);
    ShiftDistribution pi6 = random_rows(1, 6, rng);
    CHECK_EQ(thrown_code([&] { exhaustive_oracle(long_g, pi6, sup6, BudgetSpec::make_l0(2)); }),
             Errc::too_large);
}

TEST_CASE("feasibility checker reports corruption") {
    EventGrid g = line_grid(4, 2);
    g.set(0, 0, 1);
    g.set(2, 0, 1);
    g.set(1, 1, 1);
    BudgetSpec budget = BudgetSpec::make_l1(4);
    ShiftSupport sup = make_support(budget, 4);
    Rng rng(9);
    ShiftDistribution pi = random_rows(3, sup.size, rng);
    ProjectionResult good = strict_project(g, pi, sup, budget);
    REQUIRE(verify_feasible(g, good, budget).ok());

    SUBCASE("value flip breaks rate preservation") {
        ProjectionResult bad = good;
        int hit_t = -1;
        for (int t = 0; t < 4 && hit_t < 0; ++t)
            if (bad.grid.at(t, 1) > 0) hit_t = t;
        REQUIRE(hit_t >= 0);
        bad.grid.set(hit_t, 1, 0);
        CHECK_FALSE(verify_feasible(g, bad, budget).ok());
    }
    SUBCASE("moved count lie") {
        ProjectionResult bad = good;
        bad.moved_count += 1;
        auto rep = verify_feasible(g, bad, budget);
        CHECK_FALSE(rep.ok());
    }
    SUBCASE("consumed budget lie") {
        ProjectionResult bad = good;
        bad.consumed.l1 += 1;
        CHECK_FALSE(verify_feasible(g, bad, budget).ok());
    }
    SUBCASE("displacement entry for an inactive packet") {
        ProjectionResult bad = good;
        bad.dmap.set({3, 1}, 0);
        CHECK_FALSE(verify_feasible(g, bad, budget).ok());
    }
}

TEST_CASE("feasibility checker enforces the budget radii") {
    EventGrid g = line_grid(4, 1);
    g.set(0, 0, 1);
    ProjectionResult res;
    res.grid = line_grid(4, 1);
    res.grid.set(3, 0, 1);
    res.dmap.set({0, 0}, 3);
    res.consumed = {3, 3, 1};
    res.moved_count = 1;
    CHECK(verify_feasible(g, res, BudgetSpec::make_linf(3)).ok());
    auto rep = verify_feasible(g, res, BudgetSpec::make_linf(1));
    REQUIRE_FALSE(rep.ok());
    CHECK(rep.violations[0].find("local jitter") != std::string::npos);
    CHECK_FALSE(verify_feasible(g, res, BudgetSpec::make_l1(2)).ok());
    CHECK(verify_feasible(g, res, BudgetSpec::make_l1(3)).ok());

    // Two moved packets against a tamper-count radius of one.
    EventGrid g2 = line_grid(4, 2);
    g2.set(0, 0, 1);
    g2.set(0, 1, 1);
    ProjectionResult two;
    two.grid = line_grid(4, 2);
    two.grid.set(1, 0, 1);
    two.grid.set(1, 1, 1);
    two.dmap.set({0, 0}, 1);
    two.dmap.set({0, 1}, 1);
    two.consumed = {1, 2, 2};
    two.moved_count = 2;
    CHECK(verify_feasible(g2, two, BudgetSpec::make_multi(1, 2, 2)).ok());
    auto rep2 = verify_feasible(g2, two, BudgetSpec::make_multi(1, 2, 1));
    REQUIRE_FALSE(rep2.ok());
    CHECK(rep2.violations[0].find("tamper count") != std::string::npos);
}
