#include "retimer/projection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <set>

namespace retimer {

std::vector<Candidate> generate_candidates(const EventGrid& g, const ShiftDistribution& pi,
                                           const ShiftSupport& sup, const BudgetSpec& budget) {
    budget.validate();
    if (sup.t != g.time_bins())
        raise(Errc::shape_mismatch, "support was built for a different time length");
    if (pi.rows != g.active_count())
        raise(Errc::shape_mismatch, "distribution rows do not match the active packet count");
    if (pi.cols != sup.size)
        raise(Errc::shape_mismatch, "distribution columns do not match the support size");

    std::vector<Candidate> out;
    auto packets = active_set(g);
    for (size_t r = 0; r < packets.size(); ++r) {
        auto [s, j] = packets[r];
        for (int c = 0; c < sup.size; ++c) {
            int t = sup.target(s, c);
            if (t == s || t < 0 || t >= g.time_bins()) continue;
            double score = pi.at(static_cast<int>(r), c);
            if (!(score > 0.0)) continue;
            out.push_back({s, j, t, score, std::abs(t - s)});
        }
    }
    return out;
}

double priority_key(const Candidate& c, int t_bins) {
    double tie_eps = 1e-9 / static_cast<double>(t_bins);
    return c.score + tie_eps * static_cast<double>((t_bins - 1) - c.distance);
}

namespace {

bool candidate_before(const Candidate& a, double key_a, const Candidate& b, double key_b) {
    if (key_a != key_b) return key_a > key_b;
    if (a.j != b.j) return a.j < b.j;
    if (a.s != b.s) return a.s < b.s;
    return a.t < b.t;
}

} // namespace

ProjectionResult strict_project(const EventGrid& g, const ShiftDistribution& pi,
                                const ShiftSupport& sup, const BudgetSpec& budget) {
    std::vector<Candidate> cands = generate_candidates(g, pi, sup, budget);
    int t_bins = g.time_bins();
    std::vector<double> keys(cands.size());
    std::vector<size_t> order(cands.size());
    for (size_t i = 0; i < cands.size(); ++i) {
        keys[i] = priority_key(cands[i], t_bins);
        order[i] = i;
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return candidate_before(cands[a], keys[a], cands[b], keys[b]);
    });

    int n = g.lines();
    std::vector<char> occupied(static_cast<size_t>(t_bins) * n, 0);
    std::vector<char> reserved(static_cast<size_t>(t_bins) * n, 0);
    std::vector<char> moved(static_cast<size_t>(t_bins) * n, 0);
    for (int s = 0; s < t_bins; ++s)
        for (int j = 0; j < n; ++j)
            if (g.at(s, j) > 0) reserved[static_cast<size_t>(s) * n + j] = 1;

    long long rem_l1 = budget.eps_l1;
    long long rem_l0 = budget.eps_l0;

    ProjectionResult res;
    res.grid = EventGrid(t_bins, g.channels(), g.height(), g.width(), g.kind());
    for (size_t idx : order) {
        const Candidate& c = cands[idx];
        size_t src = static_cast<size_t>(c.s) * n + c.j;
        size_t dst = static_cast<size_t>(c.t) * n + c.j;
        if (moved[src] || occupied[dst] || reserved[dst]) continue;
        switch (budget.norm) {
        case Norm::linf:
            break; // the support window is the whole budget
        case Norm::l1:
            if (c.distance > rem_l1) continue;
            break;
        case Norm::l0:
            if (rem_l0 < 1) continue;
            break;
        case Norm::multi:
            if (c.distance > rem_l1 || rem_l0 < 1) continue;
            break;
        }
        if (budget.norm == Norm::l1 || budget.norm == Norm::multi) rem_l1 -= c.distance;
        if (budget.norm == Norm::l0 || budget.norm == Norm::multi) rem_l0 -= 1;
        res.grid.set(c.t, c.j, g.at(c.s, c.j));
        occupied[dst] = 1;
        moved[src] = 1;
        reserved[src] = 0;
        res.dmap.set({c.s, c.j}, c.t - c.s);
        res.consumed.linf = std::max(res.consumed.linf, c.distance);
        res.consumed.l1 += c.distance;
        res.consumed.l0 += 1;
        ++res.moved_count;
    }
    for (int s = 0; s < t_bins; ++s)
        for (int j = 0; j < n; ++j)
            if (g.at(s, j) > 0 && !moved[static_cast<size_t>(s) * n + j])
                res.grid.set(s, j, g.at(s, j));
    return res;
}

FeasibilityReport verify_feasible(const EventGrid& source, const ProjectionResult& result,
                                  const BudgetSpec& budget) {
    FeasibilityReport rep;
    auto flag = [&](const std::string& msg) { rep.violations.push_back(msg); };

    if (!source.same_shape(result.grid)) {
        flag("result shape differs from the source");
        return rep;
    }
    if (source.kind() != result.grid.kind()) flag("result kind differs from the source");

    for (int j = 0; j < source.lines(); ++j) {
        std::vector<int32_t> a, b;
        int nz_a = 0, nz_b = 0;
        for (int t = 0; t < source.time_bins(); ++t) {
            int32_t x = source.at(t, j), y = result.grid.at(t, j);
            if (y < 0) flag("negative value at (t=" + std::to_string(t) + ", j=" +
                            std::to_string(j) + ")");
            if (result.grid.kind() == GridKind::binary && y > 1)
                flag("binary value above 1 at (t=" + std::to_string(t) + ", j=" +
                     std::to_string(j) + ")");
            if (x) {
                a.push_back(x);
                ++nz_a;
            }
            if (y) {
                b.push_back(y);
                ++nz_b;
            }
        }
        std::sort(a.begin(), a.end());
        std::sort(b.begin(), b.end());
        if (a != b) flag("line " + std::to_string(j) + " changed its value multiset");
        if (nz_a != nz_b)
            flag("line " + std::to_string(j) + " changed its packet count (capacity)");
    }

    int max_abs = 0;
    long long sum_abs = 0, n_moved = 0;
    for (const auto& [p, delta] : result.dmap.entries()) {
        if (p.s < 0 || p.s >= source.time_bins() || p.j < 0 || p.j >= source.lines()) {
            flag("displacement entry outside the grid");
            continue;
        }
        if (source.at(p.s, p.j) == 0)
            flag("displacement entry for an inactive packet at (s=" + std::to_string(p.s) +
                 ", j=" + std::to_string(p.j) + ")");
        if (delta != 0) {
            max_abs = std::max(max_abs, std::abs(delta));
            sum_abs += std::abs(delta);
            ++n_moved;
        }
    }
    if (budget.norm == Norm::linf || budget.norm == Norm::multi)
        if (max_abs > budget.eps_inf)
            flag("local jitter " + std::to_string(max_abs) + " exceeds radius " +
                 std::to_string(budget.eps_inf));
    if (budget.norm == Norm::l1 || budget.norm == Norm::multi)
        if (sum_abs > budget.eps_l1)
            flag("total shift " + std::to_string(sum_abs) + " exceeds radius " +
                 std::to_string(budget.eps_l1));
    if (budget.norm == Norm::l0 || budget.norm == Norm::multi)
        if (n_moved > budget.eps_l0)
            flag("tamper count " + std::to_string(n_moved) + " exceeds radius " +
                 std::to_string(budget.eps_l0));

    if (result.moved_count != n_moved)
        flag("moved_count " + std::to_string(result.moved_count) +
             " disagrees with the displacement map (" + std::to_string(n_moved) + ")");
    if (result.consumed.linf != max_abs || result.consumed.l1 != sum_abs ||
        result.consumed.l0 != n_moved)
        flag("consumed budget disagrees with the displacement map");

    try {
        if (apply_displacement(source, result.dmap) != result.grid)
            flag("replaying the displacement map does not reproduce the result grid");
    } catch (const Error& e) {
        flag(std::string("replay failed: ") + e.what());
    }
    return rep;
}

ProjectionResult exhaustive_oracle(const EventGrid& g, const ShiftDistribution& pi,
                                   const ShiftSupport& sup, const BudgetSpec& budget) {
    budget.validate();
    if (g.active_count() > 6 || g.time_bins() > 5)
        raise(Errc::too_large, "oracle instances are limited to 6 packets and 5 time bins");
    if (sup.t != g.time_bins())
        raise(Errc::shape_mismatch, "support was built for a different time length");
    if (pi.rows != g.active_count() || pi.cols != sup.size)
        raise(Errc::shape_mismatch, "distribution shape does not match grid and support");

    // Fresh enumeration, bin by bin; the packet's distribution row is its
    // rank in (s, j) order, recounted from scratch.
    struct OCand {
        int s, j, t;
        double score;
    };
    std::vector<OCand> cands;
    for (int s = 0; s < g.time_bins(); ++s) {
        for (int j = 0; j < g.lines(); ++j) {
            if (g.at(s, j) == 0) continue;
            int row = 0;
            for (int s2 = 0; s2 < g.time_bins(); ++s2)
                for (int j2 = 0; j2 < g.lines(); ++j2)
                    if (g.at(s2, j2) > 0 && (s2 < s || (s2 == s && j2 < j))) ++row;
            for (int t = 0; t < g.time_bins(); ++t) {
                if (t == s) continue;
                int col;
                if (sup.norm == Norm::linf || sup.norm == Norm::multi) {
                    if (std::abs(t - s) > sup.eps) continue;
                    col = (t - s) + sup.eps;
                } else {
                    col = t;
                }
                double score = pi.at(row, col);
                if (score > 0.0) cands.push_back({s, j, t, score});
            }
        }
    }

    auto key_of = [&](const OCand& c) {
        return c.score + (1e-9 / static_cast<double>(g.time_bins())) *
                             static_cast<double>((g.time_bins() - 1) - std::abs(c.t - c.s));
    };

    std::set<std::pair<int, int>> occupied_bins; // (t, j) taken by accepted moves
    std::set<std::pair<int, int>> moved_from;    // (s, j) sources that moved
    long long spent_l1 = 0, spent_l0 = 0;
    std::vector<bool> done(cands.size(), false);

    ProjectionResult res;
    res.grid = EventGrid(g.time_bins(), g.channels(), g.height(), g.width(), g.kind());
    for (size_t step = 0; step < cands.size(); ++step) {
        // Selection scan for the highest-priority unprocessed candidate.
        int best = -1;
        for (size_t i = 0; i < cands.size(); ++i) {
            if (done[i]) continue;
            if (best < 0) {
                best = static_cast<int>(i);
                continue;
            }
            double ki = key_of(cands[i]), kb = key_of(cands[best]);
            bool before;
            if (ki != kb)
                before = ki > kb;
            else if (cands[i].j != cands[best].j)
                before = cands[i].j < cands[best].j;
            else if (cands[i].s != cands[best].s)
                before = cands[i].s < cands[best].s;
            else
                before = cands[i].t < cands[best].t;
            if (before) best = static_cast<int>(i);
        }
        const OCand& c = cands[best];
        done[best] = true;

        if (moved_from.count({c.s, c.j})) continue;
        if (occupied_bins.count({c.t, c.j})) continue;
        // A target hosting a packet that has not moved away is off limits.
        if (g.at(c.t, c.j) > 0 && !moved_from.count({c.t, c.j})) continue;
        int dist = std::abs(c.t - c.s);
        bool uses_l1 = budget.norm == Norm::l1 || budget.norm == Norm::multi;
        bool uses_l0 = budget.norm == Norm::l0 || budget.norm == Norm::multi;
        if (uses_l1 && spent_l1 + dist > budget.eps_l1) continue;
        if (uses_l0 && spent_l0 + 1 > budget.eps_l0) continue;
        if (uses_l1) spent_l1 += dist;
        if (uses_l0) spent_l0 += 1;
        occupied_bins.insert({c.t, c.j});
        moved_from.insert({c.s, c.j});
        res.grid.set(c.t, c.j, g.at(c.s, c.j));
        res.dmap.set({c.s, c.j}, c.t - c.s);
        res.consumed.linf = std::max(res.consumed.linf, dist);
        res.consumed.l1 += dist;
        res.consumed.l0 += 1;
        ++res.moved_count;
    }
    for (int s = 0; s < g.time_bins(); ++s)
        for (int j = 0; j < g.lines(); ++j)
            if (g.at(s, j) > 0 && !moved_from.count({s, j}))
                res.grid.set(s, j, g.at(s, j));
    return res;
}

} // namespace retimer
