#pragma once

#include <string>
#include <vector>

#include "retimer/retiming.hpp"

namespace retimer {

struct Candidate {
    int s = 0, j = 0, t = 0;
    double score = 0.0;
    int distance = 0; // |t - s|
};

// Proposed moves for every active packet: all in-budget landing bins other
// than the source bin, carrying the packet's probability mass for that bin.
// Zero-score proposals are never generated, so a point mass at the identity
// produces no candidates at all.
std::vector<Candidate> generate_candidates(const EventGrid& g, const ShiftDistribution& pi,
                                           const ShiftSupport& sup, const BudgetSpec& budget);

// Greedy rank: probability first, shorter moves win near-ties. The epsilon
// is small enough that it never reorders scores that differ by more than
// itself; exact key ties fall back to (j, s, t) ascending.
double priority_key(const Candidate& c, int t_bins);

struct ConsumedBudget {
    int linf = 0;  // max |delta| over moved packets
    long long l1 = 0; // sum |delta|
    long long l0 = 0; // moved packet count

    bool operator==(const ConsumedBudget&) const = default;
};

struct ProjectionResult {
    EventGrid grid;
    DisplacementMap dmap;
    ConsumedBudget consumed;
    long long moved_count = 0;

    bool operator==(const ProjectionResult&) const = default;
};

// Single-pass greedy assignment of packets to bins. Scans candidates in
// priority order; a candidate is skipped when its source already moved, its
// target bin is occupied by an accepted move or reserved by a packet that
// has not moved yet, or the remaining budget cannot pay for it (skipped
// candidates are not revisited). Unmoved packets stay in place, so the
// output always preserves every line's value multiset exactly.
ProjectionResult strict_project(const EventGrid& g, const ShiftDistribution& pi,
                                const ShiftSupport& sup, const BudgetSpec& budget);

struct FeasibilityReport {
    std::vector<std::string> violations;

    bool ok() const { return violations.empty(); }
};

// Structured post-check of a projection result against its source: rate
// preservation, capacity, value-kind range, budget consumption within the
// radii, and exact replay of the displacement map. Never throws.
FeasibilityReport verify_feasible(const EventGrid& source, const ProjectionResult& result,
                                  const BudgetSpec& budget);

// Independent naive re-derivation of the greedy projection for tiny
// instances (at most 6 packets, T at most 5); used to cross-check
// strict_project bit-exactly.
ProjectionResult exhaustive_oracle(const EventGrid& g, const ShiftDistribution& pi,
                                   const ShiftSupport& sup, const BudgetSpec& budget);

} // namespace retimer
