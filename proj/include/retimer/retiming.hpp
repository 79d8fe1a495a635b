#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retimer/event_grid.hpp"

namespace retimer {

enum class Norm { linf, l1, l0, multi };

const char* norm_name(Norm n);
Norm norm_from_string(const std::string& s);

// Budget radii for the strict projection. Radii are integers >= 1 for each
// active norm; the multi budget enforces all three at once.
struct BudgetSpec {
    Norm norm = Norm::linf;
    int eps_inf = 0;
    int eps_l1 = 0;
    int eps_l0 = 0;

    static BudgetSpec make_linf(int eps);
    static BudgetSpec make_l1(int eps);
    static BudgetSpec make_l0(int eps);
    static BudgetSpec make_multi(int eps_inf, int eps_l1, int eps_l0);

    // Radius of the single active norm; invalid for multi.
    int radius() const;
    void validate() const;
};

// Per-packet shift alphabet. Under the local-jitter norm each packet scores
// offsets {-eps, ..., +eps}; under the other norms it scores absolute
// target bins {0, ..., T-1}. The multi budget reuses the offset window of
// its eps_inf component.
struct ShiftSupport {
    Norm norm = Norm::linf;
    int eps = 0; // offset half-width; unused for target supports
    int t = 0;
    int size = 0;

    bool offsets() const { return norm == Norm::linf || norm == Norm::multi; }
    int offset_at(int idx) const { return idx - eps; }
    // Landing bin for source bin s and support column idx; may be outside
    // [0, T) for offset supports.
    int target(int s, int idx) const { return offsets() ? s + offset_at(idx) : idx; }
    // Support column that keeps the packet in place.
    int identity_index(int s) const { return offsets() ? eps : s; }
};

ShiftSupport make_support(Norm norm, int eps, int t);
ShiftSupport make_support(const BudgetSpec& budget, int t);

// Dense shift scores, one row per active packet in active_set order.
struct ShiftLogits {
    int rows = 0, cols = 0;
    double kappa = 1.0;
    std::vector<double> phi;

    ShiftLogits() = default;
    ShiftLogits(int rows_, int cols_, double kappa_)
        : rows(rows_), cols(cols_), kappa(kappa_),
          phi(static_cast<size_t>(rows_) * cols_, 0.0) {}

    double& at(int r, int c) { return phi[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return phi[static_cast<size_t>(r) * cols + c]; }
};

struct ShiftDistribution {
    int rows = 0, cols = 0;
    std::vector<double> pi;

    double& at(int r, int c) { return pi[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return pi[static_cast<size_t>(r) * cols + c]; }
};

// Row-wise softmax of phi / kappa, stabilized by max subtraction.
ShiftDistribution tempered_softmax(const ShiftLogits& logits);

// Expected retimed mass: each packet spreads its value over its support
// row. Mass aimed outside [0, T) by an offset support is dropped.
RealGrid soft_shift(const EventGrid& g, const ShiftDistribution& pi, const ShiftSupport& sup);

// Expected packet count per bin (values ignored, each packet counts 1).
RealGrid expected_occupancy(const EventGrid& g, const ShiftDistribution& pi,
                            const ShiftSupport& sup);

// Mean squared overflow above one expected packet per bin.
double capacity_penalty(const EventGrid& g, const ShiftDistribution& pi,
                        const ShiftSupport& sup);

// Expected total displacement sum over packets of pi[s,j,t] * |t - s|.
// Requires a total-shift (l1) target support.
double soft_l1_cost(const EventGrid& g, const ShiftDistribution& pi, const ShiftSupport& sup);

// Expected number of moved packets: sum of (1 - diagonal mass). Requires a
// tamper-count (l0) target support.
double soft_l0_cost(const EventGrid& g, const ShiftDistribution& pi, const ShiftSupport& sup);

// Hinge on the soft budget cost: max(cost/eps - 1, 0) for the l1/l0 norms,
// identically 0 for the offset norms whose support already encodes the
// radius.
double budget_hinge(double cost, int eps, Norm norm);

// Gradient of [sum(d_soft * soft_shift) - lambda_cap * capacity_penalty
// - lambda_budget * budget_hinge] with respect to phi, chained through the
// tempered softmax.
std::vector<double> backward_through_soft(const EventGrid& g, const ShiftDistribution& pi,
                                          const ShiftSupport& sup, const RealGrid& d_soft,
                                          double kappa, double lambda_cap,
                                          double lambda_budget, const BudgetSpec& budget);

// SRP1 distribution dump: header "SRP1 <norm> <eps_inf> <eps_l1> <eps_l0>
// <rows> <cols>" followed by row-major probabilities, one row per active
// packet of the companion grid in active_set order.
void write_distribution(const ShiftDistribution& pi, const BudgetSpec& budget,
                        const std::string& path);
std::pair<ShiftDistribution, BudgetSpec> read_distribution(const std::string& path);

} // namespace retimer
