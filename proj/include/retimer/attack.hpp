#pragma once

#include <cstdint>
#include <functional>
#include <map>

#include "retimer/projection.hpp"
#include "retimer/snn.hpp"

namespace retimer {

enum class AttackMode { untargeted, targeted };

struct Ablation {
    bool no_pil = false;            // optimize through the soft shift only
    bool no_cap = false;            // drop the capacity penalty
    bool no_budget_penalty = false; // drop the soft budget hinge
};

struct AttackConfig {
    BudgetSpec budget;
    double kappa = 1.0;
    double alpha = 1.0;
    double phi_max = 10.0;
    int iters = 0; // 0 resolves per norm: 20 for local jitter, 40 otherwise
    double lambda_cap = 20.0;
    double lambda_budget = 10.0;
    AttackMode mode = AttackMode::untargeted;
    int target_label = 0;
    Ablation ablation;

    int resolved_iters() const;
    void validate() const;
};

struct AttackResult {
    EventGrid adv;
    DisplacementMap dmap;
    ConsumedBudget consumed;
    long long moved_count = 0;
    bool success = false;
    double final_loss = 0.0;
    std::vector<double> loss_log;  // task loss per iteration
    ShiftDistribution final_pi;    // distribution behind the final projection
};

// Forward value of the project-inject-lower composition: the strictly
// projected grid carries the values, the soft shift carries the gradient.
// Callers route the loss gradient at this tensor into
// backward_through_soft.
RealGrid pil_compose(const EventGrid& projected, const RealGrid& soft);

// Maps final logits to (task value, d task / d logits). The attack ascends
// this value.
using TaskGrad = std::function<std::pair<double, std::vector<double>>(const Logits&)>;

TaskGrad untargeted_task(int label);
TaskGrad targeted_task(int target);

struct ObjectiveValue {
    double objective = 0.0;   // task - lambda_cap * Cap - lambda_budget * hinge
    double task = 0.0;
    std::vector<double> d_phi; // gradient of the objective w.r.t. phi
};

// One evaluation of the attack objective at the given shift logits,
// including the gradient used by the sign update. Honors the ablation
// flags.
ObjectiveValue objective(const SnnModel& m, const EventGrid& source, const ShiftLogits& logits,
                         const ShiftSupport& sup, const AttackConfig& cfg,
                         const TaskGrad& task);

// phi <- clip(phi + alpha * sign(g), [-phi_max, phi_max]), sign(0) = 0.
// Returns true when any entry changed.
bool logit_update(ShiftLogits& logits, const std::vector<double>& d_phi, double alpha,
                  double phi_max);

// Projected-gradient attack over shift logits. The returned grid is always
// the strict projection of the final distribution; if the logits never
// left their all-zero initialization the unmodified input is returned.
AttackResult run_attack(const SnnModel& m, const LabeledSample& sample,
                        const AttackConfig& cfg);

// Feasible random retiming: uniform random scores pushed through the same
// strict projection.
ProjectionResult random_retiming_baseline(const EventGrid& g, const BudgetSpec& budget,
                                          uint64_t seed);

// channel -> displacement -> count over nonzero displacements.
using ShiftHistogram = std::map<int, std::map<int, long long>>;

ShiftHistogram shift_statistics(const DisplacementMap& dmap, const EventGrid& source);

} // namespace retimer
