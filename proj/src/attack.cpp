#include "retimer/attack.hpp"

#include <algorithm>
#include <cmath>

#include "retimer/rng.hpp"

namespace retimer {

int AttackConfig::resolved_iters() const {
    if (iters > 0) return iters;
    return budget.norm == Norm::linf ? 20 : 40;
}

void AttackConfig::validate() const {
    budget.validate();
    if (!(kappa > 0.0)) raise(Errc::invalid_spec, "kappa must be positive");
    if (!(alpha > 0.0)) raise(Errc::invalid_spec, "alpha must be positive");
    if (!(phi_max > 0.0)) raise(Errc::invalid_spec, "phi_max must be positive");
    if (iters < 0) raise(Errc::invalid_spec, "iteration count cannot be negative");
    if (lambda_cap < 0.0 || lambda_budget < 0.0)
        raise(Errc::invalid_spec, "penalty weights cannot be negative");
    if (mode == AttackMode::targeted && target_label < 0)
        raise(Errc::invalid_spec, "targeted attacks need a non-negative label");
}

RealGrid pil_compose(const EventGrid& projected, const RealGrid& soft) {
    if (projected.time_bins() != soft.t || projected.lines() != soft.n)
        raise(Errc::shape_mismatch, "projected grid and soft grid differ in shape");
    return RealGrid::from(projected);
}

TaskGrad untargeted_task(int label) {
    return [label](const Logits& logits) {
        auto [loss, d] = cross_entropy(logits, label);
        return std::make_pair(loss, d);
    };
}

TaskGrad targeted_task(int target) {
    return [target](const Logits& logits) {
        auto [loss, d] = cross_entropy(logits, target);
        for (double& x : d) x = -x;
        return std::make_pair(-loss, d);
    };
}

ObjectiveValue objective(const SnnModel& m, const EventGrid& source, const ShiftLogits& logits,
                         const ShiftSupport& sup, const AttackConfig& cfg,
                         const TaskGrad& task) {
    ShiftDistribution pi = tempered_softmax(logits);
    RealGrid soft = soft_shift(source, pi, sup);

    // Forward pass on the strict projection; the soft tensor carries the
    // gradient (straight-through composition).
    RealGrid net_input = cfg.ablation.no_pil
                             ? soft
                             : pil_compose(strict_project(source, pi, sup, cfg.budget).grid, soft);

    ForwardTrace trace;
    Logits out = forward(m, net_input, &trace);
    auto [task_value, d_logits] = task(out);
    Gradients g = surrogate_backward(m, trace, d_logits);

    double lambda_cap = cfg.ablation.no_cap ? 0.0 : cfg.lambda_cap;
    double lambda_budget = cfg.ablation.no_budget_penalty ? 0.0 : cfg.lambda_budget;

    ObjectiveValue val;
    val.task = task_value;
    val.objective = task_value;
    if (lambda_cap != 0.0)
        val.objective -= lambda_cap * capacity_penalty(source, pi, sup);
    if (lambda_budget != 0.0 && (cfg.budget.norm == Norm::l1 || cfg.budget.norm == Norm::l0)) {
        double cost = cfg.budget.norm == Norm::l1 ? soft_l1_cost(source, pi, sup)
                                                  : soft_l0_cost(source, pi, sup);
        val.objective -= lambda_budget * budget_hinge(cost, cfg.budget.radius(), cfg.budget.norm);
    }
    val.d_phi = backward_through_soft(source, pi, sup, g.input, cfg.kappa, lambda_cap,
                                      lambda_budget, cfg.budget);
    return val;
}

bool logit_update(ShiftLogits& logits, const std::vector<double>& d_phi, double alpha,
                  double phi_max) {
    if (d_phi.size() != logits.phi.size())
        raise(Errc::shape_mismatch, "gradient size does not match the logits");
    bool changed = false;
    for (size_t i = 0; i < logits.phi.size(); ++i) {
        double g = d_phi[i];
        double step = g > 0.0 ? alpha : (g < 0.0 ? -alpha : 0.0);
        double next = std::clamp(logits.phi[i] + step, -phi_max, phi_max);
        if (next != logits.phi[i]) {
            logits.phi[i] = next;
            changed = true;
        }
    }
    return changed;
}

AttackResult run_attack(const SnnModel& m, const LabeledSample& sample,
                        const AttackConfig& cfg) {
    cfg.validate();
    const EventGrid& x = sample.grid;

    auto judge = [&](const EventGrid& grid) {
        int pred = forward(m, grid).argmax();
        return cfg.mode == AttackMode::targeted ? pred == cfg.target_label
                                                : pred != sample.label;
    };

    AttackResult res;
    if (x.active_count() == 0) {
        res.adv = x;
        res.success = judge(x);
        return res;
    }

    ShiftSupport sup = make_support(cfg.budget, x.time_bins());
    ShiftLogits logits(static_cast<int>(x.active_count()), sup.size, cfg.kappa);
    TaskGrad task = cfg.mode == AttackMode::targeted ? targeted_task(cfg.target_label)
                                                     : untargeted_task(sample.label);

    bool phi_changed = false;
    for (int it = 0; it < cfg.resolved_iters(); ++it) {
        ObjectiveValue val = objective(m, x, logits, sup, cfg, task);
        res.loss_log.push_back(val.task);
        phi_changed |= logit_update(logits, val.d_phi, cfg.alpha, cfg.phi_max);
    }

    if (!phi_changed) {
        // Zero gradient throughout: the distribution never moved off its
        // uniform initialization, so the attack proposes nothing.
        res.adv = x;
        res.success = judge(x);
        res.final_loss = res.loss_log.empty() ? 0.0 : res.loss_log.back();
        res.final_pi = tempered_softmax(logits);
        return res;
    }

    ShiftDistribution pi = tempered_softmax(logits);
    res.final_pi = pi;
    ProjectionResult proj = strict_project(x, pi, sup, cfg.budget);
    res.adv = std::move(proj.grid);
    res.dmap = std::move(proj.dmap);
    res.consumed = proj.consumed;
    res.moved_count = proj.moved_count;
    res.success = judge(res.adv);
    auto [final_task, d_unused] = task(forward(m, res.adv));
    (void)d_unused;
    res.final_loss = final_task;
    return res;
}

ProjectionResult random_retiming_baseline(const EventGrid& g, const BudgetSpec& budget,
                                          uint64_t seed) {
    budget.validate();
    ShiftSupport sup = make_support(budget, g.time_bins());
    ShiftDistribution pi;
    pi.rows = static_cast<int>(g.active_count());
    pi.cols = sup.size;
    pi.pi.resize(static_cast<size_t>(pi.rows) * pi.cols);
    Rng rng(seed);
    for (int r = 0; r < pi.rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < pi.cols; ++c) {
            double x = rng.uniform();
            // Keep scores strictly positive so every in-window move stays a
            // candidate.
            pi.at(r, c) = x + 1e-12;
            sum += pi.at(r, c);
        }
        for (int c = 0; c < pi.cols; ++c) pi.at(r, c) /= sum;
    }
    return strict_project(g, pi, sup, budget);
}

ShiftHistogram shift_statistics(const DisplacementMap& dmap, const EventGrid& source) {
    ShiftHistogram hist;
    for (const auto& [p, delta] : dmap.entries()) {
        if (delta == 0) continue;
        if (p.j < 0 || p.j >= source.lines())
            raise(Errc::invalid_argument, "displacement entry outside the grid");
        ++hist[source.line_channel(p.j)][delta];
    }
    return hist;
}

} // namespace retimer
