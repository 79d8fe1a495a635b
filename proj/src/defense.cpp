#include "retimer/defense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "retimer/rng.hpp"

namespace retimer {

void AtConfig::validate() const {
    budget.validate();
    if (inner_iters < 1) raise(Errc::invalid_spec, "need at least one inner iteration");
    if (epochs < 1) raise(Errc::invalid_spec, "need at least one epoch");
    if (!(lr > 0.0)) raise(Errc::invalid_spec, "learning rate must be positive");
    if (beta < 0.0) raise(Errc::invalid_spec, "beta cannot be negative");
}

void FilterConfig::validate() const {
    if (!(p >= 0.0 && p <= 1.0)) raise(Errc::invalid_spec, "filter strength must be in [0, 1]");
    if (kind == Kind::refractory && rp_bins < 1)
        raise(Errc::invalid_spec, "refractory window must be at least 1 bin");
}

namespace {

void add_gradients(Gradients& acc, const Gradients& g) {
    for (size_t l = 0; l < acc.layers.size(); ++l) {
        for (size_t i = 0; i < acc.layers[l].w.size(); ++i)
            acc.layers[l].w[i] += g.layers[l].w[i];
        for (size_t i = 0; i < acc.layers[l].b.size(); ++i)
            acc.layers[l].b[i] += g.layers[l].b[i];
    }
}

// Inner maximizer: ascend the given task through the soft shifter only,
// then project once. Returns the feasible adversarial grid.
EventGrid inner_adversary(const SnnModel& m, const EventGrid& x, const AtConfig& cfg,
                          const TaskGrad& task) {
    if (x.active_count() == 0) return x;
    AttackConfig inner;
    inner.budget = cfg.budget;
    inner.iters = cfg.inner_iters;
    inner.ablation.no_pil = true;
    ShiftSupport sup = make_support(cfg.budget, x.time_bins());
    ShiftLogits logits(static_cast<int>(x.active_count()), sup.size, inner.kappa);
    bool changed = false;
    for (int it = 0; it < cfg.inner_iters; ++it) {
        ObjectiveValue val = objective(m, x, logits, sup, inner, task);
        changed |= logit_update(logits, val.d_phi, inner.alpha, inner.phi_max);
    }
    if (!changed) return x;
    return strict_project(x, tempered_softmax(logits), sup, cfg.budget).grid;
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    double kl = 0.0;
    for (size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) kl += p[i] * (std::log(p[i]) - std::log(q[i]));
    return kl;
}

} // namespace

TrainReport adversarial_train(SnnModel& m, const std::vector<LabeledSample>& train_set,
                              const std::vector<LabeledSample>& test_set, const AtConfig& cfg) {
    cfg.validate();
    if (train_set.empty()) raise(Errc::invalid_argument, "empty training set");

    AdamOpt adam(m);
    Rng rng(mix_seed(cfg.seed, 0x61747261696eULL));
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});

    TrainReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        long long correct = 0;
        for (size_t idx : order) {
            const LabeledSample& sample = train_set[idx];
            if (cfg.variant == AtConfig::Variant::madry) {
                EventGrid adv = inner_adversary(m, sample.grid, cfg,
                                                untargeted_task(sample.label));
                ForwardTrace trace;
                Logits logits = forward(m, adv, &trace);
                correct += forward(m, sample.grid).argmax() == sample.label;
                auto [loss, d_logits] = cross_entropy(logits, sample.label);
                (void)loss;
                adam.apply(m, surrogate_backward(m, trace, d_logits), cfg.lr);
            } else {
                // Clean reference first; the inner loop ascends
                // KL(clean || adversarial).
                Logits clean_ref = forward(m, sample.grid);
                std::vector<double> p = clean_ref.softmax();
                TaskGrad kl_task = [&p](const Logits& adv_logits) {
                    std::vector<double> q = adv_logits.softmax();
                    double kl = kl_divergence(p, q);
                    std::vector<double> d(q.size());
                    for (size_t i = 0; i < q.size(); ++i) d[i] = q[i] - p[i];
                    return std::make_pair(kl, d);
                };
                EventGrid adv = inner_adversary(m, sample.grid, cfg, kl_task);

                ForwardTrace trace_clean, trace_adv;
                Logits z_clean = forward(m, sample.grid, &trace_clean);
                Logits z_adv = forward(m, adv, &trace_adv);
                correct += z_clean.argmax() == sample.label;
                std::vector<double> pc = z_clean.softmax();
                std::vector<double> qa = z_adv.softmax();
                double kl = kl_divergence(pc, qa);

                auto [ce, d_clean] = cross_entropy(z_clean, sample.label);
                (void)ce;
                for (size_t k = 0; k < pc.size(); ++k)
                    d_clean[k] += cfg.beta * pc[k] * ((std::log(pc[k]) - std::log(qa[k])) - kl);
                std::vector<double> d_adv(qa.size());
                for (size_t k = 0; k < qa.size(); ++k) d_adv[k] = cfg.beta * (qa[k] - pc[k]);

                Gradients g = surrogate_backward(m, trace_clean, d_clean);
                add_gradients(g, surrogate_backward(m, trace_adv, d_adv));
                adam.apply(m, g, cfg.lr);
            }
        }
        report.train_acc.push_back(100.0 * static_cast<double>(correct) /
                                   static_cast<double>(train_set.size()));
        if (!test_set.empty()) report.test_acc.push_back(accuracy(m, test_set));
    }
    return report;
}

double robust_accuracy(const SnnModel& m, const std::vector<LabeledSample>& samples,
                       const AttackConfig& attack) {
    if (samples.empty()) raise(Errc::invalid_argument, "empty sample set");
    long long correct = 0;
    for (const auto& sample : samples) {
        AttackResult res = run_attack(m, sample, attack);
        correct += forward(m, res.adv).argmax() == sample.label;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(samples.size());
}

EventGrid refractory_filter(const EventGrid& g, int rp_bins, double p, uint64_t seed) {
    if (rp_bins < 1) raise(Errc::invalid_spec, "refractory window must be at least 1 bin");
    if (!(p >= 0.0 && p <= 1.0)) raise(Errc::invalid_spec, "filter strength must be in [0, 1]");
    Rng rng(seed);
    EventGrid out(g.time_bins(), g.channels(), g.height(), g.width(), g.kind());
    for (int j = 0; j < g.lines(); ++j) {
        int last_kept = -(rp_bins + 1);
        for (int t = 0; t < g.time_bins(); ++t) {
            if (g.at(t, j) == 0) continue;
            if (t - last_kept <= rp_bins && rng.bernoulli(p)) continue; // dropped
            out.set(t, j, g.at(t, j));
            last_kept = t;
        }
    }
    return out;
}

RealGrid temporal_mean_smooth(const EventGrid& g, double p, uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) raise(Errc::invalid_spec, "filter strength must be in [0, 1]");
    Rng rng(seed);
    if (!rng.bernoulli(p)) return RealGrid::from(g);
    RealGrid out(g.time_bins(), g.channels(), g.height(), g.width());
    for (int j = 0; j < g.lines(); ++j) {
        for (int t = 0; t < g.time_bins(); ++t) {
            double sum = 0.0;
            int count = 0;
            for (int dt = -1; dt <= 1; ++dt) {
                int tt = t + dt;
                if (tt < 0 || tt >= g.time_bins()) continue;
                sum += g.at(tt, j);
                ++count;
            }
            out.at(t, j) = sum / count;
        }
    }
    return out;
}

RealGrid spatial_mean_smooth(const EventGrid& g, double p, uint64_t seed) {
    if (!(p >= 0.0 && p <= 1.0)) raise(Errc::invalid_spec, "filter strength must be in [0, 1]");
    Rng rng(seed);
    if (!rng.bernoulli(p)) return RealGrid::from(g);
    RealGrid out(g.time_bins(), g.channels(), g.height(), g.width());
    for (int t = 0; t < g.time_bins(); ++t) {
        for (int c = 0; c < g.channels(); ++c) {
            for (int h = 0; h < g.height(); ++h) {
                for (int w = 0; w < g.width(); ++w) {
                    double sum = 0.0;
                    int count = 0;
                    for (int dh = -1; dh <= 1; ++dh) {
                        for (int dw = -1; dw <= 1; ++dw) {
                            int hh = h + dh, ww = w + dw;
                            if (hh < 0 || hh >= g.height() || ww < 0 || ww >= g.width())
                                continue;
                            sum += g.at(t, c, hh, ww);
                            ++count;
                        }
                    }
                    out.at(t, g.line_index(c, h, w)) = sum / count;
                }
            }
        }
    }
    return out;
}

RealGrid apply_filter(const FilterConfig& cfg, const EventGrid& g, uint64_t seed) {
    cfg.validate();
    switch (cfg.kind) {
    case FilterConfig::Kind::none: return RealGrid::from(g);
    case FilterConfig::Kind::refractory:
        return RealGrid::from(refractory_filter(g, cfg.rp_bins, cfg.p, seed));
    case FilterConfig::Kind::temporal: return temporal_mean_smooth(g, cfg.p, seed);
    case FilterConfig::Kind::spatial: return spatial_mean_smooth(g, cfg.p, seed);
    }
    raise(Errc::invalid_spec, "unknown filter kind");
}

DefendedMetrics defended_eval(const SnnModel& m, const FilterConfig& filter,
                              const AttackConfig& attack,
                              const std::vector<LabeledSample>& samples, uint64_t seed) {
    filter.validate();
    attack.validate();
    if (samples.empty()) raise(Errc::invalid_argument, "empty sample set");

    DefendedMetrics out;
    std::vector<size_t> clean_correct;
    for (size_t i = 0; i < samples.size(); ++i) {
        RealGrid filtered = apply_filter(filter, samples[i].grid, mix_seed(seed, 2 * i));
        if (forward(m, filtered).argmax() == samples[i].label) clean_correct.push_back(i);
    }
    out.clean_acc =
        100.0 * static_cast<double>(clean_correct.size()) / static_cast<double>(samples.size());
    out.n_clean_correct = static_cast<int>(clean_correct.size());
    if (clean_correct.empty()) return out; // asr undefined, flagged not thrown

    long long flips = 0;
    for (size_t i : clean_correct) {
        AttackResult res = run_attack(m, samples[i], attack);
        RealGrid filtered = apply_filter(filter, res.adv, mix_seed(seed, 2 * i + 1));
        int pred = forward(m, filtered).argmax();
        bool success = attack.mode == AttackMode::targeted ? pred == attack.target_label
                                                           : pred != samples[i].label;
        flips += success;
    }
    out.asr = 100.0 * static_cast<double>(flips) / static_cast<double>(clean_correct.size());
    out.asr_defined = true;
    return out;
}

} // namespace retimer
