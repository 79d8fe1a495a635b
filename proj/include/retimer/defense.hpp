#pragma once

#include <cstdint>

#include "retimer/attack.hpp"

namespace retimer {

struct AtConfig {
    BudgetSpec budget;
    enum class Variant { madry, trades } variant = Variant::madry;
    double beta = 6.0; // KL weight for the trades variant
    int inner_iters = 10;
    int epochs = 10;
    double lr = 1e-3;
    uint64_t seed = 1;

    void validate() const;
};

// Adversarial training with the timing-only inner maximizer. The inner
// loop ascends through the soft shifter and the strict projection is
// applied once at the end, so every training example stays feasible. The
// madry variant trains on the adversarial cross-entropy; the trades variant
// adds beta * KL(clean || adversarial) to the clean loss and its inner loop
// ascends that KL term.
TrainReport adversarial_train(SnnModel& m, const std::vector<LabeledSample>& train_set,
                              const std::vector<LabeledSample>& test_set, const AtConfig& cfg);

// Accuracy (percent) on strict-projected adversarial examples crafted
// against the given model.
double robust_accuracy(const SnnModel& m, const std::vector<LabeledSample>& samples,
                       const AttackConfig& attack);

struct FilterConfig {
    enum class Kind { none, refractory, temporal, spatial } kind = Kind::none;
    double p = 0.0;  // defense strength in [0, 1]
    int rp_bins = 2; // refractory lookback window

    void validate() const;
};

// Causal refractory suppression per line: scanning forward in time, an
// event within rp_bins of the previous *kept* event is dropped with
// probability p.
EventGrid refractory_filter(const EventGrid& g, int rp_bins, double p, uint64_t seed);

// Length-3 box filter along time, applied to the whole sample with
// probability p. Border bins average their available neighbors.
RealGrid temporal_mean_smooth(const EventGrid& g, double p, uint64_t seed);

// 3x3 spatial mean per (t, c) frame, applied to the whole sample with
// probability p. Border pixels average their available neighbors.
RealGrid spatial_mean_smooth(const EventGrid& g, double p, uint64_t seed);

RealGrid apply_filter(const FilterConfig& cfg, const EventGrid& g, uint64_t seed);

struct DefendedMetrics {
    double clean_acc = 0.0; // percent, filter in the loop
    double asr = 0.0;       // percent over the clean-correct set
    bool asr_defined = false;
    int n_clean_correct = 0;
};

// Gray-box protocol: attacks are crafted against the bare model, the
// filter runs in front of the classifier at evaluation time.
DefendedMetrics defended_eval(const SnnModel& m, const FilterConfig& filter,
                              const AttackConfig& attack,
                              const std::vector<LabeledSample>& samples, uint64_t seed);

} // namespace retimer
