#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retimer/event_grid.hpp"

namespace retimer {

struct LifParams {
    double tau = 0.5;            // leak factor in (0, 1]
    double v_th = 1.0;           // firing threshold, > 0
    double surrogate_width = 1.0; // triangular surrogate half-width, > 0

    void validate() const;
};

struct DenseLayer {
    int in = 0, out = 0;
    std::vector<double> w; // row-major [out x in]
    std::vector<double> b; // [out]
};

// Feed-forward LIF stack. Hidden layers integrate-and-fire with hard reset;
// the last layer is a plain affine readout whose pre-activations are
// averaged over time to form the logits.
class SnnModel {
public:
    SnnModel() = default;
    static SnnModel make(const std::vector<int>& dims, const LifParams& lif, uint64_t seed);

    const std::vector<int>& dims() const { return dims_; }
    int input_size() const { return dims_.front(); }
    int num_classes() const { return dims_.back(); }
    int hidden_layers() const { return static_cast<int>(layers_.size()) - 1; }
    const LifParams& lif() const { return lif_; }

    std::vector<DenseLayer>& layers() { return layers_; }
    const std::vector<DenseLayer>& layers() const { return layers_; }

private:
    std::vector<int> dims_;
    std::vector<DenseLayer> layers_;
    LifParams lif_;
};

// One membrane update: decay with hard reset by the previous spike, then
// integrate the input current and threshold. H(0) = 1, so u == v_th fires.
// Returns (u, spike).
std::pair<double, double> lif_step(double u_prev, double spike_prev, double input,
                                   const LifParams& p);

struct Logits {
    std::vector<double> z;

    int argmax() const; // lowest index wins ties
    std::vector<double> log_softmax() const;
    std::vector<double> softmax() const;
};

enum class SpikeFn {
    hard, // Heaviside forward, triangular surrogate backward
    soft, // sigmoid forward, exact sigmoid derivative backward
};

struct ForwardTrace {
    SpikeFn fn = SpikeFn::hard;
    double sharpness = 0.0;
    std::vector<int> dims;
    RealGrid input;
    // Per hidden layer: T x dim, time-major.
    std::vector<std::vector<double>> u;
    std::vector<std::vector<double>> s;
};

Logits forward(const SnnModel& m, const RealGrid& input, ForwardTrace* trace = nullptr);
Logits forward(const SnnModel& m, const EventGrid& input, ForwardTrace* trace = nullptr);

// Fully differentiable variant with spike = sigmoid(sharpness * (u - v_th)).
// Large sharpness approaches the hard forward away from the threshold.
Logits soft_forward(const SnnModel& m, const RealGrid& input, double sharpness,
                    ForwardTrace* trace = nullptr);

struct Gradients {
    std::vector<DenseLayer> layers; // same shapes as the model, gradient values
    RealGrid input;                 // d loss / d input
};

// Backpropagation through time over a recorded trace. The spike
// nonlinearity is differentiated with the trace's spike function: the
// triangular surrogate for hard traces, the exact sigmoid derivative for
// soft ones. The reset factor (1 - s[t-1]) is differentiated the same way.
Gradients surrogate_backward(const SnnModel& m, const ForwardTrace& trace,
                             const std::vector<double>& d_logits);

// Returns (loss, d_logits).
std::pair<double, std::vector<double>> cross_entropy(const Logits& logits, int label);

struct TrainConfig {
    int epochs = 30;
    double lr = 1e-3;
    uint64_t seed = 1;
};

class AdamOpt {
public:
    explicit AdamOpt(const SnnModel& m);
    void apply(SnnModel& m, const Gradients& g, double lr);

private:
    std::vector<DenseLayer> m1_, m2_;
    long long step_ = 0;
};

struct TrainReport {
    std::vector<double> train_acc; // per epoch, percent
    std::vector<double> test_acc;  // per epoch, percent; empty if no test set
};

// Adam over per-sample surrogate gradients, sample order reshuffled each
// epoch from the seed.
TrainReport train(SnnModel& m, const std::vector<LabeledSample>& train_set,
                  const std::vector<LabeledSample>& test_set, const TrainConfig& cfg);

double accuracy(const SnnModel& m, const std::vector<LabeledSample>& samples); // percent

// SRM1 checkpoint: "SRM1 <d0> ... <dL> <tau> <v_th> <surrogate_width>"
// followed by each layer's weights (row-major) then biases as decimal
// floats.
void save_model(const SnnModel& m, const std::string& path);
SnnModel load_model(const std::string& path);

} // namespace retimer
