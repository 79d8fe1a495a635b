#include "retimer/snn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "retimer/rng.hpp"

namespace retimer {

void LifParams::validate() const {
    if (!(tau > 0.0 && tau <= 1.0)) raise(Errc::invalid_spec, "tau must be in (0, 1]");
    if (!(v_th > 0.0)) raise(Errc::invalid_spec, "v_th must be positive");
    if (!(surrogate_width > 0.0)) raise(Errc::invalid_spec, "surrogate width must be positive");
}

SnnModel SnnModel::make(const std::vector<int>& dims, const LifParams& lif, uint64_t seed) {
    if (dims.size() < 2) raise(Errc::invalid_spec, "model needs at least input and output dims");
    for (int d : dims)
        if (d < 1) raise(Errc::invalid_spec, "layer dims must be positive");
    lif.validate();
    SnnModel m;
    m.dims_ = dims;
    m.lif_ = lif;
    Rng rng(seed);
    for (size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.in = dims[l];
        layer.out = dims[l + 1];
        layer.w.resize(static_cast<size_t>(layer.out) * layer.in);
        layer.b.assign(layer.out, 0.0);
        double scale = 1.0 / std::sqrt(static_cast<double>(layer.in));
        for (double& x : layer.w) x = rng.normal(0.0, scale);
        m.layers_.push_back(std::move(layer));
    }
    return m;
}

std::pair<double, double> lif_step(double u_prev, double spike_prev, double input,
                                   const LifParams& p) {
    double u = p.tau * u_prev * (1.0 - spike_prev) + input;
    double spike = u >= p.v_th ? 1.0 : 0.0;
    return {u, spike};
}

int Logits::argmax() const {
    return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

std::vector<double> Logits::log_softmax() const {
    double m = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double x : z) sum += std::exp(x - m);
    double lse = m + std::log(sum);
    std::vector<double> out(z.size());
    for (size_t i = 0; i < z.size(); ++i) out[i] = z[i] - lse;
    return out;
}

std::vector<double> Logits::softmax() const {
    std::vector<double> out = log_softmax();
    for (double& x : out) x = std::exp(x);
    return out;
}

namespace {

void matvec(const DenseLayer& layer, const double* x, double* out) {
    for (int i = 0; i < layer.out; ++i) {
        const double* row = layer.w.data() + static_cast<size_t>(i) * layer.in;
        double acc = layer.b[i];
        for (int k = 0; k < layer.in; ++k) acc += row[k] * x[k];
        out[i] = acc;
    }
}

// out[k] += W^T g, accumulating into the input-side vector.
void matvec_transpose_add(const DenseLayer& layer, const double* g, double* out) {
    for (int i = 0; i < layer.out; ++i) {
        const double* row = layer.w.data() + static_cast<size_t>(i) * layer.in;
        for (int k = 0; k < layer.in; ++k) out[k] += row[k] * g[i];
    }
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Logits run_forward(const SnnModel& m, const RealGrid& input, SpikeFn fn, double sharpness,
                   ForwardTrace* trace) {
    if (input.n != m.input_size())
        raise(Errc::shape_mismatch, "input has " + std::to_string(input.n) +
                                        " lines, model expects " +
                                        std::to_string(m.input_size()));
    if (input.t < 1) raise(Errc::invalid_argument, "input needs at least one time bin");
    const LifParams& p = m.lif();
    int T = input.t;
    int L = m.hidden_layers();
    const auto& layers = m.layers();

    if (trace) {
        trace->fn = fn;
        trace->sharpness = sharpness;
        trace->dims = m.dims();
        trace->input = input;
        trace->u.assign(L, {});
        trace->s.assign(L, {});
        for (int l = 0; l < L; ++l) {
            trace->u[l].assign(static_cast<size_t>(T) * layers[l].out, 0.0);
            trace->s[l].assign(static_cast<size_t>(T) * layers[l].out, 0.0);
        }
    }

    std::vector<std::vector<double>> u_prev(L), s_prev(L);
    for (int l = 0; l < L; ++l) {
        u_prev[l].assign(layers[l].out, 0.0);
        s_prev[l].assign(layers[l].out, 0.0);
    }

    Logits logits;
    logits.z.assign(m.num_classes(), 0.0);
    std::vector<double> cur, a, zt(m.num_classes());
    for (int t = 0; t < T; ++t) {
        cur.assign(input.v.begin() + static_cast<size_t>(t) * input.n,
                   input.v.begin() + static_cast<size_t>(t + 1) * input.n);
        for (int l = 0; l < L; ++l) {
            const DenseLayer& layer = layers[l];
            a.resize(layer.out);
            matvec(layer, cur.data(), a.data());
            for (int i = 0; i < layer.out; ++i) {
                double u, spike;
                if (fn == SpikeFn::hard) {
                    std::tie(u, spike) = lif_step(u_prev[l][i], s_prev[l][i], a[i], p);
                } else {
                    u = p.tau * u_prev[l][i] * (1.0 - s_prev[l][i]) + a[i];
                    spike = sigmoid(sharpness * (u - p.v_th));
                }
                u_prev[l][i] = u;
                s_prev[l][i] = spike;
                if (trace) {
                    trace->u[l][static_cast<size_t>(t) * layer.out + i] = u;
                    trace->s[l][static_cast<size_t>(t) * layer.out + i] = spike;
                }
            }
            cur = s_prev[l];
        }
        matvec(layers.back(), cur.data(), zt.data());
        for (int k = 0; k < m.num_classes(); ++k) logits.z[k] += zt[k];
    }
    for (double& z : logits.z) z /= T;
    return logits;
}

} // namespace

Logits forward(const SnnModel& m, const RealGrid& input, ForwardTrace* trace) {
    return run_forward(m, input, SpikeFn::hard, 0.0, trace);
}

Logits forward(const SnnModel& m, const EventGrid& input, ForwardTrace* trace) {
    return run_forward(m, RealGrid::from(input), SpikeFn::hard, 0.0, trace);
}

Logits soft_forward(const SnnModel& m, const RealGrid& input, double sharpness,
                    ForwardTrace* trace) {
    if (!(sharpness > 0.0)) raise(Errc::invalid_argument, "sharpness must be positive");
    return run_forward(m, input, SpikeFn::soft, sharpness, trace);
}

Gradients surrogate_backward(const SnnModel& m, const ForwardTrace& trace,
                             const std::vector<double>& d_logits) {
    if (trace.dims != m.dims())
        raise(Errc::trace_mismatch, "trace was recorded for a different model");
    if (static_cast<int>(d_logits.size()) != m.num_classes())
        raise(Errc::shape_mismatch, "d_logits size does not match the class count");
    if (trace.input.n != m.input_size())
        raise(Errc::trace_mismatch, "trace input does not match the model input size");

    const LifParams& p = m.lif();
    int T = trace.input.t;
    int L = m.hidden_layers();
    const auto& layers = m.layers();

    Gradients g;
    g.layers.resize(layers.size());
    for (size_t l = 0; l < layers.size(); ++l) {
        g.layers[l].in = layers[l].in;
        g.layers[l].out = layers[l].out;
        g.layers[l].w.assign(layers[l].w.size(), 0.0);
        g.layers[l].b.assign(layers[l].b.size(), 0.0);
    }
    g.input = RealGrid(trace.input.t, trace.input.c, trace.input.h, trace.input.w);

    auto lower_activation = [&](int l, int t) -> const double* {
        // Input feeding hidden layer l at time t.
        if (l == 0) return trace.input.v.data() + static_cast<size_t>(t) * trace.input.n;
        return trace.s[l - 1].data() + static_cast<size_t>(t) * layers[l - 1].out;
    };

    const DenseLayer& readout = layers.back();
    // Readout: logits are the time average of W s + b.
    std::vector<double> d_logits_avg(d_logits);
    for (double& x : d_logits_avg) x /= T;
    for (int t = 0; t < T; ++t) {
        const double* below = L > 0 ? trace.s[L - 1].data() + static_cast<size_t>(t) * readout.in
                                    : trace.input.v.data() + static_cast<size_t>(t) * trace.input.n;
        DenseLayer& gr = g.layers.back();
        for (int i = 0; i < readout.out; ++i) {
            double gi = d_logits_avg[i];
            gr.b[i] += gi;
            double* wrow = gr.w.data() + static_cast<size_t>(i) * readout.in;
            for (int k = 0; k < readout.in; ++k) wrow[k] += gi * below[k];
        }
    }
    // Upstream gradient on the spikes feeding the readout, constant in t.
    std::vector<double> readout_up(readout.in, 0.0);
    matvec_transpose_add(readout, d_logits_avg.data(), readout_up.data());

    if (L == 0) {
        for (int t = 0; t < T; ++t) {
            double* row = g.input.v.data() + static_cast<size_t>(t) * trace.input.n;
            for (int k = 0; k < trace.input.n; ++k) row[k] += readout_up[k];
        }
        return g;
    }

    auto spike_deriv = [&](int l, int t, int i) {
        double u = trace.u[l][static_cast<size_t>(t) * layers[l].out + i];
        if (trace.fn == SpikeFn::hard) {
            double width = p.surrogate_width;
            double v = 1.0 - std::abs(u - p.v_th) / width;
            return v > 0.0 ? v / width : 0.0;
        }
        double s = trace.s[l][static_cast<size_t>(t) * layers[l].out + i];
        return trace.sharpness * s * (1.0 - s);
    };

    // upstream[t*dim + i] = dL/ds_l[t][i] from the layer above.
    std::vector<double> upstream(static_cast<size_t>(T) * layers[L - 1].out);
    for (int t = 0; t < T; ++t)
        std::copy(readout_up.begin(), readout_up.end(),
                  upstream.begin() + static_cast<size_t>(t) * readout.in);

    std::vector<double> g_a, g_u_next, below_up;
    for (int l = L - 1; l >= 0; --l) {
        const DenseLayer& layer = layers[l];
        int dim = layer.out;
        g_a.assign(static_cast<size_t>(T) * dim, 0.0);
        g_u_next.assign(dim, 0.0); // dL/du_l[t+1]
        for (int t = T - 1; t >= 0; --t) {
            for (int i = 0; i < dim; ++i) {
                double u = trace.u[l][static_cast<size_t>(t) * dim + i];
                double s = trace.s[l][static_cast<size_t>(t) * dim + i];
                double gs = upstream[static_cast<size_t>(t) * dim + i];
                // Reset path: u[t+1] depends on s[t] through -tau * u[t].
                gs += g_u_next[i] * (-p.tau * u);
                double gu = gs * spike_deriv(l, t, i) + g_u_next[i] * p.tau * (1.0 - s);
                g_a[static_cast<size_t>(t) * dim + i] = gu;
                g_u_next[i] = gu;
            }
        }
        for (int t = 0; t < T; ++t) {
            const double* below = lower_activation(l, t);
            DenseLayer& gl = g.layers[l];
            const double* ga_row = g_a.data() + static_cast<size_t>(t) * dim;
            for (int i = 0; i < dim; ++i) {
                gl.b[i] += ga_row[i];
                double* wrow = gl.w.data() + static_cast<size_t>(i) * layer.in;
                for (int k = 0; k < layer.in; ++k) wrow[k] += ga_row[i] * below[k];
            }
        }
        below_up.assign(static_cast<size_t>(T) * layer.in, 0.0);
        for (int t = 0; t < T; ++t)
            matvec_transpose_add(layer, g_a.data() + static_cast<size_t>(t) * dim,
                                 below_up.data() + static_cast<size_t>(t) * layer.in);
        if (l == 0) {
            g.input.v = below_up;
        } else {
            upstream = below_up;
        }
    }
    return g;
}

std::pair<double, std::vector<double>> cross_entropy(const Logits& logits, int label) {
    if (label < 0 || label >= static_cast<int>(logits.z.size()))
        raise(Errc::invalid_argument, "label out of range");
    std::vector<double> ls = logits.log_softmax();
    double loss = -ls[label];
    std::vector<double> d(logits.z.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = std::exp(ls[i]);
    d[label] -= 1.0;
    return {loss, d};
}

AdamOpt::AdamOpt(const SnnModel& m) {
    for (const auto& layer : m.layers()) {
        DenseLayer z;
        z.in = layer.in;
        z.out = layer.out;
        z.w.assign(layer.w.size(), 0.0);
        z.b.assign(layer.b.size(), 0.0);
        m1_.push_back(z);
        m2_.push_back(z);
    }
}

void AdamOpt::apply(SnnModel& model, const Gradients& g, double lr) {
    static constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    ++step_;
    double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
    for (size_t l = 0; l < model.layers().size(); ++l) {
        auto upd = [&](std::vector<double>& param, const std::vector<double>& grad,
                       std::vector<double>& m, std::vector<double>& v) {
            for (size_t i = 0; i < param.size(); ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
                param[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
            }
        };
        upd(model.layers()[l].w, g.layers[l].w, m1_[l].w, m2_[l].w);
        upd(model.layers()[l].b, g.layers[l].b, m1_[l].b, m2_[l].b);
    }
}

TrainReport train(SnnModel& m, const std::vector<LabeledSample>& train_set,
                  const std::vector<LabeledSample>& test_set, const TrainConfig& cfg) {
    if (cfg.epochs < 1) raise(Errc::invalid_spec, "need at least one epoch");
    if (!(cfg.lr > 0.0)) raise(Errc::invalid_spec, "learning rate must be positive");
    if (train_set.empty()) raise(Errc::invalid_argument, "empty training set");

    AdamOpt adam(m);
    Rng rng(mix_seed(cfg.seed, 0x7261696eULL));
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t{0});

    TrainReport report;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        long long correct = 0;
        for (size_t idx : order) {
            const LabeledSample& sample = train_set[idx];
            ForwardTrace trace;
            Logits logits = forward(m, sample.grid, &trace);
            correct += logits.argmax() == sample.label;
            auto [loss, d_logits] = cross_entropy(logits, sample.label);
            (void)loss;
            Gradients g = surrogate_backward(m, trace, d_logits);
            adam.apply(m, g, cfg.lr);
        }
        report.train_acc.push_back(100.0 * static_cast<double>(correct) /
                                   static_cast<double>(train_set.size()));
        if (!test_set.empty()) report.test_acc.push_back(accuracy(m, test_set));
    }
    return report;
}

double accuracy(const SnnModel& m, const std::vector<LabeledSample>& samples) {
    if (samples.empty()) raise(Errc::invalid_argument, "empty sample set");
    long long correct = 0;
    for (const auto& sample : samples)
        correct += forward(m, sample.grid).argmax() == sample.label;
    return 100.0 * static_cast<double>(correct) / static_cast<double>(samples.size());
}

namespace {

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

} // namespace

void save_model(const SnnModel& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(Errc::io, "cannot write model file " + path);
    out << "SRM1";
    for (int d : m.dims()) out << ' ' << d;
    out << ' ' << fmt_double(m.lif().tau) << ' ' << fmt_double(m.lif().v_th) << ' '
        << fmt_double(m.lif().surrogate_width) << '\n';
    for (const auto& layer : m.layers()) {
        for (int i = 0; i < layer.out; ++i) {
            for (int k = 0; k < layer.in; ++k) {
                if (k) out << ' ';
                out << fmt_double(layer.w[static_cast<size_t>(i) * layer.in + k]);
            }
            out << '\n';
        }
        for (int i = 0; i < layer.out; ++i) {
            if (i) out << ' ';
            out << fmt_double(layer.b[i]);
        }
        out << '\n';
    }
    if (!out) raise(Errc::io, "short write to " + path);
}

SnnModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io, "cannot open model file " + path);
    std::string header;
    if (!std::getline(in, header)) raise(Errc::parse, path + ": missing SRM1 header");
    std::istringstream hs(header);
    std::vector<std::string> tokens;
    std::string tok;
    while (hs >> tok) tokens.push_back(tok);
    if (tokens.empty() || tokens[0] != "SRM1")
        raise(Errc::parse, path + ": bad magic, expected SRM1");
    if (tokens.size() < 6)
        raise(Errc::parse, path + ": header needs at least two dims and three parameters");
    std::vector<int> dims;
    LifParams lif;
    try {
        for (size_t i = 1; i + 3 < tokens.size(); ++i) {
            size_t pos = 0;
            int d = std::stoi(tokens[i], &pos);
            if (pos != tokens[i].size() || d < 1)
                raise(Errc::parse, path + ": bad layer dim '" + tokens[i] + "'");
            dims.push_back(d);
        }
        lif.tau = std::stod(tokens[tokens.size() - 3]);
        lif.v_th = std::stod(tokens[tokens.size() - 2]);
        lif.surrogate_width = std::stod(tokens[tokens.size() - 1]);
    } catch (const Error&) {
        throw;
    } catch (const std::exception&) {
        raise(Errc::parse, path + ": malformed SRM1 header");
    }
    try {
        lif.validate();
    } catch (const Error& e) {
        raise(Errc::parse, path + ": " + e.what());
    }
    SnnModel m = SnnModel::make(dims, lif, 0);
    for (auto& layer : m.layers()) {
        for (double& x : layer.w)
            if (!(in >> x)) raise(Errc::parse, path + ": truncated weights");
        for (double& x : layer.b)
            if (!(in >> x)) raise(Errc::parse, path + ": truncated biases");
    }
    std::string extra;
    if (in >> extra) raise(Errc::parse, path + ": trailing data '" + extra + "'");
    return m;
}

} // namespace retimer
