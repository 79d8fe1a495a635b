#include "retimer/retiming.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace retimer {

const char* norm_name(Norm n) {
    switch (n) {
    case Norm::linf: return "linf";
    case Norm::l1: return "l1";
    case Norm::l0: return "l0";
    case Norm::multi: return "multi";
    }
    return "?";
}

Norm norm_from_string(const std::string& s) {
    if (s == "linf") return Norm::linf;
    if (s == "l1") return Norm::l1;
    if (s == "l0") return Norm::l0;
    if (s == "multi") return Norm::multi;
    raise(Errc::invalid_argument, "unknown norm '" + s + "'");
}

BudgetSpec BudgetSpec::make_linf(int eps) {
    BudgetSpec b{Norm::linf, eps, 0, 0};
    b.validate();
    return b;
}

BudgetSpec BudgetSpec::make_l1(int eps) {
    BudgetSpec b{Norm::l1, 0, eps, 0};
    b.validate();
    return b;
}

BudgetSpec BudgetSpec::make_l0(int eps) {
    BudgetSpec b{Norm::l0, 0, 0, eps};
    b.validate();
    return b;
}

BudgetSpec BudgetSpec::make_multi(int eps_inf, int eps_l1, int eps_l0) {
    BudgetSpec b{Norm::multi, eps_inf, eps_l1, eps_l0};
    b.validate();
    return b;
}

int BudgetSpec::radius() const {
    switch (norm) {
    case Norm::linf: return eps_inf;
    case Norm::l1: return eps_l1;
    case Norm::l0: return eps_l0;
    case Norm::multi: break;
    }
    raise(Errc::invalid_argument, "multi budget has no single radius");
}

void BudgetSpec::validate() const {
    auto need = [](int eps, const char* name) {
        if (eps < 1)
            raise(Errc::invalid_budget, std::string(name) + " radius must be at least 1");
    };
    switch (norm) {
    case Norm::linf: need(eps_inf, "linf"); break;
    case Norm::l1: need(eps_l1, "l1"); break;
    case Norm::l0: need(eps_l0, "l0"); break;
    case Norm::multi:
        need(eps_inf, "linf");
        need(eps_l1, "l1");
        need(eps_l0, "l0");
        break;
    }
}

ShiftSupport make_support(Norm norm, int eps, int t) {
    if (t < 1) raise(Errc::invalid_argument, "support needs at least one time bin");
    ShiftSupport sup;
    sup.norm = norm;
    sup.t = t;
    if (norm == Norm::linf || norm == Norm::multi) {
        if (eps < 1) raise(Errc::invalid_budget, "offset support needs radius at least 1");
        sup.eps = eps;
        sup.size = 2 * eps + 1;
    } else {
        sup.eps = 0;
        sup.size = t;
    }
    return sup;
}

ShiftSupport make_support(const BudgetSpec& budget, int t) {
    budget.validate();
    return make_support(budget.norm, budget.eps_inf, t);
}

namespace {

void check_rows(const EventGrid& g, int rows, int cols, const ShiftSupport& sup) {
    if (sup.t != g.time_bins())
        raise(Errc::shape_mismatch, "support was built for a different time length");
    if (rows != g.active_count())
        raise(Errc::shape_mismatch, "distribution rows do not match the active packet count");
    if (cols != sup.size)
        raise(Errc::shape_mismatch, "distribution columns do not match the support size");
}

} // namespace

ShiftDistribution tempered_softmax(const ShiftLogits& logits) {
    if (!(logits.kappa > 0.0)) raise(Errc::invalid_argument, "kappa must be positive");
    if (logits.rows < 0 || logits.cols < 1)
        raise(Errc::invalid_argument, "logits need at least one column");
    ShiftDistribution pi;
    pi.rows = logits.rows;
    pi.cols = logits.cols;
    pi.pi.resize(logits.phi.size());
    for (int r = 0; r < logits.rows; ++r) {
        double m = -1e300;
        for (int c = 0; c < logits.cols; ++c) m = std::max(m, logits.at(r, c) / logits.kappa);
        double sum = 0.0;
        for (int c = 0; c < logits.cols; ++c) {
            double e = std::exp(logits.at(r, c) / logits.kappa - m);
            pi.at(r, c) = e;
            sum += e;
        }
        for (int c = 0; c < logits.cols; ++c) pi.at(r, c) /= sum;
    }
    return pi;
}

RealGrid soft_shift(const EventGrid& g, const ShiftDistribution& pi, const ShiftSupport& sup) {
    check_rows(g, pi.rows, pi.cols, sup);
    RealGrid out(g.time_bins(), g.channels(), g.height(), g.width());
    auto packets = active_set(g);
    for (size_t r = 0; r < packets.size(); ++r) {
        auto [s, j] = packets[r];
        double value = static_cast<double>(g.at(s, j));
        for (int c = 0; c < pi.cols; ++c) {
            int t = sup.target(s, c);
            if (t < 0 || t >= g.time_bins()) continue;
            out.at(t, j) += pi.at(static_cast<int>(r), c) * value;
        }
    }
    return out;
}

RealGrid expected_occupancy(const EventGrid& g, const ShiftDistribution& pi,
                            const ShiftSupport& sup) {
    check_rows(g, pi.rows, pi.cols, sup);
    RealGrid out(g.time_bins(), g.channels(), g.height(), g.width());
    auto packets = active_set(g);
    for (size_t r = 0; r < packets.size(); ++r) {
        auto [s, j] = packets[r];
        for (int c = 0; c < pi.cols; ++c) {
            int t = sup.target(s, c);
            if (t < 0 || t >= g.time_bins()) continue;
            out.at(t, j) += pi.at(static_cast<int>(r), c);
        }
    }
    return out;
}

double capacity_penalty(const EventGrid& g, const ShiftDistribution& pi,
                        const ShiftSupport& sup) {
    long long packets = g.active_count();
    if (packets == 0) raise(Errc::empty_active_set, "capacity penalty needs active packets");
    RealGrid occ = expected_occupancy(g, pi, sup);
    double sum = 0.0;
    for (double x : occ.v) {
        double over = x - 1.0;
        if (over > 0.0) sum += over * over;
    }
    return sum / static_cast<double>(packets);
}

double soft_l1_cost(const EventGrid& g, const ShiftDistribution& pi, const ShiftSupport& sup) {
    if (sup.norm != Norm::l1)
        raise(Errc::wrong_support, "total-shift cost needs an l1 target support");
    check_rows(g, pi.rows, pi.cols, sup);
    auto packets = active_set(g);
    double cost = 0.0;
    for (size_t r = 0; r < packets.size(); ++r) {
        int s = packets[r].s;
        for (int t = 0; t < pi.cols; ++t)
            cost += pi.at(static_cast<int>(r), t) * std::abs(t - s);
    }
    return cost;
}

double soft_l0_cost(const EventGrid& g, const ShiftDistribution& pi, const ShiftSupport& sup) {
    if (sup.norm != Norm::l0)
        raise(Errc::wrong_support, "tamper-count cost needs an l0 target support");
    check_rows(g, pi.rows, pi.cols, sup);
    auto packets = active_set(g);
    double cost = 0.0;
    for (size_t r = 0; r < packets.size(); ++r)
        cost += 1.0 - pi.at(static_cast<int>(r), packets[r].s);
    return cost;
}

double budget_hinge(double cost, int eps, Norm norm) {
    if (norm == Norm::linf || norm == Norm::multi) return 0.0;
    if (eps < 1) raise(Errc::invalid_budget, "budget radius must be at least 1");
    double over = cost / static_cast<double>(eps) - 1.0;
    return over > 0.0 ? over : 0.0;
}

std::vector<double> backward_through_soft(const EventGrid& g, const ShiftDistribution& pi,
                                          const ShiftSupport& sup, const RealGrid& d_soft,
                                          double kappa, double lambda_cap,
                                          double lambda_budget, const BudgetSpec& budget) {
    check_rows(g, pi.rows, pi.cols, sup);
    if (!(kappa > 0.0)) raise(Errc::invalid_argument, "kappa must be positive");
    if (d_soft.t != g.time_bins() || d_soft.n != g.lines())
        raise(Errc::shape_mismatch, "upstream gradient shape does not match the grid");

    auto packets = active_set(g);
    long long n_active = static_cast<long long>(packets.size());
    RealGrid occ = expected_occupancy(g, pi, sup);

    // Hinge slope of the soft budget penalty, 0 when inactive.
    double hinge_slope = 0.0;
    if (lambda_budget != 0.0 && (budget.norm == Norm::l1 || budget.norm == Norm::l0)) {
        double cost = budget.norm == Norm::l1 ? soft_l1_cost(g, pi, sup)
                                              : soft_l0_cost(g, pi, sup);
        int eps = budget.radius();
        if (cost / static_cast<double>(eps) - 1.0 > 0.0)
            hinge_slope = 1.0 / static_cast<double>(eps);
    }

    std::vector<double> d_phi(pi.pi.size(), 0.0);
    std::vector<double> d_pi(pi.cols);
    for (size_t r = 0; r < packets.size(); ++r) {
        auto [s, j] = packets[r];
        double value = static_cast<double>(g.at(s, j));
        for (int c = 0; c < pi.cols; ++c) {
            int t = sup.target(s, c);
            double grad = 0.0;
            if (t >= 0 && t < g.time_bins()) {
                grad += d_soft.at(t, j) * value;
                if (lambda_cap != 0.0) {
                    double over = occ.at(t, j) - 1.0;
                    if (over > 0.0)
                        grad -= lambda_cap * 2.0 * over / static_cast<double>(n_active);
                }
            }
            if (hinge_slope != 0.0) {
                if (budget.norm == Norm::l1)
                    grad -= lambda_budget * hinge_slope * std::abs(c - s);
                else if (c == s)
                    grad -= lambda_budget * hinge_slope * (-1.0);
            }
            d_pi[c] = grad;
        }
        // Softmax Jacobian: d_phi = pi * (d_pi - <pi, d_pi>) / kappa.
        double dot = 0.0;
        for (int c = 0; c < pi.cols; ++c) dot += pi.at(static_cast<int>(r), c) * d_pi[c];
        for (int c = 0; c < pi.cols; ++c)
            d_phi[static_cast<size_t>(r) * pi.cols + c] =
                pi.at(static_cast<int>(r), c) * (d_pi[c] - dot) / kappa;
    }
    return d_phi;
}

void write_distribution(const ShiftDistribution& pi, const BudgetSpec& budget,
                        const std::string& path) {
    budget.validate();
    std::ofstream out(path);
    if (!out) raise(Errc::io, "cannot write distribution file " + path);
    out << "SRP1 " << norm_name(budget.norm) << ' ' << budget.eps_inf << ' ' << budget.eps_l1
        << ' ' << budget.eps_l0 << ' ' << pi.rows << ' ' << pi.cols << '\n';
    char buf[40];
    for (int r = 0; r < pi.rows; ++r) {
        for (int c = 0; c < pi.cols; ++c) {
            if (c) out << ' ';
            std::snprintf(buf, sizeof(buf), "%.17g", pi.at(r, c));
            out << buf;
        }
        out << '\n';
    }
    if (!out) raise(Errc::io, "short write to " + path);
}

std::pair<ShiftDistribution, BudgetSpec> read_distribution(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io, "cannot open distribution file " + path);
    std::string magic, norm_str;
    if (!(in >> magic) || magic != "SRP1")
        raise(Errc::parse, path + ": bad magic, expected SRP1");
    BudgetSpec budget;
    long rows, cols;
    if (!(in >> norm_str >> budget.eps_inf >> budget.eps_l1 >> budget.eps_l0 >> rows >> cols))
        raise(Errc::parse, path + ": malformed SRP1 header");
    try {
        budget.norm = norm_from_string(norm_str);
        budget.validate();
    } catch (const Error& e) {
        raise(Errc::parse, path + ": " + e.what());
    }
    if (rows < 0 || cols < 1) raise(Errc::parse, path + ": bad distribution shape");
    ShiftDistribution pi;
    pi.rows = static_cast<int>(rows);
    pi.cols = static_cast<int>(cols);
    pi.pi.resize(static_cast<size_t>(rows) * cols);
    for (double& x : pi.pi)
        if (!(in >> x)) raise(Errc::parse, path + ": truncated probabilities");
    std::string extra;
    if (in >> extra) raise(Errc::parse, path + ": trailing data '" + extra + "'");
    for (int r = 0; r < pi.rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < pi.cols; ++c) {
            double x = pi.at(r, c);
            if (x < 0.0)
                raise(Errc::parse, path + ": negative probability in row " + std::to_string(r));
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-6)
            raise(Errc::parse, path + ": row " + std::to_string(r) + " does not sum to 1");
    }
    return {pi, budget};
}

} // namespace retimer
