#include "retimer/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "retimer/rng.hpp"

namespace retimer {

double AttackEval::mean_abs_shift() const {
    return moved_total > 0
               ? static_cast<double>(abs_shift_total) / static_cast<double>(moved_total)
               : 0.0;
}

double AttackEval::moved_frac() const {
    return active_total > 0
               ? static_cast<double>(moved_total) / static_cast<double>(active_total)
               : 0.0;
}

namespace {

struct PerSample {
    bool flipped = false;
    long long active = 0;
    long long moved = 0;
    long long abs_shift = 0;
    ShiftHistogram hist;
};

PerSample attack_one(const SnnModel& m, const LabeledSample& sample, const AttackConfig& attack,
                     bool baseline, uint64_t seed) {
    PerSample out;
    out.active = sample.grid.active_count();
    EventGrid adv;
    DisplacementMap dmap;
    if (baseline) {
        if (out.active > 0) {
            ProjectionResult proj = random_retiming_baseline(sample.grid, attack.budget, seed);
            adv = std::move(proj.grid);
            dmap = std::move(proj.dmap);
        } else {
            adv = sample.grid;
        }
        int pred = forward(m, adv).argmax();
        out.flipped = attack.mode == AttackMode::targeted ? pred == attack.target_label
                                                          : pred != sample.label;
    } else {
        AttackResult res = run_attack(m, sample, attack);
        adv = std::move(res.adv);
        dmap = std::move(res.dmap);
        out.flipped = res.success;
    }
    for (const auto& [p, delta] : dmap.entries()) {
        (void)p;
        if (delta == 0) continue;
        ++out.moved;
        out.abs_shift += std::abs(delta);
    }
    out.hist = shift_statistics(dmap, sample.grid);
    return out;
}

void merge_hist(ShiftHistogram& into, const ShiftHistogram& from) {
    for (const auto& [channel, by_shift] : from)
        for (const auto& [shift, count] : by_shift) into[channel][shift] += count;
}

} // namespace

AttackEval evaluate_attack(const SnnModel& m, const std::vector<LabeledSample>& samples,
                           const AttackConfig& attack, const EvalOptions& opts) {
    attack.validate();
    if (samples.empty()) raise(Errc::invalid_argument, "empty sample set");

    auto start = std::chrono::steady_clock::now();
    AttackEval ev;
    ev.n_total = static_cast<int>(samples.size());

    std::vector<size_t> clean_correct;
    for (size_t i = 0; i < samples.size(); ++i)
        if (forward(m, samples[i].grid).argmax() == samples[i].label) clean_correct.push_back(i);
    ev.n_clean_correct = static_cast<int>(clean_correct.size());
    ev.clean_acc = 100.0 * static_cast<double>(clean_correct.size()) /
                   static_cast<double>(samples.size());

    if (!clean_correct.empty()) {
        std::vector<PerSample> results(clean_correct.size());
        int threads = std::max(1, opts.threads);
        auto work = [&](size_t k) {
            size_t i = clean_correct[k];
            results[k] = attack_one(m, samples[i], attack, opts.baseline,
                                    mix_seed(opts.seed, 0xa77ac4ULL + i));
        };
        if (threads == 1 || clean_correct.size() == 1) {
            for (size_t k = 0; k < clean_correct.size(); ++k) work(k);
        } else {
            std::atomic<size_t> next{0};
            std::vector<std::thread> pool;
            for (int w = 0; w < threads; ++w)
                pool.emplace_back([&] {
                    for (size_t k = next.fetch_add(1); k < clean_correct.size();
                         k = next.fetch_add(1))
                        work(k);
                });
            for (auto& th : pool) th.join();
        }
        // Aggregate in sample-index order regardless of completion order.
        for (const PerSample& r : results) {
            ev.n_flipped += r.flipped;
            ev.active_total += r.active;
            ev.moved_total += r.moved;
            ev.abs_shift_total += r.abs_shift;
            merge_hist(ev.hist, r.hist);
        }
        ev.asr = 100.0 * static_cast<double>(ev.n_flipped) /
                 static_cast<double>(clean_correct.size());
        ev.asr_defined = true;
    }
    if (opts.measure_wall)
        ev.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                         std::chrono::steady_clock::now() - start)
                         .count();
    return ev;
}

MetricsRecord to_record(const AttackEval& ev, const std::string& run_id, Norm norm, int radius) {
    MetricsRecord rec;
    rec.run_id = run_id;
    rec.norm = norm;
    rec.radius = radius;
    rec.clean_acc = ev.clean_acc;
    rec.asr = ev.asr;
    rec.mean_abs_shift = ev.mean_abs_shift();
    rec.moved_frac = ev.moved_frac();
    rec.wall_ms = ev.wall_ms;
    return rec;
}

std::vector<MetricsRecord> budget_sweep(const SnnModel& m,
                                        const std::vector<LabeledSample>& samples, Norm norm,
                                        const std::vector<int>& radii,
                                        const AttackConfig& base, const EvalOptions& opts,
                                        const std::string& run_prefix,
                                        std::vector<ShiftHistogram>* hists) {
    if (norm == Norm::multi)
        raise(Errc::invalid_argument, "sweeps cover one norm at a time");
    if (radii.empty()) raise(Errc::invalid_argument, "sweep needs at least one radius");
    for (size_t i = 0; i < radii.size(); ++i) {
        if (radii[i] < 0) raise(Errc::invalid_argument, "sweep radii cannot be negative");
        if (i > 0 && radii[i] < radii[i - 1])
            raise(Errc::invalid_argument, "sweep radii must be ascending");
    }

    std::vector<MetricsRecord> records;
    for (int radius : radii) {
        std::string run_id = run_prefix + "_" + norm_name(norm) + "_" + std::to_string(radius);
        if (radius == 0) {
            // Clean point: no attack is possible inside a zero budget.
            long long correct = 0;
            for (const auto& sample : samples)
                correct += forward(m, sample.grid).argmax() == sample.label;
            MetricsRecord rec;
            rec.run_id = run_id;
            rec.norm = norm;
            rec.radius = 0;
            rec.clean_acc = 100.0 * static_cast<double>(correct) /
                            static_cast<double>(samples.size());
            records.push_back(rec);
            if (hists) hists->push_back({});
            continue;
        }
        AttackConfig cfg = base;
        cfg.budget.norm = norm;
        switch (norm) {
        case Norm::linf: cfg.budget.eps_inf = radius; break;
        case Norm::l1: cfg.budget.eps_l1 = radius; break;
        case Norm::l0: cfg.budget.eps_l0 = radius; break;
        case Norm::multi: break;
        }
        EvalOptions radius_opts = opts;
        // Seed by radius value so duplicate radii repeat identically.
        radius_opts.seed = mix_seed(mix_seed(opts.seed, static_cast<uint64_t>(norm)),
                                    static_cast<uint64_t>(radius));
        AttackEval ev = evaluate_attack(m, samples, cfg, radius_opts);
        records.push_back(to_record(ev, run_id, norm, radius));
        if (hists) hists->push_back(ev.hist);
    }
    return records;
}

namespace {

const char* kMetricsComment =
    "# asr is measured over clean-correct samples; accuracy under attack over all samples"
    " equals clean_acc*(1-asr/100); radius 0 is the clean point";
const char* kMetricsHeader = "run_id,norm,radius,clean_acc,asr,mean_abs_shift,moved_frac,wall_ms";

std::string fmt2(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.2f", x);
    return buf;
}

std::string fmt4(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", x);
    return buf;
}

std::vector<std::string> split_comma(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

} // namespace

void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(Errc::io, "cannot write metrics file " + path);
    out << kMetricsComment << '\n' << kMetricsHeader << '\n';
    for (const auto& r : records) {
        out << r.run_id << ',' << norm_name(r.norm) << ',' << r.radius << ','
            << fmt2(r.clean_acc) << ',' << fmt2(r.asr) << ',' << fmt4(r.mean_abs_shift) << ','
            << fmt4(r.moved_frac) << ',' << r.wall_ms << '\n';
    }
    if (!out) raise(Errc::io, "short write to " + path);
}

std::vector<MetricsRecord> read_metrics_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io, "cannot open metrics file " + path);
    std::string line;
    bool saw_header = false;
    std::vector<MetricsRecord> records;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!saw_header) {
            if (line != kMetricsHeader)
                raise(Errc::parse, path + ": unexpected metrics header");
            saw_header = true;
            continue;
        }
        auto cols = split_comma(line);
        if (cols.size() != 8)
            raise(Errc::parse, path + ":" + std::to_string(lineno) + ": expected 8 columns");
        MetricsRecord r;
        r.run_id = cols[0];
        try {
            r.norm = norm_from_string(cols[1]);
            r.radius = std::stoi(cols[2]);
            r.clean_acc = std::stod(cols[3]);
            r.asr = std::stod(cols[4]);
            r.mean_abs_shift = std::stod(cols[5]);
            r.moved_frac = std::stod(cols[6]);
            r.wall_ms = std::stoll(cols[7]);
        } catch (const std::exception&) {
            raise(Errc::parse, path + ":" + std::to_string(lineno) + ": malformed field");
        }
        records.push_back(std::move(r));
    }
    if (!saw_header) raise(Errc::parse, path + ": missing metrics header");
    return records;
}

void write_shift_hist_csv(const ShiftHistogram& hist, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(Errc::io, "cannot write histogram file " + path);
    out << "channel,shift,count\n";
    for (const auto& [channel, by_shift] : hist)
        for (const auto& [shift, count] : by_shift)
            out << channel << ',' << shift << ',' << count << '\n';
    if (!out) raise(Errc::io, "short write to " + path);
}

ShiftHistogram read_shift_hist_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(Errc::io, "cannot open histogram file " + path);
    std::string line;
    if (!std::getline(in, line) || split_comma(line) != std::vector<std::string>{"channel", "shift", "count"})
        raise(Errc::parse, path + ": expected header channel,shift,count");
    ShiftHistogram hist;
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cols = split_comma(line);
        if (cols.size() != 3)
            raise(Errc::parse, path + ":" + std::to_string(lineno) + ": expected 3 columns");
        try {
            hist[std::stoi(cols[0])][std::stoi(cols[1])] += std::stoll(cols[2]);
        } catch (const std::exception&) {
            raise(Errc::parse, path + ":" + std::to_string(lineno) + ": malformed number");
        }
    }
    return hist;
}

void report(const std::vector<MetricsRecord>& records,
            const std::vector<ShiftHistogram>& hists, const std::string& dir,
            const std::string& metrics_name) {
    if (!hists.empty() && hists.size() != records.size())
        raise(Errc::invalid_argument, "histogram list does not match the record list");
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(Errc::io, "cannot create output directory " + dir);
    write_metrics_csv(records, (fs::path(dir) / metrics_name).string());
    for (size_t i = 0; i < hists.size(); ++i) {
        if (hists[i].empty()) continue;
        std::string name = records[i].run_id;
        for (char& ch : name)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-')
                ch = '_';
        write_shift_hist_csv(hists[i], (fs::path(dir) / (name + "_shift_hist.csv")).string());
    }
}

} // namespace retimer
