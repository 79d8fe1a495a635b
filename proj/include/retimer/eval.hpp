#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "retimer/attack.hpp"
#include "retimer/config.hpp"
#include "retimer/defense.hpp"

namespace retimer {

struct MetricsRecord {
    std::string run_id;
    Norm norm = Norm::linf;
    int radius = 0;
    double clean_acc = 0.0;      // percent over all samples
    double asr = 0.0;            // percent over the clean-correct set
    double mean_abs_shift = 0.0; // over moved packets
    double moved_frac = 0.0;     // moved / active packets over attacked samples
    long long wall_ms = 0;
};

struct EvalOptions {
    uint64_t seed = 1;
    int threads = 1;
    bool baseline = false;     // random retiming instead of the gradient attack
    bool measure_wall = false; // off by default so outputs stay byte-identical
};

struct AttackEval {
    int n_total = 0;
    int n_clean_correct = 0;
    int n_flipped = 0;
    double clean_acc = 0.0;
    double asr = 0.0;
    bool asr_defined = false;
    long long active_total = 0;
    long long moved_total = 0;
    long long abs_shift_total = 0;
    ShiftHistogram hist;
    long long wall_ms = 0;

    double mean_abs_shift() const;
    double moved_frac() const;
};

// Attack success rate protocol: attacks run only on samples the model
// already classifies correctly; an empty clean-correct set leaves the rate
// undefined (flagged, never thrown). Samples are attacked independently
// with per-index seeds and aggregated by index, so the thread count does
// not change any result.
AttackEval evaluate_attack(const SnnModel& m, const std::vector<LabeledSample>& samples,
                           const AttackConfig& attack, const EvalOptions& opts);

MetricsRecord to_record(const AttackEval& ev, const std::string& run_id, Norm norm, int radius);

// Accuracy-under-attack sweep over ascending radii of one norm. Radius 0
// is the clean point: no attack, asr 0. Records are seeded by radius
// value, so duplicate radii repeat identically.
std::vector<MetricsRecord> budget_sweep(const SnnModel& m,
                                        const std::vector<LabeledSample>& samples, Norm norm,
                                        const std::vector<int>& radii,
                                        const AttackConfig& base, const EvalOptions& opts,
                                        const std::string& run_prefix,
                                        std::vector<ShiftHistogram>* hists = nullptr);

// Metrics CSV: one comment line documenting the protocol, then the fixed
// header run_id,norm,radius,clean_acc,asr,mean_abs_shift,moved_frac,wall_ms.
void write_metrics_csv(const std::vector<MetricsRecord>& records, const std::string& path);
std::vector<MetricsRecord> read_metrics_csv(const std::string& path);

// Shift histogram CSV: header channel,shift,count, rows sorted by
// (channel, shift).
void write_shift_hist_csv(const ShiftHistogram& hist, const std::string& path);
ShiftHistogram read_shift_hist_csv(const std::string& path);

// Writes the metrics CSV plus one <run_id>_shift_hist.csv per record with a
// surviving histogram.
void report(const std::vector<MetricsRecord>& records,
            const std::vector<ShiftHistogram>& hists, const std::string& dir,
            const std::string& metrics_name = "metrics.csv");

AttackConfig attack_config_from(const Config& cfg);
BudgetSpec budget_from(const Config& cfg);
FilterConfig filter_from(const Config& cfg);

// CLI commands. Validation problems throw invalid_argument/invalid_spec/
// invalid_budget/parse errors; the binary maps those to exit code 1 and
// everything else to 2.
void cmd_gen_data(const Config& cfg);
void cmd_train(const Config& cfg);
void cmd_attack(const Config& cfg);
void cmd_at_train(const Config& cfg);
void cmd_defend_eval(const Config& cfg);
void cmd_project(const Config& cfg);
void cmd_sweep(const Config& cfg);
void cmd_report(const Config& cfg);

} // namespace retimer
