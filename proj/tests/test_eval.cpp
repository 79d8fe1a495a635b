#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "retimer/eval.hpp"

using namespace retimer;
using rt_test::scratch_dir;
using rt_test::thrown_code;

namespace {

struct Toy {
    SnnModel model;
    std::vector<LabeledSample> test_set;
};

const Toy& toy() {
    static Toy t = [] {
        SynthSpec spec;
        spec.classes = 2;
        spec.samples_per_class = 8;
        spec.t = 8;
        spec.c = 1;
        spec.h = 2;
        spec.w = 2;
        spec.spikes_per_line = 2;
        std::vector<LabeledSample> train_set = synth_dataset(spec, 400);
        SnnModel m = SnnModel::make({4, 16, 2}, LifParams{}, 41);
        TrainConfig tc;
        tc.epochs = 15;
        tc.lr = 5e-3;
        tc.seed = 4;
        train(m, train_set, {}, tc);
        spec.samples_per_class = 6;
        return Toy{std::move(m), synth_dataset(spec, 401)};
    }();
    return t;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool same_record(const MetricsRecord& a, const MetricsRecord& b) {
    return a.run_id == b.run_id && a.norm == b.norm && a.radius == b.radius &&
           a.clean_acc == b.clean_acc && a.asr == b.asr &&
           a.mean_abs_shift == b.mean_abs_shift && a.moved_frac == b.moved_frac &&
           a.wall_ms == b.wall_ms;
}

bool same_eval(const AttackEval& a, const AttackEval& b) {
    return a.n_total == b.n_total && a.n_clean_correct == b.n_clean_correct &&
           a.n_flipped == b.n_flipped && a.clean_acc == b.clean_acc && a.asr == b.asr &&
           a.asr_defined == b.asr_defined && a.active_total == b.active_total &&
           a.moved_total == b.moved_total && a.abs_shift_total == b.abs_shift_total &&
           a.hist == b.hist && a.wall_ms == b.wall_ms;
}

} // namespace

TEST_CASE("summary ratios guard against empty denominators") {
    AttackEval ev;
    ev.moved_total = 5;
    ev.abs_shift_total = 12;
    ev.active_total = 20;
    CHECK_EQ(ev.mean_abs_shift(), doctest::Approx(2.4));
    CHECK_EQ(ev.moved_frac(), doctest::Approx(0.25));

    AttackEval idle;
    CHECK_EQ(idle.mean_abs_shift(), 0.0);
    CHECK_EQ(idle.moved_frac(), 0.0);

    ev.clean_acc = 87.5;
    ev.asr = 40.0;
    ev.wall_ms = 7;
    MetricsRecord rec = to_record(ev, "run_x", Norm::l1, 6);
    CHECK_EQ(rec.run_id, "run_x");
    CHECK_EQ(rec.norm, Norm::l1);
    CHECK_EQ(rec.radius, 6);
    CHECK_EQ(rec.clean_acc, 87.5);
    CHECK_EQ(rec.asr, 40.0);
    CHECK_EQ(rec.mean_abs_shift, doctest::Approx(2.4));
    CHECK_EQ(rec.moved_frac, doctest::Approx(0.25));
    CHECK_EQ(rec.wall_ms, 7);
}

TEST_CASE("evaluate_attack matches plain accuracy and is deterministic") {
    const Toy& t = toy();
    AttackConfig attack;
    attack.budget = BudgetSpec::make_linf(1);

    EvalOptions opts;
    opts.seed = 11;
    AttackEval ev = evaluate_attack(t.model, t.test_set, attack, opts);
    CHECK_EQ(ev.n_total, static_cast<int>(t.test_set.size()));
    CHECK_EQ(ev.clean_acc, doctest::Approx(accuracy(t.model, t.test_set)));
    CHECK_EQ(ev.n_clean_correct,
             static_cast<int>(ev.clean_acc / 100.0 * ev.n_total + 0.5));
    CHECK(ev.asr_defined);
    CHECK_EQ(ev.asr, doctest::Approx(100.0 * ev.n_flipped / ev.n_clean_correct));
    CHECK_EQ(ev.wall_ms, 0); // timing off by default, outputs must stay reproducible
    CHECK_GE(ev.n_flipped, 0);
    CHECK_LE(ev.n_flipped, ev.n_clean_correct);
    CHECK_GT(ev.active_total, 0);
    long long hist_total = 0;
    for (const auto& [channel, by_shift] : ev.hist) {
        (void)channel;
        for (const auto& [shift, count] : by_shift) {
            CHECK_NE(shift, 0);
            hist_total += count;
        }
    }
    CHECK_EQ(hist_total, ev.moved_total);

    CHECK(same_eval(ev, evaluate_attack(t.model, t.test_set, attack, opts)));

    EvalOptions two = opts;
    two.threads = 2;
    CHECK(same_eval(ev, evaluate_attack(t.model, t.test_set, attack, two)));

    EvalOptions other = opts;
    other.seed = 12;
    AttackEval ev2 = evaluate_attack(t.model, t.test_set, attack, other);
    CHECK_EQ(ev2.clean_acc, ev.clean_acc); // the clean pass never depends on the seed

    CHECK_EQ(thrown_code([&] { evaluate_attack(t.model, {}, attack, opts); }),
             Errc::invalid_argument);
}

TEST_CASE("baseline mode swaps in random retiming") {
    const Toy& t = toy();
    AttackConfig attack;
    attack.budget = BudgetSpec::make_l1(6);

    EvalOptions opts;
    opts.seed = 3;
    opts.baseline = true;
    AttackEval base = evaluate_attack(t.model, t.test_set, attack, opts);
    CHECK(base.asr_defined);
    CHECK(same_eval(base, evaluate_attack(t.model, t.test_set, attack, opts)));

    opts.baseline = false;
    AttackEval grad = evaluate_attack(t.model, t.test_set, attack, opts);
    CHECK_FALSE(same_eval(base, grad));
}

TEST_CASE("a model that is never right leaves the flip rate undefined") {
    SnnModel m = SnnModel::make({4, 2}, LifParams{}, 1);
    for (double& w : m.layers()[0].w) w = 0.0;
    m.layers()[0].b = {0.0, 1.0};

    SynthSpec spec;
    spec.classes = 2;
    spec.samples_per_class = 3;
    spec.t = 6;
    spec.c = 1;
    spec.h = 2;
    spec.w = 2;
    spec.spikes_per_line = 2;
    std::vector<LabeledSample> samples = synth_dataset(spec, 7);
    for (auto& s : samples) s.label = 0; // predicted class is always 1

    AttackConfig attack;
    attack.budget = BudgetSpec::make_linf(1);
    AttackEval ev = evaluate_attack(m, samples, attack, {});
    CHECK_EQ(ev.clean_acc, 0.0);
    CHECK_EQ(ev.n_clean_correct, 0);
    CHECK_FALSE(ev.asr_defined);
    CHECK_EQ(ev.asr, 0.0);
    CHECK_EQ(ev.moved_total, 0);
    CHECK(ev.hist.empty());
}

TEST_CASE("budget sweep anchors radius zero at the clean point") {
    const Toy& t = toy();
    AttackConfig base;
    base.budget = BudgetSpec::make_linf(1);
    EvalOptions opts;
    opts.seed = 5;

    std::vector<ShiftHistogram> hists;
    auto records = budget_sweep(t.model, t.test_set, Norm::l1, {0, 2, 4}, base, opts,
                                "sweep", &hists);
    REQUIRE_EQ(records.size(), 3);
    REQUIRE_EQ(hists.size(), 3);
    CHECK_EQ(records[0].run_id, "sweep_l1_0");
    CHECK_EQ(records[0].radius, 0);
    CHECK_EQ(records[0].asr, 0.0);
    CHECK_EQ(records[0].mean_abs_shift, 0.0);
    CHECK_EQ(records[0].moved_frac, 0.0);
    CHECK_EQ(records[0].clean_acc, doctest::Approx(accuracy(t.model, t.test_set)));
    CHECK(hists[0].empty());
    CHECK_EQ(records[1].run_id, "sweep_l1_2");
    CHECK_EQ(records[1].norm, Norm::l1);
    CHECK_EQ(records[2].run_id, "sweep_l1_4");
    for (const auto& rec : records) CHECK_EQ(rec.clean_acc, records[0].clean_acc);

    // Each radius is seeded by its value, so repeats of a radius repeat exactly.
    auto twice = budget_sweep(t.model, t.test_set, Norm::l1, {2, 2}, base, opts, "sweep");
    REQUIRE_EQ(twice.size(), 2);
    CHECK_EQ(twice[0].asr, records[1].asr);
    CHECK_EQ(twice[0].mean_abs_shift, records[1].mean_abs_shift);
    CHECK_EQ(twice[0].moved_frac, records[1].moved_frac);
    CHECK(same_record(twice[0], twice[1]));

    auto bad = [&](Norm norm, std::vector<int> radii) {
        return thrown_code(
            [&] { budget_sweep(t.model, t.test_set, norm, radii, base, opts, "x"); });
    };
    CHECK_EQ(bad(Norm::multi, {1}), Errc::invalid_argument);
    CHECK_EQ(bad(Norm::l1, {}), Errc::invalid_argument);
    CHECK_EQ(bad(Norm::l1, {2, 1}), Errc::invalid_argument);
    CHECK_EQ(bad(Norm::l1, {-1, 0}), Errc::invalid_argument);
}

TEST_CASE("metrics files round trip byte for byte") {
    std::string dir = scratch_dir("eval_metrics");
    std::string path = dir + "/metrics.csv";

    MetricsRecord a;
    a.run_id = "run_a";
    a.norm = Norm::l1;
    a.radius = 3;
    a.clean_acc = 92.5;
    a.asr = 37.5;
    a.mean_abs_shift = 1.23456;
    a.moved_frac = 1.0 / 24.0;
    MetricsRecord b;
    b.run_id = "run_b";
    b.norm = Norm::linf;
    b.radius = 1;
    b.clean_acc = 100.0;
    b.wall_ms = 42;

    write_metrics_csv({a, b}, path);
    std::string text = slurp(path);
    CHECK_EQ(text[0], '#');
    CHECK_NE(text.find("run_id,norm,radius,clean_acc,asr,mean_abs_shift,moved_frac,wall_ms\n"),
             std::string::npos);
    CHECK_NE(text.find("run_a,l1,3,92.50,37.50,1.2346,0.0417,0\n"), std::string::npos);
    CHECK_NE(text.find("run_b,linf,1,100.00,0.00,0.0000,0.0000,42\n"), std::string::npos);

    auto records = read_metrics_csv(path);
    REQUIRE_EQ(records.size(), 2);
    CHECK_EQ(records[0].run_id, "run_a");
    CHECK_EQ(records[0].norm, Norm::l1);
    CHECK_EQ(records[0].radius, 3);
    CHECK_EQ(records[1].wall_ms, 42);

    std::string again = dir + "/metrics2.csv";
    write_metrics_csv(records, again);
    CHECK_EQ(slurp(again), text);

    auto write_raw = [&](const std::string& body) {
        std::ofstream out(path);
        out << body;
    };
    write_raw("run_id,norm,radius\nrun_a,l1,3\n");
    CHECK_EQ(thrown_code([&] { read_metrics_csv(path); }), Errc::parse);
    write_raw("run_id,norm,radius,clean_acc,asr,mean_abs_shift,moved_frac,wall_ms\n"
              "run_a,l1,3,92.50,37.50,1.2346\n");
    CHECK_EQ(thrown_code([&] { read_metrics_csv(path); }), Errc::parse);
    write_raw("run_id,norm,radius,clean_acc,asr,mean_abs_shift,moved_frac,wall_ms\n"
              "run_a,l1,x,92.50,37.50,1.2346,0.0417,0\n");
    CHECK_EQ(thrown_code([&] { read_metrics_csv(path); }), Errc::parse);
    write_raw("run_id,norm,radius,clean_acc,asr,mean_abs_shift,moved_frac,wall_ms\n"
              "run_a,l7,3,92.50,37.50,1.2346,0.0417,0\n");
    CHECK_EQ(thrown_code([&] { read_metrics_csv(path); }), Errc::parse);
    write_raw("# only a comment\n");
    CHECK_EQ(thrown_code([&] { read_metrics_csv(path); }), Errc::parse);
    CHECK_EQ(thrown_code([&] { read_metrics_csv(dir + "/absent.csv"); }), Errc::io);
}

TEST_CASE("shift histograms round trip with negative shifts") {
    std::string dir = scratch_dir("eval_hist");
    std::string path = dir + "/hist.csv";

    ShiftHistogram hist;
    hist[0][-2] = 3;
    hist[0][1] = 1;
    hist[2][4] = 7;
    write_shift_hist_csv(hist, path);
    CHECK_EQ(slurp(path), "channel,shift,count\n0,-2,3\n0,1,1\n2,4,7\n");
    CHECK(read_shift_hist_csv(path) == hist);

    auto write_raw = [&](const std::string& body) {
        std::ofstream out(path);
        out << body;
    };
    write_raw("channel,count\n");
    CHECK_EQ(thrown_code([&] { read_shift_hist_csv(path); }), Errc::parse);
    write_raw("channel,shift,count\n0,-2\n");
    CHECK_EQ(thrown_code([&] { read_shift_hist_csv(path); }), Errc::parse);
    write_raw("channel,shift,count\n0,minus,3\n");
    CHECK_EQ(thrown_code([&] { read_shift_hist_csv(path); }), Errc::parse);
    CHECK_EQ(thrown_code([&] { read_shift_hist_csv(dir + "/absent.csv"); }), Errc::io);
}

TEST_CASE("report writes the metrics table plus surviving histograms") {
    std::string dir = scratch_dir("eval_report");

    MetricsRecord a;
    a.run_id = "run/odd name";
    a.norm = Norm::l0;
    a.radius = 2;
    MetricsRecord b;
    b.run_id = "clean";
    ShiftHistogram moved;
    moved[1][-1] = 2;

    report({a, b}, {moved, {}}, dir + "/out");
    auto records = read_metrics_csv(dir + "/out/metrics.csv");
    REQUIRE_EQ(records.size(), 2);
    CHECK_EQ(records[0].run_id, "run/odd name");
    CHECK(read_shift_hist_csv(dir + "/out/run_odd_name_shift_hist.csv") == moved);
    CHECK_EQ(thrown_code([&] { read_shift_hist_csv(dir + "/out/clean_shift_hist.csv"); }),
             Errc::io);

    CHECK_EQ(thrown_code([&] { report({a, b}, {moved}, dir + "/out2"); }),
             Errc::invalid_argument);
    report({a, b}, {}, dir + "/out3", "named.csv"); // no histogram list at all is fine
    CHECK_EQ(read_metrics_csv(dir + "/out3/named.csv").size(), 2);
}

TEST_CASE("config factories assemble attack, budget, and filter structs") {
    Config cfg;
    CHECK_EQ(budget_from(cfg).norm, Norm::linf);
    CHECK_EQ(budget_from(cfg).eps_inf, 1);

    cfg.set("budget.norm", "l1");
    cfg.set("budget.eps", "3");
    BudgetSpec b = budget_from(cfg);
    CHECK_EQ(b.norm, Norm::l1);
    CHECK_EQ(b.eps_l1, 3);

    cfg.set("budget.norm", "multi");
    cfg.set("budget.eps_inf", "2");
    cfg.set("budget.eps_l1", "5");
    cfg.set("budget.eps_l0", "4");
    BudgetSpec mb = budget_from(cfg);
    CHECK_EQ(mb.norm, Norm::multi);
    CHECK_EQ(mb.eps_inf, 2);
    CHECK_EQ(mb.eps_l1, 5);
    CHECK_EQ(mb.eps_l0, 4);

    cfg.set("budget.norm", "sup");
    CHECK_EQ(thrown_code([&] { budget_from(cfg); }), Errc::invalid_argument);
    cfg.set("budget.norm", "linf");

    AttackConfig a = attack_config_from(cfg);
    CHECK_EQ(a.mode, AttackMode::untargeted);
    CHECK_EQ(a.kappa, 1.0);
    CHECK_EQ(a.resolved_iters(), 20);

    cfg.set("attack.kappa", "0.7");
    cfg.set("attack.iters", "9");
    cfg.set("attack.targeted", "1");
    cfg.set("attack.ablation", "no_pil,no_cap");
    a = attack_config_from(cfg);
    CHECK_EQ(a.kappa, 0.7);
    CHECK_EQ(a.resolved_iters(), 9);
    CHECK_EQ(a.mode, AttackMode::targeted);
    CHECK_EQ(a.target_label, 1);
    CHECK(a.ablation.no_pil);
    CHECK(a.ablation.no_cap);
    CHECK_FALSE(a.ablation.no_budget_penalty);

    cfg.set("attack.ablation", "no_grad");
    CHECK_EQ(thrown_code([&] { attack_config_from(cfg); }), Errc::invalid_argument);
    cfg.set("attack.ablation", "");

    FilterConfig f = filter_from(cfg);
    CHECK_EQ(f.kind, FilterConfig::Kind::none);
    cfg.set("defense.kind", "spatial");
    cfg.set("defense.p", "0.5");
    f = filter_from(cfg);
    CHECK_EQ(f.kind, FilterConfig::Kind::spatial);
    CHECK_EQ(f.p, 0.5);
    cfg.set("defense.kind", "blur");
    CHECK_EQ(thrown_code([&] { filter_from(cfg); }), Errc::invalid_argument);
    cfg.set("defense.kind", "refractory");
    cfg.set("defense.p", "2.0");
    CHECK_EQ(thrown_code([&] { filter_from(cfg); }), Errc::invalid_spec);
}
