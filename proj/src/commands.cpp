#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "retimer/eval.hpp"
#include "retimer/rng.hpp"

namespace retimer {

namespace fs = std::filesystem;

BudgetSpec budget_from(const Config& cfg) {
    Norm norm = norm_from_string(cfg.get_string("budget.norm", "linf"));
    if (norm == Norm::multi)
        return BudgetSpec::make_multi(cfg.get_int("budget.eps_inf", 1),
                                      cfg.get_int("budget.eps_l1", 1),
                                      cfg.get_int("budget.eps_l0", 1));
    int eps = cfg.get_int("budget.eps", 1);
    switch (norm) {
    case Norm::linf: return BudgetSpec::make_linf(eps);
    case Norm::l1: return BudgetSpec::make_l1(eps);
    default: return BudgetSpec::make_l0(eps);
    }
}

AttackConfig attack_config_from(const Config& cfg) {
    AttackConfig a;
    a.budget = budget_from(cfg);
    a.kappa = cfg.get_double("attack.kappa", 1.0);
    a.alpha = cfg.get_double("attack.alpha", 1.0);
    a.phi_max = cfg.get_double("attack.phi_max", 10.0);
    a.iters = cfg.get_int("attack.iters", 0);
    a.lambda_cap = cfg.get_double("attack.lambda_cap", 20.0);
    a.lambda_budget = cfg.get_double("attack.lambda_budget", 10.0);
    int target = cfg.get_int("attack.targeted", -1);
    if (target >= 0) {
        a.mode = AttackMode::targeted;
        a.target_label = target;
    }
    std::string ablation = cfg.get_string("attack.ablation", "");
    std::stringstream ss(ablation);
    std::string flag;
    while (std::getline(ss, flag, ',')) {
        if (flag.empty()) continue;
        if (flag == "no_pil")
            a.ablation.no_pil = true;
        else if (flag == "no_cap")
            a.ablation.no_cap = true;
        else if (flag == "no_budget_penalty")
            a.ablation.no_budget_penalty = true;
        else
            raise(Errc::invalid_argument, "unknown ablation flag '" + flag + "'");
    }
    a.validate();
    return a;
}

FilterConfig filter_from(const Config& cfg) {
    FilterConfig f;
    std::string kind = cfg.get_string("defense.kind", "none");
    if (kind == "none")
        f.kind = FilterConfig::Kind::none;
    else if (kind == "refractory")
        f.kind = FilterConfig::Kind::refractory;
    else if (kind == "temporal")
        f.kind = FilterConfig::Kind::temporal;
    else if (kind == "spatial")
        f.kind = FilterConfig::Kind::spatial;
    else
        raise(Errc::invalid_argument, "unknown defense kind '" + kind + "'");
    f.p = cfg.get_double("defense.p", 0.0);
    f.rp_bins = cfg.get_int("defense.rp_bins", 2);
    f.validate();
    return f;
}

namespace {

SynthSpec synth_spec_from(const Config& cfg, int samples_per_class) {
    SynthSpec spec;
    spec.classes = cfg.get_int("data.classes", 2);
    spec.samples_per_class = samples_per_class;
    spec.t = cfg.get_int("data.t", 8);
    spec.c = cfg.get_int("data.c", 2);
    spec.h = cfg.get_int("data.h", 4);
    spec.w = cfg.get_int("data.w", 4);
    spec.spikes_per_line = cfg.get_int("data.spikes_per_line", 2);
    std::string kind = cfg.get_string("data.kind", "binary");
    if (kind == "binary")
        spec.kind = GridKind::binary;
    else if (kind == "integer")
        spec.kind = GridKind::integer;
    else
        raise(Errc::invalid_argument, "unknown data kind '" + kind + "'");
    return spec;
}

EvalOptions eval_options_from(const Config& cfg) {
    EvalOptions opts;
    opts.seed = cfg.get_seed();
    opts.threads = cfg.get_int("threads", 1);
    if (opts.threads < 1) raise(Errc::invalid_argument, "threads must be at least 1");
    opts.baseline = cfg.get_bool("attack.baseline", false);
    opts.measure_wall = cfg.get_bool("report.measure_wall", false);
    return opts;
}

std::string out_dir_from(const Config& cfg) {
    std::string dir = cfg.get_string("out_dir", "out");
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) raise(Errc::io, "cannot create output directory " + dir);
    return dir;
}

std::vector<LabeledSample> load_split(const Config& cfg, const char* split) {
    std::string dir = cfg.require_string("data.dir");
    return load_dataset((fs::path(dir) / split).string());
}

int class_count(const std::vector<LabeledSample>& samples) {
    int k = 0;
    for (const auto& s : samples) k = std::max(k, s.label + 1);
    return k;
}

std::vector<int> model_dims(const Config& cfg, const std::vector<LabeledSample>& train_set) {
    std::vector<int> dims{train_set.front().grid.lines()};
    for (int h : cfg.has("model.hidden") ? cfg.get_int_list("model.hidden")
                                         : std::vector<int>{64}) {
        if (h < 1) raise(Errc::invalid_argument, "hidden sizes must be positive");
        dims.push_back(h);
    }
    dims.push_back(class_count(train_set));
    return dims;
}

LifParams lif_from(const Config& cfg) {
    LifParams p;
    p.tau = cfg.get_double("model.tau", 0.5);
    p.v_th = cfg.get_double("model.v_th", 1.0);
    p.surrogate_width = cfg.get_double("model.surrogate_width", 1.0);
    p.validate();
    return p;
}

void write_history_csv(const TrainReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) raise(Errc::io, "cannot write history file " + path);
    out << "epoch,train_acc,test_acc\n";
    char buf[64];
    for (size_t e = 0; e < report.train_acc.size(); ++e) {
        double test = e < report.test_acc.size() ? report.test_acc[e] : 0.0;
        std::snprintf(buf, sizeof(buf), "%zu,%.2f,%.2f\n", e + 1, report.train_acc[e], test);
        out << buf;
    }
    if (!out) raise(Errc::io, "short write to " + path);
}

} // namespace

void cmd_gen_data(const Config& cfg) {
    std::string dir = cfg.require_string("data.dir");
    uint64_t seed = cfg.get_seed();
    SynthSpec train_spec = synth_spec_from(cfg, cfg.get_int("data.train_per_class", 100));
    SynthSpec test_spec = synth_spec_from(cfg, cfg.get_int("data.test_per_class", 50));
    write_dataset(synth_dataset(train_spec, mix_seed(seed, 0x7472ULL)),
                  (fs::path(dir) / "train").string());
    write_dataset(synth_dataset(test_spec, mix_seed(seed, 0x7465ULL)),
                  (fs::path(dir) / "test").string());
    std::cout << "wrote " << train_spec.classes * train_spec.samples_per_class << " train and "
              << test_spec.classes * test_spec.samples_per_class << " test samples to " << dir
              << "\n";
}

void cmd_train(const Config& cfg) {
    auto train_set = load_split(cfg, "train");
    auto test_set = load_split(cfg, "test");
    if (train_set.empty()) raise(Errc::invalid_argument, "training split is empty");
    std::string model_path = cfg.require_string("model.path");

    SnnModel m = SnnModel::make(model_dims(cfg, train_set), lif_from(cfg),
                                mix_seed(cfg.get_seed(), 0x6d6f64ULL));
    TrainConfig tc;
    tc.epochs = cfg.get_int("train.epochs", 30);
    tc.lr = cfg.get_double("train.lr", 1e-3);
    tc.seed = cfg.get_seed();
    TrainReport report = train(m, train_set, test_set, tc);
    save_model(m, model_path);
    write_history_csv(report, (fs::path(out_dir_from(cfg)) / "train_history.csv").string());
    std::cout << "final train_acc=" << report.train_acc.back()
              << " test_acc=" << (report.test_acc.empty() ? 0.0 : report.test_acc.back())
              << "\n";
}

void cmd_attack(const Config& cfg) {
    SnnModel m = load_model(cfg.require_string("model.path"));
    AttackConfig attack = attack_config_from(cfg);

    if (cfg.has("attack.input")) {
        LabeledSample sample{read_grid(cfg.require_string("attack.input")),
                             cfg.get_int("attack.label", -1)};
        if (sample.label < 0)
            raise(Errc::invalid_argument, "attack.label is required with attack.input");
        AttackResult res = run_attack(m, sample, attack);
        if (cfg.has("attack.out")) write_grid(res.adv, cfg.require_string("attack.out"));
        if (cfg.has("attack.dump_pi"))
            write_distribution(res.final_pi, attack.budget, cfg.require_string("attack.dump_pi"));
        std::cout << "success=" << (res.success ? 1 : 0) << " moved=" << res.moved_count
                  << " pred=" << forward(m, res.adv).argmax() << "\n";
        return;
    }

    auto test_set = load_split(cfg, "test");
    EvalOptions opts = eval_options_from(cfg);
    AttackEval ev = evaluate_attack(m, test_set, attack, opts);
    std::string prefix = cfg.get_string("sweep.run_prefix", "attack");
    int radius = attack.budget.norm == Norm::multi ? attack.budget.eps_inf
                                                   : attack.budget.radius();
    MetricsRecord rec = to_record(ev, prefix + "_" + norm_name(attack.budget.norm) + "_" +
                                          std::to_string(radius),
                                  attack.budget.norm, radius);
    report({rec}, {ev.hist}, out_dir_from(cfg));
    std::cout << "clean_acc=" << ev.clean_acc << " asr="
              << (ev.asr_defined ? std::to_string(ev.asr) : std::string("undefined")) << "\n";
}

void cmd_at_train(const Config& cfg) {
    auto train_set = load_split(cfg, "train");
    auto test_set = load_split(cfg, "test");
    if (train_set.empty()) raise(Errc::invalid_argument, "training split is empty");
    std::string out_path = cfg.require_string("at.out");

    SnnModel m;
    if (cfg.has("model.path")) {
        m = load_model(cfg.require_string("model.path"));
    } else {
        m = SnnModel::make(model_dims(cfg, train_set), lif_from(cfg),
                           mix_seed(cfg.get_seed(), 0x6d6f64ULL));
    }

    AtConfig at;
    at.budget = budget_from(cfg);
    std::string variant = cfg.get_string("at.variant", "madry");
    if (variant == "madry")
        at.variant = AtConfig::Variant::madry;
    else if (variant == "trades")
        at.variant = AtConfig::Variant::trades;
    else
        raise(Errc::invalid_argument, "unknown at variant '" + variant + "'");
    at.beta = cfg.get_double("at.beta", 6.0);
    at.inner_iters = cfg.get_int("at.inner_iters", 10);
    at.epochs = cfg.get_int("at.epochs", 10);
    at.lr = cfg.get_double("at.lr", 1e-3);
    at.seed = cfg.get_seed();

    TrainReport report = adversarial_train(m, train_set, test_set, at);
    save_model(m, out_path);
    write_history_csv(report, (fs::path(out_dir_from(cfg)) / "at_history.csv").string());
    std::cout << "final train_acc=" << report.train_acc.back()
              << " test_acc=" << (report.test_acc.empty() ? 0.0 : report.test_acc.back())
              << "\n";
}

void cmd_defend_eval(const Config& cfg) {
    SnnModel m = load_model(cfg.require_string("model.path"));
    auto test_set = load_split(cfg, "test");
    FilterConfig filter = filter_from(cfg);
    AttackConfig attack = attack_config_from(cfg);
    DefendedMetrics dm = defended_eval(m, filter, attack, test_set, cfg.get_seed());

    std::string dir = out_dir_from(cfg);
    std::ofstream out(fs::path(dir) / "defense_metrics.csv");
    if (!out) raise(Errc::io, "cannot write defense metrics");
    out << "kind,p,clean_acc,asr\n";
    char buf[128];
    std::string kind = cfg.get_string("defense.kind", "none");
    if (dm.asr_defined)
        std::snprintf(buf, sizeof(buf), "%s,%g,%.2f,%.2f\n", kind.c_str(), filter.p,
                      dm.clean_acc, dm.asr);
    else
        std::snprintf(buf, sizeof(buf), "%s,%g,%.2f,undefined\n", kind.c_str(), filter.p,
                      dm.clean_acc);
    out << buf;
    if (!out) raise(Errc::io, "short write to defense metrics");
    std::cout << "clean_acc=" << dm.clean_acc << " asr="
              << (dm.asr_defined ? std::to_string(dm.asr) : std::string("undefined")) << "\n";
}

void cmd_project(const Config& cfg) {
    EventGrid g = read_grid(cfg.require_string("project.grid"));
    auto [pi, budget] = read_distribution(cfg.require_string("project.pi"));
    ShiftSupport sup = make_support(budget, g.time_bins());
    ProjectionResult res = strict_project(g, pi, sup, budget);
    write_grid(res.grid, cfg.require_string("project.out"));
    std::cout << "moved=" << res.moved_count << " consumed_linf=" << res.consumed.linf
              << " consumed_l1=" << res.consumed.l1 << " consumed_l0=" << res.consumed.l0
              << "\n";
}

void cmd_sweep(const Config& cfg) {
    SnnModel m = load_model(cfg.require_string("model.path"));
    auto test_set = load_split(cfg, "test");
    Norm norm = norm_from_string(cfg.get_string("budget.norm", "linf"));
    std::vector<int> radii = cfg.get_int_list("sweep.radii");
    if (radii.empty()) raise(Errc::invalid_argument, "sweep.radii is required");
    AttackConfig base = attack_config_from(cfg);
    EvalOptions opts = eval_options_from(cfg);
    std::vector<ShiftHistogram> hists;
    auto records = budget_sweep(m, test_set, norm, radii, base, opts,
                                cfg.get_string("sweep.run_prefix", "sweep"), &hists);
    report(records, hists, out_dir_from(cfg));
    std::cout << "wrote " << records.size() << " records\n";
}

void cmd_report(const Config& cfg) {
    auto records = read_metrics_csv(cfg.require_string("report.input"));
    std::string output = cfg.get_string("report.output", "");
    if (output.empty())
        output = (fs::path(out_dir_from(cfg)) / "metrics.csv").string();
    fs::path parent = fs::path(output).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    write_metrics_csv(records, output);
    std::cout << "wrote " << records.size() << " records to " << output << "\n";
}

} // namespace retimer
