#include "retimer.h"

#include <string>

#include "retimer/eval.hpp"

using namespace retimer;

struct rt_grid {
    EventGrid grid;
};

struct rt_config {
    Config cfg;
};

struct rt_dataset {
    std::vector<LabeledSample> samples;
    mutable std::vector<rt_grid> views; // lazily mirrors samples for borrowing
};

struct rt_model {
    SnnModel model;
};

namespace {

thread_local std::string g_last_error;

rt_status status_of(const Error& e) {
    switch (e.code()) {
    case Errc::invalid_argument:
    case Errc::invalid_spec:
    case Errc::invalid_budget:
    case Errc::wrong_support:
    case Errc::trace_mismatch:
    case Errc::empty_active_set:
    case Errc::too_large: return RT_ERR_INVALID_ARGUMENT;
    case Errc::parse: return RT_ERR_PARSE;
    case Errc::io: return RT_ERR_IO;
    case Errc::shape_mismatch: return RT_ERR_SHAPE_MISMATCH;
    case Errc::capacity_violation: return RT_ERR_CAPACITY;
    case Errc::timeline_violation: return RT_ERR_TIMELINE;
    }
    return RT_ERR_RUNTIME;
}

template <typename Fn>
rt_status guarded(Fn&& fn) {
    try {
        fn();
        return RT_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e);
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return RT_ERR_RUNTIME;
    } catch (...) {
        g_last_error = "unknown error";
        return RT_ERR_RUNTIME;
    }
}

rt_status fail_null(const char* what) {
    g_last_error = std::string(what) + " is null";
    return RT_ERR_INVALID_ARGUMENT;
}

} // namespace

extern "C" {

const char* rt_status_name(rt_status status) {
    switch (status) {
    case RT_OK: return "ok";
    case RT_ERR_INVALID_ARGUMENT: return "invalid argument";
    case RT_ERR_PARSE: return "parse error";
    case RT_ERR_IO: return "io error";
    case RT_ERR_SHAPE_MISMATCH: return "shape mismatch";
    case RT_ERR_CAPACITY: return "capacity violation";
    case RT_ERR_TIMELINE: return "timeline violation";
    case RT_ERR_RUNTIME: return "runtime error";
    }
    return "unknown";
}

const char* rt_last_error(void) { return g_last_error.c_str(); }

rt_status rt_grid_create(int t, int c, int h, int w, int kind, rt_grid** out) {
    if (!out) return fail_null("out");
    return guarded([&] {
        if (kind != 0 && kind != 1) raise(Errc::invalid_argument, "kind must be 0 or 1");
        *out = new rt_grid{EventGrid(t, c, h, w, kind ? GridKind::integer : GridKind::binary)};
    });
}

rt_status rt_grid_read(const char* path, rt_grid** out) {
    if (!path) return fail_null("path");
    if (!out) return fail_null("out");
    return guarded([&] { *out = new rt_grid{read_grid(path)}; });
}

rt_status rt_grid_write(const rt_grid* g, const char* path) {
    if (!g) return fail_null("grid");
    if (!path) return fail_null("path");
    return guarded([&] { write_grid(g->grid, path); });
}

void rt_grid_free(rt_grid* g) { delete g; }

rt_status rt_grid_dims(const rt_grid* g, int* t, int* c, int* h, int* w) {
    if (!g) return fail_null("grid");
    if (t) *t = g->grid.time_bins();
    if (c) *c = g->grid.channels();
    if (h) *h = g->grid.height();
    if (w) *w = g->grid.width();
    return RT_OK;
}

rt_status rt_grid_kind(const rt_grid* g, int* kind) {
    if (!g) return fail_null("grid");
    if (!kind) return fail_null("kind");
    *kind = g->grid.kind() == GridKind::integer ? 1 : 0;
    return RT_OK;
}

rt_status rt_grid_get(const rt_grid* g, int t, int c, int h, int w, int* value) {
    if (!g) return fail_null("grid");
    if (!value) return fail_null("value");
    return guarded([&] { *value = g->grid.at(t, c, h, w); });
}

rt_status rt_grid_set(rt_grid* g, int t, int c, int h, int w, int value) {
    if (!g) return fail_null("grid");
    return guarded([&] { g->grid.set(t, c, h, w, value); });
}

rt_status rt_grid_active_count(const rt_grid* g, long long* count) {
    if (!g) return fail_null("grid");
    if (!count) return fail_null("count");
    *count = g->grid.active_count();
    return RT_OK;
}

rt_status rt_grid_multiset_equal(const rt_grid* a, const rt_grid* b, int* equal) {
    if (!a || !b) return fail_null("grid");
    if (!equal) return fail_null("equal");
    return guarded([&] { *equal = multiset_equal_per_line(a->grid, b->grid) ? 1 : 0; });
}

rt_status rt_grid_voxel_distance(const rt_grid* a, const rt_grid* b, long long* count) {
    if (!a || !b) return fail_null("grid");
    if (!count) return fail_null("count");
    return guarded([&] { *count = voxel_l0_distance(a->grid, b->grid); });
}

rt_status rt_config_create(rt_config** out) {
    if (!out) return fail_null("out");
    return guarded([&] { *out = new rt_config{}; });
}

rt_status rt_config_load(rt_config* cfg, const char* path) {
    if (!cfg) return fail_null("config");
    if (!path) return fail_null("path");
    return guarded([&] {
        Config loaded = Config::load_file(path);
        for (const auto& [k, v] : loaded.entries()) cfg->cfg.set(k, v);
    });
}

rt_status rt_config_set(rt_config* cfg, const char* key, const char* value) {
    if (!cfg) return fail_null("config");
    if (!key || !value) return fail_null("key/value");
    return guarded([&] { cfg->cfg.set(key, value); });
}

void rt_config_free(rt_config* cfg) { delete cfg; }

rt_status rt_dataset_load(const char* dir, rt_dataset** out) {
    if (!dir) return fail_null("dir");
    if (!out) return fail_null("out");
    return guarded([&] {
        auto d = new rt_dataset{load_dataset(dir), {}};
        d->views.reserve(d->samples.size());
        for (const auto& s : d->samples) d->views.push_back(rt_grid{s.grid});
        *out = d;
    });
}

void rt_dataset_free(rt_dataset* d) { delete d; }

rt_status rt_dataset_size(const rt_dataset* d, long long* size) {
    if (!d) return fail_null("dataset");
    if (!size) return fail_null("size");
    *size = static_cast<long long>(d->samples.size());
    return RT_OK;
}

rt_status rt_dataset_label(const rt_dataset* d, long long index, int* label) {
    if (!d) return fail_null("dataset");
    if (!label) return fail_null("label");
    return guarded([&] {
        if (index < 0 || index >= static_cast<long long>(d->samples.size()))
            raise(Errc::invalid_argument, "dataset index out of range");
        *label = d->samples[static_cast<size_t>(index)].label;
    });
}

rt_status rt_dataset_grid(const rt_dataset* d, long long index, const rt_grid** grid) {
    if (!d) return fail_null("dataset");
    if (!grid) return fail_null("grid");
    return guarded([&] {
        if (index < 0 || index >= static_cast<long long>(d->samples.size()))
            raise(Errc::invalid_argument, "dataset index out of range");
        *grid = &d->views[static_cast<size_t>(index)];
    });
}

rt_status rt_model_load(const char* path, rt_model** out) {
    if (!path) return fail_null("path");
    if (!out) return fail_null("out");
    return guarded([&] { *out = new rt_model{load_model(path)}; });
}

rt_status rt_model_save(const rt_model* m, const char* path) {
    if (!m) return fail_null("model");
    if (!path) return fail_null("path");
    return guarded([&] { save_model(m->model, path); });
}

void rt_model_free(rt_model* m) { delete m; }

rt_status rt_model_predict(const rt_model* m, const rt_grid* g, int* label) {
    if (!m) return fail_null("model");
    if (!g) return fail_null("grid");
    if (!label) return fail_null("label");
    return guarded([&] { *label = forward(m->model, g->grid).argmax(); });
}

rt_status rt_model_num_classes(const rt_model* m, int* classes) {
    if (!m) return fail_null("model");
    if (!classes) return fail_null("classes");
    *classes = m->model.num_classes();
    return RT_OK;
}

rt_status rt_model_logits(const rt_model* m, const rt_grid* g, double* out, size_t len) {
    if (!m) return fail_null("model");
    if (!g) return fail_null("grid");
    if (!out) return fail_null("out");
    return guarded([&] {
        Logits z = forward(m->model, g->grid);
        if (len < z.z.size())
            raise(Errc::invalid_argument, "logits buffer is too small");
        for (size_t i = 0; i < z.z.size(); ++i) out[i] = z.z[i];
    });
}

rt_status rt_attack_grid(const rt_model* m, const rt_grid* g, int label, const rt_config* cfg,
                         rt_grid** adv, rt_attack_summary* summary) {
    if (!m) return fail_null("model");
    if (!g) return fail_null("grid");
    if (!cfg) return fail_null("config");
    if (!adv) return fail_null("adv");
    return guarded([&] {
        AttackConfig attack = attack_config_from(cfg->cfg);
        AttackResult res = run_attack(m->model, {g->grid, label}, attack);
        *adv = new rt_grid{std::move(res.adv)};
        if (summary) {
            summary->success = res.success ? 1 : 0;
            summary->moved_count = res.moved_count;
            summary->consumed_linf = res.consumed.linf;
            summary->consumed_l1 = res.consumed.l1;
            summary->consumed_l0 = res.consumed.l0;
            summary->final_loss = res.final_loss;
        }
    });
}

rt_status rt_project_file(const rt_grid* g, const char* pi_path, rt_grid** out) {
    if (!g) return fail_null("grid");
    if (!pi_path) return fail_null("pi_path");
    if (!out) return fail_null("out");
    return guarded([&] {
        auto [pi, budget] = read_distribution(pi_path);
        ShiftSupport sup = make_support(budget, g->grid.time_bins());
        *out = new rt_grid{strict_project(g->grid, pi, sup, budget).grid};
    });
}

#define RT_DEFINE_CMD(name, fn)                                                                \
    rt_status name(const rt_config* cfg) {                                                     \
        if (!cfg) return fail_null("config");                                                  \
        return guarded([&] { fn(cfg->cfg); });                                                 \
    }

RT_DEFINE_CMD(rt_cmd_gen_data, cmd_gen_data)
RT_DEFINE_CMD(rt_cmd_train, cmd_train)
RT_DEFINE_CMD(rt_cmd_attack, cmd_attack)
RT_DEFINE_CMD(rt_cmd_at_train, cmd_at_train)
RT_DEFINE_CMD(rt_cmd_defend_eval, cmd_defend_eval)
RT_DEFINE_CMD(rt_cmd_project, cmd_project)
RT_DEFINE_CMD(rt_cmd_sweep, cmd_sweep)
RT_DEFINE_CMD(rt_cmd_report, cmd_report)

} // extern "C"
