/* C interface to the spike retiming library. All functions return an
 * rt_status; handles are opaque and freed with their rt_*_free function.
 * On failure rt_last_error() returns a thread-local message describing the
 * most recent error. */
#ifndef RETIMER_H
#define RETIMER_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rt_status {
    RT_OK = 0,
    RT_ERR_INVALID_ARGUMENT = 1, /* bad arguments, config, spec or budget */
    RT_ERR_PARSE = 2,            /* malformed file contents */
    RT_ERR_IO = 3,
    RT_ERR_SHAPE_MISMATCH = 4,
    RT_ERR_CAPACITY = 5,
    RT_ERR_TIMELINE = 6,
    RT_ERR_RUNTIME = 7
} rt_status;

const char* rt_status_name(rt_status status);

/* Message for the most recent failure on this thread. */
const char* rt_last_error(void);

typedef struct rt_grid rt_grid;
typedef struct rt_config rt_config;
typedef struct rt_dataset rt_dataset;
typedef struct rt_model rt_model;

/* ---- event grids (SRG1 files) ---- */

/* kind: 0 binary, 1 integer counts */
rt_status rt_grid_create(int t, int c, int h, int w, int kind, rt_grid** out);
rt_status rt_grid_read(const char* path, rt_grid** out);
rt_status rt_grid_write(const rt_grid* g, const char* path);
void rt_grid_free(rt_grid* g);

rt_status rt_grid_dims(const rt_grid* g, int* t, int* c, int* h, int* w);
rt_status rt_grid_kind(const rt_grid* g, int* kind);
rt_status rt_grid_get(const rt_grid* g, int t, int c, int h, int w, int* value);
rt_status rt_grid_set(rt_grid* g, int t, int c, int h, int w, int value);
rt_status rt_grid_active_count(const rt_grid* g, long long* count);

/* equal receives 1 when every line carries the same value multiset. */
rt_status rt_grid_multiset_equal(const rt_grid* a, const rt_grid* b, int* equal);
rt_status rt_grid_voxel_distance(const rt_grid* a, const rt_grid* b, long long* count);

/* ---- flat key=value configuration ---- */

rt_status rt_config_create(rt_config** out);
rt_status rt_config_load(rt_config* cfg, const char* path);
rt_status rt_config_set(rt_config* cfg, const char* key, const char* value);
void rt_config_free(rt_config* cfg);

/* ---- datasets (manifest.csv directories) ---- */

rt_status rt_dataset_load(const char* dir, rt_dataset** out);
void rt_dataset_free(rt_dataset* d);
rt_status rt_dataset_size(const rt_dataset* d, long long* size);
rt_status rt_dataset_label(const rt_dataset* d, long long index, int* label);
/* The returned grid borrows the dataset's storage; do not free it. */
rt_status rt_dataset_grid(const rt_dataset* d, long long index, const rt_grid** grid);

/* ---- models (SRM1 checkpoints) ---- */

rt_status rt_model_load(const char* path, rt_model** out);
rt_status rt_model_save(const rt_model* m, const char* path);
void rt_model_free(rt_model* m);
rt_status rt_model_predict(const rt_model* m, const rt_grid* g, int* label);
rt_status rt_model_num_classes(const rt_model* m, int* classes);
rt_status rt_model_logits(const rt_model* m, const rt_grid* g, double* out, size_t len);

/* ---- single-sample operations ---- */

typedef struct rt_attack_summary {
    int success;
    long long moved_count;
    int consumed_linf;
    long long consumed_l1;
    long long consumed_l0;
    double final_loss;
} rt_attack_summary;

/* Runs the gradient attack configured by the budget.* and attack.* keys of
 * cfg against (grid, label). adv receives a new grid; summary may be NULL. */
rt_status rt_attack_grid(const rt_model* m, const rt_grid* g, int label, const rt_config* cfg,
                         rt_grid** adv, rt_attack_summary* summary);

/* Strict projection of an SRP1 distribution dump onto a grid; the dump
 * carries its own budget. */
rt_status rt_project_file(const rt_grid* g, const char* pi_path, rt_grid** out);

/* ---- command entry points used by the CLI ---- */

rt_status rt_cmd_gen_data(const rt_config* cfg);
rt_status rt_cmd_train(const rt_config* cfg);
rt_status rt_cmd_attack(const rt_config* cfg);
rt_status rt_cmd_at_train(const rt_config* cfg);
rt_status rt_cmd_defend_eval(const rt_config* cfg);
rt_status rt_cmd_project(const rt_config* cfg);
rt_status rt_cmd_sweep(const rt_config* cfg);
rt_status rt_cmd_report(const rt_config* cfg);

#ifdef __cplusplus
}
#endif

#endif /* RETIMER_H */
