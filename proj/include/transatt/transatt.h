/* C API for the transatt shared library.
 *
 * Handles are opaque; every function returns a ta_status and reports detail
 * through ta_last_error(). Strings returned via char** out-parameters are
 * heap-allocated by the library and must be released with ta_string_free().
 * Structured inputs and outputs cross the boundary as UTF-8 JSON text.
 */
#ifndef TRANSATT_H
#define TRANSATT_H

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ta_status {
    TA_OK = 0,
    TA_ERR_INTERNAL = 1,
    TA_ERR_CONFIG = 2, /* bad flags, config values, or JSON options */
    TA_ERR_DATA = 3,   /* missing/malformed files, unknown ids */
    TA_ERR_NUMERIC = 4 /* training divergence, non-finite values */
} ta_status;

typedef struct ta_kb ta_kb;
typedef struct ta_model ta_model;

/* Per-epoch callback for ta_train; receives one JSON object per epoch:
 * {"epoch":N,"mean_loss":X,"val_hits1":Y|null,"seconds":S} */
typedef void (*ta_log_fn)(const char* json_line, void* user);

/* Library version string; embeds the checkpoint format version. */
const char* ta_version(void);

/* Message for the most recent failure on this thread. */
const char* ta_last_error(void);

void ta_string_free(char* s);

/* Generate a synthetic knowledge base into out_dir. config_json may be "{}"
 * or null for the defaults; keys mirror the gen-synth CLI flags. When
 * manifest_json_out is non-null it receives the manifest. */
ta_status ta_synth_generate(const char* config_json, const char* out_dir,
                            char** manifest_json_out);

/* Open a data directory (taxonomy.tsv, entity_class.tsv, entity_attr.tsv,
 * optional ground_truth_r3.tsv, split_*.txt, holdout_paths.txt). */
ta_status ta_kb_open(const char* data_dir, ta_kb** out);
void ta_kb_close(ta_kb* kb);

/* JSON array of {"kind":...,"detail":...}; empty array means valid. */
ta_status ta_kb_validate(const ta_kb* kb, char** report_json_out);

/* Dataset summary after filtering at min_attr_support: tuple count, retained
 * attributes, entity/path statistics. */
ta_status ta_kb_dataset_summary(const ta_kb* kb, int min_attr_support, char** summary_json_out);

/* Train on the kb and write the checkpoint to checkpoint_path.
 * options_json (all fields optional):
 * {
 *   "model":    {"word_dim":..,"path_dim":..,"attr_dim":..,"margin":..,
 *                "norm":"l1"|"l2","renormalize_attrs":..,"peepholes":..,
 *                "shared_attention_neg":..,"seed":..},
 *   "train":    {"epochs":..,"batch_size":..,"adadelta_rho":..,
 *                "adadelta_eps":..,"negatives_per_positive":..,"shuffle":..,
 *                "early_stop_patience":..,"validation_fraction":..,
 *                "allow_gold_negatives":..,"seed":..},
 *   "entities": ["e1",...],        // restrict training to these (else split_train.txt, else all)
 *   "embeddings_file": "path",     // optional word2vec text vectors
 *   "trainable_embeddings": true,
 *   "min_attr_support": 20,
 *   "threads": 1,
 *   "save_every": 0
 * } */
ta_status ta_train(const ta_kb* kb, const char* options_json, const char* checkpoint_path,
                   ta_log_fn log, void* user);

ta_status ta_model_open(const char* checkpoint_path, ta_model** out);
void ta_model_close(ta_model* m);

/* Checkpoint metadata: dims, attribute/vocab sizes, training stats. */
ta_status ta_model_info(const ta_model* m, char** info_json_out);

/* Rank attributes for one slash-joined class-path. Result JSON:
 * {"query":"a/b/c","ranking":[{"attribute":"x","score":s},...]} */
ta_status ta_predict_path(const ta_model* m, const char* slash_path, int top_k,
                          char** ranking_json_out);

/* Rank attributes for an entity of the kb with selective attention.
 * options_json: {"filter":["attr",...], "attention_csv":"file.csv"} or null.
 * Result adds "attention": rows aligned with the ranking, columns with
 * "paths". */
ta_status ta_predict_entity(const ta_model* m, const ta_kb* kb, const char* entity, int top_k,
                            const char* options_json, char** ranking_json_out);

/* Run an evaluation task.
 * options_json: {"task":"ape"|"apc", "k":[1,5,10,15,20],
 *                "filter":["attr",...],       // ape only
 *                "entities":["e1",...],       // ape: default split_test.txt, else all
 *                "paths":["a/b/c",...]}       // apc: default holdout_paths.txt, else all r3 paths
 */
ta_status ta_evaluate(const ta_model* m, const ta_kb* kb, const char* options_json,
                      char** report_json_out);

/* Aligned plain-text table for a report produced by ta_evaluate. */
ta_status ta_report_render(const char* report_json, char** table_text_out);

#ifdef __cplusplus
}
#endif

#endif /* TRANSATT_H */
