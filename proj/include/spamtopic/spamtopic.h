/* Stable C interface to the spamtopic library. */
#ifndef SPAMTOPIC_SPAMTOPIC_H
#define SPAMTOPIC_SPAMTOPIC_H

#include <stddef.h>

#if defined(SPAMTOPIC_BUILDING_LIBRARY)
#define ST_API __attribute__((visibility("default")))
#else
#define ST_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as CLI exit codes. */
typedef enum st_status {
  ST_OK = 0,
  ST_ERR_USAGE = 2,
  ST_ERR_VALIDATION = 3,
  ST_ERR_IO = 4,
  ST_ERR_ADAPTER = 5,
  ST_ERR_INTERNAL = 6
} st_status;

typedef enum st_format { ST_FORMAT_JSON = 0, ST_FORMAT_TABLE = 1 } st_format;

typedef struct st_context st_context;
typedef struct st_dataset st_dataset;
typedef struct st_model st_model;
typedef struct st_server st_server;

ST_API const char* st_version(void);

/* Both arguments may be NULL. `overrides_json` is a partial config object
 * applied on top of the file (or the defaults). */
ST_API st_status st_context_create(const char* config_path, const char* overrides_json, st_context** out);
ST_API void st_context_destroy(st_context* ctx);
/* Message of the last failed call on `ctx`; empty after success. */
ST_API const char* st_last_error(const st_context* ctx);
/* Effective configuration as JSON. */
ST_API st_status st_context_config(st_context* ctx, char** out_json);

/* Strings returned through char** are owned by the caller. */
ST_API void st_string_free(char* s);

ST_API st_status st_dataset_load(st_context* ctx, const char* path, st_dataset** out);
ST_API size_t st_dataset_size(const st_dataset* dataset);
/* Malformed lines skipped while loading, as a JSON array. */
ST_API st_status st_dataset_errors(st_context* ctx, const st_dataset* dataset, char** out_json);
ST_API void st_dataset_destroy(st_dataset* dataset);

/* Every regular file under `input_dir` is one raw message. Writes accepted
 * documents to `output_path` (JSONL) and reports rejections. */
ST_API st_status st_ingest_directory(st_context* ctx, const char* input_dir, const char* output_path,
                                     char** out_report_json);

/* Ward dendrogram over `encoder` ("bow" or "tfidf") vectors, written as JSON.
 * Datasets above the configured size limit need `allow_large`. */
ST_API st_status st_cluster(st_context* ctx, const st_dataset* dataset, const char* encoder, const char* output_path,
                            int allow_large, char** out_summary_json);

/* encoder: bow|tfidf|w2v|ext; classifier: mnb|gnb|lr|svm|rf. */
ST_API st_status st_train(st_context* ctx, const st_dataset* dataset, const char* encoder, const char* classifier,
                          const char* model_dir, char** out_summary_json);

ST_API st_status st_model_load(st_context* ctx, const char* model_dir, st_model** out);
ST_API void st_model_destroy(st_model* model);
ST_API st_status st_model_info(st_context* ctx, const st_model* model, char** out_json);
ST_API st_status st_predict_email(st_context* ctx, const st_model* model, const unsigned char* raw, size_t length,
                                  char** out_json);
ST_API st_status st_predict_text(st_context* ctx, const st_model* model, const char* text, char** out_json);

/* Stratified cross-validation of one pipeline. `confusion_csv_path` may be
 * NULL. */
ST_API st_status st_evaluate(st_context* ctx, const st_dataset* dataset, const char* encoder, const char* classifier,
                             unsigned folds, st_format format, const char* confusion_csv_path, char** out_report);
/* All 16 encoder x classifier pipelines plus the keyword baseline. */
ST_API st_status st_evaluate_grid(st_context* ctx, const st_dataset* dataset, unsigned folds, st_format format,
                                  char** out_report);
ST_API st_status st_baseline(st_context* ctx, const st_dataset* dataset, unsigned folds, st_format format,
                             char** out_report);
ST_API st_status st_bench(st_context* ctx, const st_model* model, const st_dataset* dataset, st_format format,
                          char** out_report);

/* `model_dir` may be NULL (classification disabled). A negative `port`
 * keeps the configured one; 0 picks a free port. */
ST_API st_status st_server_create(st_context* ctx, const char* data_dir, const char* model_dir, int port,
                                  st_server** out);
ST_API st_status st_server_start(st_context* ctx, st_server* server, int* out_port);
ST_API void st_server_wait(st_server* server);
ST_API void st_server_stop(st_server* server);
ST_API void st_server_destroy(st_server* server);

#ifdef __cplusplus
}
#endif

#endif
