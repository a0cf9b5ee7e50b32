#include "spamtopic/spamtopic.h"

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <new>

#include <json.hpp>

#include "spamtopic/cluster.hpp"
#include "spamtopic/config.hpp"
#include "spamtopic/dataset.hpp"
#include "spamtopic/errors.hpp"
#include "spamtopic/ingest.hpp"
#include "spamtopic/model_store.hpp"
#include "spamtopic/pipeline.hpp"
#include "spamtopic/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spamtopic;

struct st_context {
  store::Config config;
  std::string last_error;
};

struct st_dataset {
  std::vector<store::DatasetRecord> records;
  std::vector<store::LineError> errors;
};

struct st_model {
  eval::Pipeline pipeline;
};

struct st_server {
  std::unique_ptr<service::Service> service;
};

namespace {

st_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::usage: return ST_ERR_USAGE;
    case ErrorKind::validation: return ST_ERR_VALIDATION;
    case ErrorKind::io: return ST_ERR_IO;
    case ErrorKind::adapter: return ST_ERR_ADAPTER;
    case ErrorKind::internal: return ST_ERR_INTERNAL;
  }
  return ST_ERR_INTERNAL;
}

template <typename F>
st_status guarded(st_context* ctx, F&& f) {
  auto set = [&](const std::string& msg) {
    if (ctx) ctx->last_error = msg;
  };
  try {
    if (ctx) ctx->last_error.clear();
    f();
    return ST_OK;
  } catch (const Error& e) {
    set(e.what());
    return status_of(e.kind());
  } catch (const fs::filesystem_error& e) {
    set(e.what());
    return ST_ERR_IO;
  } catch (const std::bad_alloc&) {
    set("out of memory");
    return ST_ERR_INTERNAL;
  } catch (const std::exception& e) {
    set(e.what());
    return ST_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorKind::usage, std::string(what) + " must not be NULL");
}

eval::EncoderKind encoder_arg(const char* name) {
  require(name, "encoder");
  const auto kind = eval::parse_encoder(name);
  if (!kind) throw Error(ErrorKind::usage, std::string("unknown encoder '") + name + "' (bow, tfidf, w2v, ext)");
  return *kind;
}

models::Algorithm classifier_arg(const char* name, eval::EncoderKind encoder) {
  require(name, "classifier");
  const std::string n = name;
  const bool embedding = encoder == eval::EncoderKind::w2v || encoder == eval::EncoderKind::ext;
  if (n == "nb") return embedding ? models::Algorithm::gaussian_nb : models::Algorithm::multinomial_nb;
  const auto alg = models::parse_algorithm(n);
  if (!alg) throw Error(ErrorKind::usage, "unknown classifier '" + n + "' (mnb, gnb, lr, svm, rf)");
  if (*alg == models::Algorithm::multinomial_nb && embedding) {
    throw validation_error("multinomial naive Bayes needs non-negative features; use gnb with " +
                           std::string(eval::to_string(encoder)));
  }
  return *alg;
}

std::string prediction_json(const eval::Pipeline& p, const models::Prediction& pred, const json& extra) {
  json out{{"label", pred.label}, {"scores", pred.scores}, {"pipeline", p.spec.id()}};
  for (const auto& [k, v] : extra.items()) out[k] = v;
  return out.dump(2);
}

}  // namespace

extern "C" {

const char* st_version(void) { return "1.0.0"; }

st_status st_context_create(const char* config_path, const char* overrides_json, st_context** out) {
  if (!out) return ST_ERR_USAGE;
  *out = nullptr;
  auto ctx = std::make_unique<st_context>();
  const st_status s = guarded(ctx.get(), [&] {
    ctx->config = store::load_config(config_path ? std::optional<fs::path>(config_path) : std::nullopt);
    if (overrides_json && *overrides_json) ctx->config = store::config_from_json(overrides_json, ctx->config);
  });
  // The context is returned even on failure so the caller can read the error.
  *out = ctx.release();
  return s;
}

void st_context_destroy(st_context* ctx) { delete ctx; }

const char* st_last_error(const st_context* ctx) { return ctx ? ctx->last_error.c_str() : "null context"; }

st_status st_context_config(st_context* ctx, char** out_json) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] { put(out_json, store::config_to_json(ctx->config)); });
}

void st_string_free(char* s) { std::free(s); }

st_status st_dataset_load(st_context* ctx, const char* path, st_dataset** out) {
  if (!ctx || !out) return ST_ERR_USAGE;
  *out = nullptr;
  return guarded(ctx, [&] {
    require(path, "path");
    auto result = store::read_dataset(path);
    auto ds = std::make_unique<st_dataset>();
    ds->records = std::move(result.records);
    ds->errors = std::move(result.errors);
    *out = ds.release();
  });
}

size_t st_dataset_size(const st_dataset* dataset) { return dataset ? dataset->records.size() : 0; }

st_status st_dataset_errors(st_context* ctx, const st_dataset* dataset, char** out_json) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(dataset, "dataset");
    json errors = json::array();
    for (const auto& e : dataset->errors) errors.push_back({{"line", e.line}, {"message", e.message}});
    put(out_json, errors.dump(2));
  });
}

void st_dataset_destroy(st_dataset* dataset) { delete dataset; }

st_status st_ingest_directory(st_context* ctx, const char* input_dir, const char* output_path, char** out_report_json) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(input_dir, "input_dir");
    require(output_path, "output_path");
    const fs::path root(input_dir);
    if (!fs::is_directory(root)) throw io_error(std::string("not a directory: ") + input_dir);
    std::vector<fs::path> files;
    for (const auto& item : fs::recursive_directory_iterator(root)) {
      if (item.is_regular_file()) files.push_back(item.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<store::DatasetRecord> records;
    json rejected = json::array();
    std::map<std::string, std::size_t> languages;
    for (const auto& file : files) {
      const std::string id = fs::relative(file, root).generic_string();
      std::string bytes;
      try {
        bytes = store::read_file(file);
      } catch (const Error& e) {
        rejected.push_back({{"id", id}, {"reason", "parse_failure"}, {"detail", e.what()}});
        continue;
      }
      const auto outcome = ingest::ingest_message(
          id, std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()), ctx->config.adapters);
      if (const auto* rej = std::get_if<ingest::Rejection>(&outcome)) {
        rejected.push_back({{"id", rej->id}, {"reason", ingest::to_string(rej->reason)}, {"detail", rej->detail}});
      } else {
        records.push_back(store::make_record(std::get<ingest::EmailDocument>(outcome)));
        ++languages[std::string(to_string(records.back().language))];
      }
    }
    store::write_dataset(records, output_path);
    put(out_report_json, json{{"input_files", files.size()},
                              {"accepted", records.size()},
                              {"languages", languages},
                              {"rejected", rejected},
                              {"output", output_path}}
                             .dump(2));
  });
}

st_status st_cluster(st_context* ctx, const st_dataset* dataset, const char* encoder, const char* output_path,
                     int allow_large, char** out_summary_json) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(dataset, "dataset");
    require(output_path, "output_path");
    const auto kind = encoder_arg(encoder ? encoder : "bow");
    if (kind != eval::EncoderKind::bow && kind != eval::EncoderKind::tfidf) {
      throw Error(ErrorKind::usage, "clustering supports the bow and tfidf encoders");
    }
    const auto& records = dataset->records;
    if (records.size() > ctx->config.max_cluster_docs && !allow_large) {
      throw validation_error("dataset has " + std::to_string(records.size()) + " records; clustering more than " +
                             std::to_string(ctx->config.max_cluster_docs) +
                             " needs O(n^2) memory and an explicit override");
    }
    const auto enc = eval::fit_encoder(kind, records, ctx->config);
    const auto rows = eval::encode_batch(enc, records);
    const auto dendrogram = cluster::ward_agglomerate(rows);
    store::write_file_atomic(output_path, cluster::dendrogram_to_json(dendrogram));
    put(out_summary_json, json{{"n_leaves", dendrogram.n_leaves},
                               {"merges", dendrogram.merges.size()},
                               {"max_height", dendrogram.merges.empty() ? 0.0 : dendrogram.merges.back().height},
                               {"encoder", eval::to_string(kind)},
                               {"vocabulary", enc.dimension},
                               {"output", output_path}}
                              .dump(2));
  });
}

st_status st_train(st_context* ctx, const st_dataset* dataset, const char* encoder, const char* classifier,
                   const char* model_dir, char** out_summary_json) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(dataset, "dataset");
    require(model_dir, "model_dir");
    const auto kind = encoder_arg(encoder);
    const auto spec = eval::make_pipeline_spec(kind, classifier_arg(classifier, kind), ctx->config);
    const auto pipeline = eval::fit_pipeline(spec, dataset->records, ctx->config);
    store::save_pipeline(pipeline, model_dir, ctx->config);
    put(out_summary_json, json{{"pipeline", spec.id()},
                               {"balance", balance::to_string(spec.balance)},
                               {"documents", dataset->records.size()},
                               {"classes", pipeline.model.classes},
                               {"feature_dimension", pipeline.model.feature_dimension},
                               {"warnings", pipeline.model.warnings},
                               {"model_dir", model_dir}}
                              .dump(2));
  });
}

st_status st_model_load(st_context* ctx, const char* model_dir, st_model** out) {
  if (!ctx || !out) return ST_ERR_USAGE;
  *out = nullptr;
  return guarded(ctx, [&] {
    require(model_dir, "model_dir");
    auto m = std::make_unique<st_model>();
    m->pipeline = store::load_pipeline(model_dir);
    *out = m.release();
  });
}

void st_model_destroy(st_model* model) { delete model; }

st_status st_model_info(st_context* ctx, const st_model* model, char** out_json) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(model, "model");
    const auto& p = model->pipeline;
    put(out_json, json{{"pipeline", p.spec.id()},
                       {"language", to_string(p.encoder.language)},
                       {"classes", p.model.classes},
                       {"feature_dimension", p.model.feature_dimension},
                       {"trees", p.model.spec.trees}}
                      .dump(2));
  });
}

st_status st_predict_email(st_context* ctx, const st_model* model, const unsigned char* raw, size_t length,
                           char** out_json) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(model, "model");
    require(raw, "raw");
    const auto outcome = ingest::ingest_message("input", std::span(raw, length), ctx->config.adapters);
    if (const auto* rej = std::get_if<ingest::Rejection>(&outcome)) {
      throw validation_error("email rejected: " + std::string(ingest::to_string(rej->reason)) +
                             (rej->detail.empty() ? "" : " (" + rej->detail + ")"));
    }
    const auto& doc = std::get<ingest::EmailDocument>(outcome);
    const auto& p = model->pipeline;
    if (doc.language != p.encoder.language) {
      throw validation_error("email language " + std::string(to_string(doc.language)) +
                             " does not match the model language " + std::string(to_string(p.encoder.language)));
    }
    const auto pred = eval::predict_text(p, doc.merged_text);
    put(out_json, prediction_json(p, pred, json{{"flags", doc.flags.names()}, {"language", to_string(doc.language)}}));
  });
}

st_status st_predict_text(st_context* ctx, const st_model* model, const char* text, char** out_json) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(model, "model");
    require(text, "text");
    const auto pred = eval::predict_text(model->pipeline, text);
    put(out_json, prediction_json(model->pipeline, pred, json::object()));
  });
}

st_status st_evaluate(st_context* ctx, const st_dataset* dataset, const char* encoder, const char* classifier,
                      unsigned folds, st_format format, const char* confusion_csv_path, char** out_report) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(dataset, "dataset");
    const auto kind = encoder_arg(encoder);
    const auto spec = eval::make_pipeline_spec(kind, classifier_arg(classifier, kind), ctx->config);
    const std::size_t k = folds ? folds : ctx->config.folds;
    const auto cv = eval::cross_validate(spec, dataset->records, ctx->config, k, ctx->config.seed);
    if (confusion_csv_path) store::write_file_atomic(confusion_csv_path, eval::confusion_to_csv(cv.report.confusion));
    if (format == ST_FORMAT_TABLE) {
      std::string text = "pipeline " + spec.id() + " (" + std::to_string(k) + "-fold, balance " +
                         std::string(balance::to_string(spec.balance)) + ")\n\n" + eval::report_to_table(cv.report);
      for (const auto& w : cv.warnings) text += "warning: " + w + "\n";
      put(out_report, text);
    } else {
      json j{{"pipeline", spec.id()}, {"folds", k}, {"seed", ctx->config.seed},
             {"balance", balance::to_string(spec.balance)}};
      j["metrics"] = json::parse(eval::report_to_json(cv.report));
      j["warnings"] = cv.warnings;
      put(out_report, j.dump(2));
    }
  });
}

st_status st_evaluate_grid(st_context* ctx, const st_dataset* dataset, unsigned folds, st_format format,
                           char** out_report) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(dataset, "dataset");
    const std::size_t k = folds ? folds : ctx->config.folds;
    const auto grid = eval::run_grid(dataset->records, ctx->config, k, ctx->config.seed);
    put(out_report, format == ST_FORMAT_TABLE ? eval::grid_to_table(grid) : eval::grid_to_json(grid));
  });
}

st_status st_baseline(st_context* ctx, const st_dataset* dataset, unsigned folds, st_format format, char** out_report) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(dataset, "dataset");
    const std::size_t k = folds ? folds : ctx->config.folds;
    const auto b = eval::evaluate_keyword_baseline(dataset->records, k, ctx->config.seed);
    if (format == ST_FORMAT_TABLE) {
      std::string text = "keyword baseline, top " + std::to_string(b.model.top) + " words per class\n";
      char buf[128];
      std::snprintf(buf, sizeof buf, "train accuracy %.4f\n%zu-fold accuracy %.4f, macro F1 %.4f\n\n", b.train_accuracy,
                    k, b.cv.accuracy, b.cv.macro.f1);
      text += buf;
      for (const auto& [cls, words] : b.model.keywords) {
        text += cls + ":";
        for (const auto& w : words) text += " " + w;
        text += "\n";
      }
      put(out_report, text);
    } else {
      json j{{"keywords_per_class", b.model.top},
             {"train_accuracy", b.train_accuracy},
             {"folds", k},
             {"cv_accuracy", b.cv.accuracy},
             {"keywords", b.model.keywords},
             {"class_counts", b.model.class_counts}};
      j["cv_metrics"] = json::parse(eval::report_to_json(b.cv));
      put(out_report, j.dump(2));
    }
  });
}

st_status st_bench(st_context* ctx, const st_model* model, const st_dataset* dataset, st_format format,
                   char** out_report) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(model, "model");
    require(dataset, "dataset");
    const auto r = eval::bench_runtime(model->pipeline, dataset->records);
    if (format == ST_FORMAT_TABLE) {
      char buf[256];
      std::snprintf(buf, sizeof buf, "pipeline %s\ndocuments %zu\nmean %.4f ms/email\np95  %.4f ms/email\n",
                    r.pipeline.c_str(), r.documents, r.mean_ms, r.p95_ms);
      put(out_report, buf);
    } else {
      put(out_report, eval::runtime_to_json(r));
    }
  });
}

st_status st_server_create(st_context* ctx, const char* data_dir, const char* model_dir, int port, st_server** out) {
  if (!ctx || !out) return ST_ERR_USAGE;
  *out = nullptr;
  return guarded(ctx, [&] {
    require(data_dir, "data_dir");
    service::ServiceOptions options;
    options.data_dir = data_dir;
    if (model_dir) options.model_dir = fs::path(model_dir);
    options.config = ctx->config;
    options.host = ctx->config.service_host;
    options.port = port < 0 ? ctx->config.service_port : port;
    auto server = std::make_unique<st_server>();
    server->service = std::make_unique<service::Service>(std::move(options));
    *out = server.release();
  });
}

st_status st_server_start(st_context* ctx, st_server* server, int* out_port) {
  if (!ctx) return ST_ERR_USAGE;
  return guarded(ctx, [&] {
    require(server, "server");
    const int port = server->service->start();
    if (out_port) *out_port = port;
  });
}

void st_server_wait(st_server* server) {
  if (server) server->service->wait();
}

void st_server_stop(st_server* server) {
  if (server) server->service->stop();
}

void st_server_destroy(st_server* server) { delete server; }

}  // extern "C"
