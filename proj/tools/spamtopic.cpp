// Command-line front end. Everything goes through the C API.
#include <csignal>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <pthread.h>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "spamtopic/spamtopic.h"

namespace {

struct Options {
  std::string config;
  std::optional<unsigned long long> seed;
  std::string format = "table";
  std::string dataset;
  std::string model;
  std::string encoder = "tfidf";
  std::string classifier = "lr";
  std::string balance;
  unsigned k = 0;
  bool grid = false;

  std::string input;
  std::string output;
  std::string email;
  std::string text;
  std::string data_dir;
  std::string confusion_csv;
  int port = -1;
  bool allow_large = false;
};

class Context {
 public:
  ~Context() { st_context_destroy(ctx_); }
  st_context* get() const { return ctx_; }
  st_context** out() { return &ctx_; }

 private:
  st_context* ctx_ = nullptr;
};

int report_failure(st_status status, st_context* ctx) {
  std::fprintf(stderr, "error: %s\n", st_last_error(ctx));
  return static_cast<int>(status);
}

// Prints and frees a library-owned string.
void emit(char* s) {
  if (!s) return;
  std::fputs(s, stdout);
  const std::size_t n = std::strlen(s);
  if (n == 0 || s[n - 1] != '\n') std::fputc('\n', stdout);
  st_string_free(s);
}

std::string overrides(const Options& o) {
  std::string json = "{";
  if (o.seed) {
    json += "\"seed\":" + std::to_string(*o.seed);
  }
  if (!o.balance.empty() || o.seed) {
    if (json.size() > 1) json += ",";
    json += "\"balance\":{";
    bool first = true;
    if (!o.balance.empty()) {
      json += "\"strategy\":\"" + o.balance + "\"";
      first = false;
    }
    if (o.seed) json += std::string(first ? "" : ",") + "\"seed\":" + std::to_string(*o.seed);
    json += "}";
  }
  return json + "}";
}

st_format format_of(const Options& o) { return o.format == "json" ? ST_FORMAT_JSON : ST_FORMAT_TABLE; }

struct DatasetHandle {
  st_dataset* ptr = nullptr;
  ~DatasetHandle() { st_dataset_destroy(ptr); }
};

struct ModelHandle {
  st_model* ptr = nullptr;
  ~ModelHandle() { st_model_destroy(ptr); }
};

st_status load_dataset(st_context* ctx, const std::string& path, DatasetHandle& out) {
  const st_status s = st_dataset_load(ctx, path.c_str(), &out.ptr);
  if (s != ST_OK) return s;
  char* errors = nullptr;
  if (st_dataset_errors(ctx, out.ptr, &errors) == ST_OK && errors) {
    if (std::string(errors) != "[]") std::fprintf(stderr, "warning: skipped malformed dataset lines: %s\n", errors);
    st_string_free(errors);
  }
  return ST_OK;
}

int run_serve(st_context* ctx, const Options& o) {
  // Signals are taken synchronously by a helper thread so the server can be
  // stopped cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  st_server* server = nullptr;
  st_status s = st_server_create(ctx, o.data_dir.c_str(), o.model.empty() ? nullptr : o.model.c_str(), o.port, &server);
  if (s != ST_OK) return report_failure(s, ctx);
  int port = 0;
  s = st_server_start(ctx, server, &port);
  if (s != ST_OK) {
    st_server_destroy(server);
    return report_failure(s, ctx);
  }
  std::fprintf(stderr, "listening on port %d\n", port);
  std::fflush(stderr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    st_server_stop(server);
  });
  st_server_wait(server);
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  st_server_destroy(server);
  return 0;
}

int dispatch(const std::string& command, const Options& o) {
  Context ctx;
  const std::string ov = overrides(o);
  st_status s = st_context_create(o.config.empty() ? nullptr : o.config.c_str(), ov.c_str(), ctx.out());
  if (s != ST_OK) return report_failure(s, ctx.get());
  char* out = nullptr;

  if (command == "ingest") {
    s = st_ingest_directory(ctx.get(), o.input.c_str(), o.output.c_str(), &out);
  } else if (command == "serve") {
    return run_serve(ctx.get(), o);
  } else if (command == "predict") {
    ModelHandle model;
    s = st_model_load(ctx.get(), o.model.c_str(), &model.ptr);
    if (s == ST_OK) {
      if (!o.email.empty()) {
        std::ifstream in(o.email, std::ios::binary);
        if (!in) {
          std::fprintf(stderr, "error: cannot read %s\n", o.email.c_str());
          return ST_ERR_IO;
        }
        const std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        s = st_predict_email(ctx.get(), model.ptr, reinterpret_cast<const unsigned char*>(raw.data()), raw.size(), &out);
      } else {
        s = st_predict_text(ctx.get(), model.ptr, o.text.c_str(), &out);
      }
    }
  } else if (command == "bench") {
    ModelHandle model;
    DatasetHandle ds;
    s = st_model_load(ctx.get(), o.model.c_str(), &model.ptr);
    if (s == ST_OK) s = load_dataset(ctx.get(), o.dataset, ds);
    if (s == ST_OK) s = st_bench(ctx.get(), model.ptr, ds.ptr, format_of(o), &out);
  } else {
    DatasetHandle ds;
    s = load_dataset(ctx.get(), o.dataset, ds);
    if (s == ST_OK) {
      if (command == "cluster") {
        s = st_cluster(ctx.get(), ds.ptr, o.encoder.c_str(), o.output.c_str(), o.allow_large ? 1 : 0, &out);
      } else if (command == "train") {
        s = st_train(ctx.get(), ds.ptr, o.encoder.c_str(), o.classifier.c_str(), o.model.c_str(), &out);
      } else if (command == "eval") {
        s = o.grid ? st_evaluate_grid(ctx.get(), ds.ptr, o.k, format_of(o), &out)
                   : st_evaluate(ctx.get(), ds.ptr, o.encoder.c_str(), o.classifier.c_str(), o.k, format_of(o),
                                 o.confusion_csv.empty() ? nullptr : o.confusion_csv.c_str(), &out);
      } else if (command == "baseline") {
        s = st_baseline(ctx.get(), ds.ptr, o.k, format_of(o), &out);
      }
    }
  }
  if (s != ST_OK) return report_failure(s, ctx.get());
  emit(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spam email topic toolkit: ingest, cluster, label, train, evaluate."};
  app.require_subcommand(1);
  Options o;
  std::optional<unsigned long long> seed;

  app.add_option("--config", o.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "seed for every random choice");
  app.add_option("--format", o.format, "output format")->check(CLI::IsMember({"json", "table"}));

  auto add_dataset = [&](CLI::App* sub) { sub->add_option("--dataset", o.dataset, "dataset JSONL")->required(); };
  auto add_encoder = [&](CLI::App* sub) {
    sub->add_option("--encoder", o.encoder, "text representation")
        ->check(CLI::IsMember({"bow", "tfidf", "w2v", "ext"}));
  };
  auto add_classifier = [&](CLI::App* sub) {
    sub->add_option("--classifier", o.classifier, "classifier")->check(CLI::IsMember({"mnb", "gnb", "nb", "lr", "svm", "rf"}));
  };
  auto add_balance = [&](CLI::App* sub) {
    sub->add_option("--balance", o.balance, "class imbalance strategy")
        ->check(CLI::IsMember({"weights", "random", "smote_nearmiss", "none"}));
  };

  auto* ingest = app.add_subcommand("ingest", "raw mail directory -> dataset JSONL");
  ingest->add_option("--input", o.input, "directory of raw messages")->required();
  ingest->add_option("--output", o.output, "dataset JSONL to write")->required();

  auto* cluster = app.add_subcommand("cluster", "dataset -> Ward dendrogram JSON");
  add_dataset(cluster);
  cluster->add_option("--encoder", o.encoder, "bow or tfidf")->check(CLI::IsMember({"bow", "tfidf"}));
  cluster->add_option("--output", o.output, "dendrogram JSON to write")->required();
  cluster->add_flag("--allow-large", o.allow_large, "cluster above the configured document limit");

  auto* serve = app.add_subcommand("serve", "labeling and classification HTTP service");
  serve->add_option("--data-dir", o.data_dir, "directory with datasets and dendrograms")->required();
  serve->add_option("--model", o.model, "pipeline directory for /classify");
  serve->add_option("--port", o.port, "port (0 picks a free one)");

  auto* train = app.add_subcommand("train", "dataset + pipeline -> model directory");
  add_dataset(train);
  add_encoder(train);
  add_classifier(train);
  add_balance(train);
  train->add_option("--model", o.model, "output model directory")->required();

  auto* eval = app.add_subcommand("eval", "stratified k-fold evaluation");
  add_dataset(eval);
  add_encoder(eval);
  add_classifier(eval);
  add_balance(eval);
  eval->add_option("--k", o.k, "folds (default from config)")->check(CLI::Range(2u, 1000000u));
  eval->add_flag("--grid", o.grid, "all 16 encoder x classifier pipelines");
  eval->add_option("--confusion-csv", o.confusion_csv, "write the pooled confusion matrix as CSV");

  auto* predict = app.add_subcommand("predict", "classify one email");
  predict->add_option("--model", o.model, "model directory")->required();
  auto* email = predict->add_option("--email", o.email, "raw RFC 5322 message file");
  auto* text = predict->add_option("--text", o.text, "plain text instead of an email");
  email->excludes(text);
  predict->callback([&] {
    if (o.email.empty() && text->count() == 0) throw CLI::RequiredError("--email or --text");
  });

  auto* baseline = app.add_subcommand("baseline", "18-keyword matching baseline");
  add_dataset(baseline);
  baseline->add_option("--k", o.k, "folds (default from config)")->check(CLI::Range(2u, 1000000u));

  auto* bench = app.add_subcommand("bench", "inference runtime per email");
  bench->add_option("--model", o.model, "model directory")->required();
  add_dataset(bench);

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ST_ERR_USAGE;
  }
  o.seed = seed;
  return dispatch(app.get_subcommands().front()->get_name(), o);
}
