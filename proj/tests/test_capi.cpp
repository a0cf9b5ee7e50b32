#include <doctest.h>

#include <cstring>
#include <memory>
#include <string>

#include "fixtures.hpp"
#include "spamtopic/spamtopic.h"

using testsupport::ScratchDir;

namespace {

struct Owned {
  char* s = nullptr;
  ~Owned() { st_string_free(s); }
  std::string str() const { return s ? s : ""; }
  bool has(const std::string& needle) const { return str().find(needle) != std::string::npos; }
};

struct Ctx {
  st_context* ctx = nullptr;
  explicit Ctx(const char* overrides = R"({"vocabulary":{"min_df":{"en":1}},"eval":{"folds":3}})") {
    REQUIRE(st_context_create(nullptr, overrides, &ctx) == ST_OK);
  }
  ~Ctx() { st_context_destroy(ctx); }
};

// Three topics with disjoint vocabularies plus shared filler words.
std::string topic_dataset(int per_class) {
  const char* topics[3][4] = {{"viagra", "pharmacy", "pills", "dosage"},
                              {"lottery", "jackpot", "winner", "prize"},
                              {"dating", "singles", "romance", "lonely"}};
  const char* names[3] = {"Pharma", "Lottery", "Dating"};
  const char* filler[4] = {"click", "today", "offer", "free"};
  std::string out;
  unsigned state = 12345;
  auto next = [&] { return (state = state * 1103515245u + 12345u) >> 16; };
  for (int i = 0; i < per_class * 3; ++i) {
    const int c = i % 3;
    std::string text, tokens;
    for (int w = 0; w < 8; ++w) {
      const char* word = w % 2 ? filler[next() % 4] : topics[c][next() % 4];
      text += std::string(text.empty() ? "" : " ") + word;
      tokens += std::string(tokens.empty() ? "" : ",") + "\"" + word + "\"";
    }
    out += "{\"id\":\"m" + std::to_string(i) + "\",\"language\":\"en\",\"merged_text\":\"" + text + "\",\"tokens\":[" +
           tokens + "],\"label\":\"" + names[c] + "\",\"flags\":[\"plain_source\"]}\n";
  }
  return out;
}

void write(const std::filesystem::path& p, const std::string& content) {
  std::ofstream(p, std::ios::binary) << content;
}

}  // namespace

TEST_CASE("status codes and NULL handling") {
  CHECK(std::strlen(st_version()) > 0);
  CHECK(st_context_create(nullptr, nullptr, nullptr) == ST_ERR_USAGE);
  CHECK(std::string(st_last_error(nullptr)) == "null context");

  st_context* ctx = nullptr;
  CHECK(st_context_create(nullptr, "{\"bogus\":1}", &ctx) == ST_ERR_VALIDATION);
  REQUIRE(ctx);
  CHECK(std::string(st_last_error(ctx)).find("bogus") != std::string::npos);
  st_context_destroy(ctx);

  ctx = nullptr;
  CHECK(st_context_create("/nonexistent/config.json", nullptr, &ctx) == ST_ERR_IO);
  st_context_destroy(ctx);

  Ctx c;
  CHECK(std::string(st_last_error(c.ctx)).empty());
  st_dataset* ds = nullptr;
  CHECK(st_dataset_load(c.ctx, nullptr, &ds) == ST_ERR_USAGE);
  CHECK(st_dataset_load(c.ctx, "/nonexistent.jsonl", &ds) == ST_ERR_IO);
  CHECK(ds == nullptr);
  CHECK(std::string(st_last_error(c.ctx)).find("nonexistent") != std::string::npos);
  CHECK(st_dataset_load(nullptr, "x", &ds) == ST_ERR_USAGE);
  CHECK(st_dataset_size(nullptr) == 0);
  Owned out;
  CHECK(st_train(c.ctx, nullptr, "tfidf", "lr", "/tmp/x", &out.s) == ST_ERR_USAGE);
  CHECK(st_predict_text(c.ctx, nullptr, "hi", &out.s) == ST_ERR_USAGE);
  CHECK(st_model_load(c.ctx, "/nonexistent-model", nullptr) == ST_ERR_USAGE);
  st_model* m = nullptr;
  CHECK(st_model_load(c.ctx, "/nonexistent-model", &m) == ST_ERR_IO);
  CHECK(out.s == nullptr);

  Owned cfg;
  REQUIRE(st_context_config(c.ctx, &cfg.s) == ST_OK);
  CHECK(cfg.has("\"en\": 1"));

  st_dataset_destroy(nullptr);
  st_model_destroy(nullptr);
  st_string_free(nullptr);
}

TEST_CASE("train, reload, predict, evaluate") {
  ScratchDir dir("capi");
  write(dir.path() / "d.jsonl", topic_dataset(20) + "{broken\n");
  Ctx c;
  st_dataset* ds = nullptr;
  REQUIRE(st_dataset_load(c.ctx, (dir.path() / "d.jsonl").c_str(), &ds) == ST_OK);
  std::unique_ptr<st_dataset, void (*)(st_dataset*)> guard(ds, st_dataset_destroy);
  CHECK(st_dataset_size(ds) == 60);
  Owned errors;
  REQUIRE(st_dataset_errors(c.ctx, ds, &errors.s) == ST_OK);
  CHECK(errors.has("\"line\": 61"));

  Owned bad;
  CHECK(st_train(c.ctx, ds, "tfidf", "xgboost", "/tmp/x", &bad.s) == ST_ERR_USAGE);
  CHECK(st_train(c.ctx, ds, "glove", "lr", "/tmp/x", &bad.s) == ST_ERR_USAGE);
  CHECK(st_train(c.ctx, ds, "w2v", "mnb", "/tmp/x", &bad.s) == ST_ERR_VALIDATION);

  const auto model_dir = dir.path() / "model";
  Owned summary;
  REQUIRE(st_train(c.ctx, ds, "tfidf", "lr", model_dir.c_str(), &summary.s) == ST_OK);
  CHECK(summary.has("tfidf+logistic"));
  CHECK(summary.has("\"Dating\""));

  st_model* model = nullptr;
  REQUIRE(st_model_load(c.ctx, model_dir.c_str(), &model) == ST_OK);
  std::unique_ptr<st_model, void (*)(st_model*)> mguard(model, st_model_destroy);
  Owned info, pred, pred2;
  REQUIRE(st_model_info(c.ctx, model, &info.s) == ST_OK);
  CHECK(info.has("\"language\": \"en\""));
  REQUIRE(st_predict_text(c.ctx, model, "Winner! Claim the lottery jackpot prize", &pred.s) == ST_OK);
  CHECK(pred.has("\"label\": \"Lottery\""));

  const std::string eml = testsupport::slurp(testsupport::fixture("mail/plain.eml"));
  REQUIRE(st_predict_email(c.ctx, model, reinterpret_cast<const unsigned char*>(eml.data()), eml.size(), &pred2.s) ==
          ST_OK);
  CHECK(pred2.has("\"flags\""));
  Owned es;
  const std::string spanish = testsupport::slurp(testsupport::fixture("mail/alternative.eml"));
  CHECK(st_predict_email(c.ctx, model, reinterpret_cast<const unsigned char*>(spanish.data()), spanish.size(), &es.s) ==
        ST_ERR_VALIDATION);
  CHECK(std::string(st_last_error(c.ctx)).find("language") != std::string::npos);

  Owned report, table, csv_report;
  REQUIRE(st_evaluate(c.ctx, ds, "tfidf", "nb", 3, ST_FORMAT_JSON, nullptr, &report.s) == ST_OK);
  CHECK(report.has("\"pipeline\": \"tfidf+multinomial_nb\""));
  CHECK(report.has("\"accuracy\": 1.0"));
  REQUIRE(st_evaluate(c.ctx, ds, "bow", "rf", 0, ST_FORMAT_TABLE, (dir.path() / "cm.csv").c_str(), &table.s) == ST_OK);
  CHECK(table.has("3-fold"));
  CHECK(testsupport::slurp(dir.path() / "cm.csv").rfind("true\\predicted,Dating,Lottery,Pharma\n", 0) == 0);

  Owned baseline, bench;
  REQUIRE(st_baseline(c.ctx, ds, 3, ST_FORMAT_JSON, &baseline.s) == ST_OK);
  CHECK(baseline.has("\"keywords_per_class\": 18"));
  REQUIRE(st_bench(c.ctx, model, ds, ST_FORMAT_JSON, &bench.s) == ST_OK);
  CHECK(bench.has("\"documents\": 60"));

  Owned dendro;
  REQUIRE(st_cluster(c.ctx, ds, "bow", (dir.path() / "tree.json").c_str(), 0, &dendro.s) == ST_OK);
  CHECK(dendro.has("\"n_leaves\": 60"));
  CHECK(dendro.has("\"merges\": 59"));
  Owned nope;
  CHECK(st_cluster(c.ctx, ds, "w2v", (dir.path() / "t2.json").c_str(), 0, &nope.s) == ST_ERR_USAGE);
  Ctx tight(R"({"vocabulary":{"min_df":{"en":1}},"cluster":{"max_docs":10}})");
  CHECK(st_cluster(tight.ctx, ds, "bow", (dir.path() / "t3.json").c_str(), 0, &nope.s) == ST_ERR_VALIDATION);
  Owned large;
  CHECK(st_cluster(tight.ctx, ds, "bow", (dir.path() / "t3.json").c_str(), 1, &large.s) == ST_OK);
}

TEST_CASE("ingest a directory of messages") {
  ScratchDir dir("capi-ingest");
  std::filesystem::create_directories(dir.path() / "in");
  std::filesystem::copy(testsupport::fixture("mail/plain.eml"), dir.path() / "in" / "a.eml");
  std::filesystem::copy(testsupport::fixture("mail/alternative.eml"), dir.path() / "in" / "b.eml");
  write(dir.path() / "in" / "c.eml", "");
  Ctx c;
  Owned report;
  REQUIRE(st_ingest_directory(c.ctx, (dir.path() / "in").c_str(), (dir.path() / "out.jsonl").c_str(), &report.s) ==
          ST_OK);
  CHECK(report.has("\"input_files\": 3"));
  CHECK(report.has("\"accepted\": 2"));
  CHECK(report.has("\"es\": 1"));
  CHECK(report.has("\"id\": \"c.eml\""));
  CHECK(testsupport::lines(dir.path() / "out.jsonl").size() == 2);
  Owned missing;
  CHECK(st_ingest_directory(c.ctx, "/nonexistent-dir", (dir.path() / "x.jsonl").c_str(), &missing.s) == ST_ERR_IO);
}

TEST_CASE("server lifecycle") {
  ScratchDir dir("capi-server");
  Ctx c;
  st_server* server = nullptr;
  REQUIRE(st_server_create(c.ctx, dir.path().c_str(), nullptr, 0, &server) == ST_OK);
  int port = 0;
  REQUIRE(st_server_start(c.ctx, server, &port) == ST_OK);
  CHECK(port > 0);
  st_server_stop(server);
  st_server_wait(server);
  st_server_destroy(server);
  st_server* broken = nullptr;
  CHECK(st_server_create(c.ctx, dir.path().c_str(), "/nonexistent-model", 0, &broken) == ST_ERR_IO);
  CHECK(broken == nullptr);
}
