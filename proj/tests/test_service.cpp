#include <doctest.h>

#include <map>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "spamtopic/dataset.hpp"
#include "spamtopic/model_store.hpp"
#include "spamtopic/pipeline.hpp"
#include "spamtopic/service.hpp"
#include "synthetic.hpp"

using namespace spamtopic;
using nlohmann::json;
using testsupport::ScratchDir;

namespace {

std::vector<store::DatasetRecord> corpus(std::size_t n) {
  testsupport::CorpusShape shape;
  shape.classes = 5;
  shape.documents = n;
  shape.imbalance = 5;
  shape.tokens_per_doc = 20;
  return testsupport::synthetic_corpus(shape);
}

struct Running {
  service::Service service;
  httplib::Client client;
  explicit Running(service::ServiceOptions o)
      : service(std::move(o)), client("127.0.0.1", service.start()) {
    client.set_read_timeout(60, 0);
  }
};

service::ServiceOptions options(const std::filesystem::path& dir) {
  service::ServiceOptions o;
  o.data_dir = dir;
  o.config.min_df_en = 1;
  return o;
}

std::pair<int, json> post(httplib::Client& c, const std::string& path, const json& body) {
  auto res = c.Post(path, body.dump(), "application/json");
  REQUIRE(res);
  return {res->status, json::parse(res->body)};
}

std::pair<int, json> get(httplib::Client& c, const std::string& path) {
  auto res = c.Get(path);
  REQUIRE(res);
  return {res->status, json::parse(res->body)};
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("labeling workflow over HTTP") {
    ScratchDir dir("service");
    const auto records = corpus(100);
    store::write_dataset(records, dir.path() / "inbox.jsonl");
    Running run(options(dir.path()));
    auto& c = run.client;

    auto [hs, health] = get(c, "/health");
    CHECK(hs == 200);
    CHECK(health["status"] == "ok");

    CHECK(post(c, "/sessions", {{"dataset", "missing"}}).first == 404);
    CHECK(post(c, "/sessions", {{"dataset", "../etc"}}).first == 422);
    CHECK(post(c, "/sessions", json::array()).first == 422);

    auto [cs, handle] = post(c, "/sessions", {{"dataset", "inbox"}});
    REQUIRE(cs == 200);
    const std::string id = handle["id"];
    CHECK(handle["n_leaves"] == 100);
    CHECK(handle["status"] == "open");
    CHECK(std::filesystem::exists(dir.path() / "inbox.dendrogram.json"));
    CHECK(get(c, "/sessions").second["sessions"].size() == 1);
    CHECK(get(c, "/sessions/nope").first == 404);

    const std::string base = "/sessions/" + id;
    CHECK(get(c, base + "/clusters/0/samples").first == 409);
    CHECK(post(c, base + "/cut", {{"k", 0}}).first == 422);
    CHECK(post(c, base + "/cut", {{"k", 16}, {"height", 1.0}}).first == 422);
    auto [ks, summary] = post(c, base + "/cut", {{"k", 16}});
    REQUIRE(ks == 200);
    CHECK(summary["cluster_count"] == 16);
    REQUIRE(summary["clusters"].size() == 16);
    std::size_t covered = 0;
    std::map<std::size_t, std::size_t> sizes;
    for (const auto& cl : summary["clusters"]) {
      covered += cl["size"].get<std::size_t>();
      sizes[cl["id"]] = cl["size"];
      CHECK(cl["label"].is_null());
      CHECK(cl["top_tokens"].size() <= 10);
    }
    CHECK(covered == 100);

    auto [ss, samples] = get(c, base + "/clusters/0/samples?n=3");
    CHECK(ss == 200);
    CHECK(samples["samples"].size() == std::min<std::size_t>(3, sizes[0]));
    CHECK(get(c, base + "/clusters/0/samples?n=3").second == samples);
    CHECK(get(c, base + "/clusters/16/samples").first == 404);
    CHECK(get(c, base + "/clusters/0/samples?n=x").first == 422);

    auto [ms, merged] = post(c, base + "/merge", {{"clusters", {0, 1}}, {"label", "Pharma"}});
    CHECK(ms == 200);
    CHECK(merged["clusters"][0]["label"] == "Pharma");
    CHECK(merged["clusters"][1]["label"] == "Pharma");
    CHECK(post(c, base + "/merge", {{"clusters", {1, 2}}, {"label", "Other"}}).first == 409);
    CHECK(post(c, base + "/merge", {{"clusters", {99}}, {"label", "Other"}}).first == 404);
    CHECK(post(c, base + "/merge", {{"clusters", {2}}, {"label", ""}}).first == 422);
    CHECK(post(c, base + "/label", {{"cluster", 2}, {"label", "Dating"}}).first == 200);
    CHECK(post(c, base + "/undo", json::object()).first == 200);
    CHECK(get(c, base).second["summary"]["clusters"][2]["label"].is_null());

    for (std::size_t k = 2; k < 15; ++k)
      REQUIRE(post(c, base + "/label", {{"cluster", k}, {"label", "Topic" + std::to_string(k % 4)}}).first == 200);
    auto [es, err] = post(c, base + "/export", json::object());
    CHECK(es == 422);
    CHECK(err["error"].get<std::string>().find("cluster 15") != std::string::npos);

    REQUIRE(post(c, base + "/label", {{"cluster", 15}, {"label", "Topic0"}}).first == 200);
    auto [xs, exported] = post(c, base + "/export", json::object());
    REQUIRE(xs == 200);
    CHECK(post(c, base + "/export", json::object()).second == exported);
    std::map<std::string, std::size_t> expected;
    const auto final_summary = get(c, base).second;
    CHECK(final_summary["status"] == "exported");
    for (const auto& cl : final_summary["summary"]["clusters"]) expected[cl["label"]] += cl["size"].get<std::size_t>();
    std::map<std::string, std::size_t> counts = exported["class_counts"];
    CHECK(counts == expected);
    const auto labeled = store::read_dataset(exported["path"].get<std::string>());
    CHECK(labeled.records.size() == 100);
    std::map<std::string, std::size_t> file_counts;
    for (const auto& r : labeled.records) ++file_counts[*r.label];
    CHECK(file_counts == expected);
    CHECK(post(c, base + "/label", {{"cluster", 0}, {"label", "Late"}}).first == 409);

    CHECK(post(c, "/classify", {{"text", "hello"}}).first == 503);
  }

  TEST_CASE("concurrent conflicting merges") {
    ScratchDir dir("race");
    store::write_dataset(corpus(60), dir.path() / "inbox.jsonl");
    Running run(options(dir.path()));
    const std::string id = post(run.client, "/sessions", {{"dataset", "inbox"}}).second["id"];
    const std::string base = "/sessions/" + id;
    REQUIRE(post(run.client, base + "/cut", {{"k", 8}}).first == 200);
    for (int round = 0; round < 5; ++round) {
      if (round > 0) REQUIRE(post(run.client, base + "/cut", {{"k", 8}}).first == 200);
      int status[2] = {0, 0};
      std::vector<std::thread> threads;
      for (int t = 0; t < 2; ++t) {
        threads.emplace_back([&, t] {
          httplib::Client client("127.0.0.1", run.service.port());
          auto res = client.Post(base + "/merge", json{{"clusters", {3, 4}}, {"label", "L" + std::to_string(t)}}.dump(),
                                 "application/json");
          status[t] = res ? res->status : -1;
        });
      }
      for (auto& th : threads) th.join();
      CHECK(std::min(status[0], status[1]) == 200);
      CHECK(std::max(status[0], status[1]) == 409);
    }
  }

  TEST_CASE("sessions survive a restart") {
    ScratchDir dir("restart");
    store::write_dataset(corpus(50), dir.path() / "inbox.jsonl");
    std::string id;
    json before;
    {
      Running run(options(dir.path()));
      id = post(run.client, "/sessions", {{"dataset", "inbox"}}).second["id"];
      const std::string base = "/sessions/" + id;
      REQUIRE(post(run.client, base + "/cut", {{"k", 6}}).first == 200);
      REQUIRE(post(run.client, base + "/merge", {{"clusters", {0, 5}}, {"label", "A"}}).first == 200);
      REQUIRE(post(run.client, base + "/label", {{"cluster", 2}, {"label", "B"}}).first == 200);
      REQUIRE(post(run.client, base + "/label", {{"cluster", 3}, {"label", "C"}}).first == 200);
      REQUIRE(post(run.client, base + "/undo", json::object()).first == 200);
      before = get(run.client, base).second;
    }
    Running again(options(dir.path()));
    const auto after = get(again.client, "/sessions/" + id).second;
    CHECK(after == before);
    CHECK(after["summary"]["clusters"][3]["label"].is_null());
    const auto second = post(again.client, "/sessions", {{"dataset", "inbox"}}).second;
    CHECK(second["id"] != id);
  }

  TEST_CASE("classification with a loaded model") {
    ScratchDir dir("classify");
    const auto records = corpus(150);
    store::Config cfg;
    const auto spec = eval::make_pipeline_spec(eval::EncoderKind::tfidf, models::Algorithm::logistic, cfg);
    store::save_pipeline(eval::fit_pipeline(spec, records, cfg), dir.path() / "model", cfg);
    auto o = options(dir.path());
    o.model_dir = dir.path() / "model";
    Running run(o);

    auto [ts, byText] = post(run.client, "/classify", {{"text", records[0].merged_text}});
    REQUIRE(ts == 200);
    CHECK(byText["label"] == *records[0].label);
    CHECK(byText["pipeline"] == "tfidf+logistic");
    CHECK(byText["scores"].size() == 5);

    auto [es, byEmail] = post(run.client, "/classify", {{"raw_email", testsupport::slurp(testsupport::fixture("mail/plain.eml"))}});
    CHECK(es == 200);
    CHECK(byEmail["language"] == "en");
    CHECK(byEmail["flags"].size() >= 1);

    CHECK(post(run.client, "/classify",
               {{"raw_email", testsupport::slurp(testsupport::fixture("mail/alternative.eml"))}}).first == 422);
    CHECK(post(run.client, "/classify", json::object()).first == 422);
    auto bad = run.client.Post("/classify", "{oops", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 422);
  }
}
