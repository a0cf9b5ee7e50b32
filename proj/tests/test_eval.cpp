#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "spamtopic/pipeline.hpp"
#include "stub_provider.hpp"
#include "synthetic.hpp"

using namespace spamtopic;
using namespace spamtopic::eval;

namespace {

const std::vector<std::string> kTrue{"A", "A", "B", "B", "C"};
const std::vector<std::string> kPred{"A", "B", "B", "B", "C"};

ConfusionMatrix random_matrix(std::mt19937_64& rng) {
  ConfusionMatrix cm;
  const std::size_t k = 1 + rng() % 9;
  for (std::size_t c = 0; c < k; ++c) cm.classes.push_back("c" + std::to_string(c));
  cm.counts.assign(k, std::vector<std::size_t>(k, 0));
  for (auto& row : cm.counts)
    for (auto& v : row) v = rng() % 4 == 0 ? 0 : rng() % 30;
  if (cm.total() == 0) cm.counts[0][0] = 1;
  return cm;
}

store::DatasetRecord record(std::string id, std::vector<std::string> tokens, std::string label) {
  store::DatasetRecord r;
  r.id = std::move(id);
  r.language = Language::en;
  for (const auto& t : tokens) r.merged_text += (r.merged_text.empty() ? "" : " ") + t;
  r.tokens = std::move(tokens);
  r.label = std::move(label);
  return r;
}

std::vector<store::DatasetRecord> small_corpus(std::size_t docs, std::uint64_t seed) {
  testsupport::CorpusShape shape;
  shape.classes = 4;
  shape.documents = docs;
  shape.imbalance = 4.0;
  shape.tokens_per_doc = 20;
  shape.seed = seed;
  return testsupport::synthetic_corpus(shape);
}

}  // namespace

TEST_SUITE("eval") {
  TEST_CASE("confusion tally") {
    const auto cm = confusion(kTrue, kPred, {"A", "B", "C"});
    CHECK(cm.counts == std::vector<std::vector<std::size_t>>{{1, 1, 0}, {0, 2, 0}, {0, 0, 1}});
    const auto perfect = confusion(kTrue, kTrue, {"A", "B", "C"});
    CHECK(perfect.counts == std::vector<std::vector<std::size_t>>{{2, 0, 0}, {0, 2, 0}, {0, 0, 1}});
    const std::vector<std::string> none;
    CHECK(confusion(none, none, {"A"}).total() == 0);
    CHECK_THROWS_AS(confusion(kTrue, std::vector<std::string>{"A"}, {"A", "B", "C"}), Error);
    CHECK_THROWS_AS(confusion(kTrue, kPred, {"A", "B"}), Error);
  }

  TEST_CASE("worked metrics example") {
    const auto r = summarize(confusion(kTrue, kPred, {"A", "B", "C"}));
    CHECK(r.macro.precision == doctest::Approx(0.8889).epsilon(1e-4));
    CHECK(r.macro.recall == doctest::Approx(0.8333).epsilon(1e-4));
    CHECK(r.macro.f1 == doctest::Approx(0.8222).epsilon(1e-4));
    CHECK(r.accuracy == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.micro.precision == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.micro.recall == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(r.weighted.f1 == doctest::Approx(0.7867).epsilon(1e-4));
    CHECK(r.per_class[0].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    // Macro F1 is the mean of per-class F1, not the F1 of macro P and R.
    const double harmonic = 2 * r.macro.precision * r.macro.recall / (r.macro.precision + r.macro.recall);
    CHECK(std::abs(r.macro.f1 - harmonic) > 1e-3);

    const auto perfect = summarize(confusion(kTrue, kTrue, {"A", "B", "C"}));
    CHECK(perfect.macro.f1 == 1.0);
    CHECK(perfect.accuracy == 1.0);
    const std::vector<std::string> one{"X", "X"};
    const auto single = summarize(confusion(one, one, {"X"}));
    CHECK(single.macro.f1 == 1.0);
    CHECK(single.micro.f1 == 1.0);
  }

  TEST_CASE("summarize matches brute force on random matrices") {
    std::mt19937_64 rng(77);
    for (int iter = 0; iter < 100; ++iter) {
      const auto cm = random_matrix(rng);
      const auto r = summarize(cm);
      const auto o = oracle::brute_metrics(cm);
      for (std::size_t c = 0; c < cm.classes.size(); ++c) {
        CHECK(std::abs(r.per_class[c].precision - o.precision[c]) <= 1e-12);
        CHECK(std::abs(r.per_class[c].recall - o.recall[c]) <= 1e-12);
        CHECK(std::abs(r.per_class[c].f1 - o.f1[c]) <= 1e-12);
      }
      CHECK(std::abs(r.macro.precision - o.macro_p) <= 1e-12);
      CHECK(std::abs(r.macro.recall - o.macro_r) <= 1e-12);
      CHECK(std::abs(r.macro.f1 - o.macro_f1) <= 1e-12);
      CHECK(std::abs(r.weighted.f1 - o.weighted_f1) <= 1e-12);
      CHECK(std::abs(r.accuracy - o.accuracy) <= 1e-12);
      CHECK(std::abs(r.micro.precision - r.accuracy) <= 1e-12);
      CHECK(std::abs(r.micro.recall - r.accuracy) <= 1e-12);
    }
  }

  TEST_CASE("stratified folds") {
    const std::vector<std::string> one(10, "A");
    const auto ten = stratified_kfold(one, 10, 1);
    for (const auto& f : ten) CHECK(f.size() == 1);

    std::vector<std::string> y(10, "A");
    y.insert(y.end(), 5, "B");
    for (const auto& fold : stratified_kfold(y, 5, 3)) {
      std::map<std::string, int> c;
      for (auto i : fold) ++c[y[i]];
      CHECK(c["A"] == 2);
      CHECK(c["B"] == 1);
    }

    std::mt19937_64 rng(4);
    for (int iter = 0; iter < 50; ++iter) {
      std::vector<std::string> labels;
      for (std::size_t i = 0, n = 20 + rng() % 200; i < n; ++i) labels.push_back(std::to_string(rng() % 5));
      const std::size_t k = 2 + rng() % 9;
      const auto folds = stratified_kfold(labels, k, rng());
      std::vector<int> seen(labels.size(), 0);
      for (const auto& f : folds)
        for (auto i : f) ++seen[i];
      CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
      std::map<std::string, std::vector<int>> per;
      for (std::size_t f = 0; f < folds.size(); ++f)
        for (auto i : folds[f]) {
          auto& v = per[labels[i]];
          v.resize(k, 0);
          ++v[f];
        }
      for (auto& [c, v] : per) {
        v.resize(k, 0);
        CHECK(*std::max_element(v.begin(), v.end()) - *std::min_element(v.begin(), v.end()) <= 1);
      }
    }
    CHECK_THROWS_AS(stratified_kfold(std::vector<std::string>{"a"}, 2, 1), Error);
  }

  TEST_CASE("keyword baseline") {
    using textprep::TokenDoc;
    std::vector<TokenDoc> docs{{"1", Language::en, {"cash", "win"}},
                               {"2", Language::en, {"cash", "win"}},
                               {"3", Language::en, {"meeting"}}};
    std::vector<std::string> y{"A", "A", "B"};
    const auto m = keyword_baseline_train(docs, y);
    CHECK(m.keywords.at("A") == std::vector<std::string>{"cash", "win"});
    CHECK(m.keywords.at("B") == std::vector<std::string>{"meeting"});
    CHECK(keyword_baseline_predict(m, {"x", Language::en, {"cash", "meeting", "win"}}) == "A");
    CHECK(keyword_baseline_predict(m, {"x", Language::en, {"nothing"}}) == "A");
    CHECK(keyword_baseline_predict(m, {"x", Language::en, {"meeting"}}) == "B");

    std::vector<TokenDoc> shuffled{docs[2], docs[1], docs[0]};
    std::vector<std::string> ys{"B", "A", "A"};
    CHECK(keyword_baseline_train(shuffled, ys).keywords == m.keywords);

    std::vector<TokenDoc> many;
    std::vector<std::string> yl;
    for (int i = 0; i < 30; ++i) {
      std::vector<std::string> t{"always"};
      for (int w = 0; w < 25; ++w)
        if ((i + w) % 3 == 0) t.push_back("w" + std::to_string(w));
      many.push_back({"", Language::en, t});
      yl.push_back("C");
    }
    const auto top = keyword_baseline_train(many, yl);
    CHECK(top.keywords.at("C").size() == 18);
    CHECK(top.keywords.at("C").front() == "always");
  }

  TEST_CASE("cross validation on separable and shuffled corpora") {
    std::vector<store::DatasetRecord> sep;
    for (int i = 0; i < 80; ++i) {
      const int c = i % 4;
      sep.push_back(record("d" + std::to_string(i), {"tok" + std::string(1, 'a' + c), "word" + std::string(1, 'a' + c)},
                           "c" + std::to_string(c)));
    }
    store::Config cfg;
    cfg.min_df_en = 1;
    const auto spec = make_pipeline_spec(EncoderKind::tfidf, models::Algorithm::logistic, cfg);
    const auto cv = cross_validate(spec, sep, cfg, 5, 1);
    CHECK(cv.report.accuracy == 1.0);

    auto noisy = small_corpus(400, 3);
    std::mt19937_64 rng(1);
    std::vector<std::string> labels;
    for (std::size_t i = 0; i < noisy.size(); ++i) labels.push_back("c" + std::to_string(i % 4));
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i].label = labels[i];
    const auto null = cross_validate(spec, noisy, store::Config{}, 5, 1);
    CHECK(null.report.accuracy == doctest::Approx(0.25).epsilon(0.4));
    CHECK(std::abs(null.report.accuracy - 0.25) <= 0.1);

    const auto again = cross_validate(spec, noisy, store::Config{}, 5, 1);
    CHECK(again.report.confusion == null.report.confusion);
  }

  TEST_CASE("no train/test leakage into fold vocabularies") {
    auto corpus = small_corpus(300, 5);
    store::Config cfg;
    cfg.min_df_en = 1;
    const std::size_t k = 10;
    const auto folds = stratified_kfold(
        [&] {
          std::vector<std::string> y;
          for (const auto& r : corpus) y.push_back(*r.label);
          return y;
        }(),
        k, 1);
    std::vector<std::string> sentinels;
    for (std::size_t f = 0; f < k; ++f) {
      const std::string s = "sentinel" + std::string(1, static_cast<char>('a' + f)) + "zzq";
      corpus[folds[f].front()].tokens.push_back(s);
      sentinels.push_back(s);
    }
    for (auto kind : {EncoderKind::bow, EncoderKind::tfidf}) {
      std::size_t visited = 0, present_elsewhere = 0;
      const auto spec = make_pipeline_spec(kind, models::Algorithm::multinomial_nb, cfg);
      cross_validate(spec, corpus, cfg, k, 1, [&](const FoldContext& ctx) {
        ++visited;
        CHECK(ctx.test.size() == folds[ctx.fold].size());
        CHECK(ctx.encoder.vocab.find(sentinels[ctx.fold]) == -1);
        for (std::size_t g = 0; g < k; ++g)
          if (g != ctx.fold && ctx.encoder.vocab.find(sentinels[g]) >= 0) ++present_elsewhere;
      });
      CHECK(visited == k);
      // Each sentinel is training data in the other nine folds.
      CHECK(present_elsewhere == k * (k - 1));
    }
  }

  TEST_CASE("grid shape, ext rows and baseline") {
    const auto corpus = small_corpus(160, 9);
    store::Config cfg;
    cfg.rf_trees = 10;
    cfg.embedding.epochs = 2;
    cfg.embedding.dimension = 16;
    auto grid = run_grid(corpus, cfg, 3, 1);
    REQUIRE(grid.rows.size() == 16);
    const char* order[] = {"tfidf", "bow", "w2v", "ext"};
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(to_string(grid.rows[i].encoder) == order[i / 4]);
      CHECK(grid.rows[i].skipped == (i >= 12));
    }
    CHECK(grid.rows[1].algorithm == models::Algorithm::multinomial_nb);
    CHECK(grid.rows[9].algorithm == models::Algorithm::gaussian_nb);

    testsupport::StubProvider provider;
    cfg.embedding_provider_url = provider.url();
    grid = run_grid(corpus, cfg, 3, 1);
    for (const auto& row : grid.rows) {
      CHECK_FALSE(row.skipped);
      REQUIRE(row.report);
      CHECK(row.report->runtime_ms_per_email);
    }
    CHECK(provider.requests() > 0);
    CHECK(grid.baseline.model.top == 18);
    const auto json = grid_to_json(grid);
    CHECK(json.find("\"keyword_baseline\"") != std::string::npos);
    CHECK(grid_to_table(grid).find("tfidf+lr") != std::string::npos);
  }

  TEST_CASE("pipeline fit, predict and bench") {
    const auto corpus = small_corpus(120, 2);
    store::Config cfg;
    const auto spec = make_pipeline_spec(EncoderKind::tfidf, models::Algorithm::logistic, cfg);
    CHECK(spec.id() == "tfidf+logistic");
    const auto p = fit_pipeline(spec, corpus, cfg);
    std::size_t right = 0;
    for (const auto& r : corpus) right += predict_record(p, r).label == *r.label ? 1 : 0;
    CHECK(right > corpus.size() * 9 / 10);
    CHECK(predict_text(p, corpus[0].merged_text).label == predict_record(p, corpus[0]).label);
    const auto bench = bench_runtime(p, corpus);
    CHECK(bench.pipeline == "tfidf+logistic");
    CHECK(bench.documents == corpus.size());
    CHECK(bench.mean_ms > 0.0);
    CHECK(bench.p95_ms >= 0.0);

    auto mixed = corpus;
    mixed[0].language = Language::es;
    CHECK_THROWS_AS(dataset_language(mixed), Error);
    auto unlabeled = corpus;
    unlabeled[3].label.reset();
    CHECK_THROWS_AS(fit_pipeline(spec, unlabeled, cfg), Error);
    CHECK_THROWS_AS(fit_encoder(EncoderKind::ext, corpus, cfg), Error);
  }

  TEST_CASE("balance strategies run through cross validation") {
    const auto corpus = small_corpus(200, 4);
    store::Config cfg;
    for (auto strategy : {balance::Strategy::none, balance::Strategy::weights, balance::Strategy::random,
                          balance::Strategy::smote_nearmiss}) {
      auto spec = make_pipeline_spec(EncoderKind::tfidf, models::Algorithm::logistic, cfg);
      spec.balance = strategy;
      const auto a = cross_validate(spec, corpus, cfg, 4, 2);
      const auto b = cross_validate(spec, corpus, cfg, 4, 2);
      CHECK(a.report.confusion == b.report.confusion);
      CHECK(a.report.macro.f1 > 0.8);
    }
  }

  TEST_CASE("report rendering") {
    const auto r = summarize(confusion(kTrue, kPred, {"A", "B", "C"}));
    CHECK(report_to_table(r).find("macro") != std::string::npos);
    CHECK(confusion_to_csv(r.confusion) == "true\\predicted,A,B,C\nA,1,1,0\nB,0,2,0\nC,0,0,1\n");
    CHECK(report_to_json(r).find("\"weighted\"") != std::string::npos);
  }
}
