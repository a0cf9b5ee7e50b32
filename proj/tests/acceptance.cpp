// Runs every primary acceptance criterion and prints one PASS/FAIL line each.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "process.hpp"
#include "spamtopic/balance.hpp"
#include "spamtopic/cluster.hpp"
#include "spamtopic/dataset.hpp"
#include "spamtopic/html.hpp"
#include "spamtopic/ingest.hpp"
#include "spamtopic/model_store.hpp"
#include "spamtopic/models.hpp"
#include "spamtopic/pipeline.hpp"
#include "stub_provider.hpp"
#include "synthetic.hpp"

using namespace spamtopic;
using nlohmann::json;
using oracle::sparse;
using testsupport::ScratchDir;

namespace {

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    ++checks_;
    if (!ok && failures_.size() < 5) failures_.push_back(what);
    if (!ok) ++failed_;
  }
  void near(double got, double want, double tol, const std::string& what) {
    std::ostringstream s;
    s.precision(12);
    s << what << ": got " << got << ", want " << want << " +/- " << tol;
    expect(std::abs(got - want) <= tol, s.str());
  }
  std::size_t failed() const { return failed_; }
  std::size_t checks() const { return checks_; }
  const std::vector<std::string>& failures() const { return failures_; }
  std::vector<std::string> notes;

 private:
  std::size_t checks_ = 0, failed_ = 0;
  std::vector<std::string> failures_;
};

std::vector<vectorize::SparseVector> rows(const oracle::Points& p) {
  std::vector<vectorize::SparseVector> out;
  for (const auto& r : p) out.push_back(sparse(r));
  return out;
}

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void ward_oracle(Checker& c) {
  std::mt19937_64 rng(2024);
  const auto start = std::chrono::steady_clock::now();
  for (int set = 0; set < 30; ++set) {
    const std::size_t n = 2 + rng() % 49, d = 1 + rng() % 20;
    const auto P = oracle::random_points(rng, n, d);
    const auto got = cluster::ward_agglomerate(rows(P));
    const auto want = oracle::naive_ward(P);
    c.expect(got.merges.size() == want.merges.size(), "merge count, set " + std::to_string(set));
    for (std::size_t i = 0; i < std::min(got.merges.size(), want.merges.size()); ++i) {
      const auto& g = got.merges[i];
      const auto& w = want.merges[i];
      const std::string where = "set " + std::to_string(set) + " merge " + std::to_string(i);
      c.expect(g.left == w.left && g.right == w.right && g.size == w.size, where + " pair");
      c.expect(std::abs(g.height - w.height) <= 1e-9 * std::max(1.0, w.height), where + " height");
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 10.0, "30 datasets took " + fmt(secs, 2) + " s");
  c.notes.push_back("30 datasets in " + fmt(secs, 2) + " s including the oracle");
}

void metrics_oracle(Checker& c) {
  const std::vector<std::string> t{"A", "A", "B", "B", "C"}, p{"A", "B", "B", "B", "C"};
  const auto ex = eval::summarize(eval::confusion(t, p, {"A", "B", "C"}));
  c.near(ex.macro.f1, 37.0 / 45.0, 1e-12, "worked macro F1");
  c.near(ex.macro.f1, 0.8222, 5e-5, "worked macro F1 (4 dp)");
  c.near(ex.accuracy, 0.8, 1e-12, "worked accuracy");
  std::mt19937_64 rng(77);
  for (int iter = 0; iter < 100; ++iter) {
    eval::ConfusionMatrix cm;
    const std::size_t k = 1 + rng() % 9;
    for (std::size_t i = 0; i < k; ++i) cm.classes.push_back("c" + std::to_string(i));
    cm.counts.assign(k, std::vector<std::size_t>(k, 0));
    for (auto& row : cm.counts)
      for (auto& v : row) v = rng() % 4 == 0 ? 0 : rng() % 30;
    if (cm.total() == 0) cm.counts[0][0] = 1;
    const auto r = eval::summarize(cm);
    const auto o = oracle::brute_metrics(cm);
    const std::string at = "matrix " + std::to_string(iter);
    for (std::size_t i = 0; i < k; ++i) {
      c.near(r.per_class[i].precision, o.precision[i], 1e-12, at + " precision");
      c.near(r.per_class[i].recall, o.recall[i], 1e-12, at + " recall");
      c.near(r.per_class[i].f1, o.f1[i], 1e-12, at + " f1");
    }
    c.near(r.macro.precision, o.macro_p, 1e-12, at + " macro P");
    c.near(r.macro.recall, o.macro_r, 1e-12, at + " macro R");
    c.near(r.macro.f1, o.macro_f1, 1e-12, at + " macro F1");
    c.near(r.weighted.f1, o.weighted_f1, 1e-12, at + " weighted F1");
    c.near(r.micro.f1, o.micro_f1, 1e-12, at + " micro F1");
    c.near(r.accuracy, o.accuracy, 1e-12, at + " accuracy");
    c.near(r.micro.precision, r.accuracy, 1e-12, at + " micro P = accuracy");
    c.near(r.micro.recall, r.accuracy, 1e-12, at + " micro R = accuracy");
  }
}

void nb_oracle(Checker& c) {
  const oracle::Points X{{1, 1, 0, 0, 0}, {1, 0, 1, 0, 0}, {0, 0, 0, 1, 1}};
  const std::vector<std::string> y{"A", "A", "B"};
  const auto m = models::train_multinomial_nb(rows(X), y, 1.0);
  const auto jll = models::joint_log_likelihood(m, sparse({1, 0, 0, 0, 0}));
  c.near(jll[0], std::log(2.0 / 9.0), 1e-9, "log joint A");
  c.near(jll[1], std::log(1.0 / 21.0), 1e-9, "log joint B");
  c.near(std::exp(jll[0]), 0.2222, 5e-5, "joint A");
  c.near(std::exp(jll[1]), 0.0476, 5e-5, "joint B");
  c.expect(models::predict(m, sparse({1, 0, 0, 0, 0})).label == "A", "hand example predicts A");
}

void lr_gradient(Checker& c) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g;
  double worst = 0;
  for (int set = 0; set < 3; ++set) {
    const std::size_t n = 20 + rng() % 30, d = 2 + rng() % 8;
    const auto X = rows(oracle::random_points(rng, n, d));
    models::LogisticObjective obj;
    obj.X = X;
    obj.c = set == 2 ? 1000.0 : 1.0 + set * 9.0;
    obj.dimension = d;
    for (std::size_t i = 0; i < n; ++i) {
      obj.y.push_back(rng() % 2 ? 1.0 : -1.0);
      obj.sample_weight.push_back(0.5 + static_cast<double>(rng() % 4));
    }
    for (int point = 0; point < 20; ++point) {
      std::vector<double> theta(d + 1), grad(d + 1);
      for (auto& t : theta) t = g(rng) * 0.5;
      obj.evaluate(theta, grad);
      double diff = 0, na = 0, nn = 0;
      for (std::size_t j = 0; j <= d; ++j) {
        auto plus = theta, minus = theta;
        plus[j] += 1e-5;
        minus[j] -= 1e-5;
        const double numeric = (obj.evaluate(plus, {}) - obj.evaluate(minus, {})) / 2e-5;
        diff += (grad[j] - numeric) * (grad[j] - numeric);
        na += grad[j] * grad[j];
        nn += numeric * numeric;
      }
      worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nn), 1e-12}));
    }
  }
  c.expect(worst < 1e-4, "max relative gradient error " + std::to_string(worst));
  char buf[64];
  std::snprintf(buf, sizeof buf, "max relative error %.2e", worst);
  c.notes.push_back(buf);
}

void imbalance(Checker& c) {
  std::vector<std::string> y;
  y.insert(y.end(), 17, "Pharmacy");
  y.insert(y.end(), 7924, "Dating");
  const std::size_t rest = 14479 - 17 - 7924;
  for (std::size_t k = 0; k < 9; ++k) y.insert(y.end(), rest / 9 + (k < rest % 9 ? 1 : 0), "c" + std::to_string(k));
  const auto w = balance::compute_class_weights(y);
  c.near(w.at("Pharmacy"), 77.4278, 5e-5, "Pharmacy weight");
  c.near(w.at("Dating"), 0.16611, 5e-6, "Dating weight");
  std::map<std::string, std::size_t> n;
  for (const auto& l : y) ++n[l];
  double total = 0;
  for (const auto& [cls, cnt] : n) total += w.at(cls) * static_cast<double>(cnt);
  c.near(total, 14479.0, 1e-8, "sum w_c n_c");

  std::mt19937_64 rng(17);
  std::normal_distribution<double> g;
  auto labeled = [&](const std::map<std::string, std::size_t>& sizes, std::size_t d) {
    std::pair<std::vector<vectorize::SparseVector>, std::vector<std::string>> out;
    for (const auto& [label, count] : sizes)
      for (std::size_t i = 0; i < count; ++i) {
        std::vector<double> v(d);
        for (auto& x : v) x = rng() % 3 == 0 ? 0.0 : g(rng);
        out.first.push_back(sparse(v));
        out.second.push_back(label);
      }
    return out;
  };
  std::size_t synthetics = 0;
  double worst = 0;
  while (synthetics < 1000) {
    const auto [X, yy] = labeled({{"a", 2 + rng() % 8}, {"b", 2 + rng() % 8}, {"c", 20}}, 1 + rng() % 6);
    const auto out = balance::smote_oversample(X, yy, {{{"a", 20}, {"b", 20}, {"c", 20}}, rng()});
    for (std::size_t i = 0; i < out.X.size(); ++i) {
      const auto& p = out.provenance[i];
      if (p.second < 0) continue;
      const auto a = static_cast<std::size_t>(p.first), b = static_cast<std::size_t>(p.second);
      c.expect(yy[a] == out.y[i] && yy[b] == out.y[i], "synthetic parents share its class");
      worst = std::max(worst, oracle::segment_residual(out.X[i], X[a], X[b]));
      ++synthetics;
    }
  }
  c.expect(worst < 1e-9, "SMOTE convex residual " + std::to_string(worst));

  const std::vector<vectorize::SparseVector> NX{sparse({0, 0}), sparse({1, 0}), sparse({5, 0}), sparse({9, 0})};
  const std::vector<std::string> ny{"min", "maj", "maj", "maj"};
  const auto kept = balance::nearmiss_undersample(NX, ny, {{{"min", 1}, {"maj", 1}}, 1}, 1);
  bool closest = kept.y.size() == 2;
  for (std::size_t i = 0; i < kept.y.size(); ++i)
    if (kept.y[i] == "maj") closest = closest && oracle::dense(kept.X[i]) == std::vector<double>{1.0, 0.0};
  c.expect(closest, "NearMiss-1 keeps the majority point nearest the minority");

  const auto [X, yy] = labeled({{"a", 5}, {"b", 25}, {"c", 11}}, 5);
  const auto plan = balance::default_plan(yy, 77);
  auto same = [](const balance::Resampled& a, const balance::Resampled& b) { return a.X == b.X && a.y == b.y; };
  c.expect(same(balance::random_rebalance(X, yy, plan), balance::random_rebalance(X, yy, plan)), "random repeatable");
  c.expect(same(balance::smote_oversample(X, yy, plan), balance::smote_oversample(X, yy, plan)), "smote repeatable");
  const balance::ResamplePlan shrink{{{"a", 5}, {"b", 5}, {"c", 5}}, 77};
  c.expect(same(balance::nearmiss_undersample(X, yy, shrink), balance::nearmiss_undersample(X, yy, shrink)),
           "nearmiss repeatable");
  c.expect(same(balance::smote_nearmiss(X, yy, plan), balance::smote_nearmiss(X, yy, plan)), "smote_nearmiss repeatable");
  char buf[96];
  std::snprintf(buf, sizeof buf, "%zu synthetics, max residual %.1e", synthetics, worst);
  c.notes.push_back(buf);
}

std::vector<store::DatasetRecord> benchmark_corpus() { return testsupport::synthetic_corpus(testsupport::CorpusShape{}); }

void leakage(Checker& c) {
  auto corpus = benchmark_corpus();
  store::Config cfg;
  cfg.min_df_en = 1;
  std::vector<std::string> labels;
  for (const auto& r : corpus) labels.push_back(*r.label);
  const std::size_t k = 10;
  const auto folds = eval::stratified_kfold(labels, k, cfg.seed);
  std::vector<std::string> sentinels;
  for (std::size_t f = 0; f < k; ++f) {
    sentinels.push_back("zzsentinel" + std::string(1, static_cast<char>('a' + f)) + "qx");
    corpus[folds[f][f % folds[f].size()]].tokens.push_back(sentinels.back());
  }
  for (auto kind : {eval::EncoderKind::tfidf, eval::EncoderKind::bow}) {
    std::size_t seen = 0, elsewhere = 0;
    const auto spec = eval::make_pipeline_spec(kind, models::Algorithm::multinomial_nb, cfg);
    eval::cross_validate(spec, corpus, cfg, k, cfg.seed, [&](const eval::FoldContext& ctx) {
      ++seen;
      for (std::size_t g = 0; g < k; ++g) {
        const bool present = ctx.encoder.vocab.find(sentinels[g]) >= 0;
        if (g == ctx.fold) c.expect(!present, "sentinel of fold " + std::to_string(g) + " leaked into its vocabulary");
        else elsewhere += present ? 1 : 0;
      }
    });
    c.expect(seen == k, "observer saw every fold");
    c.expect(elsewhere == k * (k - 1), "sentinels reach the other folds' vocabularies");
  }
}

void end_to_end(Checker& c) {
  ScratchDir dir("acceptance-grid");
  const auto corpus = benchmark_corpus();
  const auto dataset = (dir.path() / "corpus.jsonl").string();
  store::write_dataset(corpus, dataset);
  testsupport::StubProvider provider;
  const auto config = (dir.path() / "config.json").string();
  std::ofstream(config) << json{{"embedding_provider_url", provider.url()}}.dump();

  const auto run = testsupport::run_process(SPAMTOPIC_CLI, {"--config", config, "--format", "json", "eval", "--dataset",
                                                           dataset, "--grid"});
  c.expect(run.exit_code == 0, "eval --grid exited " + std::to_string(run.exit_code) + ": " + run.err);
  if (run.exit_code != 0) return;
  const auto j = json::parse(run.out);
  c.expect(j["documents"] == 2000, "2000 documents");
  c.expect(j["folds"] == 10, "10 folds");
  c.expect(j["rows"].size() == 16, "16 rows");
  double lr_f1 = -1, lr_acc = -1;
  for (const auto& row : j["rows"]) {
    c.expect(row["status"] == "ok", row["pipeline"].get<std::string>() + " ran");
    if (row["pipeline"] == "tfidf+logistic") {
      lr_f1 = row["metrics"]["macro"]["f1"];
      lr_acc = row["metrics"]["accuracy"];
    }
  }
  const double base = j["keyword_baseline"]["cv_accuracy"];
  c.expect(lr_f1 >= 0.90, "tfidf+lr macro F1 " + fmt(lr_f1));
  c.expect(lr_acc > base, "tfidf+lr accuracy " + fmt(lr_acc) + " vs baseline " + fmt(base));
  c.expect(provider.requests() > 0, "ext rows used the provider");
  c.expect(run.seconds < 300.0, "grid took " + fmt(run.seconds, 1) + " s");
  c.notes.push_back("tfidf+lr macro F1 " + fmt(lr_f1) + ", acc " + fmt(lr_acc) + "; baseline acc " + fmt(base) + "; " +
                    fmt(run.seconds, 1) + " s");
}

void salting(Checker& c) {
  auto tokens = [](std::string_view text) {
    const auto t = textprep::tokenize_normalize(text, textprep::load_stopwords(Language::en)).tokens;
    return std::set<std::string>(t.begin(), t.end());
  };
  std::size_t planted = 0;
  for (const std::string name : {"font_size_zero", "display_none", "same_color"}) {
    const auto markup = testsupport::slurp(testsupport::fixture("salting/" + name + ".html"));
    const auto extracted = ingest::extract_visible_text(markup, {});
    const auto visible = tokens(extracted.text);
    const auto naive = tokens(html::extract_naive(markup));
    for (const auto& t : testsupport::lines(testsupport::fixture("salting/" + name + ".hidden"))) {
      ++planted;
      c.expect(visible.count(t) == 0, name + ": hidden token '" + t + "' is visible");
      c.expect(naive.count(t) == 1, name + ": naive extraction misses '" + t + "'");
    }
    for (const auto& t : testsupport::lines(testsupport::fixture("salting/" + name + ".visible")))
      c.expect(visible.count(t) == 1, name + ": visible token '" + t + "' lost");
    c.expect(extracted.flags.has(ingest::Flag::salting_suspected), name + ": salting_suspected not set");
  }
  c.notes.push_back(std::to_string(planted) + " planted tokens across 3 fixtures");
}

void runtime(Checker& c) {
  ScratchDir dir("acceptance-runtime");
  const auto dataset = (dir.path() / "corpus.jsonl").string();
  store::write_dataset(benchmark_corpus(), dataset);
  const auto model = (dir.path() / "model").string();
  const auto train = testsupport::run_process(
      SPAMTOPIC_CLI, {"train", "--dataset", dataset, "--encoder", "tfidf", "--classifier", "lr", "--model", model});
  c.expect(train.exit_code == 0, "train exited " + std::to_string(train.exit_code) + ": " + train.err);
  if (train.exit_code != 0) return;
  const auto bench =
      testsupport::run_process(SPAMTOPIC_CLI, {"--format", "json", "bench", "--model", model, "--dataset", dataset});
  c.expect(bench.exit_code == 0, "bench exited " + std::to_string(bench.exit_code) + ": " + bench.err);
  if (bench.exit_code != 0) return;
  const double mean = json::parse(bench.out)["mean_ms_per_email"];
  c.expect(mean < 10.0, "mean " + fmt(mean) + " ms/email");
  c.notes.push_back("mean " + fmt(mean) + " ms/email");
}

void round_trips(Checker& c) {
  std::mt19937_64 rng(21);
  auto text = [&](std::size_t max_len) {
    static const std::vector<std::string> pieces{"a", "Z", " ", "\"", "\\", "\n", "é", "€", "日本", "💸", "\x01"};
    std::string s;
    for (std::size_t i = 0, n = rng() % (max_len + 1); i < n; ++i) s += pieces[rng() % pieces.size()];
    return s;
  };
  std::vector<store::DatasetRecord> records;
  for (std::size_t i = 0; i < 1000; ++i) {
    store::DatasetRecord r;
    r.id = "r" + std::to_string(i) + text(3);
    r.language = rng() % 2 ? Language::en : Language::es;
    r.subject_text = text(8);
    r.body_text = text(40);
    if (rng() % 2) r.image_texts.push_back(text(6));
    r.merged_text = r.subject_text + " " + r.body_text;
    for (std::size_t k = 0, n = rng() % 8; k < n; ++k) r.tokens.push_back(text(4));
    if (rng() % 3) r.label = "L" + text(2);
    if (rng() % 2) r.flags.push_back("html_source");
    records.push_back(std::move(r));
  }
  ScratchDir dir("acceptance-roundtrip");
  store::write_dataset(records, dir.path() / "d.jsonl");
  const auto back = store::read_dataset(dir.path() / "d.jsonl");
  c.expect(back.errors.empty() && back.records == records, "dataset JSONL round trip");

  auto random_rows = [&](std::size_t n, std::size_t d) {
    std::vector<vectorize::SparseVector> out(n);
    for (auto& row : out) {
      row.dimension = d;
      for (std::uint32_t j = 0; j < d; ++j)
        if (rng() % 3 == 0) row.entries.emplace_back(j, static_cast<double>(rng() % 1000) / 100.0);
    }
    return out;
  };
  const auto X = random_rows(150, 20);
  std::vector<std::string> y;
  for (std::size_t i = 0; i < X.size(); ++i) y.push_back("c" + std::to_string((i * 5 + X[i].entries.size()) % 4));
  const auto probes = random_rows(1000, 20);
  for (auto alg : {models::Algorithm::multinomial_nb, models::Algorithm::gaussian_nb, models::Algorithm::logistic,
                   models::Algorithm::linear_svm, models::Algorithm::random_forest}) {
    models::ModelSpec spec;
    spec.algorithm = alg;
    spec.trees = 50;
    spec.weights = balance::compute_class_weights(y);
    const auto model = models::train(spec, X, y);
    const auto where = dir.path() / std::string(models::to_string(alg));
    store::save_model(model, where);
    const auto loaded = store::load_model(where);
    std::size_t mismatched = 0;
    for (const auto& p : probes) mismatched += models::scores(model, p) == models::scores(loaded, p) ? 0 : 1;
    c.expect(mismatched == 0, std::string(models::to_string(alg)) + ": " + std::to_string(mismatched) +
                                  " of 1000 probes changed after reload");
  }

  testsupport::CorpusShape shape;
  shape.classes = 4;
  shape.documents = 300;
  const auto corpus = testsupport::synthetic_corpus(shape);
  store::Config cfg;
  const auto spec = eval::make_pipeline_spec(eval::EncoderKind::tfidf, models::Algorithm::logistic, cfg);
  const auto pipeline = eval::fit_pipeline(spec, corpus, cfg);
  store::save_pipeline(pipeline, dir.path() / "pipeline", cfg);
  const auto loaded = store::load_pipeline(dir.path() / "pipeline");
  std::size_t changed = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    const auto& r = corpus[i % corpus.size()];
    std::string probe = r.merged_text;
    if (i >= corpus.size()) probe += " " + corpus[(i * 7) % corpus.size()].merged_text;
    changed += eval::predict_text(pipeline, probe).scores == eval::predict_text(loaded, probe).scores ? 0 : 1;
  }
  c.expect(changed == 0, "pipeline: " + std::to_string(changed) + " of 1000 predictions changed after reload");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Checker&)>>> criteria{
      {"ward oracle", ward_oracle},
      {"metrics oracle", metrics_oracle},
      {"multinomial NB oracle", nb_oracle},
      {"logistic gradient check", lr_gradient},
      {"imbalance contracts", imbalance},
      {"leakage sentinel", leakage},
      {"end-to-end synthetic grid", end_to_end},
      {"salting fixtures", salting},
      {"runtime sanity", runtime},
      {"round trips", round_trips},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Checker c;
    const auto start = std::chrono::steady_clock::now();
    std::string crash;
    try {
      run(c);
    } catch (const std::exception& e) {
      crash = e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool ok = crash.empty() && c.failed() == 0;
    failed += ok ? 0 : 1;
    std::printf("%s %s (%zu checks, %.1f s)\n", ok ? "PASS" : "FAIL", name.c_str(), c.checks(), secs);
    for (const auto& n : c.notes) std::printf("     %s\n", n.c_str());
    if (!crash.empty()) std::printf("     exception: %s\n", crash.c_str());
    for (const auto& f : c.failures()) std::printf("     %s\n", f.c_str());
    if (c.failed() > c.failures().size())
      std::printf("     ... %zu more failures\n", c.failed() - c.failures().size());
    std::fflush(stdout);
  }
  std::printf("%s: %d of %zu criteria failed\n", failed ? "FAIL" : "PASS", failed, criteria.size());
  return failed ? 1 : 0;
}
