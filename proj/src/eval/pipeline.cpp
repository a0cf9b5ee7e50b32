#include "spamtopic/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "spamtopic/errors.hpp"

namespace spamtopic::eval {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

std::vector<textprep::TokenDoc> token_docs(std::span<const DatasetRecord> records) {
  std::vector<textprep::TokenDoc> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(store::token_doc(r));
  return out;
}

std::vector<std::string> labels_of(std::span<const DatasetRecord> records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.label) throw validation_error("record '" + r.id + "' has no label");
    out.push_back(*r.label);
  }
  return out;
}

std::vector<DatasetRecord> subset(std::span<const DatasetRecord> records, std::span<const std::size_t> idx) {
  std::vector<DatasetRecord> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(records[i]);
  return out;
}

std::vector<std::string> sorted_classes(const std::vector<std::string>& labels) {
  std::vector<std::string> classes = labels;
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
  return classes;
}

std::vector<std::size_t> complement(std::size_t n, std::span<const std::size_t> test) {
  std::vector<char> in_test(n, 0);
  for (std::size_t i : test) in_test[i] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (!in_test[i]) out.push_back(i);
  }
  return out;
}

void note_missing_classes(const std::vector<std::string>& classes, const std::vector<std::string>& train_labels,
                          std::size_t fold, std::vector<std::string>& warnings) {
  for (const auto& c : classes) {
    if (std::find(train_labels.begin(), train_labels.end(), c) == train_labels.end()) {
      warnings.push_back("fold " + std::to_string(fold) + ": class '" + c + "' absent from the training split");
    }
  }
}

std::optional<vectorize::ProviderConfig> provider_from(const Config& config) {
  if (!config.embedding_provider_url) return std::nullopt;
  vectorize::ProviderConfig p;
  p.url = *config.embedding_provider_url;
  p.timeout_secs = std::max(config.adapters.timeout_secs, 1.0);
  return p;
}

}  // namespace

std::string_view to_string(EncoderKind kind) {
  switch (kind) {
    case EncoderKind::bow: return "bow";
    case EncoderKind::tfidf: return "tfidf";
    case EncoderKind::w2v: return "w2v";
    case EncoderKind::ext: return "ext";
  }
  return "tfidf";
}

std::optional<EncoderKind> parse_encoder(std::string_view name) {
  for (auto k : {EncoderKind::bow, EncoderKind::tfidf, EncoderKind::w2v, EncoderKind::ext}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

Language dataset_language(std::span<const DatasetRecord> records) {
  if (records.empty()) throw validation_error("dataset is empty");
  const Language lang = records.front().language;
  for (const auto& r : records) {
    if (r.language != lang) {
      throw validation_error("dataset mixes languages (" + std::string(to_string(lang)) + " and " +
                             std::string(to_string(r.language)) + "); train one model per language");
    }
  }
  return lang;
}

Encoder fit_encoder(EncoderKind kind, std::span<const DatasetRecord> train, const Config& config) {
  Encoder enc;
  enc.kind = kind;
  enc.language = dataset_language(train);
  const auto docs = token_docs(train);
  switch (kind) {
    case EncoderKind::bow:
      enc.vocab = vectorize::build_vocabulary(docs, config.bow_cap, config.min_df(enc.language));
      enc.dimension = enc.vocab.size();
      break;
    case EncoderKind::tfidf:
      enc.vocab = vectorize::build_vocabulary(docs, config.tfidf_cap, config.min_df(enc.language));
      enc.idf = vectorize::fit_idf(docs, enc.vocab);
      enc.dimension = enc.vocab.size();
      break;
    case EncoderKind::w2v: {
      auto params = config.embedding;
      params.seed = config.seed;
      enc.embeddings = vectorize::train_word_embeddings(docs, params);
      enc.dimension = enc.embeddings.dimension;
      break;
    }
    case EncoderKind::ext:
      enc.provider = provider_from(config);
      if (!enc.provider) throw validation_error("the ext encoder needs embedding_provider_url in the config");
      break;
  }
  if (kind != EncoderKind::ext && enc.dimension == 0) {
    throw validation_error("encoder " + std::string(to_string(kind)) +
                           " produced an empty vocabulary; lower min_df or add documents");
  }
  return enc;
}

vectorize::SparseVector encode(const Encoder& encoder, const DatasetRecord& record) {
  const auto doc = store::token_doc(record);
  switch (encoder.kind) {
    case EncoderKind::bow: return vectorize::encode_bow(doc, encoder.vocab);
    case EncoderKind::tfidf: return vectorize::encode_tfidf(doc, encoder.vocab, encoder.idf);
    case EncoderKind::w2v: return vectorize::to_sparse(vectorize::embed_document(doc, encoder.embeddings));
    case EncoderKind::ext: {
      auto rows = encode_batch(encoder, std::span<const DatasetRecord>(&record, 1));
      return std::move(rows.front());
    }
  }
  return {};
}

std::vector<vectorize::SparseVector> encode_batch(const Encoder& encoder, std::span<const DatasetRecord> records) {
  std::vector<vectorize::SparseVector> out;
  out.reserve(records.size());
  if (encoder.kind != EncoderKind::ext) {
    for (const auto& r : records) out.push_back(encode(encoder, r));
    return out;
  }
  if (!encoder.provider) throw validation_error("ext encoder has no provider configured");
  std::vector<std::string> texts;
  texts.reserve(records.size());
  for (const auto& r : records) texts.push_back(r.merged_text);
  auto vectors = vectorize::fetch_external_embeddings(texts, *encoder.provider);
  for (auto& v : vectors) {
    if (encoder.dimension != 0 && v.values.size() != encoder.dimension) {
      throw adapter_error("embedding provider returned " + std::to_string(v.values.size()) +
                          "-dimensional vectors; the model expects " + std::to_string(encoder.dimension));
    }
    out.push_back(vectorize::to_sparse(v));
  }
  return out;
}

std::string PipelineSpec::id() const {
  return std::string(to_string(encoder)) + "+" + std::string(models::to_string(model.algorithm));
}

PipelineSpec make_pipeline_spec(EncoderKind encoder, models::Algorithm algorithm, const Config& config) {
  PipelineSpec spec;
  spec.encoder = encoder;
  spec.balance = config.balance;
  auto& m = spec.model;
  m.algorithm = algorithm;
  m.alpha = config.nb_alpha;
  m.c = algorithm == models::Algorithm::linear_svm ? config.svm_c : config.lr_c;
  m.max_iter = config.lr_max_iter;
  m.epochs = config.svm_epochs;
  m.trees = config.rf_trees;
  m.seed = config.seed;
  m.threads = config.threads;
  return spec;
}

models::TrainedModel fit_model(const PipelineSpec& spec, std::vector<vectorize::SparseVector> X,
                               std::vector<std::string> y, std::uint64_t balance_seed) {
  models::ModelSpec model_spec = spec.model;
  std::vector<std::string> warnings;
  switch (spec.balance) {
    case balance::Strategy::none:
      break;
    case balance::Strategy::weights:
      model_spec.weights = balance::compute_class_weights(y);
      break;
    case balance::Strategy::random: {
      auto r = balance::random_rebalance(X, y, balance::default_plan(y, balance_seed));
      X = std::move(r.X);
      y = std::move(r.y);
      break;
    }
    case balance::Strategy::smote_nearmiss: {
      auto r = balance::smote_nearmiss(X, y, balance::default_plan(y, balance_seed));
      X = std::move(r.X);
      y = std::move(r.y);
      warnings = std::move(r.warnings);
      break;
    }
  }
  auto model = models::train(model_spec, X, y);
  model.warnings.insert(model.warnings.begin(), warnings.begin(), warnings.end());
  return model;
}

Pipeline fit_pipeline(const PipelineSpec& spec, std::span<const DatasetRecord> train, const Config& config) {
  const auto y = labels_of(train);
  Pipeline p;
  p.spec = spec;
  p.encoder = fit_encoder(spec.encoder, train, config);
  auto X = encode_batch(p.encoder, train);
  if (p.encoder.kind == EncoderKind::ext) p.encoder.dimension = X.empty() ? 0 : X.front().dimension;
  p.model = fit_model(spec, std::move(X), y, config.balance_seed);
  return p;
}

models::Prediction predict_record(const Pipeline& pipeline, const DatasetRecord& record) {
  return models::predict(pipeline.model, encode(pipeline.encoder, record));
}

models::Prediction predict_text(const Pipeline& pipeline, std::string_view text) {
  DatasetRecord r;
  r.id = "input";
  r.language = pipeline.encoder.language;
  r.merged_text = std::string(text);
  r.tokens = textprep::tokenize_normalize(text, textprep::load_stopwords(r.language)).tokens;
  return predict_record(pipeline, r);
}

CrossValidation cross_validate(const PipelineSpec& spec, std::span<const DatasetRecord> records, const Config& config,
                               std::size_t k, std::uint64_t seed, const FoldObserver& observer) {
  const auto y = labels_of(records);
  const auto classes = sorted_classes(y);
  const auto folds = stratified_kfold(y, k, seed);
  std::vector<std::string> pooled_true, pooled_pred;
  CrossValidation cv;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto train_idx = complement(records.size(), folds[f]);
    const auto train = subset(records, train_idx);
    const auto test = subset(records, folds[f]);
    const auto train_y = labels_of(train);
    note_missing_classes(classes, train_y, f, cv.warnings);

    Encoder enc = fit_encoder(spec.encoder, train, config);
    auto X = encode_batch(enc, train);
    if (enc.kind == EncoderKind::ext) enc.dimension = X.empty() ? 0 : X.front().dimension;
    if (observer) observer(FoldContext{f, train_idx, folds[f], enc});
    const auto model = fit_model(spec, std::move(X), train_y, config.balance_seed);
    for (const auto& w : model.warnings) cv.warnings.push_back("fold " + std::to_string(f) + ": " + w);
    const auto test_X = encode_batch(enc, test);
    for (std::size_t i = 0; i < test.size(); ++i) {
      pooled_true.push_back(*test[i].label);
      pooled_pred.push_back(model.classes[models::predict_index(model, test_X[i])]);
    }
  }
  cv.report = summarize(confusion(pooled_true, pooled_pred, classes));
  return cv;
}

BaselineReport evaluate_keyword_baseline(std::span<const DatasetRecord> records, std::size_t k, std::uint64_t seed) {
  const auto y = labels_of(records);
  const auto docs = token_docs(records);
  BaselineReport out;
  out.model = keyword_baseline_train(docs, y);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < docs.size(); ++i) correct += keyword_baseline_predict(out.model, docs[i]) == y[i];
  out.train_accuracy = static_cast<double>(correct) / static_cast<double>(docs.size());

  const auto folds = stratified_kfold(y, k, seed);
  std::vector<std::string> pooled_true, pooled_pred;
  for (const auto& test : folds) {
    const auto train_idx = complement(records.size(), test);
    std::vector<textprep::TokenDoc> train_docs;
    std::vector<std::string> train_y;
    for (std::size_t i : train_idx) {
      train_docs.push_back(docs[i]);
      train_y.push_back(y[i]);
    }
    const auto model = keyword_baseline_train(train_docs, train_y);
    for (std::size_t i : test) {
      pooled_true.push_back(y[i]);
      pooled_pred.push_back(keyword_baseline_predict(model, docs[i]));
    }
  }
  out.cv = summarize(confusion(pooled_true, pooled_pred, sorted_classes(y)));
  return out;
}

GridReport run_grid(std::span<const DatasetRecord> records, const Config& config, std::size_t k, std::uint64_t seed) {
  using models::Algorithm;
  const auto y = labels_of(records);
  const auto classes = sorted_classes(y);
  const auto folds = stratified_kfold(y, k, seed);
  const std::vector<EncoderKind> encoders{EncoderKind::tfidf, EncoderKind::bow, EncoderKind::w2v, EncoderKind::ext};

  GridReport grid;
  grid.balance = config.balance;
  grid.folds = k;
  grid.seed = seed;
  grid.documents = records.size();

  for (EncoderKind enc_kind : encoders) {
    const bool embedding = enc_kind == EncoderKind::w2v || enc_kind == EncoderKind::ext;
    const std::vector<Algorithm> algorithms{Algorithm::linear_svm,
                                            embedding ? Algorithm::gaussian_nb : Algorithm::multinomial_nb,
                                            Algorithm::random_forest, Algorithm::logistic};
    if (enc_kind == EncoderKind::ext && !config.embedding_provider_url) {
      for (auto a : algorithms) {
        grid.rows.push_back({enc_kind, a, true, "no embedding_provider_url configured", std::nullopt});
      }
      continue;
    }

    // Embeddings from an external provider do not depend on the training
    // split, so all documents are fetched once.
    std::vector<vectorize::SparseVector> ext_rows;
    double ext_ms_per_doc = 0.0;
    if (enc_kind == EncoderKind::ext) {
      Encoder probe;
      probe.kind = EncoderKind::ext;
      probe.provider = provider_from(config);
      const auto start = Clock::now();
      ext_rows = encode_batch(probe, records);
      ext_ms_per_doc = elapsed_ms(start) / static_cast<double>(records.size());
    }

    std::vector<std::vector<std::string>> preds(algorithms.size());
    std::vector<double> time_ms(algorithms.size(), 0.0);
    std::vector<std::string> pooled_true;
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto train_idx = complement(records.size(), folds[f]);
      const auto train = subset(records, train_idx);
      const auto test = subset(records, folds[f]);
      const auto train_y = labels_of(train);
      if (enc_kind == EncoderKind::tfidf) note_missing_classes(classes, train_y, f, grid.warnings);

      std::vector<vectorize::SparseVector> X, test_X;
      double encode_ms = 0.0;
      if (enc_kind == EncoderKind::ext) {
        for (std::size_t i : train_idx) X.push_back(ext_rows[i]);
        for (std::size_t i : folds[f]) test_X.push_back(ext_rows[i]);
        encode_ms = ext_ms_per_doc * static_cast<double>(test.size());
      } else {
        const Encoder enc = fit_encoder(enc_kind, train, config);
        X = encode_batch(enc, train);
        const auto start = Clock::now();
        for (const auto& r : test) {
          DatasetRecord fresh = r;
          fresh.tokens = textprep::tokenize_normalize(r.merged_text, textprep::load_stopwords(r.language)).tokens;
          test_X.push_back(encode(enc, fresh));
        }
        encode_ms = elapsed_ms(start);
      }
      for (const auto& r : test) pooled_true.push_back(*r.label);

      for (std::size_t a = 0; a < algorithms.size(); ++a) {
        const auto spec = make_pipeline_spec(enc_kind, algorithms[a], config);
        const auto model = fit_model(spec, X, train_y, config.balance_seed);
        const auto start = Clock::now();
        for (const auto& x : test_X) preds[a].push_back(model.classes[models::predict_index(model, x)]);
        time_ms[a] += elapsed_ms(start) + encode_ms;
      }
    }
    for (std::size_t a = 0; a < algorithms.size(); ++a) {
      GridRow row{enc_kind, algorithms[a], false, {}, summarize(confusion(pooled_true, preds[a], classes))};
      row.report->runtime_ms_per_email = time_ms[a] / static_cast<double>(pooled_true.size());
      grid.rows.push_back(std::move(row));
    }
  }
  grid.baseline = evaluate_keyword_baseline(records, k, seed);
  return grid;
}

RuntimeReport bench_runtime(const Pipeline& pipeline, std::span<const DatasetRecord> records, std::size_t warmups) {
  if (records.empty()) throw validation_error("benchmark needs at least one document");
  auto run_one = [&](const DatasetRecord& r) { return predict_text(pipeline, r.merged_text); };
  for (std::size_t w = 0; w < warmups; ++w) {
    for (const auto& r : records) (void)run_one(r);
  }
  std::vector<double> times;
  times.reserve(records.size());
  double total = 0.0;
  for (const auto& r : records) {
    const auto start = Clock::now();
    (void)run_one(r);
    times.push_back(elapsed_ms(start));
    total += times.back();
  }
  std::sort(times.begin(), times.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(times.size())));
  RuntimeReport out;
  out.pipeline = pipeline.spec.id();
  out.documents = records.size();
  out.mean_ms = total / static_cast<double>(records.size());
  out.p95_ms = times[std::max<std::size_t>(rank, 1) - 1];
  return out;
}

}  // namespace spamtopic::eval
