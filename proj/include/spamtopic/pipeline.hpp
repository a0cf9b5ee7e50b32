#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spamtopic/balance.hpp"
#include "spamtopic/config.hpp"
#include "spamtopic/dataset.hpp"
#include "spamtopic/embedding_client.hpp"
#include "spamtopic/eval.hpp"
#include "spamtopic/models.hpp"
#include "spamtopic/word2vec.hpp"

namespace spamtopic::eval {

using store::Config;
using store::DatasetRecord;

enum class EncoderKind { bow, tfidf, w2v, ext };
std::string_view to_string(EncoderKind kind);
std::optional<EncoderKind> parse_encoder(std::string_view name);

/// Fitted text representation.
struct Encoder {
  EncoderKind kind = EncoderKind::tfidf;
  Language language = Language::en;
  vectorize::Vocabulary vocab;          // bow, tfidf
  vectorize::IdfTable idf;              // tfidf
  vectorize::EmbeddingTable embeddings; // w2v
  std::optional<vectorize::ProviderConfig> provider;  // ext
  std::size_t dimension = 0;
};

/// All records must share one language; it selects min_df and stopwords.
Language dataset_language(std::span<const DatasetRecord> records);

Encoder fit_encoder(EncoderKind kind, std::span<const DatasetRecord> train, const Config& config);
vectorize::SparseVector encode(const Encoder& encoder, const DatasetRecord& record);
/// Batches provider calls for the ext encoder.
std::vector<vectorize::SparseVector> encode_batch(const Encoder& encoder, std::span<const DatasetRecord> records);

struct PipelineSpec {
  EncoderKind encoder = EncoderKind::tfidf;
  models::ModelSpec model;
  balance::Strategy balance = balance::Strategy::weights;

  /// e.g. "tfidf+logistic"
  std::string id() const;
};

/// Hyperparameters for `algorithm` taken from the config.
PipelineSpec make_pipeline_spec(EncoderKind encoder, models::Algorithm algorithm, const Config& config);

struct Pipeline {
  PipelineSpec spec;
  Encoder encoder;
  models::TrainedModel model;
};

/// Applies the balance strategy to encoded training rows and trains.
models::TrainedModel fit_model(const PipelineSpec& spec, std::vector<vectorize::SparseVector> X,
                               std::vector<std::string> y, std::uint64_t balance_seed);

/// Every record must carry a label.
Pipeline fit_pipeline(const PipelineSpec& spec, std::span<const DatasetRecord> train, const Config& config);

models::Prediction predict_record(const Pipeline& pipeline, const DatasetRecord& record);
/// Tokenizes raw text with the pipeline language, then predicts.
models::Prediction predict_text(const Pipeline& pipeline, std::string_view text);

struct FoldContext {
  std::size_t fold = 0;
  std::span<const std::size_t> train;
  std::span<const std::size_t> test;
  const Encoder& encoder;
};
using FoldObserver = std::function<void(const FoldContext&)>;

struct CrossValidation {
  MetricsReport report;
  std::vector<std::string> warnings;
};

/// Encoder, resampling and classifier are all fit on the training split of
/// each fold; predictions from every fold are pooled into one matrix.
CrossValidation cross_validate(const PipelineSpec& spec, std::span<const DatasetRecord> records, const Config& config,
                               std::size_t k, std::uint64_t seed, const FoldObserver& observer = {});

struct BaselineReport {
  double train_accuracy = 0.0;
  MetricsReport cv;
  KeywordModel model;  // trained on the full dataset
};

BaselineReport evaluate_keyword_baseline(std::span<const DatasetRecord> records, std::size_t k, std::uint64_t seed);

struct GridRow {
  EncoderKind encoder = EncoderKind::bow;
  models::Algorithm algorithm = models::Algorithm::logistic;
  bool skipped = false;
  std::string skip_reason;
  std::optional<MetricsReport> report;
};

struct GridReport {
  std::vector<GridRow> rows;  // 4 encoders x 4 classifiers
  BaselineReport baseline;
  balance::Strategy balance = balance::Strategy::weights;
  std::size_t folds = 10;
  std::uint64_t seed = 1;
  std::size_t documents = 0;
  std::vector<std::string> warnings;
};

/// The 16-pipeline grid. Each encoder is fit once per fold and shared by its
/// four classifiers; naive Bayes is multinomial for bow/tfidf and Gaussian
/// for the embedding encoders. Rows for ext are skipped without a provider.
GridReport run_grid(std::span<const DatasetRecord> records, const Config& config, std::size_t k, std::uint64_t seed);

struct RuntimeReport {
  std::string pipeline;
  std::size_t documents = 0;
  double mean_ms = 0.0;
  double p95_ms = 0.0;
};

/// Times tokenize -> encode -> predict per document after `warmups` passes.
RuntimeReport bench_runtime(const Pipeline& pipeline, std::span<const DatasetRecord> records,
                            std::size_t warmups = 3);

std::string report_to_json(const MetricsReport& report);
std::string grid_to_json(const GridReport& grid);
std::string grid_to_table(const GridReport& grid);
std::string report_to_table(const MetricsReport& report);
std::string confusion_to_csv(const ConfusionMatrix& cm);
std::string runtime_to_json(const RuntimeReport& report);

}  // namespace spamtopic::eval
