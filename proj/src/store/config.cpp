#include "spamtopic/config.hpp"

#include <cmath>

#include <json.hpp>

#include "spamtopic/dataset.hpp"
#include "spamtopic/errors.hpp"

namespace spamtopic::store {

using nlohmann::json;

namespace {

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

std::optional<std::string> read_optional(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  auto s = j[key].get<std::string>();
  if (s.empty()) return std::nullopt;
  return s;
}

void check_known_keys(const json& user, const json& reference, const std::string& prefix) {
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!reference.contains(key)) throw validation_error("unknown config key '" + path + "'");
    if (value.is_object() && reference[key].is_object()) check_known_keys(value, reference[key], path);
  }
}

json to_json_value(const Config& c) {
  const auto& e = c.embedding;
  return json{
      {"language", to_string(c.language)},
      {"seed", c.seed},
      {"vocabulary", {{"bow_cap", c.bow_cap}, {"tfidf_cap", c.tfidf_cap}, {"min_df", {{"en", c.min_df_en}, {"es", c.min_df_es}}}}},
      {"classifiers",
       {{"lr_c", c.lr_c},
        {"lr_max_iter", c.lr_max_iter},
        {"rf_trees", c.rf_trees},
        {"svm_c", c.svm_c},
        {"svm_epochs", c.svm_epochs},
        {"nb_alpha", c.nb_alpha},
        {"threads", c.threads}}},
      {"embedding",
       {{"dim", e.dimension},
        {"epochs", e.epochs},
        {"rate", e.initial_rate},
        {"min_rate", e.min_rate},
        {"window", e.window},
        {"negative", e.negative},
        {"vocab_cap", e.vocab_cap},
        {"min_count", e.min_count}}},
      {"balance", {{"strategy", balance::to_string(c.balance)}, {"seed", c.balance_seed}}},
      {"eval", {{"folds", c.folds}}},
      {"adapters",
       {{"ocr_command", optional_string(c.adapters.ocr_command)},
        {"render_command", optional_string(c.adapters.render_command)},
        {"language_detector_command", optional_string(c.adapters.language_command)},
        {"timeout_secs", c.adapters.timeout_secs}}},
      {"embedding_provider_url", optional_string(c.embedding_provider_url)},
      {"service", {{"host", c.service_host}, {"port", c.service_port}}},
      {"cluster", {{"max_docs", c.max_cluster_docs}}},
  };
}

}  // namespace

void Config::validate() const {
  if (language == Language::unknown) throw validation_error("config language must be en or es");
  if (bow_cap == 0 || tfidf_cap == 0) throw validation_error("vocabulary caps must be >= 1");
  if (min_df_en == 0 || min_df_es == 0) throw validation_error("min_df must be >= 1");
  if (!(lr_c > 0) || !std::isfinite(lr_c)) throw validation_error("lr_c must be positive");
  if (!(svm_c > 0) || !std::isfinite(svm_c)) throw validation_error("svm_c must be positive");
  if (!(nb_alpha > 0)) throw validation_error("nb_alpha must be positive");
  if (lr_max_iter == 0 || rf_trees == 0 || svm_epochs == 0) throw validation_error("iteration counts must be >= 1");
  if (embedding.dimension == 0 || embedding.epochs == 0 || embedding.window == 0 || embedding.vocab_cap == 0) {
    throw validation_error("embedding parameters must be >= 1");
  }
  if (!(embedding.initial_rate > 0) || !(embedding.min_rate >= 0) || embedding.min_rate > embedding.initial_rate) {
    throw validation_error("embedding learning rates must satisfy 0 <= min_rate <= rate, rate > 0");
  }
  if (folds < 2) throw validation_error("folds must be >= 2");
  if (service_port < 0 || service_port > 65535) throw validation_error("service port out of range");
  adapters.validate();
}

Config config_from_json(const std::string& text, const Config& base) {
  json user;
  try {
    user = json::parse(text);
  } catch (const json::exception& e) {
    throw validation_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!user.is_object()) throw validation_error("config must be a JSON object");
  json merged = to_json_value(base);
  check_known_keys(user, merged, "");
  merged.merge_patch(user);

  Config c = base;
  try {
    const auto lang = parse_language(merged.at("language").get<std::string>());
    if (!lang) throw validation_error("config language must be en or es");
    c.language = *lang;
    c.seed = merged.at("seed").get<std::uint64_t>();
    const auto& v = merged.at("vocabulary");
    c.bow_cap = v.at("bow_cap").get<std::size_t>();
    c.tfidf_cap = v.at("tfidf_cap").get<std::size_t>();
    c.min_df_en = v.at("min_df").at("en").get<std::size_t>();
    c.min_df_es = v.at("min_df").at("es").get<std::size_t>();
    const auto& k = merged.at("classifiers");
    c.lr_c = k.at("lr_c").get<double>();
    c.lr_max_iter = k.at("lr_max_iter").get<std::size_t>();
    c.rf_trees = k.at("rf_trees").get<std::size_t>();
    c.svm_c = k.at("svm_c").get<double>();
    c.svm_epochs = k.at("svm_epochs").get<std::size_t>();
    c.nb_alpha = k.at("nb_alpha").get<double>();
    c.threads = k.at("threads").get<std::size_t>();
    const auto& e = merged.at("embedding");
    c.embedding.dimension = e.at("dim").get<std::size_t>();
    c.embedding.epochs = e.at("epochs").get<std::size_t>();
    c.embedding.initial_rate = e.at("rate").get<double>();
    c.embedding.min_rate = e.at("min_rate").get<double>();
    c.embedding.window = e.at("window").get<std::size_t>();
    c.embedding.negative = e.at("negative").get<std::size_t>();
    c.embedding.vocab_cap = e.at("vocab_cap").get<std::size_t>();
    c.embedding.min_count = e.at("min_count").get<std::size_t>();
    const auto& b = merged.at("balance");
    const auto strategy = balance::parse_strategy(b.at("strategy").get<std::string>());
    if (!strategy) throw validation_error("unknown balance strategy '" + b.at("strategy").get<std::string>() + "'");
    c.balance = *strategy;
    c.balance_seed = b.at("seed").get<std::uint64_t>();
    c.folds = merged.at("eval").at("folds").get<std::size_t>();
    const auto& a = merged.at("adapters");
    c.adapters.ocr_command = read_optional(a, "ocr_command");
    c.adapters.render_command = read_optional(a, "render_command");
    c.adapters.language_command = read_optional(a, "language_detector_command");
    if (a.contains("timeout_secs")) c.adapters.timeout_secs = a.at("timeout_secs").get<double>();
    c.embedding_provider_url = read_optional(merged, "embedding_provider_url");
    c.service_host = merged.at("service").at("host").get<std::string>();
    c.service_port = merged.at("service").at("port").get<int>();
    c.max_cluster_docs = merged.at("cluster").at("max_docs").get<std::size_t>();
  } catch (const json::exception& e) {
    throw validation_error(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const Config& config) { return to_json_value(config).dump(2); }

Config load_config(const std::optional<std::filesystem::path>& path) {
  if (!path) return Config{};
  return config_from_json(read_file(*path));
}

}  // namespace spamtopic::store
