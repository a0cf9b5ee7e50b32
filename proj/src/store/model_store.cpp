#include "spamtopic/model_store.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>
#include <zlib.h>

#include "spamtopic/dataset.hpp"
#include "spamtopic/errors.hpp"

namespace spamtopic::store {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Little-endian host layout; the manifest checksum catches truncation.
class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    const auto* p = reinterpret_cast<const char*>(&v);
    bytes_.append(p, sizeof(T));
  }
  void put_doubles(const std::vector<double>& values) {
    put<std::uint64_t>(values.size());
    bytes_.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string name) : bytes_(std::move(bytes)), name_(std::move(name)) {}
  template <typename T>
  T get() {
    T v;
    need(sizeof(T));
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<double> get_doubles() {
    const auto n = get<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / sizeof(double)) corrupt("length prefix exceeds file size");
    std::vector<double> out(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
    return out;
  }
  void finish() const {
    if (pos_ != bytes_.size()) corrupt("trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) corrupt("truncated");
  }
  [[noreturn]] void corrupt(const std::string& why) const {
    throw io_error("corrupt model artifact: " + name_ + " (" + why + ")");
  }
  std::string bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::string crc_hex(const std::string& bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw io_error("cannot create " + dir_.string() + ": " + ec.message());
  }
  void add(const std::string& name, const std::string& bytes) {
    write_file_atomic(dir_ / name, bytes);
    files_[name] = crc_hex(bytes);
  }
  const json& files() const { return files_; }

 private:
  fs::path dir_;
  json files_ = json::object();
};

class ArtifactReader {
 public:
  ArtifactReader(fs::path dir, const json& files) : dir_(std::move(dir)), files_(files) {}
  std::string raw(const std::string& name) const {
    if (!files_.contains(name)) throw io_error("corrupt model artifact: manifest does not list " + name);
    const std::string bytes = read_file(dir_ / name);
    if (crc_hex(bytes) != files_.at(name).get<std::string>()) {
      throw io_error("corrupt model artifact: checksum mismatch in " + (dir_ / name).string());
    }
    return bytes;
  }
  Reader open(const std::string& name) const { return Reader(raw(name), (dir_ / name).string()); }

 private:
  fs::path dir_;
  json files_;
};

std::string numbered(const char* prefix, std::size_t i, int width) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%0*zu.bin", prefix, width, i);
  return buf;
}

json spec_json(const models::ModelSpec& s) {
  json j{{"algorithm", models::to_string(s.algorithm)},
         {"alpha", s.alpha},
         {"c", s.effective_c()},
         {"max_iter", s.max_iter},
         {"epochs", s.epochs},
         {"trees", s.trees},
         {"bootstrap", s.bootstrap},
         {"seed", s.seed}};
  j["weights"] = s.weights ? json(*s.weights) : json(nullptr);
  return j;
}

models::ModelSpec spec_from_json(const json& j) {
  models::ModelSpec s;
  const auto alg = models::parse_algorithm(j.at("algorithm").get<std::string>());
  if (!alg) throw validation_error("unknown algorithm in model manifest");
  s.algorithm = *alg;
  s.alpha = j.at("alpha").get<double>();
  s.c = j.at("c").get<double>();
  s.max_iter = j.at("max_iter").get<std::size_t>();
  s.epochs = j.at("epochs").get<std::size_t>();
  s.trees = j.at("trees").get<std::size_t>();
  s.bootstrap = j.at("bootstrap").get<bool>();
  s.seed = j.at("seed").get<std::uint64_t>();
  if (!j.at("weights").is_null()) s.weights = j.at("weights").get<balance::ClassWeights>();
  return s;
}

json write_model_files(const models::TrainedModel& model, ArtifactWriter& out) {
  json params = json::object();
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, models::NaiveBayesParams>) {
          Writer w;
          w.put_doubles(p.log_prior);
          out.add("prior.bin", w.bytes());
          for (std::size_t c = 0; c < p.feature_log_prob.size(); ++c) {
            Writer row;
            row.put_doubles(p.feature_log_prob[c]);
            out.add(numbered("class", c, 3), row.bytes());
          }
        } else if constexpr (std::is_same_v<P, models::GaussianParams>) {
          Writer w;
          w.put_doubles(p.log_prior);
          w.put<double>(p.epsilon);
          out.add("prior.bin", w.bytes());
          for (std::size_t c = 0; c < p.mean.size(); ++c) {
            Writer row;
            row.put_doubles(p.mean[c]);
            row.put_doubles(p.variance[c]);
            out.add(numbered("class", c, 3), row.bytes());
          }
        } else if constexpr (std::is_same_v<P, models::LinearParams>) {
          Writer w;
          w.put<double>(p.bias_feature);
          out.add("linear.bin", w.bytes());
          for (std::size_t c = 0; c < p.coef.size(); ++c) {
            Writer row;
            row.put<double>(p.intercept[c]);
            row.put_doubles(p.coef[c]);
            out.add(numbered("class", c, 3), row.bytes());
          }
        } else {
          for (std::size_t t = 0; t < p.trees.size(); ++t) {
            Writer w;
            w.put<std::uint64_t>(p.trees[t].nodes.size());
            for (const auto& n : p.trees[t].nodes) {
              w.put<std::int32_t>(n.feature);
              w.put<double>(n.threshold);
              w.put<std::int32_t>(n.left);
              w.put<std::int32_t>(n.right);
              w.put<std::int32_t>(n.label);
            }
            out.add(numbered("tree", t, 4), w.bytes());
          }
          params["trees"] = p.trees.size();
        }
      },
      model.parameters);
  return params;
}

void check_length(const std::vector<double>& v, std::size_t expected, const std::string& what) {
  if (v.size() != expected) throw io_error("corrupt model artifact: " + what + " has the wrong length");
}

models::Parameters read_model_files(const models::ModelSpec& spec, std::size_t k, std::size_t d,
                                    const ArtifactReader& in) {
  using models::Algorithm;
  switch (spec.algorithm) {
    case Algorithm::multinomial_nb: {
      models::NaiveBayesParams p;
      auto r = in.open("prior.bin");
      p.log_prior = r.get_doubles();
      r.finish();
      check_length(p.log_prior, k, "prior.bin");
      for (std::size_t c = 0; c < k; ++c) {
        auto row = in.open(numbered("class", c, 3));
        p.feature_log_prob.push_back(row.get_doubles());
        row.finish();
        check_length(p.feature_log_prob.back(), d, numbered("class", c, 3));
      }
      return p;
    }
    case Algorithm::gaussian_nb: {
      models::GaussianParams p;
      auto r = in.open("prior.bin");
      p.log_prior = r.get_doubles();
      p.epsilon = r.get<double>();
      r.finish();
      check_length(p.log_prior, k, "prior.bin");
      for (std::size_t c = 0; c < k; ++c) {
        auto row = in.open(numbered("class", c, 3));
        p.mean.push_back(row.get_doubles());
        p.variance.push_back(row.get_doubles());
        row.finish();
        check_length(p.mean.back(), d, numbered("class", c, 3));
        check_length(p.variance.back(), d, numbered("class", c, 3));
      }
      return p;
    }
    case Algorithm::logistic:
    case Algorithm::linear_svm: {
      models::LinearParams p;
      auto r = in.open("linear.bin");
      p.bias_feature = r.get<double>();
      r.finish();
      for (std::size_t c = 0; c < k; ++c) {
        auto row = in.open(numbered("class", c, 3));
        p.intercept.push_back(row.get<double>());
        p.coef.push_back(row.get_doubles());
        row.finish();
        check_length(p.coef.back(), d, numbered("class", c, 3));
      }
      return p;
    }
    case Algorithm::random_forest: {
      models::ForestParams p;
      for (std::size_t t = 0; t < spec.trees; ++t) {
        const auto name = numbered("tree", t, 4);
        auto r = in.open(name);
        const auto count = r.get<std::uint64_t>();
        models::DecisionTree tree;
        for (std::uint64_t i = 0; i < count; ++i) {
          models::TreeNode n;
          n.feature = r.get<std::int32_t>();
          n.threshold = r.get<double>();
          n.left = r.get<std::int32_t>();
          n.right = r.get<std::int32_t>();
          n.label = r.get<std::int32_t>();
          tree.nodes.push_back(n);
        }
        r.finish();
        // Structural checks so a bad file cannot send prediction out of range.
        for (const auto& n : tree.nodes) {
          const bool leaf = n.feature < 0;
          const auto limit = static_cast<std::int32_t>(tree.nodes.size());
          if (leaf ? (n.label < 0 || n.label >= static_cast<std::int32_t>(k))
                   : (n.feature >= static_cast<std::int32_t>(d) || n.left <= 0 || n.right <= 0 || n.left >= limit ||
                      n.right >= limit)) {
            throw io_error("corrupt model artifact: " + name + " has an invalid node");
          }
        }
        if (tree.nodes.empty()) throw io_error("corrupt model artifact: " + name + " is empty");
        p.trees.push_back(std::move(tree));
      }
      return p;
    }
  }
  throw Error(ErrorKind::internal, "unhandled algorithm");
}

json read_manifest(const fs::path& dir) {
  const fs::path path = dir / "manifest.json";
  if (!fs::exists(path)) throw io_error("no model manifest at " + path.string());
  json manifest;
  try {
    manifest = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw io_error("corrupt model manifest " + path.string() + ": " + e.what());
  }
  if (!manifest.is_object() || manifest.value("format", "") != "spamtopic-model") {
    throw io_error(path.string() + " is not a spamtopic model manifest");
  }
  const int version = manifest.value("version", -1);
  if (version != kModelArtifactVersion) {
    throw validation_error("unsupported model artifact version " + std::to_string(version) + " (this build reads " +
                           std::to_string(kModelArtifactVersion) + ")");
  }
  return manifest;
}

json model_manifest(const models::TrainedModel& model, ArtifactWriter& out, const std::optional<Config>& config) {
  json m{{"format", "spamtopic-model"},
         {"version", kModelArtifactVersion},
         {"model", spec_json(model.spec)},
         {"classes", model.classes},
         {"feature_dimension", model.feature_dimension}};
  m["parameters"] = write_model_files(model, out);
  m["config"] = config ? json::parse(config_to_json(*config)) : json(nullptr);
  return m;
}

models::TrainedModel model_from_manifest(const json& manifest, const ArtifactReader& in) {
  try {
    models::TrainedModel model;
    model.spec = spec_from_json(manifest.at("model"));
    model.classes = manifest.at("classes").get<std::vector<std::string>>();
    model.feature_dimension = manifest.at("feature_dimension").get<std::size_t>();
    if (model.classes.empty()) throw io_error("corrupt model manifest: no classes");
    model.parameters = read_model_files(model.spec, model.classes.size(), model.feature_dimension, in);
    return model;
  } catch (const json::exception& e) {
    throw io_error(std::string("corrupt model manifest: ") + e.what());
  }
}

}  // namespace

void save_model(const models::TrainedModel& model, const fs::path& dir, const std::optional<Config>& config) {
  ArtifactWriter out(dir);
  json manifest = model_manifest(model, out, config);
  manifest["files"] = out.files();
  write_file_atomic(dir / "manifest.json", manifest.dump(2));
}

models::TrainedModel load_model(const fs::path& dir) {
  const json manifest = read_manifest(dir);
  const ArtifactReader in(dir, manifest.at("files"));
  return model_from_manifest(manifest, in);
}

void save_pipeline(const eval::Pipeline& pipeline, const fs::path& dir, const std::optional<Config>& config) {
  ArtifactWriter out(dir);
  json manifest = model_manifest(pipeline.model, out, config);
  const auto& enc = pipeline.encoder;
  json e{{"kind", eval::to_string(enc.kind)},
         {"language", to_string(enc.language)},
         {"dimension", enc.dimension},
         {"balance", balance::to_string(pipeline.spec.balance)}};
  switch (enc.kind) {
    case eval::EncoderKind::bow:
    case eval::EncoderKind::tfidf: {
      json vocab{{"words", enc.vocab.words},
                 {"document_frequency", enc.vocab.document_frequency},
                 {"min_df", enc.vocab.min_df},
                 {"cap", enc.vocab.cap}};
      out.add("vocabulary.json", vocab.dump());
      if (enc.kind == eval::EncoderKind::tfidf) {
        Writer w;
        w.put<std::uint64_t>(enc.idf.corpus_size);
        w.put_doubles(enc.idf.idf);
        out.add("idf.bin", w.bytes());
      }
      break;
    }
    case eval::EncoderKind::w2v: {
      out.add("embedding_words.json", json(enc.embeddings.words).dump());
      Writer w;
      w.put<std::uint64_t>(enc.embeddings.dimension);
      w.put_doubles(enc.embeddings.vectors);
      out.add("embeddings.bin", w.bytes());
      break;
    }
    case eval::EncoderKind::ext:
      e["provider_url"] = enc.provider ? enc.provider->url : "";
      e["provider_timeout_secs"] = enc.provider ? enc.provider->timeout_secs : 60.0;
      break;
  }
  manifest["encoder"] = e;
  manifest["files"] = out.files();
  write_file_atomic(dir / "manifest.json", manifest.dump(2));
}

eval::Pipeline load_pipeline(const fs::path& dir) {
  const json manifest = read_manifest(dir);
  if (!manifest.contains("encoder")) throw validation_error(dir.string() + " holds a bare model, not a pipeline");
  const ArtifactReader in(dir, manifest.at("files"));
  eval::Pipeline p;
  p.model = model_from_manifest(manifest, in);
  p.spec.model = p.model.spec;
  try {
    const auto& e = manifest.at("encoder");
    const auto kind = eval::parse_encoder(e.at("kind").get<std::string>());
    const auto lang = parse_language(e.at("language").get<std::string>());
    const auto strategy = balance::parse_strategy(e.at("balance").get<std::string>());
    if (!kind || !lang || !strategy) throw io_error("corrupt model manifest: bad encoder section");
    auto& enc = p.encoder;
    enc.kind = *kind;
    enc.language = *lang;
    enc.dimension = e.at("dimension").get<std::size_t>();
    p.spec.encoder = *kind;
    p.spec.balance = *strategy;
    switch (enc.kind) {
      case eval::EncoderKind::bow:
      case eval::EncoderKind::tfidf: {
        const json vocab = json::parse(in.raw("vocabulary.json"));
        enc.vocab.language = enc.language;
        enc.vocab.words = vocab.at("words").get<std::vector<std::string>>();
        enc.vocab.document_frequency = vocab.at("document_frequency").get<std::vector<std::size_t>>();
        enc.vocab.min_df = vocab.at("min_df").get<std::size_t>();
        enc.vocab.cap = vocab.at("cap").get<std::size_t>();
        vectorize::reindex(enc.vocab);
        if (enc.kind == eval::EncoderKind::tfidf) {
          auto r = in.open("idf.bin");
          enc.idf.corpus_size = r.get<std::uint64_t>();
          enc.idf.idf = r.get_doubles();
          r.finish();
          check_length(enc.idf.idf, enc.vocab.size(), "idf.bin");
        }
        break;
      }
      case eval::EncoderKind::w2v: {
        auto& t = enc.embeddings;
        t.language = enc.language;
        t.words = json::parse(in.raw("embedding_words.json")).get<std::vector<std::string>>();
        auto r = in.open("embeddings.bin");
        t.dimension = r.get<std::uint64_t>();
        t.vectors = r.get_doubles();
        r.finish();
        check_length(t.vectors, t.words.size() * t.dimension, "embeddings.bin");
        vectorize::reindex(t);
        break;
      }
      case eval::EncoderKind::ext: {
        vectorize::ProviderConfig provider;
        provider.url = e.at("provider_url").get<std::string>();
        provider.timeout_secs = e.at("provider_timeout_secs").get<double>();
        enc.provider = provider;
        break;
      }
    }
  } catch (const json::exception& ex) {
    throw io_error(std::string("corrupt model manifest: ") + ex.what());
  }
  if (p.encoder.dimension != p.model.feature_dimension) {
    throw io_error("corrupt model artifact: encoder and model dimensions differ");
  }
  return p;
}

}  // namespace spamtopic::store
