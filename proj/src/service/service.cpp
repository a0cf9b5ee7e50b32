#include "spamtopic/service.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "spamtopic/cluster.hpp"
#include "spamtopic/dataset.hpp"
#include "spamtopic/errors.hpp"
#include "spamtopic/ingest.hpp"
#include "spamtopic/model_store.hpp"
#include "spamtopic/pipeline.hpp"

namespace spamtopic::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct HttpError {
  int status;
  std::string message;
};

[[noreturn]] void fail(int status, const std::string& message) { throw HttpError{status, message}; }

int status_for(const Error& e) {
  if (const auto* s = dynamic_cast<const cluster::SessionError*>(&e)) {
    switch (s->code()) {
      case cluster::SessionError::Code::conflict: return 409;
      case cluster::SessionError::Code::not_found: return 404;
      case cluster::SessionError::Code::unprocessable: return 422;
    }
  }
  switch (e.kind()) {
    case ErrorKind::usage:
    case ErrorKind::validation: return 422;
    case ErrorKind::adapter: return 502;
    case ErrorKind::io:
    case ErrorKind::internal: return 500;
  }
  return 500;
}

std::string now_iso8601() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json parse_body(const httplib::Request& req) {
  try {
    json j = json::parse(req.body.empty() ? std::string("{}") : req.body);
    if (!j.is_object()) fail(422, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    fail(422, std::string("request body is not valid JSON: ") + e.what());
  }
}

std::size_t as_index(const json& v, const char* what) {
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) fail(422, std::string(what) + " must be a non-negative integer");
  return v.get<std::size_t>();
}

std::string as_label(const json& body) {
  if (!body.contains("label") || !body["label"].is_string() || body["label"].get<std::string>().empty()) {
    fail(422, "label must be a nonempty string");
  }
  return body["label"].get<std::string>();
}

bool valid_dataset_name(const std::string& name) {
  if (name.empty() || name.size() > 200 || name.front() == '.') return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
  });
}

struct SessionEntry {
  std::mutex mutex;
  std::string dataset;
  std::string created_at;
  std::shared_ptr<const std::vector<store::DatasetRecord>> records;
  std::unique_ptr<cluster::LabelingSession> session;
  fs::path log_path;
  std::optional<json> export_payload;
};

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::thread thread;
  std::mutex join_mutex;
  int bound_port = -1;
  std::shared_ptr<const eval::Pipeline> pipeline;

  std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<SessionEntry>> sessions;
  std::atomic<std::size_t> next_session{1};

  explicit Impl(ServiceOptions o) : options(std::move(o)) {
    if (options.model_dir) pipeline = std::make_shared<const eval::Pipeline>(store::load_pipeline(*options.model_dir));
    std::error_code ec;
    fs::create_directories(sessions_dir(), ec);
    if (ec) throw io_error("cannot create " + sessions_dir().string() + ": " + ec.message());
    restore_sessions();
    routes();
  }

  fs::path sessions_dir() const { return options.data_dir / "sessions"; }

  // ---- persistence -------------------------------------------------------

  void append_log(SessionEntry& entry, const std::string& line) {
    std::ofstream out(entry.log_path, std::ios::app | std::ios::binary);
    if (!out) throw io_error("cannot append to session log " + entry.log_path.string());
    out << line << '\n';
    out.flush();
    if (!out) throw io_error("cannot append to session log " + entry.log_path.string());
  }

  void restore_sessions() {
    std::vector<fs::path> logs;
    for (const auto& item : fs::directory_iterator(sessions_dir())) {
      if (item.path().extension() == ".jsonl") logs.push_back(item.path());
    }
    std::sort(logs.begin(), logs.end());
    for (const auto& path : logs) {
      std::ifstream in(path);
      std::string header_line;
      if (!std::getline(in, header_line)) continue;
      const json header = json::parse(header_line);
      auto entry = std::make_shared<SessionEntry>();
      entry->dataset = header.at("dataset").get<std::string>();
      entry->created_at = header.at("created_at").get<std::string>();
      entry->log_path = path;
      const std::string id = path.stem().string();
      entry->records = load_records(entry->dataset);
      auto dendrogram = load_or_build_dendrogram(entry->dataset, *entry->records);
      std::vector<cluster::SessionOp> ops;
      bool exported = false;
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (json::parse(line).value("op", "") == "export") {
          exported = true;
          continue;
        }
        ops.push_back(cluster::session_op_from_json(line));
      }
      entry->session = std::make_unique<cluster::LabelingSession>(
          cluster::LabelingSession::replay(id, std::move(dendrogram), ops));
      if (exported) entry->export_payload = do_export(id, *entry, false);
      sessions[id] = entry;
      const auto digits = id.substr(id.find('-') + 1);
      next_session = std::max<std::size_t>(next_session, std::stoul(digits) + 1);
    }
  }

  std::shared_ptr<const std::vector<store::DatasetRecord>> load_records(const std::string& dataset) {
    const fs::path path = options.data_dir / (dataset + ".jsonl");
    if (!fs::exists(path)) fail(404, "unknown dataset '" + dataset + "'");
    auto result = store::read_dataset(path);
    return std::make_shared<const std::vector<store::DatasetRecord>>(std::move(result.records));
  }

  cluster::Dendrogram load_or_build_dendrogram(const std::string& dataset,
                                               const std::vector<store::DatasetRecord>& records) {
    const fs::path path = options.data_dir / (dataset + ".dendrogram.json");
    if (fs::exists(path)) {
      auto d = cluster::dendrogram_from_json(store::read_file(path));
      if (d.n_leaves != records.size()) {
        fail(422, "dendrogram " + path.string() + " has " + std::to_string(d.n_leaves) + " leaves but the dataset has " +
                      std::to_string(records.size()) + " records");
      }
      return d;
    }
    if (records.size() > options.config.max_cluster_docs) {
      fail(422, "dataset has " + std::to_string(records.size()) + " records, above the clustering limit of " +
                    std::to_string(options.config.max_cluster_docs));
    }
    const auto lang = eval::dataset_language(records);
    std::vector<textprep::TokenDoc> docs;
    for (const auto& r : records) docs.push_back(store::token_doc(r));
    const auto vocab = vectorize::build_vocabulary(docs, options.config.bow_cap, options.config.min_df(lang));
    std::vector<vectorize::SparseVector> rows;
    for (const auto& d : docs) rows.push_back(vectorize::encode_bow(d, vocab));
    auto dendrogram = cluster::ward_agglomerate(rows);
    store::write_file_atomic(path, cluster::dendrogram_to_json(dendrogram));
    return dendrogram;
  }

  // ---- helpers -------------------------------------------------------------

  std::shared_ptr<SessionEntry> find_session(const std::string& id) {
    std::shared_lock lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "unknown session '" + id + "'");
    return it->second;
  }

  json handle_json(const std::string& id, const SessionEntry& e) const {
    return json{{"id", id},
                {"dataset", e.dataset},
                {"created_at", e.created_at},
                {"status", e.session->exported() ? "exported" : "open"},
                {"n_leaves", e.session->dendrogram().n_leaves}};
  }

  json cluster_summary(const SessionEntry& e) const {
    const auto& assignment = e.session->assignment();
    if (!assignment) return json{{"cut", nullptr}, {"cluster_count", 0}, {"clusters", json::array()}};
    const auto members = assignment->members();
    json clusters = json::array();
    for (std::size_t c = 0; c < members.size(); ++c) {
      std::map<std::string, std::size_t> df;
      for (std::size_t leaf : members[c]) {
        for (const auto& t : (*e.records)[leaf].tokens) ++df[t];
      }
      std::vector<std::pair<std::string, std::size_t>> ranked(df.begin(), df.end());
      std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
      json top = json::array();
      for (std::size_t i = 0; i < ranked.size() && i < 10; ++i) top.push_back({{"token", ranked[i].first}, {"count", ranked[i].second}});
      const auto label = e.session->label_of(c);
      clusters.push_back({{"id", c}, {"size", members[c].size()}, {"top_tokens", top},
                          {"label", label ? json(*label) : json(nullptr)}});
    }
    json cut = json::object();
    if (assignment->cut_height) cut["height"] = *assignment->cut_height;
    if (assignment->cut_k) cut["k"] = *assignment->cut_k;
    return json{{"cut", cut}, {"cluster_count", assignment->cluster_count}, {"clusters", clusters}};
  }

  json do_export(const std::string& id, SessionEntry& e, bool log_it) {
    const auto& result = e.session->export_labels();
    const fs::path dir = options.data_dir / "exports" / id;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw io_error("cannot create " + dir.string() + ": " + ec.message());
    std::vector<store::DatasetRecord> labeled = *e.records;
    for (std::size_t i = 0; i < labeled.size(); ++i) labeled[i].label = result.labels[i];
    const fs::path path = dir / (e.dataset + ".labeled.jsonl");
    store::write_dataset(labeled, path);
    json payload{{"session", id},
                 {"path", path.string()},
                 {"documents", labeled.size()},
                 {"class_counts", result.class_counts}};
    store::write_file_atomic(dir / "manifest.json", payload.dump(2));
    if (log_it) append_log(e, R"({"op":"export"})");
    return payload;
  }

  // ---- routes --------------------------------------------------------------

  template <typename F>
  httplib::Server::Handler wrap(F&& f) {
    return [this, f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
      int status = 200;
      json body;
      try {
        body = f(req);
      } catch (const HttpError& e) {
        status = e.status;
        body = json{{"error", e.message}};
      } catch (const Error& e) {
        status = status_for(e);
        body = json{{"error", e.what()}};
      } catch (const json::exception& e) {
        status = 422;
        body = json{{"error", e.what()}};
      } catch (const std::exception& e) {
        status = 500;
        body = json{{"error", e.what()}};
      }
      res.status = status;
      res.set_content(body.dump(), "application/json");
    };
  }

  template <typename F>
  httplib::Server::Handler session_route(F&& f) {
    return wrap([this, f = std::forward<F>(f)](const httplib::Request& req) {
      const std::string id = req.matches[1];
      auto entry = find_session(id);
      std::lock_guard lock(entry->mutex);
      return f(req, id, *entry);
    });
  }

  void routes() {
    server.set_payload_max_length(64u << 20);
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
      res.status = 204;
    });

    server.Get("/health", wrap([](const httplib::Request&) { return json{{"status", "ok"}}; }));

    server.Get("/sessions", wrap([this](const httplib::Request&) {
      std::vector<std::pair<std::string, std::shared_ptr<SessionEntry>>> snapshot;
      {
        std::shared_lock lock(sessions_mutex);
        snapshot.assign(sessions.begin(), sessions.end());
      }
      json list = json::array();
      for (auto& [id, entry] : snapshot) {
        std::lock_guard lock(entry->mutex);
        list.push_back(handle_json(id, *entry));
      }
      return json{{"sessions", list}};
    }));

    server.Post("/sessions", wrap([this](const httplib::Request& req) {
      const json body = parse_body(req);
      if (!body.contains("dataset") || !body["dataset"].is_string()) fail(422, "dataset must be a string");
      const auto dataset = body["dataset"].get<std::string>();
      if (!valid_dataset_name(dataset)) fail(422, "invalid dataset name '" + dataset + "'");
      auto entry = std::make_shared<SessionEntry>();
      entry->dataset = dataset;
      entry->created_at = now_iso8601();
      entry->records = load_records(dataset);
      auto dendrogram = load_or_build_dendrogram(dataset, *entry->records);
      char buf[32];
      std::snprintf(buf, sizeof buf, "session-%06zu", next_session++);
      const std::string id = buf;
      entry->session = std::make_unique<cluster::LabelingSession>(id, std::move(dendrogram));
      entry->log_path = sessions_dir() / (id + ".jsonl");
      append_log(*entry, json{{"dataset", dataset}, {"created_at", entry->created_at}}.dump());
      json handle = handle_json(id, *entry);
      std::unique_lock lock(sessions_mutex);
      sessions[id] = entry;
      return handle;
    }));

    server.Get(R"(/sessions/([^/]+))", session_route([this](const httplib::Request&, const std::string& id, SessionEntry& e) {
      json out = handle_json(id, e);
      out["summary"] = cluster_summary(e);
      return out;
    }));

    server.Get(R"(/sessions/([^/]+)/dendrogram)",
               session_route([](const httplib::Request&, const std::string&, SessionEntry& e) {
                 return json::parse(cluster::dendrogram_to_json(e.session->dendrogram()));
               }));

    server.Post(R"(/sessions/([^/]+)/cut)",
                session_route([this](const httplib::Request& req, const std::string&, SessionEntry& e) {
                  const json body = parse_body(req);
                  std::optional<double> height;
                  std::optional<std::size_t> k;
                  if (body.contains("height")) {
                    if (!body["height"].is_number()) fail(422, "height must be a number");
                    height = body["height"].get<double>();
                  }
                  if (body.contains("k")) k = as_index(body["k"], "k");
                  e.session->cut(height, k);
                  append_log(e, cluster::session_op_to_json(e.session->log().back()));
                  return cluster_summary(e);
                }));

    server.Get(R"(/sessions/([^/]+)/clusters/(\d+)/samples)",
               session_route([this](const httplib::Request& req, const std::string&, SessionEntry& e) {
                 const auto& assignment = e.session->assignment();
                 if (!assignment) fail(409, "no cut has been made yet");
                 const std::size_t c = std::stoul(req.matches[2]);
                 if (c >= assignment->cluster_count) fail(404, "unknown cluster " + std::to_string(c));
                 std::size_t n = 20;
                 if (req.has_param("n")) {
                   try {
                     n = std::stoul(req.get_param_value("n"));
                   } catch (const std::exception&) {
                     fail(422, "n must be a non-negative integer");
                   }
                 }
                 auto members = assignment->members()[c];
                 std::mt19937_64 rng(options.config.seed * 0x9E3779B97F4A7C15ULL + c);
                 const std::size_t take = std::min(n, members.size());
                 for (std::size_t i = 0; i < take; ++i) std::swap(members[i], members[i + rng() % (members.size() - i)]);
                 json samples = json::array();
                 for (std::size_t i = 0; i < take; ++i) {
                   const auto& r = (*e.records)[members[i]];
                   samples.push_back({{"id", r.id}, {"merged_text", r.merged_text}});
                 }
                 return json{{"cluster", c}, {"size", members.size()}, {"samples", samples}};
               }));

    server.Post(R"(/sessions/([^/]+)/merge)",
                session_route([this](const httplib::Request& req, const std::string&, SessionEntry& e) {
                  const json body = parse_body(req);
                  if (!body.contains("clusters") || !body["clusters"].is_array()) fail(422, "clusters must be an array");
                  std::vector<std::size_t> clusters;
                  for (const auto& c : body["clusters"]) clusters.push_back(as_index(c, "cluster id"));
                  e.session->merge(clusters, as_label(body));
                  append_log(e, cluster::session_op_to_json(e.session->log().back()));
                  return cluster_summary(e);
                }));

    server.Post(R"(/sessions/([^/]+)/label)",
                session_route([this](const httplib::Request& req, const std::string&, SessionEntry& e) {
                  const json body = parse_body(req);
                  if (!body.contains("cluster")) fail(422, "cluster is required");
                  e.session->label(as_index(body["cluster"], "cluster"), as_label(body));
                  append_log(e, cluster::session_op_to_json(e.session->log().back()));
                  return cluster_summary(e);
                }));

    server.Post(R"(/sessions/([^/]+)/undo)",
                session_route([this](const httplib::Request&, const std::string&, SessionEntry& e) {
                  e.session->undo();
                  append_log(e, cluster::session_op_to_json(e.session->log().back()));
                  return cluster_summary(e);
                }));

    server.Post(R"(/sessions/([^/]+)/export)",
                session_route([this](const httplib::Request&, const std::string& id, SessionEntry& e) {
                  if (e.export_payload) return *e.export_payload;
                  e.export_payload = do_export(id, e, true);
                  return *e.export_payload;
                }));

    server.Post("/classify", wrap([this](const httplib::Request& req) {
      const auto model = pipeline;
      if (!model) fail(503, "no model loaded; start the service with a model directory");
      const json body = parse_body(req);
      json out;
      std::string text;
      if (body.contains("raw_email") && body["raw_email"].is_string()) {
        const auto raw = body["raw_email"].get<std::string>();
        const auto outcome = ingest::ingest_message(
            "request", std::span(reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()), options.config.adapters);
        if (const auto* rej = std::get_if<ingest::Rejection>(&outcome)) {
          fail(422, "email rejected: " + std::string(ingest::to_string(rej->reason)) +
                        (rej->detail.empty() ? "" : " (" + rej->detail + ")"));
        }
        const auto& doc = std::get<ingest::EmailDocument>(outcome);
        if (doc.language != model->encoder.language) {
          fail(422, "email language " + std::string(to_string(doc.language)) + " does not match the model language " +
                        std::string(to_string(model->encoder.language)));
        }
        text = doc.merged_text;
        out["flags"] = doc.flags.names();
        out["language"] = to_string(doc.language);
      } else if (body.contains("text") && body["text"].is_string()) {
        text = body["text"].get<std::string>();
        out["flags"] = json::array();
        out["language"] = to_string(model->encoder.language);
      } else {
        fail(422, "body needs raw_email or text");
      }
      const auto prediction = eval::predict_text(*model, text);
      out["label"] = prediction.label;
      out["scores"] = prediction.scores;
      out["pipeline"] = model->spec.id();
      return out;
    }));
  }
};

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {}

Service::~Service() { stop(); }

int Service::start() {
  auto& s = *impl_;
  if (s.bound_port > 0) return s.bound_port;
  if (s.options.port == 0) {
    s.bound_port = s.server.bind_to_any_port(s.options.host);
  } else {
    s.bound_port = s.server.bind_to_port(s.options.host, s.options.port) ? s.options.port : -1;
  }
  if (s.bound_port <= 0) {
    throw io_error("cannot bind " + s.options.host + ":" + std::to_string(s.options.port));
  }
  s.thread = std::thread([&s] { s.server.listen_after_bind(); });
  s.server.wait_until_ready();
  return s.bound_port;
}

void Service::wait() {
  std::lock_guard lock(impl_->join_mutex);
  if (impl_->thread.joinable()) impl_->thread.join();
}

void Service::stop() {
  if (!impl_) return;
  impl_->server.stop();
  std::lock_guard lock(impl_->join_mutex);
  if (impl_->thread.joinable()) impl_->thread.join();
}

int Service::port() const { return impl_->bound_port; }

}  // namespace spamtopic::service
