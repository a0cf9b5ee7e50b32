#include <algorithm>
#include <set>

#include <json.hpp>

#include "spamtopic/cluster.hpp"

namespace spamtopic::cluster {

LabelingSession::LabelingSession(std::string id, Dendrogram dendrogram)
    : id_(std::move(id)), dendrogram_(std::move(dendrogram)) {
  check_dendrogram(dendrogram_);
}

void LabelingSession::require_open() const {
  if (exported_) throw SessionError(SessionError::Code::conflict, "session " + id_ + " is exported and immutable");
}

std::optional<std::string> LabelingSession::label_of(std::size_t cluster) const {
  for (const auto& g : groups_) {
    if (std::find(g.clusters.begin(), g.clusters.end(), cluster) != g.clusters.end()) return g.label;
  }
  return std::nullopt;
}

void LabelingSession::apply(const SessionOp& op) {
  switch (op.type) {
    case SessionOp::Type::cut: {
      if (op.height && op.k) throw SessionError(SessionError::Code::unprocessable, "give either height or k, not both");
      if (op.height) {
        if (!(*op.height >= 0.0)) throw SessionError(SessionError::Code::unprocessable, "cut height must be >= 0");
        assignment_ = cut_dendrogram(dendrogram_, *op.height);
      } else if (op.k) {
        if (*op.k < 1 || *op.k > dendrogram_.n_leaves) {
          throw SessionError(SessionError::Code::unprocessable,
                             "k must lie in [1, " + std::to_string(dendrogram_.n_leaves) + "]");
        }
        assignment_ = cut_to_k(dendrogram_, *op.k);
      } else {
        throw SessionError(SessionError::Code::unprocessable, "cut needs a height or k");
      }
      groups_.clear();
      return;
    }
    case SessionOp::Type::merge:
    case SessionOp::Type::label: {
      if (!assignment_) throw SessionError(SessionError::Code::conflict, "no cut has been made yet");
      if (op.label.empty()) throw SessionError(SessionError::Code::unprocessable, "label must be nonempty");
      if (op.clusters.empty()) throw SessionError(SessionError::Code::unprocessable, "no clusters given");
      std::set<std::size_t> seen;
      for (std::size_t c : op.clusters) {
        if (c >= assignment_->cluster_count) {
          throw SessionError(SessionError::Code::not_found, "unknown cluster " + std::to_string(c));
        }
        if (!seen.insert(c).second) {
          throw SessionError(SessionError::Code::unprocessable, "cluster " + std::to_string(c) + " listed twice");
        }
        if (auto existing = label_of(c)) {
          throw SessionError(SessionError::Code::conflict,
                             "cluster " + std::to_string(c) + " is already labeled '" + *existing + "'");
        }
      }
      groups_.push_back({std::vector<std::size_t>(seen.begin(), seen.end()), op.label});
      return;
    }
    case SessionOp::Type::undo:
      return;
  }
}

void LabelingSession::rebuild() {
  // Effective operations are the log with each undo cancelling its predecessor.
  std::vector<const SessionOp*> effective;
  for (const auto& op : log_) {
    if (op.type == SessionOp::Type::undo) {
      if (!effective.empty()) effective.pop_back();
    } else {
      effective.push_back(&op);
    }
  }
  assignment_.reset();
  groups_.clear();
  for (const auto* op : effective) apply(*op);
}

const ClusterAssignment& LabelingSession::cut(std::optional<double> height, std::optional<std::size_t> k) {
  require_open();
  SessionOp op;
  op.type = SessionOp::Type::cut;
  op.height = height;
  op.k = k;
  apply(op);
  log_.push_back(op);
  return *assignment_;
}

void LabelingSession::merge(const std::vector<std::size_t>& clusters, const std::string& label) {
  require_open();
  SessionOp op;
  op.type = SessionOp::Type::merge;
  op.clusters = clusters;
  op.label = label;
  apply(op);
  log_.push_back(op);
}

void LabelingSession::label(std::size_t cluster, const std::string& label) {
  require_open();
  SessionOp op;
  op.type = SessionOp::Type::label;
  op.clusters = {cluster};
  op.label = label;
  apply(op);
  log_.push_back(op);
}

void LabelingSession::undo() {
  require_open();
  std::size_t effective = 0;
  for (const auto& op : log_) {
    if (op.type == SessionOp::Type::undo) {
      if (effective > 0) --effective;
    } else {
      ++effective;
    }
  }
  if (effective == 0) throw SessionError(SessionError::Code::conflict, "nothing to undo");
  log_.push_back({SessionOp::Type::undo, {}, {}, {}, {}});
  rebuild();
}

const ExportResult& LabelingSession::export_labels() {
  if (exported_) return *exported_;
  if (!assignment_) throw SessionError(SessionError::Code::unprocessable, "no cut has been made yet");
  std::vector<std::string> by_cluster(assignment_->cluster_count);
  for (const auto& g : groups_) {
    for (std::size_t c : g.clusters) by_cluster[c] = g.label;
  }
  for (std::size_t c = 0; c < by_cluster.size(); ++c) {
    if (by_cluster[c].empty()) {
      throw SessionError(SessionError::Code::unprocessable, "cluster " + std::to_string(c) + " is unlabeled");
    }
  }
  ExportResult result;
  result.labels.reserve(assignment_->membership.size());
  for (std::size_t m : assignment_->membership) {
    result.labels.push_back(by_cluster[m]);
    ++result.class_counts[by_cluster[m]];
  }
  exported_ = std::move(result);
  return *exported_;
}

LabelingSession LabelingSession::replay(std::string id, Dendrogram dendrogram, const std::vector<SessionOp>& log) {
  LabelingSession s(std::move(id), std::move(dendrogram));
  s.log_ = log;
  s.rebuild();
  return s;
}

namespace {

std::string_view type_name(SessionOp::Type t) {
  switch (t) {
    case SessionOp::Type::cut: return "cut";
    case SessionOp::Type::merge: return "merge";
    case SessionOp::Type::label: return "label";
    case SessionOp::Type::undo: return "undo";
  }
  return "undo";
}

}  // namespace

std::string session_op_to_json(const SessionOp& op) {
  nlohmann::json j{{"op", type_name(op.type)}};
  if (op.height) j["height"] = *op.height;
  if (op.k) j["k"] = *op.k;
  if (!op.clusters.empty()) j["clusters"] = op.clusters;
  if (!op.label.empty()) j["label"] = op.label;
  return j.dump();
}

SessionOp session_op_from_json(const std::string& line) {
  try {
    const auto j = nlohmann::json::parse(line);
    SessionOp op;
    const auto name = j.at("op").get<std::string>();
    if (name == "cut") op.type = SessionOp::Type::cut;
    else if (name == "merge") op.type = SessionOp::Type::merge;
    else if (name == "label") op.type = SessionOp::Type::label;
    else if (name == "undo") op.type = SessionOp::Type::undo;
    else throw validation_error("unknown session operation '" + name + "'");
    if (j.contains("height")) op.height = j["height"].get<double>();
    if (j.contains("k")) op.k = j["k"].get<std::size_t>();
    if (j.contains("clusters")) op.clusters = j["clusters"].get<std::vector<std::size_t>>();
    if (j.contains("label")) op.label = j["label"].get<std::string>();
    return op;
  } catch (const nlohmann::json::exception& e) {
    throw validation_error(std::string("malformed session log entry: ") + e.what());
  }
}

}  // namespace spamtopic::cluster
